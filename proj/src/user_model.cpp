#include "ital/user_model.hpp"

#include <cmath>

namespace ital {

void UserModelParams::validate() const {
    if (!std::isfinite(p_label) || p_label < 0.0 || p_label > 1.0) {
        throw ConfigError("user model: p_label must lie in [0, 1]");
    }
    if (!std::isfinite(p_mistake) || p_mistake < 0.0 || p_mistake >= 1.0) {
        throw ConfigError("user model: p_mistake must lie in [0, 1)");
    }
}

double feedback_probability(int f, int r, const UserModelParams& p) {
    if (f < -1 || f > 1 || (r != -1 && r != 1)) {
        throw ContractError("feedback_probability: feedback must be -1, 0 or +1 and relevance -1 or +1");
    }
    if (f == 0) {
        return 1.0 - p.p_label;
    }
    return f == r ? p.p_label * (1.0 - p.p_mistake) : p.p_label * p.p_mistake;
}

double feedback_probability(std::span<const int> f, const RelevanceConfig& r, const UserModelParams& params) {
    if (f.size() != r.size()) {
        throw ContractError("feedback_probability: feedback and relevance differ in length");
    }
    double p = 1.0;
    for (std::size_t i = 0; i < f.size(); ++i) {
        p *= feedback_probability(f[i], r[i], params);
    }
    return p;
}

}  // namespace ital
