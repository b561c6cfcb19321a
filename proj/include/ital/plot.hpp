#pragma once

#include <string>
#include <utility>
#include <vector>

namespace ital {

using NamedCurve = std::pair<std::string, std::vector<double>>;

/// Standalone SVG line chart of mAP over feedback rounds, one line per curve.
std::string learning_curve_svg(const std::vector<NamedCurve>& curves, const std::string& title);

}  // namespace ital
