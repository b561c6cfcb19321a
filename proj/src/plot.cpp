#include "ital/plot.hpp"

#include <algorithm>
#include <array>
#include <sstream>

namespace ital {

std::string learning_curve_svg(const std::vector<NamedCurve>& curves, const std::string& title) {
    constexpr double W = 720, H = 440, left = 60, right = 170, top = 40, bottom = 50;
    constexpr std::array<const char*, 12> colors{"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b",
                                                 "#e377c2", "#7f7f7f", "#bcbd22", "#17becf", "#000000", "#aec7e8"};
    std::size_t rounds = 1;
    double lo = 1.0, hi = 0.0;
    for (const auto& [name, c] : curves) {
        rounds = std::max(rounds, c.size() > 1 ? c.size() - 1 : 1);
        for (const double v : c) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    }
    if (hi < lo) {
        lo = 0.0;
        hi = 1.0;
    }
    // Pad the y range to tenths so small differences stay visible.
    lo = std::max(0.0, static_cast<int>(lo * 10.0) / 10.0);
    hi = std::min(1.0, static_cast<int>(hi * 10.0 + 0.999) / 10.0);
    if (hi - lo < 0.1) {
        hi = std::min(1.0, lo + 0.1);
        lo = hi - 0.1;
    }
    const double pw = W - left - right, ph = H - top - bottom;
    auto x = [&](double r) { return left + pw * r / static_cast<double>(rounds); };
    auto y = [&](double v) { return top + ph * (1.0 - (v - lo) / (hi - lo)); };

    std::ostringstream s;
    s.precision(5);
    s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
      << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    s << "<text x=\"" << W / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << title << "</text>\n";
    for (int t = 0; t <= 5; ++t) {
        const double v = lo + (hi - lo) * t / 5.0;
        s << "<line x1=\"" << left << "\" x2=\"" << left + pw << "\" y1=\"" << y(v) << "\" y2=\"" << y(v)
          << "\" stroke=\"#ddd\"/>\n";
        s << "<text x=\"" << left - 6 << "\" y=\"" << y(v) + 4 << "\" text-anchor=\"end\">" << v << "</text>\n";
    }
    for (std::size_t r = 0; r <= rounds; ++r) {
        s << "<text x=\"" << x(static_cast<double>(r)) << "\" y=\"" << top + ph + 18
          << "\" text-anchor=\"middle\">" << r << "</text>\n";
    }
    s << "<text x=\"" << left + pw / 2 << "\" y=\"" << H - 10 << "\" text-anchor=\"middle\">feedback round</text>\n";
    s << "<text transform=\"rotate(-90)\" x=\"" << -(top + ph / 2) << "\" y=\"16\" text-anchor=\"middle\">mAP</text>\n";
    s << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << pw << "\" height=\"" << ph
      << "\" fill=\"none\" stroke=\"#333\"/>\n";
    for (std::size_t i = 0; i < curves.size(); ++i) {
        const auto& [name, c] = curves[i];
        const char* color = colors[i % colors.size()];
        s << "<polyline fill=\"none\" stroke-width=\"2\" stroke=\"" << color << "\" points=\"";
        for (std::size_t r = 0; r < c.size(); ++r) {
            s << x(static_cast<double>(r)) << ',' << y(c[r]) << ' ';
        }
        s << "\"/>\n";
        const double ly = top + 14.0 + 18.0 * static_cast<double>(i);
        s << "<line x1=\"" << left + pw + 12 << "\" x2=\"" << left + pw + 34 << "\" y1=\"" << ly - 4 << "\" y2=\""
          << ly - 4 << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
        s << "<text x=\"" << left + pw + 40 << "\" y=\"" << ly << "\">" << name << "</text>\n";
    }
    s << "</svg>\n";
    return s.str();
}

}  // namespace ital
