#pragma once

// Self-contained SVG heatmaps. Color ramp (fixed): five stops
//   0.00 #0d0887, 0.25 #7e03a8, 0.50 #cc4778, 0.75 #f89540, 1.00 #f0f921
// linearly interpolated in RGB; NaN cells are left blank.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

namespace pharmonic {

inline std::string ramp_color(double t) {
  static constexpr std::array<std::array<int, 3>, 5> stops{{
      {0x0d, 0x08, 0x87}, {0x7e, 0x03, 0xa8}, {0xcc, 0x47, 0x78}, {0xf8, 0x95, 0x40}, {0xf0, 0xf9, 0x21}}};
  t = std::clamp(std::isfinite(t) ? t : 0.0, 0.0, 1.0);
  double s = t * 4.0;
  int k = std::min(3, static_cast<int>(s));
  double f = s - k;
  char buf[8];
  int c[3];
  for (int i = 0; i < 3; ++i)
    c[i] = static_cast<int>(std::lround(stops[k][i] + f * (stops[k + 1][i] - stops[k][i])));
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", c[0], c[1], c[2]);
  return buf;
}

struct Heatmap {
  int width = 0, height = 0;   ///< cells
  std::vector<double> values;  ///< row-major, row 0 at the bottom
  std::string title;
  /// Map values through log10(1 + v / scale) before normalizing.
  bool log_scale = false;
};

/// Renders the heatmap with a title and a min/max legend. Values are
/// normalized over their finite range; pixel size is chosen so the image is
/// about 512 px wide.
inline std::string render_svg(const Heatmap& m) {
  std::vector<double> v = m.values;
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (double x : v)
    if (std::isfinite(x)) lo = std::min(lo, x), hi = std::max(hi, x);
  if (!std::isfinite(lo)) lo = hi = 0.0;
  auto norm = [&](double x) {
    if (!(hi > lo)) return 0.0;
    if (m.log_scale) return std::log1p(x - lo) / std::log1p(hi - lo);
    return (x - lo) / (hi - lo);
  };
  const double px = 512.0 / std::max(1, m.width);
  const double W = px * m.width, H = px * m.height;
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W + 20 << "\" height=\"" << H + 60
     << "\" shape-rendering=\"crispEdges\">\n";
  os << "<text x=\"10\" y=\"20\" font-family=\"monospace\" font-size=\"14\">" << m.title << "</text>\n";
  os << "<g transform=\"translate(10,30)\">\n";
  char buf[160];
  for (int j = 0; j < m.height; ++j)
    for (int i = 0; i < m.width; ++i) {
      double x = v[static_cast<std::size_t>(j) * m.width + i];
      if (!std::isfinite(x)) continue;
      std::snprintf(buf, sizeof buf, "<rect x=\"%.3f\" y=\"%.3f\" width=\"%.3f\" height=\"%.3f\" fill=\"%s\"/>\n",
                    i * px, (m.height - 1 - j) * px, px, px, ramp_color(norm(x)).c_str());
      os << buf;
    }
  os << "</g>\n";
  std::snprintf(buf, sizeof buf,
                "<text x=\"10\" y=\"%.1f\" font-family=\"monospace\" font-size=\"12\">min %.6g  max %.6g%s</text>\n",
                H + 50, lo, hi, m.log_scale ? "  (log ramp)" : "");
  os << buf << "</svg>\n";
  return os.str();
}

}  // namespace pharmonic
