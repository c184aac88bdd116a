#pragma once

// Static SVG scatter/line plots for quick looks at report series.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace phonotrack::plot {

struct HLine {
  double y = 0.0;
  std::string label;
  bool dashed = false;
};

struct Figure {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<double> x;
  std::vector<double> y;
  bool connect = false;      ///< polyline instead of markers
  bool identity = false;     ///< draw y = x
  std::vector<HLine> hlines;
};

namespace detail {

inline std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

inline std::string esc(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '<') out += "&lt;";
    else if (c == '>') out += "&gt;";
    else if (c == '&') out += "&amp;";
    else out += c;
  }
  return out;
}

}  // namespace detail

inline std::string render_svg(const Figure& f, int width = 640, int height = 420) {
  const double ml = 70, mr = 20, mt = 40, mb = 55;
  double x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  if (!f.x.empty()) {
    x0 = *std::min_element(f.x.begin(), f.x.end());
    x1 = *std::max_element(f.x.begin(), f.x.end());
    y0 = *std::min_element(f.y.begin(), f.y.end());
    y1 = *std::max_element(f.y.begin(), f.y.end());
  }
  for (const auto& h : f.hlines) {
    y0 = std::min(y0, h.y);
    y1 = std::max(y1, h.y);
  }
  if (f.identity) {
    y0 = x0 = std::min(x0, y0);
    y1 = x1 = std::max(x1, y1);
  }
  auto pad = [](double& lo, double& hi) {
    const double span = hi - lo;
    const double m = span > 0 ? 0.05 * span : (std::abs(lo) > 0 ? 0.05 * std::abs(lo) : 1.0);
    lo -= m;
    hi += m;
  };
  pad(x0, x1);
  pad(y0, y1);
  const double pw = width - ml - mr, ph = height - mt - mb;
  auto sx = [&](double v) { return ml + (v - x0) / (x1 - x0) * pw; };
  auto sy = [&](double v) { return mt + (y1 - v) / (y1 - y0) * ph; };

  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
    << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s << "<text x=\"" << width / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">"
    << detail::esc(f.title) << "</text>\n";
  s << "<rect x=\"" << ml << "\" y=\"" << mt << "\" width=\"" << pw << "\" height=\"" << ph
    << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double xv = x0 + (x1 - x0) * i / 4.0, yv = y0 + (y1 - y0) * i / 4.0;
    s << "<text x=\"" << sx(xv) << "\" y=\"" << mt + ph + 16 << "\" text-anchor=\"middle\">"
      << detail::fmt(xv) << "</text>\n";
    s << "<text x=\"" << ml - 6 << "\" y=\"" << sy(yv) + 4 << "\" text-anchor=\"end\">"
      << detail::fmt(yv) << "</text>\n";
  }
  s << "<text x=\"" << ml + pw / 2 << "\" y=\"" << height - 12 << "\" text-anchor=\"middle\">"
    << detail::esc(f.x_label) << "</text>\n";
  s << "<text transform=\"translate(16," << mt + ph / 2 << ") rotate(-90)\" text-anchor=\"middle\">"
    << detail::esc(f.y_label) << "</text>\n";
  if (f.identity)
    s << "<line x1=\"" << sx(x0) << "\" y1=\"" << sy(x0) << "\" x2=\"" << sx(x1) << "\" y2=\"" << sy(x1)
      << "\" stroke=\"gray\"/>\n";
  for (const auto& h : f.hlines) {
    s << "<line x1=\"" << ml << "\" y1=\"" << sy(h.y) << "\" x2=\"" << ml + pw << "\" y2=\"" << sy(h.y)
      << "\" stroke=\"firebrick\"" << (h.dashed ? " stroke-dasharray=\"6 4\"" : "") << "/>\n";
    s << "<text x=\"" << ml + pw - 4 << "\" y=\"" << sy(h.y) - 4 << "\" text-anchor=\"end\" fill=\"firebrick\">"
      << detail::esc(h.label) << "</text>\n";
  }
  if (f.connect && f.x.size() > 1) {
    s << "<polyline fill=\"none\" stroke=\"steelblue\" points=\"";
    for (std::size_t i = 0; i < f.x.size(); ++i) s << (i ? " " : "") << sx(f.x[i]) << "," << sy(f.y[i]);
    s << "\"/>\n";
  } else {
    for (std::size_t i = 0; i < f.x.size(); ++i)
      s << "<circle cx=\"" << sx(f.x[i]) << "\" cy=\"" << sy(f.y[i]) << "\" r=\"3\" fill=\"steelblue\"/>\n";
  }
  s << "</svg>\n";
  return s.str();
}

}  // namespace phonotrack::plot
