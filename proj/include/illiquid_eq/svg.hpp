#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include "error.hpp"
#include "io.hpp"

namespace illiquid_eq {

struct PlotSeries {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
  std::string dash;  // empty for solid, SVG dasharray otherwise
  std::string color = "#1f3b73";
};

struct Plot {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<PlotSeries> series;
  double width = 640.0;
  double height = 420.0;
};

namespace detail {

inline std::string xml_escape(const std::string& s) {
  std::string o;
  for (char c : s) {
    switch (c) {
      case '&': o += "&amp;"; break;
      case '<': o += "&lt;"; break;
      case '>': o += "&gt;"; break;
      case '"': o += "&quot;"; break;
      default: o += c;
    }
  }
  return o;
}

struct Axis {
  double lo, hi;
  int exponent;  // tick labels are value / 10^exponent
};

inline Axis make_axis(double lo, double hi) {
  if (!(hi > lo)) {
    const double pad = lo == 0.0 ? 1.0 : 0.05 * std::fabs(lo);
    lo -= pad;
    hi += pad;
  }
  const double pad = 0.04 * (hi - lo);
  lo -= pad;
  hi += pad;
  const double mag = std::max(std::fabs(lo), std::fabs(hi));
  int e = 0;
  if (mag < 0.1 || (hi - lo) < 0.05) e = static_cast<int>(std::floor(std::log10(std::max(hi - lo, 1e-300))));
  return {lo, hi, e};
}

}  // namespace detail

/// Minimal SVG 1.1 line chart: frame, five ticks per axis with two-decimal labels, legend.
inline std::string render_svg(const Plot& p) {
  double xl = std::numeric_limits<double>::infinity(), xh = -xl, yl = xl, yh = -xl;
  for (const auto& s : p.series)
    for (std::size_t k = 0; k < s.x.size(); ++k) {
      if (!std::isfinite(s.x[k]) || !std::isfinite(s.y[k])) continue;
      xl = std::min(xl, s.x[k]);
      xh = std::max(xh, s.x[k]);
      yl = std::min(yl, s.y[k]);
      yh = std::max(yh, s.y[k]);
    }
  if (!std::isfinite(xl)) xl = 0.0, xh = 1.0, yl = 0.0, yh = 1.0;
  const auto ax = detail::make_axis(xl, xh);
  const auto ay = detail::make_axis(yl, yh);
  const double ml = 70, mr = 20, mt = 40, mb = 55;
  const double pw = p.width - ml - mr, ph = p.height - mt - mb;
  auto px = [&](double x) { return ml + (x - ax.lo) / (ax.hi - ax.lo) * pw; };
  auto py = [&](double y) { return mt + (1.0 - (y - ay.lo) / (ay.hi - ay.lo)) * ph; };
  auto f2 = [](double v) { return format_fixed(v, 2); };

  std::string o;
  o += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  o += "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" + f2(p.width) + "\" height=\"" +
       f2(p.height) + "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  o += "<rect x=\"0\" y=\"0\" width=\"" + f2(p.width) + "\" height=\"" + f2(p.height) + "\" fill=\"white\"/>\n";
  o += "<text x=\"" + f2(p.width / 2) + "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" +
       detail::xml_escape(p.title) + "</text>\n";
  o += "<rect x=\"" + f2(ml) + "\" y=\"" + f2(mt) + "\" width=\"" + f2(pw) + "\" height=\"" + f2(ph) +
       "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double fx = ax.lo + (ax.hi - ax.lo) * k / 4.0;
    const double fy = ay.lo + (ay.hi - ay.lo) * k / 4.0;
    const double X = px(fx), Y = py(fy);
    o += "<line x1=\"" + f2(X) + "\" y1=\"" + f2(mt + ph) + "\" x2=\"" + f2(X) + "\" y2=\"" + f2(mt + ph + 5) +
         "\" stroke=\"black\"/>\n";
    o += "<text x=\"" + f2(X) + "\" y=\"" + f2(mt + ph + 18) + "\" text-anchor=\"middle\">" +
         f2(fx / std::pow(10.0, ax.exponent)) + "</text>\n";
    o += "<line x1=\"" + f2(ml - 5) + "\" y1=\"" + f2(Y) + "\" x2=\"" + f2(ml) + "\" y2=\"" + f2(Y) +
         "\" stroke=\"black\"/>\n";
    o += "<text x=\"" + f2(ml - 8) + "\" y=\"" + f2(Y + 4) + "\" text-anchor=\"end\">" +
         f2(fy / std::pow(10.0, ay.exponent)) + "</text>\n";
  }
  auto scaled = [](const std::string& label, int e) {
    return e == 0 ? label : label + " (x1e" + std::to_string(e) + ")";
  };
  o += "<text x=\"" + f2(ml + pw / 2) + "\" y=\"" + f2(p.height - 12) + "\" text-anchor=\"middle\">" +
       detail::xml_escape(scaled(p.x_label, ax.exponent)) + "</text>\n";
  o += "<text x=\"16\" y=\"" + f2(mt + ph / 2) + "\" text-anchor=\"middle\" transform=\"rotate(-90 16 " +
       f2(mt + ph / 2) + ")\">" + detail::xml_escape(scaled(p.y_label, ay.exponent)) + "</text>\n";

  for (std::size_t s = 0; s < p.series.size(); ++s) {
    const auto& ser = p.series[s];
    o += "<polyline fill=\"none\" stroke=\"" + ser.color + "\" stroke-width=\"1.5\"";
    if (!ser.dash.empty()) o += " stroke-dasharray=\"" + ser.dash + "\"";
    o += " points=\"";
    for (std::size_t k = 0; k < ser.x.size(); ++k) {
      if (!std::isfinite(ser.x[k]) || !std::isfinite(ser.y[k])) continue;
      o += f2(px(ser.x[k])) + "," + f2(py(ser.y[k])) + " ";
    }
    o += "\"/>\n";
    const double ly = mt + 14 + 16 * static_cast<double>(s);
    const double lx = ml + pw - 190;
    o += "<line x1=\"" + f2(lx) + "\" y1=\"" + f2(ly - 4) + "\" x2=\"" + f2(lx + 28) + "\" y2=\"" + f2(ly - 4) +
         "\" stroke=\"" + ser.color + "\" stroke-width=\"1.5\"";
    if (!ser.dash.empty()) o += " stroke-dasharray=\"" + ser.dash + "\"";
    o += "/>\n<text x=\"" + f2(lx + 34) + "\" y=\"" + f2(ly) + "\">" + detail::xml_escape(ser.label) + "</text>\n";
  }
  o += "</svg>\n";
  return o;
}

inline void write_svg(const std::filesystem::path& path, const Plot& p) {
  std::ofstream o(path, std::ios::binary);
  if (!o) throw InputError("cannot write " + path.string());
  o << render_svg(p);
}

}  // namespace illiquid_eq
