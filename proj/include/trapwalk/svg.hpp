#pragma once

// Minimal SVG line plot for survival series. Output only; nothing reads it back.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <string>
#include <vector>

#include "trapwalk/lattice.hpp"

namespace trapwalk {

struct PlotSeries {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
  std::string colour = "#1f4e9c";
};

struct PlotOptions {
  bool log_x = false;
  bool log_y = false;
  std::string x_label = "t";
  std::string y_label = "P(t)";
  int width = 640;
  int height = 420;
};

namespace detail {

inline std::string fmt(const char* spec, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

struct Axis {
  double lo, hi;
  bool log;

  double map(double v, double pixel_lo, double pixel_hi) const {
    const double a = log ? std::log10(lo) : lo;
    const double b = log ? std::log10(hi) : hi;
    const double x = log ? std::log10(v) : v;
    return pixel_lo + (x - a) / (b - a) * (pixel_hi - pixel_lo);
  }

  std::vector<double> ticks() const {
    std::vector<double> out;
    if (log) {
      for (double e = std::ceil(std::log10(lo) - 1e-9); e <= std::floor(std::log10(hi) + 1e-9); e += 1.0) {
        out.push_back(std::pow(10.0, e));
      }
    } else {
      for (int k = 0; k <= 4; ++k) out.push_back(lo + (hi - lo) * k / 4.0);
    }
    return out;
  }
};

inline Axis make_axis(const std::vector<PlotSeries>& series, bool use_x, bool log) {
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const auto& s : series) {
    for (double v : use_x ? s.x : s.y) {
      if (!std::isfinite(v) || (log && !(v > 0.0))) continue;
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  if (!(lo < hi)) {
    if (!std::isfinite(lo)) lo = hi = 1.0;
    lo = log ? lo / 2.0 : lo - 0.5;
    hi = log ? hi * 2.0 : hi + 0.5;
  }
  if (log) {
    lo = std::pow(10.0, std::floor(std::log10(lo)));
    hi = std::pow(10.0, std::ceil(std::log10(hi)));
  } else if (!use_x) {
    lo = std::min(lo, 0.0);
  }
  return {lo, hi, log};
}

}  // namespace detail

inline std::string render_svg(const std::vector<PlotSeries>& series, const PlotOptions& opt) {
  const double left = 70, right = opt.width - 20.0, top = 20, bottom = opt.height - 50.0;
  const auto ax = detail::make_axis(series, true, opt.log_x);
  const auto ay = detail::make_axis(series, false, opt.log_y);
  const char* tick_fmt = "%.3g";

  std::string out = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(opt.width) +
                    "\" height=\"" + std::to_string(opt.height) + "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  out += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out += "<rect x=\"" + detail::fmt("%.1f", left) + "\" y=\"" + detail::fmt("%.1f", top) + "\" width=\"" +
         detail::fmt("%.1f", right - left) + "\" height=\"" + detail::fmt("%.1f", bottom - top) +
         "\" fill=\"none\" stroke=\"black\"/>\n";
  for (double t : ax.ticks()) {
    const double px = ax.map(t, left, right);
    out += "<line x1=\"" + detail::fmt("%.1f", px) + "\" y1=\"" + detail::fmt("%.1f", bottom) + "\" x2=\"" +
           detail::fmt("%.1f", px) + "\" y2=\"" + detail::fmt("%.1f", bottom + 5) + "\" stroke=\"black\"/>\n";
    out += "<text x=\"" + detail::fmt("%.1f", px) + "\" y=\"" + detail::fmt("%.1f", bottom + 18) +
           "\" text-anchor=\"middle\">" + detail::fmt(tick_fmt, t) + "</text>\n";
  }
  for (double t : ay.ticks()) {
    const double py = ay.map(t, bottom, top);
    out += "<line x1=\"" + detail::fmt("%.1f", left - 5) + "\" y1=\"" + detail::fmt("%.1f", py) + "\" x2=\"" +
           detail::fmt("%.1f", left) + "\" y2=\"" + detail::fmt("%.1f", py) + "\" stroke=\"black\"/>\n";
    out += "<text x=\"" + detail::fmt("%.1f", left - 8) + "\" y=\"" + detail::fmt("%.1f", py + 4) +
           "\" text-anchor=\"end\">" + detail::fmt(tick_fmt, t) + "</text>\n";
  }
  out += "<text x=\"" + detail::fmt("%.1f", 0.5 * (left + right)) + "\" y=\"" +
         detail::fmt("%.1f", opt.height - 12.0) + "\" text-anchor=\"middle\">" + opt.x_label + "</text>\n";
  out += "<text x=\"16\" y=\"" + detail::fmt("%.1f", 0.5 * (top + bottom)) +
         "\" text-anchor=\"middle\" transform=\"rotate(-90 16 " + detail::fmt("%.1f", 0.5 * (top + bottom)) + ")\">" +
         opt.y_label + "</text>\n";

  double legend_y = top + 16;
  for (const auto& s : series) {
    out += "<polyline fill=\"none\" stroke=\"" + s.colour + "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t k = 0; k < s.x.size(); ++k) {
      if ((opt.log_x && !(s.x[k] > 0.0)) || (opt.log_y && !(s.y[k] > 0.0))) continue;
      out += detail::fmt("%.2f", ax.map(s.x[k], left, right)) + "," + detail::fmt("%.2f", ay.map(s.y[k], bottom, top)) + " ";
    }
    out += "\"/>\n";
    out += "<text x=\"" + detail::fmt("%.1f", right - 10) + "\" y=\"" + detail::fmt("%.1f", legend_y) +
           "\" text-anchor=\"end\" fill=\"" + s.colour + "\">" + s.label + "</text>\n";
    legend_y += 16;
  }
  out += "</svg>\n";
  return out;
}

}  // namespace trapwalk
