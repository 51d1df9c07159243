// Copyright 2026 The synthgt Authors
// SPDX-License-Identifier: Apache-2.0

#include "svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace synthgt::cli {

namespace {

constexpr double kWidth = 480, kHeight = 360;
constexpr double kLeft = 60, kRight = 20, kTop = 36, kBottom = 48;
constexpr const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string tick(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2g", std::abs(v) < 1e-12 ? 0.0 : v);
  return buf;
}

}  // namespace

std::string xml_escape(const std::string& text) {
  std::string out;
  for (char c : text) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&apos;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string line_plot(const PlotSpec& spec, const std::vector<Series>& series) {
  const double pw = kWidth - kLeft - kRight, ph = kHeight - kTop - kBottom;
  const double xr = spec.x_max > spec.x_min ? spec.x_max - spec.x_min : 1.0;
  const double yr = spec.y_max > spec.y_min ? spec.y_max - spec.y_min : 1.0;
  auto px = [&](double x) { return kLeft + (std::clamp(x, spec.x_min, spec.x_max) - spec.x_min) / xr * pw; };
  auto py = [&](double y) {
    return kTop + ph - (std::clamp(y, spec.y_min, spec.y_max) - spec.y_min) / yr * ph;
  };

  std::ostringstream o;
  o << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
    << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<text x=\"" << kWidth / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">"
    << xml_escape(spec.title) << "</text>\n";
  o << "<rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\"" << pw << "\" height=\"" << ph
    << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double xv = spec.x_min + xr * i / 4.0, yv = spec.y_min + yr * i / 4.0;
    o << "<line x1=\"" << fmt(px(xv)) << "\" y1=\"" << fmt(kTop + ph) << "\" x2=\"" << fmt(px(xv)) << "\" y2=\""
      << fmt(kTop + ph + 4) << "\" stroke=\"black\"/>\n";
    o << "<text x=\"" << fmt(px(xv)) << "\" y=\"" << fmt(kTop + ph + 16) << "\" text-anchor=\"middle\">"
      << tick(xv) << "</text>\n";
    o << "<line x1=\"" << fmt(kLeft - 4) << "\" y1=\"" << fmt(py(yv)) << "\" x2=\"" << fmt(kLeft) << "\" y2=\""
      << fmt(py(yv)) << "\" stroke=\"black\"/>\n";
    o << "<text x=\"" << fmt(kLeft - 6) << "\" y=\"" << fmt(py(yv) + 4) << "\" text-anchor=\"end\">" << tick(yv)
      << "</text>\n";
  }
  o << "<text x=\"" << fmt(kLeft + pw / 2) << "\" y=\"" << fmt(kHeight - 10) << "\" text-anchor=\"middle\">"
    << xml_escape(spec.x_label) << "</text>\n";
  o << "<text x=\"14\" y=\"" << fmt(kTop + ph / 2) << "\" text-anchor=\"middle\" transform=\"rotate(-90 14 "
    << fmt(kTop + ph / 2) << ")\">" << xml_escape(spec.y_label) << "</text>\n";

  for (std::size_t s = 0; s < series.size(); ++s) {
    const Series& line = series[s];
    const char* color = kColors[s % std::size(kColors)];
    o << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\"";
    if (line.dashed) o << " stroke-dasharray=\"4 3\"";
    o << " points=\"";
    const std::size_t n = std::min(line.x.size(), line.y.size());
    for (std::size_t i = 0; i < n; ++i) {
      if (!std::isfinite(line.x[i]) || !std::isfinite(line.y[i])) continue;
      o << fmt(px(line.x[i])) << ',' << fmt(py(line.y[i])) << (i + 1 < n ? " " : "");
    }
    o << "\"/>\n";
    const double ly = kTop + 14 + 14.0 * static_cast<double>(s);
    const double lx = kLeft + pw - 150;
    o << "<line x1=\"" << fmt(lx) << "\" y1=\"" << fmt(ly - 4) << "\" x2=\"" << fmt(lx + 18) << "\" y2=\""
      << fmt(ly - 4) << "\" stroke=\"" << color << "\" stroke-width=\"2\"";
    if (line.dashed) o << " stroke-dasharray=\"4 3\"";
    o << "/>\n";
    o << "<text x=\"" << fmt(lx + 22) << "\" y=\"" << fmt(ly) << "\">" << xml_escape(line.name) << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

}  // namespace synthgt::cli
