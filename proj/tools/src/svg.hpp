// Copyright 2026 The synthgt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

namespace synthgt::cli {

struct Series {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
  bool dashed = false;
};

struct PlotSpec {
  std::string title;
  std::string x_label;
  std::string y_label;
  double x_min = 0.0, x_max = 1.0;
  double y_min = 0.0, y_max = 1.0;
};

// Standalone SVG document: axes with five ticks each, one polyline per series
// (points outside the y range are clamped), legend at the top right.
std::string line_plot(const PlotSpec& spec, const std::vector<Series>& series);

std::string xml_escape(const std::string& text);

}  // namespace synthgt::cli
