#pragma once

#include <span>
#include <string>

#include "garnn/tensor.hpp"

namespace garnn {

/// One rectangle per cell, dark-to-bright grayscale fill, variable labels
/// on the y-axis and timestep ticks on the x-axis. Values are expected in
/// [0, 1] (a FeatureMap); anything outside is clamped.
struct HeatmapSpec {
  std::string title;
  std::size_t cell_width = 14;
  std::size_t cell_height = 20;
  std::size_t x_tick_every = 8;
};

void write_heatmap_svg(const Tensor& map01,
                       std::span<const std::string> row_labels,
                       const HeatmapSpec& spec, const std::string& path);

}  // namespace garnn
