#include "garnn/svg.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "garnn/error.hpp"

namespace garnn {

namespace {

int gray_level(double v) {
  v = std::clamp(v, 0.0, 1.0);
  return static_cast<int>(std::lround(15.0 + 235.0 * v));
}

}  // namespace

void write_heatmap_svg(const Tensor& map01,
                       std::span<const std::string> row_labels,
                       const HeatmapSpec& spec, const std::string& path) {
  if (map01.rank() != 2) {
    fail(ErrorCode::shape_mismatch,
         "heatmap expects an N x T matrix, got " + map01.shape_str());
  }
  const std::size_t rows = map01.shape()[0];
  const std::size_t cols = map01.shape()[1];
  if (row_labels.size() != rows) {
    fail(ErrorCode::invalid_argument, "heatmap row label count mismatch");
  }

  const std::size_t label_w = 110;
  const std::size_t title_h = spec.title.empty() ? 10 : 28;
  const std::size_t axis_h = 24;
  const std::size_t width = label_w + cols * spec.cell_width + 10;
  const std::size_t height = title_h + rows * spec.cell_height + axis_h;

  std::ofstream out(path);
  if (!out) fail(ErrorCode::io, "cannot write " + path);

  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width
      << "\" height=\"" << height << "\" viewBox=\"0 0 " << width << ' '
      << height << "\">\n";
  out << "<style>text{font-family:monospace;font-size:11px;fill:#222;}"
         ".title{font-size:13px;}</style>\n";
  out << "<rect width=\"" << width << "\" height=\"" << height
      << "\" fill=\"#ffffff\"/>\n";
  if (!spec.title.empty()) {
    out << "<text class=\"title\" x=\"" << label_w << "\" y=\"18\">"
        << spec.title << "</text>\n";
  }

  for (std::size_t r = 0; r < rows; ++r) {
    const std::size_t y = title_h + r * spec.cell_height;
    out << "<text x=\"4\" y=\"" << (y + spec.cell_height / 2 + 4) << "\">"
        << row_labels[r] << "</text>\n";
    for (std::size_t c = 0; c < cols; ++c) {
      const int g = gray_level(map01.at(r, c));
      out << "<rect x=\"" << (label_w + c * spec.cell_width) << "\" y=\"" << y
          << "\" width=\"" << spec.cell_width << "\" height=\""
          << spec.cell_height << "\" fill=\"rgb(" << g << ',' << g << ',' << g
          << ")\" stroke=\"#555\" stroke-width=\"0.4\"/>\n";
    }
  }

  const std::size_t axis_y = title_h + rows * spec.cell_height + 16;
  for (std::size_t c = 0; c < cols; c += std::max<std::size_t>(1, spec.x_tick_every)) {
    out << "<text x=\"" << (label_w + c * spec.cell_width) << "\" y=\"" << axis_y
        << "\">" << (c + 1) << "</text>\n";
  }
  out << "</svg>\n";
  if (!out) fail(ErrorCode::io, "write failed for " + path);
}

}  // namespace garnn
