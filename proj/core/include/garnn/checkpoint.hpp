#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "garnn/data.hpp"
#include "garnn/model.hpp"

namespace garnn {

/// Everything predict/evaluate/explain need besides the weights: the
/// architecture, the variable schema, the windowing protocol, and the
/// normalizer fitted on the training split.
struct CheckpointMeta {
  std::vector<std::string> variables;
  std::size_t window_len = 48;
  std::size_t horizon = 6;
  double dt_minutes = 5.0;
  SplitSpec split;
  std::vector<double> norm_means;
  std::vector<double> norm_stds;
  std::uint64_t seed = 0;

  Normalizer normalizer() const {
    return Normalizer::from_moments(norm_means, norm_stds);
  }
};

/// Version-tagged JSON document mapping parameter path -> shape + flat
/// values. Doubles are stored as hex-float strings, so save -> load is
/// bit-exact.
void save_checkpoint(const GarnnModel& model, const CheckpointMeta& meta,
                     const std::string& path);
std::pair<GarnnModel, CheckpointMeta> load_checkpoint(const std::string& path);

std::string double_to_hex(double value);
double hex_to_double(const std::string& text);

}  // namespace garnn
