#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "garnn/tensor.hpp"

namespace garnn {

/// Rows where a sparse variable has a recorded event.
struct EventMask {
  std::size_t variable = 0;
  std::vector<std::size_t> rows;
};

/// One participant's multivariate series. Values are row-major
/// (rows = timesteps, columns = variables, NaN = missing); the first
/// variable is the prediction target.
struct MtsRecord {
  std::string participant;
  double dt_minutes = 5.0;
  bool wallclock = false;  // timestamps are minutes since epoch vs indices
  std::vector<std::string> variables;
  std::vector<std::int64_t> timestamps;
  std::vector<double> values;
  std::vector<EventMask> events;

  std::size_t n_steps() const { return timestamps.size(); }
  std::size_t n_vars() const { return variables.size(); }
  double at(std::size_t step, std::size_t var) const {
    return values[step * n_vars() + var];
  }
  bool is_missing(std::size_t step, std::size_t var) const;
  const std::vector<std::size_t>* event_rows(std::size_t var) const;

  /// Target column present, timestamps strictly increasing, sizes agree.
  void validate() const;
};

/// One training example: normalized, imputed N x T matrix plus the scalar
/// target H steps past the window end, with provenance for masks/exports.
struct MtsWindow {
  Tensor x;  // N x T
  double target = 0.0;
  std::string participant;
  std::size_t start_index = 0;
};

/// Per-variable standard normalization fitted on the training split only.
/// Missing entries are excluded from the statistics; the std is floored at
/// 1e-8 so constant channels transform to exactly zero.
class Normalizer {
 public:
  Normalizer() = default;
  static Normalizer fit(const MtsRecord& train_slice);
  static Normalizer identity(std::size_t n_vars);
  static Normalizer from_moments(std::vector<double> means,
                                 std::vector<double> stds);

  double transform(double x, std::size_t var) const;
  double inverse(double z, std::size_t var) const;
  double mean(std::size_t var) const { return means_.at(var); }
  double stddev(std::size_t var) const { return stds_.at(var); }
  std::size_t size() const { return means_.size(); }

 private:
  std::vector<double> means_;
  std::vector<double> stds_;
};

/// Chronological train/validation/test fractions (per participant).
struct SplitSpec {
  double train = 0.6;
  double validation = 0.2;
  double test = 0.2;
  void validate() const;
};

struct SplitRanges {
  std::size_t train_end = 0;  // rows [0, train_end)
  std::size_t val_end = 0;    // rows [train_end, val_end); test = rest
};

SplitRanges chronological_split(std::size_t n_steps, const SplitSpec& spec);

/// Copy of rows [begin, end); events are filtered and reindexed so window
/// building inside a slice can never straddle a split boundary.
MtsRecord slice_record(const MtsRecord& record, std::size_t begin,
                       std::size_t end);

/// Sliding windows of length T with target H steps after the window end:
/// starts s = 0..M-T-H, target row s+T+H-1. Values are z-normalized and
/// missing entries imputed to 0 (the training mean); windows with a
/// missing target are dropped. M < T+H yields an empty list plus a warning
/// on stderr, not an error.
std::vector<MtsWindow> make_windows(const MtsRecord& record,
                                    const Normalizer& normalizer,
                                    std::size_t window_len,
                                    std::size_t horizon);

/// Appends a derived "timestamp" variable: minutes-since-midnight / 1440
/// for wall-clock records, index position scaled to [0, 1] otherwise.
/// Downstream normalization treats it like any variable.
MtsRecord encode_timestamp(const MtsRecord& record);

// --- CSV interfaces ---------------------------------------------------------
// Header: timestamp,<target>,<var...>. Column 1 is always the time axis
// (integer index or ISO-8601 minutes); columns 2+ are variables and may
// themselves be named "timestamp". Missing values are empty fields.
// Numbers are written as shortest round-trip decimals, so write -> read
// reproduces values bit-exactly.

MtsRecord load_csv(const std::string& path);
void write_csv(const MtsRecord& record, const std::string& path);

/// Event-mask sidecar: CSV of (timestep, variable-name) pairs.
void write_events_csv(const MtsRecord& record, const std::string& path);
void load_events_csv(MtsRecord& record, const std::string& path);

}  // namespace garnn
