#include "garnn/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "garnn/error.hpp"

namespace garnn {

namespace {

constexpr double kStdFloor = 1e-8;
constexpr std::int64_t kMinutesPerDay = 24 * 60;

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

bool parse_double(const std::string& s, double& out) {
  const char* first = s.data();
  const char* last = s.data() + s.size();
  const auto res = std::from_chars(first, last, out);
  return res.ec == std::errc() && res.ptr == last;
}

bool parse_int(const std::string& s, std::int64_t& out) {
  const char* first = s.data();
  const char* last = s.data() + s.size();
  const auto res = std::from_chars(first, last, out);
  return res.ec == std::errc() && res.ptr == last;
}

// Days since 1970-01-01 for a civil date (Howard Hinnant's algorithm).
std::int64_t days_from_civil(std::int64_t y, unsigned m, unsigned d) {
  y -= m <= 2;
  const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
  const unsigned yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

void civil_from_days(std::int64_t z, std::int64_t& y, unsigned& m, unsigned& d) {
  z += 719468;
  const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
  const unsigned doe = static_cast<unsigned>(z - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  y = static_cast<std::int64_t>(yoe) + era * 400;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  d = doy - (153 * mp + 2) / 5 + 1;
  m = mp + (mp < 10 ? 3 : -9);
  y += m <= 2;
}

// "YYYY-MM-DDTHH:MM[:SS]" (or a space separator) -> minutes since epoch;
// seconds are truncated.
bool parse_iso_minutes(const std::string& s, std::int64_t& out) {
  int year, month, day, hour, minute, second = 0;
  char sep;
  const int n = std::sscanf(s.c_str(), "%d-%d-%d%c%d:%d:%d", &year, &month,
                            &day, &sep, &hour, &minute, &second);
  if (n < 6 || (sep != 'T' && sep != ' ')) return false;
  if (month < 1 || month > 12 || day < 1 || day > 31 || hour < 0 ||
      hour > 23 || minute < 0 || minute > 59 || second < 0 || second > 59) {
    return false;
  }
  out = days_from_civil(year, static_cast<unsigned>(month),
                        static_cast<unsigned>(day)) *
            kMinutesPerDay +
        hour * 60 + minute;
  return true;
}

std::string format_iso_minutes(std::int64_t minutes) {
  std::int64_t days = minutes / kMinutesPerDay;
  std::int64_t rem = minutes % kMinutesPerDay;
  if (rem < 0) {
    rem += kMinutesPerDay;
    --days;
  }
  std::int64_t y;
  unsigned m, d;
  civil_from_days(days, y, m, d);
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%04lld-%02u-%02uT%02lld:%02lld:00",
                static_cast<long long>(y), m, d,
                static_cast<long long>(rem / 60),
                static_cast<long long>(rem % 60));
  return buf;
}

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

[[noreturn]] void csv_fail(const std::string& path, std::size_t row,
                           const std::string& what) {
  fail(ErrorCode::csv_parse,
       path + ": row " + std::to_string(row) + ": " + what);
}

}  // namespace

// ---------------------------------------------------------------------------
// MtsRecord
// ---------------------------------------------------------------------------

bool MtsRecord::is_missing(std::size_t step, std::size_t var) const {
  return std::isnan(at(step, var));
}

const std::vector<std::size_t>* MtsRecord::event_rows(std::size_t var) const {
  for (const auto& mask : events) {
    if (mask.variable == var) return &mask.rows;
  }
  return nullptr;
}

void MtsRecord::validate() const {
  if (variables.empty()) {
    fail(ErrorCode::invalid_argument, "record has no variables (target missing)");
  }
  if (values.size() != n_steps() * n_vars()) {
    fail(ErrorCode::invalid_argument, "record value buffer size mismatch");
  }
  for (std::size_t i = 1; i < timestamps.size(); ++i) {
    if (timestamps[i] <= timestamps[i - 1]) {
      fail(ErrorCode::invalid_argument,
           "timestamps must be strictly increasing (row " + std::to_string(i) +
               ")");
    }
  }
}

// ---------------------------------------------------------------------------
// Normalizer
// ---------------------------------------------------------------------------

Normalizer Normalizer::fit(const MtsRecord& train_slice) {
  const std::size_t n_vars = train_slice.n_vars();
  Normalizer out;
  out.means_.assign(n_vars, 0.0);
  out.stds_.assign(n_vars, 1.0);
  for (std::size_t v = 0; v < n_vars; ++v) {
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t t = 0; t < train_slice.n_steps(); ++t) {
      const double x = train_slice.at(t, v);
      if (std::isnan(x)) continue;
      sum += x;
      ++count;
    }
    if (count == 0) continue;  // all-missing channel: identity transform
    const double mean = sum / static_cast<double>(count);
    double ss = 0.0;
    for (std::size_t t = 0; t < train_slice.n_steps(); ++t) {
      const double x = train_slice.at(t, v);
      if (std::isnan(x)) continue;
      ss += (x - mean) * (x - mean);
    }
    out.means_[v] = mean;
    out.stds_[v] = std::max(std::sqrt(ss / static_cast<double>(count)), kStdFloor);
  }
  return out;
}

Normalizer Normalizer::identity(std::size_t n_vars) {
  Normalizer out;
  out.means_.assign(n_vars, 0.0);
  out.stds_.assign(n_vars, 1.0);
  return out;
}

Normalizer Normalizer::from_moments(std::vector<double> means,
                                    std::vector<double> stds) {
  if (means.size() != stds.size()) {
    fail(ErrorCode::invalid_argument, "normalizer moments size mismatch");
  }
  for (double s : stds) {
    if (!(s > 0.0)) {
      fail(ErrorCode::invalid_argument, "normalizer std must be positive");
    }
  }
  Normalizer out;
  out.means_ = std::move(means);
  out.stds_ = std::move(stds);
  return out;
}

double Normalizer::transform(double x, std::size_t var) const {
  return (x - means_.at(var)) / stds_.at(var);
}

double Normalizer::inverse(double z, std::size_t var) const {
  return z * stds_.at(var) + means_.at(var);
}

// ---------------------------------------------------------------------------
// Splits and windows
// ---------------------------------------------------------------------------

void SplitSpec::validate() const {
  if (!(train > 0.0) || !(validation > 0.0) || !(test > 0.0)) {
    fail(ErrorCode::invalid_argument, "split fractions must be positive");
  }
  if (std::abs(train + validation + test - 1.0) > 1e-9) {
    fail(ErrorCode::invalid_argument, "split fractions must sum to 1");
  }
}

SplitRanges chronological_split(std::size_t n_steps, const SplitSpec& spec) {
  spec.validate();
  SplitRanges out;
  out.train_end = static_cast<std::size_t>(
      std::floor(static_cast<double>(n_steps) * spec.train));
  out.val_end = static_cast<std::size_t>(std::floor(
      static_cast<double>(n_steps) * (spec.train + spec.validation)));
  out.train_end = std::min(out.train_end, n_steps);
  out.val_end = std::min(std::max(out.val_end, out.train_end), n_steps);
  return out;
}

MtsRecord slice_record(const MtsRecord& record, std::size_t begin,
                       std::size_t end) {
  if (begin > end || end > record.n_steps()) {
    fail(ErrorCode::invalid_argument, "slice range out of bounds");
  }
  MtsRecord out;
  out.participant = record.participant;
  out.dt_minutes = record.dt_minutes;
  out.wallclock = record.wallclock;
  out.variables = record.variables;
  out.timestamps.assign(record.timestamps.begin() + begin,
                        record.timestamps.begin() + end);
  out.values.assign(record.values.begin() + begin * record.n_vars(),
                    record.values.begin() + end * record.n_vars());
  for (const auto& mask : record.events) {
    EventMask sliced;
    sliced.variable = mask.variable;
    for (std::size_t row : mask.rows) {
      if (row >= begin && row < end) sliced.rows.push_back(row - begin);
    }
    if (!sliced.rows.empty()) out.events.push_back(std::move(sliced));
  }
  return out;
}

std::vector<MtsWindow> make_windows(const MtsRecord& record,
                                    const Normalizer& normalizer,
                                    std::size_t window_len,
                                    std::size_t horizon) {
  if (window_len == 0 || horizon == 0) {
    fail(ErrorCode::invalid_argument, "window length and horizon must be >= 1");
  }
  if (normalizer.size() != record.n_vars()) {
    fail(ErrorCode::invalid_argument,
         "normalizer covers " + std::to_string(normalizer.size()) +
             " variables, record has " + std::to_string(record.n_vars()));
  }
  const std::size_t n_steps = record.n_steps();
  const std::size_t n_vars = record.n_vars();
  std::vector<MtsWindow> out;
  if (n_steps < window_len + horizon) {
    std::cerr << "warning: record '" << record.participant << "' has "
              << n_steps << " steps, too short for T=" << window_len
              << " H=" << horizon << "; no windows generated\n";
    return out;
  }

  const std::size_t last_start = n_steps - window_len - horizon;
  out.reserve(last_start + 1);
  for (std::size_t start = 0; start <= last_start; ++start) {
    const std::size_t target_row = start + window_len + horizon - 1;
    const double raw_target = record.at(target_row, 0);
    if (std::isnan(raw_target)) continue;  // cannot train on imputed targets

    std::vector<double> x(n_vars * window_len);
    for (std::size_t v = 0; v < n_vars; ++v) {
      for (std::size_t t = 0; t < window_len; ++t) {
        const double raw = record.at(start + t, v);
        x[v * window_len + t] =
            std::isnan(raw) ? 0.0 : normalizer.transform(raw, v);
      }
    }
    MtsWindow w;
    w.x = Tensor::matrix(n_vars, window_len, std::move(x));
    w.target = normalizer.transform(raw_target, 0);
    w.participant = record.participant;
    w.start_index = start;
    out.push_back(std::move(w));
  }
  return out;
}

MtsRecord encode_timestamp(const MtsRecord& record) {
  for (const auto& name : record.variables) {
    if (name == "timestamp") {
      fail(ErrorCode::invalid_argument,
           "record already has a 'timestamp' variable");
    }
  }
  MtsRecord out = record;
  out.variables.push_back("timestamp");
  const std::size_t n_steps = record.n_steps();
  const std::size_t n_vars = record.n_vars();
  std::vector<double> values(n_steps * (n_vars + 1));
  for (std::size_t t = 0; t < n_steps; ++t) {
    for (std::size_t v = 0; v < n_vars; ++v) {
      values[t * (n_vars + 1) + v] = record.at(t, v);
    }
    double channel;
    if (record.wallclock) {
      std::int64_t mod = record.timestamps[t] % kMinutesPerDay;
      if (mod < 0) mod += kMinutesPerDay;
      channel = static_cast<double>(mod) / static_cast<double>(kMinutesPerDay);
    } else {
      channel = n_steps > 1 ? static_cast<double>(t) /
                                  static_cast<double>(n_steps - 1)
                            : 0.0;
    }
    values[t * (n_vars + 1) + n_vars] = channel;
  }
  out.values = std::move(values);
  return out;
}

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

MtsRecord load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::io, "cannot open " + path);

  std::string line;
  if (!std::getline(in, line)) csv_fail(path, 1, "missing header");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = split_line(line);
  if (header.size() < 2) {
    csv_fail(path, 1, "header needs a time column and at least one variable");
  }
  MtsRecord record;
  record.variables.assign(header.begin() + 1, header.end());
  for (std::size_t i = 0; i < record.variables.size(); ++i) {
    for (std::size_t j = i + 1; j < record.variables.size(); ++j) {
      if (record.variables[i] == record.variables[j]) {
        csv_fail(path, 1, "duplicate variable name '" + record.variables[i] + "'");
      }
    }
  }

  {
    const auto slash = path.find_last_of('/');
    std::string stem = slash == std::string::npos ? path : path.substr(slash + 1);
    const auto dot = stem.find_last_of('.');
    if (dot != std::string::npos) stem = stem.substr(0, dot);
    record.participant = stem;
  }

  bool mode_known = false;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split_line(line);
    if (fields.size() != header.size()) {
      csv_fail(path, row,
               "expected " + std::to_string(header.size()) + " fields, got " +
                   std::to_string(fields.size()));
    }

    std::int64_t ts;
    bool is_index = parse_int(fields[0], ts);
    if (!is_index && !parse_iso_minutes(fields[0], ts)) {
      csv_fail(path, row, "unparsable timestamp '" + fields[0] + "'");
    }
    if (!mode_known) {
      record.wallclock = !is_index;
      mode_known = true;
    } else if (record.wallclock == is_index) {
      csv_fail(path, row, "mixed index and wall-clock timestamps");
    }
    if (!record.timestamps.empty() && ts <= record.timestamps.back()) {
      csv_fail(path, row, "timestamp not strictly increasing");
    }
    record.timestamps.push_back(ts);

    for (std::size_t f = 1; f < fields.size(); ++f) {
      if (fields[f].empty()) {
        record.values.push_back(std::numeric_limits<double>::quiet_NaN());
        continue;
      }
      double v;
      if (!parse_double(fields[f], v)) {
        csv_fail(path, row, "non-numeric cell '" + fields[f] + "' in column " +
                                header[f]);
      }
      record.values.push_back(v);
    }
  }
  if (record.timestamps.empty()) csv_fail(path, 2, "no data rows");

  // Infer the sampling interval from the smallest gap.
  if (record.wallclock && record.timestamps.size() > 1) {
    std::int64_t min_gap = record.timestamps[1] - record.timestamps[0];
    for (std::size_t i = 2; i < record.timestamps.size(); ++i) {
      min_gap = std::min(min_gap, record.timestamps[i] - record.timestamps[i - 1]);
    }
    record.dt_minutes = static_cast<double>(min_gap);
  } else {
    record.dt_minutes = 1.0;
  }
  record.validate();
  return record;
}

void write_csv(const MtsRecord& record, const std::string& path) {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::io, "cannot write " + path);
  out << "timestamp";
  for (const auto& name : record.variables) out << ',' << name;
  out << '\n';
  for (std::size_t t = 0; t < record.n_steps(); ++t) {
    if (record.wallclock) {
      out << format_iso_minutes(record.timestamps[t]);
    } else {
      out << record.timestamps[t];
    }
    for (std::size_t v = 0; v < record.n_vars(); ++v) {
      out << ',';
      const double x = record.at(t, v);
      if (!std::isnan(x)) out << format_double(x);
    }
    out << '\n';
  }
  if (!out) fail(ErrorCode::io, "write failed for " + path);
}

void write_events_csv(const MtsRecord& record, const std::string& path) {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::io, "cannot write " + path);
  out << "timestep,variable\n";
  for (const auto& mask : record.events) {
    for (std::size_t row : mask.rows) {
      out << row << ',' << record.variables.at(mask.variable) << '\n';
    }
  }
}

void load_events_csv(MtsRecord& record, const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::io, "cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) csv_fail(path, 1, "missing header");
  std::size_t row = 1;
  record.events.clear();
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split_line(line);
    if (fields.size() != 2) csv_fail(path, row, "expected 2 fields");
    std::int64_t step;
    if (!parse_int(fields[0], step) || step < 0 ||
        static_cast<std::size_t>(step) >= record.n_steps()) {
      csv_fail(path, row, "bad timestep '" + fields[0] + "'");
    }
    const auto it = std::find(record.variables.begin(),
                              record.variables.end(), fields[1]);
    if (it == record.variables.end()) {
      csv_fail(path, row, "unknown variable '" + fields[1] + "'");
    }
    const auto var = static_cast<std::size_t>(it - record.variables.begin());
    EventMask* mask = nullptr;
    for (auto& m : record.events) {
      if (m.variable == var) mask = &m;
    }
    if (!mask) {
      record.events.push_back({var, {}});
      mask = &record.events.back();
    }
    mask->rows.push_back(static_cast<std::size_t>(step));
  }
  for (auto& mask : record.events) {
    std::sort(mask.rows.begin(), mask.rows.end());
  }
}

}  // namespace garnn
