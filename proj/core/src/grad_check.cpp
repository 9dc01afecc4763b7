#include "garnn/grad_check.hpp"

#include <cmath>

#include "garnn/error.hpp"

namespace garnn::ad {

namespace {

Tensor with_entry(const Tensor& t, std::size_t index, double value) {
  std::vector<double> data(t.data().begin(), t.data().end());
  data[index] = value;
  return Tensor(t.shape(), std::move(data));
}

// Forward-only evaluation; NaN/Inf anywhere surfaces as non-finite.
double eval_loss(const LossBuilder& loss_fn, std::span<const Tensor> params,
                 bool& finite) {
  finite = true;
  try {
    Tape tape;
    const ValueId out = loss_fn(tape, params);
    return tape.value(out).scalar_value();
  } catch (const Error& e) {
    if (e.code() == ErrorCode::non_finite) {
      finite = false;
      return 0.0;
    }
    throw;
  }
}

}  // namespace

FdReport finite_difference_check(const LossBuilder& loss_fn,
                                 std::vector<Tensor> params, double h,
                                 double tol) {
  if (h <= 0.0) {
    fail(ErrorCode::invalid_argument, "finite difference step must be > 0");
  }

  FdReport report;
  report.h = h;
  report.tol = tol;

  Tape tape;
  const ValueId out = loss_fn(tape, params);
  if (tape.param_count() != static_cast<int>(params.size())) {
    fail(ErrorCode::invalid_argument,
         "loss builder registered " + std::to_string(tape.param_count()) +
             " parameters, expected " + std::to_string(params.size()));
  }
  const GradientMap analytic = tape.backward(out);

  std::vector<Tensor> work = params;
  for (std::size_t p = 0; p < params.size(); ++p) {
    const Tensor& base = params[p];
    for (std::size_t i = 0; i < base.size(); ++i) {
      const double theta = base[i];

      bool finite_plus = false;
      bool finite_minus = false;
      work[p] = with_entry(base, i, theta + h);
      const double f_plus = eval_loss(loss_fn, work, finite_plus);
      work[p] = with_entry(base, i, theta - h);
      const double f_minus = eval_loss(loss_fn, work, finite_minus);
      work[p] = base;

      if (!finite_plus || !finite_minus || !std::isfinite(f_plus) ||
          !std::isfinite(f_minus)) {
        report.non_finite.push_back({p, i});
        continue;
      }

      const double fd = (f_plus - f_minus) / (2.0 * h);
      const double ad = analytic.data(p)[i];
      const double rel = std::abs(ad - fd) /
                         std::max({1.0, std::abs(ad), std::abs(fd)});
      ++report.entries_checked;
      if (rel > report.max_rel_err) {
        report.max_rel_err = rel;
        report.worst_param = p;
        report.worst_index = i;
        report.worst_analytic = ad;
        report.worst_numeric = fd;
      }
    }
  }

  report.pass = report.non_finite.empty() && report.max_rel_err < tol;
  return report;
}

}  // namespace garnn::ad
