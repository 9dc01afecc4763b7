#pragma once

#include <functional>
#include <span>
#include <vector>

#include "garnn/tape.hpp"
#include "garnn/tensor.hpp"

namespace garnn::ad {

/// Builds a scalar loss on the given tape. The builder must register the
/// supplied tensors as trainable leaves with dense ids 0..P-1 in order, and
/// must be deterministic in the parameter values.
using LossBuilder = std::function<ValueId(Tape&, std::span<const Tensor>)>;

struct FdNonFiniteEntry {
  std::size_t param;
  std::size_t index;
};

struct FdReport {
  double max_rel_err = 0.0;
  std::size_t worst_param = 0;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t entries_checked = 0;
  double h = 0.0;
  double tol = 0.0;
  std::vector<FdNonFiniteEntry> non_finite;  // loss blew up at theta +- h
  bool pass = false;
};

/// Central-difference check of backward() over every parameter entry:
/// compares (f(theta+h) - f(theta-h)) / 2h against the tape gradient.
/// Relative error per entry is |ad - fd| / max(1, |ad|, |fd|); the report
/// passes iff the max over entries is below tol and no perturbed
/// evaluation produced a non-finite loss.
FdReport finite_difference_check(const LossBuilder& loss_fn,
                                 std::vector<Tensor> params, double h,
                                 double tol);

}  // namespace garnn::ad
