#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <vector>

#include "plastic/ad/tape.hpp"

namespace plastic::ad {

// Builds a scalar loss on `tape` from the current values in `meta`.
using TapeFunction = std::function<Var(Tape& tape, const MetaParams& meta)>;

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t checked = 0;
};

// Compares reverse-mode gradients against central differences
//   g_fd = (f(θ + ε e_k) - f(θ - ε e_k)) / 2ε
// using the error |g_ad - g_fd| / max(1, |g_ad|, |g_fd|). When `indices` is
// given only those flat parameter indices are perturbed.
//
// Throws std::runtime_error naming the parameter index if a perturbed forward
// value is not finite. `meta` is restored before returning.
GradCheckResult grad_check(const TapeFunction& f, MetaParams& meta, double eps,
                           const std::optional<std::vector<std::size_t>>& indices = std::nullopt);

}  // namespace plastic::ad
