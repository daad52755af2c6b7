#include "plastic/ad/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace plastic::ad {
namespace {

double evaluate(const TapeFunction& f, const MetaParams& meta, std::size_t index) {
  Tape tape;
  const double v = tape.scalar_value(f(tape, meta));
  if (!std::isfinite(v)) {
    throw std::runtime_error("grad_check: non-finite forward value at parameter " +
                             std::to_string(index));
  }
  return v;
}

}  // namespace

GradCheckResult grad_check(const TapeFunction& f, MetaParams& meta, double eps,
                           const std::optional<std::vector<std::size_t>>& indices) {
  if (!(eps > 0.0)) throw std::invalid_argument("grad_check: eps must be positive");

  Tape tape;
  const Var loss = f(tape, meta);
  if (!std::isfinite(tape.scalar_value(loss))) {
    throw std::runtime_error("grad_check: non-finite forward value at the unperturbed point");
  }
  Gradients grads = tape.backward(loss);
  if (grads.size() != meta.slots()) {
    // The function touched no parameter at all.
    grads.clear();
    for (std::size_t s = 0; s < meta.slots(); ++s) {
      grads.push_back(Matrix::Zero(meta.value(s).rows(), meta.value(s).cols()));
    }
  }
  const std::vector<double> analytic = flatten(grads);

  std::vector<std::size_t> order;
  if (indices) {
    order = *indices;
  } else {
    order.resize(meta.count());
    std::iota(order.begin(), order.end(), std::size_t{0});
  }

  GradCheckResult result;
  for (std::size_t k : order) {
    const double original = meta.get(k);
    double up = 0.0, down = 0.0;
    try {
      meta.set(k, original + eps);
      up = evaluate(f, meta, k);
      meta.set(k, original - eps);
      down = evaluate(f, meta, k);
    } catch (...) {
      meta.set(k, original);
      throw;
    }
    meta.set(k, original);

    const double numeric = (up - down) / (2.0 * eps);
    const double a = analytic.at(k);
    const double err =
        std::abs(a - numeric) / std::max({1.0, std::abs(a), std::abs(numeric)});
    if (err > result.max_rel_error || result.checked == 0) {
      result.max_rel_error = err;
      result.worst_index = k;
      result.worst_analytic = a;
      result.worst_numeric = numeric;
    }
    ++result.checked;
  }
  return result;
}

}  // namespace plastic::ad
