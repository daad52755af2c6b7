#include "plastic/train/optimizer.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace plastic::train {

OptimizerState OptimizerState::zeros_like(const ad::MetaParams& meta) {
  OptimizerState s;
  for (std::size_t i = 0; i < meta.slots(); ++i) {
    const auto& p = meta.value(i);
    s.m.push_back(ad::Matrix::Zero(p.rows(), p.cols()));
    s.v.push_back(ad::Matrix::Zero(p.rows(), p.cols()));
  }
  return s;
}

void optimizer_step(ad::MetaParams& meta, const ad::Gradients& grads, OptimizerState& opt,
                    double lr, const AdamHyper& hyper) {
  if (grads.size() != meta.slots() || opt.m.size() != meta.slots() || opt.v.size() != meta.slots()) {
    throw std::invalid_argument("optimizer_step: slot count mismatch");
  }
  for (std::size_t i = 0; i < grads.size(); ++i) {
    if (grads[i].rows() != meta.value(i).rows() || grads[i].cols() != meta.value(i).cols()) {
      throw std::invalid_argument("optimizer_step: shape mismatch for '" + meta.name(i) + "'");
    }
    if (!grads[i].allFinite()) {
      throw std::runtime_error("optimizer_step: non-finite gradient for '" + meta.name(i) + "'");
    }
  }

  ++opt.step;
  const double c1 = 1.0 - std::pow(hyper.beta1, static_cast<double>(opt.step));
  const double c2 = 1.0 - std::pow(hyper.beta2, static_cast<double>(opt.step));
  for (std::size_t i = 0; i < grads.size(); ++i) {
    auto g = grads[i].array();
    auto m = opt.m[i].array();
    auto v = opt.v[i].array();
    m = hyper.beta1 * m + (1.0 - hyper.beta1) * g;
    v = hyper.beta2 * v + (1.0 - hyper.beta2) * g.square();
    meta.value(i).array() -= lr * (m / c1) / ((v / c2).sqrt() + hyper.eps);
  }
}

}  // namespace plastic::train
