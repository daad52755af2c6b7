#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "plastic/ad/grad_check.hpp"
#include "plastic/corpus/corpus.hpp"
#include "plastic/harness/config.hpp"
#include "plastic/harness/grid.hpp"

namespace plastic::harness {

struct SegmentCheck {
  ad::GradCheckResult result;
  double loss_past = 0.0;
  std::int64_t t = 0;
  std::int64_t t_p = 0;
  std::size_t params = 0;
};

// Finite-difference check of dL_p/dθ through one full 2T segment ending at
// position t. The model is built from cfg (seeded by cfg.train.seed) and its
// state is first advanced, without training, over positions 0 .. t-T-1 so the
// segment starts from non-trivial activations and synapses.
SegmentCheck check_segment_gradients(const ExperimentConfig& cfg, const corpus::SymbolStream& stream,
                                     std::int64_t t, double eps,
                                     const std::optional<std::vector<std::size_t>>& indices = std::nullopt);

}  // namespace plastic::harness
