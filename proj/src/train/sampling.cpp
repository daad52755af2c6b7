#include "plastic/train/sampling.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace plastic::train {

void TrainConfig::validate() const {
  if (segment_length < 1) throw std::invalid_argument("segment_length: must be >= 1");
  if (delay < 0) throw std::invalid_argument("delay: must be >= 0");
  if (steps < segment_length) throw std::invalid_argument("steps: must cover at least one segment");
  if (!(lr >= 0.0)) throw std::invalid_argument("lr: must be >= 0");
  if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0)) throw std::invalid_argument("beta1: must be in [0, 1)");
  if (!(adam.beta2 >= 0.0 && adam.beta2 < 1.0)) throw std::invalid_argument("beta2: must be in [0, 1)");
  if (!(adam.eps > 0.0)) throw std::invalid_argument("adam_eps: must be positive");
  if (log_every < 1) throw std::invalid_argument("log_every: must be >= 1");
  if (checkpoint_every < 0) throw std::invalid_argument("checkpoint_every: must be >= 0");
  if (finite_check_every < 1) throw std::invalid_argument("finite_check_every: must be >= 1");
  if (early_window < 1) throw std::invalid_argument("early_window: must be >= 1");
  if (final_window < 1) throw std::invalid_argument("final_window: must be >= 1");
}

SnippetSample sample_past(std::int64_t t, const TrainConfig& cfg, std::mt19937_64& rng) {
  if (t < cfg.segment_length) {
    throw std::invalid_argument("sample_past: t=" + std::to_string(t) + " precedes the first segment");
  }
  const std::int64_t hi = t - cfg.segment_length;
  const std::int64_t lo = std::max<std::int64_t>(0, t - cfg.horizon());
  std::uniform_int_distribution<std::int64_t> dist(lo, hi);
  return SnippetSample{dist(rng), {}};
}

}  // namespace plastic::train
