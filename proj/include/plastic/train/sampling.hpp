#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "plastic/train/optimizer.hpp"

namespace plastic::train {

#ifdef NDEBUG
inline constexpr int kDefaultFiniteCheckEvery = 100;
#else
inline constexpr int kDefaultFiniteCheckEvery = 1;
#endif

struct TrainConfig {
  int segment_length = 10;  // T
  int delay = 10;           // D; snippets start up to T + D steps back
  std::int64_t steps = 150000;
  double lr = 1e-3;
  AdamHyper adam;
  std::uint64_t seed = 1;
  bool include_online_loss = false;
  int log_every = 1;  // segments per metrics row
  std::int64_t checkpoint_every = 50000;
  int finite_check_every = kDefaultFiniteCheckEvery;
  std::int64_t early_window = 30000;
  std::int64_t final_window = 10000;

  int horizon() const { return segment_length + delay; }  // P
  void validate() const;
};

struct SnippetSample {
  std::int64_t start = 0;    // t_p
  std::vector<int> targets;  // filled by the caller from the stream
};

// t_p uniform over the closed range [max(0, t - P), t - T].
SnippetSample sample_past(std::int64_t t, const TrainConfig& cfg, std::mt19937_64& rng);

}  // namespace plastic::train
