#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "plastic/ad/tape.hpp"
#include "plastic/rules/ops.hpp"

namespace plastic::net {

using ad::Matrix;
using ad::Var;
using rules::OpKind;

inline constexpr int kAlphabetSize = 27;

// Hidden layers are listed in processing order; the input layer of
// `alphabet` neurons is appended last. Every ordered pair of layers,
// self-pairs included, is fully connected.
struct NetworkConfig {
  std::vector<int> hidden_layers{4};
  int d_h = 6;
  int d_w = 6;
  int d_e = 4;
  int hidden_width = 16;
  OpKind h_op = OpKind::kGated;
  OpKind w_op = OpKind::kGated;
  int alphabet = kAlphabetSize;

  // Throws std::invalid_argument naming the offending field.
  void validate() const;

  int layer_count() const { return static_cast<int>(hidden_layers.size()) + 1; }
  int input_layer() const { return static_cast<int>(hidden_layers.size()); }
  int neurons(int layer) const {
    return layer == input_layer() ? alphabet : hidden_layers.at(layer);
  }
  // Inputs to the w-kernel beyond the synapse state itself.
  int synapse_input_dim() const { return 3 * d_h + d_w + 2 * d_e; }
};

// Activations per layer (neurons x d_h) and synapse states per ordered layer
// pair (dst x src rows, row = dst_neuron * n_src + src_neuron, d_w columns).
struct NetworkState {
  std::vector<Matrix> h;
  std::vector<Matrix> w;  // index dst * layer_count + src

  friend bool operator==(const NetworkState& a, const NetworkState& b);
};

struct StepOutput {
  Eigen::VectorXd p;
  double loss = 0.0;
};

// Thrown when an activation or synapse state leaves the finite range.
class NonFiniteError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Exact number of backprop-trained parameters: both kernels, the input-layer
// readout and one embedding per layer.
std::size_t meta_param_count(const NetworkConfig& cfg);

NetworkState reset_activations(NetworkState state);

// Throws NonFiniteError describing the first bad layer.
void check_finite(const NetworkState& state, const NetworkConfig& cfg, std::int64_t step);

// On-tape view of a NetworkState during a recorded segment.
struct TapeState {
  std::vector<Var> h;
  std::vector<Var> w;
};

struct StepRecord {
  Var loss;  // 1x1, -log p[target]
  Var p;     // alphabet x 1
};

class Network {
 public:
  Network(NetworkConfig cfg, std::uint64_t seed);

  const NetworkConfig& config() const { return cfg_; }
  ad::MetaParams& meta() { return meta_; }
  const ad::MetaParams& meta() const { return meta_; }

  // h = 0; every synapse component ~ N(0, 1 / n_src).
  NetworkState init_state(std::uint64_t seed) const;

  // Places a state on the tape as constants (no gradient flows into it).
  TapeState load(ad::Tape& tape, const NetworkState& state) const;
  // Activations replaced by zero constants; synapse nodes shared.
  TapeState reset(ad::Tape& tape, const TapeState& state) const;
  NetworkState read(const ad::Tape& tape, const TapeState& state) const;

  // Records one global step. Hidden layers run first in configured order,
  // the input layer last; a layer sees the fresh values of layers already
  // processed in this step and the previous values of the others.
  StepRecord record_step(ad::Tape& tape, TapeState& state, int target) const;

  std::pair<NetworkState, StepOutput> step(const NetworkState& state, int target) const;

  int block_index(int dst, int src) const { return dst * cfg_.layer_count() + src; }

 private:
  struct BlockIndex {
    ad::IndexList post;  // dst neuron per synapse row
    ad::IndexList pre;   // src neuron per synapse row
  };

  NetworkConfig cfg_;
  ad::MetaParams meta_;
  rules::Kernel w_kernel_;
  rules::Kernel h_kernel_;
  rules::DenseLayer readout_hidden_;
  rules::DenseLayer readout_out_;
  std::vector<ad::ParamId> embeddings_;
  std::vector<BlockIndex> blocks_;
};

}  // namespace plastic::net
