#pragma once

#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "plastic/ad/tape.hpp"

namespace plastic::rules {

using ad::Matrix;
using ad::MetaParams;
using ad::ParamId;
using ad::Tape;
using ad::Var;

// Candidate state-update operators shared by every neuron (h) or synapse (w).
enum class OpKind { kMlp, kMlpTanh, kLstm, kLstmSigmoid, kLstmId, kGated };

// Which state the kernel updates. Only matters for plain MLP, whose output
// squashing is sigmoid for neurons and identity for synapses.
enum class KernelRole { kNeuron, kSynapse };

enum class OutputNonlinearity { kSigmoid, kIdentity, kTanh };
enum class LstmOutput { kTanh, kSigmoid, kIdentity };

std::string_view op_name(OpKind op);
// Accepts MLP, MLP-tanh, LSTM, LSTM-sigmoid (or LSTM-σ), LSTM-id, GATED,
// case-insensitive. Throws std::invalid_argument otherwise.
OpKind parse_op(std::string_view name);
bool is_lstm(OpKind op);
inline constexpr OpKind kAllOps[] = {OpKind::kMlp,         OpKind::kMlpTanh, OpKind::kLstm,
                                     OpKind::kLstmSigmoid, OpKind::kLstmId,  OpKind::kGated};

struct DenseLayer {
  ParamId weight;  // inputs x outputs
  ParamId bias;    // 1 x outputs
};

// Parameter handles for one shared update kernel. MLP and GATED hold two
// dense layers (input -> hidden_width -> outputs); LSTM variants hold one
// affine map from [hidden, x] to the four gate pre-activations.
struct Kernel {
  OpKind op = OpKind::kGated;
  KernelRole role = KernelRole::kSynapse;
  int state_dim = 0;
  int input_dim = 0;
  int hidden_width = 0;
  std::vector<DenseLayer> layers;
};

// Registers the kernel's parameters in `meta` under `prefix`. Dense weights are
// uniform in ±sqrt(6 / (fan_in + fan_out)); biases are zero except the LSTM
// forget gate, which starts at +1.
Kernel make_kernel(MetaParams& meta, const std::string& prefix, OpKind op, KernelRole role,
                   int state_dim, int input_dim, int hidden_width, std::mt19937_64& rng);

// Number of scalars make_kernel registers.
std::size_t kernel_param_count(OpKind op, int state_dim, int input_dim, int hidden_width);

// Dense two-layer block shared by MLP kernels and the input-layer readout.
DenseLayer make_dense(MetaParams& meta, const std::string& name, int inputs, int outputs,
                      std::mt19937_64& rng);
Var dense(Tape& tape, const MetaParams& meta, const DenseLayer& layer, Var x);

// out = σ_out(W2 · tanh(W1 · [s, x] + b1) + b2)
Var op_mlp(Tape& tape, const MetaParams& meta, const Kernel& k, Var s, Var x,
           OutputNonlinearity out);

// State rows are [hidden | cell]. Gates i, f, o and candidate come from one
// affine map of [hidden, x]; c' = f c + i cand, hidden' = o φ(c').
Var op_lstm(Tape& tape, const MetaParams& meta, const Kernel& k, Var s, Var x, LstmOutput out);

// a, b = MLP([s, x]); g = σ(a); r = tanh(b); s' = (1 - g) s + g (r + hebb).
// A missing hebb is the zero vector.
Var op_gated(Tape& tape, const MetaParams& meta, const Kernel& k, Var s, Var x,
             std::optional<Var> hebb);

// The gated combination given raw pre-activations a (gate) and b (candidate).
Var gated_combine(Tape& tape, Var s, Var a, Var b, std::optional<Var> hebb);

// Dispatches on k.op. hebb is only consulted by GATED.
Var apply(Tape& tape, const MetaParams& meta, const Kernel& k, Var s, Var x,
          std::optional<Var> hebb = std::nullopt);

// u_ij^α = w_ij^α · h_j^0. `pre0` is one column holding h_j^0 per synapse row.
Var synapse_effect(Tape& tape, Var w, Var pre0);

// h_i scaled by the scalar h_j^1, row by row.
Var hebbian_term(Tape& tape, Var h_post, Var h_pre);

// x_ij = [h_i, h_j, u_ij, h_i h_j^1, e_i, e_j]. Embeddings may be single rows.
Var synapse_input_vector(Tape& tape, Var h_post, Var h_pre, Var u, Var e_post, Var e_pre);
// Same layout with the Hebbian block already computed.
Var synapse_input_vector(Tape& tape, Var h_post, Var h_pre, Var u, Var hebb, Var e_post,
                         Var e_pre);

// Sums consecutive groups of `fan_in` synapse rows into one row per neuron.
Var integrate(Tape& tape, Var u_rows, int fan_in);
// Componentwise sum of a list; an empty list yields zeros of `width`.
Var integrate(Tape& tape, const std::vector<Var>& us, int rows, int width);

// h' = OP(h, [u, e]) with a zero Hebbian term.
Var neuron_update(Tape& tape, const MetaParams& meta, const Kernel& k, Var h, Var u, Var e);

// w' = OP(w, x); GATED receives hebb.
Var synapse_update(Tape& tape, const MetaParams& meta, const Kernel& k, Var w, Var x, Var hebb);

}  // namespace plastic::rules
