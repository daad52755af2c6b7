#include "plastic/rules/ops.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <stdexcept>

namespace plastic::rules {
namespace {

Matrix glorot(int fan_in, int fan_out, std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-limit, limit);
  Matrix m(fan_in, fan_out);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
  return m;
}

void require_cols(const Tape& tape, Var v, int cols, const char* what) {
  if (tape.value(v).cols() != cols) {
    throw std::invalid_argument(std::string(what) + ": expected " + std::to_string(cols) +
                                " columns, got " + std::to_string(tape.value(v).cols()));
  }
}

Var mlp_hidden(Tape& tape, const MetaParams& meta, const Kernel& k, Var s, Var x) {
  require_cols(tape, s, k.state_dim, "op state");
  require_cols(tape, x, k.input_dim, "op input");
  const Var in = tape.concat({s, x});
  return tape.tanh(dense(tape, meta, k.layers.at(0), in));
}

}  // namespace

std::string_view op_name(OpKind op) {
  switch (op) {
    case OpKind::kMlp: return "MLP";
    case OpKind::kMlpTanh: return "MLP-tanh";
    case OpKind::kLstm: return "LSTM";
    case OpKind::kLstmSigmoid: return "LSTM-sigmoid";
    case OpKind::kLstmId: return "LSTM-id";
    case OpKind::kGated: return "GATED";
  }
  return "?";
}

OpKind parse_op(std::string_view name) {
  std::string s(name);
  if (s == "LSTM-σ") return OpKind::kLstmSigmoid;
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  if (s == "mlp") return OpKind::kMlp;
  if (s == "mlp-tanh") return OpKind::kMlpTanh;
  if (s == "lstm") return OpKind::kLstm;
  if (s == "lstm-sigmoid" || s == "lstm-sigma") return OpKind::kLstmSigmoid;
  if (s == "lstm-id") return OpKind::kLstmId;
  if (s == "gated") return OpKind::kGated;
  throw std::invalid_argument("unknown update operator '" + std::string(name) + "'");
}

bool is_lstm(OpKind op) {
  return op == OpKind::kLstm || op == OpKind::kLstmSigmoid || op == OpKind::kLstmId;
}

std::size_t kernel_param_count(OpKind op, int state_dim, int input_dim, int hidden_width) {
  const auto s = static_cast<std::size_t>(state_dim);
  const auto x = static_cast<std::size_t>(input_dim);
  const auto m = static_cast<std::size_t>(hidden_width);
  if (is_lstm(op)) {
    const std::size_t half = s / 2;
    return (half + x) * 4 * half + 4 * half;
  }
  const std::size_t out = op == OpKind::kGated ? 2 * s : s;
  return (s + x) * m + m + m * out + out;
}

DenseLayer make_dense(MetaParams& meta, const std::string& name, int inputs, int outputs,
                      std::mt19937_64& rng) {
  DenseLayer layer;
  layer.weight = meta.add(name + ".weight", glorot(inputs, outputs, rng));
  layer.bias = meta.add(name + ".bias", Matrix::Zero(1, outputs));
  return layer;
}

Var dense(Tape& tape, const MetaParams& meta, const DenseLayer& layer, Var x) {
  return tape.add(tape.matmul(x, tape.parameter(meta, layer.weight)),
                  tape.parameter(meta, layer.bias));
}

Kernel make_kernel(MetaParams& meta, const std::string& prefix, OpKind op, KernelRole role,
                   int state_dim, int input_dim, int hidden_width, std::mt19937_64& rng) {
  if (state_dim < 1 || input_dim < 0 || hidden_width < 1) {
    throw std::invalid_argument(prefix + ": kernel dimensions must be positive");
  }
  if (is_lstm(op) && state_dim % 2 != 0) {
    throw std::invalid_argument(prefix + ": " + std::string(op_name(op)) +
                                " needs an even state size, got " + std::to_string(state_dim));
  }
  Kernel k;
  k.op = op;
  k.role = role;
  k.state_dim = state_dim;
  k.input_dim = input_dim;
  k.hidden_width = hidden_width;
  if (is_lstm(op)) {
    const int half = state_dim / 2;
    DenseLayer gates = make_dense(meta, prefix + ".gates", half + input_dim, 4 * half, rng);
    meta.value(gates.bias).middleCols(half, half).setConstant(1.0);
    k.layers.push_back(gates);
  } else {
    const int out = op == OpKind::kGated ? 2 * state_dim : state_dim;
    k.layers.push_back(make_dense(meta, prefix + ".hidden", state_dim + input_dim, hidden_width, rng));
    k.layers.push_back(make_dense(meta, prefix + ".out", hidden_width, out, rng));
  }
  return k;
}

Var op_mlp(Tape& tape, const MetaParams& meta, const Kernel& k, Var s, Var x,
           OutputNonlinearity out) {
  const Var pre = dense(tape, meta, k.layers.at(1), mlp_hidden(tape, meta, k, s, x));
  switch (out) {
    case OutputNonlinearity::kSigmoid: return tape.sigmoid(pre);
    case OutputNonlinearity::kTanh: return tape.tanh(pre);
    case OutputNonlinearity::kIdentity: break;
  }
  return pre;
}

Var op_lstm(Tape& tape, const MetaParams& meta, const Kernel& k, Var s, Var x, LstmOutput out) {
  require_cols(tape, s, k.state_dim, "lstm state");
  require_cols(tape, x, k.input_dim, "lstm input");
  if (k.state_dim % 2 != 0) throw std::invalid_argument("lstm: odd state size");
  const int half = k.state_dim / 2;
  const Var hidden = tape.select_cols(s, 0, half);
  const Var cell = tape.select_cols(s, half, half);
  const Var z = dense(tape, meta, k.layers.at(0), tape.concat({hidden, x}));
  const Var in_gate = tape.sigmoid(tape.select_cols(z, 0, half));
  const Var forget = tape.sigmoid(tape.select_cols(z, half, half));
  const Var out_gate = tape.sigmoid(tape.select_cols(z, 2 * half, half));
  const Var cand = tape.tanh(tape.select_cols(z, 3 * half, half));
  const Var c_new = tape.add(tape.multiply(forget, cell), tape.multiply(in_gate, cand));
  Var squashed = c_new;
  if (out == LstmOutput::kTanh) squashed = tape.tanh(c_new);
  if (out == LstmOutput::kSigmoid) squashed = tape.sigmoid(c_new);
  const Var h_new = tape.multiply(out_gate, squashed);
  return tape.concat({h_new, c_new});
}

Var gated_combine(Tape& tape, Var s, Var a, Var b, std::optional<Var> hebb) {
  const Var g = tape.sigmoid(a);
  Var target = tape.tanh(b);
  if (hebb) target = tape.add(target, *hebb);
  // (1 - g) s + g t, written so that g = 0 and g = 1 are exact.
  return tape.add(tape.subtract(s, tape.multiply(g, s)), tape.multiply(g, target));
}

Var op_gated(Tape& tape, const MetaParams& meta, const Kernel& k, Var s, Var x,
             std::optional<Var> hebb) {
  const Var ab = dense(tape, meta, k.layers.at(1), mlp_hidden(tape, meta, k, s, x));
  const Var a = tape.select_cols(ab, 0, k.state_dim);
  const Var b = tape.select_cols(ab, k.state_dim, k.state_dim);
  return gated_combine(tape, s, a, b, hebb);
}

Var apply(Tape& tape, const MetaParams& meta, const Kernel& k, Var s, Var x,
          std::optional<Var> hebb) {
  switch (k.op) {
    case OpKind::kMlp:
      return op_mlp(tape, meta, k, s, x,
                    k.role == KernelRole::kNeuron ? OutputNonlinearity::kSigmoid
                                                  : OutputNonlinearity::kIdentity);
    case OpKind::kMlpTanh:
      return op_mlp(tape, meta, k, s, x, OutputNonlinearity::kTanh);
    case OpKind::kLstm:
      return op_lstm(tape, meta, k, s, x, LstmOutput::kTanh);
    case OpKind::kLstmSigmoid:
      return op_lstm(tape, meta, k, s, x, LstmOutput::kSigmoid);
    case OpKind::kLstmId:
      return op_lstm(tape, meta, k, s, x, LstmOutput::kIdentity);
    case OpKind::kGated:
      return op_gated(tape, meta, k, s, x, hebb);
  }
  throw std::logic_error("apply: unhandled operator");
}

Var synapse_effect(Tape& tape, Var w, Var pre0) {
  require_cols(tape, pre0, 1, "synapse_effect");
  return tape.multiply(w, pre0);
}

Var hebbian_term(Tape& tape, Var h_post, Var h_pre) {
  return tape.multiply(h_post, tape.select_cols(h_pre, 1, 1));
}

Var synapse_input_vector(Tape& tape, Var h_post, Var h_pre, Var u, Var e_post, Var e_pre) {
  return synapse_input_vector(tape, h_post, h_pre, u, hebbian_term(tape, h_post, h_pre), e_post,
                              e_pre);
}

Var synapse_input_vector(Tape& tape, Var h_post, Var h_pre, Var u, Var hebb, Var e_post,
                         Var e_pre) {
  return tape.concat({h_post, h_pre, u, hebb, e_post, e_pre});
}

Var integrate(Tape& tape, Var u_rows, int fan_in) { return tape.group_sum(u_rows, fan_in); }

Var integrate(Tape& tape, const std::vector<Var>& us, int rows, int width) {
  if (us.empty()) return tape.constant(Matrix::Zero(rows, width));
  Var acc = us.front();
  for (std::size_t i = 1; i < us.size(); ++i) acc = tape.add(acc, us[i]);
  return acc;
}

Var neuron_update(Tape& tape, const MetaParams& meta, const Kernel& k, Var h, Var u, Var e) {
  return apply(tape, meta, k, h, tape.concat({u, e}), std::nullopt);
}

Var synapse_update(Tape& tape, const MetaParams& meta, const Kernel& k, Var w, Var x, Var hebb) {
  return apply(tape, meta, k, w, x, hebb);
}

}  // namespace plastic::rules
