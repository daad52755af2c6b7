#include "plastic/ad/tape.hpp"

#include <atomic>
#include <cmath>
#include <sstream>
#include <stdexcept>
#include <string>

namespace plastic::ad {
namespace {

std::atomic<std::uint32_t> next_tag{1};

enum Broadcast : int { kSame = 0, kScalar = 1, kRow = 2, kCol = 3 };

std::string shape(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

[[noreturn]] void shape_error(Primitive p, const Matrix& a, const Matrix& b) {
  throw std::invalid_argument(std::string("ad::") + std::string(primitive_name(p)) +
                              ": shape mismatch " + shape(a) + " vs " + shape(b));
}

int broadcast_mode(Primitive p, const Matrix& a, const Matrix& b) {
  if (a.rows() == b.rows() && a.cols() == b.cols()) return kSame;
  if (b.rows() == 1 && b.cols() == 1) return kScalar;
  if (b.rows() == 1 && b.cols() == a.cols()) return kRow;
  if (b.cols() == 1 && b.rows() == a.rows()) return kCol;
  shape_error(p, a, b);
}

// Sums a full-shape adjoint down to the shape of a broadcast operand.
Matrix reduce(const Matrix& g, int mode) {
  switch (mode) {
    case kSame:
      return g;
    case kScalar:
      return Matrix::Constant(1, 1, g.sum());
    case kRow:
      return g.colwise().sum();
    default:
      return g.rowwise().sum();
  }
}

template <typename Expr>
void accumulate(Matrix& slot, const Expr& g) {
  if (slot.size() == 0) {
    slot = g;
  } else {
    slot += g;
  }
}

void accumulate(Matrix& slot, Matrix&& g) {
  if (slot.size() == 0) {
    slot = std::move(g);
  } else {
    slot += g;
  }
}

// out = op(x, y broadcast to x's shape), without materializing the broadcast.
template <typename Op>
Matrix broadcast_apply(const Matrix& x, const Matrix& y, int mode, Op op) {
  Matrix out(x.rows(), x.cols());
  switch (mode) {
    case kSame:
      out.array() = op(x.array(), y.array());
      break;
    case kScalar:
      out.array() = op(x.array(), Eigen::ArrayXXd::Constant(x.rows(), x.cols(), y(0, 0)));
      break;
    case kRow:
      for (Eigen::Index r = 0; r < x.rows(); ++r) out.row(r).array() = op(x.row(r).array(), y.row(0).array());
      break;
    default:
      for (Eigen::Index c = 0; c < x.cols(); ++c) out.col(c).array() = op(x.col(c).array(), y.col(0).array());
      break;
  }
  return out;
}

}  // namespace

std::string_view primitive_name(Primitive p) {
  switch (p) {
    case Primitive::kConstant: return "constant";
    case Primitive::kParameter: return "parameter";
    case Primitive::kAdd: return "add";
    case Primitive::kSubtract: return "subtract";
    case Primitive::kMultiply: return "multiply";
    case Primitive::kScale: return "scale";
    case Primitive::kMatMul: return "matmul";
    case Primitive::kTanh: return "tanh";
    case Primitive::kSigmoid: return "sigmoid";
    case Primitive::kExp: return "exp";
    case Primitive::kLog: return "log";
    case Primitive::kSum: return "sum";
    case Primitive::kGroupSum: return "group_sum";
    case Primitive::kConcat: return "concat";
    case Primitive::kSelectCols: return "select_cols";
    case Primitive::kGatherRows: return "gather_rows";
    case Primitive::kSoftmax: return "softmax";
  }
  return "unknown";
}

Tape::Tape() : tag_(next_tag.fetch_add(1)) {}

void Tape::clear() {
  nodes_.clear();
  param_nodes_.clear();
  meta_ = nullptr;
  tag_ = next_tag.fetch_add(1);
}

std::int32_t Tape::check(Var v, Primitive kind) const {
  if (v.tag != tag_ || v.index < 0 || static_cast<std::size_t>(v.index) >= nodes_.size()) {
    throw std::invalid_argument(std::string("ad::") + std::string(primitive_name(kind)) +
                                ": operand is not on this tape");
  }
  return v.index;
}

Var Tape::push(Node node) {
  nodes_.push_back(std::move(node));
  return Var{static_cast<std::int32_t>(nodes_.size() - 1), tag_};
}

Var Tape::constant(Matrix value) {
  Node n;
  n.kind = Primitive::kConstant;
  n.value = std::move(value);
  return push(std::move(n));
}

Var Tape::scalar(double value) { return constant(Matrix::Constant(1, 1, value)); }

Var Tape::parameter(const MetaParams& meta, ParamId id) {
  if (meta_ == nullptr) {
    meta_ = &meta;
  } else if (meta_ != &meta) {
    throw std::invalid_argument("ad::parameter: tape already bound to another MetaParams");
  }
  if (id.index < 0 || static_cast<std::size_t>(id.index) >= meta.slots()) {
    throw std::out_of_range("ad::parameter: slot out of range");
  }
  if (param_nodes_.size() < meta.slots()) param_nodes_.resize(meta.slots(), -1);
  if (param_nodes_[id.index] >= 0) return Var{param_nodes_[id.index], tag_};
  Node n;
  n.kind = Primitive::kParameter;
  n.param = id.index;
  n.value = meta.value(id);
  Var v = push(std::move(n));
  param_nodes_[id.index] = v.index;
  return v;
}

Var Tape::binary(Primitive kind, Var a, Var b) {
  const auto ia = check(a, kind);
  const auto ib = check(b, kind);
  const Matrix& x = nodes_[ia].value;
  const Matrix& y = nodes_[ib].value;
  Node n;
  n.kind = kind;
  n.lhs = ia;
  n.rhs = ib;
  if (kind == Primitive::kMatMul) {
    if (x.cols() != y.rows()) shape_error(kind, x, y);
    n.value.noalias() = x * y;
    return push(std::move(n));
  }
  const int mode = broadcast_mode(kind, x, y);
  n.aux0 = mode;
  switch (kind) {
    case Primitive::kAdd:
      n.value = broadcast_apply(x, y, mode, [](const auto& p, const auto& q) { return p + q; });
      break;
    case Primitive::kSubtract:
      n.value = broadcast_apply(x, y, mode, [](const auto& p, const auto& q) { return p - q; });
      break;
    case Primitive::kMultiply:
      n.value = broadcast_apply(x, y, mode, [](const auto& p, const auto& q) { return p * q; });
      break;
    default:
      throw std::logic_error("ad::binary: unsupported primitive");
  }
  return push(std::move(n));
}

Var Tape::unary(Primitive kind, Var a, Matrix value) {
  Node n;
  n.kind = kind;
  n.lhs = a.index;
  n.value = std::move(value);
  return push(std::move(n));
}

Var Tape::add(Var a, Var b) { return binary(Primitive::kAdd, a, b); }
Var Tape::subtract(Var a, Var b) { return binary(Primitive::kSubtract, a, b); }
Var Tape::multiply(Var a, Var b) { return binary(Primitive::kMultiply, a, b); }
Var Tape::matmul(Var a, Var b) { return binary(Primitive::kMatMul, a, b); }

Var Tape::scale(Var a, double factor) {
  const auto& x = nodes_[check(a, Primitive::kScale)].value;
  Node n;
  n.kind = Primitive::kScale;
  n.lhs = a.index;
  n.factor = factor;
  n.value = x * factor;
  return push(std::move(n));
}

Var Tape::tanh(Var a) {
  const auto& x = nodes_[check(a, Primitive::kTanh)].value;
  return unary(Primitive::kTanh, a, x.array().tanh().matrix());
}

Var Tape::sigmoid(Var a) {
  const auto& x = nodes_[check(a, Primitive::kSigmoid)].value;
  Matrix y = x.unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
  return unary(Primitive::kSigmoid, a, std::move(y));
}

Var Tape::exp(Var a) {
  const auto& x = nodes_[check(a, Primitive::kExp)].value;
  return unary(Primitive::kExp, a, x.array().exp().matrix());
}

Var Tape::log(Var a) {
  const auto& x = nodes_[check(a, Primitive::kLog)].value;
  return unary(Primitive::kLog, a, x.array().log().matrix());
}

Var Tape::sum(Var a) {
  const auto& x = nodes_[check(a, Primitive::kSum)].value;
  return unary(Primitive::kSum, a, Matrix::Constant(1, 1, x.sum()));
}

Var Tape::group_sum(Var a, int group_rows) {
  const auto& x = nodes_[check(a, Primitive::kGroupSum)].value;
  if (group_rows <= 0 || x.rows() % group_rows != 0) {
    throw std::invalid_argument("ad::group_sum: " + shape(x) + " rows not divisible by group " +
                                std::to_string(group_rows));
  }
  const Eigen::Index groups = x.rows() / group_rows;
  Matrix y(groups, x.cols());
  for (Eigen::Index g = 0; g < groups; ++g) {
    y.row(g) = x.middleRows(g * group_rows, group_rows).colwise().sum();
  }
  Var v = unary(Primitive::kGroupSum, a, std::move(y));
  nodes_[v.index].aux0 = group_rows;
  return v;
}

Var Tape::concat(std::span<const Var> parts) {
  if (parts.empty()) throw std::invalid_argument("ad::concat: no operands");
  Eigen::Index rows = 1;
  Eigen::Index cols = 0;
  Node n;
  n.kind = Primitive::kConcat;
  for (Var p : parts) {
    const auto& x = nodes_[check(p, Primitive::kConcat)].value;
    n.parts.push_back(p.index);
    cols += x.cols();
    if (x.rows() != 1) {
      if (rows != 1 && rows != x.rows()) {
        throw std::invalid_argument("ad::concat: row mismatch " + std::to_string(rows) + " vs " +
                                    std::to_string(x.rows()));
      }
      rows = x.rows();
    }
  }
  n.value.resize(rows, cols);
  Eigen::Index off = 0;
  for (auto idx : n.parts) {
    const auto& x = nodes_[idx].value;
    if (x.rows() == rows) {
      n.value.middleCols(off, x.cols()) = x;
    } else {
      n.value.middleCols(off, x.cols()) = x.replicate(rows, 1);
    }
    off += x.cols();
  }
  return push(std::move(n));
}

Var Tape::select_cols(Var a, int begin, int count) {
  const auto& x = nodes_[check(a, Primitive::kSelectCols)].value;
  if (begin < 0 || count <= 0 || begin + count > x.cols()) {
    throw std::invalid_argument("ad::select_cols: columns [" + std::to_string(begin) + ", " +
                                std::to_string(begin + count) + ") out of range for " + shape(x));
  }
  Var v = unary(Primitive::kSelectCols, a, x.middleCols(begin, count));
  nodes_[v.index].aux0 = begin;
  nodes_[v.index].aux1 = count;
  return v;
}

Var Tape::gather_rows(Var a, IndexList rows) {
  const auto& x = nodes_[check(a, Primitive::kGatherRows)].value;
  if (!rows) throw std::invalid_argument("ad::gather_rows: null index list");
  Matrix y(static_cast<Eigen::Index>(rows->size()), x.cols());
  for (std::size_t r = 0; r < rows->size(); ++r) {
    const int src = (*rows)[r];
    if (src < 0 || src >= x.rows()) {
      throw std::invalid_argument("ad::gather_rows: row " + std::to_string(src) +
                                  " out of range for " + shape(x));
    }
    y.row(static_cast<Eigen::Index>(r)) = x.row(src);
  }
  Var v = unary(Primitive::kGatherRows, a, std::move(y));
  nodes_[v.index].index = std::move(rows);
  return v;
}

Var Tape::softmax(Var a, SoftmaxAxis axis) {
  const auto& x = nodes_[check(a, Primitive::kSoftmax)].value;
  Matrix y(x.rows(), x.cols());
  if (axis == SoftmaxAxis::kAcrossRows) {
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
      const double m = x.col(c).maxCoeff();
      y.col(c) = (x.col(c).array() - m).exp().matrix();
      y.col(c) /= y.col(c).sum();
    }
  } else {
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
      const double m = x.row(r).maxCoeff();
      y.row(r) = (x.row(r).array() - m).exp().matrix();
      y.row(r) /= y.row(r).sum();
    }
  }
  Var v = unary(Primitive::kSoftmax, a, std::move(y));
  nodes_[v.index].aux0 = static_cast<int>(axis);
  return v;
}

Var Tape::record(Primitive kind, std::span<const Var> operands, double factor) {
  auto need = [&](std::size_t n) {
    if (operands.size() != n) {
      throw std::invalid_argument(std::string("ad::") + std::string(primitive_name(kind)) +
                                  ": expected " + std::to_string(n) + " operands");
    }
  };
  switch (kind) {
    case Primitive::kAdd: need(2); return add(operands[0], operands[1]);
    case Primitive::kSubtract: need(2); return subtract(operands[0], operands[1]);
    case Primitive::kMultiply: need(2); return multiply(operands[0], operands[1]);
    case Primitive::kMatMul: need(2); return matmul(operands[0], operands[1]);
    case Primitive::kScale: need(1); return scale(operands[0], factor);
    case Primitive::kTanh: need(1); return tanh(operands[0]);
    case Primitive::kSigmoid: need(1); return sigmoid(operands[0]);
    case Primitive::kExp: need(1); return exp(operands[0]);
    case Primitive::kLog: need(1); return log(operands[0]);
    case Primitive::kSum: need(1); return sum(operands[0]);
    case Primitive::kConcat: return concat(operands);
    case Primitive::kSoftmax: need(1); return softmax(operands[0], SoftmaxAxis::kAcrossRows);
    default:
      throw std::invalid_argument(std::string("ad::record: primitive '") +
                                  std::string(primitive_name(kind)) + "' needs its typed entry point");
  }
}

const Matrix& Tape::value(Var v) const { return nodes_[check(v, Primitive::kConstant)].value; }

double Tape::scalar_value(Var v) const {
  const auto& m = value(v);
  if (m.rows() != 1 || m.cols() != 1) {
    throw std::invalid_argument("ad::scalar_value: node is " + shape(m) + ", not 1x1");
  }
  return m(0, 0);
}

Gradients Tape::backward(Var loss) const {
  if (loss.tag != tag_ || loss.index < 0 || static_cast<std::size_t>(loss.index) >= nodes_.size()) {
    throw std::invalid_argument("ad::backward: loss is not on this tape");
  }
  const auto& lv = nodes_[loss.index].value;
  if (lv.rows() != 1 || lv.cols() != 1) {
    throw std::invalid_argument("ad::backward: loss must be 1x1, got " + shape(lv));
  }

  Gradients out;
  if (meta_ != nullptr) {
    out.reserve(meta_->slots());
    for (std::size_t s = 0; s < meta_->slots(); ++s) {
      const auto& p = meta_->value(s);
      out.push_back(Matrix::Zero(p.rows(), p.cols()));
    }
  }

  std::vector<Matrix> grads(static_cast<std::size_t>(loss.index) + 1);
  grads[loss.index] = Matrix::Ones(1, 1);

  for (std::int32_t i = loss.index; i >= 0; --i) {
    Matrix& g = grads[i];
    if (g.size() == 0) continue;
    const Node& n = nodes_[i];
    switch (n.kind) {
      case Primitive::kConstant:
        break;
      case Primitive::kParameter:
        out[n.param] += g;
        break;
      case Primitive::kAdd:
        accumulate(grads[n.rhs], reduce(g, n.aux0));
        accumulate(grads[n.lhs], std::move(g));
        break;
      case Primitive::kSubtract:
        accumulate(grads[n.lhs], g);
        accumulate(grads[n.rhs], -reduce(g, n.aux0));
        break;
      case Primitive::kMultiply: {
        const Matrix& x = nodes_[n.lhs].value;
        const Matrix& y = nodes_[n.rhs].value;
        accumulate(grads[n.rhs], reduce(g.cwiseProduct(x), n.aux0));
        accumulate(grads[n.lhs], broadcast_apply(g, y, n.aux0,
                                                 [](const auto& p, const auto& q) { return p * q; }));
        break;
      }
      case Primitive::kScale:
        accumulate(grads[n.lhs], g * n.factor);
        break;
      case Primitive::kMatMul: {
        const Matrix& x = nodes_[n.lhs].value;
        const Matrix& y = nodes_[n.rhs].value;
        Matrix gx;
        gx.noalias() = g * y.transpose();
        Matrix gy;
        gy.noalias() = x.transpose() * g;
        accumulate(grads[n.lhs], std::move(gx));
        accumulate(grads[n.rhs], std::move(gy));
        break;
      }
      case Primitive::kTanh:
        accumulate(grads[n.lhs], (g.array() * (1.0 - n.value.array().square())).matrix());
        break;
      case Primitive::kSigmoid:
        accumulate(grads[n.lhs],
                   (g.array() * n.value.array() * (1.0 - n.value.array())).matrix());
        break;
      case Primitive::kExp:
        accumulate(grads[n.lhs], g.cwiseProduct(n.value));
        break;
      case Primitive::kLog:
        accumulate(grads[n.lhs], g.cwiseQuotient(nodes_[n.lhs].value));
        break;
      case Primitive::kSum: {
        const Matrix& x = nodes_[n.lhs].value;
        accumulate(grads[n.lhs], Matrix::Constant(x.rows(), x.cols(), g(0, 0)));
        break;
      }
      case Primitive::kGroupSum: {
        const Matrix& x = nodes_[n.lhs].value;
        Matrix gx(x.rows(), x.cols());
        for (Eigen::Index r = 0; r < x.rows(); ++r) gx.row(r) = g.row(r / n.aux0);
        accumulate(grads[n.lhs], std::move(gx));
        break;
      }
      case Primitive::kConcat: {
        Eigen::Index off = 0;
        for (auto idx : n.parts) {
          const Matrix& x = nodes_[idx].value;
          if (x.rows() == g.rows()) {
            accumulate(grads[idx], g.middleCols(off, x.cols()));
          } else {
            accumulate(grads[idx], g.middleCols(off, x.cols()).colwise().sum());
          }
          off += x.cols();
        }
        break;
      }
      case Primitive::kSelectCols: {
        const Matrix& x = nodes_[n.lhs].value;
        Matrix& gx = grads[n.lhs];
        if (gx.size() == 0) gx = Matrix::Zero(x.rows(), x.cols());
        gx.middleCols(n.aux0, n.aux1) += g;
        break;
      }
      case Primitive::kGatherRows: {
        const Matrix& x = nodes_[n.lhs].value;
        Matrix& gx = grads[n.lhs];
        if (gx.size() == 0) gx = Matrix::Zero(x.rows(), x.cols());
        const auto& rows = *n.index;
        for (std::size_t r = 0; r < rows.size(); ++r) {
          gx.row(rows[r]) += g.row(static_cast<Eigen::Index>(r));
        }
        break;
      }
      case Primitive::kSoftmax: {
        const Matrix& y = n.value;
        Matrix gy = g.cwiseProduct(y);
        Matrix gx;
        if (n.aux0 == static_cast<int>(SoftmaxAxis::kAcrossRows)) {
          const Eigen::RowVectorXd dots = gy.colwise().sum();
          gx = gy - (y.array().rowwise() * dots.array()).matrix();
        } else {
          const Eigen::VectorXd dots = gy.rowwise().sum();
          gx = gy - (y.array().colwise() * dots.array()).matrix();
        }
        accumulate(grads[n.lhs], std::move(gx));
        break;
      }
    }
    // Intermediate adjoints are not needed once propagated.
    if (n.kind != Primitive::kParameter) g.resize(0, 0);
  }
  return out;
}

}  // namespace plastic::ad
