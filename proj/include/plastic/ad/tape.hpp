#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "plastic/ad/meta_params.hpp"

namespace plastic::ad {

// Primitive operations recorded on a tape. Every value is a dense row-major
// matrix; a batch of neurons or synapses is one matrix with one row each.
enum class Primitive : std::uint8_t {
  kConstant,
  kParameter,
  kAdd,
  kSubtract,
  kMultiply,
  kScale,
  kMatMul,
  kTanh,
  kSigmoid,
  kExp,
  kLog,
  kSum,         // all elements -> 1x1
  kGroupSum,    // consecutive groups of rows -> one row per group
  kConcat,      // column-wise; single-row operands broadcast over rows
  kSelectCols,  // contiguous column slice
  kGatherRows,  // rows picked by index list
  kSoftmax,     // across rows (per column) or across columns (per row)
};

std::string_view primitive_name(Primitive p);

// Handle to a node on a particular tape generation.
struct Var {
  std::int32_t index = -1;
  std::uint32_t tag = 0;

  bool valid() const { return index >= 0; }
};

enum class SoftmaxAxis : std::uint8_t { kAcrossRows, kAcrossCols };

using IndexList = std::shared_ptr<const std::vector<int>>;

// Append-only record of a forward computation. Values are computed eagerly
// when a node is recorded; backward() walks the nodes in reverse order.
//
// Binary elementwise ops accept a second operand that broadcasts: same shape,
// a single row, a single column, or 1x1.
class Tape {
 public:
  Tape();

  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;
  Tape(Tape&&) noexcept = default;
  Tape& operator=(Tape&&) noexcept = default;

  // Drops every node. Parameter leaves are re-created lazily on next use.
  void clear();

  std::size_t size() const { return nodes_.size(); }

  Var constant(Matrix value);
  Var scalar(double value);

  // Leaf bound to a MetaParams slot. Repeated calls for the same slot return
  // the same node until clear(). A tape binds to a single MetaParams object.
  Var parameter(const MetaParams& meta, ParamId id);

  Var add(Var a, Var b);
  Var subtract(Var a, Var b);
  Var multiply(Var a, Var b);
  Var scale(Var a, double factor);
  Var matmul(Var a, Var b);
  Var tanh(Var a);
  Var sigmoid(Var a);
  Var exp(Var a);
  Var log(Var a);
  Var sum(Var a);
  Var group_sum(Var a, int group_rows);
  Var concat(std::span<const Var> parts);
  Var concat(std::initializer_list<Var> parts) {
    return concat(std::span<const Var>(parts.begin(), parts.size()));
  }
  Var select_cols(Var a, int begin, int count);
  Var gather_rows(Var a, IndexList rows);
  Var softmax(Var a, SoftmaxAxis axis);

  // Generic entry point keyed by primitive kind, for callers that dispatch on
  // data. Unary and binary kinds only; `factor` is used by kScale.
  Var record(Primitive kind, std::span<const Var> operands, double factor = 1.0);

  const Matrix& value(Var v) const;
  double scalar_value(Var v) const;

  // Reverse sweep from a 1x1 node. Returns one gradient per MetaParams slot,
  // zero-filled for slots that do not influence the loss.
  Gradients backward(Var loss) const;

 private:
  struct Node {
    Primitive kind = Primitive::kConstant;
    std::int32_t lhs = -1;
    std::int32_t rhs = -1;
    double factor = 0.0;
    int aux0 = 0;
    int aux1 = 0;
    int param = -1;
    IndexList index;
    std::vector<std::int32_t> parts;
    Matrix value;
  };

  std::int32_t check(Var v, Primitive kind) const;
  Var push(Node node);
  Var binary(Primitive kind, Var a, Var b);
  Var unary(Primitive kind, Var a, Matrix value);

  std::vector<Node> nodes_;
  std::vector<std::int32_t> param_nodes_;
  const MetaParams* meta_ = nullptr;
  std::uint32_t tag_ = 0;
};

}  // namespace plastic::ad
