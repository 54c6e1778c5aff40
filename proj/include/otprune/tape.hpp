#pragma once

#include <functional>
#include <string>
#include <vector>

namespace otp::ad {

// Row-major value: scalar = 1x1, vector = n x 1, matrix = r x c.
struct Tensor {
  int rows = 0;
  int cols = 1;
  std::vector<double> v;

  Tensor() = default;
  Tensor(int r, int c, double fill = 0.0) : rows(r), cols(c), v(static_cast<std::size_t>(r) * c, fill) {}
  static Tensor scalar(double x) {
    Tensor t(1, 1);
    t.v[0] = x;
    return t;
  }
  static Tensor vector(std::vector<double> x) {
    Tensor t;
    t.rows = static_cast<int>(x.size());
    t.cols = 1;
    t.v = std::move(x);
    return t;
  }
  int size() const { return rows * cols; }
  bool is_scalar() const { return rows == 1 && cols == 1; }
  double& at(int i, int j) { return v[static_cast<std::size_t>(i) * cols + j]; }
  double at(int i, int j) const { return v[static_cast<std::size_t>(i) * cols + j]; }
};

enum class Op {
  kVar,
  kConst,
  kAdd,
  kSub,
  kMul,
  kDiv,
  kNeg,
  kExp,
  kLog,
  kSquare,
  kAbs,
  kSigmoid,
  kRelu,
  kScale,      // attr * x
  kAddConst,   // x + attr
  kClampMin,   // max(x, attr); gradient passes only where x > attr
  kSum,        // -> scalar
  kDot,        // vec . vec -> scalar
  kMatVec,     // M[r x c] * x[c] -> r
  kMatMulNT,   // A[r x k] * B[m x k]^T -> r x m
  kAddRow,     // M + broadcast row vector [cols]
  kAddCol,     // M + broadcast column vector [rows]
  kColScale,   // M .* broadcast row vector [cols]
  kStackCols2, // (u[n], v[n]) -> n x 2
  kCol,        // column idx[0] of M -> vector
  kConcat2,    // vectors stacked
  kSlice,      // vector slice [idx0, idx0+idx1)
  kReshape,    // same data, new shape idx = {r, c}
  kLseRows,    // log-sum-exp over each row -> vector[rows]
  kLseCols,    // log-sum-exp over each column -> vector[cols]
  kSoftmaxXent // mean softmax cross-entropy, labels in idx -> scalar
};

const char* op_name(Op op);

// Reverse-mode tape over small dense tensors. Values are computed eagerly
// as nodes are added; recompute() re-evaluates in insertion order after
// leaf values have been mutated in place (used by the finite-difference
// oracle). Any non-finite value aborts with the offending node named.
class Tape {
 public:
  struct Node {
    Op op;
    int a = -1;
    int b = -1;
    double attr = 0.0;
    std::vector<int> idx;
    Tensor val;
    Tensor grad;
  };

  int var(Tensor t);
  int constant(Tensor t);
  int constant_scalar(double x) { return constant(Tensor::scalar(x)); }

  // Constant node carrying the current value of `id`; gradient stops here.
  int detach(int id) { return constant(nodes_[id].val); }

  int add(int a, int b) { return binary(Op::kAdd, a, b); }
  int sub(int a, int b) { return binary(Op::kSub, a, b); }
  int mul(int a, int b) { return binary(Op::kMul, a, b); }
  int div(int a, int b) { return binary(Op::kDiv, a, b); }
  int neg(int a) { return unary(Op::kNeg, a); }
  int exp(int a) { return unary(Op::kExp, a); }
  int log(int a) { return unary(Op::kLog, a); }
  int square(int a) { return unary(Op::kSquare, a); }
  int abs(int a) { return unary(Op::kAbs, a); }
  int sigmoid(int a) { return unary(Op::kSigmoid, a); }
  int relu(int a) { return unary(Op::kRelu, a); }
  int scale(int a, double c) { return attr_op(Op::kScale, a, c); }
  int add_const(int a, double c) { return attr_op(Op::kAddConst, a, c); }
  int clamp_min(int a, double c) { return attr_op(Op::kClampMin, a, c); }
  int sum(int a) { return unary(Op::kSum, a); }
  int dot(int a, int b) { return binary(Op::kDot, a, b); }
  int matvec(int m, int x) { return binary(Op::kMatVec, m, x); }
  int matmul_nt(int a, int b) { return binary(Op::kMatMulNT, a, b); }
  int add_row(int m, int v) { return binary(Op::kAddRow, m, v); }
  int add_col(int m, int v) { return binary(Op::kAddCol, m, v); }
  int col_scale(int m, int v) { return binary(Op::kColScale, m, v); }
  int stack_cols(int u, int v) { return binary(Op::kStackCols2, u, v); }
  int col(int m, int j);
  int concat(int a, int b) { return binary(Op::kConcat2, a, b); }
  int slice(int a, int offset, int len);
  int reshape(int a, int r, int c);
  int lse_rows(int a) { return unary(Op::kLseRows, a); }
  int lse_cols(int a) { return unary(Op::kLseCols, a); }
  int softmax_xent(int logits, const std::vector<int>& labels);

  const Tensor& value(int id) const { return nodes_[id].val; }
  // Leaf value for in-place mutation before recompute().
  Tensor& leaf_value(int id);

  // Re-evaluates every non-leaf node in insertion order.
  void recompute();

  // Reverse accumulation from a scalar output; fills grads for all nodes.
  void backward(int out);
  const Tensor& grad(int id) const { return nodes_[id].grad; }

  std::size_t size() const { return nodes_.size(); }
  void reserve(std::size_t n) { nodes_.reserve(n); }

 private:
  int unary(Op op, int a);
  int binary(Op op, int a, int b);
  int attr_op(Op op, int a, double attr);
  int push(Node n);
  void eval(Node& n);
  void check_finite(const Node& n, int id) const;

  std::vector<Node> nodes_;
};

// Central finite differences of a scalar function over a flat point.
std::vector<double> finite_difference_gradient(
    const std::function<double(const std::vector<double>&)>& loss,
    std::vector<double> point, double h = 1e-5);

// |a - b| / max(|a|, |b|, floor); the floor keeps entries that are zero to
// within finite-difference noise from reporting spurious relative error.
double relative_error(double a, double b, double floor = 1e-5);

}  // namespace otp::ad
