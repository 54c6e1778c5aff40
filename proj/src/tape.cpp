#include "otprune/tape.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "otprune/kernels.hpp"

namespace otp::ad {

const char* op_name(Op op) {
  switch (op) {
    case Op::kVar: return "var";
    case Op::kConst: return "const";
    case Op::kAdd: return "add";
    case Op::kSub: return "sub";
    case Op::kMul: return "mul";
    case Op::kDiv: return "div";
    case Op::kNeg: return "neg";
    case Op::kExp: return "exp";
    case Op::kLog: return "log";
    case Op::kSquare: return "square";
    case Op::kAbs: return "abs";
    case Op::kSigmoid: return "sigmoid";
    case Op::kRelu: return "relu";
    case Op::kScale: return "scale";
    case Op::kAddConst: return "add_const";
    case Op::kClampMin: return "clamp_min";
    case Op::kSum: return "sum";
    case Op::kDot: return "dot";
    case Op::kMatVec: return "matvec";
    case Op::kMatMulNT: return "matmul_nt";
    case Op::kAddRow: return "add_row";
    case Op::kAddCol: return "add_col";
    case Op::kColScale: return "col_scale";
    case Op::kStackCols2: return "stack_cols";
    case Op::kCol: return "col";
    case Op::kConcat2: return "concat";
    case Op::kSlice: return "slice";
    case Op::kReshape: return "reshape";
    case Op::kLseRows: return "lse_rows";
    case Op::kLseCols: return "lse_cols";
    case Op::kSoftmaxXent: return "softmax_xent";
  }
  return "?";
}

namespace {
void require(bool ok, const char* msg) {
  if (!ok) throw std::invalid_argument(msg);
}
}  // namespace

int Tape::var(Tensor t) {
  Node n;
  n.op = Op::kVar;
  n.val = std::move(t);
  return push(std::move(n));
}

int Tape::constant(Tensor t) {
  Node n;
  n.op = Op::kConst;
  n.val = std::move(t);
  return push(std::move(n));
}

int Tape::unary(Op op, int a) {
  Node n;
  n.op = op;
  n.a = a;
  return push(std::move(n));
}

int Tape::binary(Op op, int a, int b) {
  Node n;
  n.op = op;
  n.a = a;
  n.b = b;
  return push(std::move(n));
}

int Tape::attr_op(Op op, int a, double attr) {
  Node n;
  n.op = op;
  n.a = a;
  n.attr = attr;
  return push(std::move(n));
}

int Tape::col(int m, int j) {
  Node n;
  n.op = Op::kCol;
  n.a = m;
  n.idx = {j};
  return push(std::move(n));
}

int Tape::slice(int a, int offset, int len) {
  Node n;
  n.op = Op::kSlice;
  n.a = a;
  n.idx = {offset, len};
  return push(std::move(n));
}

int Tape::reshape(int a, int r, int c) {
  Node n;
  n.op = Op::kReshape;
  n.a = a;
  n.idx = {r, c};
  return push(std::move(n));
}

int Tape::softmax_xent(int logits, const std::vector<int>& labels) {
  Node n;
  n.op = Op::kSoftmaxXent;
  n.a = logits;
  n.idx = labels;
  return push(std::move(n));
}

Tensor& Tape::leaf_value(int id) {
  Node& n = nodes_[id];
  require(n.op == Op::kVar || n.op == Op::kConst, "leaf_value: not a leaf node");
  return n.val;
}

int Tape::push(Node n) {
  if (n.op != Op::kVar && n.op != Op::kConst) eval(n);
  check_finite(n, static_cast<int>(nodes_.size()));
  nodes_.push_back(std::move(n));
  return static_cast<int>(nodes_.size()) - 1;
}

void Tape::recompute() {
  for (std::size_t id = 0; id < nodes_.size(); ++id) {
    Node& n = nodes_[id];
    if (n.op != Op::kVar && n.op != Op::kConst) eval(n);
    check_finite(n, static_cast<int>(id));
  }
}

void Tape::check_finite(const Node& n, int id) const {
  for (double x : n.val.v) {
    if (!std::isfinite(x)) {
      throw std::runtime_error(std::string("non-finite value in node #") +
                               std::to_string(id) + " (" + op_name(n.op) + ")");
    }
  }
}

void Tape::eval(Node& n) {
  const Tensor* A = n.a >= 0 ? &nodes_[n.a].val : nullptr;
  const Tensor* B = n.b >= 0 ? &nodes_[n.b].val : nullptr;
  Tensor& out = n.val;
  switch (n.op) {
    case Op::kVar:
    case Op::kConst:
      break;
    case Op::kAdd:
    case Op::kSub:
    case Op::kMul:
    case Op::kDiv: {
      require(A->rows == B->rows && A->cols == B->cols, "elementwise op: shape mismatch");
      out = Tensor(A->rows, A->cols);
      const int sz = A->size();
      for (int i = 0; i < sz; ++i) {
        const double x = A->v[i], y = B->v[i];
        out.v[i] = n.op == Op::kAdd   ? x + y
                   : n.op == Op::kSub ? x - y
                   : n.op == Op::kMul ? x * y
                                      : x / y;
      }
      break;
    }
    case Op::kNeg:
    case Op::kExp:
    case Op::kLog:
    case Op::kSquare:
    case Op::kAbs:
    case Op::kSigmoid:
    case Op::kRelu: {
      out = Tensor(A->rows, A->cols);
      const int sz = A->size();
      for (int i = 0; i < sz; ++i) {
        const double x = A->v[i];
        switch (n.op) {
          case Op::kNeg: out.v[i] = -x; break;
          case Op::kExp: out.v[i] = std::exp(x); break;
          case Op::kLog: out.v[i] = std::log(x); break;
          case Op::kSquare: out.v[i] = x * x; break;
          case Op::kAbs: out.v[i] = std::fabs(x); break;
          case Op::kSigmoid:
            // Evaluate from the side that cannot overflow.
            out.v[i] = x >= 0.0 ? 1.0 / (1.0 + std::exp(-x))
                                : std::exp(x) / (1.0 + std::exp(x));
            break;
          case Op::kRelu: out.v[i] = x > 0.0 ? x : 0.0; break;
          default: break;
        }
      }
      break;
    }
    case Op::kScale:
    case Op::kAddConst:
    case Op::kClampMin: {
      out = Tensor(A->rows, A->cols);
      const int sz = A->size();
      for (int i = 0; i < sz; ++i) {
        const double x = A->v[i];
        out.v[i] = n.op == Op::kScale      ? n.attr * x
                   : n.op == Op::kAddConst ? x + n.attr
                                           : (x > n.attr ? x : n.attr);
      }
      break;
    }
    case Op::kSum: {
      double acc = 0.0;
      for (double x : A->v) acc += x;
      out = Tensor::scalar(acc);
      break;
    }
    case Op::kDot: {
      require(A->cols == 1 && B->cols == 1 && A->rows == B->rows, "dot: need equal-length vectors");
      double acc = 0.0;
      for (int i = 0; i < A->rows; ++i) acc += A->v[i] * B->v[i];
      out = Tensor::scalar(acc);
      break;
    }
    case Op::kMatVec: {
      require(B->cols == 1 && A->cols == B->rows, "matvec: shape mismatch");
      out = Tensor(A->rows, 1);
      kern::matvec(A->v.data(), B->v.data(), out.v.data(), A->rows, A->cols);
      break;
    }
    case Op::kMatMulNT: {
      require(A->cols == B->cols, "matmul_nt: inner dimensions differ");
      out = Tensor(A->rows, B->rows);
      kern::mm_nt(A->v.data(), B->v.data(), out.v.data(), A->rows, A->cols, B->rows);
      break;
    }
    case Op::kAddRow: {
      require(B->cols == 1 && B->rows == A->cols, "add_row: vector length != cols");
      out = Tensor(A->rows, A->cols);
      for (int i = 0; i < A->rows; ++i)
        for (int j = 0; j < A->cols; ++j) out.at(i, j) = A->at(i, j) + B->v[j];
      break;
    }
    case Op::kAddCol: {
      require(B->cols == 1 && B->rows == A->rows, "add_col: vector length != rows");
      out = Tensor(A->rows, A->cols);
      for (int i = 0; i < A->rows; ++i)
        for (int j = 0; j < A->cols; ++j) out.at(i, j) = A->at(i, j) + B->v[i];
      break;
    }
    case Op::kColScale: {
      require(B->cols == 1 && B->rows == A->cols, "col_scale: vector length != cols");
      out = Tensor(A->rows, A->cols);
      for (int i = 0; i < A->rows; ++i)
        for (int j = 0; j < A->cols; ++j) out.at(i, j) = A->at(i, j) * B->v[j];
      break;
    }
    case Op::kStackCols2: {
      require(A->cols == 1 && B->cols == 1 && A->rows == B->rows, "stack_cols: need equal-length vectors");
      out = Tensor(A->rows, 2);
      for (int i = 0; i < A->rows; ++i) {
        out.at(i, 0) = A->v[i];
        out.at(i, 1) = B->v[i];
      }
      break;
    }
    case Op::kCol: {
      const int j = n.idx[0];
      require(j >= 0 && j < A->cols, "col: index out of range");
      out = Tensor(A->rows, 1);
      for (int i = 0; i < A->rows; ++i) out.v[i] = A->at(i, j);
      break;
    }
    case Op::kConcat2: {
      require(A->cols == 1 && B->cols == 1, "concat: need vectors");
      out = Tensor(A->rows + B->rows, 1);
      for (int i = 0; i < A->rows; ++i) out.v[i] = A->v[i];
      for (int i = 0; i < B->rows; ++i) out.v[A->rows + i] = B->v[i];
      break;
    }
    case Op::kSlice: {
      const int off = n.idx[0], len = n.idx[1];
      require(A->cols == 1 && off >= 0 && len >= 0 && off + len <= A->rows, "slice: range out of bounds");
      out = Tensor(len, 1);
      for (int i = 0; i < len; ++i) out.v[i] = A->v[off + i];
      break;
    }
    case Op::kReshape: {
      require(n.idx[0] * n.idx[1] == A->size(), "reshape: element count differs");
      out = *A;
      out.rows = n.idx[0];
      out.cols = n.idx[1];
      break;
    }
    case Op::kLseRows: {
      out = Tensor(A->rows, 1);
      for (int i = 0; i < A->rows; ++i) out.v[i] = kern::logsumexp(A->v.data() + static_cast<std::size_t>(i) * A->cols, A->cols);
      break;
    }
    case Op::kLseCols: {
      out = Tensor(A->cols, 1);
      for (int j = 0; j < A->cols; ++j) out.v[j] = kern::logsumexp(A->v.data() + j, A->rows, A->cols);
      break;
    }
    case Op::kSoftmaxXent: {
      require(static_cast<int>(n.idx.size()) == A->rows, "softmax_xent: label count != batch rows");
      double acc = 0.0;
      for (int i = 0; i < A->rows; ++i) {
        const int y = n.idx[i];
        require(y >= 0 && y < A->cols, "softmax_xent: label out of range");
        const double lse = kern::logsumexp(A->v.data() + static_cast<std::size_t>(i) * A->cols, A->cols);
        acc += lse - A->at(i, y);
      }
      out = Tensor::scalar(acc / A->rows);
      break;
    }
  }
}

void Tape::backward(int out) {
  Node& top = nodes_[out];
  if (!top.val.is_scalar()) throw std::invalid_argument("backward: output is not a scalar");
  for (auto& n : nodes_) n.grad = Tensor(n.val.rows, n.val.cols);
  top.grad.v[0] = 1.0;

  for (int id = out; id >= 0; --id) {
    Node& n = nodes_[id];
    if (n.op == Op::kVar || n.op == Op::kConst) continue;
    const Tensor& g = n.grad;
    bool any = false;
    for (double x : g.v) {
      if (x != 0.0) {
        any = true;
        break;
      }
    }
    if (!any) continue;

    Tensor* GA = n.a >= 0 ? &nodes_[n.a].grad : nullptr;
    Tensor* GB = n.b >= 0 ? &nodes_[n.b].grad : nullptr;
    const Tensor* A = n.a >= 0 ? &nodes_[n.a].val : nullptr;
    const Tensor* B = n.b >= 0 ? &nodes_[n.b].val : nullptr;

    switch (n.op) {
      case Op::kVar:
      case Op::kConst:
        break;
      case Op::kAdd:
        for (int i = 0; i < g.size(); ++i) {
          GA->v[i] += g.v[i];
          GB->v[i] += g.v[i];
        }
        break;
      case Op::kSub:
        for (int i = 0; i < g.size(); ++i) {
          GA->v[i] += g.v[i];
          GB->v[i] -= g.v[i];
        }
        break;
      case Op::kMul:
        for (int i = 0; i < g.size(); ++i) {
          GA->v[i] += g.v[i] * B->v[i];
          GB->v[i] += g.v[i] * A->v[i];
        }
        break;
      case Op::kDiv:
        for (int i = 0; i < g.size(); ++i) {
          GA->v[i] += g.v[i] / B->v[i];
          GB->v[i] -= g.v[i] * A->v[i] / (B->v[i] * B->v[i]);
        }
        break;
      case Op::kNeg:
        for (int i = 0; i < g.size(); ++i) GA->v[i] -= g.v[i];
        break;
      case Op::kExp:
        for (int i = 0; i < g.size(); ++i) GA->v[i] += g.v[i] * n.val.v[i];
        break;
      case Op::kLog:
        for (int i = 0; i < g.size(); ++i) GA->v[i] += g.v[i] / A->v[i];
        break;
      case Op::kSquare:
        for (int i = 0; i < g.size(); ++i) GA->v[i] += g.v[i] * 2.0 * A->v[i];
        break;
      case Op::kAbs:
        for (int i = 0; i < g.size(); ++i) {
          const double x = A->v[i];
          GA->v[i] += g.v[i] * (x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0));
        }
        break;
      case Op::kSigmoid:
        for (int i = 0; i < g.size(); ++i) GA->v[i] += g.v[i] * n.val.v[i] * (1.0 - n.val.v[i]);
        break;
      case Op::kRelu:
        for (int i = 0; i < g.size(); ++i) GA->v[i] += A->v[i] > 0.0 ? g.v[i] : 0.0;
        break;
      case Op::kScale:
        for (int i = 0; i < g.size(); ++i) GA->v[i] += g.v[i] * n.attr;
        break;
      case Op::kAddConst:
        for (int i = 0; i < g.size(); ++i) GA->v[i] += g.v[i];
        break;
      case Op::kClampMin:
        for (int i = 0; i < g.size(); ++i) GA->v[i] += A->v[i] > n.attr ? g.v[i] : 0.0;
        break;
      case Op::kSum:
        for (int i = 0; i < GA->size(); ++i) GA->v[i] += g.v[0];
        break;
      case Op::kDot:
        for (int i = 0; i < A->rows; ++i) {
          GA->v[i] += g.v[0] * B->v[i];
          GB->v[i] += g.v[0] * A->v[i];
        }
        break;
      case Op::kMatVec:
        for (int i = 0; i < A->rows; ++i) {
          for (int j = 0; j < A->cols; ++j) {
            GA->at(i, j) += g.v[i] * B->v[j];
            GB->v[j] += g.v[i] * A->at(i, j);
          }
        }
        break;
      case Op::kMatMulNT: {
        // out = A * B^T; dA += g * B, dB += g^T * A.
        Tensor da(A->rows, A->cols), db(B->rows, B->cols);
        kern::mm_nn(g.v.data(), B->v.data(), da.v.data(), g.rows, g.cols, B->cols);
        kern::mm_tn(g.v.data(), A->v.data(), db.v.data(), g.rows, g.cols, A->cols);
        for (int i = 0; i < da.size(); ++i) GA->v[i] += da.v[i];
        for (int i = 0; i < db.size(); ++i) GB->v[i] += db.v[i];
        break;
      }
      case Op::kAddRow:
        for (int i = 0; i < A->rows; ++i)
          for (int j = 0; j < A->cols; ++j) {
            GA->at(i, j) += g.at(i, j);
            GB->v[j] += g.at(i, j);
          }
        break;
      case Op::kAddCol:
        for (int i = 0; i < A->rows; ++i)
          for (int j = 0; j < A->cols; ++j) {
            GA->at(i, j) += g.at(i, j);
            GB->v[i] += g.at(i, j);
          }
        break;
      case Op::kColScale:
        for (int i = 0; i < A->rows; ++i)
          for (int j = 0; j < A->cols; ++j) {
            GA->at(i, j) += g.at(i, j) * B->v[j];
            GB->v[j] += g.at(i, j) * A->at(i, j);
          }
        break;
      case Op::kStackCols2:
        for (int i = 0; i < A->rows; ++i) {
          GA->v[i] += g.at(i, 0);
          GB->v[i] += g.at(i, 1);
        }
        break;
      case Op::kCol:
        for (int i = 0; i < A->rows; ++i) GA->at(i, n.idx[0]) += g.v[i];
        break;
      case Op::kConcat2:
        for (int i = 0; i < A->rows; ++i) GA->v[i] += g.v[i];
        for (int i = 0; i < B->rows; ++i) GB->v[i] += g.v[A->rows + i];
        break;
      case Op::kSlice:
        for (int i = 0; i < n.idx[1]; ++i) GA->v[n.idx[0] + i] += g.v[i];
        break;
      case Op::kReshape:
        for (int i = 0; i < g.size(); ++i) GA->v[i] += g.v[i];
        break;
      case Op::kLseRows:
        for (int i = 0; i < A->rows; ++i)
          for (int j = 0; j < A->cols; ++j) GA->at(i, j) += g.v[i] * std::exp(A->at(i, j) - n.val.v[i]);
        break;
      case Op::kLseCols:
        for (int j = 0; j < A->cols; ++j)
          for (int i = 0; i < A->rows; ++i) GA->at(i, j) += g.v[j] * std::exp(A->at(i, j) - n.val.v[j]);
        break;
      case Op::kSoftmaxXent: {
        const double s = g.v[0] / A->rows;
        for (int i = 0; i < A->rows; ++i) {
          const double lse = kern::logsumexp(A->v.data() + static_cast<std::size_t>(i) * A->cols, A->cols);
          for (int j = 0; j < A->cols; ++j) {
            const double p = std::exp(A->at(i, j) - lse);
            GA->at(i, j) += s * (p - (j == n.idx[i] ? 1.0 : 0.0));
          }
        }
        break;
      }
    }
  }
}

std::vector<double> finite_difference_gradient(
    const std::function<double(const std::vector<double>&)>& loss,
    std::vector<double> point, double h) {
  if (h <= 0.0) throw std::invalid_argument("finite_difference_gradient: h must be positive");
  std::vector<double> grad(point.size());
  for (std::size_t i = 0; i < point.size(); ++i) {
    const double orig = point[i];
    point[i] = orig + h;
    const double up = loss(point);
    point[i] = orig - h;
    const double down = loss(point);
    point[i] = orig;
    grad[i] = (up - down) / (2.0 * h);
  }
  return grad;
}

double relative_error(double a, double b, double floor) {
  const double denom = std::max({std::fabs(a), std::fabs(b), floor});
  return std::fabs(a - b) / denom;
}

}  // namespace otp::ad
