#include "odvae/tensor.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace odvae {

namespace {

constexpr std::size_t kConstant = std::numeric_limits<std::size_t>::max();

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMajor>;
using MutMap = Eigen::Map<RowMajor>;

}  // namespace

std::string to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ", ";
    os << shape[i];
  }
  os << ']';
  return os.str();
}

std::size_t numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

ShapeError::ShapeError(std::string_view op, const Shape& a, const Shape& b)
    : std::invalid_argument(std::string(op) + ": incompatible shapes " + to_string(a) + " and " +
                            to_string(b)) {}

// ---------------------------------------------------------------------------
// Tensor

Tensor::Tensor() : data_(std::make_shared<std::vector<double>>(1, 0.0)) {}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::make_shared<std::vector<double>>(std::move(data))) {
  if (numel(shape_) != data_->size()) {
    throw ShapeError("tensor: shape " + to_string(shape_) + " does not match " +
                     std::to_string(data_->size()) + " values");
  }
}

Tensor Tensor::scalar(double v) { return Tensor({}, {v}); }

Tensor Tensor::vector(std::vector<double> data) {
  const std::size_t n = data.size();
  return Tensor({n}, std::move(data));
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::vector<double> data) {
  return Tensor({rows, cols}, std::move(data));
}

Tensor Tensor::zeros(Shape shape) { return full(std::move(shape), 0.0); }

Tensor Tensor::full(Shape shape, double value) {
  const std::size_t n = numel(shape);
  return Tensor(std::move(shape), std::vector<double>(n, value));
}

std::size_t Tensor::rows() const {
  if (rank() == 2) return shape_[0];
  return 1;
}

std::size_t Tensor::cols() const {
  if (rank() == 2) return shape_[1];
  if (rank() == 1) return shape_[0];
  return 1;
}

double Tensor::item() const {
  if (size() != 1) throw ShapeError("item: tensor of shape " + to_string(shape_) + " is not a scalar");
  return (*data_)[0];
}

std::span<double> Tensor::mutable_data() {
  if (on_tape()) throw std::logic_error("mutable_data: tensor is recorded on a tape");
  if (data_.use_count() > 1) data_ = std::make_shared<std::vector<double>>(*data_);
  return *data_;
}

Tensor Tensor::detach() const {
  Tensor t = *this;
  t.tape_ = nullptr;
  t.node_ = 0;
  return t;
}

Tensor Tensor::reshape(Shape shape) const {
  if (numel(shape) != size()) throw ShapeError("reshape", shape_, shape);
  Tensor out(std::move(shape), *data_);
  if (!on_tape()) return out;
  const std::size_t n = size();
  return tape_->record("reshape", std::move(out), {this},
                       [n](std::span<const double> g, std::span<double* const> pg) {
                         for (std::size_t i = 0; i < n; ++i) pg[0][i] += g[i];
                       });
}

// ---------------------------------------------------------------------------
// Tape

Gradients::Gradients(const Tape* tape, std::vector<std::vector<double>> grads)
    : tape_(tape), grads_(std::move(grads)) {}

Tensor Gradients::of(const Tensor& t) const {
  if (!t.on_tape() || t.tape() != tape_ || t.node() >= grads_.size() || grads_[t.node()].empty()) {
    return Tensor::zeros(t.shape());
  }
  return Tensor(t.shape(), grads_[t.node()]);
}

Tensor Tape::leaf(const Tensor& value) {
  Tensor t = value.detach();
  t.tape_ = this;
  t.node_ = nodes_.size();
  nodes_.push_back(Node{"leaf", {}, nullptr, t.size()});
  return t;
}

Tensor Tape::record(std::string_view op, Tensor value, std::initializer_list<const Tensor*> parents,
                    BackwardFn backward) {
  return record(op, std::move(value), std::vector<const Tensor*>(parents), std::move(backward));
}

Tensor Tape::record(std::string_view op, Tensor value, const std::vector<const Tensor*>& parents,
                    BackwardFn backward) {
  if (nan_trap_) {
    for (double v : value.data()) {
      if (std::isnan(v)) throw NumericError(std::string(op) + ": produced NaN");
    }
  }
  Node node{op, {}, std::move(backward), value.size()};
  node.parents.reserve(parents.size());
  for (const Tensor* p : parents) {
    if (p->on_tape()) {
      if (p->tape() != this) throw std::logic_error(std::string(op) + ": operands from different tapes");
      node.parents.push_back(p->node());
    } else {
      node.parents.push_back(kConstant);
    }
  }
  value.tape_ = this;
  value.node_ = nodes_.size();
  nodes_.push_back(std::move(node));
  return value;
}

Gradients Tape::backward(const Tensor& root) const {
  if (root.tape() != this) throw std::logic_error("backward: root is not recorded on this tape");
  if (root.size() != 1) {
    throw ShapeError("backward: root must be a scalar, got shape " + to_string(root.shape()));
  }
  std::vector<std::vector<double>> grads(nodes_.size());
  grads[root.node()] = {1.0};
  std::vector<double*> parent_ptrs;
  for (std::size_t i = root.node() + 1; i-- > 0;) {
    const Node& node = nodes_[i];
    if (grads[i].empty() || !node.backward) continue;
    parent_ptrs.assign(node.parents.size(), nullptr);
    for (std::size_t k = 0; k < node.parents.size(); ++k) {
      const std::size_t p = node.parents[k];
      if (p == kConstant) continue;
      if (grads[p].empty()) grads[p].assign(nodes_[p].numel, 0.0);
      parent_ptrs[k] = grads[p].data();
    }
    node.backward(grads[i], parent_ptrs);
    // Interior gradients are dead once propagated; keep leaves only.
    if (!node.parents.empty()) std::vector<double>().swap(grads[i]);
  }
  return Gradients(this, std::move(grads));
}

// ---------------------------------------------------------------------------
// Elementwise helpers

namespace {

Tape* common_tape(std::string_view op, const Tensor& a, const Tensor& b) {
  if (a.on_tape() && b.on_tape() && a.tape() != b.tape()) {
    throw std::logic_error(std::string(op) + ": operands from different tapes");
  }
  return a.on_tape() ? a.tape() : b.tape();
}

enum class Bcast { Same, AScalar, BScalar, ARow, BRow };

bool is_row_of(const Tensor& row, const Tensor& mat) {
  if (mat.rank() != 2) return false;
  const bool row_shape = row.rank() == 1 || (row.rank() == 2 && row.shape()[0] == 1);
  return row_shape && row.cols() == mat.shape()[1];
}

Bcast plan(std::string_view op, const Tensor& a, const Tensor& b, Shape& out) {
  if (a.shape() == b.shape()) {
    out = a.shape();
    return Bcast::Same;
  }
  if (b.size() == 1) {
    out = a.shape();
    return Bcast::BScalar;
  }
  if (a.size() == 1) {
    out = b.shape();
    return Bcast::AScalar;
  }
  if (is_row_of(b, a)) {
    out = a.shape();
    return Bcast::BRow;
  }
  if (is_row_of(a, b)) {
    out = b.shape();
    return Bcast::ARow;
  }
  throw ShapeError(op, a.shape(), b.shape());
}

struct Indexer {
  Bcast mode;
  std::size_t cols;
  std::size_t a(std::size_t i) const {
    switch (mode) {
      case Bcast::AScalar: return 0;
      case Bcast::ARow: return i % cols;
      default: return i;
    }
  }
  std::size_t b(std::size_t i) const {
    switch (mode) {
      case Bcast::BScalar: return 0;
      case Bcast::BRow: return i % cols;
      default: return i;
    }
  }
};

// f(a, b) -> y; da(a, b, y), db(a, b, y) are the partial derivatives.
template <class F, class DA, class DB>
Tensor binary(std::string_view op, const Tensor& a, const Tensor& b, F f, DA da, DB db) {
  Shape shape;
  const Bcast mode = plan(op, a, b, shape);
  const std::size_t n = numel(shape);
  const Indexer ix{mode, shape.empty() ? 1 : shape.back()};
  std::vector<double> out(n);
  const auto& av = *a.storage();
  const auto& bv = *b.storage();
  for (std::size_t i = 0; i < n; ++i) out[i] = f(av[ix.a(i)], bv[ix.b(i)]);
  Tensor y(std::move(shape), std::move(out));
  Tape* tape = common_tape(op, a, b);
  if (!tape) return y;
  auto as = a.storage();
  auto bs = b.storage();
  auto ys = y.storage();
  return tape->record(op, std::move(y), {&a, &b},
                      [=](std::span<const double> g, std::span<double* const> pg) {
                        const auto& av = *as;
                        const auto& bv = *bs;
                        const auto& yv = *ys;
                        for (std::size_t i = 0; i < n; ++i) {
                          const std::size_t ia = ix.a(i), ib = ix.b(i);
                          if (pg[0]) pg[0][ia] += g[i] * da(av[ia], bv[ib], yv[i]);
                          if (pg[1]) pg[1][ib] += g[i] * db(av[ia], bv[ib], yv[i]);
                        }
                      });
}

// f(x) -> y; df(x, y) is the derivative.
template <class F, class D>
Tensor unary(std::string_view op, const Tensor& x, F f, D df) {
  const std::size_t n = x.size();
  std::vector<double> out(n);
  const auto& xv = *x.storage();
  for (std::size_t i = 0; i < n; ++i) out[i] = f(xv[i]);
  Tensor y(x.shape(), std::move(out));
  if (!x.on_tape()) return y;
  auto xs = x.storage();
  auto ys = y.storage();
  return x.tape()->record(op, std::move(y), {&x},
                          [=](std::span<const double> g, std::span<double* const> pg) {
                            const auto& xv = *xs;
                            const auto& yv = *ys;
                            for (std::size_t i = 0; i < n; ++i) pg[0][i] += g[i] * df(xv[i], yv[i]);
                          });
}

// Constant operands must lie in the domain; tape values are left to the NaN trap.
template <class Pred>
void check_domain(std::string_view op, const Tensor& x, Pred in_domain, std::string_view what) {
  if (x.on_tape()) return;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!in_domain(x[i])) {
      std::ostringstream os;
      os << op << ": argument " << x[i] << " at index " << i << " outside domain (" << what << ")";
      throw DomainError(os.str());
    }
  }
}

double sigmoid_scalar(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double softplus_scalar(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  return binary(
      "add", a, b, [](double x, double y) { return x + y; },
      [](double, double, double) { return 1.0; }, [](double, double, double) { return 1.0; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary(
      "sub", a, b, [](double x, double y) { return x - y; },
      [](double, double, double) { return 1.0; }, [](double, double, double) { return -1.0; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary(
      "mul", a, b, [](double x, double y) { return x * y; },
      [](double, double y, double) { return y; }, [](double x, double, double) { return x; });
}

Tensor div(const Tensor& a, const Tensor& b) {
  return binary(
      "div", a, b, [](double x, double y) { return x / y; },
      [](double, double y, double) { return 1.0 / y; },
      [](double, double y, double out) { return -out / y; });
}

Tensor neg(const Tensor& x) {
  return unary(
      "neg", x, [](double v) { return -v; }, [](double, double) { return -1.0; });
}

Tensor exp(const Tensor& x) {
  return unary(
      "exp", x, [](double v) { return std::exp(v); }, [](double, double y) { return y; });
}

Tensor log(const Tensor& x) {
  check_domain("log", x, [](double v) { return v >= 0; }, "x >= 0");
  return unary(
      "log", x, [](double v) { return std::log(v); }, [](double v, double) { return 1.0 / v; });
}

Tensor sqrt(const Tensor& x) {
  check_domain("sqrt", x, [](double v) { return v >= 0; }, "x >= 0");
  return unary(
      "sqrt", x, [](double v) { return std::sqrt(v); },
      [](double, double y) { return 0.5 / y; });
}

Tensor pow(const Tensor& x, double p) {
  if (p != std::floor(p)) check_domain("pow", x, [](double v) { return v >= 0; }, "x >= 0");
  return unary(
      "pow", x, [p](double v) { return std::pow(v, p); },
      [p](double v, double) { return p * std::pow(v, p - 1.0); });
}

Tensor sigmoid(const Tensor& x) {
  return unary("sigmoid", x, sigmoid_scalar, [](double, double y) { return y * (1.0 - y); });
}

Tensor tanh(const Tensor& x) {
  return unary(
      "tanh", x, [](double v) { return std::tanh(v); },
      [](double, double y) { return 1.0 - y * y; });
}

Tensor logit(const Tensor& x) {
  check_domain("logit", x, [](double v) { return v >= 0 && v <= 1; }, "0 <= x <= 1");
  return unary(
      "logit", x, [](double v) { return std::log(v) - std::log1p(-v); },
      [](double v, double) { return 1.0 / (v * (1.0 - v)); });
}

Tensor log1p(const Tensor& x) {
  check_domain("log1p", x, [](double v) { return v >= -1; }, "x >= -1");
  return unary(
      "log1p", x, [](double v) { return std::log1p(v); },
      [](double v, double) { return 1.0 / (1.0 + v); });
}

Tensor softplus(const Tensor& x) {
  return unary("softplus", x, softplus_scalar, [](double v, double) { return sigmoid_scalar(v); });
}

Tensor log_add_exp(const Tensor& a, const Tensor& b) {
  return binary(
      "log_add_exp", a, b,
      [](double x, double y) {
        const double m = std::max(x, y);
        if (m == -std::numeric_limits<double>::infinity()) return m;
        return m + std::log1p(std::exp(-std::abs(x - y)));
      },
      [](double x, double, double out) { return std::exp(x - out); },
      [](double, double y, double out) { return std::exp(y - out); });
}

Tensor maximum(const Tensor& x, double c) {
  return unary(
      "maximum", x, [c](double v) { return std::max(v, c); },
      [c](double v, double) { return v > c ? 1.0 : 0.0; });
}

Tensor clamp(const Tensor& x, double lo, double hi) {
  if (!(lo <= hi)) throw std::invalid_argument("clamp: lo > hi");
  return unary(
      "clamp", x, [lo, hi](double v) { return std::clamp(v, lo, hi); },
      [lo, hi](double v, double) { return (v >= lo && v <= hi) ? 1.0 : 0.0; });
}

Tensor select(const Tensor& mask, const Tensor& a, const Tensor& b) {
  if (mask.on_tape()) throw std::invalid_argument("select: mask must not be on a tape");
  Shape shape;
  const Bcast mode = plan("select", a, b, shape);
  if (mask.shape() != shape) throw ShapeError("select", mask.shape(), shape);
  const std::size_t n = numel(shape);
  const Indexer ix{mode, shape.empty() ? 1 : shape.back()};
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = mask[i] != 0.0 ? a[ix.a(i)] : b[ix.b(i)];
  Tensor y(std::move(shape), std::move(out));
  Tape* tape = common_tape("select", a, b);
  if (!tape) return y;
  auto ms = mask.storage();
  return tape->record("select", std::move(y), {&a, &b},
                      [=](std::span<const double> g, std::span<double* const> pg) {
                        const auto& mv = *ms;
                        for (std::size_t i = 0; i < n; ++i) {
                          if (mv[i] != 0.0) {
                            if (pg[0]) pg[0][ix.a(i)] += g[i];
                          } else if (pg[1]) {
                            pg[1][ix.b(i)] += g[i];
                          }
                        }
                      });
}

// ---------------------------------------------------------------------------
// Linear algebra and reductions

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.shape()[1] != b.shape()[0]) {
    throw ShapeError("matmul", a.shape(), b.shape());
  }
  const std::size_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
  std::vector<double> out(m * n);
  MutMap(out.data(), m, n).noalias() = ConstMap(a.data().data(), m, k) * ConstMap(b.data().data(), k, n);
  Tensor y({m, n}, std::move(out));
  Tape* tape = common_tape("matmul", a, b);
  if (!tape) return y;
  auto as = a.storage();
  auto bs = b.storage();
  return tape->record("matmul", std::move(y), {&a, &b},
                      [=](std::span<const double> g, std::span<double* const> pg) {
                        ConstMap G(g.data(), m, n);
                        if (pg[0]) MutMap(pg[0], m, k).noalias() += G * ConstMap(bs->data(), k, n).transpose();
                        if (pg[1]) MutMap(pg[1], k, n).noalias() += ConstMap(as->data(), m, k).transpose() * G;
                      });
}

Tensor affine(const Tensor& x, const Tensor& w, const Tensor& b) {
  if (x.rank() != 2 || w.rank() != 2 || x.shape()[1] != w.shape()[0]) {
    throw ShapeError("affine", x.shape(), w.shape());
  }
  const std::size_t m = x.shape()[0], k = x.shape()[1], n = w.shape()[1];
  if (b.size() != n || b.rows() != 1) throw ShapeError("affine", w.shape(), b.shape());
  std::vector<double> out(m * n);
  MutMap Y(out.data(), m, n);
  Y.noalias() = ConstMap(x.data().data(), m, k) * ConstMap(w.data().data(), k, n);
  Y.rowwise() += Eigen::Map<const Eigen::RowVectorXd>(b.data().data(), n);
  Tensor y({m, n}, std::move(out));
  Tape* tape = x.on_tape() ? x.tape() : (w.on_tape() ? w.tape() : b.tape());
  if (!tape) return y;
  for (const Tensor* t : {&x, &w, &b}) {
    if (t->on_tape() && t->tape() != tape) throw std::logic_error("affine: operands from different tapes");
  }
  auto xs = x.storage();
  auto ws = w.storage();
  return tape->record("affine", std::move(y), {&x, &w, &b},
                      [=](std::span<const double> g, std::span<double* const> pg) {
                        ConstMap G(g.data(), m, n);
                        if (pg[0]) MutMap(pg[0], m, k).noalias() += G * ConstMap(ws->data(), k, n).transpose();
                        if (pg[1]) MutMap(pg[1], k, n).noalias() += ConstMap(xs->data(), m, k).transpose() * G;
                        if (pg[2]) Eigen::Map<Eigen::RowVectorXd>(pg[2], n) += G.colwise().sum();
                      });
}

Tensor sum(const Tensor& x) {
  double s = 0.0;
  for (double v : x.data()) s += v;
  Tensor y = Tensor::scalar(s);
  if (!x.on_tape()) return y;
  const std::size_t n = x.size();
  return x.tape()->record("sum", std::move(y), {&x},
                          [n](std::span<const double> g, std::span<double* const> pg) {
                            for (std::size_t i = 0; i < n; ++i) pg[0][i] += g[0];
                          });
}

Tensor mean(const Tensor& x) { return sum(x) / static_cast<double>(x.size()); }

Tensor sum_rows(const Tensor& x) {
  if (x.rank() != 2) throw ShapeError("sum_rows: expected a matrix, got " + to_string(x.shape()));
  const std::size_t m = x.shape()[0], n = x.shape()[1];
  std::vector<double> out(m, 0.0);
  for (std::size_t r = 0; r < m; ++r) {
    for (std::size_t c = 0; c < n; ++c) out[r] += x[r * n + c];
  }
  Tensor y({m, 1}, std::move(out));
  if (!x.on_tape()) return y;
  return x.tape()->record("sum_rows", std::move(y), {&x},
                          [m, n](std::span<const double> g, std::span<double* const> pg) {
                            for (std::size_t r = 0; r < m; ++r) {
                              for (std::size_t c = 0; c < n; ++c) pg[0][r * n + c] += g[r];
                            }
                          });
}

Tensor concat(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat: no operands");
  const bool vectors = parts[0].rank() == 1;
  const std::size_t m = vectors ? 1 : parts[0].rows();
  std::size_t total = 0;
  Tape* tape = nullptr;
  for (const auto& p : parts) {
    if (p.rank() != (vectors ? 1u : 2u) || (!vectors && p.rows() != m)) {
      throw ShapeError("concat", parts[0].shape(), p.shape());
    }
    if (p.on_tape()) {
      if (tape && tape != p.tape()) throw std::logic_error("concat: operands from different tapes");
      tape = p.tape();
    }
    total += p.cols();
  }
  std::vector<double> out(m * total);
  std::vector<std::size_t> offsets;
  std::size_t off = 0;
  for (const auto& p : parts) {
    offsets.push_back(off);
    const std::size_t c = p.cols();
    for (std::size_t r = 0; r < m; ++r) {
      std::copy_n(p.data().begin() + r * c, c, out.begin() + r * total + off);
    }
    off += c;
  }
  Tensor y = vectors ? Tensor({total}, std::move(out)) : Tensor({m, total}, std::move(out));
  if (!tape) return y;
  std::vector<std::size_t> widths;
  std::vector<const Tensor*> parents;
  for (const auto& p : parts) {
    widths.push_back(p.cols());
    parents.push_back(&p);
  }
  return tape->record("concat", std::move(y), parents,
                      [=](std::span<const double> g, std::span<double* const> pg) {
                        for (std::size_t k = 0; k < widths.size(); ++k) {
                          if (!pg[k]) continue;
                          for (std::size_t r = 0; r < m; ++r) {
                            for (std::size_t c = 0; c < widths[k]; ++c) {
                              pg[k][r * widths[k] + c] += g[r * total + offsets[k] + c];
                            }
                          }
                        }
                      });
}

Tensor slice_cols(const Tensor& x, std::size_t begin, std::size_t end) {
  if (x.rank() != 2 || begin > end || end > x.cols()) {
    throw ShapeError("slice_cols: bad range [" + std::to_string(begin) + ", " + std::to_string(end) +
                     ") for shape " + to_string(x.shape()));
  }
  const std::size_t m = x.rows(), n = x.cols(), w = end - begin;
  std::vector<double> out(m * w);
  for (std::size_t r = 0; r < m; ++r) {
    std::copy_n(x.data().begin() + r * n + begin, w, out.begin() + r * w);
  }
  Tensor y({m, w}, std::move(out));
  if (!x.on_tape()) return y;
  return x.tape()->record("slice_cols", std::move(y), {&x},
                          [=](std::span<const double> g, std::span<double* const> pg) {
                            for (std::size_t r = 0; r < m; ++r) {
                              for (std::size_t c = 0; c < w; ++c) pg[0][r * n + begin + c] += g[r * w + c];
                            }
                          });
}

Tensor stop_gradient(const Tensor& x) { return x.detach(); }

}  // namespace odvae
