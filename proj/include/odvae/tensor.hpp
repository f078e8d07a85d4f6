// Dense real tensors with a reverse-mode differentiation tape.
//
// A Tensor is a shape plus a shared row-major buffer of doubles. Tensors
// produced by operations whose inputs live on a Tape are recorded on that
// tape; calling Tape::backward on a scalar result yields gradients for every
// leaf registered with Tape::leaf. Tensors that never touched a tape are plain
// values and cost nothing beyond the arithmetic.
//
// Broadcasting is deliberately narrow: a single-element tensor broadcasts
// against any shape, and a row vector ({n} or {1, n}) broadcasts against an
// {m, n} matrix. Everything else must match exactly.

#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace odvae {

using Shape = std::vector<std::size_t>;

std::string to_string(const Shape& shape);
std::size_t numel(const Shape& shape);

class ShapeError : public std::invalid_argument {
 public:
  ShapeError(std::string_view op, const Shape& a, const Shape& b);
  explicit ShapeError(const std::string& what) : std::invalid_argument(what) {}
};

class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Raised when the tape's NaN trap is enabled and an operation produces a NaN.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class Tape;

class Tensor {
 public:
  Tensor();
  Tensor(Shape shape, std::vector<double> data);

  static Tensor scalar(double v);
  static Tensor vector(std::vector<double> data);
  static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> data);
  static Tensor zeros(Shape shape);
  static Tensor full(Shape shape, double value);

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_->size(); }
  // Matrix view helpers. A rank-1 tensor is treated as a single row.
  std::size_t rows() const;
  std::size_t cols() const;

  std::span<const double> data() const { return *data_; }
  double operator[](std::size_t i) const { return (*data_)[i]; }
  double at(std::size_t r, std::size_t c) const { return (*data_)[r * cols() + c]; }
  double item() const;

  // Copy-on-write access. Only valid for tensors that are not on a tape.
  std::span<double> mutable_data();

  bool on_tape() const { return tape_ != nullptr; }
  Tape* tape() const { return tape_; }
  std::size_t node() const { return node_; }

  // Same values, no tape link.
  Tensor detach() const;
  Tensor reshape(Shape shape) const;

  // Shared buffer, used by backward closures to avoid copying values.
  const std::shared_ptr<std::vector<double>>& storage() const { return data_; }

 private:
  friend class Tape;
  Shape shape_;
  std::shared_ptr<std::vector<double>> data_;
  Tape* tape_ = nullptr;
  std::size_t node_ = 0;
};

// Gradient of a backward pass, indexed by tape node.
class Gradients {
 public:
  Gradients() = default;
  Gradients(const Tape* tape, std::vector<std::vector<double>> grads);

  // d(root)/d(t). Zeros when t did not influence the root.
  Tensor of(const Tensor& t) const;

 private:
  const Tape* tape_ = nullptr;
  std::vector<std::vector<double>> grads_;
};

class Tape {
 public:
  // parent_grads[i] is null when parent i is not on the tape.
  using BackwardFn =
      std::function<void(std::span<const double> grad_out, std::span<double* const> parent_grads)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Registers a differentiable input.
  Tensor leaf(const Tensor& value);

  Tensor record(std::string_view op, Tensor value, std::initializer_list<const Tensor*> parents,
                BackwardFn backward);
  Tensor record(std::string_view op, Tensor value, const std::vector<const Tensor*>& parents,
                BackwardFn backward);

  Gradients backward(const Tensor& root) const;

  void set_nan_trap(bool on) { nan_trap_ = on; }
  bool nan_trap() const { return nan_trap_; }
  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    std::string_view op;
    std::vector<std::size_t> parents;  // node index or npos for constants
    BackwardFn backward;
    std::size_t numel = 0;
  };
  std::vector<Node> nodes_;
  bool nan_trap_ = false;
};

// Elementwise arithmetic (with the broadcasting rules above).
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);
Tensor neg(const Tensor& x);

Tensor exp(const Tensor& x);
Tensor log(const Tensor& x);
Tensor sqrt(const Tensor& x);
Tensor pow(const Tensor& x, double p);
Tensor sigmoid(const Tensor& x);
Tensor tanh(const Tensor& x);
Tensor logit(const Tensor& x);
Tensor log1p(const Tensor& x);
// log(1 + e^x) without overflow.
Tensor softplus(const Tensor& x);
// log(e^a + e^b) elementwise, stable for large magnitudes.
Tensor log_add_exp(const Tensor& a, const Tensor& b);

Tensor maximum(const Tensor& x, double c);
Tensor clamp(const Tensor& x, double lo, double hi);
// mask must be a plain tensor of the result's shape; nonzero picks a.
Tensor select(const Tensor& mask, const Tensor& a, const Tensor& b);

Tensor matmul(const Tensor& a, const Tensor& b);
// x W + b for a batch of row vectors x (m x k), W (k x n), b (n) or (1 x n).
Tensor affine(const Tensor& x, const Tensor& w, const Tensor& b);

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
// Row sums of an m x n matrix, shaped m x 1.
Tensor sum_rows(const Tensor& x);
// Concatenate matrices along columns (or rank-1 tensors end to end).
Tensor concat(const std::vector<Tensor>& parts);
Tensor slice_cols(const Tensor& x, std::size_t begin, std::size_t end);

Tensor stop_gradient(const Tensor& x);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator/(const Tensor& a, const Tensor& b) { return div(a, b); }
inline Tensor operator-(const Tensor& x) { return neg(x); }
inline Tensor operator+(const Tensor& a, double b) { return add(a, Tensor::scalar(b)); }
inline Tensor operator+(double a, const Tensor& b) { return add(Tensor::scalar(a), b); }
inline Tensor operator-(const Tensor& a, double b) { return sub(a, Tensor::scalar(b)); }
inline Tensor operator-(double a, const Tensor& b) { return sub(Tensor::scalar(a), b); }
inline Tensor operator*(const Tensor& a, double b) { return mul(a, Tensor::scalar(b)); }
inline Tensor operator*(double a, const Tensor& b) { return mul(Tensor::scalar(a), b); }
inline Tensor operator/(const Tensor& a, double b) { return div(a, Tensor::scalar(b)); }
inline Tensor operator/(double a, const Tensor& b) { return div(Tensor::scalar(a), b); }

}  // namespace odvae
