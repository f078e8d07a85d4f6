#include "odvae/rbm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "odvae/parallel.hpp"

namespace odvae::rbm {

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double softplus(double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

void check_exact_size(const RbmParams& p, const char* op) {
  if (p.n1() + p.n2() > kMaxExactUnits) {
    throw std::invalid_argument(std::string(op) + ": " + std::to_string(p.n1() + p.n2()) +
                                " units exceeds the enumeration limit of " + std::to_string(kMaxExactUnits) +
                                "; use pt_log_z for larger machines");
  }
}

// Enumerates the states of the smaller layer and sums the other layer out in
// closed form. Calls visit(log_weight, state_of_small_layer, p(other = 1 | small)).
template <typename Visit>
void enumerate(const RbmParams& p, Visit visit) {
  const std::size_t n1 = p.n1(), n2 = p.n2();
  const bool small_is_z2 = n2 <= n1;
  const std::size_t ns = small_is_z2 ? n2 : n1;
  const std::size_t no = small_is_z2 ? n1 : n2;
  const auto as = small_is_z2 ? p.a2.data() : p.a1.data();
  const auto ao = small_is_z2 ? p.a1.data() : p.a2.data();
  const auto w = p.W.data();
  auto coupling = [&](std::size_t o, std::size_t s) { return small_is_z2 ? w[o * n2 + s] : w[s * n2 + o]; };

  std::vector<double> zs(ns), prob(no);
  for (std::uint64_t state = 0; state < (std::uint64_t{1} << ns); ++state) {
    double lw = 0;
    for (std::size_t s = 0; s < ns; ++s) {
      zs[s] = static_cast<double>((state >> s) & 1U);
      lw += as[s] * zs[s];
    }
    for (std::size_t o = 0; o < no; ++o) {
      double act = ao[o];
      for (std::size_t s = 0; s < ns; ++s) act += coupling(o, s) * zs[s];
      lw += softplus(act);
      prob[o] = sigmoid(act);
    }
    visit(lw, zs, prob, small_is_z2);
  }
}

}  // namespace

RbmParams RbmParams::zeros(std::size_t n1, std::size_t n2) {
  return {Tensor::zeros({n1}), Tensor::zeros({n2}), Tensor::zeros({n1, n2})};
}

void RbmParams::validate() const {
  if (a1.rank() != 1 || a2.rank() != 1) throw ShapeError("rbm: biases must be rank 1, got " + to_string(a1.shape()) +
                                                         " and " + to_string(a2.shape()));
  if (W.shape() != Shape{n1(), n2()}) throw ShapeError("rbm: W", W.shape(), Shape{n1(), n2()});
  for (const Tensor* t : {&a1, &a2, &W})
    for (double v : t->data())
      if (!std::isfinite(v)) throw DomainError("rbm: non-finite parameter");
}

RbmParams RbmParams::detach() const { return {a1.detach(), a2.detach(), W.detach()}; }

Tensor energy(const RbmParams& p, const Tensor& z1, const Tensor& z2) {
  if (z1.rank() != 2 || z2.rank() != 2 || z1.cols() != p.n1() || z2.cols() != p.n2() || z1.rows() != z2.rows()) {
    throw ShapeError("energy: z1 " + to_string(z1.shape()) + ", z2 " + to_string(z2.shape()) + " for an RBM with " +
                     std::to_string(p.n1()) + "+" + std::to_string(p.n2()) + " units");
  }
  return -(sum_rows(z1 * p.a1) + sum_rows(z2 * p.a2) + sum_rows(matmul(z1, p.W) * z2));
}

double energy(const RbmParams& p, std::span<const double> z1, std::span<const double> z2) {
  const std::size_t n1 = p.n1(), n2 = p.n2();
  if (z1.size() != n1 || z2.size() != n2) throw ShapeError("energy: state widths do not match the RBM");
  const auto a1 = p.a1.data(), a2 = p.a2.data(), w = p.W.data();
  double e = 0;
  for (std::size_t i = 0; i < n1; ++i) {
    if (z1[i] == 0) continue;
    double row = a1[i];
    for (std::size_t j = 0; j < n2; ++j) row += w[i * n2 + j] * z2[j];
    e -= z1[i] * row;
  }
  for (std::size_t j = 0; j < n2; ++j) e -= a2[j] * z2[j];
  return e;
}

std::vector<double> conditional_z1(const RbmParams& p, std::span<const double> z2) {
  const std::size_t n1 = p.n1(), n2 = p.n2();
  const auto a1 = p.a1.data(), w = p.W.data();
  std::vector<double> out(n1);
  for (std::size_t i = 0; i < n1; ++i) {
    double act = a1[i];
    for (std::size_t j = 0; j < n2; ++j) act += w[i * n2 + j] * z2[j];
    out[i] = sigmoid(act);
  }
  return out;
}

std::vector<double> conditional_z2(const RbmParams& p, std::span<const double> z1) {
  const std::size_t n1 = p.n1(), n2 = p.n2();
  const auto a2 = p.a2.data(), w = p.W.data();
  std::vector<double> out(n2);
  for (std::size_t j = 0; j < n2; ++j) {
    double act = a2[j];
    for (std::size_t i = 0; i < n1; ++i) act += w[i * n2 + j] * z1[i];
    out[j] = sigmoid(act);
  }
  return out;
}

double exact_log_z(const RbmParams& p) {
  p.validate();
  check_exact_size(p, "exact_log_z");
  double m = -std::numeric_limits<double>::infinity(), s = 0;
  enumerate(p, [&](double lw, const auto&, const auto&, bool) {
    if (lw > m) {
      s = s * std::exp(m - lw) + 1;
      m = lw;
    } else {
      s += std::exp(lw - m);
    }
  });
  return m + std::log(s);
}

Moments exact_moments(const RbmParams& p) {
  const double log_z = exact_log_z(p);
  const std::size_t n1 = p.n1(), n2 = p.n2();
  Moments mo{std::vector<double>(n1), std::vector<double>(n2), std::vector<double>(n1 * n2)};
  enumerate(p, [&](double lw, const std::vector<double>& zs, const std::vector<double>& prob, bool small_is_z2) {
    const double w = std::exp(lw - log_z);
    const auto& z1 = small_is_z2 ? prob : zs;
    const auto& z2 = small_is_z2 ? zs : prob;
    for (std::size_t i = 0; i < n1; ++i) mo.z1[i] += w * z1[i];
    for (std::size_t j = 0; j < n2; ++j) mo.z2[j] += w * z2[j];
    // Given the enumerated layer the other layer's units are independent,
    // so E[z1_i z2_j | small] factorizes.
    for (std::size_t i = 0; i < n1; ++i)
      for (std::size_t j = 0; j < n2; ++j) mo.z12[i * n2 + j] += w * z1[i] * z2[j];
  });
  return mo;
}

Tensor exact_log_z_tensor(const RbmParams& p) {
  const Moments mo = exact_moments(p);
  const double log_z = exact_log_z(p);
  Tape* tape = p.a1.on_tape() ? p.a1.tape() : p.a2.on_tape() ? p.a2.tape() : p.W.tape();
  if (tape == nullptr) return Tensor::scalar(log_z);
  return tape->record("exact_log_z", Tensor::scalar(log_z), {&p.a1, &p.a2, &p.W},
                      [mo](std::span<const double> g, std::span<double* const> pg) {
                        const std::vector<double>* m[] = {&mo.z1, &mo.z2, &mo.z12};
                        for (std::size_t k = 0; k < 3; ++k) {
                          if (pg[k] == nullptr) continue;
                          for (std::size_t i = 0; i < m[k]->size(); ++i) pg[k][i] += g[0] * (*m[k])[i];
                        }
                      });
}

GibbsChains::GibbsChains(std::size_t count, std::size_t n1, std::size_t n2, std::uint64_t seed)
    : count(count), n1(n1), n2(n2), seed(seed), z1(count * n1), z2(count * n2) {
  if (count == 0) throw std::invalid_argument("GibbsChains: need at least one chain");
  for (std::size_t l = 0; l < count; ++l) {
    Rng init(derive_seed({seed, ~std::uint64_t{0}, l}));
    for (std::size_t i = 0; i < n1; ++i) z1[l * n1 + i] = static_cast<double>(init() & 1U);
    for (std::size_t j = 0; j < n2; ++j) z2[l * n2 + j] = static_cast<double>(init() & 1U);
  }
  reseed(0);
}

void GibbsChains::reseed(std::uint64_t epoch) {
  rngs.clear();
  rngs.reserve(count);
  for (std::size_t l = 0; l < count; ++l) rngs.emplace_back(derive_seed({seed, epoch, l}));
}

Tensor GibbsChains::z1_tensor() const { return Tensor({count, n1}, z1); }
Tensor GibbsChains::z2_tensor() const { return Tensor({count, n2}, z2); }

namespace detail {

void sweep_chain(std::span<const double> a1, std::span<const double> a2, std::span<const double> W, double beta,
                 std::span<double> z1, std::span<double> z2, Rng& rng) {
  const std::size_t n1 = a1.size(), n2 = a2.size();
  for (std::size_t i = 0; i < n1; ++i) {
    double act = a1[i];
    const double* row = W.data() + i * n2;
    for (std::size_t j = 0; j < n2; ++j) act += row[j] * z2[j];
    z1[i] = uniform01(rng) < sigmoid(beta * act) ? 1.0 : 0.0;
  }
  for (std::size_t j = 0; j < n2; ++j) {
    double act = a2[j];
    for (std::size_t i = 0; i < n1; ++i) act += W[i * n2 + j] * z1[i];
    z2[j] = uniform01(rng) < sigmoid(beta * act) ? 1.0 : 0.0;
  }
}

}  // namespace detail

namespace {

void run_chains(const RbmParams& p, GibbsChains& c, double beta, std::size_t sweeps, std::size_t workers) {
  if (c.n1 != p.n1() || c.n2 != p.n2()) throw ShapeError("gibbs_sweep: chain widths do not match the RBM");
  if (c.rngs.size() != c.count) c.reseed(0);
  parallel_for(c.count, workers, [&](std::size_t l) {
    std::span<double> z1(c.z1.data() + l * c.n1, c.n1), z2(c.z2.data() + l * c.n2, c.n2);
    for (std::size_t s = 0; s < sweeps; ++s) detail::sweep_chain(p.a1.data(), p.a2.data(), p.W.data(), beta, z1, z2, c.rngs[l]);
  });
}

}  // namespace

void gibbs_sweep(const RbmParams& p, GibbsChains& chains, double inverse_temperature, std::size_t workers) {
  run_chains(p, chains, inverse_temperature, 1, workers);
}

Tensor pcd_surrogate_loss(const RbmParams& p, GibbsChains& chains, std::size_t sweeps, std::size_t workers) {
  if (sweeps == 0) throw std::invalid_argument("pcd_surrogate_loss: sweeps must be at least 1");
  run_chains(p, chains, 1.0, sweeps, workers);
  return -mean(energy(p, chains.z1_tensor(), chains.z2_tensor()));
}

}  // namespace odvae::rbm
