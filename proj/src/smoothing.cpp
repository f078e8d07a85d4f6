#include "odvae/smoothing.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace odvae::smoothing {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

void check_open_unit(std::string_view op, const Tensor& rho) {
  for (double r : rho.data()) {
    if (!(r > 0.0 && r < 1.0)) {
      std::ostringstream os;
      os << op << ": uniform sample " << r << " outside (0, 1)";
      throw DomainError(os.str());
    }
  }
}

void check_closed_unit(std::string_view op, std::string_view what, double v) {
  if (!(v >= 0.0 && v <= 1.0)) {
    std::ostringstream os;
    os << op << ": " << what << " = " << v << " outside [0, 1]";
    throw DomainError(os.str());
  }
}

void check_closed_unit(std::string_view op, std::string_view what, const Tensor& t) {
  if (t.on_tape()) return;
  for (double v : t.data()) check_closed_unit(op, what, v);
}

// Mask of b <= 0 over the broadcast shape of b.
Tensor nonpositive_mask(const Tensor& b) {
  std::vector<double> m(b.size());
  for (std::size_t i = 0; i < b.size(); ++i) m[i] = b[i] <= 0.0 ? 1.0 : 0.0;
  return Tensor(b.shape(), std::move(m));
}

// Positive root of m^2 + b m + c = 0 with c <= 0, picking the form that
// avoids cancellation for either sign of b.
Tensor positive_root(const Tensor& b, const Tensor& c) {
  const Tensor sq = sqrt(maximum(b * b - 4.0 * c, 0.0));
  const Tensor mask = nonpositive_mask(b);
  const Tensor neg_b_form = (sq - b) * 0.5;
  const Tensor pos_b_form = (-2.0 * c) / maximum(b + sq, 1e-300);
  return select(mask, neg_b_form, pos_b_form);
}

double logistic_scalar(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// log L(zeta | mu, s) for the logistic density.
Tensor logistic_log_pdf(const Tensor& zeta, double mu, double s) {
  const Tensor u = (zeta - mu) / s;
  return -u - std::log(s) - 2.0 * softplus(-u);
}

Tensor exp_log_pdf_from_logs(const Tensor& log_q0, const Tensor& log_q1, const Tensor& zeta,
                             double beta) {
  const double log_z_beta = std::log(-std::expm1(-beta)) - std::log(beta);
  const Tensor c0 = log_q0 - beta * zeta;
  const Tensor c1 = log_q1 + beta * (zeta - 1.0);
  return log_add_exp(c0, c1) - log_z_beta;
}

}  // namespace

void validate(const SmoothingKind& kind) {
  std::visit(overloaded{
                 [](const ExpMixture& k) {
                   if (!(k.beta > 0)) throw std::invalid_argument("exp mixture: beta must be > 0");
                 },
                 [](const LogisticMixture& k) {
                   if (!(k.s > 0)) throw std::invalid_argument("logistic mixture: s must be > 0");
                   if (!(k.mu1 > k.mu0)) throw std::invalid_argument("logistic mixture: mu1 must exceed mu0");
                 },
                 [](const SpikeExp& k) {
                   if (!(k.beta > 0)) throw std::invalid_argument("spike-exp: beta must be > 0");
                 },
                 [](const BinaryConcrete& k) {
                   if (!(k.lambda > 0)) throw std::invalid_argument("concrete: lambda must be > 0");
                 },
             },
             kind);
}

std::string kind_name(const SmoothingKind& kind) {
  return std::visit(overloaded{
                        [](const ExpMixture&) { return std::string("exp"); },
                        [](const LogisticMixture&) { return std::string("logistic"); },
                        [](const SpikeExp&) { return std::string("spike"); },
                        [](const BinaryConcrete&) { return std::string("concrete"); },
                    },
                    kind);
}

std::string describe(const SmoothingKind& kind) {
  std::ostringstream os;
  std::visit(overloaded{
                 [&](const ExpMixture& k) { os << "exp(beta=" << k.beta << ")"; },
                 [&](const LogisticMixture& k) {
                   os << "logistic(mu0=" << k.mu0 << ", mu1=" << k.mu1 << ", s=" << k.s << ")";
                 },
                 [&](const SpikeExp& k) { os << "spike(beta=" << k.beta << ")"; },
                 [&](const BinaryConcrete& k) { os << "concrete(lambda=" << k.lambda << ")"; },
             },
             kind);
  return os.str();
}

bool is_overlapping(const SmoothingKind& kind) {
  return std::holds_alternative<ExpMixture>(kind) || std::holds_alternative<LogisticMixture>(kind);
}

// ---------------------------------------------------------------------------

double exp_mixture_cdf(double q, double zeta, double beta) {
  check_closed_unit("exp_mixture_cdf", "q", q);
  check_closed_unit("exp_mixture_cdf", "zeta", zeta);
  const double norm = -std::expm1(-beta);
  const double f0 = -std::expm1(-beta * zeta) / norm;
  const double f1 = (std::exp(beta * (zeta - 1.0)) - std::exp(-beta)) / norm;
  return (1.0 - q) * f0 + q * f1;
}

Tensor exp_mixture_inverse_cdf(const Tensor& q, const Tensor& rho, double beta) {
  check_open_unit("exp_mixture_inverse_cdf", rho);
  check_closed_unit("exp_mixture_inverse_cdf", "q", q);
  const double d = std::exp(-beta);
  const Tensor qc = clamp(q, kQMin, 1.0 - kQMin);
  const Tensor one_minus_q = 1.0 - qc;
  const Tensor b = (rho + d * (qc - rho)) / one_minus_q - 1.0;
  const Tensor c = -d * qc / one_minus_q;
  const Tensor m = positive_root(b, c);
  return clamp(-log(m) / beta, 0.0, 1.0);
}

double exp_mixture_inverse_cdf(double q, double rho, double beta) {
  return exp_mixture_inverse_cdf(Tensor::scalar(q), Tensor::scalar(rho), beta).item();
}

Tensor exp_mixture_log_pdf(const Tensor& q, const Tensor& zeta, double beta) {
  check_closed_unit("exp_mixture_log_pdf", "q", q);
  check_closed_unit("exp_mixture_log_pdf", "zeta", zeta);
  return exp_log_pdf_from_logs(log1p(-q), log(q), zeta, beta);
}

double exp_mixture_log_pdf(double q, double zeta, double beta) {
  return exp_mixture_log_pdf(Tensor::scalar(q), Tensor::scalar(zeta), beta).item();
}

// ---------------------------------------------------------------------------

double logistic_mixture_cdf(double q, double zeta, const LogisticMixture& p) {
  check_closed_unit("logistic_mixture_cdf", "q", q);
  return (1.0 - q) * logistic_scalar((zeta - p.mu0) / p.s) + q * logistic_scalar((zeta - p.mu1) / p.s);
}

Tensor logistic_mixture_inverse_cdf(const Tensor& q, const Tensor& rho, const LogisticMixture& p) {
  check_open_unit("logistic_mixture_inverse_cdf", rho);
  check_closed_unit("logistic_mixture_inverse_cdf", "q", q);
  // With m = exp(-zeta / s) rescaled by sqrt(d0 d1), the quadratic becomes
  // rho m'^2 + b' m' + (rho - 1) = 0 where only exp(+-delta) appears.
  const double delta = (p.mu1 - p.mu0) / (2.0 * p.s);
  const double e_lo = std::exp(-delta), e_hi = std::exp(delta);
  const Tensor b = rho * (e_lo + e_hi) - q * e_lo - (1.0 - q) * e_hi;
  // Divide through by rho to reuse the monic root.
  const Tensor m = positive_root(b / rho, (rho - 1.0) / rho);
  return -p.s * log(m) + 0.5 * (p.mu0 + p.mu1);
}

double logistic_mixture_inverse_cdf(double q, double rho, const LogisticMixture& p) {
  return logistic_mixture_inverse_cdf(Tensor::scalar(q), Tensor::scalar(rho), p).item();
}

Tensor logistic_mixture_log_pdf(const Tensor& q, const Tensor& zeta, const LogisticMixture& p) {
  check_closed_unit("logistic_mixture_log_pdf", "q", q);
  return log_add_exp(log1p(-q) + logistic_log_pdf(zeta, p.mu0, p.s),
                     log(q) + logistic_log_pdf(zeta, p.mu1, p.s));
}

// ---------------------------------------------------------------------------

double spike_exp_inverse_cdf(double q, double rho, double beta) {
  check_closed_unit("spike_exp_inverse_cdf", "q", q);
  if (!(rho > 0.0 && rho < 1.0)) throw DomainError("spike_exp_inverse_cdf: rho outside (0, 1)");
  if (rho <= 1.0 - q) return 0.0;
  return std::log1p(std::expm1(beta) * (rho - (1.0 - q)) / q) / beta;
}

Tensor binary_concrete_sample(const Tensor& logits, const Tensor& rho, double lambda) {
  check_open_unit("binary_concrete_sample", rho);
  const Tensor noise = log(rho) - log1p(-rho);
  return sigmoid((logits + noise) / lambda);
}

double binary_concrete_sample(double logit, double rho, double lambda) {
  return binary_concrete_sample(Tensor::scalar(logit), Tensor::scalar(rho), lambda).item();
}

// ---------------------------------------------------------------------------

Tensor log_density_ratio(const Tensor& zeta, const SmoothingKind& kind) {
  return std::visit(
      overloaded{
          [&](const ExpMixture& k) { return k.beta * (2.0 * zeta - 1.0); },
          [&](const LogisticMixture& k) {
            return logistic_log_pdf(zeta, k.mu1, k.s) - logistic_log_pdf(zeta, k.mu0, k.s);
          },
          [](const SpikeExp&) -> Tensor {
            throw std::invalid_argument(
                "log_density_ratio: spike-exp conditionals do not share support");
          },
          [](const BinaryConcrete&) -> Tensor {
            throw std::invalid_argument("log_density_ratio: concrete relaxation has no conditionals");
          },
      },
      kind);
}

Tensor posterior_nu(const Tensor& logits, const Tensor& zeta, const SmoothingKind& kind) {
  return sigmoid(logits + log_density_ratio(zeta, kind));
}

Tensor sample(const SmoothingKind& kind, const Tensor& logits, const Tensor& rho) {
  return std::visit(
      overloaded{
          [&](const ExpMixture& k) { return exp_mixture_inverse_cdf(sigmoid(logits), rho, k.beta); },
          [&](const LogisticMixture& k) {
            return logistic_mixture_inverse_cdf(sigmoid(logits), rho, k);
          },
          [&](const SpikeExp& k) {
            check_open_unit("spike_exp_sample", rho);
            const Tensor q = clamp(sigmoid(logits), kQMin, 1.0);
            const Tensor excess = rho - (1.0 - q);
            std::vector<double> mask(excess.size());
            for (std::size_t i = 0; i < mask.size(); ++i) mask[i] = excess[i] <= 0.0 ? 1.0 : 0.0;
            const Tensor tail = log1p(maximum(std::expm1(k.beta) * excess / q, 0.0)) / k.beta;
            return select(Tensor(excess.shape(), std::move(mask)), Tensor::scalar(0.0), tail);
          },
          [&](const BinaryConcrete& k) { return binary_concrete_sample(logits, rho, k.lambda); },
      },
      kind);
}

Tensor mixture_log_pdf(const SmoothingKind& kind, const Tensor& logits, const Tensor& zeta) {
  return std::visit(
      overloaded{
          [&](const ExpMixture& k) {
            return exp_log_pdf_from_logs(-softplus(logits), -softplus(-logits), zeta, k.beta);
          },
          [&](const LogisticMixture& k) {
            return log_add_exp(-softplus(logits) + logistic_log_pdf(zeta, k.mu0, k.s),
                               -softplus(-logits) + logistic_log_pdf(zeta, k.mu1, k.s));
          },
          [](const auto&) -> Tensor {
            throw std::invalid_argument("mixture_log_pdf: requires an overlapping transformation");
          },
      },
      kind);
}

double sample_conditional(const SmoothingKind& kind, int z, double rho) {
  if (!(rho > 0.0 && rho < 1.0)) throw DomainError("sample_conditional: rho outside (0, 1)");
  return std::visit(overloaded{
                        [&](const ExpMixture& k) {
                          // r(zeta | 0) has CDF (1 - e^{-beta zeta}) / (1 - e^{-beta}).
                          const double u = z ? 1.0 - rho : rho;
                          const double zeta0 = -std::log1p(u * std::expm1(-k.beta)) / k.beta;
                          return z ? 1.0 - zeta0 : zeta0;
                        },
                        [&](const LogisticMixture& k) {
                          return (z ? k.mu1 : k.mu0) + k.s * (std::log(rho) - std::log1p(-rho));
                        },
                        [&](const SpikeExp& k) {
                          return z ? std::log1p(rho * std::expm1(k.beta)) / k.beta : 0.0;
                        },
                        [&](const BinaryConcrete&) { return static_cast<double>(z); },
                    },
                    kind);
}

double inverse_cdf(const SmoothingKind& kind, double q, double rho) {
  return std::visit(overloaded{
                        [&](const ExpMixture& k) { return exp_mixture_inverse_cdf(q, rho, k.beta); },
                        [&](const LogisticMixture& k) { return logistic_mixture_inverse_cdf(q, rho, k); },
                        [&](const SpikeExp& k) { return spike_exp_inverse_cdf(q, rho, k.beta); },
                        [&](const BinaryConcrete& k) {
                          const double qc = std::clamp(q, kQMin, 1.0 - kQMin);
                          return binary_concrete_sample(std::log(qc) - std::log1p(-qc), rho, k.lambda);
                        },
                    },
                    kind);
}

}  // namespace odvae::smoothing
