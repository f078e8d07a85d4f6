#include "odvae/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace odvae::bounds {

namespace {

double mean_of(const Tensor& t) {
  const auto d = t.data();
  return std::accumulate(d.begin(), d.end(), 0.0) / static_cast<double>(d.size());
}

void require_rows(const char* op, const Tensor& t) {
  if (t.rank() != 2) throw ShapeError(std::string(op) + ": expected a B x n matrix, got " + to_string(t.shape()));
}

}  // namespace

Tensor bernoulli_kl(const Tensor& q_logits, const Tensor& p_logits) {
  require_rows("bernoulli_kl", q_logits);
  if (p_logits.cols() != q_logits.cols()) throw ShapeError("bernoulli_kl", q_logits.shape(), p_logits.shape());
  // log sigmoid(g) = -softplus(-g), log(1 - sigmoid(g)) = -softplus(g).
  const Tensor mu = sigmoid(q_logits);
  const Tensor on = softplus(-p_logits) - softplus(-q_logits);
  const Tensor off = softplus(p_logits) - softplus(q_logits);
  return sum_rows(mu * on + (1.0 - mu) * off);
}

Tensor bernoulli_entropy(const Tensor& logits) {
  require_rows("bernoulli_entropy", logits);
  const Tensor mu = sigmoid(logits);
  return sum_rows(mu * softplus(-logits) + (1.0 - mu) * softplus(logits));
}

Tensor bernoulli_log_likelihood(const Tensor& x, const Tensor& logits) {
  require_rows("bernoulli_log_likelihood", logits);
  if (x.shape() != logits.shape()) throw ShapeError("bernoulli_log_likelihood", x.shape(), logits.shape());
  return sum_rows(x * logits - softplus(logits));
}

double ElboBreakdown::mean_total() const { return mean_of(total); }
double ElboBreakdown::mean_reconstruction() const { return mean_of(reconstruction); }
std::vector<double> ElboBreakdown::mean_kl() const {
  std::vector<double> out;
  for (const auto& k : kl_terms) out.push_back(mean_of(k));
  return out;
}

namespace {

void check_pass(const char* op, const ForwardPass& f, bool need_prior) {
  if (f.groups.empty()) throw std::invalid_argument(std::string(op) + ": no latent groups");
  if (need_prior && f.prior_logits.size() != f.groups.size()) {
    throw std::invalid_argument(std::string(op) + ": " + std::to_string(f.groups.size()) + " groups but " +
                                std::to_string(f.prior_logits.size()) + " prior factors");
  }
}

ElboBreakdown finish(const ForwardPass& f, std::vector<Tensor> kls) {
  ElboBreakdown e;
  e.reconstruction = bernoulli_log_likelihood(f.x, f.pixel_logits);
  Tensor total = e.reconstruction;
  for (const auto& k : kls) total = total - k;
  e.kl_terms = std::move(kls);
  e.total = total;
  return e;
}

}  // namespace

ElboBreakdown joint_elbo(const ForwardPass& f) {
  check_pass("joint_elbo", f, true);
  std::vector<Tensor> kls;
  for (std::size_t i = 0; i < f.groups.size(); ++i) kls.push_back(bernoulli_kl(f.groups[i].logits, f.prior_logits[i]));
  return finish(f, std::move(kls));
}

ElboBreakdown marginal_elbo(const ForwardPass& f) {
  check_pass("marginal_elbo", f, true);
  if (!smoothing::is_overlapping(f.kind)) {
    throw std::invalid_argument("marginal_elbo: needs an overlapping transformation, got " + smoothing::kind_name(f.kind));
  }
  std::vector<Tensor> kls;
  for (std::size_t i = 0; i < f.groups.size(); ++i) {
    const auto& g = f.groups[i];
    require_rows("marginal_elbo", g.zeta);
    kls.push_back(sum_rows(smoothing::mixture_log_pdf(f.kind, g.logits, g.zeta) -
                           smoothing::mixture_log_pdf(f.kind, f.prior_logits[i], g.zeta)));
  }
  return finish(f, std::move(kls));
}

Tensor rbm_kl(const Tensor& q1_logits, const Tensor& zeta1, const Tensor& q2_logits, const rbm::RbmParams& prior,
              const smoothing::SmoothingKind& kind, const Tensor& log_z, CrossTerm cross) {
  require_rows("rbm_kl", q1_logits);
  require_rows("rbm_kl", q2_logits);
  if (q1_logits.cols() != prior.n1() || q2_logits.cols() != prior.n2() || q1_logits.rows() != q2_logits.rows()) {
    throw ShapeError("rbm_kl: posterior logits " + to_string(q1_logits.shape()) + " and " + to_string(q2_logits.shape()) +
                     " do not match an RBM with " + std::to_string(prior.n1()) + "+" + std::to_string(prior.n2()) +
                     " units");
  }
  if (zeta1.shape() != q1_logits.shape()) throw ShapeError("rbm_kl", q1_logits.shape(), zeta1.shape());
  if (log_z.size() != 1) throw ShapeError("rbm_kl: log_z must be a scalar, got " + to_string(log_z.shape()));
  if (cross == CrossTerm::Nu && !smoothing::is_overlapping(kind)) {
    throw std::invalid_argument("rbm_kl: " + smoothing::kind_name(kind) + " smoothing has no posterior ratio");
  }
  const Tensor mu1 = sigmoid(q1_logits), mu2 = sigmoid(q2_logits);
  const Tensor left = cross == CrossTerm::Nu ? smoothing::posterior_nu(q1_logits, zeta1, kind) : mu1;
  const Tensor linear = sum_rows(mu1 * prior.a1) + sum_rows(mu2 * prior.a2);
  const Tensor pair = sum_rows(matmul(left, prior.W) * mu2);
  return log_z - bernoulli_entropy(q1_logits) - bernoulli_entropy(q2_logits) - linear - pair;
}

ElboBreakdown rbm_elbo(const ForwardPass& f, const rbm::RbmParams& prior, const Tensor& log_z, CrossTerm cross) {
  if (f.groups.size() != 2) throw std::invalid_argument("rbm_elbo: an RBM prior needs exactly two latent groups");
  const auto& g1 = f.groups[0];
  const auto& g2 = f.groups[1];
  ElboBreakdown e = finish(f, {rbm_kl(g1.logits, g1.zeta, g2.logits, prior, f.kind, log_z, cross)});
  e.log_z = log_z.item();
  return e;
}

std::vector<double> iw_log_likelihood(const LogWeightFn& log_weights, std::size_t batch, std::size_t k) {
  if (k < 1) throw std::invalid_argument("iw_log_likelihood: k must be at least 1");
  std::vector<double> mx(batch, -std::numeric_limits<double>::infinity()), s(batch, 0.0);
  for (std::size_t j = 0; j < k; ++j) {
    const auto w = log_weights(j);
    if (w.size() != batch) throw ShapeError("iw_log_likelihood: log-weight batch has the wrong size");
    for (std::size_t b = 0; b < batch; ++b) {
      if (w[b] > mx[b]) {
        s[b] = s[b] * std::exp(mx[b] - w[b]) + 1.0;
        mx[b] = w[b];
      } else {
        s[b] += std::exp(w[b] - mx[b]);
      }
    }
  }
  std::vector<double> out(batch);
  const double log_k = std::log(static_cast<double>(k));
  for (std::size_t b = 0; b < batch; ++b) out[b] = mx[b] + std::log(s[b]) - log_k;
  return out;
}

KlBalancer::Result KlBalancer::balance(const std::vector<Tensor>& kl_means) const {
  const std::size_t n = kl_means.size();
  Result r{Tensor::scalar(0.0), std::vector<double>(n, 1.0)};
  if (n == 0) return r;
  if (enabled && gamma < 1.0) {
    std::vector<double> raw(n);
    for (std::size_t i = 0; i < n; ++i) raw[i] = std::max(kl_means[i].item(), 0.0) + epsilon;
    const double total = std::accumulate(raw.begin(), raw.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) r.alpha[i] = static_cast<double>(n) * raw[i] / total;
  }
  Tensor acc = kl_means[0] * r.alpha[0];
  for (std::size_t i = 1; i < n; ++i) acc = acc + kl_means[i] * r.alpha[i];
  r.weighted = acc * gamma;
  return r;
}

}  // namespace odvae::bounds
