#include "odvae/models.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace odvae::models {

std::string to_string(Arch a) { return a == Arch::Linear ? "linear" : "nonlinear"; }

std::string to_string(PriorKind p) {
  switch (p) {
    case PriorKind::Factorial:
      return "factorial";
    case PriorKind::Directed:
      return "directed";
    case PriorKind::Rbm:
      return "rbm";
  }
  return "?";
}

Arch parse_arch(const std::string& s) {
  if (s == "linear") return Arch::Linear;
  if (s == "nonlinear") return Arch::Nonlinear;
  throw std::invalid_argument("unknown arch '" + s + "' (expected linear or nonlinear)");
}

PriorKind parse_prior(const std::string& s) {
  if (s == "factorial") return PriorKind::Factorial;
  if (s == "directed") return PriorKind::Directed;
  if (s == "rbm") return PriorKind::Rbm;
  throw std::invalid_argument("unknown prior '" + s + "' (expected factorial, directed or rbm)");
}

std::size_t ModelSpec::latent_total() const { return std::accumulate(groups.begin(), groups.end(), std::size_t{0}); }

void ModelSpec::validate() const {
  if (groups.empty()) throw std::invalid_argument("model: at least one latent group is required");
  for (std::size_t g : groups)
    if (g == 0) throw std::invalid_argument("model: latent groups must be non-empty");
  if (pixels == 0) throw std::invalid_argument("model: pixel count must be positive");
  if (arch == Arch::Nonlinear && (hidden == 0 || hidden_layers == 0)) {
    throw std::invalid_argument("model: nonlinear arch needs hidden > 0 and hidden_layers > 0");
  }
  if (prior == PriorKind::Rbm && groups.size() != 2) {
    throw std::invalid_argument("model: an rbm prior needs exactly two latent groups");
  }
  if (prior == PriorKind::Rbm && !smoothing::is_overlapping(smoothing)) {
    throw std::invalid_argument("model: an rbm prior needs an overlapping smoothing (exp or logistic)");
  }
  smoothing::validate(smoothing);
}

Tensor Mlp::operator()(const Params& p, const Tensor& x) const {
  Tensor h = x;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    h = affine(h, p[layers[l].w], p[layers[l].b]);
    if (l + 1 < layers.size()) h = tanh(h);
  }
  return h;
}

std::size_t Model::add(const std::string& name, Tensor value) {
  names_.push_back(name);
  values_.push_back(std::move(value));
  return values_.size() - 1;
}

Mlp Model::build_mlp(const std::string& prefix, std::size_t in, std::size_t out, Rng& rng) {
  std::vector<std::size_t> widths{in};
  if (spec_.arch == Arch::Nonlinear)
    for (std::size_t l = 0; l < spec_.hidden_layers; ++l) widths.push_back(spec_.hidden);
  widths.push_back(out);
  Mlp net;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    const std::size_t fan_in = widths[l], fan_out = widths[l + 1];
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::vector<double> w(fan_in * fan_out);
    for (auto& v : w) v = bound * (2.0 * uniform01(rng) - 1.0);
    const std::string name = prefix + "/l" + std::to_string(l);
    Dense d;
    d.w = add(name + "/W", Tensor::matrix(fan_in, fan_out, std::move(w)));
    d.b = add(name + "/b", Tensor::zeros({fan_out}));
    net.layers.push_back(d);
  }
  return net;
}

Model::Model(ModelSpec spec, std::uint64_t seed, const std::vector<double>* pixel_means) : spec_(std::move(spec)) {
  spec_.validate();
  Rng rng(derive_seed({seed, 0x1417}));
  const auto& g = spec_.groups;
  std::size_t before = 0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    encoders_.push_back(build_mlp("enc" + std::to_string(i), spec_.pixels + before, g[i], rng));
    before += g[i];
  }
  decoder_ = build_mlp("dec", spec_.latent_total(), spec_.pixels, rng);
  if (pixel_means) {
    if (pixel_means->size() != spec_.pixels) throw ShapeError("model: pixel means have the wrong length");
    std::vector<double> bias(spec_.pixels);
    for (std::size_t d = 0; d < bias.size(); ++d) {
      const double m = std::clamp((*pixel_means)[d], 1e-3, 1.0 - 1e-3);
      bias[d] = std::log(m) - std::log1p(-m);
    }
    values_[decoder_.layers.back().b] = Tensor::vector(std::move(bias));
  }

  prior_nets_.resize(g.size());
  prior_logits_.assign(g.size(), 0);
  switch (spec_.prior) {
    case PriorKind::Factorial:
      for (std::size_t i = 0; i < g.size(); ++i) prior_logits_[i] = add("prior/logits" + std::to_string(i), Tensor::zeros({g[i]}));
      break;
    case PriorKind::Directed:
      prior_logits_[0] = add("prior/logits0", Tensor::zeros({g[0]}));
      before = g[0];
      for (std::size_t i = 1; i < g.size(); ++i) {
        prior_nets_[i] = build_mlp("prior/net" + std::to_string(i), before, g[i], rng);
        before += g[i];
      }
      break;
    case PriorKind::Rbm: {
      rbm_a1_ = add("prior/a1", Tensor::zeros({g[0]}));
      rbm_a2_ = add("prior/a2", Tensor::zeros({g[1]}));
      std::vector<double> w(g[0] * g[1]);
      for (auto& v : w) v = 0.01 * (2.0 * uniform01(rng) - 1.0);
      rbm_w_ = add("prior/W", Tensor::matrix(g[0], g[1], std::move(w)));
      break;
    }
  }
}

std::size_t Model::index(const std::string& name) const {
  const auto it = std::find(names_.begin(), names_.end(), name);
  if (it == names_.end()) throw std::invalid_argument("model: no parameter named '" + name + "'");
  return static_cast<std::size_t>(it - names_.begin());
}

std::size_t Model::parameter_count() const {
  std::size_t n = 0;
  for (const auto& v : values_) n += v.size();
  return n;
}

Params Model::attach(Tape& tape) const {
  Params out;
  out.reserve(values_.size());
  for (const auto& v : values_) out.push_back(tape.leaf(v));
  return out;
}

rbm::RbmParams Model::rbm_params(const Params& p) const {
  if (spec_.prior != PriorKind::Rbm) throw std::logic_error("model: prior is not an rbm");
  return {p[rbm_a1_], p[rbm_a2_], p[rbm_w_]};
}

std::vector<Tensor> draw_noise(const ModelSpec& spec, std::size_t batch, Rng& rng) {
  std::vector<Tensor> out;
  for (std::size_t n : spec.groups) {
    std::vector<double> v(batch * n);
    for (auto& r : v) r = uniform_open01(rng);
    out.emplace_back(Shape{batch, n}, std::move(v));
  }
  return out;
}

namespace {

Tensor join(const Tensor& head, const std::vector<Tensor>& tail, std::size_t count) {
  if (count == 0) return head;
  std::vector<Tensor> parts{head};
  parts.insert(parts.end(), tail.begin(), tail.begin() + static_cast<std::ptrdiff_t>(count));
  return concat(parts);
}

Tensor join(const std::vector<Tensor>& parts, std::size_t count) {
  if (count == 1) return parts[0];
  return concat(std::vector<Tensor>(parts.begin(), parts.begin() + static_cast<std::ptrdiff_t>(count)));
}

void check_input(const Model& m, const Tensor& x) {
  if (x.rank() != 2 || x.cols() != m.spec().pixels) {
    throw ShapeError("model: expected a B x " + std::to_string(m.spec().pixels) + " batch, got " + odvae::to_string(x.shape()));
  }
}

// Bernoulli log-probability of binary z under logits, summed per row.
std::vector<double> bernoulli_log_prob(const Tensor& z, const Tensor& logits) {
  const std::size_t B = z.rows(), n = z.cols();
  const bool shared = logits.size() == n && z.rows() != 1;
  std::vector<double> out(B, 0.0);
  for (std::size_t r = 0; r < B; ++r) {
    for (std::size_t c = 0; c < n; ++c) {
      const double l = shared ? logits[c] : logits[r * n + c];
      const double sp = l > 0 ? l + std::log1p(std::exp(-l)) : std::log1p(std::exp(l));
      out[r] += z[r * n + c] * l - sp;
    }
  }
  return out;
}

Tensor bernoulli_draw(const Tensor& logits, Rng& rng) {
  std::vector<double> z(logits.size());
  for (std::size_t i = 0; i < z.size(); ++i) z[i] = uniform01(rng) < 1.0 / (1.0 + std::exp(-logits[i])) ? 1.0 : 0.0;
  return Tensor(logits.shape(), std::move(z));
}

Tensor prior_logits_for(const Model& m, const Params& p, std::size_t i, const std::vector<Tensor>& zetas) {
  if (m.spec().prior == PriorKind::Factorial || i == 0) return p[m.prior_logits_index(i)];
  return m.prior_net(i)(p, join(zetas, i));
}

// Log-weights given the (deterministic) first-group logits.
std::vector<double> log_weights_from(const Model& m, const Tensor& x, const Tensor& g0, Rng& rng, double log_z) {
  const auto& spec = m.spec();
  const Params& p = m.values();
  const std::size_t B = x.rows();
  std::vector<Tensor> zs;
  std::vector<double> lw(B, 0.0);
  for (std::size_t i = 0; i < spec.groups.size(); ++i) {
    const Tensor g = i == 0 ? g0 : m.encoder(i)(p, join(x, zs, i));
    const Tensor z = bernoulli_draw(g, rng);
    const auto lq = bernoulli_log_prob(z, g);
    for (std::size_t r = 0; r < B; ++r) lw[r] -= lq[r];
    zs.push_back(z);
  }
  if (spec.prior == PriorKind::Rbm) {
    const Tensor e = rbm::energy(m.rbm_params(p), zs[0], zs[1]);
    for (std::size_t r = 0; r < B; ++r) lw[r] += -e[r] - log_z;
  } else {
    for (std::size_t i = 0; i < spec.groups.size(); ++i) {
      const auto lp = bernoulli_log_prob(zs[i], prior_logits_for(m, p, i, zs));
      for (std::size_t r = 0; r < B; ++r) lw[r] += lp[r];
    }
  }
  const Tensor ll = bounds::bernoulli_log_likelihood(x, decode(m, p, zs));
  for (std::size_t r = 0; r < B; ++r) lw[r] += ll[r];
  return lw;
}

}  // namespace

std::vector<bounds::GroupSample> encode(const Model& m, const Params& p, const Tensor& x,
                                        const std::vector<Tensor>& noise, const smoothing::SmoothingKind& kind) {
  check_input(m, x);
  const auto& groups = m.spec().groups;
  if (noise.size() != groups.size()) throw ShapeError("encode: need one noise tensor per latent group");
  std::vector<bounds::GroupSample> out;
  std::vector<Tensor> zetas;
  for (std::size_t i = 0; i < groups.size(); ++i) {
    if (noise[i].shape() != Shape{x.rows(), groups[i]}) throw ShapeError("encode: noise", noise[i].shape(), Shape{x.rows(), groups[i]});
    const Tensor g = m.encoder(i)(p, join(x, zetas, i));
    const Tensor zeta = smoothing::sample(kind, g, noise[i]);
    out.push_back({g, zeta});
    zetas.push_back(zeta);
  }
  return out;
}

Tensor decode(const Model& m, const Params& p, const std::vector<Tensor>& zetas) {
  if (zetas.size() != m.spec().groups.size()) throw ShapeError("decode: need one zeta block per latent group");
  for (std::size_t i = 0; i < zetas.size(); ++i) {
    if (zetas[i].rank() != 2 || zetas[i].cols() != m.spec().groups[i]) {
      throw ShapeError("decode: group " + std::to_string(i) + " has shape " + odvae::to_string(zetas[i].shape()));
    }
  }
  return m.decoder()(p, join(zetas, zetas.size()));
}

bounds::ForwardPass forward(const Model& m, const Params& p, const Tensor& x, const std::vector<Tensor>& noise,
                            const smoothing::SmoothingKind& kind) {
  bounds::ForwardPass f;
  f.x = x;
  f.kind = kind;
  f.groups = encode(m, p, x, noise, kind);
  std::vector<Tensor> zetas;
  for (const auto& g : f.groups) zetas.push_back(g.zeta);
  if (m.spec().prior != PriorKind::Rbm)
    for (std::size_t i = 0; i < zetas.size(); ++i) f.prior_logits.push_back(prior_logits_for(m, p, i, zetas));
  f.pixel_logits = decode(m, p, zetas);
  return f;
}

std::vector<double> discrete_log_weights(const Model& m, const Tensor& x, Rng& rng, double log_z) {
  check_input(m, x);
  return log_weights_from(m, x, m.encoder(0)(m.values(), x), rng, log_z);
}

std::vector<double> iw_log_likelihood(const Model& m, const Tensor& x, std::size_t k, std::uint64_t seed, double log_z) {
  check_input(m, x);
  const Tensor g0 = m.encoder(0)(m.values(), x);
  return bounds::iw_log_likelihood(
      [&](std::size_t j) {
        Rng rng(derive_seed({seed, j}));
        return log_weights_from(m, x, g0, rng, log_z);
      },
      x.rows(), k);
}

PriorSamples sample_prior(const Model& m, std::size_t rows, std::size_t per_z, std::size_t burn_in, std::uint64_t seed) {
  const auto& spec = m.spec();
  const Params& p = m.values();
  const std::size_t n = spec.latent_total(), count = rows * per_z;
  if (count == 0) return {Tensor::zeros({0, n}), Tensor::zeros({0, n}), Tensor::zeros({0, spec.pixels})};
  Rng rng(derive_seed({seed, 0x5a3}));

  // One z per row, laid out group by group.
  std::vector<Tensor> zs;
  if (spec.prior == PriorKind::Rbm) {
    rbm::GibbsChains chains(rows, spec.groups[0], spec.groups[1], derive_seed({seed, 0xc4a1}));
    const auto rp = m.rbm_params(p);
    for (std::size_t s = 0; s < burn_in; ++s) rbm::gibbs_sweep(rp, chains);
    zs = {chains.z1_tensor(), chains.z2_tensor()};
  } else {
    std::vector<Tensor> zetas;
    for (std::size_t i = 0; i < spec.groups.size(); ++i) {
      Tensor logits = prior_logits_for(m, p, i, zetas);
      if (logits.rank() == 1) {
        std::vector<double> tiled;
        for (std::size_t r = 0; r < rows; ++r) tiled.insert(tiled.end(), logits.data().begin(), logits.data().end());
        logits = Tensor({rows, spec.groups[i]}, std::move(tiled));
      }
      const Tensor z = bernoulli_draw(logits, rng);
      std::vector<double> zeta(z.size());
      for (std::size_t u = 0; u < zeta.size(); ++u)
        zeta[u] = smoothing::sample_conditional(spec.smoothing, static_cast<int>(z[u]), uniform_open01(rng));
      zs.push_back(z);
      zetas.emplace_back(z.shape(), std::move(zeta));
    }
  }

  std::vector<double> z_all(count * n), zeta_all(count * n);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < per_z; ++c) {
      const std::size_t row = r * per_z + c;
      std::size_t off = 0;
      for (const auto& z : zs) {
        const std::size_t w = z.cols();
        for (std::size_t u = 0; u < w; ++u) {
          const double bit = z[r * w + u];
          z_all[row * n + off + u] = bit;
          zeta_all[row * n + off + u] = smoothing::sample_conditional(spec.smoothing, static_cast<int>(bit), uniform_open01(rng));
        }
        off += w;
      }
    }
  }
  PriorSamples out{Tensor({count, n}, z_all), Tensor({count, n}, zeta_all), Tensor()};
  std::vector<Tensor> blocks;
  std::size_t off = 0;
  for (std::size_t g : spec.groups) {
    blocks.push_back(slice_cols(out.zeta, off, off + g));
    off += g;
  }
  out.pixels = sigmoid(decode(m, p, blocks));
  return out;
}

}  // namespace odvae::models
