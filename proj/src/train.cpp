#include "odvae/train.hpp"

#include <cmath>
#include <filesystem>
#include <numeric>

#include "odvae/bounds.hpp"

namespace odvae {

namespace {

std::string first_existing(const std::string& dir, const std::vector<std::string>& names) {
  for (const auto& n : names) {
    const auto p = std::filesystem::path(dir) / n;
    if (std::filesystem::exists(p)) return p.string();
  }
  throw data::DataError(dir + ": none of " + names.front() + "[.gz] found");
}

data::Dataset load_mnist_split(const RunConfig& cfg, bool train) {
  const std::string stem = train ? "train-images-idx3-ubyte" : "t10k-images-idx3-ubyte";
  const std::string path = first_existing(cfg.data_dir, {stem + ".gz", stem, train ? "train-images.idx3-ubyte" : "t10k-images.idx3-ubyte"});
  auto d = data::binarize(data::load_idx_images(path), cfg.binarization, derive_seed({cfg.seed, train ? 11u : 12u}));
  const std::string lstem = train ? "train-labels-idx1-ubyte" : "t10k-labels-idx1-ubyte";
  for (const auto& n : {lstem + ".gz", lstem}) {
    const auto p = std::filesystem::path(cfg.data_dir) / n;
    if (std::filesystem::exists(p)) {
      const auto labels = data::load_idx_labels(p.string());
      if (labels.size() == d.count) d.labels.assign(labels.begin(), labels.end());
      break;
    }
  }
  return d;
}

constexpr std::size_t kExactLimit = 24;

}  // namespace

data::Splits load_data(const RunConfig& cfg) {
  data::Dataset train, test;
  if (cfg.binarization == data::Binarization::File) {
    train = data::read_obin(cfg.obin_train);
    test = data::read_obin(cfg.obin_test, train.dim);
  } else if (cfg.source == "mnist") {
    train = load_mnist_split(cfg, true);
    test = load_mnist_split(cfg, false);
  } else {
    train = data::synthetic_bars(cfg.bars_train, cfg.bars_size, cfg.bars_noise, derive_seed({cfg.seed, 21}));
    test = data::synthetic_bars(cfg.bars_test, cfg.bars_size, cfg.bars_noise, derive_seed({cfg.seed, 22}));
  }
  if (cfg.valid == 0) return {train, data::Dataset{0, train.dim, {}, {}, train.mode, train.seed}, test};
  return data::split(train, test, cfg.valid);
}

Trainer::Trainer(RunConfig cfg, data::Splits data, std::size_t workers)
    : cfg_(std::move(cfg)), data_(std::move(data)), workers_(workers) {
  if (data_.train.count == 0) throw std::invalid_argument("trainer: empty training set");
  const auto means = data::pixel_means(data_.train);
  model_ = models::Model(cfg_.model_spec(data_.train.dim), cfg_.seed, cfg_.output_bias ? &means : nullptr);
  init();
}

Trainer::Trainer(const Checkpoint& ckpt, data::Splits data, std::size_t workers)
    : data_(std::move(data)), workers_(workers) {
  model_ = model_from_checkpoint(ckpt, &cfg_);
  if (model_.spec().pixels != data_.train.dim) throw std::invalid_argument("trainer: checkpoint and data widths differ");
  init();
  step_ = static_cast<std::uint64_t>(ckpt.get("train/step").item());
  std::vector<Tensor> m, v;
  for (const auto& n : model_.names()) {
    m.push_back(ckpt.get("optim/m/" + n));
    v.push_back(ckpt.get("optim/v/" + n));
  }
  opt_.restore(static_cast<std::uint64_t>(ckpt.get("optim/t").item()), std::move(m), std::move(v));
  if (cfg_.prior == models::PriorKind::Rbm) {
    const Tensor z1 = ckpt.get("pcd/z1"), z2 = ckpt.get("pcd/z2");
    if (z1.size() != chains_.z1.size() || z2.size() != chains_.z2.size()) throw CheckpointError("checkpoint: pcd chains have the wrong size");
    chains_.z1.assign(z1.data().begin(), z1.data().end());
    chains_.z2.assign(z2.data().begin(), z2.data().end());
  }
}

void Trainer::init() {
  opt_ = optim::Optimizer(cfg_.optimizer, model_.names(), model_.values());
  if (cfg_.prior == models::PriorKind::Rbm) {
    chains_ = rbm::GibbsChains(cfg_.pcd_chains, cfg_.groups[0], cfg_.groups[1], derive_seed({cfg_.seed, 0x9cd}));
  }
}

std::vector<std::size_t> Trainer::batch_indices(std::uint64_t step) {
  const std::size_t n = data_.train.count;
  const std::size_t b = std::min(cfg_.batch, n);
  const std::uint64_t per_epoch = n / b;
  const std::uint64_t epoch = step / per_epoch;
  if (epoch != perm_epoch_) {
    perm_.resize(n);
    std::iota(perm_.begin(), perm_.end(), std::size_t{0});
    Rng rng(derive_seed({cfg_.seed, 0xe90c, epoch}));
    for (std::size_t i = n - 1; i > 0; --i) {
      const auto j = static_cast<std::size_t>(uniform01(rng) * static_cast<double>(i + 1));
      std::swap(perm_[i], perm_[std::min(j, i)]);
    }
    perm_epoch_ = epoch;
  }
  const std::size_t start = static_cast<std::size_t>(step % per_epoch) * b;
  return {perm_.begin() + static_cast<std::ptrdiff_t>(start), perm_.begin() + static_cast<std::ptrdiff_t>(start + b)};
}

StepMetrics Trainer::step() {
  const std::uint64_t t = step_;
  const auto idx = batch_indices(t);
  const std::uint64_t epoch = t / (data_.train.count / idx.size());
  const Tensor x = data_.train.rows(idx, epoch);
  Rng noise_rng(derive_seed({cfg_.seed, 0x5eed, t}));
  const auto noise = models::draw_noise(model_.spec(), idx.size(), noise_rng);
  const auto kind = cfg_.smoothing_at(t);

  StepMetrics out;
  out.step = t;
  out.beta = cfg_.scaled(cfg_.beta).eval(t);
  out.gamma = cfg_.scaled(cfg_.gamma).eval(t);
  out.lr = cfg_.scaled(cfg_.lr).eval(t);

  Tape tape;
  const auto params = model_.attach(tape);
  const auto f = models::forward(model_, params, x, noise, kind);
  Tensor loss;
  bounds::ElboBreakdown e;
  if (cfg_.prior == models::PriorKind::Rbm) {
    const auto rp = model_.rbm_params(params);
    double log_z = 0.0;
    const bool log_step = t % cfg_.log_every == 0 || t + 1 == cfg_.iterations;
    if (log_step && rp.n1() + rp.n2() <= kExactLimit) {
      log_z = rbm::exact_log_z(rp.detach());
      out.log_z = log_z;
    }
    e = bounds::rbm_elbo(f, rp, Tensor::scalar(log_z), cfg_.cross_term);
    chains_.reseed(t);
    const Tensor surrogate = rbm::pcd_surrogate_loss(rp, chains_, cfg_.pcd_sweeps, workers_);
    loss = -mean(e.reconstruction) + out.gamma * (mean(e.kl_terms[0]) + surrogate);
    out.alpha = {1.0};
  } else {
    e = cfg_.bound == "marginal" ? bounds::marginal_elbo(f) : bounds::joint_elbo(f);
    std::vector<Tensor> kls;
    for (const auto& k : e.kl_terms) kls.push_back(mean(k));
    const auto bal = bounds::KlBalancer{cfg_.kl_epsilon, out.gamma, cfg_.kl_balance}.balance(kls);
    loss = -mean(e.reconstruction) + bal.weighted;
    out.alpha = bal.alpha;
  }
  out.loss = loss.item();
  out.reconstruction = e.mean_reconstruction();
  out.kl = e.mean_kl();
  out.elbo = e.mean_total();
  if (!std::isfinite(out.loss)) throw NumericError("training: non-finite loss at step " + std::to_string(t));

  const auto grads = tape.backward(loss);
  std::vector<Tensor> g;
  g.reserve(params.size());
  for (const auto& p : params) g.push_back(grads.of(p));
  opt_.step(model_.values(), g, out.lr);
  ++step_;
  return out;
}

Checkpoint Trainer::checkpoint() const {
  Checkpoint c;
  c.config = cfg_.to_text();
  c.put("model/pixels", Tensor::scalar(static_cast<double>(model_.spec().pixels)));
  c.put("train/step", Tensor::scalar(static_cast<double>(step_)));
  for (std::size_t i = 0; i < model_.names().size(); ++i) c.put("param/" + model_.names()[i], model_.values()[i]);
  c.put("optim/t", Tensor::scalar(static_cast<double>(opt_.steps())));
  for (std::size_t i = 0; i < model_.names().size(); ++i) {
    c.put("optim/m/" + model_.names()[i], opt_.first_moments()[i]);
    c.put("optim/v/" + model_.names()[i], opt_.second_moments()[i]);
  }
  if (cfg_.prior == models::PriorKind::Rbm) {
    c.put("pcd/z1", chains_.z1_tensor());
    c.put("pcd/z2", chains_.z2_tensor());
  }
  return c;
}

models::Model model_from_checkpoint(const Checkpoint& ckpt, RunConfig* cfg_out) {
  const RunConfig cfg = parse_config(ckpt.config);
  const auto pixels = static_cast<std::size_t>(ckpt.get("model/pixels").item());
  models::Model m(cfg.model_spec(pixels), cfg.seed);
  for (std::size_t i = 0; i < m.names().size(); ++i) {
    const Tensor& v = ckpt.get("param/" + m.names()[i]);
    if (v.shape() != m.values()[i].shape()) throw ShapeError("checkpoint " + m.names()[i], v.shape(), m.values()[i].shape());
    m.values()[i] = v;
  }
  if (cfg_out) *cfg_out = cfg;
  return m;
}

LogZEstimate estimate_log_z(const models::Model& m, const RunConfig& cfg, bool pt, std::size_t workers) {
  LogZEstimate out;
  if (m.spec().prior != models::PriorKind::Rbm) {
    out.method = "none";
    return out;
  }
  const auto rp = m.rbm_params(m.values());
  if (rp.n1() + rp.n2() <= kExactLimit) out.exact = rbm::exact_log_z(rp);
  if (pt || !out.exact) {
    rbm::PtConfig pc;
    pc.temperatures = cfg.pt_temperatures;
    pc.sweeps = cfg.pt_sweeps;
    pc.burn_in = std::max<std::size_t>(cfg.pt_sweeps / 20, 1);
    pc.replicas = cfg.pt_replicas;
    pc.workers = workers;
    pc.seed = derive_seed({cfg.seed, 0x10c2});
    const auto r = rbm::pt_log_z(rp, pc);
    out.value = r.log_z;
    out.se = r.se;
    out.method = "pt";
    out.swap_rates = r.swap_rates;
  } else {
    out.value = *out.exact;
    out.method = "exact";
  }
  return out;
}

EvalResult evaluate(const models::Model& m, const data::Dataset& d, std::size_t k, std::uint64_t seed,
                    std::size_t batch, double log_z) {
  if (batch == 0) throw std::invalid_argument("evaluate: batch must be positive");
  if (d.count == 0) throw std::invalid_argument("evaluate: empty dataset");
  EvalResult r;
  r.k = k;
  r.n = d.count;
  for (std::size_t start = 0, chunk = 0; start < d.count; start += batch, ++chunk) {
    std::vector<std::size_t> idx;
    for (std::size_t i = start; i < std::min(d.count, start + batch); ++i) idx.push_back(i);
    const auto ll = models::iw_log_likelihood(m, d.rows(idx, 0), k, derive_seed({seed, chunk}), log_z);
    r.per_datum.insert(r.per_datum.end(), ll.begin(), ll.end());
  }
  const double n = static_cast<double>(r.n);
  r.mean = std::accumulate(r.per_datum.begin(), r.per_datum.end(), 0.0) / n;
  double ss = 0;
  for (double v : r.per_datum) ss += (v - r.mean) * (v - r.mean);
  r.sd = r.n > 1 ? std::sqrt(ss / (n - 1)) : 0.0;
  r.se = r.sd / std::sqrt(n);
  return r;
}

}  // namespace odvae
