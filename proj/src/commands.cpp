#include "odvae/commands.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "odvae/checkpoint.hpp"
#include "odvae/config.hpp"
#include "odvae/smoothing.hpp"
#include "odvae/train.hpp"

namespace odvae {

using nlohmann::json;

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  out << text;
  if (!out) throw std::runtime_error("write to '" + path + "' failed");
}

json metrics_line(const StepMetrics& m, const std::string& hash) {
  json j;
  j["schema"] = kMetricsSchema;
  j["config_hash"] = hash;
  j["step"] = m.step;
  j["loss"] = m.loss;
  j["elbo"] = m.elbo;
  j["recon"] = m.reconstruction;
  j["kl"] = m.kl;
  j["alpha"] = m.alpha;
  j["beta"] = m.beta;
  j["gamma"] = m.gamma;
  j["lr"] = m.lr;
  j["log_z"] = m.log_z ? json(*m.log_z) : json(nullptr);
  return j;
}

const data::Dataset& pick_split(const data::Splits& s, const std::string& name) {
  if (name == "test") return s.test;
  if (name == "valid") return s.valid;
  if (name == "train") return s.train;
  throw ConfigError({"--split must be test, valid or train"});
}

}  // namespace

int run_guarded(const std::function<int()>& body, std::ostream& err) {
  try {
    return body();
  } catch (const ConfigError& e) {
    err << e.what() << "\n";
    return kExitConfig;
  } catch (const NumericError& e) {
    err << "numeric failure: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
}

int cmd_train(const TrainOptions& o, std::ostream& log) {
  if (o.out.empty()) throw ConfigError({"--out is required"});
  std::optional<Checkpoint> resume;
  RunConfig cfg;
  if (!o.resume.empty()) {
    resume = read_checkpoint(o.resume);
    cfg = parse_config(resume->config);
  } else {
    cfg = load_config(o.config);
    if (o.seed) {
      cfg.seed = *o.seed;
      cfg = parse_config(cfg.to_text());
    }
  }
  std::filesystem::create_directories(o.out);
  const auto dir = std::filesystem::path(o.out);
  const std::string ckpt_path = (dir / "checkpoint.bin").string();
  write_text((dir / "config.ini").string(), cfg.to_text());
  const std::string hash = cfg.hash();

  auto splits = load_data(cfg);
  Trainer trainer = resume ? Trainer(*resume, std::move(splits), o.workers)
                           : Trainer(cfg, std::move(splits), o.workers);
  if (!resume) write_checkpoint(ckpt_path, trainer.checkpoint());

  const auto metrics_path = (dir / "metrics.jsonl").string();
  std::ofstream metrics;
  auto open_metrics = [&] {
    if (!metrics.is_open()) {
      metrics.open(metrics_path, resume ? std::ios::app : std::ios::trunc);
      if (!metrics) throw std::runtime_error("cannot open '" + metrics_path + "'");
    }
  };
  if (!resume && std::filesystem::exists(metrics_path)) std::filesystem::remove(metrics_path);

  while (trainer.steps_done() < cfg.iterations) {
    StepMetrics m;
    try {
      m = trainer.step();
    } catch (const NumericError&) {
      log << "training stopped at step " << trainer.steps_done() << "; last good checkpoint kept at " << ckpt_path << "\n";
      throw;
    }
    if (m.step % cfg.log_every == 0 || m.step + 1 == cfg.iterations) {
      open_metrics();
      metrics << metrics_line(m, hash).dump() << "\n";
      metrics.flush();
      if (!o.quiet) {
        log << "step " << m.step << " elbo " << fmt(m.elbo) << " recon " << fmt(m.reconstruction) << " beta "
            << m.beta << " gamma " << m.gamma << " lr " << m.lr << "\n";
      }
    }
    if (cfg.checkpoint_every > 0 && trainer.steps_done() % cfg.checkpoint_every == 0) {
      write_checkpoint(ckpt_path, trainer.checkpoint());
    }
  }
  write_checkpoint(ckpt_path, trainer.checkpoint());
  if (!o.quiet) log << "wrote " << ckpt_path << " after " << trainer.steps_done() << " steps (config " << hash << ")\n";
  return kExitOk;
}

int cmd_eval(const EvalOptions& o, std::ostream& log) {
  const Checkpoint ckpt = read_checkpoint(o.ckpt);
  RunConfig cfg;
  const models::Model model = model_from_checkpoint(ckpt, &cfg);
  const auto splits = load_data(cfg);
  const auto& d = pick_split(splits, o.split);
  if (d.count == 0) throw ConfigError({"the " + o.split + " split is empty"});
  const std::size_t k = o.k ? o.k : cfg.eval_k;
  const std::uint64_t seed = o.seed ? *o.seed : cfg.seed;

  const auto lz = estimate_log_z(model, cfg, !o.exact_log_z, o.workers);
  const auto r = evaluate(model, d, k, derive_seed({seed, 0xe7a1}), cfg.eval_batch, lz.value);

  json j;
  j["schema"] = kMetricsSchema;
  j["command"] = "eval";
  j["config_hash"] = cfg.hash();
  j["split"] = o.split;
  j["source"] = cfg.source;
  j["binarization"] = data::to_string(cfg.binarization);
  j["k"] = k;
  j["n"] = r.n;
  j["seed"] = seed;
  j["mean_ll"] = r.mean;
  j["se"] = r.se;
  j["per_datum_sd"] = r.sd;
  j["independent_pixel_ll"] = data::independent_pixel_log_likelihood(splits.train, d);
  j["train_step"] = ckpt.get("train/step").item();
  if (lz.method == "none") {
    j["log_z"] = nullptr;
  } else {
    j["log_z"] = {{"estimate", lz.value}, {"se", lz.se}, {"method", lz.method}, {"swap_rates", lz.swap_rates}};
    j["log_z"]["exact"] = lz.exact ? json(*lz.exact) : json(nullptr);
  }
  const std::string text = j.dump(2);
  if (!o.out.empty()) write_text(o.out, text + "\n");
  log << text << "\n";
  return kExitOk;
}

int cmd_sample(const SampleOptions& o, std::ostream& log) {
  if (o.fixed_z == 0) throw ConfigError({"--fixed-z must be at least 1"});
  if (o.n % o.fixed_z != 0) throw ConfigError({"--n must be a multiple of --fixed-z"});
  const Checkpoint ckpt = read_checkpoint(o.ckpt);
  RunConfig cfg;
  const models::Model model = model_from_checkpoint(ckpt, &cfg);
  const std::uint64_t seed = o.seed ? *o.seed : cfg.seed;
  const auto s = models::sample_prior(model, o.n / o.fixed_z, o.fixed_z, o.burn_in.value_or(cfg.sample_burn_in),
                                      derive_seed({seed, 0x5a}));
  const std::size_t D = model.spec().pixels;
  auto side = static_cast<std::size_t>(std::lround(std::sqrt(static_cast<double>(D))));
  std::size_t h = side, w = side;
  if (side * side != D) {
    h = 1;
    w = D;
  }
  std::size_t cols = o.fixed_z > 1 ? o.fixed_z : static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(o.n))));
  std::size_t rows = o.n == 0 ? 0 : (o.n + cols - 1) / cols;
  if (o.n == 0) cols = 0;
  const std::size_t W = cols * w, H = rows * h;
  std::string pgm = "P5\n# odvae samples config_hash " + cfg.hash() + "\n" + std::to_string(W) + " " + std::to_string(H) + "\n255\n";
  std::string body(W * H, '\0');
  for (std::size_t i = 0; i < o.n; ++i) {
    const std::size_t gr = i / cols, gc = i % cols;
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x) {
        const double p = s.pixels[i * D + y * w + x];
        body[(gr * h + y) * W + gc * w + x] = static_cast<char>(static_cast<unsigned char>(std::lround(255.0 * p)));
      }
  }
  write_text(o.out + ".pgm", pgm + body);

  std::ostringstream csv;
  csv << "# config_hash " << cfg.hash() << "\n";
  csv << "sample,z_group";
  for (std::size_t d = 0; d < D; ++d) csv << ",p" << d;
  csv << "\n";
  for (std::size_t i = 0; i < o.n; ++i) {
    csv << i << "," << i / o.fixed_z;
    for (std::size_t d = 0; d < D; ++d) csv << "," << fmt(s.pixels[i * D + d]);
    csv << "\n";
  }
  write_text(o.out + ".csv", csv.str());
  log << "wrote " << o.out << ".pgm (" << W << "x" << H << ") and " << o.out << ".csv\n";
  return kExitOk;
}

int cmd_curves(const CurvesOptions& o, std::ostream& log) {
  if (o.q_steps < 2) throw ConfigError({"--q-steps must be at least 2"});
  std::vector<std::string> problems;
  for (const auto& k : o.kinds)
    if (k != "exp" && k != "spike" && k != "logistic" && k != "concrete") problems.push_back("unknown kind '" + k + "'");
  for (double r : o.rhos)
    if (!(r > 0 && r < 1)) problems.push_back("rho " + fmt(r) + " must lie in (0, 1)");
  if (!problems.empty()) throw ConfigError(problems);

  std::ostringstream args;
  for (const auto& k : o.kinds) args << k << ";";
  for (const auto* list : {&o.betas, &o.lambdas, &o.scales, &o.rhos}) {
    for (double v : *list) args << fmt(v) << ",";
    args << ";";
  }
  args << o.q_steps;

  std::ostringstream csv;
  csv << "# config_hash " << fnv1a_hex(args.str()) << "\n";
  csv << "kind,param,q,rho,zeta\n";
  for (const auto& name : o.kinds) {
    const auto& params = name == "exp" || name == "spike" ? o.betas : name == "concrete" ? o.lambdas : o.scales;
    for (double p : params) {
      smoothing::SmoothingKind kind;
      if (name == "exp") kind = smoothing::ExpMixture{p};
      else if (name == "spike") kind = smoothing::SpikeExp{p};
      else if (name == "concrete") kind = smoothing::BinaryConcrete{p};
      else kind = smoothing::LogisticMixture{0.0, 1.0, p};
      try {
        smoothing::validate(kind);
      } catch (const std::invalid_argument& e) {
        throw ConfigError({name + " " + fmt(p) + ": " + e.what()});
      }
      for (double rho : o.rhos)
        for (std::size_t i = 0; i < o.q_steps; ++i) {
          const double q = static_cast<double>(i) / static_cast<double>(o.q_steps - 1);
          csv << name << "," << fmt(p) << "," << fmt(q) << "," << fmt(rho) << "," << fmt(smoothing::inverse_cdf(kind, q, rho)) << "\n";
        }
    }
  }
  if (o.out.empty()) log << csv.str();
  else {
    write_text(o.out, csv.str());
    log << "wrote " << o.out << "\n";
  }
  return kExitOk;
}

int cmd_logz(const LogzOptions& o, std::ostream& log) {
  const Checkpoint c = read_checkpoint(o.params);
  auto pick = [&](const std::string& name) -> Tensor {
    if (c.has("param/prior/" + name)) return c.get("param/prior/" + name);
    if (c.has(name)) return c.get(name);
    throw ConfigError({o.params + ": no RBM parameter '" + name + "' (expected prior/" + name + " or " + name + ")"});
  };
  rbm::RbmParams p{pick("a1"), pick("a2"), pick("W")};
  p.validate();

  rbm::PtConfig pc;
  pc.temperatures = o.temperatures;
  pc.min_beta = o.min_beta;
  pc.sweeps = o.sweeps;
  pc.burn_in = std::max<std::size_t>(o.sweeps / 20, 1);
  pc.replicas = o.replicas;
  pc.workers = o.workers;
  pc.seed = o.seed;
  pc.adapt = o.adapt;
  rbm::PtResult r;
  try {
    r = rbm::pt_log_z(p, pc);
  } catch (const std::invalid_argument& e) {
    throw ConfigError({std::string("ladder: ") + e.what()});
  }

  std::ostringstream settings;
  settings << fmt(o.min_beta) << ";" << o.temperatures << ";" << o.sweeps << ";" << o.replicas << ";" << o.seed << ";" << o.adapt;
  json j;
  j["schema"] = kMetricsSchema;
  j["command"] = "logz";
  const auto bytes = serialize(c);
  j["config_hash"] = fnv1a_hex(std::string(bytes.data(), bytes.size()) + settings.str());
  j["n1"] = p.n1();
  j["n2"] = p.n2();
  j["estimate"] = r.log_z;
  j["se"] = r.se;
  j["sweeps"] = r.sweeps;
  j["replicas"] = r.replicas;
  j["betas"] = r.betas;
  j["swap_rates"] = r.swap_rates;
  j["mean_energy"] = r.mean_energy;
  if (p.n1() + p.n2() <= rbm::kMaxExactUnits) {
    const double exact = rbm::exact_log_z(p);
    j["exact"] = exact;
    j["gap"] = r.log_z - exact;
  } else {
    j["exact"] = nullptr;
    j["gap"] = nullptr;
  }
  if (!o.diagnostics.empty()) write_text(o.diagnostics, rbm::pt_diagnostics_csv(r));
  const std::string text = j.dump(2);
  if (!o.out.empty()) write_text(o.out, text + "\n");
  log << text << "\n";
  return kExitOk;
}

}  // namespace odvae
