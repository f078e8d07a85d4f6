#include <CLI11.hpp>

#include <iostream>

#include "odvae/commands.hpp"
#include "odvae/config.hpp"

int main(int argc, char** argv) {
  using namespace odvae;
  CLI::App app{"Discrete VAEs with overlapping smoothing and RBM priors"};
  app.require_subcommand(1);

  TrainOptions train;
  std::uint64_t train_seed = 0;
  auto* t = app.add_subcommand("train", "Train a model from a config file");
  t->add_option("--config", train.config, "Config file");
  auto* seed_opt = t->add_option("--seed", train_seed, "Override [train] seed");
  t->add_option("--out", train.out, "Output directory")->required();
  t->add_option("--resume", train.resume, "Continue from a checkpoint (its embedded config is used)");
  t->add_flag("--quiet", train.quiet, "Only write files");
  t->add_option("--workers", train.workers, "Threads for PCD chains");

  EvalOptions eval;
  std::uint64_t eval_seed = 0;
  auto* e = app.add_subcommand("eval", "Importance-weighted log-likelihood in the binary limit");
  e->add_option("--ckpt", eval.ckpt, "Checkpoint")->required();
  e->add_option("--k", eval.k, "Importance samples (default: config [eval] k)");
  auto* eval_seed_opt = e->add_option("--seed", eval_seed, "Sampling seed");
  e->add_option("--out", eval.out, "Write the JSON report here");
  e->add_option("--split", eval.split, "test, valid or train");
  e->add_option("--workers", eval.workers, "Threads for parallel tempering");
  e->add_flag("--exact-logz", eval.exact_log_z, "Use enumeration for log Z when the RBM is small enough");

  SampleOptions sample;
  std::uint64_t sample_seed = 0;
  std::size_t burn_in = 0;
  auto* s = app.add_subcommand("sample", "Draw images from the prior");
  s->add_option("--ckpt", sample.ckpt, "Checkpoint")->required();
  s->add_option("--n", sample.n, "Number of images");
  s->add_option("--fixed-z", sample.fixed_z, "Consecutive images sharing one z");
  s->add_option("--out", sample.out, "Output prefix (writes .pgm and .csv)");
  auto* sample_seed_opt = s->add_option("--seed", sample_seed, "Sampling seed");
  auto* burn_opt = s->add_option("--burn-in", burn_in, "Gibbs sweeps before sampling an RBM prior");

  CurvesOptions curves;
  auto* c = app.add_subcommand("curves", "Inverse-CDF curves as CSV");
  c->add_option("--kinds", curves.kinds, "exp, spike, logistic, concrete")->delimiter(',');
  c->add_option("--betas", curves.betas, "Sharpness values for exp and spike")->delimiter(',');
  c->add_option("--lambdas", curves.lambdas, "Concrete temperatures")->delimiter(',');
  c->add_option("--scales", curves.scales, "Logistic scales")->delimiter(',');
  c->add_option("--rhos", curves.rhos, "Uniform draws")->delimiter(',');
  c->add_option("--q-steps", curves.q_steps, "Grid points over q in [0, 1]");
  c->add_option("--out", curves.out, "CSV path (stdout when omitted)");

  LogzOptions logz;
  auto* l = app.add_subcommand("logz", "Estimate an RBM's log partition function");
  l->add_option("--params", logz.params, "Checkpoint with the RBM parameters")->required();
  l->add_option("--sweeps", logz.sweeps, "Sweeps per replica");
  l->add_option("--temperatures", logz.temperatures, "Ladder size including beta = 0");
  l->add_option("--min-beta", logz.min_beta, "Smallest nonzero inverse temperature");
  l->add_option("--replicas", logz.replicas, "Independent replicas");
  l->add_option("--workers", logz.workers, "Worker threads");
  l->add_option("--seed", logz.seed, "Seed");
  l->add_flag("--adapt", logz.adapt, "Insert temperatures where swap rates are low");
  l->add_option("--diagnostics", logz.diagnostics, "Per-temperature CSV");
  l->add_option("--out", logz.out, "Write the JSON report here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? 0 : kExitConfig;
  }

  return run_guarded(
      [&] {
        if (*t) {
          if (train.config.empty() && train.resume.empty()) throw ConfigError({"train needs --config or --resume"});
          if (*seed_opt) train.seed = train_seed;
          return cmd_train(train, std::cout);
        }
        if (*e) {
          if (*eval_seed_opt) eval.seed = eval_seed;
          return cmd_eval(eval, std::cout);
        }
        if (*s) {
          if (*sample_seed_opt) sample.seed = sample_seed;
          if (*burn_opt) sample.burn_in = burn_in;
          return cmd_sample(sample, std::cout);
        }
        if (*c) return cmd_curves(curves, std::cout);
        return cmd_logz(logz, std::cout);
      },
      std::cerr);
}
