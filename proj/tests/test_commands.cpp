#include <gtest/gtest.h>

#include <nlohmann/json.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "odvae/checkpoint.hpp"
#include "odvae/commands.hpp"
#include "odvae/config.hpp"
#include "odvae/rbm.hpp"
#include "odvae/train.hpp"

namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using namespace odvae;

fs::path scratch(const std::string& name) {
  const fs::path p = fs::path(testing::TempDir()) / ("odvae_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void spit(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

std::vector<json> jsonl(const fs::path& p) {
  std::vector<json> out;
  std::istringstream in(slurp(p));
  for (std::string line; std::getline(in, line);) out.push_back(json::parse(line));
  return out;
}

const char* kSmallFactorial = R"([model]
groups = 16
hidden = 32
[data]
bars_size = 6
bars_train = 300
bars_test = 100
[train]
batch = 50
iterations = 30
log_every = 5
[eval]
k = 20
)";

const char* kSmallRbm = R"([model]
groups = 4,4
prior = rbm
hidden = 32
[kl]
gamma = linear 0 1 20
[pcd]
chains = 20
sweeps = 5
[data]
bars_size = 6
bars_train = 300
bars_test = 100
[train]
batch = 50
iterations = 30
log_every = 5
[eval]
k = 20
pt_sweeps = 500
)";

std::string with(std::string text, const std::string& from, const std::string& to) {
  const auto pos = text.find(from);
  if (pos == std::string::npos) throw std::logic_error("missing '" + from + "'");
  return text.replace(pos, from.size(), to);
}

fs::path write_config(const fs::path& dir, const std::string& text) {
  const auto p = dir / "run.ini";
  spit(p, text);
  return p;
}

int train(const fs::path& cfg, const fs::path& out, std::size_t workers = 1) {
  std::ostringstream log;
  TrainOptions o;
  o.config = cfg.string();
  o.out = out.string();
  o.quiet = true;
  o.workers = workers;
  return cmd_train(o, log);
}

TEST(Train, ZeroIterationsWritesInitialCheckpointOnly) {
  const auto dir = scratch("zero_iter");
  const auto cfg = write_config(dir, with(kSmallFactorial, "iterations = 30", "iterations = 0"));
  ASSERT_EQ(train(cfg, dir / "out"), kExitOk);
  EXPECT_TRUE(fs::exists(dir / "out" / "checkpoint.bin"));
  EXPECT_TRUE(fs::exists(dir / "out" / "config.ini"));
  EXPECT_FALSE(fs::exists(dir / "out" / "metrics.jsonl"));
  const auto ck = read_checkpoint((dir / "out" / "checkpoint.bin").string());
  EXPECT_EQ(ck.get("train/step").item(), 0.0);
  EXPECT_EQ(ck.get("optim/t").item(), 0.0);
}

TEST(Train, MetricsLinesAreSelfDescribing) {
  const auto dir = scratch("metrics_schema");
  const auto cfg = write_config(dir, kSmallFactorial);
  ASSERT_EQ(train(cfg, dir / "out"), kExitOk);
  const auto lines = jsonl(dir / "out" / "metrics.jsonl");
  ASSERT_EQ(lines.size(), 7u);  // steps 0,5,...,25 and the last step 29
  const std::string hash = load_config(cfg.string()).hash();
  for (const auto& j : lines) {
    EXPECT_EQ(j["schema"], kMetricsSchema);
    EXPECT_EQ(j["config_hash"], hash);
    for (const char* k : {"step", "loss", "elbo", "recon", "kl", "alpha", "beta", "gamma", "lr", "log_z"}) EXPECT_TRUE(j.contains(k)) << k;
  }
  EXPECT_EQ(lines.back()["step"], 29);
  EXPECT_EQ(slurp(dir / "out" / "config.ini"), load_config(cfg.string()).to_text());
}

TEST(Train, KlBalancingCoefficientsSumToGroupCount) {
  const auto dir = scratch("alpha_sum");
  const auto cfg = write_config(dir, with(kSmallFactorial, "groups = 16", "groups = 8,8") + "[kl]\ngamma = linear 0 1 20\n");
  ASSERT_EQ(train(cfg, dir / "out"), kExitOk);
  for (const auto& j : jsonl(dir / "out" / "metrics.jsonl")) {
    const auto alpha = j["alpha"].get<std::vector<double>>();
    ASSERT_EQ(alpha.size(), 2u);
    EXPECT_NEAR(alpha[0] + alpha[1], 2.0, 1e-12);
    if (j["gamma"].get<double>() >= 1.0) {
      EXPECT_EQ(alpha[0], 1.0);
      EXPECT_EQ(alpha[1], 1.0);
    }
  }
}

TEST(Train, TwoRunsGiveIdenticalMetrics) {
  for (const char* text : {kSmallFactorial, kSmallRbm}) {
    const auto dir = scratch("determinism");
    const auto cfg = write_config(dir, text);
    ASSERT_EQ(train(cfg, dir / "a", 1), kExitOk);
    ASSERT_EQ(train(cfg, dir / "b", 1), kExitOk);
    ASSERT_EQ(train(cfg, dir / "c", 3), kExitOk);
    const auto a = slurp(dir / "a" / "metrics.jsonl");
    EXPECT_FALSE(a.empty());
    EXPECT_EQ(a, slurp(dir / "b" / "metrics.jsonl"));
    EXPECT_EQ(a, slurp(dir / "c" / "metrics.jsonl"));
    EXPECT_EQ(slurp(dir / "a" / "checkpoint.bin"), slurp(dir / "c" / "checkpoint.bin"));
  }
}

TEST(Train, SeedOverrideChangesRun) {
  const auto dir = scratch("seed_override");
  const auto cfg = write_config(dir, kSmallFactorial);
  ASSERT_EQ(train(cfg, dir / "a"), kExitOk);
  TrainOptions o;
  o.config = cfg.string();
  o.out = (dir / "b").string();
  o.quiet = true;
  o.seed = 77;
  std::ostringstream log;
  ASSERT_EQ(cmd_train(o, log), kExitOk);
  EXPECT_NE(slurp(dir / "a" / "metrics.jsonl"), slurp(dir / "b" / "metrics.jsonl"));
  EXPECT_EQ(load_config((dir / "b" / "config.ini").string()).seed, 77u);
}

TEST(Train, ResumeIsBitIdentical) {
  for (const char* text : {kSmallFactorial, kSmallRbm}) {
    const auto dir = scratch("resume");
    const auto cfg = write_config(dir, text);
    ASSERT_EQ(train(cfg, dir / "straight"), kExitOk);

    spit(dir / "half.ini", with(text, "iterations = 30", "iterations = 13"));
    ASSERT_EQ(train(dir / "half.ini", dir / "split"), kExitOk);

    // Continue the 13-step checkpoint under the full budget.
    auto ck = read_checkpoint((dir / "split" / "checkpoint.bin").string());
    ck.config = load_config(cfg.string()).to_text();
    write_checkpoint((dir / "split" / "checkpoint.bin").string(), ck);
    TrainOptions o;
    o.resume = (dir / "split" / "checkpoint.bin").string();
    o.out = (dir / "split").string();
    o.quiet = true;
    std::ostringstream log;
    ASSERT_EQ(cmd_train(o, log), kExitOk);

    EXPECT_EQ(slurp(dir / "straight" / "checkpoint.bin"), slurp(dir / "split" / "checkpoint.bin"));
    const auto a = jsonl(dir / "straight" / "metrics.jsonl");
    const auto b = jsonl(dir / "split" / "metrics.jsonl");
    // The split run logged step 12 as its last step under the short budget.
    std::vector<json> b_main;
    for (const auto& j : b)
      if (j["step"] != 12) b_main.push_back(j);
    ASSERT_EQ(a.size(), b_main.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      auto x = a[i], y = b_main[i];
      x.erase("config_hash");
      y.erase("config_hash");
      EXPECT_EQ(x.dump(), y.dump()) << i;
    }
  }
}

TEST(Train, SmokeRunImprovesElbo) {
  const auto dir = scratch("smoke");
  const auto cfg = write_config(dir, R"([model]
hidden = 64
groups = 32
[optim]
lr = constant 3e-3
[train]
iterations = 2000
log_every = 100
)");
  ASSERT_EQ(train(cfg, dir / "out"), kExitOk);
  const auto lines = jsonl(dir / "out" / "metrics.jsonl");
  ASSERT_GE(lines.size(), 2u);
  const double first = lines.front()["elbo"], last = lines.back()["elbo"];
  EXPECT_GT(last, first + 5.0) << first << " -> " << last;
}

TEST(Train, ReconstructionImprovesOnOverfitSet) {
  RunConfig cfg = parse_config("[model]\nhidden = 64\ngroups = 32\n[optim]\nlr = constant 1e-3\n[train]\nbatch = 100\n");
  auto all = data::synthetic_bars(100, 8, 0.05, 3);
  data::Splits s{all, data::Dataset{0, all.dim, {}, {}, all.mode, all.seed}, all};
  Trainer t(cfg, s);
  std::vector<std::size_t> idx(100);
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  const Tensor x = all.rows(idx, 0);
  Rng rng(99);
  const auto noise = models::draw_noise(t.model().spec(), 100, rng);
  auto recon = [&] {
    Tape tape;
    const auto p = t.model().attach(tape);
    const auto f = models::forward(t.model(), p, x, noise, cfg.smoothing_at(0));
    return bounds::joint_elbo(f).mean_reconstruction();
  };
  double prev = recon();
  for (int block = 0; block < 10; ++block) {
    for (int i = 0; i < 10; ++i) t.step();
    const double r = recon();
    EXPECT_GT(r, prev) << "after " << (block + 1) * 10 << " steps";
    prev = r;
  }
}

TEST(Train, NonFiniteLossExitsThreeAndKeepsCheckpoint) {
  const auto dir = scratch("nan");
  const std::string text = with(kSmallFactorial, "log_every = 5", "log_every = 5\ncheckpoint_every = 1");
  const auto cfg = write_config(dir, with(text, "iterations = 30", "iterations = 50") +
                                         "[optim]\nlr = constant 1e200\neps = 1e-300\n");
  std::ostringstream err;
  const int code = run_guarded([&] { return train(cfg, dir / "out"); }, err);
  EXPECT_EQ(code, kExitNumeric) << err.str();
  const auto ck = read_checkpoint((dir / "out" / "checkpoint.bin").string());
  for (const auto& [name, t] : ck.records)
    if (name.rfind("param/", 0) == 0)
      for (double v : t.data()) ASSERT_TRUE(std::isfinite(v)) << name;
}

TEST(Train, BadConfigExitsTwo) {
  const auto dir = scratch("badcfg");
  const auto cfg = write_config(dir, "[train]\nbatch = 0\nunknown = 1\n");
  std::ostringstream err;
  EXPECT_EQ(run_guarded([&] { return train(cfg, dir / "out"); }, err), kExitConfig);
  EXPECT_NE(err.str().find("batch"), std::string::npos);
  EXPECT_NE(err.str().find("unknown"), std::string::npos);
  std::ostringstream err2;
  EXPECT_EQ(run_guarded([&] { return train(dir / "missing.ini", dir / "out"); }, err2), kExitConfig);
}

class Trained : public testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new fs::path(scratch("trained"));
    const auto cfg = write_config(*dir_, kSmallRbm);
    ASSERT_EQ(train(cfg, *dir_ / "rbm"), kExitOk);
    spit(*dir_ / "f.ini", kSmallFactorial);
    ASSERT_EQ(train(*dir_ / "f.ini", *dir_ / "fact"), kExitOk);
  }
  static void TearDownTestSuite() { delete dir_; }
  static fs::path ckpt(const char* run) { return *dir_ / run / "checkpoint.bin"; }
  static fs::path* dir_;
};
fs::path* Trained::dir_ = nullptr;

TEST_F(Trained, EvalWithOneSampleEqualsMeanDiscreteElbo) {
  EvalOptions o;
  o.ckpt = ckpt("fact").string();
  o.k = 1;
  o.seed = 4;
  o.out = (*dir_ / "eval.json").string();
  std::ostringstream log;
  ASSERT_EQ(cmd_eval(o, log), kExitOk);
  const json j = json::parse(slurp(o.out));

  RunConfig cfg;
  const auto ck = read_checkpoint(o.ckpt);
  const auto m = model_from_checkpoint(ck, &cfg);
  const auto test = load_data(cfg).test;
  double sum = 0;
  for (std::size_t start = 0, chunk = 0; start < test.count; start += cfg.eval_batch, ++chunk) {
    std::vector<std::size_t> idx;
    for (std::size_t i = start; i < std::min(test.count, start + cfg.eval_batch); ++i) idx.push_back(i);
    Rng rng(derive_seed({derive_seed({derive_seed({4, 0xe7a1}), chunk}), 0}));
    const auto w = models::discrete_log_weights(m, test.rows(idx, 0), rng, 0.0);
    for (double v : w) sum += v;
  }
  EXPECT_NEAR(j["mean_ll"].get<double>(), sum / static_cast<double>(test.count), 1e-9);
  EXPECT_EQ(j["k"], 1);
  EXPECT_EQ(j["config_hash"], cfg.hash());
  EXPECT_TRUE(j["log_z"].is_null());
}

TEST_F(Trained, EvalReportForRbmPrior) {
  EvalOptions o;
  o.ckpt = ckpt("rbm").string();
  o.out = (*dir_ / "eval_rbm.json").string();
  std::ostringstream log;
  ASSERT_EQ(cmd_eval(o, log), kExitOk);
  const json j = json::parse(slurp(o.out));
  EXPECT_EQ(j["k"], 20);
  EXPECT_EQ(j["n"], 100);
  EXPECT_EQ(j["log_z"]["method"], "pt");
  EXPECT_NEAR(j["log_z"]["estimate"].get<double>(), j["log_z"]["exact"].get<double>(), 0.05);
  EXPECT_GT(j["se"].get<double>(), 0.0);
  EXPECT_LT(j["mean_ll"].get<double>(), 0.0);

  std::ostringstream again;
  o.out.clear();
  o.workers = 4;
  ASSERT_EQ(cmd_eval(o, again), kExitOk);
  EXPECT_EQ(json::parse(again.str()).dump(), j.dump());

  o.split = "valid";
  std::ostringstream err;
  EXPECT_EQ(run_guarded([&] { return cmd_eval(o, log); }, err), kExitConfig);
}

TEST_F(Trained, SampleCountZeroGivesValidHeader) {
  SampleOptions o;
  o.ckpt = ckpt("rbm").string();
  o.n = 0;
  o.out = (*dir_ / "empty").string();
  std::ostringstream log;
  ASSERT_EQ(cmd_sample(o, log), kExitOk);
  const std::string pgm = slurp(*dir_ / "empty.pgm");
  std::istringstream in(pgm);
  std::string magic, comment;
  std::getline(in, magic);
  std::getline(in, comment);
  std::size_t w = 1, h = 1, maxv = 0;
  in >> w >> h >> maxv;
  EXPECT_EQ(magic, "P5");
  EXPECT_EQ(comment.rfind("# ", 0), 0u);
  EXPECT_EQ(w, 0u);
  EXPECT_EQ(h, 0u);
  EXPECT_EQ(maxv, 255u);
  EXPECT_EQ(pgm.back(), '\n');
}

TEST_F(Trained, SampleIsDeterministicAndWellFormed) {
  SampleOptions o;
  o.ckpt = ckpt("rbm").string();
  o.n = 10;
  o.fixed_z = 5;
  o.seed = 3;
  o.burn_in = 50;
  std::ostringstream log;
  o.out = (*dir_ / "s1").string();
  ASSERT_EQ(cmd_sample(o, log), kExitOk);
  o.out = (*dir_ / "s2").string();
  ASSERT_EQ(cmd_sample(o, log), kExitOk);
  EXPECT_EQ(slurp(*dir_ / "s1.pgm"), slurp(*dir_ / "s2.pgm"));
  EXPECT_EQ(slurp(*dir_ / "s1.csv"), slurp(*dir_ / "s2.csv"));

  const std::string pgm = slurp(*dir_ / "s1.pgm");
  const std::string header = "\n30 12\n255\n";  // 5 columns x 2 rows of 6x6 images
  const auto pos = pgm.find(header);
  ASSERT_NE(pos, std::string::npos);
  EXPECT_EQ(pgm.size() - pos - header.size(), 30u * 12u);

  std::istringstream csv(slurp(*dir_ / "s1.csv"));
  std::string line;
  std::getline(csv, line);
  EXPECT_EQ(line.rfind("# config_hash ", 0), 0u);
  std::getline(csv, line);
  EXPECT_EQ(line.rfind("sample,z_group,p0,", 0), 0u);
  std::size_t rows = 0;
  while (std::getline(csv, line)) ++rows;
  EXPECT_EQ(rows, 10u);

  o.fixed_z = 3;
  std::ostringstream err;
  EXPECT_EQ(run_guarded([&] { return cmd_sample(o, log); }, err), kExitConfig);
}

TEST(Sample, RbmSamplesShareStructureWithinZGroups) {
  const auto dir = scratch("sample_groups");
  const auto cfg = write_config(dir, slurp(ODVAE_SOURCE_DIR "/configs/bars_rbm.ini"));
  ASSERT_EQ(train(cfg, dir / "out"), kExitOk);
  SampleOptions o;
  o.ckpt = (dir / "out" / "checkpoint.bin").string();
  o.n = 200;
  o.fixed_z = 5;
  o.out = (dir / "s").string();
  std::ostringstream log;
  ASSERT_EQ(cmd_sample(o, log), kExitOk);

  std::istringstream csv(slurp(dir / "s.csv"));
  std::string line;
  std::getline(csv, line);
  std::getline(csv, line);
  std::vector<std::vector<double>> rows;
  while (std::getline(csv, line)) {
    std::istringstream f(line);
    std::string cell;
    std::vector<double> r;
    std::getline(f, cell, ',');
    std::getline(f, cell, ',');
    while (std::getline(f, cell, ',')) r.push_back(std::stod(cell));
    rows.push_back(r);
  }
  ASSERT_EQ(rows.size(), 200u);
  const std::size_t D = rows[0].size(), groups = 40;
  double intra = 0, inter = 0;
  for (std::size_t d = 0; d < D; ++d) {
    std::vector<double> means(groups, 0.0);
    for (std::size_t g = 0; g < groups; ++g) {
      for (std::size_t i = 0; i < 5; ++i) means[g] += rows[g * 5 + i][d] / 5.0;
      for (std::size_t i = 0; i < 5; ++i) intra += std::pow(rows[g * 5 + i][d] - means[g], 2) / 4.0;
    }
    double grand = 0;
    for (double m : means) grand += m / groups;
    for (double m : means) inter += std::pow(m - grand, 2) / (groups - 1);
  }
  intra /= static_cast<double>(groups * D);
  inter /= static_cast<double>(D);
  EXPECT_LT(intra, inter) << "intra " << intra << " inter " << inter;
}

std::vector<std::vector<std::string>> csv_rows(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::vector<std::vector<std::string>> out;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> r;
    std::istringstream f(line);
    for (std::string c; std::getline(f, c, ',');) r.push_back(c);
    out.push_back(r);
  }
  return out;
}

TEST(Curves, ReferenceRows) {
  CurvesOptions o;
  o.kinds = {"exp", "spike"};
  o.betas = {8};
  o.rhos = {0.3, 0.5};
  o.q_steps = 3;
  std::ostringstream out;
  ASSERT_EQ(cmd_curves(o, out), kExitOk);
  const auto rows = csv_rows(out.str());
  ASSERT_EQ(rows[0], (std::vector<std::string>{"kind", "param", "q", "rho", "zeta"}));
  ASSERT_EQ(rows.size(), 1u + 2 * 2 * 3);
  bool saw_exp = false, saw_spike = false;
  for (const auto& r : rows) {
    if (r[0] == "exp" && r[2] == "0.5" && r[3] == "0.5") {
      EXPECT_NEAR(std::stod(r[4]), 0.5, 1e-12);
      saw_exp = true;
    }
    if (r[0] == "spike" && r[2] == "0.5" && r[3] == "0.29999999999999999") {
      EXPECT_EQ(std::stod(r[4]), 0.0);
      saw_spike = true;
    }
  }
  EXPECT_TRUE(saw_exp);
  EXPECT_TRUE(saw_spike);
}

TEST(Curves, MonotoneInQForAllKinds) {
  CurvesOptions o;
  o.q_steps = 201;
  std::ostringstream out;
  ASSERT_EQ(cmd_curves(o, out), kExitOk);
  const auto rows = csv_rows(out.str());
  std::size_t series = 0;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& r = rows[i];
    const double zeta = std::stod(r[4]);
    if (r[0] != "logistic") EXPECT_TRUE(zeta >= 0.0 && zeta <= 1.0) << r[0];
    if (r[2] == "0") {
      ++series;
      continue;
    }
    const auto& p = rows[i - 1];
    ASSERT_EQ(p[0] + p[1] + p[3], r[0] + r[1] + r[3]);
    EXPECT_GE(zeta, std::stod(p[4]) - 1e-12) << r[0] << " " << r[1] << " q " << r[2] << " rho " << r[3];
  }
  EXPECT_EQ(series, 2u * (3 + 3 + 1 + 1));
}

TEST(Curves, RejectsBadGrid) {
  std::ostringstream out, err;
  CurvesOptions o;
  o.kinds = {"exp", "gauss"};
  o.rhos = {0.5, 1.5};
  EXPECT_EQ(run_guarded([&] { return cmd_curves(o, out); }, err), kExitConfig);
  EXPECT_NE(err.str().find("gauss"), std::string::npos);
  EXPECT_NE(err.str().find("1.5"), std::string::npos);
}

fs::path rbm_params(const fs::path& dir, const rbm::RbmParams& p) {
  Checkpoint c;
  c.config = "";
  c.put("a1", p.a1);
  c.put("a2", p.a2);
  c.put("W", p.W);
  const auto path = dir / "rbm.bin";
  write_checkpoint(path.string(), c);
  return path;
}

json run_logz(LogzOptions o) {
  std::ostringstream out;
  EXPECT_EQ(cmd_logz(o, out), kExitOk);
  return json::parse(out.str());
}

TEST(Logz, ZeroParametersAreExact) {
  const auto dir = scratch("logz_zero");
  LogzOptions o;
  o.params = rbm_params(dir, {Tensor::zeros({8}), Tensor::zeros({8}), Tensor::zeros({8, 8})}).string();
  o.sweeps = 200;
  const auto j = run_logz(o);
  EXPECT_NEAR(j["estimate"].get<double>(), 16 * std::log(2.0), 1e-6);
  EXPECT_NEAR(j["exact"].get<double>(), 16 * std::log(2.0), 1e-12);
  EXPECT_LT(std::abs(j["gap"].get<double>()), 1e-6);
}

TEST(Logz, Random4x4WithinTolerance) {
  const auto dir = scratch("logz_random");
  Rng rng(2024);
  std::normal_distribution<double> n(0.0, 0.5);
  std::vector<double> w(16), a1(4), a2(4);
  for (auto& v : w) v = n(rng);
  for (auto& v : a1) v = n(rng);
  for (auto& v : a2) v = n(rng);
  LogzOptions o;
  o.params = rbm_params(dir, {Tensor({4}, a1), Tensor({4}, a2), Tensor({4, 4}, w)}).string();
  o.diagnostics = (dir / "diag.csv").string();
  const auto j = run_logz(o);
  EXPECT_LE(std::abs(j["gap"].get<double>()), 0.05);
  const auto rates = j["swap_rates"].get<std::vector<double>>();
  EXPECT_EQ(rates.size(), j["betas"].size() - 1);
  for (double r : rates) {
    EXPECT_GT(r, 0.0);
    EXPECT_LT(r, 1.0);
  }
  EXPECT_TRUE(fs::exists(o.diagnostics));

  o.workers = 3;
  EXPECT_EQ(run_logz(o)["estimate"], j["estimate"]);
}

TEST(Logz, ReadsTrainedCheckpointAndValidatesLadder) {
  const auto dir = scratch("logz_ckpt");
  spit(dir / "c.ini", kSmallRbm);
  ASSERT_EQ(train(dir / "c.ini", dir / "out"), kExitOk);
  LogzOptions o;
  o.params = (dir / "out" / "checkpoint.bin").string();
  o.sweeps = 1000;
  EXPECT_EQ(run_logz(o)["n1"], 4);
  o.temperatures = 1;
  std::ostringstream out, err;
  EXPECT_EQ(run_guarded([&] { return cmd_logz(o, out); }, err), kExitConfig);
  o.params = (dir / "out" / "config.ini").string();
  EXPECT_EQ(run_guarded([&] { return cmd_logz(o, out); }, err), kExitFailure);
}

}  // namespace
