// Command implementations behind the odvae executable. Each returns a process
// exit code; run_guarded maps exceptions to codes.
#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace odvae {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitNumeric = 3;
inline constexpr int kMetricsSchema = 1;

// ConfigError -> 2, NumericError -> 3, anything else -> 1. Messages go to err.
int run_guarded(const std::function<int()>& body, std::ostream& err);

struct TrainOptions {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string resume;  // checkpoint to continue from
  bool quiet = false;
  std::size_t workers = 1;
};
// Writes DIR/config.ini, DIR/metrics.jsonl and DIR/checkpoint.bin.
int cmd_train(const TrainOptions& o, std::ostream& log);

struct EvalOptions {
  std::string ckpt;
  std::size_t k = 0;  // 0: use the config's [eval] k
  std::optional<std::uint64_t> seed;
  std::string out;          // JSON report path, optional
  bool exact_log_z = false;  // use enumeration instead of PT when possible
  std::string split = "test";  // test | valid | train
  std::size_t workers = 1;
};
int cmd_eval(const EvalOptions& o, std::ostream& log);

struct SampleOptions {
  std::string ckpt;
  std::size_t n = 25;
  std::size_t fixed_z = 1;  // consecutive samples sharing one z
  std::string out = "samples";  // writes OUT.pgm and OUT.csv
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> burn_in;
};
int cmd_sample(const SampleOptions& o, std::ostream& log);

struct CurvesOptions {
  std::vector<std::string> kinds{"exp", "spike", "logistic", "concrete"};
  std::vector<double> betas{5, 8, 10};
  std::vector<double> lambdas{0.5};
  std::vector<double> scales{0.1};  // logistic s
  std::vector<double> rhos{0.25, 0.5};
  std::size_t q_steps = 101;
  std::string out;
};
int cmd_curves(const CurvesOptions& o, std::ostream& log);

struct LogzOptions {
  std::string params;  // checkpoint holding prior/a1, prior/a2, prior/W (or a1, a2, W)
  std::size_t sweeps = 20000;
  std::size_t temperatures = 20;
  double min_beta = 0.01;
  std::size_t replicas = 4;
  std::size_t workers = 1;
  std::uint64_t seed = 1;
  bool adapt = false;
  std::string diagnostics;  // CSV path, optional
  std::string out;          // JSON report path, optional
};
int cmd_logz(const LogzOptions& o, std::ostream& log);

}  // namespace odvae
