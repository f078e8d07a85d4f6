#include "odvae/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

namespace odvae {

namespace {

std::string join_problems(const std::vector<std::string>& p) {
  std::string s = "invalid configuration:";
  for (const auto& x : p) s += "\n  " + x;
  return s;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double to_double(const std::string& v) {
  double out = 0;
  const auto* end = v.data() + v.size();
  const auto r = std::from_chars(v.data(), end, out);
  if (r.ec != std::errc() || r.ptr != end) throw std::invalid_argument("expected a number, got '" + v + "'");
  return out;
}

std::uint64_t to_uint(const std::string& v) {
  std::uint64_t out = 0;
  const auto* end = v.data() + v.size();
  const auto r = std::from_chars(v.data(), end, out);
  if (r.ec != std::errc() || r.ptr != end) throw std::invalid_argument("expected a non-negative integer, got '" + v + "'");
  return out;
}

bool to_bool(const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw std::invalid_argument("expected true or false, got '" + v + "'");
}

struct Entry {
  std::string section, key;
  std::function<void(const std::string&)> set;
  std::function<std::string()> get;
};

template <typename T>
Entry number(const char* sec, const char* key, T& field) {
  return {sec, key,
          [&field](const std::string& v) {
            if constexpr (std::is_floating_point_v<T>) field = to_double(v);
            else field = static_cast<T>(to_uint(v));
          },
          [&field] {
            if constexpr (std::is_floating_point_v<T>) return fmt(field);
            else return std::to_string(field);
          }};
}

Entry text(const char* sec, const char* key, std::string& field, std::set<std::string> allowed = {}) {
  return {sec, key,
          [&field, allowed](const std::string& v) {
            if (!allowed.empty() && !allowed.count(v)) {
              std::string list;
              for (const auto& a : allowed) list += (list.empty() ? "" : ", ") + a;
              throw std::invalid_argument("'" + v + "' is not one of " + list);
            }
            field = v;
          },
          [&field] { return field; }};
}

Entry schedule(const char* sec, const char* key, optim::Schedule& field) {
  return {sec, key, [&field](const std::string& v) { field = optim::Schedule::parse(v); },
          [&field] { return field.to_string(); }};
}

Entry flag(const char* sec, const char* key, bool& field) {
  return {sec, key, [&field](const std::string& v) { field = to_bool(v); },
          [&field] { return std::string(field ? "true" : "false"); }};
}

std::vector<Entry> entries(RunConfig& c) {
  using models::Arch;
  return {
      {"model", "arch", [&c](const std::string& v) { c.arch = models::parse_arch(v); },
       [&c] { return models::to_string(c.arch); }},
      {"model", "groups",
       [&c](const std::string& v) {
         std::vector<std::size_t> g;
         std::istringstream in(v);
         std::string item;
         while (std::getline(in, item, ',')) {
           const auto a = item.find_first_not_of(' '), b = item.find_last_not_of(' ');
           g.push_back(to_uint(a == std::string::npos ? "" : item.substr(a, b - a + 1)));
         }
         c.groups = g;
       },
       [&c] {
         std::string s;
         for (std::size_t i = 0; i < c.groups.size(); ++i) s += (i ? "," : "") + std::to_string(c.groups[i]);
         return s;
       }},
      {"model", "prior", [&c](const std::string& v) { c.prior = models::parse_prior(v); },
       [&c] { return models::to_string(c.prior); }},
      number("model", "hidden", c.hidden),
      number("model", "hidden_layers", c.hidden_layers),
      flag("model", "output_bias", c.output_bias),
      text("smoothing", "kind", c.smoothing, {"exp", "logistic", "spike", "concrete"}),
      schedule("smoothing", "beta", c.beta),
      number("smoothing", "lambda", c.lambda),
      number("smoothing", "mu0", c.mu0),
      number("smoothing", "mu1", c.mu1),
      number("smoothing", "s", c.s),
      text("smoothing", "bound", c.bound, {"joint", "marginal"}),
      {"smoothing", "cross_term",
       [&c](const std::string& v) {
         if (v == "nu") c.cross_term = bounds::CrossTerm::Nu;
         else if (v == "mu") c.cross_term = bounds::CrossTerm::Mu;
         else throw std::invalid_argument("'" + v + "' is not one of mu, nu");
       },
       [&c] { return std::string(c.cross_term == bounds::CrossTerm::Nu ? "nu" : "mu"); }},
      {"optim", "method", [&c](const std::string& v) { c.optimizer.method = optim::parse_method(v); },
       [&c] { return optim::to_string(c.optimizer.method); }},
      schedule("optim", "lr", c.lr),
      number("optim", "beta1", c.optimizer.beta1),
      number("optim", "beta2", c.optimizer.beta2),
      number("optim", "eps", c.optimizer.eps),
      number("optim", "max_norm", c.optimizer.max_norm),
      number("optim", "scale", c.scale),
      schedule("kl", "gamma", c.gamma),
      flag("kl", "balance", c.kl_balance),
      number("kl", "epsilon", c.kl_epsilon),
      number("pcd", "chains", c.pcd_chains),
      number("pcd", "sweeps", c.pcd_sweeps),
      text("data", "source", c.source, {"bars", "mnist"}),
      text("data", "dir", c.data_dir),
      {"data", "binarization", [&c](const std::string& v) { c.binarization = data::parse_binarization(v); },
       [&c] { return data::to_string(c.binarization); }},
      text("data", "obin_train", c.obin_train),
      text("data", "obin_test", c.obin_test),
      number("data", "valid", c.valid),
      number("data", "bars_size", c.bars_size),
      number("data", "bars_noise", c.bars_noise),
      number("data", "bars_train", c.bars_train),
      number("data", "bars_test", c.bars_test),
      number("train", "batch", c.batch),
      number("train", "iterations", c.iterations),
      number("train", "seed", c.seed),
      number("train", "log_every", c.log_every),
      number("train", "checkpoint_every", c.checkpoint_every),
      number("eval", "k", c.eval_k),
      number("eval", "batch", c.eval_batch),
      number("eval", "pt_sweeps", c.pt_sweeps),
      number("eval", "pt_temperatures", c.pt_temperatures),
      number("eval", "pt_replicas", c.pt_replicas),
      number("eval", "sample_burn_in", c.sample_burn_in),
  };
}

void check(const RunConfig& c, std::vector<std::string>& problems) {
  auto need = [&](bool ok, const std::string& msg) {
    if (!ok) problems.push_back(msg);
  };
  try {
    c.model_spec(c.source == "bars" ? c.bars_size * c.bars_size : 784).validate();
  } catch (const std::exception& e) {
    problems.push_back(std::string("[model] ") + e.what());
  }
  need(c.batch > 0, "[train] batch must be positive");
  need(c.log_every > 0, "[train] log_every must be positive");
  need(c.eval_k > 0, "[eval] k must be at least 1");
  need(c.eval_batch > 0, "[eval] batch must be positive");
  need(c.pt_temperatures >= 2, "[eval] pt_temperatures must be at least 2");
  need(c.pt_sweeps > 0 && c.pt_replicas > 0, "[eval] pt_sweeps and pt_replicas must be positive");
  need(c.scale > 0, "[optim] scale must be positive");
  need(c.kl_epsilon > 0, "[kl] epsilon must be positive");
  need(c.prior != models::PriorKind::Rbm || (c.pcd_chains > 0 && c.pcd_sweeps > 0),
       "[pcd] chains and sweeps must be positive with an rbm prior");
  need(c.bound != "marginal" || c.smoothing == "exp" || c.smoothing == "logistic",
       "[smoothing] the marginal bound needs an overlapping smoothing (exp or logistic)");
  need(c.source != "mnist" || !c.data_dir.empty() || c.binarization == data::Binarization::File,
       "[data] dir is required for the mnist source");
  need(c.binarization != data::Binarization::File || (!c.obin_train.empty() && !c.obin_test.empty()),
       "[data] file binarization needs obin_train and obin_test");
  need(c.source != "bars" || c.binarization != data::Binarization::File, "[data] bars data cannot use file binarization");
  need(c.source != "bars" || c.bars_size >= 4, "[data] bars_size must be at least 4");
  need(c.bars_noise >= 0 && c.bars_noise <= 1, "[data] bars_noise must lie in [0, 1]");
}

}  // namespace

ConfigError::ConfigError(std::vector<std::string> problems)
    : std::runtime_error(join_problems(problems)), problems_(std::move(problems)) {}

std::string RunConfig::to_text() const {
  RunConfig copy = *this;
  std::string out, section;
  for (const auto& e : entries(copy)) {
    if (e.section != section) {
      out += (out.empty() ? "[" : "\n[") + e.section + "]\n";
      section = e.section;
    }
    out += e.key + " = " + e.get() + "\n";
  }
  return out;
}

std::string RunConfig::hash() const { return fnv1a_hex(to_text()); }

smoothing::SmoothingKind RunConfig::smoothing_at(std::uint64_t step) const {
  const double b = scaled(beta).eval(step);
  if (smoothing == "exp") return smoothing::ExpMixture{b};
  if (smoothing == "spike") return smoothing::SpikeExp{b};
  if (smoothing == "logistic") return smoothing::LogisticMixture{mu0, mu1, s};
  return smoothing::BinaryConcrete{lambda};
}

models::ModelSpec RunConfig::model_spec(std::size_t pixels) const {
  models::ModelSpec m;
  m.arch = arch;
  m.groups = groups;
  m.prior = prior;
  m.smoothing = smoothing_at(0);
  m.pixels = pixels;
  m.hidden = hidden;
  m.hidden_layers = hidden_layers;
  return m;
}

RunConfig parse_config(const std::string& text) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    std::istringstream in(text);
    pt::ini_parser::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError({std::string("syntax: ") + e.what()});
  }
  RunConfig c;
  std::vector<std::string> problems;
  auto table = entries(c);
  for (const auto& [section, body] : tree) {
    if (body.empty() && !body.data().empty()) {
      problems.push_back("key '" + section + "' must live inside a [section]");
      continue;
    }
    for (const auto& [key, value] : body) {
      const std::string where = "[" + section + "] " + key;
      Entry* hit = nullptr;
      for (auto& e : table)
        if (e.section == section && e.key == key) hit = &e;
      if (!hit) {
        problems.push_back(where + ": unknown key");
        continue;
      }
      try {
        hit->set(value.data());
      } catch (const std::exception& e) {
        problems.push_back(where + ": " + e.what());
      }
    }
  }
  check(c, problems);
  if (!problems.empty()) throw ConfigError(problems);
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError({"cannot open config file '" + path + "'"});
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char ch : bytes) {
    h ^= ch;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace odvae
