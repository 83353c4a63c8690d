/* Copyright 2026 the distsketch authors
 * SPDX-License-Identifier: Apache-2.0
 */
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "distsketch/instances.hpp"
#include "distsketch/lowrank.hpp"
#include "distsketch/moments.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace distsketch;

namespace {

constexpr int kExitValidation = 2;  // bad flags, config or input data
constexpr int kExitProtocol = 3;    // fabric abort (isolation, round bound, estimator)
constexpr int kExitOracle = 4;      // verification against the oracle failed

// ---------------------------------------------------------------------------
// Config files: a flat JSON object whose keys mirror the long option names.
// Command-line flags win; unknown keys are validation errors.

class ConfigBinder {
 public:
  template <typename T>
  void bind(CLI::App* cmd, const std::string& key, T* slot) {
    entries_[key] = {cmd, [slot](const json& v) { return assign(v, slot); }};
  }

  void apply(const std::string& path, std::vector<std::string>& errors) const {
    if (path.empty()) return;
    json cfg;
    {
      std::ifstream in(path);
      if (!in) {
        errors.push_back("config: cannot open '" + path + "'");
        return;
      }
      try {
        in >> cfg;
      } catch (const json::exception& e) {
        errors.push_back("config: " + std::string(e.what()));
        return;
      }
    }
    if (!cfg.is_object()) {
      errors.push_back("config: top level must be a JSON object");
      return;
    }
    for (const auto& [key, value] : cfg.items()) {
      const auto it = entries_.find(key);
      if (it == entries_.end()) {
        errors.push_back("config: unknown key '" + key + "'");
        continue;
      }
      if (it->second.cmd->get_option("--" + key)->count() > 0) continue;  // flag wins
      if (!it->second.set(value))
        errors.push_back("config: key '" + key + "' has the wrong type");
    }
  }

 private:
  static bool assign(const json& v, std::string* slot) {
    if (!v.is_string()) return false;
    *slot = v.get<std::string>();
    return true;
  }
  static bool assign(const json& v, bool* slot) {
    if (!v.is_boolean()) return false;
    *slot = v.get<bool>();
    return true;
  }
  static bool assign(const json& v, double* slot) {
    if (!v.is_number()) return false;
    *slot = v.get<double>();
    return true;
  }
  template <typename T>
  static bool assign(const json& v, T* slot) {  // integral options
    if (!v.is_number_integer()) return false;
    *slot = v.get<T>();
    return true;
  }

  struct Entry {
    CLI::App* cmd;
    std::function<bool(const json&)> set;
  };
  std::map<std::string, Entry> entries_;
};

int fail_validation(const std::vector<std::string>& errors) {
  for (const auto& e : errors) std::cerr << "error: " << e << "\n";
  return kExitValidation;
}

void emit(const json& report, const std::string& out_path) {
  const std::string text = report.dump(2) + "\n";
  std::cout << text;
  if (!out_path.empty()) {
    std::ofstream out(out_path);
    if (!out) throw std::invalid_argument("cannot write report to '" + out_path + "'");
    out << text;
  }
}

// ---------------------------------------------------------------------------
// Data files: per-server CSV matrices named server_1.csv, server_2.csv, ...

std::vector<Matrix> load_server_csvs(const std::string& dir, std::vector<std::string>& errors) {
  std::vector<Matrix> blocks;
  for (int t = 1;; ++t) {
    const fs::path p = fs::path(dir) / ("server_" + std::to_string(t) + ".csv");
    if (!fs::exists(p)) break;
    try {
      blocks.push_back(load_matrix_csv(p.string()));
    } catch (const std::exception& e) {
      errors.push_back("data: " + p.string() + ": " + e.what());
      return {};
    }
  }
  if (blocks.empty()) errors.push_back("data: no server_*.csv files under '" + dir + "'");
  return blocks;
}

void write_server_csvs(const std::string& dir, const std::vector<Matrix>& blocks,
                       json& meta) {
  fs::create_directories(dir);
  json files = json::array();
  for (std::size_t t = 0; t < blocks.size(); ++t) {
    const std::string name = "server_" + std::to_string(t + 1) + ".csv";
    save_matrix_csv((fs::path(dir) / name).string(), blocks[t]);
    files.push_back(name);
  }
  meta["files"] = std::move(files);
  std::ofstream out(fs::path(dir) / "meta.json");
  if (!out) throw std::invalid_argument("cannot write meta.json under '" + dir + "'");
  out << meta.dump(2) << "\n";
}

// ---------------------------------------------------------------------------
// gen

struct GenParams {
  std::string kind, out, profile = "signal-plus-noise", config;
  int servers = 3, k = 2, rows = 2;
  std::int64_t n = 100, d = 40;
  double signal = 10.0, noise = 0.1, density = 0.2;
  std::uint64_t seed = 1;
};

std::string canonical_lowrank_profile(const std::string& p) {
  if (p == "signal-plus-noise" || p == "signal-noise") return "signal";
  if (p == "arbitrary-split" || p == "split") return "split";
  return "";
}

std::string canonical_moment_profile(const std::string& p) {
  if (p == "disjoint-support" || p == "disjoint") return "disjoint";
  if (p == "shared-heavy-hitter" || p == "heavy") return "heavy";
  if (p == "shared" || p == "uniform" || p == "constant") return p;
  return "";
}

int run_gen(const GenParams& p) {
  std::vector<std::string> errors;
  if (p.kind != "lowrank" && p.kind != "moments" && p.kind != "correlation")
    errors.push_back("gen: kind must be lowrank, moments or correlation");
  if (p.out.empty()) errors.push_back("gen: --out is required");
  if (p.servers < 1) errors.push_back("gen: servers must be >= 1");
  if (p.n < 1) errors.push_back("gen: n must be >= 1");
  std::string profile;
  if (p.kind == "lowrank") {
    profile = canonical_lowrank_profile(p.profile);
    if (profile.empty())
      errors.push_back("gen: lowrank profile must be signal-plus-noise or arbitrary-split");
    if (p.d < 1) errors.push_back("gen: d must be >= 1");
    if (p.k < 1 || p.k > std::min<std::int64_t>(p.n, p.d))
      errors.push_back("gen: k must be in [1, min(n, d)]");
    if (p.noise < 0.0) errors.push_back("gen: noise must be >= 0");
  } else if (p.kind == "moments") {
    profile = canonical_moment_profile(p.profile);
    if (profile.empty())
      errors.push_back(
          "gen: moments profile must be one of disjoint-support, shared, "
          "shared-heavy-hitter, uniform, constant");
  } else if (p.kind == "correlation") {
    if (p.rows < 1) errors.push_back("gen: rows must be >= 1");
    if (!(p.density >= 0.0) || p.density > 1.0)
      errors.push_back("gen: density must be in [0, 1]");
  }
  if (!errors.empty()) return fail_validation(errors);

  json meta = {{"kind", p.kind}, {"servers", p.servers}, {"n", p.n}, {"seed", p.seed}};
  std::vector<Matrix> blocks;
  if (p.kind == "lowrank") {
    const auto input = profile == "signal"
                           ? gen_lowrank_signal_noise(p.servers, p.n, p.d, p.k, p.signal,
                                                      p.noise, p.seed)
                           : gen_lowrank_split(p.servers, p.n, p.d, p.k, p.signal, p.noise,
                                               p.seed);
    blocks = input.blocks;
    meta["d"] = p.d;
    meta["k"] = p.k;
    meta["profile"] = p.profile;
    meta["signal"] = p.signal;
    meta["noise"] = p.noise;
  } else if (p.kind == "moments") {
    const auto input = gen_moment_vectors(p.servers, p.n, profile, p.seed);
    for (const auto& v : input.vectors) blocks.push_back(v);
    meta["profile"] = p.profile;
  } else {
    const auto input = gen_tuple_data(p.servers, p.rows, p.n, p.density, p.seed);
    blocks = input.per_server;
    meta["rows"] = p.rows;
    meta["density"] = p.density;
  }
  write_server_csvs(p.out, blocks, meta);
  return 0;
}

// ---------------------------------------------------------------------------
// lowrank

struct LowRankParams {
  int servers = 4, k = 5, retries = 3;
  std::int64_t n = 500, d = 40;
  double eps = 0.5, signal = 10.0, noise = 0.1, ratio_bound = 0.0;
  std::uint64_t seed = 1;
  std::string data, out, config;
  bool verify = false, bit_bounded = false;
};

int run_lowrank(const LowRankParams& p) {
  std::vector<std::string> errors;
  if (p.servers < 1) errors.push_back("lowrank: servers must be >= 1");
  if (p.n < 1 || p.d < 1) errors.push_back("lowrank: n and d must be >= 1");
  if (!(p.eps > 0.0) || p.eps > 1.0) errors.push_back("lowrank: eps must be in (0, 1]");
  if (p.retries < 1) errors.push_back("lowrank: retries must be >= 1");
  if (p.ratio_bound < 0.0 || (p.ratio_bound > 0.0 && p.ratio_bound < 1.0))
    errors.push_back("lowrank: ratio-bound must be >= 1 (0 selects 1 + 5 eps)");

  PartitionedMatrix input;
  if (!p.data.empty()) {
    input.blocks = load_server_csvs(p.data, errors);
    if (errors.empty()) {
      try {
        input.validate();
      } catch (const std::exception& e) {
        errors.push_back(std::string("lowrank: ") + e.what());
      }
    }
  } else if (errors.empty()) {
    input = gen_lowrank_signal_noise(p.servers, p.n, p.d, p.k, p.signal, p.noise, p.seed);
  }
  const Index n = input.n(), d = input.d();
  if (errors.empty() && (p.k < 1 || p.k > std::min(n, d)))
    errors.push_back("lowrank: k must be in [1, min(n, d)]");
  if (!errors.empty()) return fail_validation(errors);

  const Matrix a = input.materialize();
  const double anorm = a.norm();
  const double fk = best_rank_k_error(a, p.k);

  LowRankConfig cfg;
  cfg.bit_bounded = p.bit_bounded;
  const double bound = p.ratio_bound > 0.0 ? p.ratio_bound : 1.0 + 5.0 * p.eps + 1e-9;
  std::uint64_t run_seed = p.seed;
  int attempts = 0;
  json report;
  bool ok = false;
  while (attempts < (p.verify ? p.retries : 1)) {
    ++attempts;
    const auto res = adaptive_compress(input, p.k, p.eps, run_seed, cfg);
    const double err = implied_error(input, res.factors);
    double ratio;
    if (fk > 1e-12 * std::max(anorm, 1.0))
      ratio = err / fk;
    else  // optimum is (numerically) zero: exact capture counts as ratio 1
      ratio = err <= 1e-6 * std::max(anorm, 1e-300)
                  ? 1.0
                  : std::numeric_limits<double>::infinity();
    report = {{"protocol", "lowrank"},
              {"servers", input.servers()},
              {"n", n},
              {"d", d},
              {"k", p.k},
              {"eps", p.eps},
              {"bit_bounded", p.bit_bounded},
              {"seed", p.seed},
              {"seed_used", run_seed},
              {"attempts", attempts},
              {"error", err},
              {"fk_oracle", fk},
              {"ratio", ratio},
              {"words", res.ledger.total_words()},
              {"rounds", res.ledger.rounds()}};
    ok = !p.verify || ratio <= bound;
    if (ok) break;
    run_seed = derive_key(p.seed, static_cast<std::uint64_t>(attempts));
  }
  emit(report, p.out);
  if (!ok) {
    std::cerr << "error: lowrank verification failed after " << attempts
              << " attempt(s): ratio above " << bound << "\n";
    return kExitOracle;
  }
  return 0;
}

// ---------------------------------------------------------------------------
// moments

struct MomentsParams {
  int servers = 3, k = 2, fk = 2, rows = 2;
  std::int64_t n = 100;
  double eps = 0.25, density = 0.2;
  std::uint64_t seed = 1, instance_seed = 1;
  std::string fn = "x^k", profile = "disjoint", data, out, config;
  bool oracle = false;
};

// fn spellings: "x^k" (power = k), "x^4+x^5", or "table:<file.json>" with
// {"name", "points": [[x, y], ...], "c_fs", "lipschitz_order"(optional)}.
std::optional<FunctionSpec> parse_function(const std::string& fn, int power, int servers,
                                           std::vector<std::string>& errors) {
  if (fn == "x^k") {
    if (power < 1) {
      errors.push_back("moments: power for x^k must be >= 1");
      return std::nullopt;
    }
    return power_moment(power, servers);
  }
  if (fn == "x^4+x^5") return quartic_quintic(servers);
  if (fn.rfind("table:", 0) == 0) {
    const std::string path = fn.substr(6);
    std::ifstream in(path);
    if (!in) {
      errors.push_back("moments: cannot open function table '" + path + "'");
      return std::nullopt;
    }
    try {
      json spec;
      in >> spec;
      std::vector<std::pair<double, double>> points;
      for (const auto& pt : spec.at("points"))
        points.emplace_back(pt.at(0).get<double>(), pt.at(1).get<double>());
      std::optional<double> order;
      if (spec.contains("lipschitz_order") && !spec["lipschitz_order"].is_null())
        order = spec["lipschitz_order"].get<double>();
      return table_function(spec.value("name", std::string("table")), std::move(points),
                            spec.at("c_fs").get<double>(), order);
    } catch (const std::exception& e) {
      errors.push_back("moments: function table '" + path + "': " + e.what());
      return std::nullopt;
    }
  }
  errors.push_back("moments: fn must be x^k, x^4+x^5 or table:<path>");
  return std::nullopt;
}

json moments_report(const std::string& protocol, const MomentsParams& p, double estimate,
                    const CommLedger& ledger, std::optional<double> oracle,
                    const json& phase) {
  json rel;
  if (oracle) {
    if (*oracle != 0.0)
      rel = std::abs(estimate - *oracle) / std::abs(*oracle);
    else
      rel = estimate == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  }
  return {{"protocol", protocol},
          {"servers", p.servers},
          {"n", p.n},
          {"k", p.k},
          {"eps", p.eps},
          {"fn", p.fn},
          {"seed", p.seed},
          {"estimate", estimate},
          {"oracle", oracle ? json(*oracle) : json()},
          {"rel_error", rel},
          {"words", ledger.total_words()},
          {"rounds", ledger.rounds()},
          {"phase", phase}};
}

int run_moments(const std::string& op, const MomentsParams& p) {
  std::vector<std::string> errors;
  if (p.servers < 1) errors.push_back("moments: servers must be >= 1");
  if (p.n < 1) errors.push_back("moments: n must be >= 1");
  if (!(p.eps > 0.0) || p.eps > 1.0) errors.push_back("moments: eps must be in (0, 1]");
  if (op == "freq") {
    if (p.k < 2) errors.push_back("moments: freq needs k >= 2");
    if (p.fn != "x^k") errors.push_back("moments: freq always uses fn = x^k");
  }
  if (op == "corr" && (p.k < 1 || p.k > 3))
    errors.push_back("moments: corr tuple order k must be in [1, 3]");

  std::optional<FunctionSpec> f;
  if (op != "freq")
    f = parse_function(p.fn, op == "corr" ? p.fk : p.k, p.servers, errors);

  // corr runs on tuple banks; everything else on partitioned vectors.
  TupleData tuples;
  PartitionedVectors vectors;
  if (op == "corr") {
    if (!p.data.empty()) {
      tuples.per_server = load_server_csvs(p.data, errors);
    } else if (errors.empty()) {
      tuples = gen_tuple_data(p.servers, p.rows, p.n, p.density, p.instance_seed);
    }
    if (errors.empty()) {
      try {
        tuples.validate(p.k);
      } catch (const std::exception& e) {
        errors.push_back(std::string("moments: ") + e.what());
      }
    }
  } else {
    if (!p.data.empty()) {
      const auto blocks = load_server_csvs(p.data, errors);
      for (const auto& m : blocks) {
        if (m.cols() != 1) {
          errors.push_back("moments: vector data files must have one column");
          break;
        }
        vectors.vectors.push_back(m.col(0));
      }
    } else if (errors.empty()) {
      const auto profile = canonical_moment_profile(p.profile);
      if (profile.empty())
        errors.push_back("moments: unknown profile '" + p.profile + "'");
      else
        vectors = gen_moment_vectors(p.servers, p.n, profile, p.instance_seed);
    }
    if (errors.empty()) {
      try {
        vectors.validate();
      } catch (const std::exception& e) {
        errors.push_back(std::string("moments: ") + e.what());
      }
    }
  }
  if (!errors.empty()) return fail_validation(errors);

  // Loaded data overrides the synthetic dimensions; the report describes the
  // instance that actually ran.
  MomentsParams eff = p;
  if (!p.data.empty()) {
    eff.servers = op == "corr" ? tuples.servers() : vectors.servers();
    eff.n = op == "corr" ? tuples.n() : vectors.n();
  }

  json report;
  if (op == "sum") {
    const auto res = distributed_sum(vectors, *f, p.eps, p.seed);
    std::optional<double> oracle;
    if (p.oracle) oracle = exact_moment(vectors, *f);
    report = moments_report("moments-sum", eff, res.estimate, res.ledger, oracle, json());
  } else if (op == "freq") {
    const auto res = frequency_moments(vectors, p.k, p.eps, p.seed);
    std::optional<double> oracle;
    if (p.oracle) oracle = exact_frequency_moment(vectors, p.k);
    report = moments_report("moments-freq", eff, res.estimate, res.ledger, oracle, res.phase);
  } else if (op == "lip") {
    const auto res = lipschitz_moments(vectors, *f, p.eps, p.seed);
    std::optional<double> oracle;
    if (p.oracle) oracle = exact_moment(vectors, *f);
    report = moments_report("moments-lip", eff, res.estimate, res.ledger, oracle, res.phase);
  } else {
    const auto res = generalized_moment(tuples, *f, product_g(), p.k, p.eps, p.seed);
    std::optional<double> oracle;
    if (p.oracle) oracle = exact_generalized_moment(tuples, *f, product_g(), p.k);
    report = moments_report("moments-corr", eff, res.estimate, res.ledger, oracle, json());
  }
  emit(report, p.out);
  return 0;
}

// ---------------------------------------------------------------------------
// report: aggregate JSON reports into one CSV table.

struct ReportParams {
  std::vector<std::string> inputs;
  std::string out;
  bool pretty = false;
};

std::string csv_cell(const json& v) {
  if (v.is_null()) return "";
  std::string s = v.is_string() ? v.get<std::string>() : v.dump();
  if (s.find_first_of(",\"\n") != std::string::npos) {
    std::string quoted = "\"";
    for (const char c : s) {
      if (c == '"') quoted += '"';
      quoted += c;
    }
    quoted += '"';
    return quoted;
  }
  return s;
}

int run_report(const ReportParams& p) {
  std::vector<std::string> errors;
  std::vector<json> reports;
  for (const auto& path : p.inputs) {
    std::ifstream in(path);
    if (!in) {
      errors.push_back("report: cannot open '" + path + "'");
      continue;
    }
    try {
      json r;
      in >> r;
      if (!r.is_object()) throw std::invalid_argument("not a JSON object");
      reports.push_back(std::move(r));
    } catch (const std::exception& e) {
      errors.push_back("report: " + path + ": " + e.what());
    }
  }
  if (!errors.empty()) return fail_validation(errors);

  if (p.pretty)
    for (const auto& r : reports) std::cout << r.dump(2) << "\n";

  std::vector<std::string> columns = {"protocol"};
  for (const auto& r : reports)
    for (const auto& [key, value] : r.items()) {
      (void)value;
      if (std::find(columns.begin(), columns.end(), key) == columns.end())
        columns.push_back(key);
    }
  std::sort(columns.begin() + 1, columns.end());

  std::string table;
  for (std::size_t c = 0; c < columns.size(); ++c)
    table += (c ? "," : "") + columns[c];
  table += "\n";
  for (const auto& r : reports) {
    for (std::size_t c = 0; c < columns.size(); ++c) {
      if (c) table += ",";
      if (r.contains(columns[c])) table += csv_cell(r[columns[c]]);
    }
    table += "\n";
  }
  if (p.out.empty()) {
    if (!p.pretty) std::cout << table;
  } else {
    std::ofstream out(p.out);
    if (!out) {
      std::cerr << "error: report: cannot write '" << p.out << "'\n";
      return kExitValidation;
    }
    out << table;
  }
  return 0;
}

// ---------------------------------------------------------------------------

void add_moment_options(CLI::App* cmd, MomentsParams* p, ConfigBinder* binder,
                        bool tuple_flags) {
  cmd->add_option("--servers", p->servers, "number of data servers");
  cmd->add_option("--n", p->n, "ground-set size");
  cmd->add_option("--k", p->k, "moment order (tuple order for corr)");
  cmd->add_option("--eps", p->eps, "accuracy parameter in (0, 1]");
  cmd->add_option("--fn", p->fn, "f: x^k, x^4+x^5 or table:<path>");
  cmd->add_option("--seed", p->seed, "protocol master seed");
  cmd->add_option("--instance-seed", p->instance_seed, "synthetic data seed");
  cmd->add_option("--profile", p->profile,
                  "synthetic profile: disjoint-support, shared, shared-heavy-hitter, "
                  "uniform, constant");
  cmd->add_option("--data", p->data, "directory of per-server CSV files");
  cmd->add_option("--out", p->out, "also write the JSON report here");
  cmd->add_flag("--oracle", p->oracle, "compute the exact answer and relative error");
  cmd->add_option("--config", p->config, "JSON config file (flags win)");
  binder->bind(cmd, "servers", &p->servers);
  binder->bind(cmd, "n", &p->n);
  binder->bind(cmd, "k", &p->k);
  binder->bind(cmd, "eps", &p->eps);
  binder->bind(cmd, "fn", &p->fn);
  binder->bind(cmd, "seed", &p->seed);
  binder->bind(cmd, "instance-seed", &p->instance_seed);
  binder->bind(cmd, "profile", &p->profile);
  binder->bind(cmd, "data", &p->data);
  binder->bind(cmd, "out", &p->out);
  binder->bind(cmd, "oracle", &p->oracle);
  if (tuple_flags) {
    cmd->add_option("--fk", p->fk, "power of f for corr (f = x^fk)");
    cmd->add_option("--rows", p->rows, "vectors per server for synthetic tuple data");
    cmd->add_option("--density", p->density, "nonzero density for synthetic tuple data");
    binder->bind(cmd, "fk", &p->fk);
    binder->bind(cmd, "rows", &p->rows);
    binder->bind(cmd, "density", &p->density);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"distributed sketching and sampling protocols over a simulated fabric"};
  app.require_subcommand(1);

  // One binder per runnable subcommand: config keys mirror that command's
  // own long options, and the flag-wins check must consult the parsed
  // command, not a sibling sharing the same option names.
  ConfigBinder gen_binder, lr_binder, sum_binder, freq_binder, lip_binder, corr_binder;

  GenParams gen;
  auto* gen_cmd = app.add_subcommand("gen", "write synthetic per-server CSV instances");
  gen_cmd->add_option("--kind", gen.kind, "lowrank, moments or correlation")->required();
  gen_cmd->add_option("--out", gen.out, "output directory")->required();
  gen_cmd->add_option("--servers", gen.servers, "number of data servers");
  gen_cmd->add_option("--n", gen.n, "rows (lowrank) or ground-set size");
  gen_cmd->add_option("--d", gen.d, "columns (lowrank)");
  gen_cmd->add_option("--k", gen.k, "signal rank (lowrank)");
  gen_cmd->add_option("--profile", gen.profile, "instance profile for the kind");
  gen_cmd->add_option("--signal", gen.signal, "signal scale (lowrank)");
  gen_cmd->add_option("--noise", gen.noise, "noise scale (lowrank)");
  gen_cmd->add_option("--rows", gen.rows, "vectors per server (correlation)");
  gen_cmd->add_option("--density", gen.density, "nonzero density (correlation)");
  gen_cmd->add_option("--seed", gen.seed, "generator seed");
  gen_cmd->add_option("--config", gen.config, "JSON config file (flags win)");
  gen_binder.bind(gen_cmd, "kind", &gen.kind);
  gen_binder.bind(gen_cmd, "out", &gen.out);
  gen_binder.bind(gen_cmd, "servers", &gen.servers);
  gen_binder.bind(gen_cmd, "n", &gen.n);
  gen_binder.bind(gen_cmd, "d", &gen.d);
  gen_binder.bind(gen_cmd, "k", &gen.k);
  gen_binder.bind(gen_cmd, "profile", &gen.profile);
  gen_binder.bind(gen_cmd, "signal", &gen.signal);
  gen_binder.bind(gen_cmd, "noise", &gen.noise);
  gen_binder.bind(gen_cmd, "rows", &gen.rows);
  gen_binder.bind(gen_cmd, "density", &gen.density);
  gen_binder.bind(gen_cmd, "seed", &gen.seed);

  LowRankParams lr;
  auto* lr_cmd = app.add_subcommand("lowrank", "run the sketched low-rank protocol");
  lr_cmd->add_option("--servers", lr.servers, "number of data servers");
  lr_cmd->add_option("--n", lr.n, "rows");
  lr_cmd->add_option("--d", lr.d, "columns");
  lr_cmd->add_option("--k", lr.k, "target rank");
  lr_cmd->add_option("--eps", lr.eps, "accuracy parameter in (0, 1]");
  lr_cmd->add_option("--seed", lr.seed, "protocol master seed");
  lr_cmd->add_option("--signal", lr.signal, "synthetic signal scale");
  lr_cmd->add_option("--noise", lr.noise, "synthetic noise scale");
  lr_cmd->add_option("--data", lr.data, "directory of per-server CSV files");
  lr_cmd->add_option("--out", lr.out, "also write the JSON report here");
  lr_cmd->add_option("--retries", lr.retries, "verification attempts before giving up");
  lr_cmd->add_option("--ratio-bound", lr.ratio_bound,
                     "verification threshold on error/fk_oracle (default 1 + 5 eps)");
  lr_cmd->add_flag("--verify", lr.verify, "check the error ratio and retry fresh seeds");
  lr_cmd->add_flag("--bit-bounded", lr.bit_bounded, "sketched-products-only variant");
  lr_cmd->add_option("--config", lr.config, "JSON config file (flags win)");
  lr_binder.bind(lr_cmd, "servers", &lr.servers);
  lr_binder.bind(lr_cmd, "n", &lr.n);
  lr_binder.bind(lr_cmd, "d", &lr.d);
  lr_binder.bind(lr_cmd, "k", &lr.k);
  lr_binder.bind(lr_cmd, "eps", &lr.eps);
  lr_binder.bind(lr_cmd, "seed", &lr.seed);
  lr_binder.bind(lr_cmd, "signal", &lr.signal);
  lr_binder.bind(lr_cmd, "noise", &lr.noise);
  lr_binder.bind(lr_cmd, "data", &lr.data);
  lr_binder.bind(lr_cmd, "out", &lr.out);
  lr_binder.bind(lr_cmd, "retries", &lr.retries);
  lr_binder.bind(lr_cmd, "ratio-bound", &lr.ratio_bound);
  lr_binder.bind(lr_cmd, "verify", &lr.verify);
  lr_binder.bind(lr_cmd, "bit-bounded", &lr.bit_bounded);

  MomentsParams mo;
  auto* mo_cmd = app.add_subcommand("moments", "run a sampling-based moment estimator");
  mo_cmd->require_subcommand(1);
  auto* sum_cmd = mo_cmd->add_subcommand("sum", "importance-sampled additive aggregate");
  auto* freq_cmd = mo_cmd->add_subcommand("freq", "two-phase frequency moment estimator");
  auto* lip_cmd = mo_cmd->add_subcommand("lip", "frequency engine for Lipschitz f");
  auto* corr_cmd = mo_cmd->add_subcommand("corr", "higher-order correlation over tuples");
  add_moment_options(sum_cmd, &mo, &sum_binder, false);
  add_moment_options(freq_cmd, &mo, &freq_binder, false);
  add_moment_options(lip_cmd, &mo, &lip_binder, false);
  add_moment_options(corr_cmd, &mo, &corr_binder, true);

  ReportParams rp;
  auto* rp_cmd = app.add_subcommand("report", "aggregate JSON reports into a CSV table");
  rp_cmd->add_option("inputs", rp.inputs, "report JSON files")->required();
  rp_cmd->add_option("--out", rp.out, "CSV output path (default: stdout)");
  rp_cmd->add_flag("--pretty", rp.pretty, "pretty-print the reports instead");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitValidation;
  }

  try {
    std::vector<std::string> config_errors;
    if (gen_cmd->parsed()) {
      gen_binder.apply(gen.config, config_errors);
      if (!config_errors.empty()) return fail_validation(config_errors);
      return run_gen(gen);
    }
    if (lr_cmd->parsed()) {
      lr_binder.apply(lr.config, config_errors);
      if (!config_errors.empty()) return fail_validation(config_errors);
      return run_lowrank(lr);
    }
    if (mo_cmd->parsed()) {
      const std::pair<CLI::App*, ConfigBinder*> leaves[] = {{sum_cmd, &sum_binder},
                                                            {freq_cmd, &freq_binder},
                                                            {lip_cmd, &lip_binder},
                                                            {corr_cmd, &corr_binder}};
      for (const auto& [leaf, leaf_binder] : leaves)
        if (leaf->parsed()) {
          leaf_binder->apply(mo.config, config_errors);
          if (!config_errors.empty()) return fail_validation(config_errors);
          return run_moments(leaf->get_name(), mo);
        }
    }
    if (rp_cmd->parsed()) return run_report(rp);
  } catch (const IsolationError& e) {
    std::cerr << "error: protocol aborted: " << e.what() << "\n";
    return kExitProtocol;
  } catch (const RoundBoundError& e) {
    std::cerr << "error: protocol aborted: " << e.what() << "\n";
    return kExitProtocol;
  } catch (const EstimatorError& e) {
    std::cerr << "error: protocol aborted: " << e.what() << "\n";
    return kExitProtocol;
  } catch (const ProtocolError& e) {
    std::cerr << "error: protocol aborted: " << e.what() << "\n";
    return kExitProtocol;
  } catch (const FunctionSpecError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  }
  return 0;
}
