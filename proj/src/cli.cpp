#include "keyrate/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numbers>
#include <ostream>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "keyrate/enhance.hpp"
#include "keyrate/extremal.hpp"

namespace keyrate::cli {

namespace {

using nlohmann::json;
using ojson = nlohmann::ordered_json;

void check_keys(const json& obj, const std::set<std::string>& allowed, const std::string& path) {
  if (!obj.is_object()) throw ConfigError(path + ": expected an object");
  for (const auto& [key, value] : obj.items())
    if (!allowed.count(key)) throw ConfigError(path + "." + key + ": unknown field");
}

const json& require(const json& obj, const std::string& key, const std::string& path) {
  if (!obj.contains(key)) throw ConfigError(path + "." + key + ": missing field");
  return obj.at(key);
}

double get_number(const json& j, const std::string& path) {
  if (!j.is_number()) throw ConfigError(path + ": expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) throw ConfigError(path + ": must be finite");
  return v;
}

std::int64_t get_int(const json& j, const std::string& path, std::int64_t lo) {
  if (!j.is_number_integer()) throw ConfigError(path + ": expected an integer");
  const std::int64_t v = j.get<std::int64_t>();
  if (v < lo) throw ConfigError(path + ": must be >= " + std::to_string(lo));
  return v;
}

double get_positive(const json& j, const std::string& path) {
  const double v = get_number(j, path);
  if (!(v > 0.0)) throw ConfigError(path + ": must be > 0");
  return v;
}

std::string get_choice(const json& j, const std::string& path, const std::set<std::string>& choices) {
  if (!j.is_string()) throw ConfigError(path + ": expected a string");
  const std::string s = j.get<std::string>();
  if (!choices.count(s)) throw ConfigError(path + ": unsupported value '" + s + "'");
  return s;
}

MuWeights make_weights(double a, double b, double c, const std::string& path) {
  try {
    return MuWeights(a, b, c);
  } catch (const InvalidWeights& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

MuWeights parse_weights(const json& j, const std::string& path) {
  if (!j.is_array() || j.size() != 3) throw ConfigError(path + ": expected [mu1, mu2, mu3]");
  return make_weights(get_number(j[0], path + "[0]"), get_number(j[1], path + "[1]"), get_number(j[2], path + "[2]"),
                      path);
}

SymMatrix parse_matrix(const json& j, const std::string& path, int p) {
  if (!j.is_array() || static_cast<int>(j.size()) != p) throw ConfigError(path + ": expected " + std::to_string(p) + " rows");
  Eigen::MatrixXd m(p, p);
  for (int r = 0; r < p; ++r) {
    const json& row = j[static_cast<std::size_t>(r)];
    const std::string rpath = path + "[" + std::to_string(r) + "]";
    if (!row.is_array() || static_cast<int>(row.size()) != p)
      throw ConfigError(rpath + ": expected " + std::to_string(p) + " entries");
    for (int c = 0; c < p; ++c)
      m(r, c) = get_number(row[static_cast<std::size_t>(c)], rpath + "[" + std::to_string(c) + "]");
  }
  const double tol = 1e-12 * (1.0 + m.cwiseAbs().maxCoeff());
  for (int r = 0; r < p; ++r)
    for (int c = r + 1; c < p; ++c)
      if (std::abs(m(r, c) - m(c, r)) > tol)
        throw ConfigError(path + ": matrix is not symmetric at [" + std::to_string(r) + "][" + std::to_string(c) + "]");
  SymMatrix s(0.5 * (m + m.transpose()));
  if (!(min_eig(s) > psd_tolerance(s))) throw ConfigError(path + ": matrix is not positive definite");
  return s;
}

SourceModel parse_model(const json& j) {
  check_keys(j, {"p", "K", "K_Y", "K_Z"}, "model");
  const int p = static_cast<int>(get_int(require(j, "p", "model"), "model.p", 1));
  SymMatrix k = parse_matrix(require(j, "K", "model"), "model.K", p);
  SymMatrix ky = parse_matrix(require(j, "K_Y", "model"), "model.K_Y", p);
  SymMatrix kz = parse_matrix(require(j, "K_Z", "model"), "model.K_Z", p);
  try {
    return SourceModel(std::move(k), std::move(ky), std::move(kz));
  } catch (const std::exception& e) {
    throw ConfigError(std::string("model: ") + e.what());
  }
}

DiscreteBlock parse_discrete(const json& j) {
  check_keys(j, {"card_x", "card_y", "card_z", "pmf", "card_u", "card_v", "samples"}, "discrete");
  DiscreteBlock d;
  d.source.card_x = static_cast<int>(get_int(require(j, "card_x", "discrete"), "discrete.card_x", 1));
  d.source.card_y = static_cast<int>(get_int(require(j, "card_y", "discrete"), "discrete.card_y", 1));
  d.source.card_z = static_cast<int>(get_int(require(j, "card_z", "discrete"), "discrete.card_z", 1));
  const json& pmf = require(j, "pmf", "discrete");
  if (!pmf.is_array()) throw ConfigError("discrete.pmf: expected an array");
  for (std::size_t i = 0; i < pmf.size(); ++i)
    d.source.pxyz.push_back(get_number(pmf[i], "discrete.pmf[" + std::to_string(i) + "]"));
  if (j.contains("card_u")) d.card_u = static_cast<int>(get_int(j["card_u"], "discrete.card_u", 1));
  if (j.contains("card_v")) d.card_v = static_cast<int>(get_int(j["card_v"], "discrete.card_v", 1));
  if (j.contains("samples")) d.samples = get_int(j["samples"], "discrete.samples", 1);
  try {
    validate(d.source);
  } catch (const InvalidPmf& e) {
    throw ConfigError(std::string("discrete.pmf: ") + e.what());
  }
  return d;
}

SolverOptions parse_solver(const json& j) {
  check_keys(j, {"starts", "max_iters", "grad_tol", "kkt_tol", "seed", "epsilon_margin"}, "solver");
  SolverOptions o;
  if (j.contains("starts")) o.starts = static_cast<int>(get_int(j["starts"], "solver.starts", 1));
  if (j.contains("max_iters")) o.max_iters = static_cast<int>(get_int(j["max_iters"], "solver.max_iters", 1));
  if (j.contains("grad_tol")) o.grad_tol = get_positive(j["grad_tol"], "solver.grad_tol");
  if (j.contains("kkt_tol")) o.kkt_tol = get_positive(j["kkt_tol"], "solver.kkt_tol");
  if (j.contains("epsilon_margin")) o.epsilon_margin = get_positive(j["epsilon_margin"], "solver.epsilon_margin");
  if (j.contains("seed")) {
    if (!j["seed"].is_number_unsigned()) throw ConfigError("solver.seed: expected a nonnegative integer");
    o.seed = j["seed"].get<std::uint64_t>();
  }
  return o;
}

std::vector<MuWeights> parse_sweep(const json& j) {
  check_keys(j, {"resolution", "weights"}, "sweep");
  if (j.contains("resolution") == j.contains("weights"))
    throw ConfigError("sweep: exactly one of resolution or weights is required");
  if (j.contains("resolution"))
    return simplex_grid(static_cast<int>(get_int(j["resolution"], "sweep.resolution", 2)));
  const json& w = j["weights"];
  if (!w.is_array() || w.empty()) throw ConfigError("sweep.weights: expected a nonempty array");
  std::vector<MuWeights> out;
  for (std::size_t i = 0; i < w.size(); ++i) out.push_back(parse_weights(w[i], "sweep.weights[" + std::to_string(i) + "]"));
  return out;
}

OutputBlock parse_output(const json& j) {
  check_keys(j, {"path", "format", "unit"}, "output");
  OutputBlock o;
  if (j.contains("path")) {
    if (!j["path"].is_string()) throw ConfigError("output.path: expected a string");
    o.path = j["path"].get<std::string>();
  }
  if (j.contains("format")) o.format = get_choice(j["format"], "output.format", {"csv", "json"});
  if (j.contains("unit")) o.unit = get_choice(j["unit"], "output.unit", {"nats", "bits"});
  return o;
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

ojson matrix_json(const SymMatrix& m) { return ojson(m.rows()); }

double kkt_max(const KktResidual& k) {
  return std::max({k.stat1, k.stat2, k.dual1, k.dual2, k.comp1, k.comp2});
}

ojson kkt_json(const KktResidual& k) {
  return ojson{{"stat1", k.stat1}, {"stat2", k.stat2}, {"dual1", k.dual1},
               {"dual2", k.dual2}, {"comp1", k.comp1}, {"comp2", k.comp2}};
}

ojson weights_json(const MuWeights& w) { return ojson::array({w.mu1, w.mu2, w.mu3}); }

struct Overrides {
  std::string config;
  std::string mu;
  std::optional<std::uint64_t> seed;
  std::optional<std::int64_t> samples;
  std::string unit;
  std::string out;
};

MuWeights parse_mu_flag(const std::string& s) {
  std::vector<double> v;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    double x = 0.0;
    try {
      x = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != item.size()) throw ConfigError("--mu: expected three comma-separated numbers");
    v.push_back(x);
  }
  if (v.size() != 3) throw ConfigError("--mu: expected three comma-separated numbers");
  return make_weights(v[0], v[1], v[2], "--mu");
}

struct Context {
  RunConfig cfg;
  double scale = 1.0;
  std::ostream* out = nullptr;
};

Context prepare(const Overrides& ov, std::ostream& out) {
  Context ctx{load_config(ov.config), 1.0, &out};
  RunConfig& c = ctx.cfg;
  if (!ov.mu.empty()) c.mu = parse_mu_flag(ov.mu);
  if (ov.seed) c.solver.seed = *ov.seed;
  if (ov.samples) {
    if (*ov.samples < 1) throw ConfigError("--samples: must be positive");
    c.samples = *ov.samples;
    if (c.discrete) c.discrete->samples = *ov.samples;
  }
  if (!ov.unit.empty()) c.output.unit = ov.unit;
  if (!ov.out.empty()) c.output.path = ov.out;
  ctx.scale = c.output.unit == "bits" ? 1.0 / std::numbers::ln2 : 1.0;
  return ctx;
}

void emit(const Context& ctx, const std::string& text) {
  if (ctx.cfg.output.path.empty()) {
    *ctx.out << text;
    return;
  }
  std::ofstream f(ctx.cfg.output.path, std::ios::binary | std::ios::trunc);
  if (!f) throw ConfigError("output.path: cannot open '" + ctx.cfg.output.path + "'");
  f << text;
  if (!f) throw ConfigError("output.path: write failed for '" + ctx.cfg.output.path + "'");
}

const SourceModel& need_model(const RunConfig& c, const char* cmd) {
  if (!c.model) throw ConfigError(std::string(cmd) + ": config needs a model block");
  return *c.model;
}

MuWeights need_mu(const RunConfig& c, const char* cmd) {
  if (!c.mu) throw ConfigError(std::string(cmd) + ": weights required (--mu or mu)");
  return *c.mu;
}

void need_format(const RunConfig& c, const char* cmd, const char* format) {
  if (!c.output.format.empty() && c.output.format != format)
    throw ConfigError(std::string("output.format: ") + cmd + " emits " + format);
}

int cmd_solve(const Context& ctx) {
  const RunConfig& c = ctx.cfg;
  const SourceModel& model = need_model(c, "solve");
  const MuWeights w = need_mu(c, "solve");
  need_format(c, "solve", "json");
  const SolveResult r = solve_mu_sum(model, w, c.solver);
  const Multipliers m = recover_multipliers(model, w, r.splitting);
  const RegionPoint region = region_point(model, r.splitting);
  ojson j;
  j["mu"] = weights_json(w);
  j["unit"] = c.output.unit;
  j["value"] = r.value * ctx.scale;
  j["B1"] = matrix_json(r.splitting.B1);
  j["B2"] = matrix_json(r.splitting.B2);
  j["M1"] = matrix_json(m.M1);
  j["M2"] = matrix_json(m.M2);
  j["kkt"] = kkt_json(r.kkt);
  j["region"] = ojson{{"key", region.key * ctx.scale}, {"sum", region.sum * ctx.scale}, {"pub", region.pub * ctx.scale}};
  j["converged"] = r.converged;
  emit(ctx, j.dump(2) + "\n");
  return r.converged ? 0 : 2;
}

int cmd_sweep(const Context& ctx) {
  const RunConfig& c = ctx.cfg;
  const SourceModel& model = need_model(c, "sweep");
  std::vector<MuWeights> grid = c.sweep;
  if (c.mu) grid = {*c.mu};
  if (grid.empty()) throw ConfigError("sweep: config needs a sweep block or --mu");
  const double nan = std::numeric_limits<double>::quiet_NaN();

  struct Row {
    MuWeights w;
    double value, key, sum, pub, kkt;
    bool converged;
  };
  std::vector<Row> rows;
  rows.reserve(grid.size());
  for (const MuWeights& w : grid) {
    try {
      const SolveResult r = solve_mu_sum(model, w, c.solver);
      const RegionPoint p = region_point(model, r.splitting);
      rows.push_back({w, r.value, p.key, p.sum, p.pub, kkt_max(r.kkt), r.converged});
    } catch (const std::runtime_error&) {
      rows.push_back({w, nan, nan, nan, nan, nan, false});
    }
  }

  const double s = ctx.scale;
  if (c.output.format == "json") {
    ojson arr = ojson::array();
    for (const Row& r : rows)
      arr.push_back(ojson{{"mu1", r.w.mu1}, {"mu2", r.w.mu2}, {"mu3", r.w.mu3}, {"value", r.value * s},
                          {"key_bound", r.key * s}, {"sum_bound", r.sum * s}, {"pub_bound", r.pub * s},
                          {"kkt_max", r.kkt}, {"converged", r.converged}});
    emit(ctx, arr.dump(2) + "\n");
    return 0;
  }
  std::string text = "mu1,mu2,mu3,value,key_bound,sum_bound,pub_bound,kkt_max,converged\n";
  for (const Row& r : rows) {
    text += fmt(r.w.mu1) + "," + fmt(r.w.mu2) + "," + fmt(r.w.mu3) + "," + fmt(r.value * s) + "," + fmt(r.key * s) +
            "," + fmt(r.sum * s) + "," + fmt(r.pub * s) + "," + fmt(r.kkt) + "," + (r.converged ? "1" : "0") + "\n";
  }
  emit(ctx, text);
  return 0;
}

int cmd_verify(const Context& ctx) {
  const RunConfig& c = ctx.cfg;
  const SourceModel& model = need_model(c, "verify");
  const MuWeights w = need_mu(c, "verify");
  need_format(c, "verify", "json");
  if (w.mu1 + w.mu2 <= 0.0) throw ConfigError("verify: enhancement undefined for mu1 = mu2 = 0");

  const SolveResult r = solve_mu_sum(model, w, c.solver);
  ojson j;
  j["mu"] = weights_json(w);
  j["value"] = r.value * ctx.scale;
  j["converged"] = r.converged;
  j["kkt"] = kkt_json(r.kkt);

  bool passed = r.converged;
  Enhancement enh = [&] {
    try {
      return build_enhancement(model, r);
    } catch (const DegenerateWeights& e) {
      throw ConfigError(std::string("verify: enhancement undefined: ") + e.what());
    }
  }();
  const EnhancementReport er = verify_enhancement(model, r, enh);
  j["enhancement"] = ojson{{"prop1", er.prop1},         {"prop2", er.prop2},
                           {"prop3", er.prop3},         {"prop4", er.prop4},
                           {"residual1", er.residual1}, {"residual2", er.residual2},
                           {"residual3", er.residual3}, {"residual4", er.residual4},
                           {"max_violation", er.max_violation}, {"hypotheses_met", er.hypotheses_met},
                           {"K_Y_tilde", matrix_json(enh.K_Y_tilde)}};
  passed = passed && er.all();

  const ScanReport sr = scan_gaussian(model, r, c.samples, c.solver.seed);
  const double tight = tightness_gap(model, r);
  j["scan"] = ojson{{"min_gap", sr.min_gap * ctx.scale},
                    {"samples", sr.samples},
                    {"seed", sr.seed},
                    {"hypothesis_met", sr.hypothesis_met},
                    {"tightness", tight * ctx.scale}};
  passed = passed && sr.min_gap >= -1e-7 && tight <= 1e-6;
  j["unit"] = c.output.unit;
  j["passed"] = passed;
  emit(ctx, j.dump(2) + "\n");
  return passed ? 0 : 2;
}

int cmd_dms(const Context& ctx) {
  const RunConfig& c = ctx.cfg;
  if (!c.discrete) throw ConfigError("dms: config needs a discrete block");
  const DiscreteBlock& d = *c.discrete;
  const auto front = inner_region(d.source, d.card_u, d.card_v, d.samples, c.solver.seed);
  const double s = ctx.scale;
  if (c.output.format == "json") {
    ojson arr = ojson::array();
    for (const RateTriple& t : front)
      arr.push_back(ojson{{"key_term", t.key_term * s}, {"sum_term", t.sum_term * s}, {"pub_term", t.pub_term * s}});
    emit(ctx, arr.dump(2) + "\n");
    return 0;
  }
  std::string text = "key_term,sum_term,pub_term\n";
  for (const RateTriple& t : front)
    text += fmt(t.key_term * s) + "," + fmt(t.sum_term * s) + "," + fmt(t.pub_term * s) + "\n";
  emit(ctx, text);
  return 0;
}

}  // namespace

RunConfig parse_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  check_keys(j, {"model", "discrete", "solver", "sweep", "mu", "output"}, "config");
  if (j.contains("model") && j.contains("discrete"))
    throw ConfigError("config: model and discrete blocks are mutually exclusive");
  RunConfig c;
  if (j.contains("model")) c.model = parse_model(j["model"]);
  if (j.contains("discrete")) c.discrete = parse_discrete(j["discrete"]);
  if (j.contains("solver")) c.solver = parse_solver(j["solver"]);
  if (j.contains("sweep")) c.sweep = parse_sweep(j["sweep"]);
  if (j.contains("mu")) c.mu = parse_weights(j["mu"], "mu");
  if (j.contains("output")) c.output = parse_output(j["output"]);
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ConfigError("--config: cannot read '" + path + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_config(ss.str());
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Secret-key rate regions for vector Gaussian and finite-alphabet sources", "keyrate"};
  app.require_subcommand(1);
  Overrides ov;
  std::uint64_t seed = 0;
  std::int64_t samples = 0;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", ov.config, "JSON run configuration")->required();
    sub->add_option("--mu", ov.mu, "weights a,b,c");
    sub->add_option("--seed", seed, "seed override");
    sub->add_option("--samples", samples, "sample count override");
    sub->add_option("--unit", ov.unit, "nats or bits")->check(CLI::IsMember({"nats", "bits"}));
    sub->add_option("--out", ov.out, "output path (default: stdout)");
  };
  CLI::App* solve = app.add_subcommand("solve", "solve one weighted program, JSON output");
  CLI::App* sweep = app.add_subcommand("sweep", "trace supporting hyperplanes, CSV output");
  CLI::App* verify = app.add_subcommand("verify", "enhancement and extremal-inequality report, JSON output");
  CLI::App* dms = app.add_subcommand("dms", "finite-alphabet inner region frontier, CSV output");
  for (CLI::App* sub : {solve, sweep, verify, dms}) add_common(sub);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 1;
  }

  CLI::App* chosen = app.get_subcommands().front();
  if (chosen->count("--seed")) ov.seed = seed;
  if (chosen->count("--samples")) ov.samples = samples;

  try {
    const Context ctx = prepare(ov, out);
    if (solve->parsed()) return cmd_solve(ctx);
    if (sweep->parsed()) return cmd_sweep(ctx);
    if (verify->parsed()) return cmd_verify(ctx);
    return cmd_dms(ctx);
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "numerical failure: " << e.what() << "\n";
    return 2;
  }
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  std::vector<const char*> argv;
  argv.reserve(args.size() + 1);
  argv.push_back("keyrate");
  for (const auto& a : args) argv.push_back(a.c_str());
  return run(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace keyrate::cli
