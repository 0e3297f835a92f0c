// Command-line front end: model tables, map evaluation, regularity reports
// and descent certificates, with byte-deterministic CSV/JSON outputs.

#include <cctype>
#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "levels/levels.hpp"

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct Config {
  double alpha = 0.5;
  std::optional<double> epsilon;
  std::optional<double> theta;
  int k_max = 10;
  long long n_neg = 32;
  std::string schedule = "pow2";
  int precision_bits = 53;
  double tol = 1e-12;
  std::uint64_t seed = 42;
  std::string out = "out";
  int threads = 0;

  // grid
  int pairs_per_scale = 64;
  double floor_rel = 1e-3;
  int max_scales_per_piece = 48;

  // holder
  std::vector<int> depths = {6, 8, 10, 12};

  // eval
  std::string map = "f";
  std::vector<std::string> points;
  std::string word;
  int grid_samples = 0;  // > 0: sampled-graph export over the materialized domain

  // descent
  long long m_max = 1000000;
  std::optional<int> cascade_from;
  std::optional<int> cascade_to;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

void reject_unknown(const json& obj, std::initializer_list<const char*> allowed,
                    const std::string& where) {
  for (const auto& [key, _] : obj.items()) {
    bool known = false;
    for (const char* a : allowed)
      if (key == a) known = true;
    if (!known) throw ConfigError("config: unknown key '" + key + "' in " + where);
  }
}

template <class T>
void read_field(const json& obj, const char* key, T& out) {
  if (!obj.contains(key)) return;
  try {
    out = obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(std::string("config: bad value for '") + key + "'");
  }
}

void load_config(const std::string& path, Config& cfg) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path);
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: parse error: ") + e.what());
  }
  if (!doc.is_object()) throw ConfigError("config: top level must be an object");
  reject_unknown(doc,
                 {"alpha", "epsilon", "theta", "k_max", "n_neg", "schedule", "precision_bits",
                  "tol", "seed", "out", "threads", "grid", "depths", "map", "points", "word",
                  "grid_samples", "m_max", "cascade_from", "cascade_to"},
                 "top level");
  read_field(doc, "alpha", cfg.alpha);
  if (doc.contains("epsilon")) cfg.epsilon = doc.at("epsilon").get<double>();
  if (doc.contains("theta")) cfg.theta = doc.at("theta").get<double>();
  read_field(doc, "k_max", cfg.k_max);
  read_field(doc, "n_neg", cfg.n_neg);
  read_field(doc, "schedule", cfg.schedule);
  read_field(doc, "precision_bits", cfg.precision_bits);
  read_field(doc, "tol", cfg.tol);
  read_field(doc, "seed", cfg.seed);
  read_field(doc, "out", cfg.out);
  read_field(doc, "threads", cfg.threads);
  if (doc.contains("grid")) {
    const json& g = doc.at("grid");
    if (!g.is_object()) throw ConfigError("config: 'grid' must be an object");
    reject_unknown(g, {"pairs_per_scale", "floor_rel", "max_scales_per_piece"}, "grid");
    read_field(g, "pairs_per_scale", cfg.pairs_per_scale);
    read_field(g, "floor_rel", cfg.floor_rel);
    read_field(g, "max_scales_per_piece", cfg.max_scales_per_piece);
  }
  read_field(doc, "depths", cfg.depths);
  read_field(doc, "map", cfg.map);
  read_field(doc, "points", cfg.points);
  read_field(doc, "word", cfg.word);
  read_field(doc, "grid_samples", cfg.grid_samples);
  read_field(doc, "m_max", cfg.m_max);
  if (doc.contains("cascade_from")) cfg.cascade_from = doc.at("cascade_from").get<int>();
  if (doc.contains("cascade_to")) cfg.cascade_to = doc.at("cascade_to").get<int>();
}

levels::Schedule parse_schedule(const std::string& s) {
  if (s == "pow2") return levels::Schedule::PowersOfTwo;
  if (s == "linear") return levels::Schedule::Linear;
  throw ConfigError("config: schedule must be 'pow2' or 'linear'");
}

template <class Real>
levels::Params<Real> make_params(const Config& cfg) {
  levels::Params<Real> p;
  p.alpha = Real(cfg.alpha);
  if (cfg.epsilon && cfg.theta) {
    p.epsilon = Real(*cfg.epsilon);
    p.theta = Real(*cfg.theta);
  } else if (!cfg.epsilon && !cfg.theta) {
    const auto [theta, eps] = levels::default_theta_epsilon(Real(cfg.alpha));
    p.theta = theta;
    p.epsilon = eps;
  } else if (cfg.epsilon) {
    p.epsilon = Real(*cfg.epsilon);
    p.theta = Real(cfg.alpha) + p.epsilon;
  } else {
    p.theta = Real(*cfg.theta);
    const auto [_, eps] = levels::default_theta_epsilon(Real(cfg.alpha));
    p.epsilon = eps;
  }
  p.k_max = cfg.k_max;
  p.n_neg = cfg.n_neg;
  p.schedule = parse_schedule(cfg.schedule);
  p.precision_bits = cfg.precision_bits;
  p.tol = Real(cfg.tol);
  return p;
}

template <class Real>
levels::SweepGrid make_grid(const Config& cfg) {
  levels::SweepGrid grid;
  grid.pairs_per_scale = cfg.pairs_per_scale;
  grid.floor_rel = cfg.floor_rel;
  grid.max_scales_per_piece = cfg.max_scales_per_piece;
  grid.seed = cfg.seed;
  grid.threads = cfg.threads;
  return grid;
}

void write_out(const Config& cfg, const std::string& name, const std::string& content) {
  fs::create_directories(cfg.out);
  levels::write_text_atomic(fs::path(cfg.out) / name, content);
  std::cout << "wrote " << (fs::path(cfg.out) / name).string() << "\n";
}

// -- params ------------------------------------------------------------------

template <class Real>
int cmd_params(const Config& cfg) {
  levels::JsonWriter w;
  w.begin_object();
  w.key("alpha").value(Real(cfg.alpha));
  const Real bound = levels::golden_ratio_bound<Real>();
  w.key("golden_ratio_bound").value(bound);
  w.key("alpha_below_threshold").value(Real(cfg.alpha) < bound);
  bool pass = false;
  try {
    const auto p = make_params<Real>(cfg);
    const auto check = levels::check_parameters(p.alpha, p.theta, p.epsilon);
    w.key("epsilon").value(p.epsilon);
    w.key("theta").value(p.theta);
    w.key("conditions").begin_object();
    w.key("product").value(check.product);
    w.key("product_ok").value(check.product_ok);
    w.key("tail_cap").value(check.tail_cap);
    w.key("tail_ok").value(check.tail_ok);
    w.key("theta_ok").value(check.theta_ok);
    w.end_object();
    pass = check.pass();
  } catch (const levels::ThresholdError& e) {
    w.key("error").value(e.what());
  }
  w.key("pass").value(pass);
  w.end_object();
  std::cout << w.str() << "\n";
  return pass ? 0 : 1;
}

// -- table -------------------------------------------------------------------

template <class Real>
int cmd_table(const Config& cfg) {
  const auto model = levels::PartitionModel<Real>::build(make_params<Real>(cfg));
  write_out(cfg, "partition.json", levels::partition_json(model));
  write_out(cfg, "levels.csv", levels::levels_csv(model));
  return 0;
}

// -- eval --------------------------------------------------------------------

template <class Real>
Real parse_point(const levels::PartitionModel<Real>& m, const std::string& token) {
  if (!token.empty() && (std::isalpha(static_cast<unsigned char>(token[0])))) {
    const char c = token[0];
    long long idx = 0;
    const char* first = token.data() + 1;
    const char* last = token.data() + token.size();
    auto [ptr, ec] = std::from_chars(first, last, idx);
    if (ec != std::errc() || ptr != last)
      throw ConfigError("eval: bad marker '" + token + "'");
    switch (c) {
      case 'a': return m.a_position(idx);
      case 'b': return m.b_global(static_cast<int>(idx));
      case 'c': return m.c_global(static_cast<int>(idx));
      case 'u': return m.u_global(static_cast<int>(idx));
      case 'v': return m.v_global(static_cast<int>(idx));
      default: throw ConfigError("eval: unknown marker '" + token + "'");
    }
  }
  try {
    return Real(std::stod(token));
  } catch (const std::exception&) {
    throw ConfigError("eval: bad point '" + token + "'");
  }
}

template <class Real>
int cmd_eval(const Config& cfg) {
  if (cfg.map != "f" && cfg.map != "g") throw ConfigError("eval: map must be 'f' or 'g'");
  const auto model = levels::PartitionModel<Real>::build(make_params<Real>(cfg));
  const auto f = levels::build_f(model);
  const auto g = levels::build_g(model);
  const levels::Word word = cfg.word.empty()
                                ? levels::Word{}.append(cfg.map == "f" ? levels::Letter::F
                                                                       : levels::Letter::G)
                                : levels::Word::parse(cfg.word);
  std::vector<Real> xs;
  for (const std::string& token : cfg.points) xs.push_back(parse_point(model, token));
  if (cfg.grid_samples > 0) {
    // evenly spaced sampled graph over the materialized domain
    const Real lo = model.a_position(model.n_top() + 1);
    const Real hi = model.a_position(model.source_low());
    for (int i = 0; i <= cfg.grid_samples; ++i)
      xs.push_back(lo + (hi - lo) * Real(i) / Real(cfg.grid_samples));
  }
  std::vector<levels::EvalRow<Real>> rows;
  bool any_error = false;
  for (const Real x : xs) {
    levels::EvalRow<Real> row;
    row.x = x;
    try {
      const auto p = model.from_global(row.x);
      const auto [q, deriv] = levels::apply_word_with_derivative(f, g, word, p);
      row.y = model.to_global(q);
      row.dydx = deriv;
    } catch (const levels::RangeEscape& e) {
      row.status = std::string("out_of_range: ") + e.what();
      any_error = true;
    } catch (const levels::DomainError& e) {
      row.status = std::string("out_of_range: ") + e.what();
      any_error = true;
    }
    rows.push_back(row);
  }
  const std::string csv = levels::eval_csv(rows);
  write_out(cfg, "eval.csv", csv);
  if (rows.size() <= 64) std::cout << csv;
  return any_error ? 1 : 0;
}

// -- estimates / holder ------------------------------------------------------

template <class Real>
void write_estimates(const Config& cfg, const levels::PartitionModel<Real>& model) {
  const auto report = levels::estimate_quantities(model, model.params().alpha);
  const auto lam = levels::lambda_bounds_report(model);
  const auto check = levels::check_parameters(model.params().alpha, model.params().theta,
                                              model.params().epsilon);
  const auto f = levels::build_f(model);
  const auto g = levels::build_g(model);
  const auto omega = levels::Modulus<Real>::power(model.params().alpha);
  const std::size_t failures =
      levels::hypothesis_report(f, omega).size() + levels::hypothesis_report(g, omega).size();
  write_out(cfg, "estimates.csv", levels::estimates_csv(report));
  write_out(cfg, "estimates_summary.json",
            levels::estimates_summary_json(model, report, lam, check, failures));
}

template <class Real>
int cmd_estimates(const Config& cfg) {
  const auto model = levels::PartitionModel<Real>::build(make_params<Real>(cfg));
  write_estimates(cfg, model);
  return 0;
}

template <class Real>
int cmd_holder(const Config& cfg) {
  const auto params = make_params<Real>(cfg);
  const auto model = levels::PartitionModel<Real>::build(params);
  write_estimates(cfg, model);
  const auto grid = make_grid<Real>(cfg);
  const auto rows =
      levels::empirical_holder_sweep(params, params.alpha, cfg.depths, grid);
  if (params.schedule == levels::Schedule::Linear) {
    // negative control: include the dyadic-schedule seminorms for contrast
    auto ref_params = params;
    ref_params.schedule = levels::Schedule::PowersOfTwo;
    const auto ref = levels::empirical_holder_sweep(ref_params, params.alpha, cfg.depths, grid,
                                                    /*measure_g=*/false);
    write_out(cfg, "holder_sweep.csv", levels::sweep_csv(rows, &ref));
  } else {
    write_out(cfg, "holder_sweep.csv", levels::sweep_csv(rows));
  }
  return 0;
}

// -- descent -----------------------------------------------------------------

template <class Real>
int cmd_descent(const Config& cfg) {
  const auto model = levels::PartitionModel<Real>::build(make_params<Real>(cfg));
  const auto f = levels::build_f(model);
  const auto g = levels::build_g(model);
  if (cfg.cascade_from || cfg.cascade_to) {
    if (!cfg.cascade_from || !cfg.cascade_to)
      throw ConfigError("descent: cascade needs both cascade_from and cascade_to");
    const auto cascade =
        levels::descent_cascade(model, f, g, *cfg.cascade_from, *cfg.cascade_to, cfg.m_max);
    write_out(cfg, "descent_cascade.json", levels::cascade_json(model, cascade));
    if (!cascade.complete) {
      std::cout << "cascade failed at stage " << cascade.failed_stage << "\n";
      return 1;
    }
    return 0;
  }
  std::vector<levels::DescentSearch<Real>> searches;
  bool all = true;
  for (int k = 1; k <= model.k_max() - 1; ++k) {
    searches.push_back(levels::descent_certificate(model, f, g, k, cfg.m_max));
    all = all && searches.back().certificate.has_value();
  }
  write_out(cfg, "descent.json", levels::certificates_json(model, searches, cfg.m_max));
  if (!all) {
    for (const auto& s : searches) {
      if (!s.certificate)
        std::cout << "no certificate within m_max; closest approach "
                  << levels::format_real(s.closest_approach_global) << "\n";
    }
    return 1;
  }
  return 0;
}

template <class Real>
int dispatch(const std::string& cmd, const Config& cfg) {
  if (cmd == "params") return cmd_params<Real>(cfg);
  if (cmd == "table") return cmd_table<Real>(cfg);
  if (cmd == "eval") return cmd_eval<Real>(cfg);
  if (cmd == "estimates") return cmd_estimates<Real>(cfg);
  if (cmd == "holder") return cmd_holder<Real>(cfg);
  if (cmd == "descent") return cmd_descent<Real>(cfg);
  throw ConfigError("unknown command " + cmd);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"interval diffeomorphism construction lab"};
  app.require_subcommand(1);

  Config cfg;
  std::string config_path;
  app.add_option("--config", config_path, "JSON config file");
  app.add_option("--alpha", cfg.alpha, "Hoelder exponent");
  double eps_flag = 0, theta_flag = 0;
  auto* eps_opt = app.add_option("--epsilon", eps_flag, "tail exponent perturbation");
  auto* theta_opt = app.add_option("--theta", theta_flag, "marked-interval shrink exponent");
  app.add_option("--k-max", cfg.k_max, "deepest level");
  app.add_option("--n-neg", cfg.n_neg, "fundamental intervals kept on the n<0 side");
  app.add_option("--schedule", cfg.schedule, "pow2 | linear");
  app.add_option("--precision-bits", cfg.precision_bits, "53 (double) or 64 (long double)");
  app.add_option("--tol", cfg.tol, "certification tolerance");
  app.add_option("--seed", cfg.seed, "sampling seed");
  app.add_option("--out", cfg.out, "output directory");
  app.add_option("--threads", cfg.threads, "sweep threads (0: LEVELS_LAB_THREADS env)");

  auto* params_cmd = app.add_subcommand("params", "check the admissibility conditions");
  auto* table_cmd = app.add_subcommand("table", "write the partition tables");
  auto* eval_cmd = app.add_subcommand("eval", "evaluate f, g or a word at points");
  params_cmd->fallthrough();
  table_cmd->fallthrough();
  eval_cmd->fallthrough();
  eval_cmd->add_option("--map", cfg.map, "f | g");
  eval_cmd->add_option("--points", cfg.points, "points (numbers or markers like u3, b2, a17)");
  eval_cmd->add_option("--word", cfg.word, "word over F,G like \"F^-2 G^3\"");
  eval_cmd->add_option("--grid", cfg.grid_samples, "sampled-graph export with N+1 points");
  auto* estimates_cmd = app.add_subcommand("estimates", "write the estimate report");
  auto* holder_cmd = app.add_subcommand("holder", "estimate report plus depth sweep");
  holder_cmd->add_option("--depths", cfg.depths, "sweep depths");
  auto* descent_cmd = app.add_subcommand("descent", "descent certificates / cascade");
  estimates_cmd->fallthrough();
  holder_cmd->fallthrough();
  descent_cmd->fallthrough();
  descent_cmd->add_option("--m-max", cfg.m_max, "search bound for the g-power");
  int cfrom = 0, cto = 0;
  auto* cfrom_opt = descent_cmd->add_option("--cascade-from", cfrom, "cascade start level");
  auto* cto_opt = descent_cmd->add_option("--cascade-to", cto, "cascade end level");

  // Parse CLI first so --config is known, then layer config file under flags.
  CLI11_PARSE(app, argc, argv);

  try {
    Config base;
    if (!config_path.empty()) load_config(config_path, base);
    // command-line flags win over the config file
    Config merged = base;
    if (app.count("--alpha")) merged.alpha = cfg.alpha;
    if (eps_opt->count()) merged.epsilon = eps_flag;
    if (theta_opt->count()) merged.theta = theta_flag;
    if (app.count("--k-max")) merged.k_max = cfg.k_max;
    if (app.count("--n-neg")) merged.n_neg = cfg.n_neg;
    if (app.count("--schedule")) merged.schedule = cfg.schedule;
    if (app.count("--precision-bits")) merged.precision_bits = cfg.precision_bits;
    if (app.count("--tol")) merged.tol = cfg.tol;
    if (app.count("--seed")) merged.seed = cfg.seed;
    if (app.count("--out")) merged.out = cfg.out;
    if (app.count("--threads")) merged.threads = cfg.threads;
    if (eval_cmd->count("--map")) merged.map = cfg.map;
    if (eval_cmd->count("--points")) merged.points = cfg.points;
    if (eval_cmd->count("--word")) merged.word = cfg.word;
    if (eval_cmd->count("--grid")) merged.grid_samples = cfg.grid_samples;
    if (holder_cmd->count("--depths")) merged.depths = cfg.depths;
    if (descent_cmd->count("--m-max")) merged.m_max = cfg.m_max;
    if (cfrom_opt->count()) merged.cascade_from = cfrom;
    if (cto_opt->count()) merged.cascade_to = cto;

    std::string cmd;
    for (const auto* sub : {params_cmd, table_cmd, eval_cmd, estimates_cmd, holder_cmd, descent_cmd})
      if (sub->parsed()) cmd = sub->get_name();

    if (merged.precision_bits == 53) return dispatch<double>(cmd, merged);
    if (merged.precision_bits == 64) return dispatch<long double>(cmd, merged);
    throw ConfigError("precision_bits must be 53 or 64");
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const levels::ParameterError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
