// Batch experiment driver. Each subcommand reads one config file (TOML
// subset or JSON), runs a single experiment, and writes CSV data plus a JSON
// summary into the output directory. Outputs are deterministic: identical
// inputs produce byte-identical files. Exit codes: 0 success, 2 validation
// failure, 3 numerical/limit failure.

#include <complex>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "spinlab/cumulants.hpp"
#include "spinlab/dynamics.hpp"
#include "spinlab/io.hpp"
#include "spinlab/lieb_robinson.hpp"
#include "spinlab/open_chain.hpp"
#include "spinlab/states.hpp"
#include "spinlab/transport.hpp"
#include "spinlab/version.hpp"

namespace {

using json = spinlab::io::json;
using spinlab::ConfigInvalid;
using spinlab::cplx;
using spinlab::LocalOperator;

struct Options {
  std::string config_path;
  std::string out_dir;
  int threads = 1;
  long long seed = 0;
  std::string chaotic = "on";
};

// ---------------------------------------------------------------------------
// Config access helpers; every failure names the offending key.
// ---------------------------------------------------------------------------

const json* find_key(const json& cfg, const std::string& key) {
  const json* node = &cfg;
  std::size_t pos = 0;
  while (true) {
    const std::size_t dot = key.find('.', pos);
    const std::string head = key.substr(pos, dot - pos);
    if (!node->is_object() || !node->contains(head)) return nullptr;
    node = &(*node)[head];
    if (dot == std::string::npos) return node;
    pos = dot + 1;
  }
}

double get_number(const json& cfg, const std::string& key, double fallback) {
  const json* v = find_key(cfg, key);
  if (!v) return fallback;
  if (!v->is_number()) throw ConfigInvalid(key + ": expected a number");
  return v->get<double>();
}

int get_int(const json& cfg, const std::string& key, int fallback) {
  const json* v = find_key(cfg, key);
  if (!v) return fallback;
  if (!v->is_number_integer()) throw ConfigInvalid(key + ": expected an integer");
  return v->get<int>();
}

bool get_bool(const json& cfg, const std::string& key, bool fallback) {
  const json* v = find_key(cfg, key);
  if (!v) return fallback;
  if (!v->is_boolean()) throw ConfigInvalid(key + ": expected a boolean");
  return v->get<bool>();
}

std::string get_string(const json& cfg, const std::string& key, const std::string& fallback) {
  const json* v = find_key(cfg, key);
  if (!v) return fallback;
  if (!v->is_string()) throw ConfigInvalid(key + ": expected a string");
  return v->get<std::string>();
}

std::vector<double> get_number_list(const json& cfg, const std::string& key) {
  const json* v = find_key(cfg, key);
  if (!v) return {};
  if (!v->is_array()) throw ConfigInvalid(key + ": expected an array of numbers");
  std::vector<double> out;
  for (const json& e : *v) {
    if (!e.is_number()) throw ConfigInvalid(key + ": expected an array of numbers");
    out.push_back(e.get<double>());
  }
  return out;
}

// ---------------------------------------------------------------------------
// Domain loaders
// ---------------------------------------------------------------------------

spinlab::LindbladModel load_model(const json& cfg, const std::string& config_path) {
  if (const json* inline_model = find_key(cfg, "model"))
    return spinlab::io::model_from_json(*inline_model);
  const std::string file = get_string(cfg, "model_file", "");
  if (file.empty())
    throw ConfigInvalid("model: missing ('model' object or 'model_file' path required)");
  std::filesystem::path p(file);
  if (p.is_relative() && !config_path.empty())
    p = std::filesystem::path(config_path).parent_path() / p;
  return spinlab::io::model_from_json(spinlab::io::load_config(p.string()));
}

spinlab::Window load_window(const json& cfg, bool default_periodic) {
  const json* w = find_key(cfg, "evolver.window");
  if (!w) throw ConfigInvalid("evolver.window: missing (expected [lo, hi])");
  if (!w->is_array() || w->size() != 2 || !(*w)[0].is_number_integer() ||
      !(*w)[1].is_number_integer())
    throw ConfigInvalid("evolver.window: expected [lo, hi]");
  spinlab::Window win{(*w)[0].get<int>(), (*w)[1].get<int>(),
                      get_bool(cfg, "evolver.periodic", default_periodic)};
  if (win.hi < win.lo) throw ConfigInvalid("evolver.window: hi < lo");
  return win;
}

spinlab::EvolverConfig load_evolver(const json& cfg, bool default_periodic = true) {
  spinlab::EvolverConfig ec;
  ec.window = load_window(cfg, default_periodic);
  ec.dt = get_number(cfg, "evolver.dt", ec.dt);
  ec.prune_eps = get_number(cfg, "evolver.prune_eps", 1e-14);
  ec.step_tol = get_number(cfg, "evolver.step_tol", ec.step_tol);
  const std::string method = get_string(cfg, "evolver.method", "rk4");
  if (method == "rk4") {
    ec.method = spinlab::EvolveMethod::OdeRk4;
  } else if (method == "dense") {
    ec.method = spinlab::EvolveMethod::DenseExponential;
  } else {
    throw ConfigInvalid("evolver.method: expected 'rk4' or 'dense'");
  }
  return ec;
}

spinlab::io::StateDescriptor load_state(const json& cfg) {
  const json* s = find_key(cfg, "state");
  if (!s) return {};  // product Gibbs at mu = 0
  return spinlab::io::state_from_json(*s);
}

double product_mu(const json& cfg) {
  const spinlab::io::StateDescriptor s = load_state(cfg);
  if (s.kind != "product_gibbs")
    throw ConfigInvalid("state.kind: this experiment needs 'product_gibbs'");
  return s.mu;
}

LocalOperator load_operator(const json& cfg, const std::string& key,
                            const LocalOperator& fallback) {
  const json* v = find_key(cfg, key);
  if (!v) return fallback;
  try {
    return spinlab::io::operator_from_json(*v);
  } catch (const ConfigInvalid& e) {
    throw ConfigInvalid(key + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Artifact emission
// ---------------------------------------------------------------------------

struct Emitter {
  std::string dir;
  json config;      // full effective config (reproducibility header)
  json tolerances;  // every tolerance the experiment used

  std::string path(const std::string& name) const {
    return (std::filesystem::path(dir) / name).string();
  }

  void csv(const std::string& name, const std::vector<std::string>& columns,
           const std::vector<std::vector<std::string>>& rows) const {
    spinlab::io::write_csv(path(name), spinlab::io::metadata_lines(config, tolerances),
                           columns, rows);
  }

  void summary(const std::string& name, json results) const {
    json out;
    out["config_hash"] = spinlab::io::config_hash(config);
    out["version"] = spinlab::kVersionString;
    out["tolerances"] = tolerances;
    out["config"] = config;
    out["results"] = std::move(results);
    spinlab::io::write_json_file(path(name), out);
  }
};

std::string fmt(double v) { return spinlab::io::fmt_g17(v); }

json complex_json(const cplx& c) { return json::array({c.real(), c.imag()}); }

// ---------------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------------

int run_validate(const json& cfg, const Options& opt, Emitter& em) {
  const spinlab::LindbladModel model = load_model(cfg, opt.config_path);
  const spinlab::ModelValidation val = spinlab::validate_model(model);

  json res;
  res["conservation_residual"] = val.conservation_residual;
  res["condition_residual"] = val.condition_residual;
  res["telescope_solved"] = val.telescope_solved;
  res["telescope_residual"] = val.telescope_residual;
  res["telescope_density"] = spinlab::io::operator_to_json(val.telescope_density);
  res["conserving"] = val.conserving();
  res["detailed_balance"] = val.detailed_balance();
  res["interaction_strength"] = spinlab::interaction_strength_estimate(model);
  res["v_theory"] = spinlab::theoretical_velocity(model);
  res["hopping_asymmetry"] = spinlab::hopping_asymmetry(model);

  std::vector<std::vector<std::string>> rows = {
      {"conservation_residual", fmt(val.conservation_residual)},
      {"condition_residual", fmt(val.condition_residual)},
      {"telescope_residual", fmt(val.telescope_residual)},
  };

  if (val.conserving() && val.detailed_balance()) {
    const double mu = load_state(cfg).mu;
    const spinlab::EquilibriumReport eq = spinlab::equilibrium_report(model, mu);
    json eqj;
    eqj["mu"] = mu;
    eqj["s"] = eq.s;
    eqj["j_avg"] = eq.j_avg;
    eqj["v"] = eq.v;
    eqj["v_prime"] = eq.v_prime;
    eqj["chi"] = eq.chi;
    eqj["l_lower"] = eq.l_lower;
    eqj["cross_check_residual"] = eq.cross_check_residual;
    res["equilibrium"] = std::move(eqj);
    rows.push_back({"j_avg", fmt(eq.j_avg)});
    rows.push_back({"l_lower", fmt(eq.l_lower)});
  }

  em.csv("validate.csv", {"quantity", "value"}, rows);
  em.summary("validate.json", std::move(res));
  return 0;
}

int run_bound(const json& cfg, const Options& opt, Emitter& em) {
  const spinlab::LindbladModel model = load_model(cfg, opt.config_path);
  const double mu = load_state(cfg).mu;
  const spinlab::EquilibriumReport eq = spinlab::equilibrium_report(model, mu);

  json res;
  res["mu"] = mu;
  res["s"] = eq.s;
  res["j_avg"] = eq.j_avg;
  res["v"] = eq.v;
  res["v_prime"] = eq.v_prime;
  res["chi"] = eq.chi;
  res["v_theory"] = spinlab::theoretical_velocity(model);
  res["L_lower"] = eq.l_lower;
  res["cross_check_residual"] = eq.cross_check_residual;

  em.csv("bound.csv", {"mu", "L_lower", "v", "v_prime", "chi"},
         {{fmt(mu), fmt(eq.l_lower), fmt(eq.v), fmt(eq.v_prime), fmt(eq.chi)}});
  em.summary("bound.json", std::move(res));
  return 0;
}

int run_stationarity(const json& cfg, const Options& opt, Emitter& em) {
  const spinlab::LindbladModel model = load_model(cfg, opt.config_path);
  const double mu = product_mu(cfg);
  const int ring = get_int(cfg, "ring", 6);
  const double residual = spinlab::gibbs_stationarity_residual(model, mu, ring);

  json res;
  res["ring"] = ring;
  res["mu"] = mu;
  res["residual"] = residual;
  em.csv("stationarity.csv", {"ring", "mu", "residual"},
         {{std::to_string(ring), fmt(mu), fmt(residual)}});
  em.summary("stationarity.json", std::move(res));
  return 0;
}

int run_lr_cone(const json& cfg, const Options& opt, Emitter& em) {
  const spinlab::LindbladModel model = load_model(cfg, opt.config_path);
  const spinlab::EvolverConfig ec = load_evolver(cfg, /*default_periodic=*/false);
  const LocalOperator a = load_operator(cfg, "a", LocalOperator::sigma_z(0));
  const LocalOperator b = load_operator(cfg, "b", LocalOperator::sigma_z(0));

  spinlab::GridPlan plan;
  const json* disp = find_key(cfg, "grid.displacements");
  if (disp) {
    for (const double x : get_number_list(cfg, "grid.displacements"))
      plan.displacements.push_back(static_cast<int>(x));
  } else {
    const int xmin = get_int(cfg, "grid.x_min", 0);
    const int xmax = get_int(cfg, "grid.x_max", ec.window.hi - 2);
    for (int x = xmin; x <= xmax; ++x) plan.displacements.push_back(x);
  }
  plan.times = get_number_list(cfg, "grid.times");
  if (plan.times.empty()) throw ConfigInvalid("grid.times: missing or empty");
  const std::string margin = get_string(cfg, "grid.margin", "measured");
  if (margin == "measured") {
    plan.margin = spinlab::MarginPolicy::MeasuredLeakage;
  } else if (margin == "theoretical") {
    plan.margin = spinlab::MarginPolicy::TheoreticalCone;
  } else {
    throw ConfigInvalid("grid.margin: expected 'measured' or 'theoretical'");
  }
  plan.margin_sites = get_int(cfg, "grid.margin_sites", plan.margin_sites);
  plan.leakage_tol = get_number(cfg, "grid.leakage_tol", plan.leakage_tol);
  plan.value_budget = get_number(cfg, "grid.value_budget", plan.value_budget);

  const spinlab::LightConeGrid grid = spinlab::commutator_norm_grid(a, b, model, plan, ec);
  const double threshold = get_number(cfg, "grid.threshold", -1.0);
  const spinlab::LightConeFit fit = spinlab::fit_light_cone(grid, threshold);

  std::vector<std::vector<std::string>> rows;
  for (std::size_t ix = 0; ix < grid.displacements.size(); ++ix)
    for (std::size_t it = 0; it < grid.times.size(); ++it)
      rows.push_back({std::to_string(grid.displacements[ix]), fmt(grid.times[it]),
                      fmt(grid.values[ix][it])});

  em.tolerances["leakage_tol"] = plan.leakage_tol;
  em.tolerances["value_budget"] = plan.value_budget;
  em.tolerances["value_floor"] = grid.value_floor;
  json res;
  res["v_fit"] = fit.v_fit;
  res["lambda_fit"] = fit.lambda_fit;
  res["v_theory"] = grid.v_theory;
  res["threshold"] = fit.threshold;
  res["residuals"] = {{"v_r_squared", fit.v_r_squared},
                      {"tail_r_squared", fit.tail_r_squared},
                      {"max_edge_leakage", grid.max_edge_leakage}};
  em.csv("lr-cone.csv", {"x", "t", "norm"}, rows);
  em.summary("lr-cone.json", std::move(res));
  return 0;
}

int run_ray_average(const json& cfg, const Options& opt, Emitter& em) {
  const spinlab::LindbladModel model = load_model(cfg, opt.config_path);
  const double mu = product_mu(cfg);
  const spinlab::EvolverConfig ec = load_evolver(cfg);
  const LocalOperator a = load_operator(cfg, "a", LocalOperator::sigma_z(0));
  const LocalOperator b = load_operator(cfg, "b", LocalOperator::sigma_z(0));

  spinlab::RayPlan plan;
  plan.velocity = get_number(cfg, "plan.velocity", plan.velocity);
  plan.direction = get_int(cfg, "plan.direction", plan.direction);
  plan.t_max = get_number(cfg, "plan.t_max", plan.t_max);
  plan.dt = get_number(cfg, "plan.dt", plan.dt);
  plan.wavenumber = get_number(cfg, "plan.wavenumber", plan.wavenumber);
  plan.frequency = get_number(cfg, "plan.frequency", plan.frequency);

  const spinlab::LindbladGenerator gen = spinlab::LindbladGenerator::from_model(model, ec.window);
  const spinlab::ProductGibbsState state(mu);
  const spinlab::RaySeries series = spinlab::ray_average(a, b, plan, state, gen, ec);

  std::vector<std::vector<std::string>> rows;
  for (std::size_t i = 0; i < series.times.size(); ++i) {
    const cplx avg = series.averages[i];
    rows.push_back({fmt(series.times[i]), fmt(avg.real()), fmt(avg.imag()),
                    fmt(series.target.real()), fmt(series.target.imag()),
                    fmt(std::abs(avg - series.target))});
  }

  json res;
  res["target"] = complex_json(series.target);
  res["final_average"] = complex_json(series.averages.back());
  res["final_abs_error"] = std::abs(series.averages.back() - series.target);
  res["samples"] = series.times.size();
  em.csv("ray-average.csv",
         {"T", "running_re", "running_im", "target_re", "target_im", "abs_error"}, rows);
  em.summary("ray-average.json", std::move(res));
  return 0;
}

int run_cumulants(int n, const std::string& kind_name, bool count_only, Emitter& em) {
  spinlab::PartitionKind kind;
  if (kind_name == "classical" || kind_name == "all") {
    kind = spinlab::PartitionKind::All;
  } else if (kind_name == "noncrossing" || kind_name == "free") {
    kind = spinlab::PartitionKind::NonCrossing;
  } else {
    throw ConfigInvalid("kind: expected 'classical' or 'noncrossing'");
  }
  const std::vector<spinlab::Partition> parts = spinlab::enumerate_partitions(n, kind);

  json res;
  res["n"] = n;
  res["kind"] = kind_name;
  res["count"] = parts.size();
  std::vector<std::vector<std::string>> rows;
  if (count_only) {
    rows.push_back({std::to_string(n), kind_name, std::to_string(parts.size())});
    em.csv("cumulants.csv", {"n", "kind", "count"}, rows);
  } else {
    json plist = json::array();
    for (std::size_t i = 0; i < parts.size(); ++i) {
      json blocks = json::array();
      std::string text;
      for (const auto& blk : parts[i].blocks) {
        blocks.push_back(blk);
        if (!text.empty()) text += '|';
        for (std::size_t q = 0; q < blk.size(); ++q)
          text += (q ? " " : "") + std::to_string(blk[q]);
      }
      plist.push_back(std::move(blocks));
      rows.push_back({std::to_string(i), std::to_string(parts[i].blocks.size()), text});
    }
    res["partitions"] = std::move(plist);
    em.csv("cumulants.csv", {"index", "num_blocks", "blocks"}, rows);
  }
  em.summary("cumulants.json", std::move(res));
  std::cout << parts.size() << "\n";
  return 0;
}

spinlab::CorrelatorPlan load_correlator_plan(const json& cfg) {
  spinlab::CorrelatorPlan plan;
  plan.f = get_number(cfg, "plan.frequency", plan.f);
  plan.k = get_number(cfg, "plan.wavenumber", plan.k);
  plan.kappa = get_number(cfg, "plan.kappa", plan.kappa);
  plan.t_max = get_number(cfg, "plan.t_max", plan.t_max);
  plan.dt = get_number(cfg, "plan.dt", plan.dt);
  plan.radius = get_int(cfg, "plan.radius", plan.radius);
  return plan;
}

void emit_correlator(const spinlab::CorrelatorSeries& series, const char* csv_name,
                     const char* json_name, Emitter& em, json extra) {
  std::vector<std::vector<std::string>> rows;
  for (std::size_t i = 0; i < series.running.size(); ++i) {
    rows.push_back({fmt(series.times[i]), fmt(series.running[i].real()),
                    fmt(series.running[i].imag()), fmt(series.integrand[i + 1].real()),
                    fmt(series.integrand[i + 1].imag()), fmt(series.tails[i + 1])});
  }
  json res = std::move(extra);
  res["final_running"] = complex_json(series.running.back());
  res["static_integrand"] = complex_json(series.integrand.front());
  res["max_tail"] = *std::max_element(series.tails.begin(), series.tails.end());
  em.csv(csv_name, {"T", "running_re", "running_im", "integrand_re", "integrand_im", "tail"},
         rows);
  em.summary(json_name, std::move(res));
}

int run_drude(const json& cfg, const Options& opt, Emitter& em, bool euler) {
  const spinlab::LindbladModel model = load_model(cfg, opt.config_path);
  const double mu = product_mu(cfg);
  const spinlab::EvolverConfig ec = load_evolver(cfg);
  const LocalOperator a = load_operator(cfg, "a", LocalOperator::sigma_z(0));
  const LocalOperator b = load_operator(cfg, "b", LocalOperator::sigma_z(0));
  const spinlab::CorrelatorPlan plan = load_correlator_plan(cfg);
  const spinlab::LindbladGenerator gen = spinlab::LindbladGenerator::from_model(model, ec.window);

  json extra;
  extra["mu"] = mu;
  extra["plan"] = {{"frequency", plan.f},   {"wavenumber", plan.k}, {"kappa", plan.kappa},
                   {"t_max", plan.t_max},   {"dt", plan.dt},        {"radius", plan.radius}};
  extra["seed"] = opt.seed;

  if (euler) {
    const spinlab::CorrelatorSeries series = spinlab::euler_correlator(a, b, plan, mu, gen, ec);
    emit_correlator(series, "euler.csv", "euler.json", em, std::move(extra));
  } else {
    const spinlab::CorrelatorSeries series = spinlab::drude_weight(a, b, plan, mu, gen, ec);
    emit_correlator(series, "drude.csv", "drude.json", em, std::move(extra));
  }
  return 0;
}

int run_onsager(const json& cfg, const Options& opt, Emitter& em) {
  const spinlab::LindbladModel model = load_model(cfg, opt.config_path);
  const double mu = product_mu(cfg);
  const spinlab::EvolverConfig ec = load_evolver(cfg);
  const spinlab::LindbladGenerator gen = spinlab::LindbladGenerator::from_model(model, ec.window);

  spinlab::OnsagerPlan plan;
  plan.t_max = get_number(cfg, "plan.t_max", plan.t_max);
  plan.dt = get_number(cfg, "plan.dt", plan.dt);
  plan.radius = get_int(cfg, "plan.radius", plan.radius);

  json res;
  res["mu"] = mu;
  res["seed"] = opt.seed;
  res["chaotic"] = opt.chaotic;
  res["plan"] = {{"t_max", plan.t_max}, {"dt", plan.dt}, {"radius", plan.radius}};

  // With --chaotic off, the ballistic subtraction is widened from the spin
  // density alone to every discovered conserved charge: the averaged current
  // is orthogonalized against the whole basis before the double integral.
  LocalOperator current = LocalOperator::zero();
  bool have_override = false;
  if (opt.chaotic == "off") {
    const int charge_radius = get_int(cfg, "charges.radius", 1);
    const spinlab::ChargeBasis basis = spinlab::find_conserved_charges(model, 0.0, charge_radius);
    res["charges_found"] = basis.densities.size();
    if (!basis.empty_flagged) {
      const spinlab::EquilibriumReport eq = spinlab::equilibrium_report(model, mu);
      const LocalOperator j_minus =
          (spinlab::derive_current(model).j_total - LocalOperator::sigma_z(0) * cplx(eq.v, 0))
              .pruned(1e-15);
      const spinlab::ProjectionResult proj = spinlab::project_onto_charges(
          spinlab::ExtensiveVector{j_minus, 0, basis.radius}, basis,
          spinlab::ProductGibbsState(mu));
      current = proj.residual_density;
      have_override = true;
      json coeffs = json::array();
      for (Eigen::Index i = 0; i < proj.coefficients.size(); ++i)
        coeffs.push_back(complex_json(proj.coefficients(i)));
      res["charge_projection"] = {{"coefficients", std::move(coeffs)},
                                  {"degenerate", proj.degenerate},
                                  {"rank", proj.rank}};
    }
  }

  const spinlab::OnsagerEstimate est =
      spinlab::onsager_estimate(model, mu, plan, gen, ec, have_override ? &current : nullptr);

  std::vector<std::vector<std::string>> rows;
  for (std::size_t i = 0; i < est.times.size(); ++i)
    rows.push_back({fmt(est.times[i]), fmt(est.green_kubo[i])});
  em.csv("onsager.csv", {"T", "green_kubo"}, rows);
  em.csv("strengths.csv", {"t", "L_norm", "L_irr"},
         {{fmt(plan.t_max), fmt(est.l_norm), fmt(est.l_irr)}});

  res["green_kubo_final"] = est.green_kubo.back();
  res["static_term"] = est.static_term;
  res["L_norm"] = est.l_norm;
  res["L_irr"] = est.l_irr;
  res["identity_gap"] = est.identity_gap;
  res["hydrodynamic_velocity"] = est.hydrodynamic_velocity;
  res["imag_defect"] = est.imag_defect;
  em.summary("onsager.json", std::move(res));
  return 0;
}

// ---------------------------------------------------------------------------

int dispatch(const std::string& sub, const Options& opt, int n, const std::string& kind,
             bool count_only) {
  json cfg = json::object();
  if (!opt.config_path.empty()) cfg = spinlab::io::load_config(opt.config_path);
  if (sub != "cumulants" && opt.config_path.empty())
    throw ConfigInvalid("config: --config PATH is required for '" + sub + "'");

  std::string dir = opt.out_dir;
  if (dir.empty()) dir = get_string(cfg, "out_dir", ".");
  std::filesystem::create_directories(dir);

  Emitter em;
  em.dir = dir;
  em.config = cfg;
  em.config["subcommand"] = sub;
  em.config["seed"] = opt.seed;
  em.config["threads"] = opt.threads;
  if (sub == "cumulants") {
    em.config["n"] = n;
    em.config["kind"] = kind;
    em.config["count_only"] = count_only;
  }
  em.tolerances["prune_eps"] = get_number(cfg, "evolver.prune_eps", 1e-14);
  em.tolerances["dt"] = get_number(cfg, "evolver.dt", 0.01);

  if (sub == "validate") return run_validate(cfg, opt, em);
  if (sub == "bound") return run_bound(cfg, opt, em);
  if (sub == "stationarity") return run_stationarity(cfg, opt, em);
  if (sub == "lr-cone") return run_lr_cone(cfg, opt, em);
  if (sub == "ray-average") return run_ray_average(cfg, opt, em);
  if (sub == "cumulants") return run_cumulants(n, kind, count_only, em);
  if (sub == "drude") return run_drude(cfg, opt, em, /*euler=*/false);
  if (sub == "euler") return run_drude(cfg, opt, em, /*euler=*/true);
  if (sub == "onsager") return run_onsager(cfg, opt, em);
  throw ConfigInvalid("subcommand: unknown '" + sub + "'");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"spin-chain transport laboratory"};
  app.set_version_flag("--version", spinlab::kVersionString);

  Options opt;
  app.add_option("--config", opt.config_path, "experiment config file (TOML subset or JSON)");
  app.add_option("--out", opt.out_dir, "output directory")->envname("SPINLAB_OUT_DIR");
  app.add_option("--threads", opt.threads, "worker cap (outputs are thread-count independent)");
  app.add_option("--seed", opt.seed, "seed recorded in output metadata");
  app.add_option("--chaotic", opt.chaotic, "Onsager projection basis choice")
      ->check(CLI::IsMember({"on", "off"}));

  int n = 4;
  std::string kind = "classical";
  bool count_only = false;

  static const char* kSubs[] = {"validate",  "lr-cone", "ray-average", "cumulants",
                                "drude",     "euler",   "onsager",     "bound",
                                "stationarity"};
  for (const char* name : kSubs) {
    CLI::App* sub = app.add_subcommand(name);
    sub->fallthrough();  // global flags may follow the subcommand
    if (std::string(name) == "cumulants") {
      sub->add_option("--n", n, "arity");
      sub->add_option("--kind", kind, "partition lattice: classical|noncrossing");
      sub->add_flag("--count-only", count_only, "emit only the partition count");
    }
  }
  app.require_subcommand(1);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    return dispatch(app.get_subcommands().front()->get_name(), opt, n, kind, count_only);
  } catch (const spinlab::LimitExceeded& e) {
    std::cerr << "limit: " << e.what() << "\n";
    return 3;
  } catch (const spinlab::NumericalFailure& e) {
    std::cerr << "numerical: " << e.what() << "\n";
    return 3;
  } catch (const spinlab::InvalidInput& e) {
    std::cerr << "invalid: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}
