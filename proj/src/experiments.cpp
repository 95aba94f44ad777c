#include "barker/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <thread>

#include "barker/adaptation.hpp"
#include "barker/diagnostics.hpp"
#include "barker/gap_lab.hpp"
#include "barker/poisson.hpp"
#include "barker/sampler.hpp"

namespace barker {

using nlohmann::json;

// -- names -----------------------------------------------------------------

std::string to_string(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::SweepStepsize: return "sweep_stepsize";
    case ExperimentKind::Scaling: return "scaling";
    case ExperimentKind::AdaptiveScenarios: return "adaptive_scenarios";
    case ExperimentKind::Poisson: return "poisson";
    case ExperimentKind::GapLab: return "gap_lab";
    case ExperimentKind::TvDecay: return "tv_decay";
    case ExperimentKind::AcceptanceOrder: return "acceptance_order";
  }
  return "unknown";
}

ExperimentKind experiment_from_string(const std::string& name) {
  std::string key = name;
  std::replace(key.begin(), key.end(), '-', '_');
  if (key == "adaptive") key = "adaptive_scenarios";
  for (auto k : {ExperimentKind::SweepStepsize, ExperimentKind::Scaling,
                 ExperimentKind::AdaptiveScenarios, ExperimentKind::Poisson,
                 ExperimentKind::GapLab, ExperimentKind::TvDecay,
                 ExperimentKind::AcceptanceOrder})
    if (to_string(k) == key) return k;
  throw ConfigError("experiment", "unknown experiment '" + name + "'");
}

// -- configuration ---------------------------------------------------------

json default_config(ExperimentKind kind) {
  json c = {{"experiment", to_string(kind)},
            {"seed", 20240601},
            {"replicates", 1},
            {"threads", 1},
            {"output_dir", "results/" + to_string(kind)}};
  switch (kind) {
    case ExperimentKind::SweepStepsize:
      c["samplers"] = {"RWM", "MALA", "Barker"};
      c["target"] = {{"kind", "gaussian"}};
      c["dim"] = 1;
      c["sigma_grid"] = {{"from", 0.01}, {"to", 100.0}, {"points", 41}};
      c["n_steps"] = 100000;
      c["large_sigma_from"] = 10.0;
      break;
    case ExperimentKind::Scaling:
      c["samplers"] = {"RWM", "MALA", "Barker"};
      c["targets"] = json::array({{{"kind", "gaussian"}},
                                  {{"kind", "hyperbolic"}, {"epsilon", 0.1}}});
      c["dims"] = {10, 31, 100, 316, 1000};
      c["sigma_multipliers"] = {{"from", 0.25}, {"to", 4.0}, {"points", 13}};
      c["n_steps"] = 5000;
      break;
    case ExperimentKind::AdaptiveScenarios:
      c["samplers"] = {"RWM", "MALA", "Barker"};
      c["scenarios"] = {1, 2, 3, 4};
      c["dim"] = 100;
      c["n_steps"] = 20000;
      c["replicates"] = 10;
      c["kappa"] = 0.6;
      c["init_sd"] = 10.0;
      c["epsilon"] = 1.0;
      c["mse_checkpoints"] = {10000, 20000};
      c["dt_every"] = 100;
      c["diagonal_only"] = true;
      break;
    case ExperimentKind::Poisson:
      c["samplers"] = {"RWM", "MALA", "Barker", "HMC"};
      c["scenarios"] = {1, 2, 3};
      c["groups"] = 50;
      c["group_size"] = 5;
      c["n_steps"] = 20000;
      c["hmc_steps"] = 2000;
      c["hmc_L"] = 10;
      c["replicates"] = 5;
      c["kappa"] = 0.6;
      break;
    case ExperimentKind::GapLab:
      c["samplers"] = {"RWM", "Barker", "MALA"};
      c["target"] = {{"kind", "gaussian"}};
      c["lambda_grid"] = {1.0, 0.5, 0.25, 0.125, 0.0625};
      c["sigma"] = "gap_optimal";
      c["half_width_sds"] = 8.0;
      c["points_per_scale"] = 20.0;
      c["min_points"] = 161;
      break;
    case ExperimentKind::TvDecay:
      c["samplers"] = {"Barker", "MALA"};
      c["target"] = {{"kind", "skew_normal"}, {"alpha", 4.0}};
      c["lambda_grid"] = {10.0, 100.0, 1000.0, 10000.0};
      c["sigma"] = 1.0;
      c["x"] = 0.0;
      break;
    case ExperimentKind::AcceptanceOrder:
      c["samplers"] = {"RWM", "MALA", "Barker"};
      c["target"] = {{"kind", "gaussian"}};
      c["sigma_grid"] = {{"from", 1e-3}, {"to", 1e-1}, {"points", 9}};
      c["pairs"] = json::array({{0.7, 1.0}});
      c["random_pairs"] = 4;
      break;
  }
  return c;
}

namespace {

bool is_integer(const json& v) { return v.is_number_integer() || v.is_number_unsigned(); }

void require(bool ok, const std::string& path, const std::string& message) {
  if (!ok) throw ConfigError(path, message);
}

void check_positive_number(const json& v, const std::string& path) {
  require(v.is_number(), path, "expected a number");
  require(v.get<double>() > 0.0 && std::isfinite(v.get<double>()), path,
          "expected a positive number");
}

void check_positive_int(const json& v, const std::string& path) {
  require(is_integer(v), path, "expected an integer");
  require(v.get<long long>() >= 1, path, "expected an integer >= 1");
}

void check_grid(const json& v, const std::string& path) {
  if (v.is_object()) {
    for (auto it = v.begin(); it != v.end(); ++it)
      require(it.key() == "from" || it.key() == "to" || it.key() == "points",
              path + "." + it.key(), "unknown key");
    for (const char* k : {"from", "to", "points"})
      require(v.contains(k), path + "." + k, "missing");
    check_positive_number(v["from"], path + ".from");
    check_positive_number(v["to"], path + ".to");
    check_positive_int(v["points"], path + ".points");
    require(v["to"].get<double>() >= v["from"].get<double>(), path + ".to",
            "must be >= from");
    return;
  }
  require(v.is_array(), path, "expected an array or {from, to, points}");
  require(!v.empty(), path, "grid must be nonempty");
  for (std::size_t i = 0; i < v.size(); ++i)
    check_positive_number(v[i], path + "[" + std::to_string(i) + "]");
}

std::vector<double> read_grid(const json& v) {
  if (v.is_object())
    return log_grid(v["from"].get<double>(), v["to"].get<double>(), v["points"].get<int>());
  return v.get<std::vector<double>>();
}

void check_target(const json& v, const std::string& path) {
  require(v.is_object(), path, "expected an object");
  require(v.contains("kind") && v["kind"].is_string(), path + ".kind",
          "expected a string");
  const std::string kind = v["kind"];
  static const std::map<std::string, std::set<std::string>> allowed = {
      {"gaussian", {"kind", "scale"}},
      {"hyperbolic", {"kind", "scale", "epsilon"}},
      {"skew_normal", {"kind", "scale", "alpha"}},
      {"exponential_family", {"kind", "alpha", "beta"}}};
  auto it = allowed.find(kind);
  require(it != allowed.end(), path + ".kind",
          "expected gaussian, hyperbolic, skew_normal or exponential_family");
  for (auto f = v.begin(); f != v.end(); ++f) {
    require(it->second.count(f.key()) > 0, path + "." + f.key(), "unknown key for " + kind);
    if (f.key() == "kind") continue;
    if (f.key() == "alpha" && kind == "skew_normal") {
      require(f->is_number(), path + ".alpha", "expected a number");
    } else {
      check_positive_number(*f, path + "." + f.key());
    }
  }
}

void check_samplers(const json& v, const std::string& path) {
  require(v.is_array() && !v.empty(), path, "expected a nonempty array of sampler names");
  for (std::size_t i = 0; i < v.size(); ++i) {
    const std::string p = path + "[" + std::to_string(i) + "]";
    require(v[i].is_string(), p, "expected a string");
    try {
      family_from_string(v[i].get<std::string>());
    } catch (const UsageError&) {
      throw ConfigError(p, "unknown sampler '" + v[i].get<std::string>() + "'");
    }
  }
}

void check_int_list(const json& v, const std::string& path, long long lo, long long hi) {
  require(v.is_array() && !v.empty(), path, "expected a nonempty array");
  for (std::size_t i = 0; i < v.size(); ++i) {
    const std::string p = path + "[" + std::to_string(i) + "]";
    require(is_integer(v[i]), p, "expected an integer");
    const long long x = v[i].get<long long>();
    require(x >= lo && x <= hi, p,
            "expected a value in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
  }
}

}  // namespace

void validate_config(const json& config) {
  require(config.is_object(), "config", "expected a JSON object");
  require(config.contains("experiment") && config["experiment"].is_string(),
          "config.experiment", "expected a string");
  const ExperimentKind kind = experiment_from_string(config["experiment"]);
  const json defaults = default_config(kind);
  for (auto it = config.begin(); it != config.end(); ++it)
    require(defaults.contains(it.key()), "config." + it.key(),
            "unknown key for " + to_string(kind));
  for (auto it = defaults.begin(); it != defaults.end(); ++it)
    require(config.contains(it.key()), "config." + it.key(), "missing");

  const auto p = [](const std::string& k) { return "config." + k; };
  require(is_integer(config["seed"]) && config["seed"].get<long long>() >= 0, p("seed"),
          "expected a nonnegative integer");
  check_positive_int(config["replicates"], p("replicates"));
  check_positive_int(config["threads"], p("threads"));
  require(config["output_dir"].is_string() && !config["output_dir"].get<std::string>().empty(),
          p("output_dir"), "expected a nonempty string");
  check_samplers(config["samplers"], p("samplers"));

  for (auto it = config.begin(); it != config.end(); ++it) {
    const std::string& k = it.key();
    const json& v = *it;
    const std::string path = p(k);
    if (k == "experiment" || k == "seed" || k == "replicates" || k == "threads" ||
        k == "output_dir" || k == "samplers")
      continue;
    if (k == "target") {
      check_target(v, path);
    } else if (k == "targets") {
      require(v.is_array() && !v.empty(), path, "expected a nonempty array");
      for (std::size_t i = 0; i < v.size(); ++i)
        check_target(v[i], path + "[" + std::to_string(i) + "]");
    } else if (k == "sigma_grid" || k == "sigma_multipliers" || k == "lambda_grid") {
      check_grid(v, path);
    } else if (k == "dims") {
      check_int_list(v, path, 1, 100000);
    } else if (k == "scenarios") {
      check_int_list(v, path, 1, kind == ExperimentKind::Poisson ? 3 : 4);
    } else if (k == "mse_checkpoints") {
      check_int_list(v, path, 2, 1LL << 40);
    } else if (k == "kappa") {
      require(v.is_number() && v.get<double>() > 0.5 && v.get<double>() < 1.0, path,
              "expected a number in (0.5, 1)");
    } else if (k == "diagonal_only") {
      require(v.is_boolean(), path, "expected a boolean");
    } else if (k == "pairs") {
      require(v.is_array(), path, "expected an array of [x, u] pairs");
      for (std::size_t i = 0; i < v.size(); ++i)
        require(v[i].is_array() && v[i].size() == 2 && v[i][0].is_number() &&
                    v[i][1].is_number() && v[i][1].get<double>() != 0.0,
                path + "[" + std::to_string(i) + "]", "expected [x, u] with u != 0");
    } else if (k == "random_pairs") {
      require(is_integer(v) && v.get<long long>() >= 0, path, "expected an integer >= 0");
    } else if (k == "sigma" && kind == ExperimentKind::GapLab) {
      require((v.is_string() && v.get<std::string>() == "gap_optimal") ||
                  (v.is_number() && v.get<double>() > 0.0),
              path, "expected a positive number or \"gap_optimal\"");
    } else if (k == "x") {
      require(v.is_number(), path, "expected a number");
    } else if (defaults[k].is_number_integer() || defaults[k].is_number_unsigned()) {
      check_positive_int(v, path);
    } else if (defaults[k].is_number()) {
      check_positive_number(v, path);
    } else {
      throw ConfigError(path, "unhandled key");
    }
  }
  if (kind == ExperimentKind::AcceptanceOrder) {
    require(!config["pairs"].empty() || config["random_pairs"].get<long long>() > 0,
            p("pairs"), "need at least one (x, u) pair");
    for (const auto& s : config["samplers"])
      require(family_from_string(s) != Family::HMC, p("samplers"),
              "HMC has no position-space acceptance ratio");
  }
  if (kind == ExperimentKind::GapLab || kind == ExperimentKind::TvDecay) {
    for (const auto& s : config["samplers"])
      require(family_from_string(s) != Family::HMC, p("samplers"),
              "HMC has no tractable 1-d proposal density");
  }
  if (kind == ExperimentKind::SweepStepsize || kind == ExperimentKind::GapLab ||
      kind == ExperimentKind::TvDecay || kind == ExperimentKind::AcceptanceOrder) {
    if (config.contains("dim") && kind != ExperimentKind::SweepStepsize)
      check_positive_int(config["dim"], p("dim"));
  }
}

json resolve_config(const json& user) {
  require(user.is_object(), "config", "expected a JSON object");
  require(user.contains("experiment") && user["experiment"].is_string(), "config.experiment",
          "expected a string");
  const ExperimentKind kind = experiment_from_string(user["experiment"]);
  json c = default_config(kind);
  for (auto it = user.begin(); it != user.end(); ++it) {
    if (it.key() == "experiment") continue;
    c[it.key()] = *it;
  }
  validate_config(c);
  return c;
}

std::string experiment_help(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::SweepStepsize:
      return "sweep_stepsize.csv: sampler,sigma,replicate,esjd,accept_rate\n"
             "sweep_stepsize_summary.csv: sampler,sigma_opt,esjd_opt,sigma_probe,"
             "esjd_probe,decay_ratio\n";
    case ExperimentKind::Scaling:
      return "scaling.csv: target,sampler,d,sigma_opt,esjd_per_coord,accept_rate\n"
             "scaling_fit.csv: target,sampler,slope,r2\n";
    case ExperimentKind::AdaptiveScenarios:
      return "adaptive_scenarios.csv: scenario,sampler,tau_adapt,tau_censored,mse_<t>...,"
             "final_d,mean_accept\n"
             "adaptive_dt.csv: scenario,sampler,t,d_t\n";
    case ExperimentKind::Poisson:
      return "poisson.csv: scenario,method,iterations,leapfrog_per_iter,grad_calls,"
             "ess_min,ess_median,ess_min_per_100g,ess_min_per_100g_sd,mean_accept,"
             "divergences\n";
    case ExperimentKind::GapLab:
      return "gap_lab.csv: family,sigma,lambda,n,L,gap,log_gap,conductance_K,"
             "refinement_change,stable\n";
    case ExperimentKind::TvDecay:
      return "tv_decay.csv: family,lambda,tv\n"
             "tv_decay_fit.csv: family,slope,r2\n";
    case ExperimentKind::AcceptanceOrder:
      return "acceptance_order.csv: family,x,u,slope,intercept,r2\n";
  }
  return "";
}

// -- tables ----------------------------------------------------------------

void Table::add(std::vector<Cell> row) {
  if (row.size() != columns.size())
    throw UsageError("table " + name + ": row has " + std::to_string(row.size()) +
                     " cells, expected " + std::to_string(columns.size()));
  rows.push_back(std::move(row));
}

std::string Table::to_csv() const {
  std::string out;
  for (std::size_t i = 0; i < columns.size(); ++i) {
    if (i) out += ',';
    out += columns[i];
  }
  out += '\n';
  char buf[40];
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out += ',';
      if (const auto* s = std::get_if<std::string>(&row[i])) {
        out += *s;
      } else if (const auto* n = std::get_if<long long>(&row[i])) {
        out += std::to_string(*n);
      } else {
        std::snprintf(buf, sizeof buf, "%.17g", std::get<double>(row[i]));
        out += buf;
      }
    }
    out += '\n';
  }
  return out;
}

// -- utilities -------------------------------------------------------------

void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn) {
  const int workers = std::max(1, std::min<int>(threads, static_cast<int>(n)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= n) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!error) error = std::current_exception();
          next.store(n);
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

namespace {

// Streams are keyed on the family rather than its position in the config, so
// dropping a sampler from the list leaves the other rows unchanged.
std::uint64_t family_id(Family f) { return static_cast<std::uint64_t>(f); }

}  // namespace

std::uint64_t task_seed(std::uint64_t master, std::initializer_list<std::uint64_t> ids) {
  std::uint64_t s = master;
  for (auto id : ids) s = stream_seed(s, id);
  return s;
}

std::vector<double> log_grid(double lo, double hi, int points) {
  if (!(lo > 0.0) || !(hi >= lo) || points < 1) throw UsageError("log_grid: bad range");
  if (points == 1) return {lo};
  std::vector<double> g(points);
  const double a = std::log(lo), b = std::log(hi);
  for (int i = 0; i < points; ++i) g[i] = std::exp(a + (b - a) * i / (points - 1));
  g.front() = lo;
  g.back() = hi;
  return g;
}

std::size_t argmax_esjd(const std::vector<double>& esjd_values) {
  if (esjd_values.empty()) throw UsageError("argmax_esjd: empty grid");
  std::size_t best = 0;
  for (std::size_t i = 1; i < esjd_values.size(); ++i)
    if (esjd_values[i] > esjd_values[best]) best = i;
  return best;
}

TargetModel target_from_config(const json& spec, int d) {
  const std::string kind = spec.at("kind");
  const double scale = spec.value("scale", 1.0);
  const Vector scales = Vector::Constant(d, scale);
  if (kind == "gaussian") return make_gaussian(scales);
  if (kind == "hyperbolic") return make_hyperbolic(scales, spec.value("epsilon", 0.1));
  if (kind == "skew_normal") return make_skew_normal(scales, spec.value("alpha", 4.0));
  if (kind == "exponential_family")
    return make_exponential_family(d, spec.value("alpha", 1.0), spec.value("beta", 2.0));
  throw ConfigError("target.kind", "unknown target kind '" + kind + "'");
}

namespace {

struct PointRun {
  double esjd_per_coord = 0.0;
  double accept = 0.0;
  long divergences = 0;
  long steps = 0;
};

// Runs at stationarity when an exact draw exists; otherwise discards a
// burn-in of n_steps / 5.
PointRun run_point(const ProposalKernel& kernel, const TargetModel& target, long n_steps,
                   std::uint64_t seed) {
  Rng rng(seed);
  auto start = target.exact_draw(rng);
  long burn = 0;
  if (!start) {
    start = target.known_mean() ? *target.known_mean() : Vector(Vector::Zero(target.dim()));
    burn = n_steps / 5;
  }
  TraceOptions opt;
  opt.store_samples = false;
  opt.store_proposals = false;
  const Trace tr = run_chain(*start, kernel, target, n_steps + burn, rng, opt);
  PointRun r;
  const long n = n_steps;
  const auto a = tr.accept_prob.tail(n);
  const auto j = tr.proposed_sq_jump.tail(n);
  r.esjd_per_coord = a.dot(j) / n / target.dim();
  r.accept = a.mean();
  r.divergences = tr.divergences;
  r.steps = tr.n_steps();
  return r;
}

// JSON has no infinities; keep them readable in the manifest.
json finite_or_string(double v) {
  if (std::isfinite(v)) return v;
  if (std::isnan(v)) return "nan";
  return v > 0 ? "inf" : "-inf";
}

bool divergence_storm(long divergences, long steps) { return 2 * divergences >= steps; }

std::vector<Family> samplers_of(const json& c) {
  std::vector<Family> out;
  for (const auto& s : c["samplers"]) out.push_back(family_from_string(s));
  return out;
}

double fit_slope_loglog(const std::vector<double>& x, const std::vector<double>& y,
                        double* r2 = nullptr) {
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < x.size(); ++i) {
    lx.push_back(std::log(x[i]));
    ly.push_back(std::log(y[i]));
  }
  const LinearFit f = fit_line(lx, ly);
  if (r2) *r2 = f.r2;
  return f.slope;
}

}  // namespace

SigmaSearch optimal_sigma_search(const ProposalKernel& kernel, const TargetModel& target,
                                 const std::vector<double>& sigma_grid, long n_steps,
                                 std::uint64_t seed) {
  if (sigma_grid.empty()) throw UsageError("optimal_sigma_search: empty grid");
  SigmaSearch s;
  for (std::size_t i = 0; i < sigma_grid.size(); ++i) {
    ProposalKernel k = kernel;
    k.sigma = sigma_grid[i];
    const PointRun r = run_point(k, target, n_steps, stream_seed(seed, i));
    s.esjd_by_sigma.push_back(r.esjd_per_coord);
    s.accept_by_sigma.push_back(r.accept);
  }
  const std::size_t best = argmax_esjd(s.esjd_by_sigma);
  s.sigma = sigma_grid[best];
  s.esjd = s.esjd_by_sigma[best];
  return s;
}

// -- experiments -----------------------------------------------------------

namespace {

ExperimentResult run_sweep_stepsize(const json& c) {
  const auto families = samplers_of(c);
  const auto grid = read_grid(c["sigma_grid"]);
  const int reps = c["replicates"];
  const long n = c["n_steps"];
  const std::uint64_t seed = c["seed"];
  const TargetModel target = target_from_config(c["target"], c["dim"]);
  const int threads = c["threads"];

  const std::size_t per_family = grid.size() * reps;
  std::vector<PointRun> runs(families.size() * per_family);
  parallel_for(runs.size(), threads, [&](std::size_t idx) {
    const std::size_t f = idx / per_family;
    const std::size_t k = (idx % per_family) / reps;
    const std::size_t r = idx % reps;
    runs[idx] = run_point(ProposalKernel::of(families[f], grid[k]), target, n,
                          task_seed(seed, {family_id(families[f]), k, r}));
  });

  ExperimentResult res;
  Table t{"sweep_stepsize", {"sampler", "sigma", "replicate", "esjd", "accept_rate"}, {}};
  std::vector<std::vector<double>> mean_esjd(families.size(), std::vector<double>(grid.size()));
  for (std::size_t f = 0; f < families.size(); ++f)
    for (std::size_t k = 0; k < grid.size(); ++k)
      for (int r = 0; r < reps; ++r) {
        const PointRun& p = runs[f * per_family + k * reps + r];
        t.add({to_string(families[f]), grid[k], (long long)r, p.esjd_per_coord, p.accept});
        mean_esjd[f][k] += p.esjd_per_coord / reps;
        if (divergence_storm(p.divergences, p.steps)) ++res.warnings;
      }
  res.tables.push_back(std::move(t));

  // Probe every sampler at 10 sigma_opt(MALA) (or 10 sigma_opt of the first
  // sampler when MALA is absent) and at 10 times its own optimum.
  std::vector<double> sigma_opt(families.size()), esjd_opt(families.size());
  for (std::size_t f = 0; f < families.size(); ++f) {
    const std::size_t b = argmax_esjd(mean_esjd[f]);
    sigma_opt[f] = grid[b];
    esjd_opt[f] = mean_esjd[f][b];
  }
  std::size_t ref = 0;
  for (std::size_t f = 0; f < families.size(); ++f)
    if (families[f] == Family::MALA) ref = f;
  const double probe = 10.0 * sigma_opt[ref];
  std::vector<double> at_probe(families.size()), at_own(families.size());
  parallel_for(2 * families.size(), threads, [&](std::size_t idx) {
    const std::size_t f = idx / 2;
    const bool own = idx % 2 == 1;
    const double s = own ? 10.0 * sigma_opt[f] : probe;
    double acc = 0.0;
    for (int r = 0; r < reps; ++r)
      acc += run_point(ProposalKernel::of(families[f], s), target, n,
                       task_seed(seed, {1000 + 2 * family_id(families[f]) + own, (std::uint64_t)r}))
                 .esjd_per_coord;
    (own ? at_own : at_probe)[f] = acc / reps;
  });
  Table s{"sweep_stepsize_summary",
          {"sampler", "sigma_opt", "esjd_opt", "sigma_probe", "esjd_probe", "decay_ratio"},
          {}};
  json summary = json::object();
  for (std::size_t f = 0; f < families.size(); ++f) {
    const double decay = esjd_opt[f] / at_own[f];
    s.add({to_string(families[f]), sigma_opt[f], esjd_opt[f], probe, at_probe[f], decay});
    summary[to_string(families[f])] = {{"sigma_opt", sigma_opt[f]},
                                       {"esjd_opt", esjd_opt[f]},
                                       {"esjd_at_probe", at_probe[f]},
                                       {"esjd_at_own_10x", at_own[f]},
                                       {"decay_ratio", decay}};
  }
  summary["sigma_probe"] = probe;
  std::size_t mala = families.size(), barker_idx = families.size();
  for (std::size_t f = 0; f < families.size(); ++f) {
    if (families[f] == Family::MALA) mala = f;
    if (families[f] == Family::Barker) barker_idx = f;
  }
  if (mala < families.size() && barker_idx < families.size())
    summary["barker_over_mala_at_probe"] = finite_or_string(at_probe[barker_idx] / at_probe[mala]);
  // Largest RWM/Barker disagreement over the large-sigma end of the grid.
  std::size_t rwm = families.size(), bar = families.size();
  for (std::size_t f = 0; f < families.size(); ++f) {
    if (families[f] == Family::RWM) rwm = f;
    if (families[f] == Family::Barker) bar = f;
  }
  if (rwm < families.size() && bar < families.size()) {
    double worst = 1.0;
    for (std::size_t k = 0; k < grid.size(); ++k) {
      if (grid[k] < c["large_sigma_from"].get<double>()) continue;
      const double r = mean_esjd[rwm][k] / mean_esjd[bar][k];
      worst = std::max(worst, std::max(r, 1.0 / r));
    }
    summary["rwm_barker_large_sigma_max_ratio"] = worst;
  }
  res.tables.push_back(std::move(s));
  res.summary = summary;
  return res;
}

ExperimentResult run_scaling(const json& c) {
  const auto families = samplers_of(c);
  const auto dims = c["dims"].get<std::vector<int>>();
  const auto mult = read_grid(c["sigma_multipliers"]);
  const long n = c["n_steps"];
  const int reps = c["replicates"];
  const std::uint64_t seed = c["seed"];
  const json targets = c["targets"];

  struct Cellres {
    double sigma = 0, esjd = 0, accept = 0;
    long warnings = 0;
  };
  const std::size_t nt = targets.size(), nf = families.size(), nd = dims.size();
  std::vector<Cellres> out(nt * nf * nd);
  parallel_for(out.size(), c["threads"], [&](std::size_t idx) {
    const std::size_t t = idx / (nf * nd), f = (idx / nd) % nf, k = idx % nd;
    const int d = dims[k];
    const TargetModel target = target_from_config(targets[t], d);
    const double base = default_initialization(families[f], d).sigma0;
    std::vector<double> esjd(mult.size(), 0.0), acc(mult.size(), 0.0);
    Cellres cr;
    for (std::size_t m = 0; m < mult.size(); ++m)
      for (int r = 0; r < reps; ++r) {
        const PointRun p = run_point(ProposalKernel::of(families[f], base * mult[m]), target,
                                     n, task_seed(seed, {t, family_id(families[f]), (std::uint64_t)d, m, (std::uint64_t)r}));
        esjd[m] += p.esjd_per_coord / reps;
        acc[m] += p.accept / reps;
        if (divergence_storm(p.divergences, p.steps)) ++cr.warnings;
      }
    const std::size_t b = argmax_esjd(esjd);
    cr.sigma = base * mult[b];
    cr.esjd = esjd[b];
    cr.accept = acc[b];
    out[idx] = cr;
  });

  ExperimentResult res;
  Table tab{"scaling", {"target", "sampler", "d", "sigma_opt", "esjd_per_coord", "accept_rate"},
            {}};
  Table fit{"scaling_fit", {"target", "sampler", "slope", "r2"}, {}};
  json summary = json::object();
  for (std::size_t t = 0; t < nt; ++t) {
    const std::string tname = targets[t]["kind"];
    std::map<Family, std::vector<double>> curves;
    for (std::size_t f = 0; f < nf; ++f) {
      std::vector<double> ds, es;
      for (std::size_t k = 0; k < nd; ++k) {
        const Cellres& cr = out[(t * nf + f) * nd + k];
        tab.add({tname, to_string(families[f]), (long long)dims[k], cr.sigma, cr.esjd,
                 cr.accept});
        ds.push_back(dims[k]);
        es.push_back(cr.esjd);
        res.warnings += cr.warnings;
      }
      curves[families[f]] = es;
      if (nd >= 2) {
        double r2 = 0.0;
        const double slope = fit_slope_loglog(ds, es, &r2);
        fit.add({tname, to_string(families[f]), slope, r2});
        summary[tname]["slope"][to_string(families[f])] = slope;
      }
    }
    if (curves.count(Family::MALA) && curves.count(Family::Barker)) {
      std::vector<double> ratio;
      for (std::size_t k = 0; k < nd; ++k)
        ratio.push_back(curves[Family::MALA][k] / curves[Family::Barker][k]);
      summary[tname]["mala_over_barker"] = ratio;
    }
  }
  summary["dims"] = dims;
  res.tables.push_back(std::move(tab));
  res.tables.push_back(std::move(fit));
  res.summary = summary;
  return res;
}

TargetModel scenario_target(int scenario, int d, const Vector& eta) {
  switch (scenario) {
    case 1: {
      Vector s = Vector::Ones(d);
      s[0] = 0.01;
      return make_gaussian(s);
    }
    case 2: return make_gaussian(eta);
    case 3: return make_hyperbolic(eta, 0.1);
    case 4: return make_skew_normal(eta, 4.0);
  }
  throw UsageError("unknown scenario");
}

ExperimentResult run_adaptive(const json& c) {
  const auto families = samplers_of(c);
  const auto scenarios = c["scenarios"].get<std::vector<int>>();
  const int d = c["dim"];
  const long n = c["n_steps"];
  const int reps = c["replicates"];
  const double kappa = c["kappa"];
  const double init_sd = c["init_sd"];
  const double eps = c["epsilon"];
  const long dt_every = c["dt_every"];
  const bool diag = c["diagonal_only"];
  const std::uint64_t seed = c["seed"];
  std::vector<long> checkpoints = c["mse_checkpoints"].get<std::vector<long>>();

  // Random scales are drawn once per experiment seed and shared by
  // scenarios 2 to 4.
  Vector eta(d);
  {
    Rng rng(task_seed(seed, {7777}));
    for (int i = 0; i < d; ++i) eta[i] = std::exp(rng.normal());
  }

  struct RepOut {
    std::vector<double> dt;
    std::vector<double> mse;
    double accept = 0.0;
    long divergences = 0;
  };
  const std::size_t ns = scenarios.size(), nf = families.size();
  std::vector<RepOut> out(ns * nf * reps);
  parallel_for(out.size(), c["threads"], [&](std::size_t idx) {
    const std::size_t s = idx / (nf * reps), f = (idx / reps) % nf, r = idx % reps;
    const TargetModel target = scenario_target(scenarios[s], d, eta);
    const Vector truth_cov = *target.known_cov_diag();
    Rng rng(task_seed(seed, {(std::uint64_t)scenarios[s], family_id(families[f]), r}));
    Vector init(d);
    for (int i = 0; i < d; ++i) init[i] = init_sd * rng.normal();
    AdaptationState state = make_adaptation_state(families[f], d, kappa, diag);
    RepOut& o = out[idx];
    o.dt.reserve(n);
    MseAccumulator mse(*target.known_mean(), *target.scales(), checkpoints);
    AdaptiveOptions opt;
    opt.trace.store_samples = false;
    opt.trace.store_proposals = false;
    opt.record_every = 0;
    opt.observer = [&](const ChainState& st, const StepResult&, const AdaptationState& a) {
      o.dt.push_back(tuning_distance(a.sigma_diag, truth_cov));
      mse.push(st.x);
    };
    const AdaptiveRun run =
        run_chain_adaptive(init, ProposalKernel::of(families[f], 1.0), state, target, n, rng,
                           opt);
    o.accept = run.trace.mean_accept();
    o.divergences = run.trace.divergences;
    for (std::size_t k = 0; k < checkpoints.size(); ++k) o.mse.push_back(mse.mse(k));
  });

  ExperimentResult res;
  std::vector<std::string> cols = {"scenario", "sampler", "tau_adapt", "tau_censored"};
  for (long cp : checkpoints) cols.push_back("mse_" + std::to_string(cp));
  cols.push_back("final_d");
  cols.push_back("mean_accept");
  Table tab{"adaptive_scenarios", cols, {}};
  Table dts{"adaptive_dt", {"scenario", "sampler", "t", "d_t"}, {}};
  json summary = json::object();
  for (std::size_t s = 0; s < ns; ++s) {
    for (std::size_t f = 0; f < nf; ++f) {
      std::vector<double> mean_dt(n, 0.0);
      std::vector<double> mean_mse(checkpoints.size(), 0.0);
      double acc = 0.0;
      for (int r = 0; r < reps; ++r) {
        const RepOut& o = out[(s * nf + f) * reps + r];
        for (long t = 0; t < n; ++t) mean_dt[t] += o.dt[t] / reps;
        for (std::size_t k = 0; k < checkpoints.size(); ++k) mean_mse[k] += o.mse[k] / reps;
        acc += o.accept / reps;
        if (divergence_storm(o.divergences, n)) ++res.warnings;
      }
      const auto tau = tau_adapt(mean_dt, eps);
      const std::string name = to_string(families[f]);
      std::vector<Cell> row = {(long long)scenarios[s], name, format_tau(tau, n),
                               (long long)(tau ? 0 : 1)};
      for (double m : mean_mse) row.push_back(m);
      row.push_back(mean_dt.back());
      row.push_back(acc);
      tab.add(std::move(row));
      for (long t = dt_every; t <= n; t += dt_every)
        dts.add({(long long)scenarios[s], name, (long long)t, mean_dt[t - 1]});
      json entry = {{"tau_adapt", tau ? json(*tau) : json(nullptr)},
                    {"tau_display", format_tau(tau, n)},
                    {"final_d", mean_dt.back()},
                    {"mean_accept", acc}};
      for (std::size_t k = 0; k < checkpoints.size(); ++k)
        entry["mse"][std::to_string(checkpoints[k])] = mean_mse[k];
      summary[std::to_string(scenarios[s])][name] = entry;
    }
  }
  res.tables.push_back(std::move(tab));
  res.tables.push_back(std::move(dts));
  res.summary = summary;
  return res;
}

struct PoissonScenario {
  double sigma_eta;
  double mu_star;
};

PoissonScenario poisson_scenario(int s) {
  switch (s) {
    case 1: return {1.0, 5.0};
    case 2: return {3.0, 5.0};
    case 3: return {3.0, 10.0};
  }
  throw UsageError("unknown Poisson scenario");
}

ExperimentResult run_poisson(const json& c) {
  const auto families = samplers_of(c);
  const auto scenarios = c["scenarios"].get<std::vector<int>>();
  const int reps = c["replicates"];
  const long n = c["n_steps"];
  const long n_hmc = c["hmc_steps"];
  const int hmc_L = c["hmc_L"];
  const double kappa = c["kappa"];
  const std::uint64_t seed = c["seed"];

  std::vector<PoissonDataset> data;
  for (int s : scenarios) {
    const auto sc = poisson_scenario(s);
    data.push_back(generate_poisson_data(sc.mu_star, sc.sigma_eta, c["groups"],
                                         c["group_size"], task_seed(seed, {500, (std::uint64_t)s})));
  }

  struct RepOut {
    double ess_min = 0, ess_median = 0, accept = 0;
    long grad = 0, divergences = 0, steps = 0;
  };
  const std::size_t ns = scenarios.size(), nf = families.size();
  std::vector<RepOut> out(ns * nf * reps);
  parallel_for(out.size(), c["threads"], [&](std::size_t idx) {
    const std::size_t s = idx / (nf * reps), f = (idx / reps) % nf, r = idx % reps;
    const TargetModel target = make_poisson_hierarchical(data[s]);
    const int d = target.dim();
    Rng rng(task_seed(seed, {600, (std::uint64_t)scenarios[s], family_id(families[f]), r}));
    // Start from a prior draw.
    Vector init(d);
    init[0] = data[s].prior_sd_mu * rng.normal();
    for (int i = 1; i < d; ++i) init[i] = init[0] + data[s].sigma_eta * rng.normal();
    const bool hmc = families[f] == Family::HMC;
    const long steps = hmc ? n_hmc : n;
    ProposalKernel base =
        hmc ? ProposalKernel::hmc(1.0, hmc_L) : ProposalKernel::of(families[f], 1.0);
    AdaptationState state = make_adaptation_state(families[f], d, kappa, true);
    AdaptiveOptions opt;
    opt.trace.store_proposals = false;
    opt.record_every = 0;
    const AdaptiveRun run = run_chain_adaptive(init, base, state, target, steps, rng, opt);
    RepOut& o = out[idx];
    const long burn = steps / 2;
    std::vector<double> ess_values;
    for (int j = 0; j < d; ++j) {
      const Vector col = run.trace.samples.col(j).tail(steps - burn);
      ess_values.push_back(ess(col));
    }
    std::sort(ess_values.begin(), ess_values.end());
    o.ess_min = ess_values.front();
    o.ess_median = ess_values.size() % 2
                       ? ess_values[ess_values.size() / 2]
                       : 0.5 * (ess_values[ess_values.size() / 2 - 1] +
                                ess_values[ess_values.size() / 2]);
    o.grad = run.trace.grad_evals;
    o.accept = run.trace.mean_accept();
    o.divergences = run.trace.divergences;
    o.steps = steps;
  });

  ExperimentResult res;
  Table tab{"poisson",
            {"scenario", "method", "iterations", "leapfrog_per_iter", "grad_calls", "ess_min",
             "ess_median", "ess_min_per_100g", "ess_min_per_100g_sd", "mean_accept",
             "divergences"},
            {}};
  json summary = json::object();
  for (std::size_t s = 0; s < ns; ++s) {
    summary[std::to_string(scenarios[s])]["overflow_resamples"] = data[s].overflow_resamples;
    for (std::size_t f = 0; f < nf; ++f) {
      double emin = 0, emed = 0, acc = 0, grad = 0, div = 0;
      std::vector<double> per100;
      for (int r = 0; r < reps; ++r) {
        const RepOut& o = out[(s * nf + f) * reps + r];
        emin += o.ess_min / reps;
        emed += o.ess_median / reps;
        acc += o.accept / reps;
        grad += static_cast<double>(o.grad) / reps;
        div += static_cast<double>(o.divergences) / reps;
        if (o.grad > 0) per100.push_back(100.0 * o.ess_min / o.grad);
        if (divergence_storm(o.divergences, o.steps)) ++res.warnings;
      }
      double m100 = std::numeric_limits<double>::quiet_NaN(), sd100 = m100;
      if (!per100.empty()) {
        m100 = 0.0;
        for (double v : per100) m100 += v / per100.size();
        sd100 = 0.0;
        for (double v : per100) sd100 += (v - m100) * (v - m100);
        sd100 = per100.size() > 1 ? std::sqrt(sd100 / (per100.size() - 1)) : 0.0;
      }
      const bool hmc = families[f] == Family::HMC;
      const std::string name = to_string(families[f]);
      tab.add({(long long)scenarios[s], name, (long long)(hmc ? n_hmc : n),
               hmc ? Cell((long long)hmc_L) : Cell(std::string("-")), grad, emin, emed, m100,
               sd100, acc, div});
      summary[std::to_string(scenarios[s])][name] = {
          {"ess_min", emin}, {"ess_median", emed}, {"grad_calls", grad}, {"mean_accept", acc}};
    }
  }
  res.tables.push_back(std::move(tab));
  res.summary = summary;
  return res;
}

ExperimentResult run_gap_lab(const json& c) {
  const auto families = samplers_of(c);
  const auto lambdas = read_grid(c["lambda_grid"]);
  const TargetModel base = target_from_config(c["target"], 1);
  GapSweepOptions opt;
  opt.half_width_sds = c["half_width_sds"];
  opt.points_per_scale = c["points_per_scale"];
  opt.min_points = c["min_points"];
  std::vector<double> sigmas(families.size());
  std::vector<std::vector<GapSweepRow>> rows(families.size());
  parallel_for(families.size(), c["threads"], [&](std::size_t f) {
    // By default each kernel is tuned for lambda = 1 and then held fixed.
    const ProposalKernel k0 = ProposalKernel::of(families[f], 1.0);
    sigmas[f] = c["sigma"].is_number() ? c["sigma"].get<double>()
                                       : gap_optimal_sigma(k0, base, 0.05, 20.0, opt);
    rows[f] = gap_decay_sweep(ProposalKernel::of(families[f], sigmas[f]), base, lambdas, opt);
  });
  ExperimentResult res;
  Table tab{"gap_lab",
            {"family", "sigma", "lambda", "n", "L", "gap", "log_gap", "conductance_K",
             "refinement_change", "stable"},
            {}};
  json summary = json::object();
  for (std::size_t f = 0; f < families.size(); ++f) {
    const std::string name = to_string(families[f]);
    std::vector<double> inv2, lg, scaled;
    long unstable = 0;
    for (const auto& r : rows[f]) {
      tab.add({r.family, sigmas[f], r.lambda, (long long)r.n, r.L, r.gap, r.log_gap,
               r.conductance_right, r.refinement_change, (long long)(r.stable ? 1 : 0)});
      inv2.push_back(1.0 / (r.lambda * r.lambda));
      lg.push_back(r.log_gap);
      scaled.push_back(r.log_gap - std::log(r.lambda));
      if (!r.stable) ++unstable;
    }
    const auto [lo, hi] = std::minmax_element(scaled.begin(), scaled.end());
    summary[name] = {{"sigma", sigmas[f]},
                     {"log_gap_over_lambda_spread", *hi - *lo},
                     {"unstable_rows", unstable},
                     {"log_gap_at_smallest_lambda", lg.back()}};
    if (rows[f].size() >= 2) {
      const LinearFit fit = fit_line(inv2, lg);
      summary[name]["log_gap_vs_inv_lambda_sq"] = {{"slope", fit.slope}, {"r2", fit.r2}};
    }
  }
  res.tables.push_back(std::move(tab));
  res.summary = summary;
  return res;
}

// Candidate densities at x for a 1-d target with gradient `grad` there.
Density1d candidate_density(Family family, double grad, double sigma) {
  switch (family) {
    case Family::Barker:
    case Family::BarkerGlobalFlip:
      return [=](double w) { return std::exp(barker_log_density_1d(w, grad, sigma)); };
    case Family::MALA:
      return [=](double w) {
        return std::exp(log_normal_pdf(w - 0.5 * sigma * sigma * grad, sigma));
      };
    case Family::RWM:
      return [=](double w) { return std::exp(log_normal_pdf(w, sigma)); };
    default: break;
  }
  throw UsageError("tv_decay: unsupported family " + to_string(family));
}

ExperimentResult run_tv_decay(const json& c) {
  const auto families = samplers_of(c);
  const auto lambdas = read_grid(c["lambda_grid"]);
  const double sigma = c["sigma"];
  const double x = c["x"];
  const TargetModel base = target_from_config(c["target"], 1);
  ExperimentResult res;
  Table tab{"tv_decay", {"family", "lambda", "tv"}, {}};
  Table fit{"tv_decay_fit", {"family", "slope", "r2"}, {}};
  json summary = json::object();
  const Density1d rwm = candidate_density(Family::RWM, 0.0, sigma);
  for (Family f : families) {
    std::vector<double> tvs;
    for (double lambda : lambdas) {
      const TargetModel t = scale_family(base, lambda, 1);
      const double grad = t.grad_log_density(Vector::Constant(1, x))[0];
      const double tv =
          tv_distance_1d(candidate_density(f, grad, sigma), rwm, -12.0 * sigma, 12.0 * sigma);
      tvs.push_back(tv);
      tab.add({to_string(f), lambda, tv});
    }
    if (lambdas.size() >= 2) {
      double r2 = 0.0;
      const double slope = fit_slope_loglog(lambdas, tvs, &r2);
      fit.add({to_string(f), slope, r2});
      summary[to_string(f)] = {{"slope", slope}, {"r2", r2}};
    }
  }
  res.tables.push_back(std::move(tab));
  res.tables.push_back(std::move(fit));
  res.summary = summary;
  return res;
}

ExperimentResult run_acceptance_order(const json& c) {
  const auto families = samplers_of(c);
  const auto grid = read_grid(c["sigma_grid"]);
  const TargetModel target = target_from_config(c["target"], 1);
  std::vector<std::pair<double, double>> pairs;
  for (const auto& p : c["pairs"]) pairs.emplace_back(p[0].get<double>(), p[1].get<double>());
  Rng rng(task_seed(c["seed"], {900}));
  for (long i = 0; i < c["random_pairs"].get<long>(); ++i) {
    const double x = rng.normal();
    const double u = rng.normal();
    pairs.emplace_back(x, u);
  }
  ExperimentResult res;
  Table tab{"acceptance_order", {"family", "x", "u", "slope", "intercept", "r2"}, {}};
  json summary = json::object();
  for (Family f : families) {
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (const auto& [x, u] : pairs) {
      const auto fit = acceptance_order_fit(f, target, x, u, grid);
      tab.add({to_string(f), x, u, fit.fit.slope, fit.fit.intercept, fit.fit.r2});
      lo = std::min(lo, fit.fit.slope);
      hi = std::max(hi, fit.fit.slope);
    }
    summary[to_string(f)] = {{"min_slope", lo}, {"max_slope", hi}};
  }
  res.tables.push_back(std::move(tab));
  res.summary = summary;
  return res;
}

}  // namespace

ExperimentResult run_experiment(const json& config) {
  validate_config(config);
  switch (experiment_from_string(config["experiment"])) {
    case ExperimentKind::SweepStepsize: return run_sweep_stepsize(config);
    case ExperimentKind::Scaling: return run_scaling(config);
    case ExperimentKind::AdaptiveScenarios: return run_adaptive(config);
    case ExperimentKind::Poisson: return run_poisson(config);
    case ExperimentKind::GapLab: return run_gap_lab(config);
    case ExperimentKind::TvDecay: return run_tv_decay(config);
    case ExperimentKind::AcceptanceOrder: return run_acceptance_order(config);
  }
  throw UsageError("unknown experiment");
}

void write_experiment_outputs(const json& config, const ExperimentResult& result,
                              double wall_seconds) {
  namespace fs = std::filesystem;
  const fs::path dir = config["output_dir"].get<std::string>();
  fs::create_directories(dir);
  for (const Table& t : result.tables) {
    std::ofstream out(dir / (t.name + ".csv"), std::ios::binary);
    if (!out) throw UsageError("cannot write " + (dir / (t.name + ".csv")).string());
    out << t.to_csv();
  }
  json manifest = {{"config", config},
                   {"seed", config["seed"]},
                   {"summary", result.summary},
                   {"warnings", result.warnings},
                   {"wall_seconds", wall_seconds},
                   {"versions",
                    {{"barker", "1.0.0"},
                     {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." +
                                   std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                   std::to_string(EIGEN_MINOR_VERSION)},
                     {"compiler", __VERSION__}}}};
  std::vector<std::string> names;
  for (const Table& t : result.tables) names.push_back(t.name + ".csv");
  manifest["tables"] = names;
  std::ofstream out(dir / "manifest.json");
  if (!out) throw UsageError("cannot write manifest.json");
  out << manifest.dump(2) << '\n';
}

}  // namespace barker
