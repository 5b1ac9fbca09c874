#pragma once

// Seeded Monte Carlo driver: run configuration, presets, trial execution on
// a small thread pool, sweeps with common random numbers, and file output.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "pctl/baselines.hpp"

namespace pctl {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Configuration

struct RunConfig {
  std::string name = "run";
  ScenarioParams scenario{};
  std::string algorithm = "mqft";
  int n_null = 2;
  double step_fraction = 0.1;
  Schedule inner{};
  int max_outer = 100;
  double tol_outer = 1e-5;
  bool barrier = false;
  json utility = json{{"template", "slqp"}, {"q", 5.7}};
  int trials = 1;
  int slots = 1;
  int bands = 1;
  double alpha = 0.3;
  std::uint64_t seed = 1;
  /// Percentile used for the SLqP summary metric and long-term objective.
  double q = 5.7;
};

inline const std::vector<std::string>& known_algorithms() {
  static const std::vector<std::string> names = {
      "mqft",  "sgqp-wmse", "qft-power",      "lft-power",       "wmmse-pf",          "wmmse-sum", "cwsr",
      "zfn",   "equal",     "equal-bf",       "random-uniform", "random-rayleigh", "random-exponential"};
  return names;
}

inline bool is_beamforming(const std::string& a) {
  return a == "mqft" || a == "sgqp-wmse" || a == "cwsr" || a == "zfn" || a == "equal-bf";
}

namespace detail {

template <class T>
void read_opt(const json& j, const char* key, T& out, const std::string& path) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(path + "." + key, e.what());
  }
}

inline void require_object(const json& j, const std::string& path) {
  if (!j.is_object()) throw ConfigError(path, "expected an object");
}

inline void check_keys(const json& j, const std::string& path, std::initializer_list<const char*> allowed) {
  for (const auto& [k, v] : j.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || k == a;
    if (!ok) throw ConfigError(path + "." + k, "unknown field");
  }
}

}  // namespace detail

inline RunConfig parse_config(const json& j) {
  using detail::read_opt;
  detail::require_object(j, "config");
  detail::check_keys(j, "config", {"name", "scenario", "algorithm", "utility", "experiment"});
  RunConfig c;
  read_opt(j, "name", c.name, "config");

  if (j.contains("scenario")) {
    const json& s = j["scenario"];
    detail::require_object(s, "scenario");
    detail::check_keys(s, "scenario",
                       {"num_cells", "users_per_cell", "inter_site_m", "tx_antennas", "rx_antennas",
                        "noise_psd_dbm_hz", "bandwidth_hz", "p_max_dbm", "d0_m", "zeta"});
    auto& p = c.scenario;
    read_opt(s, "num_cells", p.num_cells, "scenario");
    if (s.contains("users_per_cell")) {
      if (s["users_per_cell"].is_number_integer()) {
        p.users_per_cell.assign(static_cast<std::size_t>(p.num_cells), s["users_per_cell"].get<int>());
      } else {
        read_opt(s, "users_per_cell", p.users_per_cell, "scenario");
      }
    } else {
      p.users_per_cell.resize(static_cast<std::size_t>(p.num_cells), p.users_per_cell.empty() ? 1 : p.users_per_cell.back());
    }
    read_opt(s, "inter_site_m", p.inter_site_m, "scenario");
    read_opt(s, "tx_antennas", p.tx_antennas, "scenario");
    read_opt(s, "rx_antennas", p.rx_antennas, "scenario");
    read_opt(s, "noise_psd_dbm_hz", p.noise_psd_dbm_hz, "scenario");
    read_opt(s, "bandwidth_hz", p.bandwidth_hz, "scenario");
    read_opt(s, "p_max_dbm", p.p_max_dbm, "scenario");
    read_opt(s, "d0_m", p.d0_m, "scenario");
    read_opt(s, "zeta", p.zeta, "scenario");
    if (p.num_cells != 1 && p.num_cells != 7) throw ConfigError("scenario.num_cells", "must be 1 or 7");
    if (p.users_per_cell.size() != static_cast<std::size_t>(p.num_cells)) {
      throw ConfigError("scenario.users_per_cell", "needs one entry per cell");
    }
    for (int u : p.users_per_cell) {
      if (u < 1) throw ConfigError("scenario.users_per_cell", "every cell needs at least one user");
    }
    if (p.tx_antennas < 1) throw ConfigError("scenario.tx_antennas", "must be >= 1");
    if (p.rx_antennas < 1) throw ConfigError("scenario.rx_antennas", "must be >= 1");
    if (!(p.inter_site_m > 0.0)) throw ConfigError("scenario.inter_site_m", "must be positive");
    if (!(p.bandwidth_hz > 0.0)) throw ConfigError("scenario.bandwidth_hz", "must be positive");
  }

  if (j.contains("algorithm")) {
    const json& a = j["algorithm"];
    if (a.is_string()) {
      c.algorithm = a.get<std::string>();
    } else {
      detail::require_object(a, "algorithm");
      detail::check_keys(a, "algorithm",
                         {"name", "n_null", "step_fraction", "max_iters", "tol_rel", "patience", "step_rule",
                          "max_outer", "tol_outer", "barrier"});
      read_opt(a, "name", c.algorithm, "algorithm");
      read_opt(a, "n_null", c.n_null, "algorithm");
      read_opt(a, "step_fraction", c.step_fraction, "algorithm");
      read_opt(a, "max_iters", c.inner.max_iters, "algorithm");
      read_opt(a, "tol_rel", c.inner.tol_rel, "algorithm");
      read_opt(a, "patience", c.inner.patience, "algorithm");
      read_opt(a, "max_outer", c.max_outer, "algorithm");
      read_opt(a, "tol_outer", c.tol_outer, "algorithm");
      read_opt(a, "barrier", c.barrier, "algorithm");
      if (a.contains("step_rule")) {
        const auto r = a["step_rule"].get<std::string>();
        if (r == "initial_norm") {
          c.inner.rule = StepRule::InitialNorm;
        } else if (r == "normalized") {
          c.inner.rule = StepRule::Normalized;
        } else {
          throw ConfigError("algorithm.step_rule", "expected initial_norm or normalized");
        }
      }
    }
    const auto& names = known_algorithms();
    if (std::find(names.begin(), names.end(), c.algorithm) == names.end()) {
      throw ConfigError("algorithm.name", "unknown algorithm '" + c.algorithm + "'");
    }
    if (!(c.step_fraction > 0.0)) throw ConfigError("algorithm.step_fraction", "must be positive");
    if (c.inner.max_iters < 1) throw ConfigError("algorithm.max_iters", "must be >= 1");
    if (c.max_outer < 1) throw ConfigError("algorithm.max_outer", "must be >= 1");
    if (c.n_null < 0) throw ConfigError("algorithm.n_null", "must be >= 0");
  }

  if (j.contains("utility")) {
    c.utility = j["utility"];
    detail::require_object(c.utility, "utility");
    if (c.utility.contains("q")) c.q = c.utility["q"].get<double>();
  }

  if (j.contains("experiment")) {
    const json& e = j["experiment"];
    detail::require_object(e, "experiment");
    detail::check_keys(e, "experiment", {"trials", "slots", "bands", "alpha", "seed", "q"});
    read_opt(e, "trials", c.trials, "experiment");
    read_opt(e, "slots", c.slots, "experiment");
    read_opt(e, "bands", c.bands, "experiment");
    read_opt(e, "alpha", c.alpha, "experiment");
    read_opt(e, "seed", c.seed, "experiment");
    read_opt(e, "q", c.q, "experiment");
    if (!e.contains("seed")) throw ConfigError("experiment.seed", "a master seed is required");
    if (c.trials < 1) throw ConfigError("experiment.trials", "must be >= 1");
    if (c.slots < 1) throw ConfigError("experiment.slots", "must be >= 1");
    if (c.bands < 1) throw ConfigError("experiment.bands", "must be >= 1");
    if (!(c.alpha > 0.0 && c.alpha < 1.0)) throw ConfigError("experiment.alpha", "must lie in (0, 1)");
    if (!(c.q > 0.0 && c.q <= 100.0)) throw ConfigError("experiment.q", "must lie in (0, 100]");
  } else {
    throw ConfigError("experiment.seed", "a master seed is required");
  }

  if (is_beamforming(c.algorithm) && c.bands != 1) {
    throw ConfigError("experiment.bands", "beamforming algorithms run on a single band");
  }
  if (c.algorithm == "zfn" && c.scenario.rx_antennas != 1) {
    throw ConfigError("scenario.rx_antennas", "zfn needs single-antenna users");
  }
  if ((c.algorithm == "wmmse-pf") && c.slots < 2) {
    throw ConfigError("experiment.slots", "wmmse-pf is a long-term scheduler; use slots >= 2");
  }
  return c;
}

inline json dump_config(const RunConfig& c) {
  const auto& p = c.scenario;
  std::string rule = c.inner.rule == StepRule::Normalized ? "normalized" : "initial_norm";
  return json{{"name", c.name},
              {"scenario",
               {{"num_cells", p.num_cells},
                {"users_per_cell", p.users_per_cell},
                {"inter_site_m", p.inter_site_m},
                {"tx_antennas", p.tx_antennas},
                {"rx_antennas", p.rx_antennas},
                {"noise_psd_dbm_hz", p.noise_psd_dbm_hz},
                {"bandwidth_hz", p.bandwidth_hz},
                {"p_max_dbm", p.p_max_dbm},
                {"d0_m", p.d0_m},
                {"zeta", p.zeta}}},
              {"algorithm",
               {{"name", c.algorithm},
                {"n_null", c.n_null},
                {"step_fraction", c.step_fraction},
                {"max_iters", c.inner.max_iters},
                {"tol_rel", c.inner.tol_rel},
                {"patience", c.inner.patience},
                {"step_rule", rule},
                {"max_outer", c.max_outer},
                {"tol_outer", c.tol_outer},
                {"barrier", c.barrier}}},
              {"utility", c.utility},
              {"experiment",
               {{"trials", c.trials},
                {"slots", c.slots},
                {"bands", c.bands},
                {"alpha", c.alpha},
                {"seed", c.seed},
                {"q", c.q}}}};
}

/// Builds the utility for K users and F bands from the config's template or
/// expression.
inline UtilitySpec build_utility(const json& u, const NetworkScenario& scen, int bands) {
  const int K = scen.num_users();
  const auto arity = static_cast<std::size_t>(K * bands);
  try {
    if (u.contains("expr")) {
      UtilityParseContext ctx;
      ctx.arity = arity;
      ctx.cells = scen.cell_groups();
      ctx.users = K;
      ctx.bands = bands;
      return parse_utility(u["expr"], ctx);
    }
    const auto t = u.value("template", std::string("slqp"));
    auto kq_of = [&](int n) {
      if (u.contains("kq")) return u["kq"].get<int>();
      return kq_from_percent(u.value("q", 5.7), n);
    };
    if (t == "slqp") return util::network_slqp(arity, kq_of(static_cast<int>(arity)));
    if (t == "sum") return {util::sum(util::all_slots(arity)), arity};
    if (t == "sum_plus_slqp") return util::sum_plus_slqp(arity, u.value("w", 0.0), kq_of(static_cast<int>(arity)));
    if (t == "pf_slqp") return util::pf_slqp(arity, kq_of(static_cast<int>(arity)));
    if (t == "multiband_maxmin") return util::multiband_maxmin(K, bands);
    if (t == "percell") {
      const auto how = u.value("combiner", std::string("min"));
      util::CellCombiner c = util::CellCombiner::Min;
      if (how == "gm") {
        c = util::CellCombiner::GeometricMean;
      } else if (how == "am") {
        c = util::CellCombiner::ArithmeticMean;
      } else if (how != "min") {
        throw ConfigError("utility.combiner", "expected min, gm or am");
      }
      if (bands != 1) throw ConfigError("utility.template", "percell needs a single band");
      return util::per_cell_percentile(arity, scen.cell_groups(), u.value("q", 10.0), c);
    }
    throw ConfigError("utility.template", "unknown template '" + t + "'");
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError("utility", e.what());
  }
}

// ---------------------------------------------------------------------------
// Presets

inline json preset(const std::string& name) {
  auto scen = [](int upc, int m, int n) {
    return json{{"num_cells", 7}, {"users_per_cell", upc}, {"tx_antennas", m}, {"rx_antennas", n}};
  };
  if (name == "fig1" || name == "fig2") {
    return json{{"name", name},
                {"scenario", scen(5, 8, 2)},
                {"algorithm", {{"name", name == "fig1" ? "mqft" : "sgqp-wmse"}}},
                {"utility", {{"template", "slqp"}, {"kq", 2}}},
                {"experiment", {{"trials", 4}, {"seed", 2024}, {"q", 5.7}}}};
  }
  if (name == "fig3") {
    return json{{"name", name},
                {"scenario", scen(2, 4, 1)},
                {"algorithm", {{"name", "mqft"}, {"n_null", 2}}},
                {"utility", {{"template", "slqp"}, {"kq", 2}}},
                {"experiment", {{"trials", 50}, {"seed", 2024}, {"q", 14.0}}}};
  }
  if (name == "fig4") {
    return json{{"name", name},
                {"scenario", scen(8, 1, 1)},
                {"algorithm", {{"name", "qft-power"}}},
                {"utility", {{"template", "sum_plus_slqp"}, {"w", 10.0}, {"q", 25.0}}},
                {"experiment", {{"trials", 50}, {"seed", 2024}, {"q", 25.0}}}};
  }
  if (name == "fig5" || name == "fig6") {
    return json{{"name", name},
                {"scenario", scen(20, 1, 1)},
                {"algorithm", {{"name", "qft-power"}, {"barrier", true}}},
                {"utility", {{"template", "percell"}, {"combiner", name == "fig5" ? "min" : "gm"}, {"q", 10.0}}},
                {"experiment", {{"trials", 10}, {"seed", 2024}, {"q", 10.0}}}};
  }
  if (name == "fig7" || name == "table1") {
    return json{{"name", name},
                {"scenario", scen(20, 1, 1)},
                {"algorithm", {{"name", "qft-power"}}},
                {"utility", {{"template", "slqp"}, {"q", 20.0}}},
                {"experiment", {{"trials", 1}, {"slots", 100}, {"alpha", 0.3}, {"seed", 2024}, {"q", 20.0}}}};
  }
  if (name == "fig8") {
    return json{{"name", name},
                {"scenario", scen(8, 1, 1)},
                {"algorithm", {{"name", "qft-power"}}},
                {"utility", {{"template", "multiband_maxmin"}}},
                {"experiment", {{"trials", 100}, {"bands", 3}, {"seed", 2024}, {"q", 1.0}}}};
  }
  throw ConfigError("preset", "unknown preset '" + name + "'");
}

inline std::vector<std::string> preset_names() {
  return {"fig1", "fig2", "fig3", "fig4", "fig5", "fig6", "fig7", "table1", "fig8"};
}

/// Sets a dotted path such as "utility.w" or "scenario.p_max_dbm".
inline void set_path(json& j, const std::string& path, const json& value) {
  json* cur = &j;
  std::stringstream ss(path);
  std::string part;
  std::vector<std::string> parts;
  while (std::getline(ss, part, '.')) parts.push_back(part);
  if (parts.empty()) throw ConfigError(path, "empty parameter path");
  for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
    if (!cur->contains(parts[i])) (*cur)[parts[i]] = json::object();
    cur = &(*cur)[parts[i]];
    if (cur->is_string() && parts[i] == "algorithm") {
      *cur = json{{"name", cur->get<std::string>()}};
    }
    if (!cur->is_object()) throw ConfigError(path, "'" + parts[i] + "' is not an object");
  }
  (*cur)[parts.back()] = value;
}

// ---------------------------------------------------------------------------
// Trials

struct TrialRecord {
  int trial = 0;
  std::uint64_t seed = 0;
  std::vector<double> objective_true;
  std::vector<std::optional<double>> objective_aux;
  std::vector<char> feasible;
  std::vector<double> rates_nats;  // final per-user rates (long-term: final rbar)
  json allocation;
  double seconds = 0.0;
  bool monotone = true;
  /// Long-term runs: per-slot rows (slot, user, rate, rbar, power).
  std::vector<std::array<double, 5>> slot_rows;
  /// Long-term runs: mean over slots of f_{K_q}(rbar).
  std::optional<double> ergodic_slqp;
};

namespace detail {

inline bool non_decreasing(const std::vector<double>& t, double rel = 1e-9) {
  for (std::size_t i = 1; i < t.size(); ++i) {
    if (t[i] < t[i - 1] - rel * std::max(std::abs(t[i - 1]), 1e-300)) return false;
  }
  return true;
}

inline json dump_beamformers(const BeamformerSet& V) {
  json out = json::array();
  for (const auto& v : V.v) {
    json u = json::array();
    for (Eigen::Index m = 0; m < v.size(); ++m) u.push_back({v(m).real(), v(m).imag()});
    out.push_back(u);
  }
  return out;
}

inline json dump_powers(const PowerAllocation& p) {
  json out = json::array();
  for (int f = 0; f < p.num_bands; ++f) {
    json band = json::array();
    for (int k = 0; k < p.num_users; ++k) band.push_back(p.at(f, k));
    out.push_back(band);
  }
  return out;
}

template <class R>
void copy_traces(const R& r, TrialRecord& rec) {
  rec.objective_true = r.objective;
  rec.feasible = r.feasible;
  rec.objective_aux.assign(r.objective.size(), std::nullopt);
  for (std::size_t i = 0; i < r.aux_at_update.size() && i < r.objective.size(); ++i) rec.objective_aux[i] = r.aux_at_update[i];
  rec.monotone = non_decreasing(r.objective);
}

}  // namespace detail

inline std::uint64_t trial_seed(std::uint64_t master, int trial) {
  return mix_seed(master, static_cast<std::uint64_t>(trial));
}

/// One seeded trial: drop the network, draw channels, run the algorithm.
inline TrialRecord run_trial(const RunConfig& c, int trial) {
  const auto t0 = std::chrono::steady_clock::now();
  TrialRecord rec;
  rec.trial = trial;
  rec.seed = trial_seed(c.seed, trial);
  std::mt19937_64 rng(rec.seed);
  const NetworkScenario scen = build_hex_topology(c.scenario, rng);
  const int K = scen.num_users();
  const double p_max = scen.p_max;
  const std::string& a = c.algorithm;

  if (is_beamforming(a)) {
    const ChannelSet H = sample_channels(scen, 0, rec.seed);
    const UtilitySpec spec = build_utility(c.utility, scen, 1);
    const BeamformerSet V0 = equal_power_matched_filter_init(H, p_max);
    BfConfig bc;
    bc.inner = c.inner;
    bc.step_fraction = c.step_fraction;
    bc.max_outer = c.max_outer;
    bc.tol_outer = c.tol_outer;
    bc.eval.barrier = c.barrier;
    BeamformerSet V;
    if (a == "mqft") {
      const BfRunResult r = mqft_run(H, spec, V0, p_max, bc);
      detail::copy_traces(r, rec);
      V = r.V;
    } else if (a == "sgqp-wmse") {
      const UtilityNode& root = spec.root();
      if (root.kind != NodeKind::Slqp || root.children.size() != static_cast<std::size_t>(K)) {
        throw ConfigError("utility", "sgqp-wmse optimizes a network SLqP utility only");
      }
      const BfRunResult r = sgqp_wmse_run(H, root.kq, V0, p_max, bc);
      detail::copy_traces(r, rec);
      V = r.V;
    } else {
      if (a == "cwsr") {
        V = wmmse_wsr(H, cwsr_weights(H), V0, p_max).V;
      } else if (a == "zfn") {
        V = zf_nulling(H, c.n_null, p_max);
      } else {
        V = V0;
      }
      rec.objective_true = {eval(spec, rates_bf(V, H), {.barrier = c.barrier})};
      rec.objective_aux = {std::nullopt};
      rec.feasible = {V.feasible(H, p_max)};
    }
    rec.rates_nats = rates_bf(V, H);
    rec.allocation = detail::dump_beamformers(V);
    if (!V.feasible(H, p_max)) throw SolverAbort("final beamformers violate the per-BS budget");
  } else if (c.slots > 1) {
    const int kq = kq_from_percent(c.q, K);
    auto gains_of = [&](int n) { return sample_band_gains(scen, static_cast<std::uint64_t>(n), rec.seed, 1); };
    ErgodicResult er;
    if (a == "qft-power" || a == "lft-power") {
      PowerConfig pc;
      pc.inner = c.inner;
      pc.step_fraction = c.step_fraction;
      pc.max_outer = c.max_outer;
      pc.tol_outer = c.tol_outer;
      er = longterm_run(c.slots, gains_of, K, kq, a == "qft-power" ? Transform::QFT : Transform::LFT, c.alpha, p_max,
                        rec.seed, pc);
    } else if (a == "wmmse-pf") {
      std::mt19937_64 init_rng(mix_seed(rec.seed, 0x10f7));
      SlotPolicy pol = [&](int, const BandGains& g, const ErgodicState& s, const PowerAllocation* prev) {
        PowerAllocation init = prev ? *prev : uniform_random_power(K, 1, p_max, init_rng);
        SlotRecord r;
        r.p = wmmse_wsr(g, pf_weights(s), init, p_max).p;
        return r;
      };
      er = ergodic_run(c.slots, gains_of, K, c.alpha, pol);
    } else {
      throw ConfigError("algorithm.name", "'" + a + "' has no long-term mode");
    }
    for (const auto& s : er.slots) {
      rec.objective_true.push_back(slqp(s.rbar, kq));
      rec.objective_aux.push_back(s.objective.empty() ? std::nullopt : std::optional<double>(s.objective.back()));
      rec.feasible.push_back(s.p.feasible(p_max));
      for (int k = 0; k < K; ++k) {
        rec.slot_rows.push_back({static_cast<double>(s.slot), static_cast<double>(k), s.rates[static_cast<std::size_t>(k)],
                                 s.rbar[static_cast<std::size_t>(k)], s.p.at(0, k)});
      }
      if (!s.p.feasible(p_max)) throw SolverAbort("slot powers violate the budget");
    }
    rec.monotone = true;
    rec.ergodic_slqp = er.mean_slqp(kq);
    rec.rates_nats = er.final_state.rbar;
    rec.allocation = detail::dump_powers(er.slots.back().p);
  } else {
    const BandGains g = sample_band_gains(scen, 0, rec.seed, c.bands);
    const UtilitySpec spec = build_utility(c.utility, scen, c.bands);
    std::mt19937_64 init_rng(mix_seed(rec.seed, 0x10f7));
    // Common start for every power algorithm of a trial.
    const PowerAllocation init = uniform_random_power(K, c.bands, p_max / c.bands, init_rng);
    PowerAllocation p;
    if (a == "qft-power" || a == "lft-power") {
      PowerConfig pc;
      pc.inner = c.inner;
      pc.step_fraction = c.step_fraction;
      pc.max_outer = c.max_outer;
      pc.tol_outer = c.tol_outer;
      pc.eval.barrier = c.barrier;
      const PowerRunResult r = shortterm_run(g, spec, a == "qft-power" ? Transform::QFT : Transform::LFT, init, p_max, pc);
      detail::copy_traces(r, rec);
      p = r.p;
    } else {
      if (a == "wmmse-sum") {
        p = wmmse_wsr(g, WsrWeights(static_cast<std::size_t>(K), 1.0), init, p_max).p;
      } else if (a == "equal") {
        p = equal_power(K, c.bands, p_max);
      } else if (a == "random-uniform") {
        p = init;
      } else if (a == "random-rayleigh") {
        p = random_power(RandomPolicy::Rayleigh, K, c.bands, p_max, init_rng);
      } else if (a == "random-exponential") {
        p = random_power(RandomPolicy::Exponential, K, c.bands, p_max, init_rng);
      } else {
        throw ConfigError("algorithm.name", "'" + a + "' is not a power-control scheme");
      }
      rec.objective_true = {eval(spec, slot_rates_power(p, g), {.barrier = c.barrier})};
      rec.objective_aux = {std::nullopt};
      rec.feasible = {p.feasible(p_max)};
    }
    rec.rates_nats = user_rates_power(p, g);
    rec.allocation = detail::dump_powers(p);
    if (!p.feasible(p_max)) throw SolverAbort("final powers violate the budget");
  }
  rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rec;
}

struct RunOutput {
  RunConfig config;
  std::vector<TrialRecord> records;
  double bandwidth_hz = 20e6;
  double seconds = 0.0;
};

/// Runs all trials on `threads` workers; records come back in trial order.
inline RunOutput run(const RunConfig& c, int threads = 1) {
  const auto t0 = std::chrono::steady_clock::now();
  RunOutput out;
  out.config = c;
  out.bandwidth_hz = c.scenario.bandwidth_hz;
  out.records.resize(static_cast<std::size_t>(c.trials));
  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::mutex mu;
  auto worker = [&] {
    for (;;) {
      const int t = next.fetch_add(1);
      if (t >= c.trials) return;
      {
        std::lock_guard lock(mu);
        if (failure) return;
      }
      try {
        out.records[static_cast<std::size_t>(t)] = run_trial(c, t);
      } catch (...) {
        std::lock_guard lock(mu);
        if (!failure) failure = std::current_exception();
        return;
      }
    }
  };
  const int n = std::max(1, std::min(threads, c.trials));
  std::vector<std::thread> pool;
  for (int i = 0; i < n; ++i) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
  out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

// ---------------------------------------------------------------------------
// Summaries and files

inline double percentile_of(std::vector<double> v, double p) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const double pos = p / 100.0 * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

inline json summarize(const RunOutput& o) {
  const RunConfig& c = o.config;
  std::vector<double> finals, sums, mins, slqps, ergodic;
  json trials = json::array();
  for (const auto& r : o.records) {
    const double fin = r.objective_true.back();
    finals.push_back(fin);
    double s = 0.0;
    for (double x : r.rates_nats) s += x;
    sums.push_back(nats_to_mbps(s, o.bandwidth_hz));
    mins.push_back(nats_to_mbps(*std::min_element(r.rates_nats.begin(), r.rates_nats.end()), o.bandwidth_hz));
    const int kq = kq_from_percent(c.q, static_cast<int>(r.rates_nats.size()));
    std::vector<double> mbps;
    for (double x : r.rates_nats) mbps.push_back(nats_to_mbps(x, o.bandwidth_hz));
    slqps.push_back(nats_to_mbps(slqp(r.rates_nats, kq), o.bandwidth_hz));
    json t{{"trial", r.trial},
           {"seed", r.seed},
           {"final_objective", fin},
           {"initial_objective", r.objective_true.front()},
           {"iterations", static_cast<int>(r.objective_true.size()) - 1},
           {"monotone", r.monotone},
           {"rates_nats", r.rates_nats},
           {"rates_mbps", mbps},
           {"allocation", r.allocation},
           {"seconds", r.seconds}};
    if (r.ergodic_slqp) {
      ergodic.push_back(nats_to_mbps(*r.ergodic_slqp, o.bandwidth_hz));
      t["ergodic_slqp_mbps"] = ergodic.back();
    }
    trials.push_back(t);
  }
  auto stats = [](const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m += x;
    m /= static_cast<double>(v.size());
    return json{{"mean", m}, {"p5", percentile_of(v, 5)}, {"p50", percentile_of(v, 50)}, {"p95", percentile_of(v, 95)}};
  };
  bool all_mono = true;
  for (const auto& r : o.records) all_mono = all_mono && r.monotone;
  json s{{"config", dump_config(c)},
         {"trials", static_cast<int>(o.records.size())},
         {"objective", stats(finals)},
         {"sum_rate_mbps", stats(sums)},
         {"min_rate_mbps", stats(mins)},
         {"slqp_mbps", stats(slqps)},
         {"all_traces_monotone", all_mono},
         {"wall_clock_seconds", o.seconds},
         {"per_trial", trials}};
  if (!ergodic.empty()) s["ergodic_slqp_mbps"] = stats(ergodic);
  return s;
}

namespace detail {

inline std::ofstream open_out(const std::filesystem::path& p) {
  std::ofstream f(p, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + p.string() + " for writing");
  f << std::setprecision(17);
  return f;
}

inline void close_out(std::ofstream& f, const std::filesystem::path& p) {
  f.close();
  if (!f) throw std::runtime_error("failed writing " + p.string());
}

}  // namespace detail

/// Writes trace.csv, cdf.csv, summary.json (and slots.csv for long-term
/// runs) into `dir`. The seconds column is filled only with `timing`.
inline void emit(const RunOutput& o, const std::filesystem::path& dir, bool timing = false) {
  if (o.records.empty()) throw std::invalid_argument("emit: no records");
  for (const auto& r : o.records) {
    for (char f : r.feasible) {
      if (!f) throw SolverAbort("trial " + std::to_string(r.trial) + " produced an infeasible iterate");
    }
  }
  std::filesystem::create_directories(dir);

  const auto tp = dir / "trace.csv";
  auto tf = detail::open_out(tp);
  tf << "run_id,trial,outer_iter,objective_true,objective_aux,feasible,seconds\n";
  for (const auto& r : o.records) {
    for (std::size_t i = 0; i < r.objective_true.size(); ++i) {
      tf << o.config.name << ',' << r.trial << ',' << i << ',' << r.objective_true[i] << ',';
      if (r.objective_aux[i]) tf << *r.objective_aux[i];
      tf << ',' << (r.feasible[i] ? 1 : 0) << ',';
      if (timing && i + 1 == r.objective_true.size()) tf << r.seconds;
      tf << '\n';
    }
  }
  detail::close_out(tf, tp);

  std::vector<double> pooled;
  for (const auto& r : o.records) {
    for (double x : r.rates_nats) pooled.push_back(nats_to_mbps(x, o.bandwidth_hz));
  }
  std::sort(pooled.begin(), pooled.end());
  const auto cp = dir / "cdf.csv";
  auto cf = detail::open_out(cp);
  cf << "value_mbps,empirical_cdf\n";
  for (std::size_t i = 0; i < pooled.size(); ++i) {
    cf << pooled[i] << ',' << static_cast<double>(i + 1) / static_cast<double>(pooled.size()) << '\n';
  }
  detail::close_out(cf, cp);

  if (!o.records.front().slot_rows.empty()) {
    const auto sp = dir / "slots.csv";
    auto sf = detail::open_out(sp);
    sf << "trial,slot,user,rate_nats,rbar_nats,power_w\n";
    for (const auto& r : o.records) {
      for (const auto& row : r.slot_rows) {
        sf << r.trial << ',' << static_cast<int>(row[0]) << ',' << static_cast<int>(row[1]) << ',' << row[2] << ','
           << row[3] << ',' << row[4] << '\n';
      }
    }
    detail::close_out(sf, sp);
  }

  const auto jp = dir / "summary.json";
  auto jf = detail::open_out(jp);
  jf << summarize(o).dump(2) << '\n';
  detail::close_out(jf, jp);
}

struct SweepPoint {
  json value;
  RunOutput output;
};

/// Runs the config once per value of `param` with the same master seed, so
/// every value sees the same drops, channels and starting points.
inline std::vector<SweepPoint> sweep(const json& base, const std::string& param, const std::vector<json>& values,
                                     int threads = 1) {
  if (values.empty()) throw ConfigError("values", "at least one value is required");
  std::vector<SweepPoint> out;
  for (const auto& v : values) {
    json j = base;
    set_path(j, param, v);
    out.push_back({v, run(parse_config(j), threads)});
  }
  return out;
}

inline void emit_sweep(const std::vector<SweepPoint>& pts, const std::string& param, const std::filesystem::path& dir,
                       bool timing = false) {
  std::filesystem::create_directories(dir);
  const auto p = dir / "sweep.csv";
  auto f = detail::open_out(p);
  f << "param,value,mean_objective,mean_sum_rate_mbps,mean_slqp_mbps,mean_min_rate_mbps\n";
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const json s = summarize(pts[i].output);
    const std::string v = pts[i].value.is_string() ? pts[i].value.get<std::string>() : pts[i].value.dump();
    f << param << ',' << v << ',' << s["objective"]["mean"].get<double>() << ','
      << s["sum_rate_mbps"]["mean"].get<double>() << ',' << s["slqp_mbps"]["mean"].get<double>() << ','
      << s["min_rate_mbps"]["mean"].get<double>() << '\n';
    emit(pts[i].output, dir / ("value_" + std::to_string(i)), timing);
  }
  detail::close_out(f, p);
}

}  // namespace pctl
