#pragma once

// Scalar power control with the quadratic (QFT) and logarithmic (LFT)
// fractional transforms, short-term and long-term (EWMA) objectives.

#include <cmath>
#include <functional>
#include <limits>
#include <random>
#include <vector>

#include "pctl/inner_solver.hpp"
#include "pctl/netmodel.hpp"
#include "pctl/utility.hpp"

namespace pctl {

enum class Transform { QFT, LFT };

/// One auxiliary scalar per (band, user) slot.
struct ScalarAux {
  std::vector<double> x;
};

inline std::vector<SinrParts> all_sinr_parts(const PowerAllocation& p, const BandGains& g) {
  std::vector<SinrParts> out(p.p.size());
  for (int f = 0; f < g.num_bands; ++f) {
    for (int k = 0; k < g.num_users; ++k) out[static_cast<std::size_t>(f * g.num_users + k)] = sinr_components(p, g, k, f);
  }
  return out;
}

/// x = sqrt(A) / B.
inline ScalarAux qft_aux(const PowerAllocation& p, const BandGains& g) {
  ScalarAux a;
  for (const auto& s : all_sinr_parts(p, g)) a.x.push_back(std::sqrt(s.signal) / s.interference);
  return a;
}

/// x = 1 / B.
inline ScalarAux lft_aux(const PowerAllocation& p, const BandGains& g) {
  ScalarAux a;
  for (const auto& s : all_sinr_parts(p, g)) a.x.push_back(1.0 / s.interference);
  return a;
}

inline ScalarAux scalar_aux(Transform t, const PowerAllocation& p, const BandGains& g) {
  return t == Transform::QFT ? qft_aux(p, g) : lft_aux(p, g);
}

/// log(1 + 2 x sqrt(A) - x^2 B); -infinity when the argument is not positive.
inline double qft_aux_rate(double x, double a, double b) {
  const double t = 1.0 + 2.0 * x * std::sqrt(a) - x * x * b;
  return t > 0.0 ? std::log(t) : -std::numeric_limits<double>::infinity();
}

/// -x B + log(x (A + B)) + 1.
inline double lft_aux_rate(double x, double a, double b) {
  const double t = x * (a + b);
  return t > 0.0 ? -x * b + std::log(t) + 1.0 : -std::numeric_limits<double>::infinity();
}

inline double scalar_aux_rate(Transform t, double x, double a, double b) {
  return t == Transform::QFT ? qft_aux_rate(x, a, b) : lft_aux_rate(x, a, b);
}

/// Rates entering the utility: offset + scale * r. Short-term runs use
/// offset 0 and scale 1; the ergodic objective uses (1 - alpha) rbar and alpha.
struct RateMap {
  std::vector<double> offset;
  double scale = 1.0;

  std::vector<double> apply(std::span<const double> r) const {
    std::vector<double> z(r.begin(), r.end());
    for (std::size_t i = 0; i < z.size(); ++i) z[i] = (offset.empty() ? 0.0 : offset[i]) + scale * z[i];
    return z;
  }
};

/// Decision variable of the inner solve: amplitudes sqrt(p) for QFT (where
/// the surrogate is concave) and powers for LFT.
inline std::vector<double> to_variable(Transform t, const PowerAllocation& p) {
  std::vector<double> y = p.p;
  if (t == Transform::QFT) {
    for (double& v : y) v = std::sqrt(std::max(v, 0.0));
  }
  return y;
}

inline PowerAllocation from_variable(Transform t, std::span<const double> y, int users, int bands) {
  PowerAllocation p(users, bands);
  for (std::size_t i = 0; i < y.size(); ++i) p.p[i] = t == Transform::QFT ? y[i] * y[i] : y[i];
  return p;
}

/// Per-user budget in the transform's variable.
inline FeasibleSet power_feasible_set(Transform t, int users, int bands, double p_max) {
  if (t == Transform::QFT) {
    if (bands == 1) return Box{0.0, std::sqrt(p_max)};
    GroupBall ball;
    ball.radius_sq = p_max;
    ball.nonnegative = true;
    for (int k = 0; k < users; ++k) {
      std::vector<std::size_t> g;
      for (int f = 0; f < bands; ++f) g.push_back(static_cast<std::size_t>(f * users + k));
      ball.groups.push_back(std::move(g));
    }
    return ball;
  }
  if (bands == 1) return Box{0.0, p_max};
  return BandSimplexBox{users, bands, p_max};
}

/// U(map(aux rates)) as a concave function of the transform's variable.
class ScalarOracle {
 public:
  ScalarOracle(const BandGains& g, const ScalarAux& x, const UtilitySpec& spec, Transform t, RateMap map,
               EvalOptions opts)
      : g_(g), x_(x), spec_(spec), t_(t), map_(std::move(map)), opts_(opts) {}

  OracleValue operator()(std::span<const double> y) const {
    const int K = g_.num_users;
    const PowerAllocation p = from_variable(t_, y, K, g_.num_bands);
    const auto parts = all_sinr_parts(p, g_);
    const std::size_t n = parts.size();
    // Per slot: pre-log argument t_i and aux rate.
    std::vector<double> arg(n), r(n);
    bool sentinel = false;
    for (std::size_t i = 0; i < n; ++i) {
      const double xi = x_.x[i], a = parts[i].signal, b = parts[i].interference;
      arg[i] = t_ == Transform::QFT ? 1.0 + 2.0 * xi * std::sqrt(a) - xi * xi * b : xi * (a + b);
      if (!(arg[i] > 0.0)) {
        sentinel = true;
        continue;
      }
      r[i] = t_ == Transform::QFT ? std::log(arg[i]) : -xi * b + std::log(arg[i]) + 1.0;
    }

    OracleValue out;
    out.grad.assign(n, 0.0);
    // dv/dr_i (or d arg_i when a sentinel is active).
    std::vector<double> w(n, 0.0);
    bool on_arg = false;
    if (sentinel) {
      out.value = kSentinelValue;
      on_arg = true;
      for (std::size_t i = 0; i < n; ++i) w[i] = arg[i] > 0.0 ? 0.0 : 1.0;
    } else {
      const auto z = map_.apply(r);
      Supergradient sg;
      try {
        out.value = eval(spec_, z, opts_);
        sg = eval_supergradient(spec_, z, opts_);
      } catch (const DomainError& e) {
        // A log-type atom saw a nonpositive aux rate: push that rate up.
        if (e.slot() >= n) throw;
        out.value = kSentinelValue;
        sg.assign(n, 0.0);
        sg[e.slot()] = 1.0;
      }
      for (std::size_t i = 0; i < n; ++i) w[i] = sg[i] * map_.scale;
    }

    for (int f = 0; f < g_.num_bands; ++f) {
      for (int i = 0; i < K; ++i) {
        const std::size_t si = static_cast<std::size_t>(f * K + i);
        if (w[si] == 0.0) continue;
        const double xi = x_.x[si];
        for (int j = 0; j < K; ++j) {
          const std::size_t sj = static_cast<std::size_t>(f * K + j);
          const double gji = g_.gain(f, j, i);
          double d = 0.0;  // d arg_i / d y_j or d r_i / d y_j
          if (t_ == Transform::QFT) {
            d = j == i ? 2.0 * xi * std::sqrt(gji) : -2.0 * xi * xi * gji * y[sj];
            if (!on_arg) d /= arg[si];
          } else {
            const double ab = parts[si].signal + parts[si].interference;
            if (on_arg) {
              d = xi * gji;
            } else {
              d = j == i ? gji / ab : gji / ab - xi * gji;
            }
          }
          out.grad[sj] += w[si] * d;
        }
      }
    }
    return out;
  }

 private:
  const BandGains& g_;
  const ScalarAux& x_;
  const UtilitySpec& spec_;
  Transform t_;
  RateMap map_;
  EvalOptions opts_;
};

struct PowerConfig {
  Schedule inner{};
  /// Inner step length as a fraction of the budget radius (sqrt(p_max) for
  /// QFT amplitudes, p_max for LFT powers).
  double step_fraction = 0.1;
  int max_outer = 100;
  double tol_outer = 1e-5;
  int stall_window = 3;
  EvalOptions eval{};
};

struct PowerRunResult {
  PowerAllocation p;
  std::vector<double> objective;
  std::vector<double> aux_at_update;
  std::vector<double> aux_after_inner;
  std::vector<int> inner_iterations;
  std::vector<char> feasible;
  int outer_iterations = 0;
};

inline double power_objective(const UtilitySpec& spec, const PowerAllocation& p, const BandGains& g,
                              const RateMap& map, const EvalOptions& o) {
  return eval(spec, map.apply(slot_rates_power(p, g)), o);
}

inline double scalar_surrogate(const UtilitySpec& spec, Transform t, const ScalarAux& x, const PowerAllocation& p,
                               const BandGains& g, const RateMap& map, const EvalOptions& o) {
  const auto parts = all_sinr_parts(p, g);
  std::vector<double> r(parts.size());
  for (std::size_t i = 0; i < parts.size(); ++i) {
    r[i] = scalar_aux_rate(t, x.x[i], parts[i].signal, parts[i].interference);
    if (!std::isfinite(r[i])) return kSentinelValue;
  }
  return eval(spec, map.apply(r), o);
}

namespace detail {
inline bool outer_stalled(const std::vector<double>& obj, double tol, int window) {
  if (static_cast<int>(obj.size()) <= window) return false;
  for (int w = 0; w < window; ++w) {
    const double now = obj[obj.size() - 1 - static_cast<std::size_t>(w)];
    const double prev = obj[obj.size() - 2 - static_cast<std::size_t>(w)];
    if (std::abs(now - prev) > tol * std::max(std::abs(prev), 1e-12)) return false;
  }
  return true;
}
}  // namespace detail

/// MM over slot rates: closed-form aux update, then a projected supergradient
/// solve of the concave surrogate. The utility's arity is K * F (band-major).
inline PowerRunResult shortterm_run(const BandGains& g, const UtilitySpec& spec, Transform t,
                                    const PowerAllocation& init, double p_max, const PowerConfig& cfg = {},
                                    const RateMap& map = {}) {
  if (init.num_users != g.num_users || init.num_bands != g.num_bands) {
    throw DimensionError("shortterm_run: allocation and gains disagree");
  }
  if (spec.arity() != init.p.size()) throw DimensionError("shortterm_run: utility arity must be K * F");
  if (!init.feasible(p_max)) throw InfeasibleError("shortterm_run: initial powers violate the budget");

  const FeasibleSet set = power_feasible_set(t, g.num_users, g.num_bands, p_max);
  Schedule sched = cfg.inner;
  sched.step_scale = cfg.step_fraction * (t == Transform::QFT ? std::sqrt(p_max) : p_max);

  PowerRunResult res;
  res.p = init;
  res.objective.push_back(power_objective(spec, res.p, g, map, cfg.eval));
  res.feasible.push_back(res.p.feasible(p_max));
  for (int it = 0; it < cfg.max_outer; ++it) {
    const ScalarAux x = scalar_aux(t, res.p, g);
    res.aux_at_update.push_back(scalar_surrogate(spec, t, x, res.p, g, map, cfg.eval));
    const ScalarOracle oracle(g, x, spec, t, map, cfg.eval);
    auto start = project(set, to_variable(t, res.p));
    const MaximizeResult m = maximize(oracle, set, start, sched);
    PowerAllocation next = from_variable(t, m.point, g.num_users, g.num_bands);
    // Squaring a feasible amplitude can overshoot the budget by rounding.
    for (int k = 0; k < next.num_users; ++k) {
      const double tot = next.user_total(k);
      if (tot > p_max) {
        for (int f = 0; f < next.num_bands; ++f) next.at(f, k) *= p_max / tot;
      }
    }
    res.p = std::move(next);
    res.aux_after_inner.push_back(m.value);
    res.inner_iterations.push_back(m.iterations);
    res.objective.push_back(power_objective(spec, res.p, g, map, cfg.eval));
    res.feasible.push_back(res.p.feasible(p_max));
    res.outer_iterations = it + 1;
    if (detail::outer_stalled(res.objective, cfg.tol_outer, cfg.stall_window)) break;
  }
  return res;
}

// ---------------------------------------------------------------------------
// Long-term (ergodic) objective

struct ErgodicState {
  std::vector<double> rbar;
  int slot = 0;
  double alpha = 0.3;
};

inline ErgodicState ewma_update(const ErgodicState& s, std::span<const double> r) {
  if (!(s.alpha > 0.0 && s.alpha < 1.0)) throw DomainError("ewma_update: alpha must lie in (0, 1)");
  if (r.size() != s.rbar.size()) throw DimensionError("ewma_update: rate vector length mismatch");
  ErgodicState out = s;
  for (std::size_t i = 0; i < r.size(); ++i) out.rbar[i] = (1.0 - s.alpha) * s.rbar[i] + s.alpha * r[i];
  ++out.slot;
  return out;
}

/// Per-slot record of an ergodic run.
struct SlotRecord {
  int slot = 0;
  PowerAllocation p;
  std::vector<double> rates;     // instantaneous, nats
  std::vector<double> rbar;      // after the EWMA update
  std::vector<double> objective; // true per-slot objective trace (empty for baselines)
};

struct ErgodicResult {
  std::vector<SlotRecord> slots;
  ErgodicState final_state;

  /// Mean over slots of f_{K_q}(rbar).
  double mean_slqp(int kq) const {
    double s = 0.0;
    for (const auto& r : slots) s += slqp(r.rbar, kq);
    return slots.empty() ? 0.0 : s / static_cast<double>(slots.size());
  }
};

/// Chooses powers for one slot from the slot gains, the state before the
/// slot, and the previous slot's powers (empty on the first slot).
using SlotPolicy = std::function<SlotRecord(int slot, const BandGains&, const ErgodicState&, const PowerAllocation* prev)>;

/// Runs a policy over `num_slots` block-fading slots, committing the EWMA
/// update after each.
inline ErgodicResult ergodic_run(int num_slots, const std::function<BandGains(int)>& gains_of_slot, int users,
                                 double alpha, const SlotPolicy& policy) {
  ErgodicResult out;
  out.final_state.rbar.assign(static_cast<std::size_t>(users), 0.0);
  out.final_state.alpha = alpha;
  for (int n = 0; n < num_slots; ++n) {
    const BandGains g = gains_of_slot(n);
    SlotRecord rec = policy(n, g, out.final_state, out.slots.empty() ? nullptr : &out.slots.back().p);
    rec.slot = n;
    rec.rates = user_rates_power(rec.p, g);
    out.final_state = ewma_update(out.final_state, rec.rates);
    rec.rbar = out.final_state.rbar;
    out.slots.push_back(std::move(rec));
  }
  return out;
}

/// Uniform in [0, hi] per slot.
inline PowerAllocation uniform_random_power(int users, int bands, double hi, std::mt19937_64& rng) {
  PowerAllocation p(users, bands);
  std::uniform_real_distribution<double> u(0.0, hi);
  for (double& v : p.p) v = u(rng);
  return p;
}

/// Per slot maximize f_{K_q}((1 - alpha) rbar + alpha r(p)) with the chosen
/// transform, warm-started from the previous slot (first slot: uniform in
/// [0, p_max]). Warm-start powers are raised to at least warm_floor * p_max:
/// a zero power is a fixed point of the QFT update and would otherwise
/// switch a user off for the rest of the run.
inline ErgodicResult longterm_run(int num_slots, const std::function<BandGains(int)>& gains_of_slot, int users,
                                  int kq, Transform t, double alpha, double p_max, std::uint64_t seed,
                                  const PowerConfig& cfg = {}, double warm_floor = 1e-4) {
  const UtilitySpec spec = util::network_slqp(static_cast<std::size_t>(users), kq);
  std::mt19937_64 rng(mix_seed(seed, 0x10f7));
  SlotPolicy policy = [&](int, const BandGains& g, const ErgodicState& s, const PowerAllocation* prev) {
    PowerAllocation init = prev ? *prev : uniform_random_power(users, 1, p_max, rng);
    for (double& v : init.p) v = std::max(v, warm_floor * p_max);
    RateMap map;
    map.scale = s.alpha;
    for (double rb : s.rbar) map.offset.push_back((1.0 - s.alpha) * rb);
    PowerRunResult r = shortterm_run(g, spec, t, init, p_max, cfg, map);
    SlotRecord rec;
    rec.p = std::move(r.p);
    rec.objective = std::move(r.objective);
    return rec;
  };
  return ergodic_run(num_slots, gains_of_slot, users, alpha, policy);
}

}  // namespace pctl
