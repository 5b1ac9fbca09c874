#pragma once

// Projected supergradient ascent for concave, possibly non-smooth objectives
// over the simple convex sets that appear in the power and beamforming
// subproblems.

#include <algorithm>
#include <cmath>
#include <functional>
#include <sstream>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "pctl/errors.hpp"

namespace pctl {

/// Value and a supergradient of the objective at one point.
struct OracleValue {
  double value = 0.0;
  std::vector<double> grad;
};

/// Value an oracle reports in place of -infinity.
inline constexpr double kSentinelValue = -1e30;

using ConcaveOracle = std::function<OracleValue(std::span<const double>)>;

/// [lo, hi] on every coordinate.
struct Box {
  double lo = 0.0;
  double hi = 1.0;
};

/// For every group of coordinates: sum of squares <= radius_sq. With
/// `nonnegative`, the group also lives in the nonnegative orthant.
/// Per-BS beamformer power is a GroupBall over each BS's interleaved re/im
/// coordinates.
struct GroupBall {
  std::vector<std::vector<std::size_t>> groups;
  double radius_sq = 1.0;
  bool nonnegative = false;
};

/// p[f*K + k] >= 0 and sum over f of p[f*K + k] <= p_max for every user k.
struct BandSimplexBox {
  int users = 0;
  int bands = 1;
  double p_max = 1.0;
};

using FeasibleSet = std::variant<Box, GroupBall, BandSimplexBox>;

namespace detail {

/// Relative slack on cap tests; keeps projection exactly idempotent under
/// rounding of the rescaled point.
inline constexpr double kCapSlack = 1e-12;

/// Euclidean projection onto {y >= 0, sum y <= cap}.
inline void project_capped_simplex(std::vector<double>& y, double cap) {
  double total = 0.0;
  for (double& v : y) {
    v = std::max(v, 0.0);
    total += v;
  }
  if (total <= cap * (1.0 + kCapSlack)) return;
  std::vector<double> s = y;
  std::sort(s.begin(), s.end(), std::greater<>());
  double cum = 0.0, tau = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    cum += s[i];
    const double t = (cum - cap) / static_cast<double>(i + 1);
    if (i + 1 == s.size() || s[i + 1] <= t) {
      tau = t;
      break;
    }
  }
  for (double& v : y) v = std::max(v - tau, 0.0);
}

}  // namespace detail

inline std::vector<double> project(const FeasibleSet& set, std::span<const double> point) {
  std::vector<double> x(point.begin(), point.end());
  std::visit(
      [&](const auto& s) {
        using S = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<S, Box>) {
          for (double& v : x) v = std::clamp(v, s.lo, s.hi);
        } else if constexpr (std::is_same_v<S, GroupBall>) {
          for (const auto& g : s.groups) {
            double ss = 0.0;
            for (std::size_t i : g) {
              if (i >= x.size()) throw DimensionError("project: group index out of range");
              if (s.nonnegative) x[i] = std::max(x[i], 0.0);
              ss += x[i] * x[i];
            }
            if (ss > s.radius_sq * (1.0 + detail::kCapSlack)) {
              const double c = std::sqrt(s.radius_sq / ss);
              for (std::size_t i : g) x[i] *= c;
            }
          }
        } else {
          if (x.size() != static_cast<std::size_t>(s.users * s.bands)) {
            throw DimensionError("project: band allocation has the wrong length");
          }
          std::vector<double> y(static_cast<std::size_t>(s.bands));
          for (int k = 0; k < s.users; ++k) {
            for (int f = 0; f < s.bands; ++f) y[static_cast<std::size_t>(f)] = x[static_cast<std::size_t>(f * s.users + k)];
            detail::project_capped_simplex(y, s.p_max);
            for (int f = 0; f < s.bands; ++f) x[static_cast<std::size_t>(f * s.users + k)] = y[static_cast<std::size_t>(f)];
          }
        }
      },
      set);
  return x;
}

/// True when `point` is in the set up to `tol` (absolute, per constraint).
inline bool is_feasible(const FeasibleSet& set, std::span<const double> point, double tol = 1e-9) {
  const auto p = project(set, point);
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (!(std::abs(p[i] - point[i]) <= tol * std::max(1.0, std::abs(point[i])))) return false;
  }
  return true;
}

enum class StepRule {
  /// eta_t = eta0 / sqrt(t) with eta0 = step_scale / |g_0|; step = eta_t g_t.
  InitialNorm,
  /// step = step_scale / sqrt(t) * g_t / |g_t|.
  Normalized,
};

struct Schedule {
  double step_scale = 0.1;  // callers usually set 0.1 x the feasible-set radius
  int max_iters = 3000;
  double tol_rel = 1e-6;
  int patience = 200;
  StepRule rule = StepRule::InitialNorm;
};

struct MaximizeResult {
  std::vector<double> point;
  double value = 0.0;
  double start_value = 0.0;
  int iterations = 0;
  std::vector<double> trace;  // best-so-far value after each step
};

namespace detail {

inline void check_finite(const OracleValue& ov, std::span<const double> x, int iter) {
  bool ok = std::isfinite(ov.value);
  for (double g : ov.grad) ok = ok && std::isfinite(g);
  if (ok) return;
  std::ostringstream msg;
  msg << "inner solver: non-finite oracle output at iteration " << iter << " (value " << ov.value << "); iterate [";
  for (std::size_t i = 0; i < x.size() && i < 16; ++i) msg << (i ? ", " : "") << x[i];
  if (x.size() > 16) msg << ", ...";
  msg << "]";
  throw SolverAbort(msg.str());
}

inline double norm2(std::span<const double> v) {
  double s = 0.0;
  for (double e : v) s += e * e;
  return std::sqrt(s);
}

}  // namespace detail

/// Projected supergradient ascent with best-iterate output. The returned
/// value is never below the value at `start`.
template <class Oracle>
MaximizeResult maximize(Oracle&& oracle, const FeasibleSet& set, std::span<const double> start,
                        const Schedule& sched = {}) {
  if (!is_feasible(set, start)) throw InfeasibleError("inner solver: start point is infeasible");
  MaximizeResult out;
  std::vector<double> x(start.begin(), start.end());
  OracleValue ov = oracle(std::span<const double>(x));
  if (ov.grad.size() != x.size()) throw DimensionError("inner solver: gradient length mismatch");
  detail::check_finite(ov, x, 0);
  out.point = x;
  out.value = out.start_value = ov.value;

  const double g0 = detail::norm2(ov.grad);
  const double eta0 = sched.step_scale / (g0 + 1e-300);
  double window_ref = out.value;
  std::vector<double> trial(x.size());

  for (int t = 1; t <= sched.max_iters; ++t) {
    const double gn = detail::norm2(ov.grad);
    if (gn == 0.0) break;
    const double step = sched.rule == StepRule::InitialNorm ? eta0 / std::sqrt(static_cast<double>(t))
                                                            : sched.step_scale / std::sqrt(static_cast<double>(t)) / gn;
    for (std::size_t i = 0; i < x.size(); ++i) trial[i] = x[i] + step * ov.grad[i];
    x = project(set, trial);
    ov = oracle(std::span<const double>(x));
    detail::check_finite(ov, x, t);
    out.iterations = t;
    if (ov.value > out.value) {
      out.value = ov.value;
      out.point = x;
    }
    out.trace.push_back(out.value);
    if (sched.patience > 0 && t % sched.patience == 0) {
      if (out.value - window_ref <= sched.tol_rel * (std::abs(window_ref) + 1e-12)) break;
      window_ref = out.value;
    }
  }
  return out;
}

}  // namespace pctl
