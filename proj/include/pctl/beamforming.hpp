#pragma once

// SLqP-rate beamforming: the multidimensional quadratic-transform (MQFT)
// minorization-maximization loop and the SGqP-WMSE cyclic minimization.

#include <cmath>
#include <limits>
#include <vector>

#include "pctl/inner_solver.hpp"
#include "pctl/netmodel.hpp"
#include "pctl/utility.hpp"

namespace pctl {

// ---------------------------------------------------------------------------
// Real parameterization of a BeamformerSet: users in order, each entry as
// (re, im).

inline std::vector<double> pack(const BeamformerSet& V) {
  std::vector<double> x;
  for (const auto& v : V.v) {
    for (Eigen::Index m = 0; m < v.size(); ++m) {
      x.push_back(v(m).real());
      x.push_back(v(m).imag());
    }
  }
  return x;
}

inline BeamformerSet unpack(std::span<const double> x, const ChannelSet& H) {
  BeamformerSet V = BeamformerSet::zeros(H);
  std::size_t o = 0;
  for (auto& v : V.v) {
    for (Eigen::Index m = 0; m < v.size(); ++m, o += 2) v(m) = cplx(x[o], x[o + 1]);
  }
  if (o != x.size()) throw DimensionError("unpack: coordinate count does not match the channel set");
  return V;
}

/// Per-BS power ball over the packed coordinates.
inline GroupBall per_bs_ball(const ChannelSet& H, double p_max) {
  GroupBall ball;
  ball.radius_sq = p_max;
  ball.groups.assign(static_cast<std::size_t>(H.num_cells), {});
  std::size_t o = 0;
  for (int i = 0; i < H.num_users; ++i) {
    const auto len = static_cast<std::size_t>(2 * H.tx_dim(H.cell(i)));
    for (std::size_t c = 0; c < len; ++c) ball.groups[static_cast<std::size_t>(H.cell(i))].push_back(o + c);
    o += len;
  }
  return ball;
}

namespace detail {
/// Wirtinger d/dv* gradients mapped onto the packed (re, im) coordinates.
inline std::vector<double> pack_gradient(const std::vector<ComplexVector>& dconj) {
  std::vector<double> g;
  for (const auto& d : dconj) {
    for (Eigen::Index m = 0; m < d.size(); ++m) {
      g.push_back(2.0 * d(m).real());
      g.push_back(2.0 * d(m).imag());
    }
  }
  return g;
}

inline std::vector<ComplexVector> zero_like(const BeamformerSet& V) {
  std::vector<ComplexVector> out;
  for (const auto& v : V.v) out.push_back(ComplexVector::Zero(v.size()));
  return out;
}
}  // namespace detail

/// Dominant right singular direction of the direct channel, scaled so every
/// user of a BS gets p_max / K_b.
inline BeamformerSet equal_power_matched_filter_init(const ChannelSet& H, double p_max) {
  BeamformerSet V = BeamformerSet::zeros(H);
  for (int i = 0; i < H.num_users; ++i) {
    const ComplexMatrix& h = H.direct(i);
    Eigen::Index strongest = 0;
    h.rowwise().squaredNorm().maxCoeff(&strongest);
    ComplexVector x = h.row(strongest).adjoint();
    if (x.norm() == 0.0) x = ComplexVector::Ones(h.cols());
    x.normalize();
    const ComplexMatrix gram = h.adjoint() * h;
    for (int it = 0; it < 50; ++it) {
      ComplexVector y = gram * x;
      const double n = y.norm();
      if (n == 0.0) break;
      x = y / n;
    }
    const auto users = static_cast<double>(H.users_of(H.cell(i)).size());
    V.v[static_cast<std::size_t>(i)] = std::sqrt(p_max / users) * x;
  }
  return V;
}

// ---------------------------------------------------------------------------
// Quadratic transform

struct MqftAux {
  std::vector<ComplexVector> chi;
};

/// chi = B^-1 H v for every user (B excludes the user's own stream).
inline MqftAux mqft_aux_update(const BeamformerSet& V, const ChannelSet& H) {
  MqftAux X;
  for (int i = 0; i < H.num_users; ++i) {
    const HermitianPD cov = interference_covariance(V, H, i);
    X.chi.push_back(pd_solve(cov, H.direct(i) * V.v[static_cast<std::size_t>(i)]));
  }
  return X;
}

/// Pre-log argument 1 + 2 Re{chi^H H v} - chi^H B chi.
inline double mqft_aux_argument(const MqftAux& X, const BeamformerSet& V, const ChannelSet& H, int user) {
  detail::check_shapes(V, H, user);
  const ComplexVector& chi = X.chi[static_cast<std::size_t>(user)];
  double t = 1.0 + 2.0 * chi.dot(H.direct(user) * V.v[static_cast<std::size_t>(user)]).real() -
             H.noise_power * chi.squaredNorm();
  for (int j = 0; j < H.num_users; ++j) {
    if (j == user) continue;
    t -= std::norm(chi.dot(H.h(user, H.cell(j)) * V.v[static_cast<std::size_t>(j)]));
  }
  return t;
}

/// Transformed rate; -infinity when the pre-log argument is not positive.
inline double mqft_aux_rate(const MqftAux& X, const BeamformerSet& V, const ChannelSet& H, int user) {
  const double t = mqft_aux_argument(X, V, H, user);
  return t > 0.0 ? std::log(t) : -std::numeric_limits<double>::infinity();
}


/// Concave oracle of U(aux rates) in V for fixed X.
class MqftOracle {
 public:
  MqftOracle(const ChannelSet& H, const MqftAux& X, const UtilitySpec& spec, EvalOptions opts)
      : H_(H), spec_(spec), opts_(opts) {
    const auto K = static_cast<std::size_t>(H.num_users);
    c_.resize(K * static_cast<std::size_t>(H.num_cells));
    for (int i = 0; i < H.num_users; ++i) {
      const ComplexVector& chi = X.chi[static_cast<std::size_t>(i)];
      noise_.push_back(H.noise_power * chi.squaredNorm());
      for (int b = 0; b < H.num_cells; ++b) c_[idx(i, b)] = H.h(i, b).adjoint() * chi;
    }
  }

  /// Pre-log arguments at V.
  std::vector<double> arguments(const BeamformerSet& V) const {
    std::vector<double> t(static_cast<std::size_t>(H_.num_users));
    for (int i = 0; i < H_.num_users; ++i) {
      double ti = 1.0 + 2.0 * c_[idx(i, H_.cell(i))].dot(V.v[static_cast<std::size_t>(i)]).real() - noise_[static_cast<std::size_t>(i)];
      for (int j = 0; j < H_.num_users; ++j) {
        if (j != i) ti -= std::norm(c_[idx(i, H_.cell(j))].dot(V.v[static_cast<std::size_t>(j)]));
      }
      t[static_cast<std::size_t>(i)] = ti;
    }
    return t;
  }

  OracleValue operator()(std::span<const double> x) const {
    const BeamformerSet V = unpack(x, H_);
    const auto t = arguments(V);
    std::vector<double> weight(t.size(), 0.0);  // d value / d t_i
    OracleValue out;
    bool sentinel = false;
    for (double ti : t) sentinel = sentinel || !(ti > 0.0);
    if (sentinel) {
      out.value = kSentinelValue;
      for (std::size_t i = 0; i < t.size(); ++i) weight[i] = t[i] > 0.0 ? 0.0 : 1.0;
    } else {
      std::vector<double> r(t.size());
      for (std::size_t i = 0; i < t.size(); ++i) r[i] = std::log(t[i]);
      Supergradient g;
      try {
        out.value = eval(spec_, r, opts_);
        g = eval_supergradient(spec_, r, opts_);
      } catch (const DomainError& e) {
        // A log-type atom saw a nonpositive aux rate: push that rate up.
        if (e.slot() >= t.size()) throw;
        out.value = kSentinelValue;
        g.assign(t.size(), 0.0);
        g[e.slot()] = 1.0;
      }
      for (std::size_t i = 0; i < t.size(); ++i) weight[i] = g[i] / t[i];
    }
    auto d = detail::zero_like(V);
    for (int i = 0; i < H_.num_users; ++i) {
      const double w = weight[static_cast<std::size_t>(i)];
      if (w == 0.0) continue;
      d[static_cast<std::size_t>(i)] += w * c_[idx(i, H_.cell(i))];
      for (int j = 0; j < H_.num_users; ++j) {
        if (j == i) continue;
        const ComplexVector& c = c_[idx(i, H_.cell(j))];
        d[static_cast<std::size_t>(j)] -= (w * c.dot(V.v[static_cast<std::size_t>(j)])) * c;
      }
    }
    out.grad = detail::pack_gradient(d);
    return out;
  }

 private:
  std::size_t idx(int user, int bs) const { return static_cast<std::size_t>(user * H_.num_cells + bs); }

  const ChannelSet& H_;
  const UtilitySpec& spec_;
  EvalOptions opts_;
  std::vector<ComplexVector> c_;  // H_{b->i}^H chi_i
  std::vector<double> noise_;
};

// ---------------------------------------------------------------------------
// Run configuration and traces shared by both beamforming algorithms

struct BfConfig {
  Schedule inner{};
  /// Inner step length as a fraction of the per-BS ball radius sqrt(p_max).
  double step_fraction = 0.1;
  int max_outer = 100;
  double tol_outer = 1e-5;
  int stall_window = 3;
  EvalOptions eval{};
};

struct BfRunResult {
  BeamformerSet V;
  std::vector<double> objective;        // true objective at V[0], V[1], ...
  std::vector<double> aux_at_update;    // surrogate right after each aux update (== objective[i])
  std::vector<double> aux_after_inner;  // surrogate after each inner solve
  std::vector<int> inner_iterations;
  std::vector<char> feasible;  // per-BS budget check of every recorded iterate
  int outer_iterations = 0;
};

namespace detail {

/// Relative change below tol for `window` consecutive outer iterations.
inline bool stalled(const std::vector<double>& obj, double tol, int window) {
  if (static_cast<int>(obj.size()) <= window) return false;
  for (int w = 0; w < window; ++w) {
    const double now = obj[obj.size() - 1 - static_cast<std::size_t>(w)];
    const double prev = obj[obj.size() - 2 - static_cast<std::size_t>(w)];
    if (std::abs(now - prev) > tol * std::max(std::abs(prev), 1e-12)) return false;
  }
  return true;
}

inline void require_feasible(const BeamformerSet& V, const ChannelSet& H, double p_max) {
  if (!V.feasible(H, p_max)) throw InfeasibleError("initial beamformers violate the per-BS power budget");
}

}  // namespace detail

inline double bf_objective(const UtilitySpec& spec, const BeamformerSet& V, const ChannelSet& H,
                           const EvalOptions& o) {
  return eval(spec, rates_bf(V, H), o);
}

inline double mqft_surrogate(const UtilitySpec& spec, const MqftAux& X, const BeamformerSet& V,
                             const ChannelSet& H, const EvalOptions& o) {
  std::vector<double> r(static_cast<std::size_t>(H.num_users));
  for (int i = 0; i < H.num_users; ++i) {
    r[static_cast<std::size_t>(i)] = mqft_aux_rate(X, V, H, i);
    if (!std::isfinite(r[static_cast<std::size_t>(i)])) return kSentinelValue;
  }
  return eval(spec, r, o);
}

/// Alternates the closed-form chi update with a projected supergradient
/// solve of the concave V-subproblem.
inline BfRunResult mqft_run(const ChannelSet& H, const UtilitySpec& spec, const BeamformerSet& init,
                            double p_max, const BfConfig& cfg = {}) {
  detail::require_feasible(init, H, p_max);
  if (spec.arity() != static_cast<std::size_t>(H.num_users)) {
    throw DimensionError("mqft_run: utility arity must equal the user count");
  }
  BfRunResult res;
  res.V = init;
  res.objective.push_back(bf_objective(spec, res.V, H, cfg.eval));
  res.feasible.push_back(res.V.feasible(H, p_max));
  const FeasibleSet ball = per_bs_ball(H, p_max);
  Schedule sched = cfg.inner;
  sched.step_scale = cfg.step_fraction * std::sqrt(p_max);

  for (int it = 0; it < cfg.max_outer; ++it) {
    const MqftAux X = mqft_aux_update(res.V, H);
    res.aux_at_update.push_back(mqft_surrogate(spec, X, res.V, H, cfg.eval));
    const MqftOracle oracle(H, X, spec, cfg.eval);
    const auto start = pack(res.V);
    const MaximizeResult m = maximize(oracle, ball, start, sched);
    res.V = unpack(m.point, H);
    res.aux_after_inner.push_back(m.value);
    res.inner_iterations.push_back(m.iterations);
    res.objective.push_back(bf_objective(spec, res.V, H, cfg.eval));
    res.feasible.push_back(res.V.feasible(H, p_max));
    res.outer_iterations = it + 1;
    if (detail::stalled(res.objective, cfg.tol_outer, cfg.stall_window)) break;
  }
  return res;
}

// ---------------------------------------------------------------------------
// Weighted MSE

/// MMSE receiver (sigma^2 I + sum over all streams H v v^H H^H)^-1 H v.
inline ComplexVector mmse_receiver(const BeamformerSet& V, const ChannelSet& H, int user) {
  const HermitianPD cov = interference_covariance(V, H, user, /*include_own=*/true);
  return pd_solve(cov, H.direct(user) * V.v[static_cast<std::size_t>(user)]);
}

/// Symbol MSE with receive beamformer u.
inline double mse(const ComplexVector& u, const BeamformerSet& V, const ChannelSet& H, int user) {
  detail::check_shapes(V, H, user);
  if (u.size() != H.rx_dim(user)) throw DimensionError("mse: receiver length mismatch");
  double e = std::norm(1.0 - u.dot(H.direct(user) * V.v[static_cast<std::size_t>(user)])) +
             H.noise_power * u.squaredNorm();
  for (int j = 0; j < H.num_users; ++j) {
    if (j != user) e += std::norm(u.dot(H.h(user, H.cell(j)) * V.v[static_cast<std::size_t>(j)]));
  }
  return e;
}

/// w e - log w - 1.
inline double wmse(const ComplexVector& u, double w, const BeamformerSet& V, const ChannelSet& H, int user) {
  if (!(w > 0.0)) throw DomainError("wmse: weight must be positive", static_cast<std::size_t>(user));
  return w * mse(u, V, H, user) - std::log(w) - 1.0;
}

/// 1 / e_mmse with e_mmse = 1 - v^H H^H C^-1 H v (C includes the own stream).
inline double wmmse_weight(const BeamformerSet& V, const ChannelSet& H, int user) {
  const ComplexVector u = mmse_receiver(V, H, user);
  const ComplexVector a = H.direct(user) * V.v[static_cast<std::size_t>(user)];
  const double e = 1.0 - a.dot(u).real();
  return 1.0 / e;
}

struct WmseAux {
  std::vector<ComplexVector> u;
  std::vector<double> w;
};

inline WmseAux wmse_aux_update(const BeamformerSet& V, const ChannelSet& H) {
  WmseAux aux;
  for (int i = 0; i < H.num_users; ++i) {
    aux.u.push_back(mmse_receiver(V, H, i));
    aux.w.push_back(wmmse_weight(V, H, i));
  }
  return aux;
}

inline std::vector<double> wmse_values(const WmseAux& aux, const BeamformerSet& V, const ChannelSet& H) {
  std::vector<double> m(static_cast<std::size_t>(H.num_users));
  for (int i = 0; i < H.num_users; ++i) {
    m[static_cast<std::size_t>(i)] = wmse(aux.u[static_cast<std::size_t>(i)], aux.w[static_cast<std::size_t>(i)], V, H, i);
  }
  return m;
}

/// -F_{K_q}(WMSEs) as a concave function of V for fixed (u, w).
class WmseOracle {
 public:
  WmseOracle(const ChannelSet& H, const WmseAux& aux, int kq) : H_(H), aux_(aux), kq_(kq) {
    c_.resize(static_cast<std::size_t>(H.num_users * H.num_cells));
    for (int i = 0; i < H.num_users; ++i) {
      const ComplexVector& u = aux.u[static_cast<std::size_t>(i)];
      noise_.push_back(H.noise_power * u.squaredNorm());
      for (int b = 0; b < H.num_cells; ++b) c_[idx(i, b)] = H.h(i, b).adjoint() * u;
    }
  }

  std::vector<double> values(const BeamformerSet& V) const {
    std::vector<double> m(static_cast<std::size_t>(H_.num_users));
    for (int i = 0; i < H_.num_users; ++i) {
      double e = std::norm(1.0 - c_[idx(i, H_.cell(i))].dot(V.v[static_cast<std::size_t>(i)])) +
                 noise_[static_cast<std::size_t>(i)];
      for (int j = 0; j < H_.num_users; ++j) {
        if (j != i) e += std::norm(c_[idx(i, H_.cell(j))].dot(V.v[static_cast<std::size_t>(j)]));
      }
      const double w = aux_.w[static_cast<std::size_t>(i)];
      m[static_cast<std::size_t>(i)] = w * e - std::log(w) - 1.0;
    }
    return m;
  }

  OracleValue operator()(std::span<const double> x) const {
    const BeamformerSet V = unpack(x, H_);
    const auto m = values(V);
    OracleValue out;
    out.value = -sgqp(m, kq_);
    const auto sel = sgqp_subgradient(m, kq_);
    auto d = detail::zero_like(V);
    for (int i = 0; i < H_.num_users; ++i) {
      if (sel[static_cast<std::size_t>(i)] == 0.0) continue;
      const double w = aux_.w[static_cast<std::size_t>(i)];
      const ComplexVector& own = c_[idx(i, H_.cell(i))];
      const cplx resid = 1.0 - own.dot(V.v[static_cast<std::size_t>(i)]);
      // d(-w e_i)/dv*: own stream +w c (1 - c^H v), others -w c (c^H v).
      d[static_cast<std::size_t>(i)] += (w * resid) * own;
      for (int j = 0; j < H_.num_users; ++j) {
        if (j == i) continue;
        const ComplexVector& c = c_[idx(i, H_.cell(j))];
        d[static_cast<std::size_t>(j)] -= (w * c.dot(V.v[static_cast<std::size_t>(j)])) * c;
      }
    }
    out.grad = detail::pack_gradient(d);
    return out;
  }

 private:
  std::size_t idx(int user, int bs) const { return static_cast<std::size_t>(user * H_.num_cells + bs); }

  const ChannelSet& H_;
  const WmseAux& aux_;
  int kq_;
  std::vector<ComplexVector> c_;  // H_{b->i}^H u_i
  std::vector<double> noise_;
};

/// Cycles u <- MMSE, w <- 1/e, V <- argmin F_{K_q}(WMSE). `objective`
/// records the true SLqP rate.
inline BfRunResult sgqp_wmse_run(const ChannelSet& H, int kq, const BeamformerSet& init, double p_max,
                                 const BfConfig& cfg = {}) {
  detail::require_feasible(init, H, p_max);
  detail::check_kq(static_cast<std::size_t>(H.num_users), kq);
  BfRunResult res;
  res.V = init;
  res.objective.push_back(slqp(rates_bf(res.V, H), kq));
  res.feasible.push_back(res.V.feasible(H, p_max));
  const FeasibleSet ball = per_bs_ball(H, p_max);
  Schedule sched = cfg.inner;
  sched.step_scale = cfg.step_fraction * std::sqrt(p_max);

  for (int it = 0; it < cfg.max_outer; ++it) {
    const WmseAux aux = wmse_aux_update(res.V, H);
    res.aux_at_update.push_back(-sgqp(wmse_values(aux, res.V, H), kq));
    const WmseOracle oracle(H, aux, kq);
    const auto start = pack(res.V);
    const MaximizeResult m = maximize(oracle, ball, start, sched);
    res.V = unpack(m.point, H);
    res.aux_after_inner.push_back(m.value);
    res.inner_iterations.push_back(m.iterations);
    res.objective.push_back(slqp(rates_bf(res.V, H), kq));
    res.feasible.push_back(res.V.feasible(H, p_max));
    res.outer_iterations = it + 1;
    if (detail::stalled(res.objective, cfg.tol_outer, cfg.stall_window)) break;
  }
  return res;
}

}  // namespace pctl
