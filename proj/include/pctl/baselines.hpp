#pragma once

// Benchmark schemes: WMMSE for weighted sum-rate (MIMO and multi-band
// scalar), CWSR and PF weights, zero-forcing with nulling, and fixed or
// random power policies.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>

#include "pctl/beamforming.hpp"
#include "pctl/powercontrol.hpp"

namespace pctl {

using WsrWeights = std::vector<double>;

inline void check_weights(const WsrWeights& w, std::size_t k) {
  if (w.size() != k) throw DimensionError("wsr weights: one weight per user required");
  bool any = false;
  for (double x : w) {
    if (!(x >= 0.0) || !std::isfinite(x)) throw DomainError("wsr weights must be finite and nonnegative");
    any = any || x > 0.0;
  }
  if (!any) throw DomainError("wsr weights must not all be zero");
}

/// 1 / max(rbar, 1e-6).
inline WsrWeights pf_weights(const ErgodicState& s) {
  WsrWeights w;
  for (double r : s.rbar) w.push_back(1.0 / std::max(r, 1e-6));
  return w;
}

/// Inverse Frobenius norm of the direct channel, normalized to sum to K.
inline WsrWeights cwsr_weights(const ChannelSet& H) {
  WsrWeights w;
  for (int k = 0; k < H.num_users; ++k) {
    const double n = H.direct(k).norm();
    if (!(n > 0.0)) throw DomainError("cwsr_weights: zero direct channel", static_cast<std::size_t>(k));
    w.push_back(1.0 / n);
  }
  const double s = std::accumulate(w.begin(), w.end(), 0.0);
  for (double& x : w) x *= static_cast<double>(w.size()) / s;
  return w;
}

struct WmmseConfig {
  int max_iters = 100;
  double tol = 1e-5;
  int stall_window = 3;
};

struct WmmseResult {
  BeamformerSet V;
  std::vector<double> wsr;  // weighted sum-rate after each iteration, index 0 = init
  int iterations = 0;
};

inline double weighted_sum_rate(const WsrWeights& w, std::span<const double> r) {
  double s = 0.0;
  for (std::size_t i = 0; i < r.size(); ++i) s += w[i] * r[i];
  return s;
}

namespace detail {

/// Smallest mu >= 0 with power(mu) <= cap for a decreasing power(mu).
template <class PowerFn>
double bisect_multiplier(PowerFn&& power, double cap, bool mu_zero_allowed) {
  if (mu_zero_allowed && power(0.0) <= cap) return 0.0;
  double lo = 0.0, hi = 1e-12;
  while (power(hi) > cap) {
    lo = hi;
    hi *= 2.0;
    if (hi > 1e300) throw SolverAbort("multiplier bisection diverged");
  }
  for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    (power(mid) > cap ? lo : hi) = mid;
  }
  return hi;
}

}  // namespace detail

/// Classic WMMSE cycle for weighted sum-rate with per-BS power budgets.
inline WmmseResult wmmse_wsr(const ChannelSet& H, const WsrWeights& weights, const BeamformerSet& init,
                             double p_max, const WmmseConfig& cfg = {}) {
  check_weights(weights, static_cast<std::size_t>(H.num_users));
  if (!init.feasible(H, p_max)) throw InfeasibleError("wmmse_wsr: initial beamformers violate the budget");
  WmmseResult res;
  res.V = init;
  res.wsr.push_back(weighted_sum_rate(weights, rates_bf(res.V, H)));
  for (int it = 0; it < cfg.max_iters; ++it) {
    const WmseAux aux = wmse_aux_update(res.V, H);
    BeamformerSet next = BeamformerSet::zeros(H);
    for (int b = 0; b < H.num_cells; ++b) {
      const auto users = H.users_of(b);
      if (users.empty()) continue;
      const Eigen::Index m = H.tx_dim(b);
      ComplexMatrix A = ComplexMatrix::Zero(m, m);
      for (int j = 0; j < H.num_users; ++j) {
        const ComplexVector hu = H.h(j, b).adjoint() * aux.u[static_cast<std::size_t>(j)];
        A += (weights[static_cast<std::size_t>(j)] * aux.w[static_cast<std::size_t>(j)]) * hu * hu.adjoint();
      }
      A = 0.5 * (A + A.adjoint()).eval();
      Eigen::SelfAdjointEigenSolver<ComplexMatrix> eig(A);
      const Eigen::VectorXd lam = eig.eigenvalues().cwiseMax(0.0);
      const ComplexMatrix& Q = eig.eigenvectors();
      std::vector<ComplexVector> rhs;
      for (int k : users) {
        const ComplexVector n = (weights[static_cast<std::size_t>(k)] * aux.w[static_cast<std::size_t>(k)]) *
                                (H.direct(k).adjoint() * aux.u[static_cast<std::size_t>(k)]);
        rhs.push_back(Q.adjoint() * n);
      }
      auto power = [&](double mu) {
        double s = 0.0;
        for (const auto& r : rhs) {
          for (Eigen::Index i = 0; i < m; ++i) s += std::norm(r(i)) / ((lam(i) + mu) * (lam(i) + mu));
        }
        return s;
      };
      const bool invertible = lam.minCoeff() > 1e-12 * std::max(lam.maxCoeff(), 1e-300);
      const double mu = detail::bisect_multiplier(power, p_max, invertible);
      for (std::size_t u = 0; u < users.size(); ++u) {
        ComplexVector z = rhs[u];
        for (Eigen::Index i = 0; i < m; ++i) z(i) /= lam(i) + mu;
        next.v[static_cast<std::size_t>(users[u])] = Q * z;
      }
      // Guard the budget against rounding in the bisection.
      const double pw = next.bs_power(H, b);
      if (pw > p_max) {
        for (int k : users) next.v[static_cast<std::size_t>(k)] *= std::sqrt(p_max / pw);
      }
    }
    res.V = std::move(next);
    res.wsr.push_back(weighted_sum_rate(weights, rates_bf(res.V, H)));
    res.iterations = it + 1;
    if (detail::stalled(res.wsr, cfg.tol, cfg.stall_window)) break;
  }
  return res;
}

struct WmmsePowerResult {
  PowerAllocation p;
  std::vector<double> wsr;
  int iterations = 0;
};

/// WMMSE for scalar links over F orthogonal bands with a per-user band-sum
/// budget. Weights are per user and apply on every band.
inline WmmsePowerResult wmmse_wsr(const BandGains& g, const WsrWeights& weights, const PowerAllocation& init,
                                  double p_max, const WmmseConfig& cfg = {}) {
  check_weights(weights, static_cast<std::size_t>(g.num_users));
  if (!init.feasible(p_max)) throw InfeasibleError("wmmse_wsr: initial powers violate the budget");
  const int K = g.num_users, F = g.num_bands;
  auto wsr_of = [&](const PowerAllocation& p) {
    const auto r = user_rates_power(p, g);
    return weighted_sum_rate(weights, r);
  };
  WmmsePowerResult res;
  res.p = init;
  res.wsr.push_back(wsr_of(res.p));
  const auto sz = static_cast<std::size_t>(K * F);
  std::vector<double> v(sz), u(sz), w(sz);
  for (int it = 0; it < cfg.max_iters; ++it) {
    for (std::size_t s = 0; s < sz; ++s) v[s] = std::sqrt(res.p.p[s]);
    for (int f = 0; f < F; ++f) {
      for (int k = 0; k < K; ++k) {
        const auto s = static_cast<std::size_t>(f * K + k);
        double c = g.noise_power;
        for (int j = 0; j < K; ++j) c += g.gain(f, j, k) * v[static_cast<std::size_t>(f * K + j)] * v[static_cast<std::size_t>(f * K + j)];
        const double h = std::sqrt(g.gain(f, k, k));
        u[s] = h * v[s] / c;
        w[s] = 1.0 / (1.0 - u[s] * h * v[s]);
      }
    }
    PowerAllocation next(K, F);
    for (int k = 0; k < K; ++k) {
      std::vector<double> num(static_cast<std::size_t>(F)), den(static_cast<std::size_t>(F));
      for (int f = 0; f < F; ++f) {
        const auto s = static_cast<std::size_t>(f * K + k);
        num[static_cast<std::size_t>(f)] = weights[static_cast<std::size_t>(k)] * w[s] * u[s] * std::sqrt(g.gain(f, k, k));
        double d = 0.0;
        for (int j = 0; j < K; ++j) {
          const auto sj = static_cast<std::size_t>(f * K + j);
          d += weights[static_cast<std::size_t>(j)] * w[sj] * u[sj] * u[sj] * g.gain(f, k, j);
        }
        den[static_cast<std::size_t>(f)] = d;
      }
      auto power = [&](double mu) {
        double s = 0.0;
        for (int f = 0; f < F; ++f) {
          const double a = num[static_cast<std::size_t>(f)] / (den[static_cast<std::size_t>(f)] + mu);
          s += a * a;
        }
        return s;
      };
      bool positive_den = true;
      for (int f = 0; f < F; ++f) positive_den = positive_den && den[static_cast<std::size_t>(f)] > 0.0;
      const double mu = detail::bisect_multiplier(power, p_max, positive_den);
      double tot = 0.0;
      for (int f = 0; f < F; ++f) {
        const double a = num[static_cast<std::size_t>(f)] / (den[static_cast<std::size_t>(f)] + mu);
        next.at(f, k) = a * a;
        tot += a * a;
      }
      if (tot > p_max) {
        for (int f = 0; f < F; ++f) next.at(f, k) *= p_max / tot;
      }
    }
    res.p = std::move(next);
    res.wsr.push_back(wsr_of(res.p));
    res.iterations = it + 1;
    if (detail::stalled(res.wsr, cfg.tol, cfg.stall_window)) break;
  }
  return res;
}

/// Zero-forcing with nulling for single-antenna users: each BS inverts the
/// stack of its own users' channels and the n_null strongest out-of-cell
/// channels, keeping the in-cell columns at power p_max / K_b each.
inline BeamformerSet zf_nulling(const ChannelSet& H, int n_null, double p_max) {
  if (n_null < 0) throw DomainError("zf_nulling: n_null must be >= 0");
  BeamformerSet V = BeamformerSet::zeros(H);
  for (int b = 0; b < H.num_cells; ++b) {
    const auto users = H.users_of(b);
    if (users.empty()) continue;
    const Eigen::Index m = H.tx_dim(b);
    for (int k = 0; k < H.num_users; ++k) {
      if (H.h(k, b).rows() != 1) throw DomainError("zf_nulling: users must have one receive antenna", static_cast<std::size_t>(k));
    }
    std::vector<int> outside;
    for (int k = 0; k < H.num_users; ++k) {
      if (H.cell(k) != b) outside.push_back(k);
    }
    std::stable_sort(outside.begin(), outside.end(),
                     [&](int x, int y) { return H.h(x, b).squaredNorm() > H.h(y, b).squaredNorm(); });
    const int nn = std::min<int>(n_null, static_cast<int>(outside.size()));
    const auto rows = static_cast<Eigen::Index>(users.size()) + nn;
    if (rows > m) {
      throw DomainError("zf_nulling: BS " + std::to_string(b) + " needs " + std::to_string(rows) +
                        " antennas, has " + std::to_string(m));
    }
    ComplexMatrix S(rows, m);
    for (std::size_t i = 0; i < users.size(); ++i) S.row(static_cast<Eigen::Index>(i)) = H.h(users[i], b);
    for (int i = 0; i < nn; ++i) S.row(static_cast<Eigen::Index>(users.size()) + i) = H.h(outside[static_cast<std::size_t>(i)], b);
    const ComplexMatrix gram = S * S.adjoint();
    Eigen::SelfAdjointEigenSolver<ComplexMatrix> eig(gram);
    if (!(eig.eigenvalues().minCoeff() > 1e-12 * eig.eigenvalues().maxCoeff())) {
      throw DomainError("zf_nulling: stacked channel matrix is rank deficient at BS " + std::to_string(b));
    }
    const ComplexMatrix pinv = S.adjoint() * gram.ldlt().solve(ComplexMatrix::Identity(rows, rows));
    const double per_user = p_max / static_cast<double>(users.size());
    for (std::size_t i = 0; i < users.size(); ++i) {
      ComplexVector col = pinv.col(static_cast<Eigen::Index>(i));
      V.v[static_cast<std::size_t>(users[i])] = std::sqrt(per_user) * col / col.norm();
    }
  }
  return V;
}

enum class RandomPolicy { Uniform, Rayleigh, Exponential };

/// One power draw before the budget projection: uniform on [0, p_max / 3],
/// Rayleigh with scale p_max / sqrt(2 pi) (mean p_max / 2), or Exp(1) watts.
inline double random_power_draw(RandomPolicy policy, double p_max, std::mt19937_64& rng) {
  switch (policy) {
    case RandomPolicy::Uniform:
      return std::uniform_real_distribution<double>(0.0, p_max / 3.0)(rng);
    case RandomPolicy::Rayleigh: {
      const double sigma = p_max / std::sqrt(2.0 * std::numbers::pi);
      return sigma * std::sqrt(-2.0 * std::log1p(-std::uniform_real_distribution<double>(0.0, 1.0)(rng)));
    }
    case RandomPolicy::Exponential:
      return std::exponential_distribution<double>(1.0)(rng);
  }
  return 0.0;
}

/// Random per-(band, user) powers projected onto the per-user band-sum budget.
inline PowerAllocation random_power(RandomPolicy policy, int users, int bands, double p_max, std::mt19937_64& rng) {
  if (bands < 1) throw DomainError("random_power: bands must be >= 1");
  PowerAllocation p(users, bands);
  for (double& x : p.p) x = random_power_draw(policy, p_max, rng);
  p.p = project(BandSimplexBox{users, bands, p_max}, p.p);
  return p;
}

/// p_max / F on every band.
inline PowerAllocation equal_power(int users, int bands, double p_max) {
  if (bands < 1) throw DomainError("equal_power: bands must be >= 1");
  return PowerAllocation(users, bands, p_max / static_cast<double>(bands));
}

}  // namespace pctl
