#pragma once

#include <functional>
#include <random>
#include <span>
#include <vector>

#include "pctl/netmodel.hpp"

namespace pctl::fixture {

/// Channel set with explicit users-per-cell and random CN(0, scale^2) entries.
inline ChannelSet random_channels(const std::vector<int>& users_per_cell, int m, int n, double noise,
                                  std::mt19937_64& rng, double scale = 1.0) {
  ChannelSet c;
  c.num_cells = static_cast<int>(users_per_cell.size());
  for (int b = 0; b < c.num_cells; ++b) {
    for (int k = 0; k < users_per_cell[static_cast<std::size_t>(b)]; ++k) c.user_cell.push_back(b);
  }
  c.num_users = static_cast<int>(c.user_cell.size());
  c.noise_power = noise;
  std::normal_distribution<double> g(0.0, std::sqrt(0.5) * scale);
  for (int i = 0; i < c.num_users; ++i) {
    for (int b = 0; b < c.num_cells; ++b) {
      ComplexMatrix h(n, m);
      for (Eigen::Index k = 0; k < h.size(); ++k) h(k) = cplx(g(rng), g(rng));
      c.mats.push_back(h);
    }
  }
  return c;
}

/// Single user, single cell, scalar channel h.
inline ChannelSet scalar_channel(cplx h, double noise) {
  ChannelSet c;
  c.num_users = 1;
  c.num_cells = 1;
  c.user_cell = {0};
  c.noise_power = noise;
  c.mats = {ComplexMatrix::Constant(1, 1, h)};
  return c;
}

/// Random beamformers scaled so every BS uses `fill` of p_max.
inline BeamformerSet random_beamformers(const ChannelSet& H, double p_max, double fill, std::mt19937_64& rng) {
  BeamformerSet V = BeamformerSet::zeros(H);
  std::normal_distribution<double> g(0.0, 1.0);
  for (auto& v : V.v) {
    for (Eigen::Index k = 0; k < v.size(); ++k) v(k) = cplx(g(rng), g(rng));
  }
  for (int b = 0; b < H.num_cells; ++b) {
    const double pw = V.bs_power(H, b);
    if (pw == 0.0) continue;
    for (int i : H.users_of(b)) V.v[static_cast<std::size_t>(i)] *= std::sqrt(fill * p_max / pw);
  }
  return V;
}

/// Central finite-difference gradient of f at x.
inline std::vector<double> fd_gradient(const std::function<double(std::span<const double>)>& f,
                                       std::vector<double> x, double h) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double x0 = x[i];
    x[i] = x0 + h;
    const double up = f(x);
    x[i] = x0 - h;
    const double dn = f(x);
    x[i] = x0;
    g[i] = (up - dn) / (2.0 * h);
  }
  return g;
}

inline double rel_error(std::span<const double> a, std::span<const double> b) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += (a[i] - b[i]) * (a[i] - b[i]);
    den += b[i] * b[i];
  }
  return std::sqrt(num) / std::max(std::sqrt(den), 1e-300);
}

}  // namespace pctl::fixture
