#pragma once

// Network topology, fading channels and the two system models built on them:
// MU-MIMO beamforming (ChannelSet + BeamformerSet) and scalar per-link power
// control (BandGains + PowerAllocation). Rates are in nats per channel use.

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "pctl/numerics.hpp"

namespace pctl {

inline double dbm_to_watts(double dbm) { return std::pow(10.0, dbm / 10.0) * 1e-3; }

inline double nats_to_mbps(double nats, double bandwidth_hz) {
  return nats / std::numbers::ln2 * bandwidth_hz * 1e-6;
}

/// splitmix64 finalizer; used to derive independent child seeds.
inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

struct Point {
  double x = 0.0;
  double y = 0.0;
};

/// Inputs to build_hex_topology. Defaults are the 7-cell COST-231 setup.
struct ScenarioParams {
  int num_cells = 7;
  std::vector<int> users_per_cell = std::vector<int>(7, 5);
  double inter_site_m = 2000.0;
  int tx_antennas = 8;
  int rx_antennas = 2;
  double noise_psd_dbm_hz = -143.0;
  double bandwidth_hz = 20e6;
  double p_max_dbm = 43.0;
  double d0_m = 0.3920;
  double zeta = 3.76;

  static ScenarioParams uniform(int cells, int users_per_bs, int m, int n) {
    ScenarioParams p;
    p.num_cells = cells;
    p.users_per_cell.assign(static_cast<std::size_t>(cells), users_per_bs);
    p.tx_antennas = m;
    p.rx_antennas = n;
    return p;
  }
};

/// A dropped network. Users are stored cell by cell.
struct NetworkScenario {
  int num_cells = 0;
  std::vector<int> users_per_cell;
  double inter_site_m = 0.0;
  std::vector<Point> bs_pos;
  std::vector<Point> user_pos;
  std::vector<int> user_cell;
  std::vector<int> tx_antennas;  // per BS
  std::vector<int> rx_antennas;  // per user
  double noise_power = 0.0;      // watts
  double bandwidth_hz = 0.0;
  double p_max = 0.0;  // watts
  double d0_m = 0.0;
  double zeta = 0.0;

  int num_users() const { return static_cast<int>(user_pos.size()); }

  /// Global indices of the users served by `cell`.
  std::vector<int> users_of(int cell) const {
    std::vector<int> out;
    for (int i = 0; i < num_users(); ++i) {
      if (user_cell[static_cast<std::size_t>(i)] == cell) out.push_back(i);
    }
    return out;
  }

  std::vector<std::vector<int>> cell_groups() const {
    std::vector<std::vector<int>> g;
    for (int b = 0; b < num_cells; ++b) g.push_back(users_of(b));
    return g;
  }

  double distance(Point a, Point b) const;
  double user_bs_distance(int user, int bs) const {
    return distance(user_pos[static_cast<std::size_t>(user)], bs_pos[static_cast<std::size_t>(bs)]);
  }
};

namespace detail {

inline Point lattice_a1(double d) { return {d, 0.0}; }
inline Point lattice_a2(double d) { return {0.5 * d, std::sqrt(3.0) / 2.0 * d}; }

// Generators of the 7-cell wrap-around super-lattice: 2a1 + a2 and -a1 + 3a2.
inline std::array<Point, 2> wrap_basis(double d) {
  const Point a1 = lattice_a1(d), a2 = lattice_a2(d);
  return {Point{2 * a1.x + a2.x, 2 * a1.y + a2.y}, Point{-a1.x + 3 * a2.x, -a1.y + 3 * a2.y}};
}

inline bool inside_hexagon(Point p, double inter_site) {
  const double half = 0.5 * inter_site;
  for (double deg : {0.0, 60.0, 120.0}) {
    const double t = deg * std::numbers::pi / 180.0;
    if (std::abs(p.x * std::cos(t) + p.y * std::sin(t)) > half) return false;
  }
  return true;
}

}  // namespace detail

/// Distance on the wrap-around torus (plain Euclidean for a single cell).
/// The difference vector is first reduced modulo the super-lattice, then the
/// nearest of the 7 images is taken, so the result is invariant under
/// translation by any lattice vector.
inline double NetworkScenario::distance(Point a, Point b) const {
  double dx = a.x - b.x, dy = a.y - b.y;
  if (num_cells == 1) return std::hypot(dx, dy);
  const auto [w1, w2] = detail::wrap_basis(inter_site_m);
  const double det = w1.x * w2.y - w2.x * w1.y;
  const double c1 = std::round((dx * w2.y - dy * w2.x) / det);
  const double c2 = std::round((w1.x * dy - w1.y * dx) / det);
  dx -= c1 * w1.x + c2 * w2.x;
  dy -= c1 * w1.y + c2 * w2.y;
  double best = std::hypot(dx, dy);
  const std::array<Point, 6> images = {w1, w2, Point{w2.x - w1.x, w2.y - w1.y},
                                       Point{-w1.x, -w1.y}, Point{-w2.x, -w2.y},
                                       Point{w1.x - w2.x, w1.y - w2.y}};
  for (const Point& s : images) best = std::min(best, std::hypot(dx - s.x, dy - s.y));
  return best;
}

/// BSs at hexagon centres; users uniform inside their serving hexagon.
inline NetworkScenario build_hex_topology(const ScenarioParams& params, std::mt19937_64& rng) {
  if (params.num_cells != 1 && params.num_cells != 7) {
    throw DomainError("build_hex_topology: num_cells must be 1 or 7, got " +
                      std::to_string(params.num_cells));
  }
  if (params.users_per_cell.size() != static_cast<std::size_t>(params.num_cells)) {
    throw DimensionError("build_hex_topology: users_per_cell needs one entry per cell");
  }
  for (int k : params.users_per_cell) {
    if (k < 1) throw DomainError("build_hex_topology: every cell needs at least one user");
  }
  if (params.tx_antennas < 1 || params.rx_antennas < 1) {
    throw DomainError("build_hex_topology: antenna counts must be >= 1");
  }
  if (!(params.inter_site_m > 0.0) || !(params.d0_m > 0.0) || !(params.zeta > 0.0) ||
      !(params.bandwidth_hz > 0.0)) {
    throw DomainError("build_hex_topology: geometry and pathloss parameters must be positive");
  }

  NetworkScenario s;
  s.num_cells = params.num_cells;
  s.users_per_cell = params.users_per_cell;
  s.inter_site_m = params.inter_site_m;
  s.noise_power = dbm_to_watts(params.noise_psd_dbm_hz + 10.0 * std::log10(params.bandwidth_hz));
  s.bandwidth_hz = params.bandwidth_hz;
  s.p_max = dbm_to_watts(params.p_max_dbm);
  s.d0_m = params.d0_m;
  s.zeta = params.zeta;
  s.tx_antennas.assign(static_cast<std::size_t>(params.num_cells), params.tx_antennas);

  s.bs_pos.push_back({0.0, 0.0});
  if (params.num_cells == 7) {
    const double d = params.inter_site_m;
    for (int j = 0; j < 6; ++j) {
      const double t = j * std::numbers::pi / 3.0;
      s.bs_pos.push_back({d * std::cos(t), d * std::sin(t)});
    }
  }

  const double circumradius = params.inter_site_m / std::sqrt(3.0);
  std::uniform_real_distribution<double> u(-circumradius, circumradius);
  for (int b = 0; b < params.num_cells; ++b) {
    for (int k = 0; k < params.users_per_cell[static_cast<std::size_t>(b)]; ++k) {
      Point p;
      do {
        p = {u(rng), u(rng)};
      } while (!detail::inside_hexagon(p, params.inter_site_m));
      const Point c = s.bs_pos[static_cast<std::size_t>(b)];
      s.user_pos.push_back({c.x + p.x, c.y + p.y});
      s.user_cell.push_back(b);
      s.rx_antennas.push_back(params.rx_antennas);
    }
  }
  return s;
}

/// Amplitude pathloss (1 + d/d0)^(-zeta/2).
inline double pathloss_amplitude(double d, double d0, double zeta) {
  return std::pow(1.0 + d / d0, -0.5 * zeta);
}

/// Per-slot channel matrices H_{b' -> i}, shape N_i x M_{b'}, for every
/// receiver i and transmitter b'.
struct ChannelSet {
  int num_users = 0;
  int num_cells = 0;
  std::vector<int> user_cell;
  double noise_power = 0.0;
  std::uint64_t slot = 0;
  std::vector<ComplexMatrix> mats;  // [user * num_cells + bs]

  const ComplexMatrix& h(int user, int bs) const {
    return mats[static_cast<std::size_t>(user * num_cells + bs)];
  }
  ComplexMatrix& h(int user, int bs) { return mats[static_cast<std::size_t>(user * num_cells + bs)]; }

  /// Direct channel from the serving BS.
  const ComplexMatrix& direct(int user) const {
    return h(user, user_cell[static_cast<std::size_t>(user)]);
  }
  int cell(int user) const { return user_cell[static_cast<std::size_t>(user)]; }
  Eigen::Index tx_dim(int bs) const { return h(0, bs).cols(); }
  Eigen::Index rx_dim(int user) const { return h(user, 0).rows(); }

  std::vector<int> users_of(int bs) const {
    std::vector<int> out;
    for (int i = 0; i < num_users; ++i) {
      if (cell(i) == bs) out.push_back(i);
    }
    return out;
  }
};

/// i.i.d. Rayleigh block fading: entries are pathloss amplitude times CN(0,1).
/// The draw depends only on (seed, slot).
inline ChannelSet sample_channels(const NetworkScenario& s, std::uint64_t slot, std::uint64_t seed) {
  std::mt19937_64 rng(mix_seed(seed, slot));
  std::normal_distribution<double> n01(0.0, std::sqrt(0.5));
  ChannelSet c;
  c.num_users = s.num_users();
  c.num_cells = s.num_cells;
  c.user_cell = s.user_cell;
  c.noise_power = s.noise_power;
  c.slot = slot;
  c.mats.reserve(static_cast<std::size_t>(c.num_users * c.num_cells));
  for (int i = 0; i < c.num_users; ++i) {
    for (int b = 0; b < c.num_cells; ++b) {
      const double amp = pathloss_amplitude(s.user_bs_distance(i, b), s.d0_m, s.zeta);
      ComplexMatrix m(s.rx_antennas[static_cast<std::size_t>(i)],
                      s.tx_antennas[static_cast<std::size_t>(b)]);
      for (Eigen::Index cidx = 0; cidx < m.cols(); ++cidx) {
        for (Eigen::Index r = 0; r < m.rows(); ++r) {
          const double re = n01(rng);
          const double im = n01(rng);
          m(r, cidx) = amp * cplx(re, im);
        }
      }
      c.mats.push_back(std::move(m));
    }
  }
  return c;
}

/// One transmit beamformer per user, length M of the serving BS (sqrt-watts).
struct BeamformerSet {
  std::vector<ComplexVector> v;

  static BeamformerSet zeros(const ChannelSet& h) {
    BeamformerSet out;
    for (int i = 0; i < h.num_users; ++i) out.v.push_back(ComplexVector::Zero(h.tx_dim(h.cell(i))));
    return out;
  }

  double bs_power(const ChannelSet& h, int bs) const {
    double p = 0.0;
    for (int i = 0; i < h.num_users; ++i) {
      if (h.cell(i) == bs) p += v[static_cast<std::size_t>(i)].squaredNorm();
    }
    return p;
  }

  bool feasible(const ChannelSet& h, double p_max, double tol = 1e-9) const {
    if (v.size() != static_cast<std::size_t>(h.num_users)) return false;
    for (int i = 0; i < h.num_users; ++i) {
      if (v[static_cast<std::size_t>(i)].size() != h.tx_dim(h.cell(i))) return false;
      if (!v[static_cast<std::size_t>(i)].allFinite()) return false;
    }
    for (int b = 0; b < h.num_cells; ++b) {
      if (bs_power(h, b) > p_max + tol) return false;
    }
    return true;
  }
};

namespace detail {
inline void check_shapes(const BeamformerSet& V, const ChannelSet& H, int user) {
  if (V.v.size() != static_cast<std::size_t>(H.num_users)) {
    throw DimensionError("beamformer count does not match the channel set");
  }
  if (user < 0 || user >= H.num_users) throw DimensionError("user index out of range");
  for (int j = 0; j < H.num_users; ++j) {
    if (V.v[static_cast<std::size_t>(j)].size() != H.tx_dim(H.cell(j))) {
      throw DimensionError("beamformer length does not match transmit antennas");
    }
  }
}
}  // namespace detail

/// sigma^2 I + sum over all other streams of H v v^H H^H at receiver `user`.
/// With `include_own`, the user's own stream is added too (the MMSE
/// receiver covariance).
inline HermitianPD interference_covariance(const BeamformerSet& V, const ChannelSet& H, int user,
                                           bool include_own = false) {
  detail::check_shapes(V, H, user);
  const Eigen::Index n = H.rx_dim(user);
  ComplexMatrix cov = ComplexMatrix::Identity(n, n) * H.noise_power;
  for (int j = 0; j < H.num_users; ++j) {
    if (j == user && !include_own) continue;
    const ComplexVector hv = H.h(user, H.cell(j)) * V.v[static_cast<std::size_t>(j)];
    cov.noalias() += hv * hv.adjoint();
  }
  return HermitianPD(std::move(cov));
}

/// log(1 + v^H H^H B^-1 H v), nats.
inline double rate_bf(const BeamformerSet& V, const ChannelSet& H, int user) {
  const HermitianPD cov = interference_covariance(V, H, user);
  const ComplexVector a = H.direct(user) * V.v[static_cast<std::size_t>(user)];
  const double sinr = quad_form(pd_solve(cov, a), cov);
  return std::log1p(sinr);
}

inline std::vector<double> rates_bf(const BeamformerSet& V, const ChannelSet& H) {
  std::vector<double> r(static_cast<std::size_t>(H.num_users));
  for (int i = 0; i < H.num_users; ++i) r[static_cast<std::size_t>(i)] = rate_bf(V, H, i);
  return r;
}

// ---------------------------------------------------------------------------
// Scalar power-control model

/// |h_{f, j->k}|^2 for every band f, transmitter j and receiver k. Link j's
/// transmitter sits at the BS serving user j.
struct BandGains {
  int num_users = 0;
  int num_bands = 1;
  double noise_power = 0.0;
  std::vector<int> user_cell;
  std::vector<double> g;  // [(f * K + j) * K + k]

  double gain(int band, int from, int to) const {
    return g[static_cast<std::size_t>((band * num_users + from) * num_users + to)];
  }
  double& gain(int band, int from, int to) {
    return g[static_cast<std::size_t>((band * num_users + from) * num_users + to)];
  }
};

/// Independent Rayleigh draws per band, same pathloss.
inline BandGains sample_band_gains(const NetworkScenario& s, std::uint64_t slot, std::uint64_t seed,
                                   int bands = 1) {
  if (bands < 1) throw DomainError("sample_band_gains: bands must be >= 1");
  BandGains out;
  out.num_users = s.num_users();
  out.num_bands = bands;
  out.noise_power = s.noise_power;
  out.user_cell = s.user_cell;
  const auto k = static_cast<std::size_t>(out.num_users);
  out.g.resize(static_cast<std::size_t>(bands) * k * k);
  std::mt19937_64 rng(mix_seed(mix_seed(seed, slot), 0x5ca1a4));
  std::normal_distribution<double> n01(0.0, std::sqrt(0.5));
  for (int f = 0; f < bands; ++f) {
    for (int j = 0; j < out.num_users; ++j) {
      const int bs = s.user_cell[static_cast<std::size_t>(j)];
      for (int r = 0; r < out.num_users; ++r) {
        const double amp = pathloss_amplitude(s.user_bs_distance(r, bs), s.d0_m, s.zeta);
        const double re = n01(rng), im = n01(rng);
        out.gain(f, j, r) = amp * amp * (re * re + im * im);
      }
    }
  }
  return out;
}

/// Scalar view of a single-antenna channel set: link j transmits from the BS
/// of user j, so gain(j -> k) = |H_{cell(j) -> k}|^2.
inline BandGains gains_from_channels(const ChannelSet& H) {
  BandGains out;
  out.num_users = H.num_users;
  out.num_bands = 1;
  out.noise_power = H.noise_power;
  out.user_cell = H.user_cell;
  out.g.resize(static_cast<std::size_t>(H.num_users * H.num_users));
  for (int j = 0; j < H.num_users; ++j) {
    for (int k = 0; k < H.num_users; ++k) {
      const ComplexMatrix& m = H.h(k, H.cell(j));
      if (m.size() != 1) throw DimensionError("gains_from_channels: needs M = N = 1");
      out.gain(0, j, k) = std::norm(m(0, 0));
    }
  }
  return out;
}

/// Transmit powers p[f * K + k] (watts).
struct PowerAllocation {
  int num_users = 0;
  int num_bands = 1;
  std::vector<double> p;

  PowerAllocation() = default;
  PowerAllocation(int users, int bands, double fill = 0.0)
      : num_users(users), num_bands(bands), p(static_cast<std::size_t>(users * bands), fill) {}

  double at(int band, int user) const { return p[static_cast<std::size_t>(band * num_users + user)]; }
  double& at(int band, int user) { return p[static_cast<std::size_t>(band * num_users + user)]; }

  double user_total(int user) const {
    double s = 0.0;
    for (int f = 0; f < num_bands; ++f) s += at(f, user);
    return s;
  }

  /// Per-user budget: p >= 0 and sum over bands <= p_max.
  bool feasible(double p_max, double tol = 1e-9) const {
    for (double x : p) {
      if (!(x >= 0.0) || !std::isfinite(x)) return false;
    }
    for (int k = 0; k < num_users; ++k) {
      if (user_total(k) > p_max + tol) return false;
    }
    return true;
  }
};

struct SinrParts {
  double signal = 0.0;        // A
  double interference = 0.0;  // B, includes noise
};

inline SinrParts sinr_components(const PowerAllocation& p, const BandGains& g, int user, int band = 0) {
  if (p.num_users != g.num_users || p.num_bands != g.num_bands) {
    throw DimensionError("sinr_components: allocation and gains disagree");
  }
  SinrParts out;
  out.signal = p.at(band, user) * g.gain(band, user, user);
  out.interference = g.noise_power;
  for (int j = 0; j < g.num_users; ++j) {
    if (j != user) out.interference += p.at(band, j) * g.gain(band, j, user);
  }
  return out;
}

inline double rate_power(const PowerAllocation& p, const BandGains& g, int user, int band = 0) {
  const SinrParts s = sinr_components(p, g, user, band);
  return std::log1p(s.signal / s.interference);
}

/// Rates per (band, user) slot, laid out like PowerAllocation::p.
inline std::vector<double> slot_rates_power(const PowerAllocation& p, const BandGains& g) {
  std::vector<double> r(p.p.size());
  for (int f = 0; f < g.num_bands; ++f) {
    for (int k = 0; k < g.num_users; ++k) {
      r[static_cast<std::size_t>(f * g.num_users + k)] = rate_power(p, g, k, f);
    }
  }
  return r;
}

/// Per-user rate summed over bands.
inline std::vector<double> user_rates_power(const PowerAllocation& p, const BandGains& g) {
  const auto slots = slot_rates_power(p, g);
  std::vector<double> r(static_cast<std::size_t>(g.num_users), 0.0);
  for (std::size_t s = 0; s < slots.size(); ++s) r[s % r.size()] += slots[s];
  return r;
}

// ---------------------------------------------------------------------------
// Serialization

inline void to_json(nlohmann::json& j, const Point& p) { j = nlohmann::json::array({p.x, p.y}); }
inline void from_json(const nlohmann::json& j, Point& p) {
  p.x = j.at(0).get<double>();
  p.y = j.at(1).get<double>();
}

inline void to_json(nlohmann::json& j, const NetworkScenario& s) {
  j = nlohmann::json{{"num_cells", s.num_cells},     {"users_per_cell", s.users_per_cell},
                     {"inter_site_m", s.inter_site_m}, {"bs_pos", s.bs_pos},
                     {"user_pos", s.user_pos},       {"user_cell", s.user_cell},
                     {"tx_antennas", s.tx_antennas}, {"rx_antennas", s.rx_antennas},
                     {"noise_power", s.noise_power}, {"bandwidth_hz", s.bandwidth_hz},
                     {"p_max", s.p_max},             {"d0_m", s.d0_m},
                     {"zeta", s.zeta}};
}

inline void from_json(const nlohmann::json& j, NetworkScenario& s) {
  j.at("num_cells").get_to(s.num_cells);
  j.at("users_per_cell").get_to(s.users_per_cell);
  j.at("inter_site_m").get_to(s.inter_site_m);
  j.at("bs_pos").get_to(s.bs_pos);
  j.at("user_pos").get_to(s.user_pos);
  j.at("user_cell").get_to(s.user_cell);
  j.at("tx_antennas").get_to(s.tx_antennas);
  j.at("rx_antennas").get_to(s.rx_antennas);
  j.at("noise_power").get_to(s.noise_power);
  j.at("bandwidth_hz").get_to(s.bandwidth_hz);
  j.at("p_max").get_to(s.p_max);
  j.at("d0_m").get_to(s.d0_m);
  j.at("zeta").get_to(s.zeta);
  if (s.user_pos.size() != s.user_cell.size() || s.user_pos.size() != s.rx_antennas.size() ||
      s.bs_pos.size() != static_cast<std::size_t>(s.num_cells) ||
      s.tx_antennas.size() != static_cast<std::size_t>(s.num_cells)) {
    throw DimensionError("scenario JSON: inconsistent array lengths");
  }
  if (!(s.noise_power > 0.0) || !(s.p_max > 0.0)) {
    throw DomainError("scenario JSON: noise_power and p_max must be positive");
  }
}

namespace detail {
inline void put_le_double(std::ostream& os, double x) {
  auto bits = std::bit_cast<std::uint64_t>(x);
  if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap64(bits);
  os.write(reinterpret_cast<const char*>(&bits), sizeof bits);
}
inline double get_le_double(std::istream& is) {
  std::uint64_t bits = 0;
  is.read(reinterpret_cast<char*>(&bits), sizeof bits);
  if (!is) throw std::runtime_error("channel file truncated");
  if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap64(bits);
  return std::bit_cast<double>(bits);
}
}  // namespace detail

/// Channel dump: one line of JSON header, then little-endian doubles,
/// re/im interleaved, matrices in (user, bs) order, entries column-major.
inline void write_channels(const std::string& path, const ChannelSet& c) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path + " for writing");
  nlohmann::json shapes = nlohmann::json::array();
  for (const auto& m : c.mats) shapes.push_back({m.rows(), m.cols()});
  const nlohmann::json header = {{"format", "pctl-channels"},  {"version", 1},
                                 {"num_users", c.num_users},   {"num_cells", c.num_cells},
                                 {"user_cell", c.user_cell},   {"noise_power", c.noise_power},
                                 {"slot", c.slot},             {"shapes", shapes},
                                 {"layout", "user-major, bs, column-major, re/im interleaved, f64 LE"}};
  os << header.dump() << '\n';
  for (const auto& m : c.mats) {
    for (Eigen::Index k = 0; k < m.size(); ++k) {
      detail::put_le_double(os, m(k).real());
      detail::put_le_double(os, m(k).imag());
    }
  }
  if (!os) throw std::runtime_error("write failed: " + path);
}

inline ChannelSet read_channels(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path);
  std::string line;
  std::getline(is, line);
  const auto header = nlohmann::json::parse(line);
  if (header.at("format") != "pctl-channels") throw std::runtime_error(path + ": not a channel file");
  ChannelSet c;
  header.at("num_users").get_to(c.num_users);
  header.at("num_cells").get_to(c.num_cells);
  header.at("user_cell").get_to(c.user_cell);
  header.at("noise_power").get_to(c.noise_power);
  header.at("slot").get_to(c.slot);
  for (const auto& s : header.at("shapes")) {
    ComplexMatrix m(s.at(0).get<Eigen::Index>(), s.at(1).get<Eigen::Index>());
    for (Eigen::Index k = 0; k < m.size(); ++k) {
      const double re = detail::get_le_double(is);
      const double im = detail::get_le_double(is);
      m(k) = cplx(re, im);
    }
    c.mats.push_back(std::move(m));
  }
  return c;
}

}  // namespace pctl
