#pragma once

// Percentile utilities and a small expression tree for hybrid concave,
// coordinate-wise non-decreasing utilities of a rate vector.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "pctl/errors.hpp"

namespace pctl {

using Supergradient = std::vector<double>;

/// K_q = ceil(q K / 100), clamped to [1, K].
inline int kq_from_percent(double q, int k) {
  if (k < 1) throw DomainError("kq_from_percent: K must be >= 1");
  if (!(q > 0.0) || q > 100.0) throw DomainError("kq_from_percent: q must lie in (0, 100]");
  // Guard against q*K/100 landing a hair above an integer.
  const double raw = q * k / 100.0;
  int kq = static_cast<int>(std::ceil(raw - 1e-9));
  return std::clamp(kq, 1, k);
}

namespace detail {

inline void check_kq(std::size_t n, int kq) {
  if (kq < 1 || static_cast<std::size_t>(kq) > n) {
    throw DomainError("percentile count K_q=" + std::to_string(kq) + " outside [1, " +
                      std::to_string(n) + "]");
  }
}

/// Indices sorted by value; ties keep index order.
inline std::vector<std::size_t> ascending_order(std::span<const double> x) {
  std::vector<std::size_t> idx(x.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  return idx;
}

inline std::vector<std::size_t> descending_order(std::span<const double> x) {
  std::vector<std::size_t> idx(x.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return x[a] > x[b]; });
  return idx;
}

}  // namespace detail

/// Sum of the K_q smallest entries.
inline double slqp(std::span<const double> x, int kq) {
  detail::check_kq(x.size(), kq);
  const auto idx = detail::ascending_order(x);
  double s = 0.0;
  for (int i = 0; i < kq; ++i) s += x[idx[static_cast<std::size_t>(i)]];
  return s;
}

/// Sum of the K_q largest entries.
inline double sgqp(std::span<const double> x, int kq) {
  detail::check_kq(x.size(), kq);
  const auto idx = detail::descending_order(x);
  double s = 0.0;
  for (int i = 0; i < kq; ++i) s += x[idx[static_cast<std::size_t>(i)]];
  return s;
}

/// Indicator of the K_q smallest entries, lower index first on ties.
inline Supergradient slqp_supergradient(std::span<const double> x, int kq) {
  detail::check_kq(x.size(), kq);
  const auto idx = detail::ascending_order(x);
  Supergradient g(x.size(), 0.0);
  for (int i = 0; i < kq; ++i) g[idx[static_cast<std::size_t>(i)]] = 1.0;
  return g;
}

/// Indicator of the K_q largest entries (a subgradient of the convex sgqp).
inline Supergradient sgqp_subgradient(std::span<const double> x, int kq) {
  detail::check_kq(x.size(), kq);
  const auto idx = detail::descending_order(x);
  Supergradient g(x.size(), 0.0);
  for (int i = 0; i < kq; ++i) g[idx[static_cast<std::size_t>(i)]] = 1.0;
  return g;
}

// ---------------------------------------------------------------------------
// Utility expression tree

enum class NodeKind { Slot, Slqp, Sum, Min, Log, AlphaFair, Harmonic, WeightedSum };

/// One node of a hybrid utility. Build through the factory functions in
/// `pctl::util`, which enforce the concave / non-decreasing atoms only.
struct UtilityNode {
  NodeKind kind = NodeKind::Slot;
  std::size_t slot = 0;         // Slot
  int kq = 0;                   // Slqp
  double alpha = 0.0;           // AlphaFair
  std::vector<double> weights;  // WeightedSum
  std::vector<UtilityNode> children;
};

namespace util {

inline UtilityNode slot(std::size_t i) {
  UtilityNode n;
  n.kind = NodeKind::Slot;
  n.slot = i;
  return n;
}

inline std::vector<UtilityNode> slots(const std::vector<int>& idx) {
  std::vector<UtilityNode> out;
  out.reserve(idx.size());
  for (int i : idx) {
    if (i < 0) throw DomainError("negative slot index");
    out.push_back(slot(static_cast<std::size_t>(i)));
  }
  return out;
}

inline std::vector<UtilityNode> all_slots(std::size_t n) {
  std::vector<UtilityNode> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(slot(i));
  return out;
}

namespace detail {
inline UtilityNode make(NodeKind kind, std::vector<UtilityNode> children) {
  if (children.empty()) throw DomainError("utility node needs at least one argument");
  UtilityNode n;
  n.kind = kind;
  n.children = std::move(children);
  return n;
}
}  // namespace detail

inline UtilityNode slqp(int kq, std::vector<UtilityNode> over) {
  pctl::detail::check_kq(over.size(), kq);
  UtilityNode n = detail::make(NodeKind::Slqp, std::move(over));
  n.kq = kq;
  return n;
}

inline UtilityNode sum(std::vector<UtilityNode> over) { return detail::make(NodeKind::Sum, std::move(over)); }
inline UtilityNode min(std::vector<UtilityNode> over) { return detail::make(NodeKind::Min, std::move(over)); }

inline UtilityNode log(UtilityNode arg) {
  std::vector<UtilityNode> c;
  c.push_back(std::move(arg));
  return detail::make(NodeKind::Log, std::move(c));
}

/// Sum of x^(1-alpha)/(1-alpha); alpha == 1 is the log sum.
inline UtilityNode alpha_fair(double alpha, std::vector<UtilityNode> over) {
  if (!(alpha > 0.0) || !std::isfinite(alpha)) throw DomainError("alpha_fair: alpha must be > 0");
  UtilityNode n = detail::make(NodeKind::AlphaFair, std::move(over));
  n.alpha = alpha;
  return n;
}

inline UtilityNode harmonic_mean(std::vector<UtilityNode> over) {
  return detail::make(NodeKind::Harmonic, std::move(over));
}

inline UtilityNode weighted_sum(std::vector<double> weights, std::vector<UtilityNode> over) {
  if (weights.size() != over.size()) throw DimensionError("weighted_sum: one weight per argument");
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw DomainError("weighted_sum: weights must be finite and >= 0");
  }
  UtilityNode n = detail::make(NodeKind::WeightedSum, std::move(over));
  n.weights = std::move(weights);
  return n;
}

/// One child per group, each built by `make(group_slots)`.
template <class Fn>
std::vector<UtilityNode> per_group(const std::vector<std::vector<int>>& groups, Fn&& make) {
  std::vector<UtilityNode> out;
  out.reserve(groups.size());
  for (const auto& g : groups) {
    if (g.empty()) throw DomainError("per_group: empty group");
    out.push_back(make(g));
  }
  return out;
}

}  // namespace util

struct EvalOptions {
  /// Replace the log-type atoms below `floor` by their tangent line at
  /// `floor` instead of raising a DomainError.
  bool barrier = false;
  double floor = 1e-12;
};

/// A utility together with the length of the rate vector it reads.
class UtilitySpec {
 public:
  UtilitySpec() = default;
  UtilitySpec(UtilityNode root, std::size_t arity) : root_(std::move(root)), arity_(arity) {
    check(root_);
  }

  const UtilityNode& root() const noexcept { return root_; }
  std::size_t arity() const noexcept { return arity_; }

 private:
  void check(const UtilityNode& n) const {
    if (n.kind == NodeKind::Slot) {
      if (n.slot >= arity_) {
        throw DimensionError("utility slot " + std::to_string(n.slot) + " >= arity " + std::to_string(arity_));
      }
      return;
    }
    for (const auto& c : n.children) check(c);
  }

  UtilityNode root_;
  std::size_t arity_ = 0;
};

namespace detail {

inline std::size_t first_slot(const UtilityNode& n) {
  if (n.kind == NodeKind::Slot) return n.slot;
  std::size_t best = DomainError::npos;
  for (const auto& c : n.children) best = std::min(best, first_slot(c));
  return best;
}

[[noreturn]] inline void domain_fail(const char* atom, const UtilityNode& child, double v) {
  throw DomainError(std::string(atom) + ": nonpositive argument " + std::to_string(v) + " (slot " +
                        std::to_string(first_slot(child)) + ")",
                    first_slot(child));
}

inline double alpha_term(double x, double alpha) {
  if (alpha == 1.0) return std::log(x);
  return std::pow(x, 1.0 - alpha) / (1.0 - alpha);
}

inline double eval_node(const UtilityNode& n, std::span<const double> r, const EvalOptions& o);

inline std::vector<double> child_values(const UtilityNode& n, std::span<const double> r, const EvalOptions& o) {
  std::vector<double> v(n.children.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = eval_node(n.children[i], r, o);
  return v;
}

inline double eval_node(const UtilityNode& n, std::span<const double> r, const EvalOptions& o) {
  switch (n.kind) {
    case NodeKind::Slot:
      return r[n.slot];
    case NodeKind::Sum: {
      double s = 0.0;
      for (const auto& c : n.children) s += eval_node(c, r, o);
      return s;
    }
    case NodeKind::Slqp:
      return pctl::slqp(child_values(n, r, o), n.kq);
    case NodeKind::Min: {
      const auto v = child_values(n, r, o);
      return *std::min_element(v.begin(), v.end());
    }
    case NodeKind::Log: {
      const double x = eval_node(n.children[0], r, o);
      if (x > 0.0 && (!o.barrier || x >= o.floor)) return std::log(x);
      if (!o.barrier) domain_fail("log", n.children[0], x);
      return std::log(o.floor) + (x - o.floor) / o.floor;
    }
    case NodeKind::AlphaFair: {
      double s = 0.0;
      for (const auto& c : n.children) {
        const double x = eval_node(c, r, o);
        if (x > 0.0 && (!o.barrier || x >= o.floor)) {
          s += alpha_term(x, n.alpha);
        } else {
          if (!o.barrier) domain_fail("alpha_fair", c, x);
          s += alpha_term(o.floor, n.alpha) + std::pow(o.floor, -n.alpha) * (x - o.floor);
        }
      }
      return s;
    }
    case NodeKind::Harmonic: {
      const auto v = child_values(n, r, o);
      double inv = 0.0, lin = 0.0;
      for (std::size_t i = 0; i < v.size(); ++i) {
        double x = v[i];
        if (!(x > 0.0) || (o.barrier && x < o.floor)) {
          if (!o.barrier) domain_fail("harmonic_mean", n.children[i], x);
          lin += x - o.floor;  // tangent-plane term, weighted below
          x = o.floor;
        }
        inv += 1.0 / x;
      }
      const double m = static_cast<double>(v.size());
      double value = m / inv;
      if (lin != 0.0) {
        // HM(c) + grad HM(c) . (x - c) with every clipped coordinate at floor.
        value += m / (inv * inv) / (o.floor * o.floor) * lin;
      }
      return value;
    }
    case NodeKind::WeightedSum: {
      double s = 0.0;
      for (std::size_t i = 0; i < n.children.size(); ++i) s += n.weights[i] * eval_node(n.children[i], r, o);
      return s;
    }
  }
  return 0.0;
}

inline void grad_node(const UtilityNode& n, std::span<const double> r, const EvalOptions& o, double w,
                      std::vector<double>& g) {
  if (w == 0.0) return;
  switch (n.kind) {
    case NodeKind::Slot:
      g[n.slot] += w;
      return;
    case NodeKind::Sum:
      for (const auto& c : n.children) grad_node(c, r, o, w, g);
      return;
    case NodeKind::Slqp: {
      const auto sel = slqp_supergradient(child_values(n, r, o), n.kq);
      for (std::size_t i = 0; i < sel.size(); ++i) {
        if (sel[i] != 0.0) grad_node(n.children[i], r, o, w, g);
      }
      return;
    }
    case NodeKind::Min: {
      const auto sel = slqp_supergradient(child_values(n, r, o), 1);
      for (std::size_t i = 0; i < sel.size(); ++i) {
        if (sel[i] != 0.0) grad_node(n.children[i], r, o, w, g);
      }
      return;
    }
    case NodeKind::Log: {
      const double x = eval_node(n.children[0], r, o);
      double d;
      if (x > 0.0 && (!o.barrier || x >= o.floor)) {
        d = 1.0 / x;
      } else {
        if (!o.barrier) domain_fail("log", n.children[0], x);
        d = 1.0 / o.floor;
      }
      grad_node(n.children[0], r, o, w * d, g);
      return;
    }
    case NodeKind::AlphaFair:
      for (const auto& c : n.children) {
        const double x = eval_node(c, r, o);
        double d;
        if (x > 0.0 && (!o.barrier || x >= o.floor)) {
          d = std::pow(x, -n.alpha);
        } else {
          if (!o.barrier) domain_fail("alpha_fair", c, x);
          d = std::pow(o.floor, -n.alpha);
        }
        grad_node(c, r, o, w * d, g);
      }
      return;
    case NodeKind::Harmonic: {
      const auto v = child_values(n, r, o);
      double inv = 0.0;
      std::vector<double> xs(v.size());
      for (std::size_t i = 0; i < v.size(); ++i) {
        double x = v[i];
        if (!(x > 0.0) || (o.barrier && x < o.floor)) {
          if (!o.barrier) domain_fail("harmonic_mean", n.children[i], x);
          x = o.floor;
        }
        xs[i] = x;
        inv += 1.0 / x;
      }
      const double m = static_cast<double>(v.size());
      for (std::size_t i = 0; i < v.size(); ++i) {
        grad_node(n.children[i], r, o, w * m / (inv * inv) / (xs[i] * xs[i]), g);
      }
      return;
    }
    case NodeKind::WeightedSum:
      for (std::size_t i = 0; i < n.children.size(); ++i) grad_node(n.children[i], r, o, w * n.weights[i], g);
      return;
  }
}

inline void check_arity(const UtilitySpec& spec, std::span<const double> rates) {
  if (rates.size() != spec.arity()) {
    throw DimensionError("utility expects " + std::to_string(spec.arity()) + " rates, got " +
                         std::to_string(rates.size()));
  }
}

}  // namespace detail

inline double eval(const UtilitySpec& spec, std::span<const double> rates, const EvalOptions& o = {}) {
  detail::check_arity(spec, rates);
  return detail::eval_node(spec.root(), rates, o);
}

/// Chain-rule supergradient of the composed utility w.r.t. the rate slots.
inline Supergradient eval_supergradient(const UtilitySpec& spec, std::span<const double> rates,
                                        const EvalOptions& o = {}) {
  detail::check_arity(spec, rates);
  Supergradient g(rates.size(), 0.0);
  detail::grad_node(spec.root(), rates, o, 1.0, g);
  return g;
}

// ---------------------------------------------------------------------------
// Named constructions used throughout the experiments

namespace util {

/// Network SLqP over all slots.
inline UtilitySpec network_slqp(std::size_t k, int kq) { return {slqp(kq, all_slots(k)), k}; }

/// Sum of all rates plus w times the SLqP with K_q.
inline UtilitySpec sum_plus_slqp(std::size_t k, double w, int kq) {
  std::vector<UtilityNode> terms;
  terms.push_back(sum(all_slots(k)));
  terms.push_back(slqp(kq, all_slots(k)));
  return {weighted_sum({1.0, w}, std::move(terms)), k};
}

enum class CellCombiner { Min, GeometricMean, ArithmeticMean };

/// Combination of per-group q-th percentile SLqP values. The geometric mean
/// is carried as the mean of logs (same maximizers, concave).
inline UtilitySpec per_cell_percentile(std::size_t k, const std::vector<std::vector<int>>& cells, double q,
                                       CellCombiner how) {
  auto per_cell = per_group(cells, [&](const std::vector<int>& g) {
    return slqp(kq_from_percent(q, static_cast<int>(g.size())), slots(g));
  });
  const double inv_b = 1.0 / static_cast<double>(cells.size());
  switch (how) {
    case CellCombiner::Min:
      return {min(std::move(per_cell)), k};
    case CellCombiner::ArithmeticMean:
      return {weighted_sum(std::vector<double>(cells.size(), inv_b), std::move(per_cell)), k};
    case CellCombiner::GeometricMean: {
      std::vector<UtilityNode> logs;
      for (auto& c : per_cell) logs.push_back(log(std::move(c)));
      return {weighted_sum(std::vector<double>(cells.size(), inv_b), std::move(logs)), k};
    }
  }
  throw DomainError("unknown cell combiner");
}

/// Slots of user k on every band, for a (band, user) slot layout.
inline std::vector<std::vector<int>> user_band_groups(int users, int bands) {
  std::vector<std::vector<int>> g(static_cast<std::size_t>(users));
  for (int k = 0; k < users; ++k) {
    for (int f = 0; f < bands; ++f) g[static_cast<std::size_t>(k)].push_back(f * users + k);
  }
  return g;
}

/// min over users of the rate summed over bands.
inline UtilitySpec multiband_maxmin(int users, int bands) {
  auto totals = per_group(user_band_groups(users, bands), [](const std::vector<int>& g) { return sum(slots(g)); });
  return {min(std::move(totals)), static_cast<std::size_t>(users * bands)};
}

/// SLqP of the per-user log rates.
inline UtilitySpec pf_slqp(std::size_t k, int kq) {
  std::vector<UtilityNode> logs;
  for (std::size_t i = 0; i < k; ++i) logs.push_back(log(slot(i)));
  return {slqp(kq, std::move(logs)), k};
}

}  // namespace util

// ---------------------------------------------------------------------------
// JSON form
//
//   node := {"slot": i}
//         | {"sum": over} | {"min": over} | {"harmonic": over}
//         | {"slqp": {"kq": n | "q": pct, "over": over}}
//         | {"alpha_fair": {"alpha": a, "over": over}}
//         | {"log": node}
//         | {"wsum": [[w, node], ...]}
//   over := "all" | [i, ...] | [node, ...]
//         | {"per_group": {"groups": [[i, ...], ...] | "cells" | "users", "node": node}}
//
// Inside a per_group template, "over": "group" names the group's slots.

struct UtilityParseContext {
  std::size_t arity = 0;
  std::vector<std::vector<int>> cells;  // used by "groups": "cells"
  int users = 0;                        // used by "groups": "users"
  int bands = 1;
};

namespace detail {

inline UtilityNode parse_node(const nlohmann::json& j, const UtilityParseContext& ctx,
                              const std::vector<int>* group);

inline std::vector<UtilityNode> parse_over(const nlohmann::json& j, const UtilityParseContext& ctx,
                                           const std::vector<int>* group) {
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "all") return util::all_slots(ctx.arity);
    if (s == "group") {
      if (group == nullptr) throw ConfigError("utility", "\"group\" used outside a per_group template");
      return util::slots(*group);
    }
    throw ConfigError("utility", "unknown argument list \"" + s + "\"");
  }
  if (j.is_array()) {
    std::vector<UtilityNode> out;
    for (const auto& e : j) {
      if (e.is_number_integer()) {
        out.push_back(util::slot(e.get<std::size_t>()));
      } else {
        out.push_back(parse_node(e, ctx, group));
      }
    }
    return out;
  }
  if (j.is_object() && j.contains("per_group")) {
    const auto& pg = j.at("per_group");
    std::vector<std::vector<int>> groups;
    const auto& gj = pg.at("groups");
    if (gj.is_string()) {
      const auto s = gj.get<std::string>();
      if (s == "cells") {
        groups = ctx.cells;
      } else if (s == "users") {
        groups = util::user_band_groups(ctx.users, ctx.bands);
      } else {
        throw ConfigError("utility", "unknown group set \"" + s + "\"");
      }
    } else {
      groups = gj.get<std::vector<std::vector<int>>>();
    }
    if (groups.empty()) throw ConfigError("utility", "per_group has no groups");
    const auto& tmpl = pg.at("node");
    return util::per_group(groups, [&](const std::vector<int>& g) { return parse_node(tmpl, ctx, &g); });
  }
  throw ConfigError("utility", "cannot read argument list " + j.dump());
}

inline UtilityNode parse_node(const nlohmann::json& j, const UtilityParseContext& ctx,
                              const std::vector<int>* group) {
  if (!j.is_object() || j.size() != 1) throw ConfigError("utility", "node must be a one-key object: " + j.dump());
  const auto& [key, body] = *j.items().begin();
  if (key == "slot") return util::slot(body.get<std::size_t>());
  if (key == "sum") return util::sum(parse_over(body, ctx, group));
  if (key == "min") return util::min(parse_over(body, ctx, group));
  if (key == "harmonic") return util::harmonic_mean(parse_over(body, ctx, group));
  if (key == "log") return util::log(parse_node(body, ctx, group));
  if (key == "slqp") {
    auto over = parse_over(body.at("over"), ctx, group);
    int kq;
    if (body.contains("kq")) {
      kq = body.at("kq").get<int>();
    } else if (body.contains("q")) {
      kq = kq_from_percent(body.at("q").get<double>(), static_cast<int>(over.size()));
    } else {
      throw ConfigError("utility", "slqp needs \"kq\" or \"q\"");
    }
    return util::slqp(kq, std::move(over));
  }
  if (key == "alpha_fair") {
    return util::alpha_fair(body.at("alpha").get<double>(), parse_over(body.at("over"), ctx, group));
  }
  if (key == "wsum") {
    std::vector<double> w;
    std::vector<UtilityNode> c;
    for (const auto& term : body) {
      w.push_back(term.at(0).get<double>());
      c.push_back(parse_node(term.at(1), ctx, group));
    }
    return util::weighted_sum(std::move(w), std::move(c));
  }
  throw ConfigError("utility", "unknown utility atom \"" + key + "\"");
}

inline nlohmann::json dump_node(const UtilityNode& n) {
  auto over = [](const UtilityNode& p) {
    bool leaves = std::all_of(p.children.begin(), p.children.end(),
                              [](const UtilityNode& c) { return c.kind == NodeKind::Slot; });
    nlohmann::json a = nlohmann::json::array();
    for (const auto& c : p.children) {
      if (leaves) {
        a.push_back(c.slot);
      } else {
        a.push_back(dump_node(c));
      }
    }
    return a;
  };
  switch (n.kind) {
    case NodeKind::Slot:
      return {{"slot", n.slot}};
    case NodeKind::Sum:
      return {{"sum", over(n)}};
    case NodeKind::Min:
      return {{"min", over(n)}};
    case NodeKind::Harmonic:
      return {{"harmonic", over(n)}};
    case NodeKind::Log:
      return {{"log", dump_node(n.children[0])}};
    case NodeKind::Slqp:
      return {{"slqp", {{"kq", n.kq}, {"over", over(n)}}}};
    case NodeKind::AlphaFair:
      return {{"alpha_fair", {{"alpha", n.alpha}, {"over", over(n)}}}};
    case NodeKind::WeightedSum: {
      nlohmann::json a = nlohmann::json::array();
      for (std::size_t i = 0; i < n.children.size(); ++i) a.push_back({n.weights[i], dump_node(n.children[i])});
      return {{"wsum", a}};
    }
  }
  return {};
}

}  // namespace detail

/// Parses and validates a utility expression. Invalid trees raise
/// ConfigError or DomainError.
inline UtilitySpec parse_utility(const nlohmann::json& j, const UtilityParseContext& ctx) {
  try {
    return UtilitySpec(detail::parse_node(j, ctx, nullptr), ctx.arity);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("utility", e.what());
  }
}

/// Fully expanded JSON form (explicit slot lists).
inline nlohmann::json dump_utility(const UtilitySpec& spec) { return detail::dump_node(spec.root()); }

}  // namespace pctl
