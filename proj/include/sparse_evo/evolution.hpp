#pragma once

// End-of-epoch rewiring. Each bipartite layer first drops a fraction of its
// connections (by weight magnitude, or by |weight| * cosine similarity) and
// then adds the same number back (uniformly at random, the most similar
// non-connected pairs, or pairs sampled in proportion to their similarity).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <span>
#include <vector>

#include "sparse_evo/activation_log.hpp"
#include "sparse_evo/model.hpp"
#include "sparse_evo/random.hpp"
#include "sparse_evo/topology.hpp"

namespace sparse_evo {

struct RewireReport {
  struct Layer {
    std::size_t layer = 0;
    std::size_t removed = 0;
    std::size_t added = 0;
    std::uint64_t dot_products = 0;
    std::size_t samples = 0;
    bool fallback = false;  // similarity mass ran out; uniform addition used
  };
  int epoch = 0;
  std::vector<Layer> layers;

  std::size_t total_removed() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += l.removed;
    return n;
  }
  std::size_t total_added() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += l.added;
    return n;
  }
};

/// floor(zeta * P) + floor(zeta * N); zero counts as positive.
inline std::size_t removal_count(std::span<const double> weights, double zeta) {
  std::size_t pos = 0;
  for (double w : weights) pos += w >= 0.0;
  const std::size_t neg = weights.size() - pos;
  return static_cast<std::size_t>(std::floor(zeta * static_cast<double>(pos))) +
         static_cast<std::size_t>(std::floor(zeta * static_cast<double>(neg)));
}

namespace detail {

/// Drops the edges at `doomed` (any order) and returns them in edge order.
inline std::vector<Connection> erase_edges(LayerTopology& topo, SparseLayer& params,
                                           std::vector<std::size_t> doomed) {
  std::sort(doomed.begin(), doomed.end());
  std::vector<Connection> removed;
  removed.reserve(doomed.size());
  std::size_t write = 0;
  std::size_t d = 0;
  for (std::size_t e = 0; e < topo.edges.size(); ++e) {
    if (d < doomed.size() && doomed[d] == e) {
      removed.push_back(topo.edges[e]);
      ++d;
      continue;
    }
    topo.edges[write] = topo.edges[e];
    params.weights[write] = params.weights[e];
    params.weight_velocity[write] = params.weight_velocity[e];
    ++write;
  }
  topo.edges.resize(write);
  params.weights.resize(write);
  params.weight_velocity.resize(write);
  return removed;
}

/// Indices of the `count` smallest keys; ties go to the lower edge index,
/// which is the lower (source, target) pair since edges are kept sorted.
inline std::vector<std::size_t> smallest(std::vector<std::size_t> candidates,
                                         std::span<const double> key, std::size_t count) {
  count = std::min(count, candidates.size());
  auto less = [&](std::size_t a, std::size_t b) {
    return key[a] != key[b] ? key[a] < key[b] : a < b;
  };
  std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(count),
                    candidates.end(), less);
  candidates.resize(count);
  return candidates;
}

/// Binary tree of partial sums over non-negative leaf weights. Zeroing a
/// leaf recomputes its ancestors from their children, so sums never drift.
class SumTree {
 public:
  explicit SumTree(std::span<const double> weights) {
    leaves_ = 1;
    while (leaves_ < weights.size()) leaves_ <<= 1;
    tree_.assign(2 * leaves_, 0.0);
    std::copy(weights.begin(), weights.end(), tree_.begin() + static_cast<std::ptrdiff_t>(leaves_));
    for (std::size_t i = leaves_; i-- > 1;) tree_[i] = tree_[2 * i] + tree_[2 * i + 1];
  }

  double total() const { return tree_[1]; }

  /// Leaf chosen with probability weight / total. Requires total() > 0.
  std::size_t sample(double u01) const {
    double u = u01 * total();
    std::size_t i = 1;
    while (i < leaves_) {
      const double left = tree_[2 * i];
      const double right = tree_[2 * i + 1];
      if ((u < left && left > 0.0) || right <= 0.0) {
        i = 2 * i;
      } else {
        u -= left;
        i = 2 * i + 1;
      }
    }
    return i - leaves_;
  }

  void zero(std::size_t leaf) {
    std::size_t i = leaf + leaves_;
    tree_[i] = 0.0;
    for (i >>= 1; i >= 1; i >>= 1) tree_[i] = tree_[2 * i] + tree_[2 * i + 1];
  }

 private:
  std::size_t leaves_ = 1;
  std::vector<double> tree_;
};

inline std::vector<std::size_t> non_edges(const LayerTopology& topo) {
  const auto occ = topo.occupancy();
  std::vector<std::size_t> out;
  out.reserve(occ.size() - topo.edges.size());
  for (std::size_t f = 0; f < occ.size(); ++f)
    if (!occ[f]) out.push_back(f);
  return out;
}

inline Connection from_flat(const LayerTopology& topo, std::size_t flat, int epoch) {
  return {static_cast<NeuronIndex>(flat / topo.shape.n_next),
          static_cast<NeuronIndex>(flat % topo.shape.n_next), epoch};
}

}  // namespace detail

/// Removes floor(zeta * P) of the smallest non-negative weights and
/// floor(zeta * N) of the negative weights closest to zero.
inline std::vector<Connection> remove_magnitude(LayerTopology& topo, SparseLayer& params,
                                                double zeta) {
  std::vector<std::size_t> pos, neg;
  for (std::size_t e = 0; e < params.weights.size(); ++e)
    (params.weights[e] >= 0.0 ? pos : neg).push_back(e);
  const auto n_pos = static_cast<std::size_t>(std::floor(zeta * static_cast<double>(pos.size())));
  const auto n_neg = static_cast<std::size_t>(std::floor(zeta * static_cast<double>(neg.size())));
  std::vector<double> magnitude(params.weights.size());
  for (std::size_t e = 0; e < magnitude.size(); ++e) magnitude[e] = std::abs(params.weights[e]);
  auto doomed = detail::smallest(std::move(pos), magnitude, n_pos);
  const auto doomed_neg = detail::smallest(std::move(neg), magnitude, n_neg);
  doomed.insert(doomed.end(), doomed_neg.begin(), doomed_neg.end());
  return detail::erase_edges(topo, params, std::move(doomed));
}

/// Removes the `count` edges with the smallest |w| * similarity.
inline std::vector<Connection> remove_lowest_metric(LayerTopology& topo, SparseLayer& params,
                                                    std::span<const double> similarities,
                                                    std::size_t count) {
  if (similarities.size() != topo.edges.size())
    throw DimensionMismatch("need one similarity per edge");
  std::vector<double> metric(topo.edges.size());
  for (std::size_t e = 0; e < metric.size(); ++e)
    metric[e] = std::abs(params.weights[e]) * similarities[e];
  std::vector<std::size_t> all(topo.edges.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  return detail::erase_edges(topo, params, detail::smallest(std::move(all), metric, count));
}

/// Cosine-weighted removal. The count matches remove_magnitude so every
/// policy rewires the same number of connections.
inline std::vector<Connection> remove_cosine_weighted(LayerTopology& topo, SparseLayer& params,
                                                      std::span<const double> similarities,
                                                      double zeta) {
  return remove_lowest_metric(topo, params, similarities, removal_count(params.weights, zeta));
}

/// Up to k distinct non-edges drawn uniformly by rejection sampling.
inline std::vector<Connection> select_random(const LayerTopology& topo, std::size_t k, Rng& rng,
                                             int epoch = 0) {
  const std::size_t total = topo.shape.dense_size();
  const std::size_t free = total - topo.edges.size();
  std::vector<Connection> picks;
  if (k >= free) {
    for (auto f : detail::non_edges(topo)) picks.push_back(detail::from_flat(topo, f, epoch));
    return picks;
  }
  auto occ = topo.occupancy();
  picks.reserve(k);
  while (picks.size() < k) {
    const auto f = static_cast<std::size_t>(uniform_index(rng, total));
    if (occ[f]) continue;
    occ[f] = 1;
    picks.push_back(detail::from_flat(topo, f, epoch));
  }
  return picks;
}

/// The k non-edges with the largest similarity, ties to the lower
/// (source, target). Depends only on the topology, C and k.
inline std::vector<Connection> select_top_cosine(const LayerTopology& topo, const CosineMatrix& c,
                                                 std::size_t k, int epoch = 0) {
  if (c.n_prev() != topo.shape.n_prev || c.n_next() != topo.shape.n_next)
    throw DimensionMismatch("cosine matrix does not match layer shape");
  auto candidates = detail::non_edges(topo);
  k = std::min(k, candidates.size());
  const std::size_t n_next = topo.shape.n_next;
  auto value = [&](std::size_t f) { return c(f / n_next, f % n_next); };
  auto better = [&](std::size_t a, std::size_t b) {
    const double va = value(a), vb = value(b);
    return va != vb ? va > vb : a < b;
  };
  if (k < candidates.size())
    std::nth_element(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(k),
                     candidates.end(), better);
  candidates.resize(k);
  std::sort(candidates.begin(), candidates.end(), better);
  std::vector<Connection> picks;
  picks.reserve(k);
  for (auto f : candidates) picks.push_back(detail::from_flat(topo, f, epoch));
  return picks;
}

/// k non-edges drawn without replacement with probability proportional to
/// their similarity, renormalized after every draw. If the remaining mass is
/// zero the rest are drawn uniformly and `*fallback` is set.
inline std::vector<Connection> select_probabilistic_cosine(const LayerTopology& topo,
                                                           const CosineMatrix& c, std::size_t k,
                                                           Rng& rng, int epoch = 0,
                                                           bool* fallback = nullptr) {
  if (c.n_prev() != topo.shape.n_prev || c.n_next() != topo.shape.n_next)
    throw DimensionMismatch("cosine matrix does not match layer shape");
  if (fallback) *fallback = false;
  const auto candidates = detail::non_edges(topo);
  k = std::min(k, candidates.size());
  const std::size_t n_next = topo.shape.n_next;
  std::vector<double> mass(candidates.size());
  for (std::size_t i = 0; i < candidates.size(); ++i)
    mass[i] = c(candidates[i] / n_next, candidates[i] % n_next);

  detail::SumTree tree(mass);
  std::vector<char> taken(candidates.size(), 0);
  std::vector<Connection> picks;
  picks.reserve(k);
  while (picks.size() < k && tree.total() > 0.0) {
    const std::size_t i = tree.sample(uniform01(rng));
    taken[i] = 1;
    tree.zero(i);
    picks.push_back(detail::from_flat(topo, candidates[i], epoch));
  }
  if (picks.size() < k) {
    if (fallback) *fallback = true;
    std::vector<std::size_t> rest;
    for (std::size_t i = 0; i < candidates.size(); ++i)
      if (!taken[i]) rest.push_back(i);
    // Partial Fisher-Yates over what is left.
    for (std::size_t j = 0; picks.size() < k; ++j) {
      const auto r = j + static_cast<std::size_t>(uniform_index(rng, rest.size() - j));
      std::swap(rest[j], rest[r]);
      picks.push_back(detail::from_flat(topo, candidates[rest[j]], epoch));
    }
  }
  return picks;
}

/// Inserts new connections with freshly drawn weights and zero momentum,
/// then restores (source, target) order.
inline void insert_edges(LayerTopology& topo, SparseLayer& params,
                         std::span<const Connection> fresh, Rng& rng) {
  for (const auto& c : fresh) {
    topo.edges.push_back(c);
    params.weights.push_back(draw_weight(topo.shape, rng));
    params.weight_velocity.push_back(0.0);
  }
  std::vector<std::size_t> order(topo.edges.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return position_less(topo.edges[a], topo.edges[b]);
  });
  std::vector<Connection> edges(order.size());
  std::vector<double> w(order.size()), v(order.size());
  for (std::size_t i = 0; i < order.size(); ++i) {
    edges[i] = topo.edges[order[i]];
    w[i] = params.weights[order[i]];
    v[i] = params.weight_velocity[order[i]];
  }
  topo.edges = std::move(edges);
  params.weights = std::move(w);
  params.weight_velocity = std::move(v);
}

inline std::vector<Connection> add_random(LayerTopology& topo, SparseLayer& params, std::size_t k,
                                          Rng& rng, int epoch) {
  auto picks = select_random(topo, k, rng, epoch);
  insert_edges(topo, params, picks, rng);
  return picks;
}

inline std::vector<Connection> add_top_cosine(LayerTopology& topo, SparseLayer& params,
                                              const CosineMatrix& c, std::size_t k, int epoch,
                                              Rng& weight_rng) {
  auto picks = select_top_cosine(topo, c, k, epoch);
  insert_edges(topo, params, picks, weight_rng);
  return picks;
}

inline std::vector<Connection> add_probabilistic_cosine(LayerTopology& topo, SparseLayer& params,
                                                        const CosineMatrix& c, std::size_t k,
                                                        Rng& rng, int epoch,
                                                        bool* fallback = nullptr) {
  auto picks = select_probabilistic_cosine(topo, c, k, rng, epoch, fallback);
  insert_edges(topo, params, picks, rng);
  return picks;
}

/// Rewires every layer of `model` from the epoch's activations, stamps new
/// edges with the epoch that just finished, advances model.epoch and clears
/// the log. Each layer draws from its own stream seeded from `rng`.
inline RewireReport evolve_epoch(Model& model, ActivationLog& log, Rng& rng) {
  if (log.layer_count() != model.layer_count() + 1)
    throw DimensionMismatch("activation log does not match the model's layers");
  const int epoch = model.epoch + 1;
  const std::uint64_t base = rng();
  RewireReport report;
  report.epoch = epoch;

  for (std::size_t k = 0; k < model.layer_count(); ++k) {
    auto& topo = model.topology.layers[k];
    auto& params = model.layers[k];
    Rng layer_rng = derive_rng(base, {k});
    CosineEvaluator evaluator;
    RewireReport::Layer row;
    row.layer = k;
    row.samples = log.columns();

    CosineMatrix full;
    if (model.policy.needs_full_cosine()) full = evaluator.full(log[k], log[k + 1]);

    std::vector<Connection> removed;
    if (model.policy.removal == RemovalRule::magnitude) {
      removed = remove_magnitude(topo, params, model.config.zeta);
    } else {
      std::vector<double> sims;
      if (model.policy.needs_full_cosine()) {
        sims.reserve(topo.edges.size());
        for (const auto& e : topo.edges) sims.push_back(full(e.source, e.target));
      } else {
        sims = evaluator.edges(log[k], log[k + 1], topo.edges);
      }
      removed = remove_cosine_weighted(topo, params, sims, model.config.zeta);
    }

    const std::size_t k_add = removed.size();
    std::vector<Connection> added;
    switch (model.policy.addition) {
      case AdditionRule::random:
        added = add_random(topo, params, k_add, layer_rng, epoch);
        break;
      case AdditionRule::top_cosine:
        added = add_top_cosine(topo, params, full, k_add, epoch, layer_rng);
        break;
      case AdditionRule::probabilistic_cosine:
        added = add_probabilistic_cosine(topo, params, full, k_add, layer_rng, epoch, &row.fallback);
        break;
    }
    row.removed = removed.size();
    row.added = added.size();
    row.dot_products = evaluator.dot_products();
    report.layers.push_back(row);
  }
  model.epoch = epoch;
  log.clear();
  return report;
}

}  // namespace sparse_evo
