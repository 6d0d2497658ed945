#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "sparse_evo/errors.hpp"
#include "sparse_evo/random.hpp"

namespace sparse_evo {

using NeuronIndex = std::uint32_t;

struct LayerShape {
  std::size_t n_prev = 0;
  std::size_t n_next = 0;

  std::size_t dense_size() const { return n_prev * n_next; }
  bool operator==(const LayerShape&) const = default;
};

/// One active connection of a bipartite layer.
struct Connection {
  NeuronIndex source = 0;
  NeuronIndex target = 0;
  int birth_epoch = 0;

  bool same_position(const Connection& o) const {
    return source == o.source && target == o.target;
  }
  bool operator==(const Connection&) const = default;
};

/// Lexicographic (source, target) order, used for ties everywhere.
inline bool position_less(const Connection& a, const Connection& b) {
  return a.source != b.source ? a.source < b.source : a.target < b.target;
}

/// Support set of one bipartite layer.
struct LayerTopology {
  LayerShape shape;
  std::vector<Connection> edges;

  std::size_t edge_count() const { return edges.size(); }
  std::size_t flat_index(const Connection& c) const {
    return static_cast<std::size_t>(c.source) * shape.n_next + c.target;
  }

  /// Occupancy bitmap indexed by source * n_next + target.
  std::vector<char> occupancy() const {
    std::vector<char> occ(shape.dense_size(), 0);
    for (const auto& e : edges) occ[flat_index(e)] = 1;
    return occ;
  }
};

struct Topology {
  std::vector<LayerTopology> layers;

  std::size_t layer_count() const { return layers.size(); }
  std::size_t edge_count() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += l.edge_count();
    return n;
  }
};

/// Widths of consecutive layers, e.g. {500, 1000, 1000, 1000, 2}, as shapes.
inline std::vector<LayerShape> chain_shapes(std::span<const std::size_t> widths) {
  if (widths.size() < 2)
    throw InvalidArchitecture("need at least an input and an output layer");
  std::vector<LayerShape> shapes;
  for (std::size_t i = 0; i + 1 < widths.size(); ++i)
    shapes.push_back({widths[i], widths[i + 1]});
  return shapes;
}

/// Per-connection inclusion probability of the sparse Erdos-Renyi start,
/// epsilon * (n_prev + n_next) / (n_prev * n_next), clamped to 1.
inline double edge_probability(const LayerShape& shape, double epsilon) {
  const double n_prev = static_cast<double>(shape.n_prev);
  const double n_next = static_cast<double>(shape.n_next);
  return std::min(1.0, epsilon * (n_prev + n_next) / (n_prev * n_next));
}

/// Throws if the edges of `layer` break the shape bounds or repeat a pair.
inline void validate_layer(const LayerTopology& layer) {
  std::vector<char> seen(layer.shape.dense_size(), 0);
  for (const auto& e : layer.edges) {
    if (e.source >= layer.shape.n_prev || e.target >= layer.shape.n_next)
      throw DimensionMismatch("edge (" + std::to_string(e.source) + ", " +
                              std::to_string(e.target) +
                              ") outside layer bounds");
    auto& s = seen[layer.flat_index(e)];
    if (s)
      throw InvalidArchitecture("duplicate edge (" + std::to_string(e.source) +
                                ", " + std::to_string(e.target) + ")");
    s = 1;
  }
}

inline void sort_edges(LayerTopology& layer) {
  std::sort(layer.edges.begin(), layer.edges.end(), position_less);
}

/// Sparse random topology: every possible edge of every layer is kept by an
/// independent Bernoulli draw. Edges come out sorted by (source, target) and
/// carry birth epoch 0.
inline Topology init_topology(std::span<const LayerShape> shapes, double epsilon,
                              Rng& rng) {
  if (!(epsilon > 0.0)) throw InvalidConfig("epsilon must be positive");
  Topology topo;
  for (const auto& shape : shapes) {
    if (shape.n_prev == 0 || shape.n_next == 0)
      throw InvalidArchitecture("layer width of 0");
    const double p = edge_probability(shape, epsilon);
    LayerTopology layer{shape, {}};
    layer.edges.reserve(static_cast<std::size_t>(p * shape.dense_size() * 1.1) + 16);
    for (std::size_t s = 0; s < shape.n_prev; ++s)
      for (std::size_t t = 0; t < shape.n_next; ++t)
        if (uniform01(rng) < p)
          layer.edges.push_back({static_cast<NeuronIndex>(s),
                                 static_cast<NeuronIndex>(t), 0});
    topo.layers.push_back(std::move(layer));
  }
  return topo;
}

}  // namespace sparse_evo
