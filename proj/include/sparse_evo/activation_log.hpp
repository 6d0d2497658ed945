#pragma once

// Per-epoch activation recording and the cosine-similarity structures the
// rewiring policies are built on.
//
// For neurons p (layer k-1) and q (layer k) with recorded activation vectors
// a_p and a_q over the same s samples, the connection similarity is
//
//     C_pq = |a_p . a_q| / (||a_p|| ||a_q||)
//
// and is defined as 0 when either vector has zero norm.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sparse_evo/errors.hpp"
#include "sparse_evo/linalg.hpp"
#include "sparse_evo/parallel.hpp"
#include "sparse_evo/topology.hpp"

namespace sparse_evo {

/// Recorded activations of one neuron layer: row = neuron, column = sample.
class ActivationRecord {
 public:
  ActivationRecord() = default;
  ActivationRecord(std::size_t layer_index, std::size_t neurons,
                   std::size_t reserve_columns = 0)
      : layer_index_(layer_index), storage_(neurons, reserve_columns) {}

  std::size_t layer_index() const { return layer_index_; }
  std::size_t neurons() const { return static_cast<std::size_t>(storage_.rows()); }
  std::size_t columns() const { return columns_; }

  auto values() const { return storage_.leftCols(static_cast<Eigen::Index>(columns_)); }
  auto row(std::size_t neuron) const {
    return storage_.row(static_cast<Eigen::Index>(neuron))
        .head(static_cast<Eigen::Index>(columns_));
  }

  /// Appends the first `take` columns of `batch` (rows must match neurons).
  void append(const Matrix& batch, std::size_t take) {
    if (static_cast<std::size_t>(batch.rows()) != neurons())
      throw DimensionMismatch("activation record for layer " +
                              std::to_string(layer_index_) + " expects " +
                              std::to_string(neurons()) + " rows, got " +
                              std::to_string(batch.rows()));
    take = std::min<std::size_t>(take, static_cast<std::size_t>(batch.cols()));
    if (take == 0) return;
    const auto needed = static_cast<Eigen::Index>(columns_ + take);
    if (needed > storage_.cols()) {
      const Eigen::Index grown = std::max<Eigen::Index>(needed, 2 * storage_.cols());
      storage_.conservativeResize(Eigen::NoChange, grown);
    }
    storage_.middleCols(static_cast<Eigen::Index>(columns_),
                        static_cast<Eigen::Index>(take)) =
        batch.leftCols(static_cast<Eigen::Index>(take));
    columns_ += take;
  }

  void clear() { columns_ = 0; }

 private:
  std::size_t layer_index_ = 0;
  Matrix storage_;
  std::size_t columns_ = 0;
};

/// The activation records of every neuron layer (input, hidden..., output)
/// for the current epoch. All records always hold the same column count.
class ActivationLog {
 public:
  ActivationLog() = default;
  ActivationLog(std::span<const std::size_t> widths,
                std::optional<std::size_t> sample_cap = std::nullopt,
                std::size_t expected_samples = 0)
      : cap_(sample_cap) {
    const std::size_t reserve =
        cap_ ? std::min(*cap_, expected_samples) : expected_samples;
    for (std::size_t k = 0; k < widths.size(); ++k)
      records_.emplace_back(k, widths[k], reserve);
  }

  std::size_t layer_count() const { return records_.size(); }
  std::size_t columns() const { return records_.empty() ? 0 : records_.front().columns(); }
  std::optional<std::size_t> sample_cap() const { return cap_; }
  const ActivationRecord& operator[](std::size_t k) const { return records_.at(k); }

  /// Appends one column per sample of the batch, in order, to every layer.
  /// Once the cap is reached the rest of the epoch is ignored.
  void record_batch(std::span<const Matrix> layer_activations) {
    if (layer_activations.size() != records_.size())
      throw DimensionMismatch("expected activations for " +
                              std::to_string(records_.size()) + " layers, got " +
                              std::to_string(layer_activations.size()));
    const auto batch = static_cast<std::size_t>(layer_activations.front().cols());
    for (const auto& a : layer_activations)
      if (static_cast<std::size_t>(a.cols()) != batch)
        throw DimensionMismatch("layers disagree on batch size");
    std::size_t take = batch;
    if (cap_) take = std::min(take, *cap_ - std::min(*cap_, columns()));
    // Validate every layer before touching any so the log stays consistent.
    for (std::size_t k = 0; k < records_.size(); ++k)
      if (static_cast<std::size_t>(layer_activations[k].rows()) != records_[k].neurons())
        throw DimensionMismatch("activation record for layer " + std::to_string(k) +
                                " expects " + std::to_string(records_[k].neurons()) +
                                " rows, got " +
                                std::to_string(layer_activations[k].rows()));
    for (std::size_t k = 0; k < records_.size(); ++k)
      records_[k].append(layer_activations[k], take);
  }

  void clear() {
    for (auto& r : records_) r.clear();
  }

 private:
  std::vector<ActivationRecord> records_;
  std::optional<std::size_t> cap_;
};

/// Absolute cosine similarities between every (p, q) pair of a bipartite
/// layer, p in the previous layer, q in the next. Entries lie in [0, 1].
struct CosineMatrix {
  Eigen::MatrixXd values;  // n_prev x n_next

  std::size_t n_prev() const { return static_cast<std::size_t>(values.rows()); }
  std::size_t n_next() const { return static_cast<std::size_t>(values.cols()); }
  double operator()(std::size_t p, std::size_t q) const {
    return values(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(q));
  }
};

/// Computes cosine structures and counts vector dot products. Each
/// similarity costs three dot products of length s (a.b, a.a, b.b), whether
/// it is evaluated alone or as part of a full matrix.
class CosineEvaluator {
 public:
  std::uint64_t dot_products() const { return dot_products_; }
  void reset_counter() { dot_products_ = 0; }

  CosineMatrix full(const ActivationRecord& prev, const ActivationRecord& next) {
    check_columns(prev, next);
    const auto n_prev = static_cast<Eigen::Index>(prev.neurons());
    const auto n_next = static_cast<Eigen::Index>(next.neurons());
    const Eigen::VectorXd prev_norm = prev.values().rowwise().norm();
    const Eigen::VectorXd next_norm = next.values().rowwise().norm();

    CosineMatrix c{Eigen::MatrixXd::Zero(n_prev, n_next)};
    if (prev.columns() > 0) {
      // Fixed row blocks keep every entry's summation identical no matter
      // how many threads share the work.
      constexpr Eigen::Index kBlock = 64;
      const Eigen::Index blocks = (n_prev + kBlock - 1) / kBlock;
      const auto a_prev = prev.values();
      const auto a_next = next.values();
      parallel_for(static_cast<std::size_t>(blocks), [&](std::size_t b) {
        const Eigen::Index r0 = static_cast<Eigen::Index>(b) * kBlock;
        const Eigen::Index rows = std::min(kBlock, n_prev - r0);
        Eigen::MatrixXd dots(rows, n_next);
        dots.noalias() = a_prev.middleRows(r0, rows) * a_next.transpose();
        for (Eigen::Index i = 0; i < rows; ++i) {
          const double np = prev_norm(r0 + i);
          for (Eigen::Index j = 0; j < n_next; ++j)
            c.values(r0 + i, j) = similarity(dots(i, j), np, next_norm(j));
        }
      });
    }
    dot_products_ += 3ull * static_cast<std::uint64_t>(n_prev) *
                     static_cast<std::uint64_t>(n_next);
    return c;
  }

  /// Similarity of each listed connection only, in edge order.
  std::vector<double> edges(const ActivationRecord& prev, const ActivationRecord& next,
                            std::span<const Connection> edges) {
    check_columns(prev, next);
    for (const auto& e : edges)
      if (e.source >= prev.neurons() || e.target >= next.neurons())
        throw DimensionMismatch("edge (" + std::to_string(e.source) + ", " +
                                std::to_string(e.target) + ") outside layer bounds");
    std::vector<double> out(edges.size());
    for (std::size_t i = 0; i < edges.size(); ++i) {
      const auto a = prev.row(edges[i].source);
      const auto b = next.row(edges[i].target);
      const double ab = a.dot(b);
      const double aa = a.dot(a);
      const double bb = b.dot(b);
      out[i] = similarity(ab, std::sqrt(aa), std::sqrt(bb));
    }
    dot_products_ += 3ull * edges.size();
    return out;
  }

 private:
  static void check_columns(const ActivationRecord& prev, const ActivationRecord& next) {
    if (prev.columns() != next.columns())
      throw DimensionMismatch("activation records hold " +
                              std::to_string(prev.columns()) + " and " +
                              std::to_string(next.columns()) + " samples");
  }

  static double similarity(double dot, double norm_a, double norm_b) {
    if (norm_a == 0.0 || norm_b == 0.0) return 0.0;
    return std::min(1.0, std::abs(dot) / (norm_a * norm_b));
  }

  std::uint64_t dot_products_ = 0;
};

inline CosineMatrix cosine_full(const ActivationRecord& prev, const ActivationRecord& next) {
  CosineEvaluator ev;
  return ev.full(prev, next);
}

inline std::vector<double> cosine_edges(const ActivationRecord& prev,
                                        const ActivationRecord& next,
                                        std::span<const Connection> edges) {
  CosineEvaluator ev;
  return ev.edges(prev, next, edges);
}

/// Normalizes a similarity matrix into a probability distribution over
/// connections: P_pq = C_pq / sum(C).
inline Eigen::MatrixXd addition_distribution(const CosineMatrix& c) {
  const double total = c.values.sum();
  if (!(total > 0.0))
    throw DegenerateSimilarity("cosine matrix has no positive entry");
  return c.values / total;
}

}  // namespace sparse_evo
