#pragma once

// Input-layer connectivity analytics: how many first-layer connections each
// input neuron keeps, and how test accuracy responds when inputs are
// switched off in order of that degree.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sparse_evo/data.hpp"
#include "sparse_evo/errors.hpp"
#include "sparse_evo/model.hpp"

namespace sparse_evo {

struct DegreeProfile {
  std::vector<std::size_t> degrees;     // one per input neuron
  std::optional<int> exclusion_epoch;   // additions of this epoch were skipped
  std::size_t excluded_edges = 0;

  std::size_t total() const { return std::accumulate(degrees.begin(), degrees.end(), std::size_t{0}); }

  /// Input indices ordered by degree, ties by index ascending.
  std::vector<std::size_t> order(bool ascending) const {
    std::vector<std::size_t> idx(degrees.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
      return ascending ? degrees[a] < degrees[b] : degrees[a] > degrees[b];
    });
    return idx;
  }

  std::vector<std::size_t> top(std::size_t n) const {
    auto idx = order(false);
    idx.resize(std::min(n, idx.size()));
    return idx;
  }
};

/// First-layer degree of every input neuron. With the flag set, edges born in
/// the model's final epoch are skipped: they have not been trained yet. An
/// untrained model (epoch 0) has no such additions.
inline DegreeProfile input_degrees(const Model& model, bool exclude_final_epoch) {
  const auto& first = model.topology.layers.front();
  DegreeProfile p;
  p.degrees.assign(first.shape.n_prev, 0);
  const bool skip = exclude_final_epoch && model.epoch > 0;
  if (skip) p.exclusion_epoch = model.epoch;
  for (const auto& e : first.edges) {
    if (skip && e.birth_epoch == model.epoch) {
      ++p.excluded_edges;
      continue;
    }
    ++p.degrees[e.source];
  }
  return p;
}

struct DegreeHistogram {
  std::vector<double> edges;  // n_bins + 1 boundaries
  std::vector<std::size_t> counts;
};

/// Equal-width bins over [0, max degree]; the top edge is inclusive.
inline DegreeHistogram degree_histogram(const DegreeProfile& profile, std::size_t n_bins) {
  if (n_bins < 1) throw InvalidConfig("histogram needs at least one bin");
  const std::size_t max_degree =
      profile.degrees.empty() ? 0 : *std::max_element(profile.degrees.begin(), profile.degrees.end());
  const double width = static_cast<double>(max_degree) / static_cast<double>(n_bins);
  DegreeHistogram h;
  h.counts.assign(n_bins, 0);
  for (std::size_t b = 0; b <= n_bins; ++b) h.edges.push_back(width * static_cast<double>(b));
  for (auto d : profile.degrees) {
    std::size_t bin = 0;
    if (width > 0.0) bin = std::min(n_bins - 1, static_cast<std::size_t>(static_cast<double>(d) / width));
    ++h.counts[bin];
  }
  return h;
}

enum class AblationOrder { ascending, descending };

inline std::string to_string(AblationOrder o) {
  return o == AblationOrder::ascending ? "ascending" : "descending";
}

struct AblationPoint {
  std::size_t removed = 0;
  double accuracy = 0.0;
};

struct AblationCurve {
  AblationOrder order = AblationOrder::ascending;
  std::vector<AblationPoint> points;

  std::optional<double> at(std::size_t removed) const {
    for (const auto& p : points)
      if (p.removed == removed) return p.accuracy;
    return std::nullopt;
  }
};

/// Eval-mode accuracy on a whole dataset (already in the model's input space).
inline double evaluate_accuracy(const Model& model, const Dataset& data) {
  if (data.width() != model.input_width())
    throw DimensionMismatch("dataset has " + std::to_string(data.width()) +
                            " features, model expects " + std::to_string(model.input_width()));
  if (data.samples() == 0) return 0.0;
  const Matrix probs = predict_proba(model, data.all_columns());
  return static_cast<double>(count_correct(probs, data.labels)) / static_cast<double>(data.samples());
}

/// Removal grid 0, step, 2*step, ... plus the full width at the end.
inline std::vector<std::size_t> removal_grid(std::size_t n_features, std::size_t step) {
  if (step == 0 || step >= n_features)
    throw InvalidConfig("ablation step must lie in [1, " + std::to_string(n_features) + ")");
  std::vector<std::size_t> grid;
  for (std::size_t r = 0; r < n_features; r += step) grid.push_back(r);
  grid.push_back(n_features);
  return grid;
}

/// Zeroes inputs in degree order and re-evaluates accuracy at every grid
/// point. A removed feature takes its neutral value; weights are untouched.
inline AblationCurve ablation_curve(const Model& model, const DegreeProfile& profile,
                                    const Dataset& data, AblationOrder order, std::size_t step = 20) {
  if (data.width() != model.input_width() || profile.degrees.size() != model.input_width())
    throw DimensionMismatch("dataset, degree profile and model widths differ");
  const auto grid = removal_grid(data.width(), step);
  const auto ranked = profile.order(order == AblationOrder::ascending);
  const auto& neutral = model.input_transform.neutral;

  AblationCurve curve;
  curve.order = order;
  Dataset work = data;
  std::size_t done = 0;
  for (auto target : grid) {
    for (; done < target; ++done) {
      const auto col = static_cast<Eigen::Index>(ranked[done]);
      const double v = ranked[done] < neutral.size() ? neutral[ranked[done]] : 0.0;
      work.features.col(col).setConstant(v);
    }
    curve.points.push_back({target, evaluate_accuracy(model, work)});
  }
  return curve;
}

inline AblationCurve ablation_curve(const Model& model, const Dataset& data, AblationOrder order,
                                    std::size_t step = 20) {
  return ablation_curve(model, input_degrees(model, true), data, order, step);
}

/// Ascending-order curves for checkpoints of one run, all on the same grid.
inline std::vector<AblationCurve> snapshot_curves(std::span<const Model> checkpoints,
                                                  const Dataset& data, std::size_t step = 20) {
  std::vector<AblationCurve> curves;
  for (const auto& m : checkpoints)
    if (m.input_width() != checkpoints.front().input_width())
      throw DimensionMismatch("checkpoints disagree on input width");
  for (const auto& m : checkpoints) curves.push_back(ablation_curve(m, data, AblationOrder::ascending, step));
  return curves;
}

}  // namespace sparse_evo
