#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "sparse_evo/errors.hpp"
#include "sparse_evo/linalg.hpp"

namespace sparse_evo {

enum class Normalization { zscore, minmax, none };

inline std::string to_string(Normalization n) {
  switch (n) {
    case Normalization::zscore: return "zscore";
    case Normalization::minmax: return "minmax";
    case Normalization::none: return "none";
  }
  return "none";
}

inline Normalization normalization_from_string(const std::string& s) {
  if (s == "zscore") return Normalization::zscore;
  if (s == "minmax") return Normalization::minmax;
  if (s == "none") return Normalization::none;
  throw InvalidConfig("unknown normalization '" + s + "' (zscore, minmax or none)");
}

/// Per-feature affine map x -> (x - offset) * scale fitted on a dataset.
/// `neutral` is the transformed column mean: the value that stands in for a
/// feature that has been switched off (0 under zscore).
struct FeatureTransform {
  Normalization scheme = Normalization::none;
  std::vector<double> offset;
  std::vector<double> scale;
  std::vector<double> neutral;

  std::size_t width() const { return offset.size(); }

  /// Fits the scheme on `raw` (samples x features, row-major).
  static FeatureTransform fit(const Matrix& raw, Normalization scheme) {
    const auto n = static_cast<std::size_t>(raw.rows());
    const auto d = static_cast<std::size_t>(raw.cols());
    FeatureTransform t;
    t.scheme = scheme;
    t.offset.assign(d, 0.0);
    t.scale.assign(d, 1.0);
    t.neutral.assign(d, 0.0);
    for (std::size_t j = 0; j < d; ++j) {
      const auto col = raw.col(static_cast<Eigen::Index>(j));
      const double mean = n ? col.mean() : 0.0;
      switch (scheme) {
        case Normalization::zscore: {
          const double var = n ? (col.array() - mean).square().sum() / static_cast<double>(n) : 0.0;
          const double sd = std::sqrt(var);
          t.offset[j] = mean;
          t.scale[j] = sd > 0.0 ? 1.0 / sd : 0.0;
          break;
        }
        case Normalization::minmax: {
          const double lo = n ? col.minCoeff() : 0.0;
          const double hi = n ? col.maxCoeff() : 0.0;
          t.offset[j] = lo;
          t.scale[j] = hi > lo ? 1.0 / (hi - lo) : 0.0;
          break;
        }
        case Normalization::none:
          break;
      }
      t.neutral[j] = (mean - t.offset[j]) * t.scale[j];
    }
    return t;
  }

  static FeatureTransform identity(std::size_t width) {
    FeatureTransform t;
    t.offset.assign(width, 0.0);
    t.scale.assign(width, 1.0);
    t.neutral.assign(width, 0.0);
    return t;
  }

  Matrix apply(const Matrix& raw) const {
    if (static_cast<std::size_t>(raw.cols()) != width())
      throw DimensionMismatch("feature transform expects " + std::to_string(width()) +
                              " columns, got " + std::to_string(raw.cols()));
    Matrix out(raw.rows(), raw.cols());
    for (Eigen::Index i = 0; i < raw.rows(); ++i)
      for (Eigen::Index j = 0; j < raw.cols(); ++j)
        out(i, j) = (raw(i, j) - offset[static_cast<std::size_t>(j)]) *
                    scale[static_cast<std::size_t>(j)];
    return out;
  }
};

}  // namespace sparse_evo
