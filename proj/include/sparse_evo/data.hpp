#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "sparse_evo/errors.hpp"
#include "sparse_evo/linalg.hpp"
#include "sparse_evo/random.hpp"
#include "sparse_evo/transform.hpp"

namespace sparse_evo {

enum class FeatureRole { informative, redundant, noise };

inline std::string to_string(FeatureRole r) {
  switch (r) {
    case FeatureRole::informative: return "informative";
    case FeatureRole::redundant: return "redundant";
    case FeatureRole::noise: return "noise";
  }
  return "noise";
}

inline FeatureRole feature_role_from_string(const std::string& s) {
  if (s == "informative") return FeatureRole::informative;
  if (s == "redundant") return FeatureRole::redundant;
  if (s == "noise") return FeatureRole::noise;
  throw ParseError("unknown feature role '" + s + "'");
}

/// Ground truth of a synthetic dataset. roles[j] describes column j;
/// source_index[j] is the column's position before the shuffle
/// (informative first, then redundant, then noise).
struct FeatureMetadata {
  std::vector<FeatureRole> roles;
  std::vector<std::size_t> source_index;

  std::size_t count(FeatureRole r) const {
    return static_cast<std::size_t>(std::count(roles.begin(), roles.end(), r));
  }
  bool is_relevant(std::size_t column) const { return roles.at(column) != FeatureRole::noise; }
};

struct Dataset {
  Matrix features;  // samples x features
  std::vector<int> labels;
  std::size_t n_classes = 0;
  std::vector<std::string> feature_names;
  std::optional<FeatureMetadata> metadata;
  FeatureTransform transform;  // what has been applied to `features`

  std::size_t samples() const { return static_cast<std::size_t>(features.rows()); }
  std::size_t width() const { return static_cast<std::size_t>(features.cols()); }

  /// Neuron-major batch (features x samples) of the listed rows.
  Matrix gather(std::span<const std::size_t> rows) const {
    Matrix out(features.cols(), static_cast<Eigen::Index>(rows.size()));
    for (std::size_t b = 0; b < rows.size(); ++b)
      out.col(static_cast<Eigen::Index>(b)) =
          features.row(static_cast<Eigen::Index>(rows[b])).transpose();
    return out;
  }
  Matrix all_columns() const { return features.transpose(); }

  std::vector<int> gather_labels(std::span<const std::size_t> rows) const {
    std::vector<int> out;
    out.reserve(rows.size());
    for (auto r : rows) out.push_back(labels[r]);
    return out;
  }

  Dataset subset(std::span<const std::size_t> rows) const {
    Dataset d;
    d.features.resize(static_cast<Eigen::Index>(rows.size()), features.cols());
    for (std::size_t i = 0; i < rows.size(); ++i)
      d.features.row(static_cast<Eigen::Index>(i)) = features.row(static_cast<Eigen::Index>(rows[i]));
    d.labels = gather_labels(rows);
    d.n_classes = n_classes;
    d.feature_names = feature_names;
    d.metadata = metadata;
    d.transform = transform;
    return d;
  }
};

/// Applies a transform to raw features in place and remembers it.
inline void apply_transform(Dataset& d, const FeatureTransform& t) {
  d.features = t.apply(d.features);
  d.transform = t;
}

/// Fits `scheme` on the dataset itself and applies it.
inline FeatureTransform normalize(Dataset& d, Normalization scheme) {
  auto t = FeatureTransform::fit(d.features, scheme);
  apply_transform(d, t);
  return t;
}

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const auto comma = line.find(',', start);
    out.push_back(trim(line.substr(start, comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

inline std::optional<double> parse_double(std::string_view s) {
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  const auto* end = s.data() + s.size();
  const auto res = std::from_chars(s.data(), end, v);
  if (s.empty() || res.ec != std::errc{} || res.ptr != end || !std::isfinite(v)) return std::nullopt;
  return v;
}

/// Shortest text that reads back to the same double.
inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

}  // namespace detail

/// Reads a header + numeric-rows CSV without normalizing. `label_column`
/// names the column holding non-negative integer class labels.
inline Dataset read_csv(std::istream& in, const std::string& label_column) {
  std::string line;
  std::size_t row = 1;
  if (!std::getline(in, line)) throw ParseError("empty CSV: missing header", 1);
  const auto header = detail::split_fields(line);
  std::size_t label_at = header.size();
  for (std::size_t j = 0; j < header.size(); ++j)
    if (header[j] == label_column) label_at = j;
  if (label_at == header.size()) throw ParseError("label column '" + label_column + "' not found", 1);

  Dataset d;
  for (std::size_t j = 0; j < header.size(); ++j)
    if (j != label_at) d.feature_names.emplace_back(header[j]);
  const std::size_t width = header.size() - 1;

  std::vector<double> cells;
  int max_label = -1;
  while (std::getline(in, line)) {
    ++row;
    if (detail::trim(line).empty()) continue;
    const auto fields = detail::split_fields(line);
    if (fields.size() != header.size())
      throw ParseError("expected " + std::to_string(header.size()) + " fields, got " +
                           std::to_string(fields.size()),
                       row);
    for (std::size_t j = 0; j < fields.size(); ++j) {
      const auto v = detail::parse_double(fields[j]);
      if (!v) throw ParseError("non-numeric cell '" + std::string(fields[j]) + "'", row, j + 1);
      if (j == label_at) {
        if (*v < 0 || *v != std::floor(*v) || *v > 1e9)
          throw ParseError("label must be a non-negative integer", row, j + 1);
        d.labels.push_back(static_cast<int>(*v));
        max_label = std::max(max_label, d.labels.back());
      } else {
        cells.push_back(*v);
      }
    }
  }
  d.features = Eigen::Map<const Matrix>(cells.data(), static_cast<Eigen::Index>(d.labels.size()),
                                        static_cast<Eigen::Index>(width));
  d.n_classes = static_cast<std::size_t>(max_label + 1);
  d.transform = FeatureTransform::identity(width);
  return d;
}

inline Dataset read_csv(const std::string& path, const std::string& label_column) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open '" + path + "'");
  return read_csv(in, label_column);
}

/// Reads a CSV and normalizes it with statistics of the loaded data.
inline Dataset load_csv(const std::string& path, const std::string& label_column,
                        Normalization scheme = Normalization::zscore) {
  Dataset d = read_csv(path, label_column);
  normalize(d, scheme);
  return d;
}

inline void write_csv(std::ostream& out, const Dataset& d, const std::string& label_column = "label") {
  for (std::size_t j = 0; j < d.width(); ++j)
    out << (j < d.feature_names.size() ? d.feature_names[j] : "f" + std::to_string(j)) << ',';
  out << label_column << '\n';
  for (std::size_t i = 0; i < d.samples(); ++i) {
    for (std::size_t j = 0; j < d.width(); ++j)
      out << detail::format_double(d.features(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)))
          << ',';
    out << d.labels[i] << '\n';
  }
}

inline void write_csv(const std::string& path, const Dataset& d, const std::string& label_column = "label") {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path + "'");
  write_csv(out, d, label_column);
  if (!out) throw Error("failed writing '" + path + "'");
}

/// Number of test rows for a fraction: round(n * fraction).
inline std::size_t test_count(std::size_t n, double fraction) {
  return static_cast<std::size_t>(std::llround(static_cast<double>(n) * fraction));
}

/// Uniform random train/test partition; each side keeps original row order.
inline std::pair<Dataset, Dataset> split(const Dataset& d, double test_fraction, std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0))
    throw InvalidConfig("test fraction must lie in (0, 1)");
  const std::size_t n = d.samples();
  const std::size_t n_test = test_count(n, test_fraction);
  if (n_test == 0 || n_test >= n)
    throw InvalidConfig("test fraction " + std::to_string(test_fraction) + " of " +
                        std::to_string(n) + " samples leaves a split empty");
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  Rng rng = derive_rng(seed, {0x73706c6974 /* "split" */});
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<std::size_t> test(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_test));
  std::vector<std::size_t> train(perm.begin() + static_cast<std::ptrdiff_t>(n_test), perm.end());
  std::sort(test.begin(), test.end());
  std::sort(train.begin(), train.end());
  return {d.subset(train), d.subset(test)};
}

/// Shape of the synthetic Madelon-style problem. The informative block is a
/// set of Gaussian clusters centred on distinct vertices of a hypercube with
/// side 2 * class_sep, half of them assigned to each class.
struct MadelonOptions {
  std::size_t informative = 5;
  std::size_t redundant = 15;
  std::size_t noise = 480;
  std::size_t clusters_per_class = 8;
  double class_sep = 1.5;
  double cluster_stddev = 1.0;
  double redundant_jitter = 0.01;  // relative to each redundant column's spread
  // Vertex labellings are redrawn until the two classes' mean vertices lie at
  // least this far apart (in units of class_sep), so some linear signal remains.
  double min_mean_gap = 1.0;
};

/// Two-class dataset with informative, redundant (random linear mixtures of
/// the informative features) and pure noise columns, shuffled into a random
/// column order. Features are returned raw; roles are in `metadata`.
inline Dataset gen_madelon_like(std::size_t n_samples, std::uint64_t seed,
                                const MadelonOptions& opt = {}) {
  if (n_samples < 100) throw InvalidConfig("madelon-like generator needs at least 100 samples");
  const std::size_t n_inf = opt.informative;
  const std::size_t n_clusters = 2 * opt.clusters_per_class;
  if (n_inf == 0 || n_inf >= 63 || n_clusters > (std::size_t{1} << n_inf))
    throw InvalidConfig("not enough hypercube vertices for the requested clusters");
  const std::size_t width = n_inf + opt.redundant + opt.noise;
  Rng rng = derive_rng(seed, {0x6d6164656c6f6e /* "madelon" */});
  std::normal_distribution<double> gauss(0.0, 1.0);

  // Distinct vertices; cluster c belongs to class c % 2.
  std::vector<std::uint64_t> vertices;
  auto mean_gap = [&] {
    double sq = 0.0;
    for (std::size_t f = 0; f < n_inf; ++f) {
      double diff = 0.0;
      for (std::size_t c = 0; c < n_clusters; ++c)
        diff += (((vertices[c] >> f) & 1u) ? 1.0 : -1.0) * (c % 2 ? 1.0 : -1.0);
      diff /= static_cast<double>(opt.clusters_per_class);
      sq += diff * diff;
    }
    return std::sqrt(sq);
  };
  for (int attempt = 0;; ++attempt) {
    if (attempt == 1000) throw InvalidConfig("no vertex labelling reaches min_mean_gap");
    vertices.clear();
    while (vertices.size() < n_clusters) {
      const std::uint64_t v = uniform_index(rng, std::uint64_t{1} << n_inf);
      if (std::find(vertices.begin(), vertices.end(), v) == vertices.end()) vertices.push_back(v);
    }
    if (mean_gap() >= opt.min_mean_gap) break;
  }

  Matrix raw(static_cast<Eigen::Index>(n_samples), static_cast<Eigen::Index>(width));
  std::vector<int> labels(n_samples);
  for (std::size_t i = 0; i < n_samples; ++i) {
    const int y = static_cast<int>(i % 2);
    const std::size_t cluster =
        2 * static_cast<std::size_t>(uniform_index(rng, opt.clusters_per_class)) +
        static_cast<std::size_t>(y);
    labels[i] = y;
    for (std::size_t f = 0; f < n_inf; ++f) {
      const double centre = ((vertices[cluster] >> f) & 1u) ? opt.class_sep : -opt.class_sep;
      raw(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(f)) =
          centre + opt.cluster_stddev * gauss(rng);
    }
  }

  std::uniform_real_distribution<double> coef(-1.0, 1.0);
  for (std::size_t r = 0; r < opt.redundant; ++r) {
    Vector mix(static_cast<Eigen::Index>(n_inf));
    for (auto& m : mix) m = coef(rng);
    const Vector combo = raw.leftCols(static_cast<Eigen::Index>(n_inf)) * mix;
    const double mean = combo.mean();
    const double sd = std::sqrt((combo.array() - mean).square().mean());
    const auto col = static_cast<Eigen::Index>(n_inf + r);
    for (std::size_t i = 0; i < n_samples; ++i)
      raw(static_cast<Eigen::Index>(i), col) =
          combo(static_cast<Eigen::Index>(i)) + opt.redundant_jitter * sd * gauss(rng);
  }
  for (std::size_t c = n_inf + opt.redundant; c < width; ++c)
    for (std::size_t i = 0; i < n_samples; ++i)
      raw(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = gauss(rng);

  // Shuffle rows and columns.
  std::vector<std::size_t> row_perm(n_samples), col_perm(width);
  std::iota(row_perm.begin(), row_perm.end(), std::size_t{0});
  std::iota(col_perm.begin(), col_perm.end(), std::size_t{0});
  std::shuffle(row_perm.begin(), row_perm.end(), rng);
  std::shuffle(col_perm.begin(), col_perm.end(), rng);

  Dataset d;
  d.features.resize(raw.rows(), raw.cols());
  d.labels.resize(n_samples);
  for (std::size_t i = 0; i < n_samples; ++i) {
    for (std::size_t j = 0; j < width; ++j)
      d.features(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          raw(static_cast<Eigen::Index>(row_perm[i]), static_cast<Eigen::Index>(col_perm[j]));
    d.labels[i] = labels[row_perm[i]];
  }
  d.n_classes = 2;
  FeatureMetadata meta;
  for (std::size_t j = 0; j < width; ++j) {
    const std::size_t src = col_perm[j];
    meta.source_index.push_back(src);
    meta.roles.push_back(src < n_inf                    ? FeatureRole::informative
                         : src < n_inf + opt.redundant ? FeatureRole::redundant
                                                       : FeatureRole::noise);
    d.feature_names.push_back("f" + std::to_string(j));
  }
  d.metadata = std::move(meta);
  d.transform = FeatureTransform::identity(width);
  return d;
}

}  // namespace sparse_evo
