#include <gtest/gtest.h>

#include <numeric>

#include "sparse_evo/analysis.hpp"
#include "sparse_evo/trainer.hpp"
#include "test_util.hpp"

using namespace sparse_evo;

namespace {

struct Trained {
  Model model;
  Dataset train, test;
};

/// Small madelon-like run, cached across tests.
const Trained& trained() {
  static const Trained t = [] {
    MadelonOptions opt;
    opt.noise = 60;
    Dataset all = gen_madelon_like(600, 4, opt);
    auto [train, test] = split(all, 0.25, 4);
    const auto tf = normalize(train, Normalization::zscore);
    apply_transform(test, tf);
    TrainConfig c;
    c.hidden_dims = {40, 40};
    c.epsilon = 5;
    c.eta = 0.05;
    c.batch_size = 25;
    c.seed = 3;
    Model m = make_model(train.width(), 2, c, EvolutionPolicy::codacorset());
    m.input_transform = tf;
    Trainer trainer(m, train, test);
    for (int e = 0; e < 6; ++e) trainer.run_epoch();
    return Trained{m, train, test};
  }();
  return t;
}

}  // namespace

TEST(InputDegrees, UntrainedModelMatchesRowSums) {
  std::mt19937_64 gen(2);
  const Model m = fixture::random_model(gen, 10, 30);
  const auto p = input_degrees(m, false);
  ASSERT_EQ(p.degrees.size(), m.input_width());
  for (std::size_t i = 0; i < p.degrees.size(); ++i) {
    std::size_t row = 0;
    for (const auto& e : m.topology.layers[0].edges) row += e.source == i;
    EXPECT_EQ(p.degrees[i], row);
  }
  EXPECT_EQ(p.total(), m.topology.layers[0].edge_count());
  EXPECT_FALSE(p.exclusion_epoch);
  // Nothing has been added yet, so the flag changes nothing.
  EXPECT_EQ(input_degrees(m, true).degrees, p.degrees);
}

TEST(InputDegrees, ExclusionSkipsFinalEpochAdditions) {
  const Model& m = trained().model;
  const auto all = input_degrees(m, false);
  const auto kept = input_degrees(m, true);
  std::size_t older = 0;
  for (const auto& e : m.topology.layers[0].edges) older += e.birth_epoch < m.epoch;
  EXPECT_EQ(kept.total(), older);
  EXPECT_EQ(all.total(), m.topology.layers[0].edge_count());
  EXPECT_EQ(kept.total() + kept.excluded_edges, all.total());
  EXPECT_GT(kept.excluded_edges, 0u);
  EXPECT_EQ(kept.exclusion_epoch, m.epoch);
}

TEST(InputDegrees, OrderBreaksTiesByIndex) {
  DegreeProfile p{{3, 1, 3, 0, 1}, std::nullopt, 0};
  EXPECT_EQ(p.order(true), (std::vector<std::size_t>{3, 1, 4, 0, 2}));
  EXPECT_EQ(p.order(false), (std::vector<std::size_t>{0, 2, 1, 4, 3}));
  EXPECT_EQ(p.top(2), (std::vector<std::size_t>{0, 2}));
}

TEST(DegreeHistogram, Properties) {
  DegreeProfile equal{{4, 4, 4, 4}, std::nullopt, 0};
  const auto h = degree_histogram(equal, 5);
  EXPECT_EQ(std::count_if(h.counts.begin(), h.counts.end(), [](auto c) { return c > 0; }), 1);
  EXPECT_EQ(h.counts.back(), 4u);

  const auto p = input_degrees(trained().model, true);
  for (std::size_t bins : {1, 3, 10}) {
    const auto hh = degree_histogram(p, bins);
    EXPECT_EQ(std::accumulate(hh.counts.begin(), hh.counts.end(), std::size_t{0}), p.degrees.size());
    ASSERT_EQ(hh.edges.size(), bins + 1);
    const double max_degree = static_cast<double>(*std::max_element(p.degrees.begin(), p.degrees.end()));
    EXPECT_DOUBLE_EQ(hh.edges[1] - hh.edges[0], max_degree / static_cast<double>(bins));
    EXPECT_DOUBLE_EQ(hh.edges.back(), max_degree);
  }
  EXPECT_THROW(degree_histogram(p, 0), InvalidConfig);

  DegreeProfile zero{{0, 0}, std::nullopt, 0};
  EXPECT_EQ(degree_histogram(zero, 3).counts, (std::vector<std::size_t>{2, 0, 0}));
}

TEST(AblationCurve, EndpointsAndGrid) {
  const auto& t = trained();
  const double baseline = evaluate_accuracy(t.model, t.test);
  for (auto order : {AblationOrder::ascending, AblationOrder::descending}) {
    const auto c = ablation_curve(t.model, t.test, order, 20);
    EXPECT_EQ(c.order, order);
    ASSERT_EQ(c.points.front().removed, 0u);
    EXPECT_EQ(c.points.front().accuracy, baseline);
    EXPECT_EQ(c.points.back().removed, t.test.width());
    for (std::size_t i = 1; i < c.points.size(); ++i) EXPECT_GT(c.points[i].removed, c.points[i - 1].removed);
    for (const auto& p : c.points) {
      EXPECT_GE(p.accuracy, 0.0);
      EXPECT_LE(p.accuracy, 1.0);
    }
    const double prior_one =
        static_cast<double>(std::count(t.test.labels.begin(), t.test.labels.end(), 1)) /
        static_cast<double>(t.test.samples());
    EXPECT_LE(c.points.back().accuracy, std::max(prior_one, 1 - prior_one) + 0.05);
  }
}

TEST(AblationCurve, WeightsAreUntouched) {
  const auto& t = trained();
  const Model before = t.model;
  ablation_curve(t.model, t.test, AblationOrder::descending, 10);
  EXPECT_EQ(before.layers[0].weights, t.model.layers[0].weights);
}

TEST(AblationCurve, RemovedFeaturesTakeTheNeutralValue) {
  const auto& t = trained();
  Model m = t.model;
  // A non-zero neutral point makes the replacement value observable.
  for (std::size_t j = 0; j < m.input_transform.neutral.size(); ++j)
    m.input_transform.neutral[j] = 0.5 + 0.01 * static_cast<double>(j % 7);
  Dataset blank = t.test;
  for (std::size_t j = 0; j < blank.width(); ++j)
    blank.features.col(static_cast<Eigen::Index>(j)).setConstant(m.input_transform.neutral[j]);
  const auto c = ablation_curve(m, t.test, AblationOrder::ascending, 20);
  EXPECT_EQ(c.points.back().accuracy, evaluate_accuracy(m, blank));
}

TEST(AblationCurve, StepOutOfRange) {
  const auto& t = trained();
  EXPECT_THROW(ablation_curve(t.model, t.test, AblationOrder::ascending, t.test.width()), InvalidConfig);
  EXPECT_THROW(ablation_curve(t.model, t.test, AblationOrder::ascending, 0), InvalidConfig);
  EXPECT_EQ(removal_grid(50, 20), (std::vector<std::size_t>{0, 20, 40, 50}));
}

TEST(SnapshotCurves, SingleCheckpointEqualsAblation) {
  const auto& t = trained();
  const std::vector<Model> one{t.model};
  const auto curves = snapshot_curves(one, t.test, 20);
  ASSERT_EQ(curves.size(), 1u);
  const auto direct = ablation_curve(t.model, t.test, AblationOrder::ascending, 20);
  ASSERT_EQ(curves[0].points.size(), direct.points.size());
  for (std::size_t i = 0; i < direct.points.size(); ++i) {
    EXPECT_EQ(curves[0].points[i].removed, direct.points[i].removed);
    EXPECT_EQ(curves[0].points[i].accuracy, direct.points[i].accuracy);
  }
}

TEST(SnapshotCurves, WidthMismatchThrows) {
  const std::vector<Model> models{fixture::dense_model({5, 3, 2}), fixture::dense_model({6, 3, 2})};
  const auto& t = trained();
  EXPECT_THROW(snapshot_curves(models, t.test, 2), DimensionMismatch);
}
