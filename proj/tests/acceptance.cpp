// Acceptance run: one PASS/FAIL line per criterion, details indented below.
// Usage: acceptance [--quick]   (--quick shortens the madelon-like runs; the
// resulting verdicts for criteria 1-2 are then not meaningful)

#include <chrono>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "oracles.hpp"
#include "sparse_evo/sparse_evo.hpp"
#include "test_util.hpp"

using namespace sparse_evo;
namespace fs = std::filesystem;

namespace {

int failures = 0;

void verdict(int id, const char* name, bool ok, const std::string& summary) {
  std::printf("[%s] criterion %d: %s -- %s\n", ok ? "PASS" : "FAIL", id, name, summary.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t).count();
}

ActivationLog random_log(std::mt19937_64& gen, const Model& m, Eigen::Index samples) {
  ActivationLog log(m.widths());
  std::vector<Matrix> acts;
  for (auto w : m.widths())
    acts.push_back(fixture::random_matrix(gen, static_cast<Eigen::Index>(w), samples).cwiseAbs());
  log.record_batch(acts);
  return log;
}

struct PolicyRuns {
  std::vector<RunResult> set, cod;
};

PolicyRuns criterion_1(int epochs) {
  const auto start = std::chrono::steady_clock::now();
  PolicyRuns runs;
  double gap_sum = 0;
  for (std::uint64_t seed : {1, 2, 3}) {
    RunConfig c = preset_config("madelon");
    c.train.epochs = epochs;
    c.train.seed = seed;
    c.out.clear();
    c.policy = "SET";
    runs.set.push_back(run_training(c));
    c.policy = "CoDACoRSET";
    runs.cod.push_back(run_training(c));
    const double s = runs.set.back().epochs.back().test_accuracy;
    const double d = runs.cod.back().epochs.back().test_accuracy;
    gap_sum += d - s;
    std::printf("    seed %llu: SET %.4f  CoDACoRSET %.4f  gap %+.2f pts\n",
                static_cast<unsigned long long>(seed), s, d, 100 * (d - s));
  }
  const double gap = gap_sum / 3;
  const double secs = seconds_since(start);
  const auto& tr = runs.set.front();
  std::printf("    data: %zu train / %zu test, %zu features; %.0f s for 6 runs\n", tr.train.samples(),
              tr.test.samples(), tr.train.width(), secs);
  verdict(1, "policy gap", gap >= 0.05 && secs <= 900,
          fmt("mean gap %+.2f pts (need >= +5), runtime %.0f s (limit 900)", 100 * gap, secs));
  return runs;
}

void criterion_2(const PolicyRuns& runs) {
  double hits_sum = 0, delta_sum = 0;
  bool crosses = true;
  for (std::size_t i = 0; i < runs.cod.size(); ++i) {
    const auto& r = runs.cod[i];
    const auto profile = input_degrees(r.model, true);
    std::size_t hits = 0;
    for (auto j : profile.top(20)) hits += r.test.metadata->is_relevant(j);
    const auto asc = ablation_curve(r.model, profile, r.test, AblationOrder::ascending, 20);
    const auto desc = ablation_curve(r.model, profile, r.test, AblationOrder::descending, 20);
    const double delta = *asc.at(480) - *asc.at(0);
    crosses = crosses && *desc.at(20) <= *asc.at(20);
    hits_sum += static_cast<double>(hits);
    delta_sum += delta;
    std::printf("    seed %zu: top-20 relevant %zu/20, ablation acc@0 %.4f acc@480 %.4f (%+.2f pts), "
                "descending acc@20 %.4f\n",
                i + 1, hits, *asc.at(0), *asc.at(480), 100 * delta, *desc.at(20));
  }
  const double n = static_cast<double>(runs.cod.size());
  std::printf("    descending <= ascending at 20 removals on every seed: %s\n", crosses ? "yes" : "no");
  verdict(2, "feature recovery", hits_sum / n >= 15 && delta_sum / n >= -0.02,
          fmt("mean top-20 relevant %.2f (need >= 15), mean ablation change at 480 %+.2f pts (need >= -2)",
              hits_sum / n, 100 * delta_sum / n));
}

void criterion_3() {
  std::mt19937_64 gen(303);
  std::size_t cases = 0, passed = 0;
  for (const auto& [name, policy] : EvolutionPolicy::named()) {
    for (int trial = 0; trial < 50; ++trial, ++cases) {
      Model m = fixture::random_model(gen, 2, 30, policy, 1.0 + 4.0 * std::uniform_real_distribution<double>()(gen));
      std::vector<std::size_t> before;
      for (const auto& l : m.topology.layers) before.push_back(l.edge_count());
      auto log = random_log(gen, m, 1 + static_cast<Eigen::Index>(gen() % 12));
      Rng rng(gen());
      evolve_epoch(m, log, rng);
      bool ok = true;
      for (std::size_t k = 0; k < m.layer_count(); ++k) {
        const auto& lt = m.topology.layers[k];
        ok = ok && lt.edge_count() == before[k] && lt.shape.n_prev <= 30 && lt.shape.n_next <= 30;
        std::set<std::pair<NeuronIndex, NeuronIndex>> seen;
        for (const auto& e : lt.edges) ok = ok && seen.insert({e.source, e.target}).second;
      }
      passed += ok;
    }
  }
  verdict(3, "conservation", passed == cases, fmt("%.0f/%.0f evolve_epoch cases conserve edges without duplicates", passed, cases));
}

void criterion_4() {
  std::mt19937_64 gen(404);
  double worst = 0;
  bool in_range = true;
  std::size_t same_selection = 0;
  for (int trial = 0; trial < 100; ++trial) {
    std::uniform_int_distribution<Eigen::Index> dim(1, 25), samples(1, 40);
    const Eigen::Index np = dim(gen), nn = dim(gen), s = samples(gen);
    Matrix prev = fixture::random_matrix(gen, np, s), next = fixture::random_matrix(gen, nn, s);
    if (trial % 5 == 0) prev.row(0).setZero();
    ActivationRecord rp(0, static_cast<std::size_t>(np)), rn(1, static_cast<std::size_t>(nn));
    rp.append(prev, static_cast<std::size_t>(s));
    rn.append(next, static_cast<std::size_t>(s));
    const auto c = cosine_full(rp, rn);
    const auto ref = oracle::naive_cosine(prev, next);
    for (Eigen::Index p = 0; p < np; ++p)
      for (Eigen::Index q = 0; q < nn; ++q) {
        worst = std::max(worst, std::abs(c(static_cast<NeuronIndex>(p), static_cast<NeuronIndex>(q)) -
                                         ref[static_cast<std::size_t>(p)][static_cast<std::size_t>(q)]));
        in_range = in_range && c.values(p, q) >= 0.0 && c.values(p, q) <= 1.0;
      }

    // Rescale one neuron on each side by a positive factor.
    Rng rng(gen());
    const std::vector<LayerShape> shapes{{static_cast<std::size_t>(np), static_cast<std::size_t>(nn)}};
    const auto topo = init_topology(shapes, 1.0, rng).layers[0];
    const std::size_t k = 1 + gen() % static_cast<std::uint64_t>(np * nn);
    auto base = select_top_cosine(topo, c, k, 1);
    std::sort(base.begin(), base.end(), position_less);
    prev.row(gen() % static_cast<std::uint64_t>(np)) *= 0.1 + 10 * std::uniform_real_distribution<double>()(gen);
    next.row(gen() % static_cast<std::uint64_t>(nn)) *= 0.1 + 10 * std::uniform_real_distribution<double>()(gen);
    ActivationRecord sp(0, static_cast<std::size_t>(np)), sn(1, static_cast<std::size_t>(nn));
    sp.append(prev, static_cast<std::size_t>(s));
    sn.append(next, static_cast<std::size_t>(s));
    auto rescaled = select_top_cosine(topo, cosine_full(sp, sn), k, 1);
    std::sort(rescaled.begin(), rescaled.end(), position_less);
    same_selection += rescaled == base;
  }
  char summary[200];
  std::snprintf(summary, sizeof summary,
                "100 instances: max |full - naive| %.2e (<= 1e-12), entries in [0,1]: %s, "
                "identical top-cosine selections after rescaling %zu/100",
                worst, in_range ? "yes" : "no", same_selection);
  verdict(4, "cosine oracle", worst <= 1e-12 && in_range && same_selection == 100, summary);
}

void criterion_5() {
  std::mt19937_64 gen(505);
  double worst = 0;
  std::size_t nets = 0, max_params = 0;
  std::uniform_real_distribution<double> u(0, 1);
  while (nets < 20) {
    std::uniform_int_distribution<std::size_t> width(2, 4), depth(1, 2);
    TrainConfig c;
    c.hidden_dims.clear();
    const std::size_t hidden = depth(gen);
    for (std::size_t i = 0; i < hidden; ++i) c.hidden_dims.push_back(width(gen));
    c.epsilon = 0.5 + 3 * u(gen);
    c.seed = gen();
    c.dropout_rate = 0;
    Model m = make_model(width(gen), 2 + gen() % 2, c, EvolutionPolicy::set());
    for (auto& l : m.layers) {
      for (auto& w : l.weights) w = std::normal_distribution<double>(0, 1)(gen);
      for (auto& b : l.biases) b = 0.2 * std::normal_distribution<double>(0, 1)(gen);
      for (auto& s : l.srelu) s = {-u(gen), 0.5 * u(gen), 0.2 + u(gen), 0.5 + u(gen)};
    }
    Gradients probe = compute_gradients(m, forward(m, Matrix::Zero(static_cast<Eigen::Index>(m.input_width()), 1), Mode::eval),
                                        std::vector<int>{0});
    const std::size_t params = oracle::pair_params(m, probe).size();
    if (params > 50) continue;
    max_params = std::max(max_params, params);
    const Matrix x = fixture::random_matrix(gen, static_cast<Eigen::Index>(m.input_width()), 5, 1.5);
    const auto y = fixture::random_labels(gen, 5, m.output_width());
    const auto g = compute_gradients(m, forward(m, x, Mode::eval), y);
    worst = std::max(worst, oracle::max_gradient_error(m, x, y, g));
    ++nets;
  }
  verdict(5, "gradient check", worst < 1e-4,
          fmt("20 nets (<= %.0f parameters incl. SReLU), max relative error %.2e (< 1e-4)",
              static_cast<double>(max_params), worst));
}

void criterion_6() {
  std::mt19937_64 gen(606);
  TrainConfig c;
  c.hidden_dims.clear();
  c.epsilon = 10;
  c.seed = 6;
  std::uint64_t corset = 0, codaset = 0;
  std::size_t edges = 0;
  for (auto policy : {EvolutionPolicy::corset(), EvolutionPolicy::codaset()}) {
    Model m = make_model(50, 80, c, policy);
    edges = m.topology.layers[0].edge_count();
    auto log = random_log(gen, m, 30);
    Rng rng(1);
    const auto report = evolve_epoch(m, log, rng);
    (policy.name() == "CoRSET" ? corset : codaset) = report.layers[0].dot_products;
  }
  const bool ok = corset == 3 * edges && codaset == 3u * 50u * 80u;
  verdict(6, "complexity accounting", ok,
          fmt("50x80 layer, E=%.0f: CoRSET %.0f dots (3E = %.0f), CoDASET %.0f (3*50*80 = 12000)",
              static_cast<double>(edges), static_cast<double>(corset), 3.0 * static_cast<double>(edges),
              static_cast<double>(codaset)));
}

void criterion_7() {
  CosineMatrix c{Eigen::MatrixXd(3, 3)};
  c.values << 0.9, 0.1, 0.4, 0.0, 0.7, 0.2, 0.5, 0.3, 0.8;
  const LayerTopology empty{{3, 3}, {}};
  constexpr int kDraws = 10000;
  Eigen::MatrixXd hits = Eigen::MatrixXd::Zero(3, 3);
  Rng rng(707);
  for (int i = 0; i < kDraws; ++i) {
    const auto pick = select_probabilistic_cosine(empty, c, 1, rng);
    hits(pick[0].source, pick[0].target) += 1;
  }
  // Expected frequencies straight from the normalized matrix.
  const double total = c.values.sum();
  double worst_z = 0;
  for (int p = 0; p < 3; ++p)
    for (int q = 0; q < 3; ++q) {
      const double prob = c.values(p, q) / total;
      const double se = std::sqrt(kDraws * prob * (1 - prob));
      const double dev = std::abs(hits(p, q) - kDraws * prob);
      worst_z = std::max(worst_z, se > 0 ? dev / se : (dev > 0 ? 1e9 : 0.0));
    }
  verdict(7, "probabilistic addition", worst_z <= 5, fmt("10000 draws, worst cell deviation %.2f standard errors (<= 5)", worst_z));
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void criterion_8(const PolicyRuns& runs) {
  const fs::path root = fs::temp_directory_path() / "sparse_evo_acceptance";
  fs::remove_all(root);
  RunConfig c = preset_config("madelon");
  c.policy = "CoPACoRSET";
  c.train.epochs = 3;
  c.train.hidden_dims = {200, 200};
  c.train.seed = 8;
  c.out = (root / "a").string();
  run_training(c);
  c.out = (root / "b").string();
  run_training(c);
  const std::string a = slurp(root / "a" / "metrics.csv"), b = slurp(root / "b" / "metrics.csv");
  const bool same_metrics = !a.empty() && a == b;

  bool same_accuracy = true;
  for (const auto& r : runs.cod) {
    const fs::path path = root / "model.json";
    save_model(path.string(), r.model);
    const Model back = load_model(path.string());
    same_accuracy = same_accuracy && evaluate_accuracy(back, r.test) == evaluate_accuracy(r.model, r.test);
  }
  // The run directory alone reproduces the logged test accuracy.
  const Model saved = load_model((root / "a" / "model.json").string());
  Dataset test = read_csv((root / "a" / "test.csv").string(), "label");
  apply_transform(test, saved.input_transform);
  std::string last;
  std::istringstream rows(a);
  for (std::string line; std::getline(rows, line);) last = line;
  std::istringstream cells(last);
  std::string cell;
  for (int i = 0; i < 4; ++i) std::getline(cells, cell, ',');  // test_accuracy
  const double logged = std::stod(cell);
  const bool from_disk = std::abs(evaluate_accuracy(saved, test) - logged) < 5e-7;
  fs::remove_all(root);
  verdict(8, "determinism and persistence", same_metrics && same_accuracy && from_disk,
          std::string("metrics.csv byte-identical: ") + (same_metrics ? "yes" : "no") +
              ", save/load accuracy identical: " + (same_accuracy ? "yes" : "no") +
              ", run directory reproduces test accuracy: " + (from_disk ? "yes" : "no"));
}

}  // namespace

int main(int argc, char** argv) {
  const bool quick = argc > 1 && std::strcmp(argv[1], "--quick") == 0;
  if (quick) std::printf("quick mode: criteria 1-2 use 3 epochs\n");
  const auto runs = criterion_1(quick ? 3 : 50);
  criterion_2(runs);
  criterion_3();
  criterion_4();
  criterion_5();
  criterion_6();
  criterion_7();
  criterion_8(runs);
  std::printf("%d of 8 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
