// sparse-evo: train, evaluate and analyze sparse MLPs with evolving topology.

#include <glob.h>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "sparse_evo/sparse_evo.hpp"

namespace fs = std::filesystem;
using namespace sparse_evo;

namespace {

constexpr int kUsage = 2;
constexpr int kDiverged = 3;

std::vector<std::string> expand(const std::string& pattern) {
  if (pattern.find_first_of("*?[") == std::string::npos) return {pattern};
  glob_t g{};
  std::vector<std::string> out;
  if (::glob(pattern.c_str(), 0, nullptr, &g) == 0)
    for (std::size_t i = 0; i < g.gl_pathc; ++i) out.emplace_back(g.gl_pathv[i]);
  globfree(&g);
  if (out.empty()) throw Error("no files match '" + pattern + "'");
  return out;
}

/// Raw CSV brought into a model's input space.
Dataset model_space(const std::string& path, const std::string& label, const Model& m) {
  Dataset d = read_csv(path, label);
  d.metadata = load_metadata_for(path);
  if (d.width() != m.input_width())
    throw DimensionMismatch("'" + path + "' has " + std::to_string(d.width()) +
                            " features, model expects " + std::to_string(m.input_width()));
  apply_transform(d, m.input_transform);
  return d;
}

void write_curve(const fs::path& path, const AblationCurve& c) {
  std::ofstream out(path);
  out << "removed,accuracy\n";
  char buf[64];
  for (const auto& p : c.points) {
    std::snprintf(buf, sizeof buf, "%zu,%.6f\n", p.removed, p.accuracy);
    out << buf;
  }
  if (!out) throw Error("cannot write '" + path.string() + "'");
}

struct TrainArgs {
  std::string config, preset;
  std::optional<std::string> policy, out, data, hidden;
  std::optional<std::uint64_t> seed, data_seed;
  std::optional<int> epochs;
  std::optional<double> eta, epsilon, zeta, dropout, momentum, weight_decay, test_fraction;
  std::optional<std::size_t> batch_size, samples, cap;
  bool quiet = false;
};

RunConfig effective_config(const TrainArgs& a) {
  RunConfig c;
  if (!a.config.empty()) {
    std::ifstream in(a.config);
    if (!in) throw ParseError("cannot open config '" + a.config + "'");
    Json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw ParseError("config '" + a.config + "' is not valid JSON: " + e.what());
    }
    if (!j.is_object()) throw ParseError("config must be a JSON object");
    if (!a.preset.empty()) j["preset"] = a.preset;
    c = config_from_json(j);
  } else {
    c = preset_config(a.preset.empty() ? "default" : a.preset);
  }
  if (a.policy) c.policy = *a.policy;
  if (a.out) c.out = *a.out;
  if (a.data) c.data = *a.data;
  if (a.seed) c.train.seed = *a.seed;
  if (a.data_seed) c.data_seed = *a.data_seed;
  if (a.epochs) c.train.epochs = *a.epochs;
  if (a.eta) c.train.eta = *a.eta;
  if (a.epsilon) c.train.epsilon = *a.epsilon;
  if (a.zeta) c.train.zeta = *a.zeta;
  if (a.dropout) c.train.dropout_rate = *a.dropout;
  if (a.momentum) c.train.momentum = *a.momentum;
  if (a.weight_decay) c.train.weight_decay = *a.weight_decay;
  if (a.test_fraction) c.test_fraction = *a.test_fraction;
  if (a.batch_size) c.train.batch_size = *a.batch_size;
  if (a.samples) c.samples = *a.samples;
  if (a.cap) c.train.activation_sample_cap = *a.cap;
  if (a.hidden) {
    c.train.hidden_dims.clear();
    std::stringstream ss(*a.hidden);
    for (std::string tok; std::getline(ss, tok, ',');) {
      const auto v = detail::parse_double(detail::trim(tok));
      if (!v || *v < 1 || *v != std::floor(*v)) throw InvalidConfig("bad --hidden entry '" + tok + "'");
      c.train.hidden_dims.push_back(static_cast<std::size_t>(*v));
    }
  }
  return c;
}

int cmd_train(const TrainArgs& a) {
  const RunConfig c = effective_config(a);
  c.validate();
  try {
    const auto r = run_training(c, a.quiet ? nullptr : &std::cerr);
    std::printf("%.4f\n", r.epochs.empty() ? evaluate_accuracy(r.model, r.test) : r.epochs.back().test_accuracy);
  } catch (const TrainingDivergence& e) {
    std::fprintf(stderr, "training diverged at epoch %d (batch %zu)\n", e.epoch(), e.batch());
    return kDiverged;
  }
  return 0;
}

int cmd_evaluate(const std::string& model_path, const std::string& data_path, const std::string& label) {
  const Model m = load_model(model_path);
  const Dataset d = model_space(data_path, label, m);
  std::printf("%.4f\n", evaluate_accuracy(m, d));
  return 0;
}

int cmd_analyze(const std::string& mode, const std::string& model_arg, const std::string& data_path,
                const std::string& label, const fs::path& out, std::size_t step, std::size_t bins,
                bool include_final) {
  fs::create_directories(out);
  const auto paths = expand(model_arg);
  if (mode == "snapshots") {
    std::vector<Model> models;
    for (const auto& p : paths) models.push_back(load_model(p));
    std::stable_sort(models.begin(), models.end(),
                     [](const Model& x, const Model& y) { return x.epoch < y.epoch; });
    const Dataset d = model_space(data_path, label, models.front());
    const auto curves = snapshot_curves(models, d, step);
    for (std::size_t i = 0; i < curves.size(); ++i)
      write_curve(out / ("snapshot_epoch" + std::to_string(models[i].epoch) + ".csv"), curves[i]);
    std::printf("%zu curves\n", curves.size());
    return 0;
  }
  if (paths.size() != 1) throw InvalidConfig("mode '" + mode + "' takes a single model");
  const Model m = load_model(paths.front());
  const DegreeProfile profile = input_degrees(m, !include_final);
  if (mode == "degrees") {
    std::optional<FeatureMetadata> meta;
    if (!data_path.empty()) meta = load_metadata_for(data_path);
    if (meta && meta->roles.size() != profile.degrees.size()) meta.reset();
    std::ofstream deg(out / "degrees.csv");
    deg << (meta ? "neuron,degree,role\n" : "neuron,degree\n");
    for (std::size_t i = 0; i < profile.degrees.size(); ++i) {
      deg << i << ',' << profile.degrees[i];
      if (meta) deg << ',' << to_string(meta->roles[i]);
      deg << '\n';
    }
    const auto h = degree_histogram(profile, bins);
    std::ofstream hist(out / "histogram.csv");
    hist << "bin_low,bin_high,count\n";
    for (std::size_t b = 0; b < h.counts.size(); ++b)
      hist << h.edges[b] << ',' << h.edges[b + 1] << ',' << h.counts[b] << '\n';
    if (!deg || !hist) throw Error("cannot write into '" + out.string() + "'");
    return 0;
  }
  if (mode == "ablation") {
    const Dataset d = model_space(data_path, label, m);
    for (auto order : {AblationOrder::ascending, AblationOrder::descending}) {
      const auto curve = ablation_curve(m, profile, d, order, step);
      write_curve(out / ("ablation_" + to_string(order) + ".csv"), curve);
    }
    return 0;
  }
  throw InvalidConfig("unknown analyze mode '" + mode + "'");
}

int cmd_gen_data(const std::string& preset, std::size_t samples, std::uint64_t seed, const std::string& out) {
  if (preset != "madelon-like") throw InvalidConfig("unknown data preset '" + preset + "'");
  const auto parent = fs::path(out).parent_path();
  if (!parent.empty()) fs::create_directories(parent);
  write_dataset(out, gen_madelon_like(samples, seed), "label");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sparse MLPs with cosine-guided topology evolution"};
  app.require_subcommand(1);

  TrainArgs t;
  auto* train = app.add_subcommand("train", "train a model and write a run directory");
  train->add_option("--config", t.config, "flat JSON run config");
  train->add_option("--preset", t.preset, "madelon | micromass | default");
  train->add_option("--policy", t.policy, "SET, CoDASET, CoPASET, CoRSET, CoDACoRSET, CoPACoRSET");
  train->add_option("--seed", t.seed);
  train->add_option("--out", t.out, "run directory");
  train->add_option("--data", t.data, "CSV with a label column");
  train->add_option("--data-seed", t.data_seed);
  train->add_option("--samples", t.samples, "generated dataset size");
  train->add_option("--test-fraction", t.test_fraction);
  train->add_option("--epochs", t.epochs);
  train->add_option("--eta", t.eta);
  train->add_option("--epsilon", t.epsilon);
  train->add_option("--zeta", t.zeta);
  train->add_option("--dropout", t.dropout);
  train->add_option("--momentum", t.momentum);
  train->add_option("--weight-decay", t.weight_decay);
  train->add_option("--batch-size", t.batch_size);
  train->add_option("--hidden", t.hidden, "comma-separated widths, e.g. 1000,1000,1000");
  train->add_option("--activation-cap", t.cap, "max samples recorded per epoch");
  train->add_flag("--quiet", t.quiet);

  std::string model_path, data_path, label = "label";
  auto* evaluate = app.add_subcommand("evaluate", "accuracy of a saved model on a raw CSV");
  evaluate->add_option("--model", model_path)->required();
  evaluate->add_option("--data", data_path)->required();
  evaluate->add_option("--label", label);

  std::string mode, analyze_out;
  std::size_t step = 20, bins = 20;
  bool include_final = false;
  auto* analyze = app.add_subcommand("analyze", "degree, ablation and snapshot analyses");
  analyze->add_option("--mode", mode)->required()->check(CLI::IsMember({"degrees", "ablation", "snapshots"}));
  analyze->add_option("--model", model_path, "model file or glob")->required();
  analyze->add_option("--data", data_path);
  analyze->add_option("--label", label);
  analyze->add_option("--out", analyze_out)->required();
  analyze->add_option("--step", step, "features removed per ablation step");
  analyze->add_option("--bins", bins, "histogram bins");
  analyze->add_flag("--include-final", include_final, "count edges added in the final epoch");

  std::string gen_preset = "madelon-like", gen_out;
  std::size_t gen_samples = 2600;
  std::uint64_t gen_seed = 42;
  auto* gen = app.add_subcommand("gen-data", "write a synthetic dataset and its role metadata");
  gen->add_option("--preset", gen_preset);
  gen->add_option("--samples", gen_samples);
  gen->add_option("--seed", gen_seed);
  gen->add_option("--out", gen_out)->required();

  CLI11_PARSE(app, argc, argv);
  try {
    if (*train) return cmd_train(t);
    if (*evaluate) return cmd_evaluate(model_path, data_path, label);
    if (*analyze) {
      if (mode != "degrees" && data_path.empty()) throw InvalidConfig("--data is required for " + mode);
      return cmd_analyze(mode, model_path, data_path, label, analyze_out, step, bins, include_final);
    }
    if (*gen) return cmd_gen_data(gen_preset, gen_samples, gen_seed, gen_out);
  } catch (const InvalidConfig& e) {
    std::fprintf(stderr, "usage error: %s\n", e.what());
    return kUsage;
  } catch (const InvalidArchitecture& e) {
    std::fprintf(stderr, "usage error: %s\n", e.what());
    return kUsage;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
