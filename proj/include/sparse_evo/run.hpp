#pragma once

// A training run as driven from the command line: configuration with
// presets, dataset resolution, and the files a run directory holds.

#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "sparse_evo/data.hpp"
#include "sparse_evo/serialization.hpp"
#include "sparse_evo/trainer.hpp"

namespace sparse_evo {

struct RunConfig {
  TrainConfig train;
  std::string policy = "SET";
  std::string preset = "default";
  std::string data;       // CSV path; empty means use `generator`
  std::string generator;  // "madelon-like" or empty
  std::size_t samples = 2600;
  std::uint64_t data_seed = 42;
  double test_fraction = 600.0 / 2600.0;
  std::string label_column = "label";
  Normalization normalization = Normalization::zscore;
  std::string out = "run";
  std::vector<int> checkpoints{5, 20, 50, 100};

  void validate() const {
    train.validate();
    EvolutionPolicy::from_name(policy);
    if (data.empty() && generator.empty()) throw InvalidConfig("no dataset: set data or generator");
    if (!generator.empty() && generator != "madelon-like")
      throw InvalidConfig("unknown generator '" + generator + "'");
    if (!(test_fraction > 0.0 && test_fraction < 1.0))
      throw InvalidConfig("test_fraction must lie in (0, 1)");
  }
};

/// Built-in defaults. "madelon" generates its own data; "micromass" only
/// sets hyperparameters and still needs `data`.
inline RunConfig preset_config(const std::string& name) {
  RunConfig c;
  c.preset = name;
  if (name == "madelon") {
    c.train.eta = 0.1;
    c.generator = "madelon-like";
  } else if (name == "micromass") {
    c.train.eta = 0.1;
  } else if (name != "default") {
    throw InvalidConfig("unknown preset '" + name + "'");
  }
  return c;
}

inline Json to_json(const RunConfig& c) {
  Json j = to_json(c.train);
  j["policy"] = c.policy;
  j["preset"] = c.preset;
  j["data"] = c.data;
  j["generator"] = c.generator;
  j["samples"] = c.samples;
  j["data_seed"] = c.data_seed;
  j["test_fraction"] = c.test_fraction;
  j["label_column"] = c.label_column;
  j["normalization"] = to_string(c.normalization);
  j["out"] = c.out;
  j["checkpoints"] = c.checkpoints;
  return j;
}

inline void merge_json(RunConfig& c, const Json& j) {
  merge_json(c.train, j);
  try {
    if (j.contains("policy")) c.policy = j.at("policy").get<std::string>();
    if (j.contains("data")) c.data = j.at("data").get<std::string>();
    if (j.contains("generator")) c.generator = j.at("generator").get<std::string>();
    if (j.contains("samples")) c.samples = j.at("samples").get<std::size_t>();
    if (j.contains("data_seed")) c.data_seed = j.at("data_seed").get<std::uint64_t>();
    if (j.contains("test_fraction")) c.test_fraction = j.at("test_fraction").get<double>();
    if (j.contains("label_column")) c.label_column = j.at("label_column").get<std::string>();
    if (j.contains("normalization"))
      c.normalization = normalization_from_string(j.at("normalization").get<std::string>());
    if (j.contains("out")) c.out = j.at("out").get<std::string>();
    if (j.contains("checkpoints")) c.checkpoints = j.at("checkpoints").get<std::vector<int>>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("bad run config: ") + e.what());
  }
}

/// Preset named in the file (or "default"), overlaid with the file's keys.
inline RunConfig config_from_json(const Json& j) {
  const std::string preset = j.contains("preset") ? j.at("preset").get<std::string>() : "default";
  RunConfig c = preset_config(preset);
  merge_json(c, j);
  return c;
}

inline RunConfig read_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open config '" + path + "'");
  Json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("config '" + path + "' is not valid JSON: " + e.what());
  }
  if (!j.is_object()) throw ParseError("config '" + path + "' must be a JSON object");
  return config_from_json(j);
}

/// `dir/name.csv` -> `dir/name.meta.json`.
inline std::string metadata_path(const std::string& csv_path) {
  std::filesystem::path p(csv_path);
  return (p.parent_path() / (p.stem().string() + ".meta.json")).string();
}

inline Json to_json(const FeatureMetadata& m) {
  Json roles = Json::array();
  for (auto r : m.roles) roles.push_back(to_string(r));
  return Json{{"roles", roles}, {"source_index", m.source_index}};
}

inline void save_metadata(const std::string& path, const FeatureMetadata& m) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write '" + path + "'");
  out << to_json(m).dump() << '\n';
}

/// Sidecar roles for a CSV, if the file exists.
inline std::optional<FeatureMetadata> load_metadata_for(const std::string& csv_path) {
  const auto path = metadata_path(csv_path);
  std::ifstream in(path);
  if (!in) return std::nullopt;
  try {
    Json j;
    in >> j;
    FeatureMetadata m;
    for (const auto& r : j.at("roles")) m.roles.push_back(feature_role_from_string(r.get<std::string>()));
    if (j.contains("source_index")) m.source_index = j.at("source_index").get<std::vector<std::size_t>>();
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("bad metadata '" + path + "': " + e.what());
  }
}

/// Writes a dataset CSV and, when it has roles, the sidecar next to it.
inline void write_dataset(const std::string& path, const Dataset& d, const std::string& label_column) {
  write_csv(path, d, label_column);
  if (d.metadata) save_metadata(metadata_path(path), *d.metadata);
}

/// Raw (untransformed) train and test splits.
inline std::pair<Dataset, Dataset> resolve_dataset(const RunConfig& c) {
  Dataset all;
  if (c.data.empty()) {
    all = gen_madelon_like(c.samples, c.data_seed);
  } else {
    all = read_csv(c.data, c.label_column);
    all.metadata = load_metadata_for(c.data);
  }
  return split(all, c.test_fraction, c.data_seed);
}

struct RunResult {
  Model model;
  Dataset train;  // normalized
  Dataset test;   // normalized
  std::vector<EpochLog> epochs;
};

/// Trains per `c`. When `c.out` is non-empty the run directory receives
/// run_config.json, metrics.csv, rewire.csv, timing.csv, test.csv and the
/// model files. Throws TrainingDivergence on a non-finite loss.
inline RunResult run_training(const RunConfig& c, std::ostream* progress = nullptr) {
  c.validate();
  auto [train, test] = resolve_dataset(c);
  namespace fs = std::filesystem;
  const bool write = !c.out.empty();
  const fs::path dir(c.out);
  std::ofstream metrics, rewire, timing;
  if (write) {
    fs::create_directories(dir);
    std::ofstream(dir / "run_config.json") << to_json(c).dump(2) << '\n';
    write_dataset((dir / "test.csv").string(), test, c.label_column);
    metrics.open(dir / "metrics.csv", std::ios::binary);
    rewire.open(dir / "rewire.csv", std::ios::binary);
    timing.open(dir / "timing.csv", std::ios::binary);
    if (!metrics || !rewire || !timing) throw Error("cannot write into '" + c.out + "'");
    metrics << metrics_header();
    rewire << rewire_header();
    timing << "epoch,wall_time_ms\n";
  }

  const FeatureTransform t = FeatureTransform::fit(train.features, c.normalization);
  apply_transform(train, t);
  apply_transform(test, t);

  RunResult r{make_model(train.width(), std::max(train.n_classes, test.n_classes), c.train,
                         EvolutionPolicy::from_name(c.policy)),
              std::move(train), std::move(test), {}};
  r.model.input_transform = t;
  Trainer trainer(r.model, r.train, r.test);
  for (int e = 0; e < c.train.epochs; ++e) {
    const EpochLog log = trainer.run_epoch();
    r.epochs.push_back(log);
    if (progress)
      *progress << "epoch " << log.epoch << " loss " << log.train_loss << " train "
                << log.train_accuracy << " test " << log.test_accuracy << '\n';
    if (!write) continue;
    metrics << metrics_row(log) << std::flush;
    rewire << rewire_rows(trainer.last_report()) << std::flush;
    timing << log.epoch << ',' << log.wall_time_ms << '\n' << std::flush;
    if (std::find(c.checkpoints.begin(), c.checkpoints.end(), log.epoch) != c.checkpoints.end())
      save_model((dir / ("model_epoch" + std::to_string(log.epoch) + ".json")).string(), r.model);
  }
  if (write) save_model((dir / "model.json").string(), r.model);
  return r;
}

}  // namespace sparse_evo
