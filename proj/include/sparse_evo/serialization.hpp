#pragma once

// Model persistence as one JSON document. Doubles are written in shortest
// round-trip form, so a loaded model evaluates bit-identically. Optimizer
// momentum is not stored; a loaded model restarts with zero velocity.

#include <fstream>
#include <sstream>
#include <string>

#include "json.hpp"
#include "sparse_evo/errors.hpp"
#include "sparse_evo/model.hpp"

namespace sparse_evo {

using Json = nlohmann::json;

inline Json to_json(const TrainConfig& c) {
  Json j;
  j["epsilon"] = c.epsilon;
  j["zeta"] = c.zeta;
  j["eta"] = c.eta;
  j["dropout_rate"] = c.dropout_rate;
  j["hidden_dims"] = c.hidden_dims;
  j["epochs"] = c.epochs;
  j["batch_size"] = c.batch_size;
  j["momentum"] = c.momentum;
  j["weight_decay"] = c.weight_decay;
  j["seed"] = c.seed;
  j["activation_sample_cap"] = c.activation_sample_cap ? Json(*c.activation_sample_cap) : Json(nullptr);
  return j;
}

/// Overlays the keys present in `j` onto `c`; unknown keys are ignored.
inline void merge_json(TrainConfig& c, const Json& j) {
  try {
    if (j.contains("epsilon")) c.epsilon = j.at("epsilon").get<double>();
    if (j.contains("zeta")) c.zeta = j.at("zeta").get<double>();
    if (j.contains("eta")) c.eta = j.at("eta").get<double>();
    if (j.contains("dropout_rate")) c.dropout_rate = j.at("dropout_rate").get<double>();
    if (j.contains("hidden_dims")) c.hidden_dims = j.at("hidden_dims").get<std::vector<std::size_t>>();
    if (j.contains("epochs")) c.epochs = j.at("epochs").get<int>();
    if (j.contains("batch_size")) c.batch_size = j.at("batch_size").get<std::size_t>();
    if (j.contains("momentum")) c.momentum = j.at("momentum").get<double>();
    if (j.contains("weight_decay")) c.weight_decay = j.at("weight_decay").get<double>();
    if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("activation_sample_cap")) {
      const auto& cap = j.at("activation_sample_cap");
      c.activation_sample_cap =
          cap.is_null() ? std::nullopt : std::optional<std::size_t>(cap.get<std::size_t>());
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("bad training config: ") + e.what());
  }
}

inline Json to_json(const FeatureTransform& t) {
  return Json{{"scheme", to_string(t.scheme)},
              {"offset", t.offset},
              {"scale", t.scale},
              {"neutral", t.neutral}};
}

inline FeatureTransform transform_from_json(const Json& j) {
  FeatureTransform t;
  t.scheme = normalization_from_string(j.at("scheme").get<std::string>());
  t.offset = j.at("offset").get<std::vector<double>>();
  t.scale = j.at("scale").get<std::vector<double>>();
  t.neutral = j.at("neutral").get<std::vector<double>>();
  if (t.scale.size() != t.offset.size() || t.neutral.size() != t.offset.size())
    throw ParseError("input_transform arrays differ in length");
  return t;
}

inline Json to_json(const Model& m) {
  Json j;
  j["format"] = "sparse-evo-model";
  j["version"] = 1;
  j["policy"] = m.policy.name();
  j["epoch"] = m.epoch;
  j["config"] = to_json(m.config);
  j["input_transform"] = to_json(m.input_transform);
  Json layers = Json::array();
  for (std::size_t k = 0; k < m.layers.size(); ++k) {
    const auto& lt = m.topology.layers[k];
    const auto& l = m.layers[k];
    Json layer;
    layer["n_prev"] = lt.shape.n_prev;
    layer["n_next"] = lt.shape.n_next;
    Json edges = Json::array();
    for (std::size_t e = 0; e < lt.edges.size(); ++e)
      edges.push_back(Json::array({lt.edges[e].source, lt.edges[e].target, lt.edges[e].birth_epoch,
                                   l.weights[e]}));
    layer["edges"] = std::move(edges);
    layer["biases"] = l.biases;
    Json srelu = Json::array();
    for (const auto& p : l.srelu) srelu.push_back(Json::array({p.t_left, p.a_left, p.t_right, p.a_right}));
    layer["srelu"] = std::move(srelu);
    layers.push_back(std::move(layer));
  }
  j["layers"] = std::move(layers);
  return j;
}

inline Model model_from_json(const Json& j) {
  Model m;
  try {
    if (j.value("format", "") != "sparse-evo-model") throw ParseError("not a sparse-evo model document");
    m.policy = EvolutionPolicy::from_name(j.at("policy").get<std::string>());
    m.epoch = j.at("epoch").get<int>();
    merge_json(m.config, j.at("config"));
    for (const auto& layer : j.at("layers")) {
      LayerTopology lt;
      lt.shape = {layer.at("n_prev").get<std::size_t>(), layer.at("n_next").get<std::size_t>()};
      SparseLayer l;
      for (const auto& e : layer.at("edges")) {
        if (!e.is_array() || e.size() != 4) throw ParseError("edge entries must be [source, target, birth_epoch, weight]");
        lt.edges.push_back({e[0].get<NeuronIndex>(), e[1].get<NeuronIndex>(), e[2].get<int>()});
        l.weights.push_back(e[3].get<double>());
      }
      l.weight_velocity.assign(l.weights.size(), 0.0);
      l.biases = layer.at("biases").get<std::vector<double>>();
      l.bias_velocity.assign(l.biases.size(), 0.0);
      for (const auto& p : layer.at("srelu")) {
        if (!p.is_array() || p.size() != 4) throw ParseError("srelu entries must have four values");
        l.srelu.push_back({p[0].get<double>(), p[1].get<double>(), p[2].get<double>(), p[3].get<double>()});
      }
      l.srelu_velocity.assign(l.srelu.size(), SReLUParams{0, 0, 0, 0});
      m.topology.layers.push_back(std::move(lt));
      m.layers.push_back(std::move(l));
    }
    m.input_transform = j.contains("input_transform") ? transform_from_json(j.at("input_transform"))
                                                      : FeatureTransform::identity(0);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("bad model document: ") + e.what());
  }
  m.validate();
  if (m.input_transform.width() == 0) m.input_transform = FeatureTransform::identity(m.input_width());
  if (m.input_transform.width() != m.input_width())
    throw ParseError("input_transform width does not match the input layer");
  for (const auto& lt : m.topology.layers)
    for (const auto& e : lt.edges)
      if (e.birth_epoch < 0 || e.birth_epoch > m.epoch)
        throw ParseError("edge birth epoch outside [0, " + std::to_string(m.epoch) + "]");
  return m;
}

inline void save_model(const std::string& path, const Model& m) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path + "'");
  out << to_json(m).dump() << '\n';
  if (!out) throw Error("failed writing '" + path + "'");
}

inline Model load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open '" + path + "'");
  Json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("'" + path + "' is not valid JSON: " + e.what());
  }
  return model_from_json(j);
}

}  // namespace sparse_evo
