#pragma once

// Sparse multilayer perceptron: SReLU hidden layers, softmax output,
// cross-entropy loss, SGD with momentum. Every bipartite layer stores only
// its active connections; gradients are formed for those connections alone.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "sparse_evo/activation_log.hpp"
#include "sparse_evo/errors.hpp"
#include "sparse_evo/linalg.hpp"
#include "sparse_evo/policy.hpp"
#include "sparse_evo/random.hpp"
#include "sparse_evo/topology.hpp"
#include "sparse_evo/transform.hpp"

namespace sparse_evo {

struct TrainConfig {
  double epsilon = 20.0;
  double zeta = 0.3;
  double eta = 0.01;
  double dropout_rate = 0.3;
  std::vector<std::size_t> hidden_dims{1000, 1000, 1000};
  int epochs = 100;
  std::size_t batch_size = 100;
  double momentum = 0.9;
  double weight_decay = 0.0;
  std::uint64_t seed = 0;
  std::optional<std::size_t> activation_sample_cap;

  void validate() const {
    if (!(epsilon > 0.0)) throw InvalidConfig("epsilon must be > 0");
    if (!(zeta > 0.0 && zeta < 1.0)) throw InvalidConfig("zeta must lie in (0, 1)");
    if (!(dropout_rate >= 0.0 && dropout_rate < 1.0))
      throw InvalidConfig("dropout_rate must lie in [0, 1)");
    if (batch_size < 1) throw InvalidConfig("batch_size must be >= 1");
    if (!(eta > 0.0)) throw InvalidConfig("eta must be > 0");
    if (!(momentum >= 0.0 && momentum < 1.0)) throw InvalidConfig("momentum must lie in [0, 1)");
    if (!(weight_decay >= 0.0)) throw InvalidConfig("weight_decay must be >= 0");
    if (epochs < 0) throw InvalidConfig("epochs must be >= 0");
    for (auto h : hidden_dims)
      if (h == 0) throw InvalidArchitecture("hidden layer width of 0");
    if (activation_sample_cap && *activation_sample_cap == 0)
      throw InvalidConfig("activation_sample_cap must be >= 1 when set");
  }
};

/// S-shaped rectified linear unit with learnable hinges.
struct SReLUParams {
  double t_left = 0.0;
  double a_left = 0.0;
  double t_right = 1.0;
  double a_right = 1.0;

  bool operator==(const SReLUParams&) const = default;
};

inline double srelu(double x, const SReLUParams& p) {
  if (x >= p.t_right) return p.t_right + p.a_right * (x - p.t_right);
  if (x <= p.t_left) return p.t_left + p.a_left * (x - p.t_left);
  return x;
}

/// Parameters of one bipartite layer. `weights[i]` belongs to the i-th edge
/// of the matching LayerTopology; the velocity arrays are momentum state.
/// SReLU parameters exist for hidden layers only (the output is softmax).
struct SparseLayer {
  std::vector<double> weights;
  std::vector<double> weight_velocity;
  std::vector<double> biases;
  std::vector<double> bias_velocity;
  std::vector<SReLUParams> srelu;
  std::vector<SReLUParams> srelu_velocity;
};

inline double init_weight_stddev(const LayerShape& shape) {
  return std::sqrt(2.0 / static_cast<double>(shape.n_prev + shape.n_next));
}

inline double draw_weight(const LayerShape& shape, Rng& rng) {
  std::normal_distribution<double> dist(0.0, init_weight_stddev(shape));
  return dist(rng);
}

/// Fresh parameters for a topology. The last layer gets no SReLU block.
inline std::vector<SparseLayer> init_weights(const Topology& topo, Rng& rng) {
  std::vector<SparseLayer> layers;
  for (std::size_t k = 0; k < topo.layers.size(); ++k) {
    const auto& lt = topo.layers[k];
    SparseLayer l;
    l.weights.reserve(lt.edges.size());
    for (std::size_t e = 0; e < lt.edges.size(); ++e) l.weights.push_back(draw_weight(lt.shape, rng));
    l.weight_velocity.assign(lt.edges.size(), 0.0);
    l.biases.assign(lt.shape.n_next, 0.0);
    l.bias_velocity.assign(lt.shape.n_next, 0.0);
    if (k + 1 < topo.layers.size()) {
      l.srelu.assign(lt.shape.n_next, SReLUParams{});
      l.srelu_velocity.assign(lt.shape.n_next, SReLUParams{0, 0, 0, 0});
    }
    layers.push_back(std::move(l));
  }
  return layers;
}

struct Model {
  Topology topology;
  std::vector<SparseLayer> layers;
  EvolutionPolicy policy;
  TrainConfig config;
  int epoch = 0;
  FeatureTransform input_transform;

  std::size_t layer_count() const { return layers.size(); }
  std::size_t input_width() const { return topology.layers.front().shape.n_prev; }
  std::size_t output_width() const { return topology.layers.back().shape.n_next; }
  bool is_hidden(std::size_t k) const { return k + 1 < layers.size(); }

  /// Widths of every neuron layer, input first.
  std::vector<std::size_t> widths() const {
    std::vector<std::size_t> w{input_width()};
    for (const auto& l : topology.layers) w.push_back(l.shape.n_next);
    return w;
  }

  void validate() const {
    if (topology.layers.empty()) throw InvalidArchitecture("model has no layers");
    if (layers.size() != topology.layers.size())
      throw InvalidArchitecture("parameter/topology layer count mismatch");
    for (std::size_t k = 0; k < layers.size(); ++k) {
      const auto& lt = topology.layers[k];
      const auto& l = layers[k];
      if (k > 0 && lt.shape.n_prev != topology.layers[k - 1].shape.n_next)
        throw InvalidArchitecture("layer " + std::to_string(k) + " does not chain");
      validate_layer(lt);
      if (l.weights.size() != lt.edges.size() || l.weight_velocity.size() != lt.edges.size())
        throw InvalidArchitecture("layer " + std::to_string(k) + " weight count != edge count");
      if (l.biases.size() != lt.shape.n_next || l.bias_velocity.size() != lt.shape.n_next)
        throw InvalidArchitecture("layer " + std::to_string(k) + " bias count != width");
      const std::size_t want = is_hidden(k) ? lt.shape.n_next : 0;
      if (l.srelu.size() != want || l.srelu_velocity.size() != want)
        throw InvalidArchitecture("layer " + std::to_string(k) + " SReLU count != width");
    }
  }
};

/// Builds a model with a random sparse topology. Initialization draws from
/// its own stream derived from config.seed.
inline Model make_model(std::size_t input_width, std::size_t n_classes, const TrainConfig& config,
                        EvolutionPolicy policy) {
  config.validate();
  std::vector<std::size_t> widths{input_width};
  widths.insert(widths.end(), config.hidden_dims.begin(), config.hidden_dims.end());
  widths.push_back(n_classes);
  for (auto w : widths)
    if (w == 0) throw InvalidArchitecture("layer width of 0");
  const auto shapes = chain_shapes(widths);
  Rng rng = derive_rng(config.seed, {0x696e6974 /* "init" */});
  Model m;
  m.topology = init_topology(shapes, config.epsilon, rng);
  m.layers = init_weights(m.topology, rng);
  m.policy = policy;
  m.config = config;
  m.input_transform = FeatureTransform::identity(input_width);
  return m;
}

/// n_prev x n_next dense matrix of a layer's weights, zero off the support.
inline Eigen::MatrixXd densify(const LayerTopology& topo, const SparseLayer& layer) {
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(topo.shape.n_prev),
                                            static_cast<Eigen::Index>(topo.shape.n_next));
  for (std::size_t e = 0; e < topo.edges.size(); ++e)
    w(topo.edges[e].source, topo.edges[e].target) = layer.weights[e];
  return w;
}

/// Pre-activations (n_next x batch) of one layer for neuron-major input
/// (n_prev x batch), biases included.
inline Matrix sparse_preactivation(const LayerTopology& topo, const SparseLayer& layer,
                                   const Matrix& input) {
  if (static_cast<std::size_t>(input.rows()) != topo.shape.n_prev)
    throw DimensionMismatch("layer expects " + std::to_string(topo.shape.n_prev) +
                            " inputs, got " + std::to_string(input.rows()));
  Matrix z(static_cast<Eigen::Index>(topo.shape.n_next), input.cols());
  for (std::size_t t = 0; t < topo.shape.n_next; ++t)
    z.row(static_cast<Eigen::Index>(t)).setConstant(layer.biases[t]);
  for (std::size_t e = 0; e < topo.edges.size(); ++e) {
    const auto& c = topo.edges[e];
    z.row(c.target).noalias() += layer.weights[e] * input.row(c.source);
  }
  return z;
}

enum class Mode { train, eval };

/// Everything backpropagation needs from one forward pass.
/// activations[0] is the input batch, activations[k] for hidden k is the
/// post-SReLU pre-dropout output and activations.back() the softmax output.
/// propagated[k] is what layer k actually fed forward (after dropout).
struct ForwardPass {
  std::vector<Matrix> activations;
  std::vector<Matrix> preactivations;  // one per bipartite layer
  std::vector<Matrix> dropout_scale;   // per neuron layer; empty when unused
  std::vector<Matrix> propagated;      // per neuron layer; empty when equal to activations

  const Matrix& probabilities() const { return activations.back(); }
  const Matrix& layer_input(std::size_t k) const {
    return propagated[k].size() ? propagated[k] : activations[k];
  }
  std::size_t batch() const { return static_cast<std::size_t>(activations.front().cols()); }
};

/// Column-wise softmax of logits (classes x batch).
inline Matrix softmax(const Matrix& logits) {
  Matrix p(logits.rows(), logits.cols());
  for (Eigen::Index b = 0; b < logits.cols(); ++b) {
    const double mx = logits.col(b).maxCoeff();
    double sum = 0.0;
    for (Eigen::Index c = 0; c < logits.rows(); ++c) sum += (p(c, b) = std::exp(logits(c, b) - mx));
    p.col(b) /= sum;
  }
  return p;
}

/// Forward pass over a neuron-major batch (features x samples). Train mode
/// applies inverted dropout to hidden activations using `dropout_rng`. When a
/// recorder is given, the inputs, pre-dropout hidden activations and output
/// probabilities are appended to it.
inline ForwardPass forward(const Model& model, const Matrix& batch, Mode mode,
                           Rng* dropout_rng = nullptr, ActivationLog* recorder = nullptr) {
  if (static_cast<std::size_t>(batch.rows()) != model.input_width())
    throw DimensionMismatch("batch has " + std::to_string(batch.rows()) +
                            " features, model expects " + std::to_string(model.input_width()));
  const std::size_t layers = model.layer_count();
  const double rate = model.config.dropout_rate;
  const bool drop = mode == Mode::train && rate > 0.0;
  if (drop && dropout_rng == nullptr) throw Error("train-mode forward needs a dropout rng");

  ForwardPass pass;
  pass.activations.reserve(layers + 1);
  pass.activations.push_back(batch);
  pass.dropout_scale.resize(layers + 1);
  pass.propagated.resize(layers + 1);
  const double keep_scale = drop ? 1.0 / (1.0 - rate) : 1.0;

  for (std::size_t k = 0; k < layers; ++k) {
    Matrix z = sparse_preactivation(model.topology.layers[k], model.layers[k], pass.layer_input(k));
    if (model.is_hidden(k)) {
      Matrix a(z.rows(), z.cols());
      const auto& params = model.layers[k].srelu;
      for (Eigen::Index j = 0; j < z.rows(); ++j) {
        const auto& p = params[static_cast<std::size_t>(j)];
        for (Eigen::Index b = 0; b < z.cols(); ++b) a(j, b) = srelu(z(j, b), p);
      }
      if (drop) {
        Matrix scale(a.rows(), a.cols());
        for (Eigen::Index i = 0; i < scale.size(); ++i)
          scale.data()[i] = uniform01(*dropout_rng) < rate ? 0.0 : keep_scale;
        pass.propagated[k + 1] = a.cwiseProduct(scale);
        pass.dropout_scale[k + 1] = std::move(scale);
      }
      pass.activations.push_back(std::move(a));
    } else {
      pass.activations.push_back(softmax(z));
    }
    pass.preactivations.push_back(std::move(z));
  }
  if (recorder != nullptr) recorder->record_batch(pass.activations);
  return pass;
}

/// Gradients laid out like the model parameters.
struct Gradients {
  struct Layer {
    std::vector<double> weights;
    std::vector<double> biases;
    std::vector<SReLUParams> srelu;
  };
  std::vector<Layer> layers;
};

/// Mean cross-entropy of probabilities (classes x batch) against labels.
inline double cross_entropy(const Matrix& probabilities, std::span<const int> labels) {
  double loss = 0.0;
  for (std::size_t b = 0; b < labels.size(); ++b)
    loss -= std::log(probabilities(labels[b], static_cast<Eigen::Index>(b)));
  return loss / static_cast<double>(labels.size());
}

/// Mean cross-entropy computed stably from the logits of the output layer.
inline double cross_entropy_from_logits(const Matrix& logits, std::span<const int> labels) {
  double loss = 0.0;
  for (std::size_t b = 0; b < labels.size(); ++b) {
    const auto col = logits.col(static_cast<Eigen::Index>(b));
    const double mx = col.maxCoeff();
    const double lse = mx + std::log((col.array() - mx).exp().sum());
    loss += lse - col(labels[b]);
  }
  return loss / static_cast<double>(labels.size());
}

inline void check_labels(const Model& model, const ForwardPass& pass, std::span<const int> labels) {
  if (labels.size() != pass.batch())
    throw DimensionMismatch("got " + std::to_string(labels.size()) + " labels for a batch of " +
                            std::to_string(pass.batch()));
  for (int y : labels)
    if (y < 0 || static_cast<std::size_t>(y) >= model.output_width())
      throw DimensionMismatch("label " + std::to_string(y) + " outside [0, " +
                              std::to_string(model.output_width()) + ")");
}

/// Backpropagates the mean cross-entropy of `pass` through active edges only.
/// Returns the gradients; `loss_out` receives the batch loss.
inline Gradients compute_gradients(const Model& model, const ForwardPass& pass,
                                   std::span<const int> labels, double* loss_out = nullptr) {
  check_labels(model, pass, labels);
  const std::size_t layers = model.layer_count();
  const auto batch = static_cast<Eigen::Index>(pass.batch());
  if (loss_out) *loss_out = cross_entropy_from_logits(pass.preactivations.back(), labels);

  Gradients g;
  g.layers.resize(layers);
  Matrix dz = pass.probabilities();
  for (Eigen::Index b = 0; b < batch; ++b) dz(labels[static_cast<std::size_t>(b)], b) -= 1.0;
  dz /= static_cast<double>(batch);

  for (std::size_t k = layers; k-- > 0;) {
    const auto& topo = model.topology.layers[k];
    const auto& params = model.layers[k];
    const Matrix& input = pass.layer_input(k);
    auto& gl = g.layers[k];
    gl.weights.resize(topo.edges.size());
    for (std::size_t e = 0; e < topo.edges.size(); ++e) {
      const auto& c = topo.edges[e];
      gl.weights[e] = dz.row(c.target).dot(input.row(c.source));
    }
    if (model.config.weight_decay > 0.0)
      for (std::size_t e = 0; e < topo.edges.size(); ++e)
        gl.weights[e] += model.config.weight_decay * params.weights[e];
    gl.biases.resize(topo.shape.n_next);
    for (std::size_t t = 0; t < topo.shape.n_next; ++t)
      gl.biases[t] = dz.row(static_cast<Eigen::Index>(t)).sum();
    if (k == 0) break;

    Matrix d_in = Matrix::Zero(static_cast<Eigen::Index>(topo.shape.n_prev), batch);
    for (std::size_t e = 0; e < topo.edges.size(); ++e) {
      const auto& c = topo.edges[e];
      d_in.row(c.source).noalias() += params.weights[e] * dz.row(c.target);
    }
    if (pass.dropout_scale[k].size()) d_in.array() *= pass.dropout_scale[k].array();

    // SReLU of neuron layer k, owned by bipartite layer k - 1.
    const Matrix& z = pass.preactivations[k - 1];
    const auto& act = model.layers[k - 1].srelu;
    auto& gs = g.layers[k - 1].srelu;
    gs.assign(act.size(), SReLUParams{0, 0, 0, 0});
    Matrix dz_prev(z.rows(), batch);
    for (Eigen::Index j = 0; j < z.rows(); ++j) {
      const auto& p = act[static_cast<std::size_t>(j)];
      auto& gp = gs[static_cast<std::size_t>(j)];
      for (Eigen::Index b = 0; b < batch; ++b) {
        const double x = z(j, b);
        const double up = d_in(j, b);
        if (x >= p.t_right) {
          dz_prev(j, b) = up * p.a_right;
          gp.t_right += up * (1.0 - p.a_right);
          gp.a_right += up * (x - p.t_right);
        } else if (x <= p.t_left) {
          dz_prev(j, b) = up * p.a_left;
          gp.t_left += up * (1.0 - p.a_left);
          gp.a_left += up * (x - p.t_left);
        } else {
          dz_prev(j, b) = up;
        }
      }
    }
    dz = std::move(dz_prev);
  }
  return g;
}

/// velocity = momentum * velocity - eta * grad; param += velocity.
inline void apply_gradients(Model& model, const Gradients& g) {
  const double mu = model.config.momentum;
  const double eta = model.config.eta;
  auto step = [mu, eta](double& param, double& vel, double grad) {
    vel = mu * vel - eta * grad;
    param += vel;
  };
  for (std::size_t k = 0; k < model.layers.size(); ++k) {
    auto& l = model.layers[k];
    const auto& gl = g.layers[k];
    for (std::size_t e = 0; e < l.weights.size(); ++e)
      step(l.weights[e], l.weight_velocity[e], gl.weights[e]);
    for (std::size_t t = 0; t < l.biases.size(); ++t)
      step(l.biases[t], l.bias_velocity[t], gl.biases[t]);
    for (std::size_t j = 0; j < l.srelu.size(); ++j) {
      auto& p = l.srelu[j];
      auto& v = l.srelu_velocity[j];
      const auto& gp = gl.srelu[j];
      step(p.t_left, v.t_left, gp.t_left);
      step(p.a_left, v.a_left, gp.a_left);
      step(p.t_right, v.t_right, gp.t_right);
      step(p.a_right, v.a_right, gp.a_right);
    }
  }
}

/// One SGD step on the batch behind `pass`. Returns the batch loss; throws
/// TrainingDivergence if it is not finite (parameters are left untouched).
inline double backward_and_update(Model& model, const ForwardPass& pass,
                                  std::span<const int> labels, int epoch = 0,
                                  std::size_t batch_index = 0) {
  double loss = 0.0;
  const Gradients g = compute_gradients(model, pass, labels, &loss);
  if (!std::isfinite(loss)) throw TrainingDivergence(epoch, batch_index);
  apply_gradients(model, g);
  return loss;
}

/// Eval-mode class probabilities (classes x samples).
inline Matrix predict_proba(const Model& model, const Matrix& batch) {
  return forward(model, batch, Mode::eval).probabilities();
}

/// Index of the largest entry per column; ties go to the lower class.
inline std::vector<int> argmax_columns(const Matrix& m) {
  std::vector<int> out(static_cast<std::size_t>(m.cols()));
  for (Eigen::Index b = 0; b < m.cols(); ++b) {
    Eigen::Index best = 0;
    for (Eigen::Index c = 1; c < m.rows(); ++c)
      if (m(c, b) > m(best, b)) best = c;
    out[static_cast<std::size_t>(b)] = static_cast<int>(best);
  }
  return out;
}

inline std::size_t count_correct(const Matrix& probabilities, std::span<const int> labels) {
  const auto pred = argmax_columns(probabilities);
  std::size_t ok = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) ok += pred[i] == labels[i];
  return ok;
}

}  // namespace sparse_evo
