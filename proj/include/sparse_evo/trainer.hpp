#pragma once

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <numeric>
#include <ostream>
#include <string>
#include <vector>

#include "sparse_evo/activation_log.hpp"
#include "sparse_evo/analysis.hpp"
#include "sparse_evo/data.hpp"
#include "sparse_evo/evolution.hpp"
#include "sparse_evo/model.hpp"

namespace sparse_evo {

struct EpochLog {
  int epoch = 0;
  double train_loss = 0.0;
  double train_accuracy = 0.0;
  double test_accuracy = 0.0;
  std::size_t edges_total = 0;
  std::size_t rewired = 0;
  double wall_time_ms = 0.0;
};

/// Fixed-format metrics row: `,`-separated, six-decimal reals.
inline std::string metrics_header() {
  return "epoch,train_loss,train_accuracy,test_accuracy,edges_total,rewired\n";
}

inline std::string metrics_row(const EpochLog& log) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%d,%.6f,%.6f,%.6f,%zu,%zu\n", log.epoch, log.train_loss,
                log.train_accuracy, log.test_accuracy, log.edges_total, log.rewired);
  return buf;
}

inline std::string rewire_header() { return "epoch,layer,removed,added,dot_products,fallback_flag\n"; }

inline std::string rewire_rows(const RewireReport& r) {
  std::string out;
  char buf[160];
  for (const auto& l : r.layers) {
    std::snprintf(buf, sizeof buf, "%d,%zu,%zu,%zu,%llu,%d\n", r.epoch, l.layer, l.removed, l.added,
                  static_cast<unsigned long long>(l.dot_products), l.fallback ? 1 : 0);
    out += buf;
  }
  return out;
}

/// Runs epochs of minibatch SGD followed by rewiring. All randomness comes
/// from streams derived from the model's seed and the epoch number.
class Trainer {
 public:
  Trainer(Model& model, const Dataset& train, const Dataset& test)
      : model_(model), train_(train), test_(test) {
    model_.config.validate();
    if (train.width() != model.input_width() || test.width() != model.input_width())
      throw DimensionMismatch("dataset width does not match the model input");
    if (train.samples() == 0) throw InvalidConfig("empty training set");
    log_ = ActivationLog(model.widths(), model.config.activation_sample_cap, train.samples());
  }

  /// Trains one epoch, rewires, then scores the test set.
  EpochLog run_epoch() {
    const auto start = std::chrono::steady_clock::now();
    const int epoch = model_.epoch + 1;
    const auto seed = model_.config.seed;
    Rng shuffle_rng = derive_rng(seed, {0x73687566, static_cast<std::uint64_t>(epoch)});
    Rng dropout_rng = derive_rng(seed, {0x64726f70, static_cast<std::uint64_t>(epoch)});
    Rng evolve_rng = derive_rng(seed, {0x65766f6c, static_cast<std::uint64_t>(epoch)});

    std::vector<std::size_t> order(train_.samples());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    const std::size_t bs = model_.config.batch_size;
    double loss_sum = 0.0;
    std::size_t correct = 0;
    std::size_t batch_index = 0;
    for (std::size_t at = 0; at < order.size(); at += bs, ++batch_index) {
      const std::span<const std::size_t> rows(order.data() + at, std::min(bs, order.size() - at));
      const Matrix x = train_.gather(rows);
      const auto y = train_.gather_labels(rows);
      const ForwardPass pass = forward(model_, x, Mode::train, &dropout_rng, &log_);
      const double loss = backward_and_update(model_, pass, y, epoch, batch_index);
      loss_sum += loss * static_cast<double>(rows.size());
      correct += count_correct(pass.probabilities(), y);
    }

    last_report_ = evolve_epoch(model_, log_, evolve_rng);

    EpochLog out;
    out.epoch = model_.epoch;
    out.train_loss = loss_sum / static_cast<double>(train_.samples());
    out.train_accuracy = static_cast<double>(correct) / static_cast<double>(train_.samples());
    out.test_accuracy = evaluate_accuracy(model_, test_);
    out.edges_total = model_.topology.edge_count();
    out.rewired = last_report_.total_added();
    out.wall_time_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    return out;
  }

  const RewireReport& last_report() const { return last_report_; }
  const ActivationLog& activation_log() const { return log_; }

 private:
  Model& model_;
  const Dataset& train_;
  const Dataset& test_;
  ActivationLog log_;
  RewireReport last_report_;
};

}  // namespace sparse_evo
