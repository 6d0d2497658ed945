// Learns noisy XOR with a small sparse network whose topology evolves each
// epoch, then reports which inputs ended up with the most connections.

#include <cstdio>
#include <random>

#include "sparse_evo/sparse_evo.hpp"

using namespace sparse_evo;

int main(int argc, char** argv) {
  const std::string policy = argc > 1 ? argv[1] : "CoDACoRSET";

  // Columns 0 and 1 carry the signal; the other 18 are noise.
  constexpr std::size_t kSamples = 1200, kWidth = 20;
  std::mt19937_64 gen(3);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::bernoulli_distribution bit(0.5);
  Dataset all;
  all.features.resize(kSamples, kWidth);
  all.n_classes = 2;
  for (std::size_t i = 0; i < kSamples; ++i) {
    const bool a = bit(gen), b = bit(gen);
    for (std::size_t j = 0; j < kWidth; ++j) all.features(i, j) = noise(gen);
    all.features(i, 0) = (a ? 1.0 : -1.0) + 0.2 * noise(gen);
    all.features(i, 1) = (b ? 1.0 : -1.0) + 0.2 * noise(gen);
    all.labels.push_back(a != b);
  }
  auto [train, test] = split(all, 0.25, 7);
  const auto t = normalize(train, Normalization::zscore);
  apply_transform(test, t);

  TrainConfig config;
  config.hidden_dims = {64, 64};
  config.epsilon = 8;
  config.eta = 0.05;
  config.epochs = 30;
  config.batch_size = 32;
  config.seed = 11;
  Model model = make_model(kWidth, 2, config, EvolutionPolicy::from_name(policy));
  model.input_transform = t;

  Trainer trainer(model, train, test);
  for (int e = 0; e < config.epochs; ++e) {
    const auto log = trainer.run_epoch();
    if (log.epoch % 5 == 0)
      std::printf("epoch %2d  loss %.4f  train %.3f  test %.3f  rewired %zu\n", log.epoch,
                  log.train_loss, log.train_accuracy, log.test_accuracy, log.rewired);
  }

  const auto degrees = input_degrees(model, true);
  std::printf("%s: highest-degree inputs:", policy.c_str());
  for (auto i : degrees.top(4)) std::printf(" %zu(%zu)", i, degrees.degrees[i]);
  std::printf("\n");
}
