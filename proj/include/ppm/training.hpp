#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "ppm/evaluation.hpp"
#include "ppm/event_log.hpp"
#include "ppm/model.hpp"
#include "ppm/optim.hpp"
#include "ppm/rng.hpp"

namespace ppm {

/// Targets that never contribute to the loss or to accuracy.
inline constexpr std::array<int, 2> kIgnoredTargets{kPad, kSos};

struct TrainConfig {
  double lr = 0.002836;
  double gamma = 0.989695;
  int step_epochs = 1;
  double weight_decay = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  int epochs = 100;
  int batch_size = 32;
  int patience = 10;
  std::uint64_t seed = 0;

  /// Throws ErrorKind::Config.
  void validate() const;
  AdamWConfig adamw() const { return {beta1, beta2, eps, weight_decay}; }
};

struct TrainingPairs {
  std::vector<int> inputs;   // ids[0 .. L-2]
  std::vector<int> targets;  // ids[1 .. L-1]; PAD entries are ignored by the loss
};

TrainingPairs make_training_pairs(const EncodedTrace& trace);

/// Number of targets that count towards the loss (activities + EOS).
std::size_t valid_target_count(const EncodedTrace& trace);

/// Zeroes gradients, then accumulates the gradient of the batch's mean
/// masked cross-entropy (mean over every counted position in the batch).
/// With `trim_padding` each sequence is cut after EOS; otherwise the full
/// padded sequence goes through the model. Both give the same loss and
/// gradients. Returns {summed loss, counted positions}.
template <typename T>
std::pair<double, std::size_t> batch_gradient(Model<T>& model,
                                              std::span<const EncodedTrace* const> batch,
                                              bool training, Rng* dropout_rng,
                                              bool trim_padding = true);

/// Mean masked cross-entropy without dropout or gradients.
double evaluate_loss(const Model<float>& model, std::span<const EncodedTrace> traces);

struct EpochLog {
  int epoch = 0;  // 1-based
  double lr = 0.0;
  double train_loss = 0.0;
  double val_loss = 0.0;
};

struct FitResult {
  double initial_train_loss = 0.0;  // before the first update
  double best_val_loss = 0.0;
  int best_epoch = 0;               // 1-based
  int epochs_run = 0;
  std::vector<EpochLog> history;
  EvalReport test;                  // best-validation parameters on the test split
  ModelParams<float> best_params;
  std::filesystem::path checkpoint; // set by callers that persist the model
};

/// Seeded training run: shuffled mini-batches, AdamW, per-epoch StepLR,
/// early stopping on validation loss, test accuracy@{1,3,5} with the best
/// parameters. `token_spectral` (V x k) is required for structural
/// encoding. Throws ErrorKind::Numeric when the loss stops being finite.
FitResult fit(const DatasetSplit& split, const ModelConfig& model_config,
              const TrainConfig& train_config, const Tensor<double>& token_spectral = {});

struct FitRecord {
  int index = 0;
  std::uint64_t seed = 0;
  FitResult result;
};

struct RunSummary {
  std::vector<FitRecord> fits;  // ordered by index
  Aggregate aggregate;
  double mean_val_loss = 0.0;
};

/// n_fits independent fits; fit i uses seed base_seed + i for its split,
/// initialisation, shuffling and dropout. `workers` > 1 runs fits on
/// threads; results do not depend on the worker count.
RunSummary run_many(int n_fits, std::uint64_t base_seed, std::span<const EncodedTrace> traces,
                    const ModelConfig& model_config, const TrainConfig& train_config,
                    const Tensor<double>& token_spectral = {}, int workers = 1);

/// Hyperparameter space searched by random_search. Categorical values are
/// drawn uniformly; dropout and gamma uniformly on their ranges; the
/// learning rate log-uniformly.
struct SearchSpace {
  std::vector<int> embedding{16, 32, 64, 128, 256};
  std::vector<int> hidden{16, 32, 64, 128, 256};
  std::vector<int> heads{1, 2, 4, 8};
  std::vector<int> layers{1, 2, 3, 4, 5};
  std::vector<int> spe_k{8, 16, 32};
  double dropout_min = 0.1, dropout_max = 0.5;
  double gamma_min = 0.85, gamma_max = 0.99;
  double lr_min = 1e-4, lr_max = 3e-2;
};

struct TrialConfig {
  int embedding = 0;
  int hidden = 0;
  int heads = 0;
  int layers = 0;
  int spe_k = 0;
  double dropout = 0.0;
  double gamma = 0.0;
  double lr = 0.0;

  void apply(ModelConfig& model, TrainConfig& train) const;
};

TrialConfig sample_trial(const SearchSpace& space, Rng& rng);
bool contains(const SearchSpace& space, const TrialConfig& trial);

struct Trial {
  int index = 0;
  TrialConfig config;
  double val_loss = 0.0;
  EvalReport test;
};

struct SearchResult {
  std::vector<Trial> trials;
  std::size_t best = 0;  // index into trials (lowest validation loss)
  ModelConfig best_model;
  TrainConfig best_train;
};

/// `budget` trials, each one fit on `split` with a sampled configuration
/// applied on top of the base configs. Throws ErrorKind::Parameter for
/// budget < 1.
SearchResult random_search(const SearchSpace& space, int budget, std::uint64_t seed,
                           const DatasetSplit& split, const ModelConfig& base_model,
                           const TrainConfig& base_train,
                           const Tensor<double>& token_spectral = {});

/// trial,emb,hidden,heads,layers,dropout,gamma,lr,spe_k,val_loss,acc1,acc3,acc5
void write_trial_log(const std::filesystem::path& path, std::span<const Trial> trials);

}  // namespace ppm
