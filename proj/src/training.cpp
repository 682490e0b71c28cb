#include "ppm/training.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <limits>
#include <numeric>
#include <thread>

#include "ppm/csv.hpp"
#include "ppm/errors.hpp"

namespace ppm {

void TrainConfig::validate() const {
  auto fail = [](const std::string& msg) { throw Error(ErrorKind::Config, "train: " + msg); };
  if (!(lr > 0.0)) fail("lr must be > 0");
  if (!(gamma > 0.0 && gamma <= 1.0)) fail("gamma must lie in (0, 1]");
  if (step_epochs < 1) fail("step_epochs must be >= 1");
  if (weight_decay < 0.0) fail("weight_decay must be >= 0");
  if (epochs < 1) fail("epochs must be >= 1");
  if (batch_size < 1) fail("batch_size must be >= 1");
  if (patience < 1) fail("patience must be >= 1");
}

TrainingPairs make_training_pairs(const EncodedTrace& trace) {
  TrainingPairs pairs;
  if (trace.ids.size() < 2) return pairs;
  pairs.inputs.assign(trace.ids.begin(), trace.ids.end() - 1);
  pairs.targets.assign(trace.ids.begin() + 1, trace.ids.end());
  return pairs;
}

std::size_t valid_target_count(const EncodedTrace& trace) {
  std::size_t n = 0;
  for (std::size_t i = 1; i < trace.ids.size(); ++i) {
    const int t = trace.ids[i];
    if (std::find(kIgnoredTargets.begin(), kIgnoredTargets.end(), t) == kIgnoredTargets.end()) {
      ++n;
    }
  }
  return n;
}

namespace {

std::span<const int> input_span(const EncodedTrace& t, bool trim) {
  const std::size_t n = trim ? t.true_length - 1 : t.ids.size() - 1;
  return {t.ids.data(), n};
}

std::span<const int> target_span(const EncodedTrace& t, bool trim) {
  const std::size_t n = trim ? t.true_length - 1 : t.ids.size() - 1;
  return {t.ids.data() + 1, n};
}

}  // namespace

template <typename T>
std::pair<double, std::size_t> batch_gradient(Model<T>& model,
                                              std::span<const EncodedTrace* const> batch,
                                              bool training, Rng* dropout_rng,
                                              bool trim_padding) {
  model.params().zero_grad();
  std::size_t total = 0;
  for (const auto* t : batch) total += valid_target_count(*t);
  if (total == 0) return {0.0, 0};

  const double scale = 1.0 / static_cast<double>(total);
  double sum = 0.0;
  ForwardCache<T> cache;
  for (const auto* t : batch) {
    auto inputs = input_span(*t, trim_padding);
    auto targets = target_span(*t, trim_padding);
    Tensor<T> logits = model.forward(inputs, training, dropout_rng, &cache);
    auto loss = ops::cross_entropy_masked(logits, targets, kIgnoredTargets, scale);
    sum += loss.sum;
    if (loss.counted) model.backward(cache, loss.d_logits);
  }
  return {sum, total};
}

double evaluate_loss(const Model<float>& model, std::span<const EncodedTrace> traces) {
  double sum = 0.0;
  std::size_t count = 0;
  for (const auto& t : traces) {
    Tensor<float> logits = model.forward(input_span(t, true), false, nullptr);
    auto loss = ops::cross_entropy_masked(logits, target_span(t, true), kIgnoredTargets);
    sum += loss.sum;
    count += loss.counted;
  }
  return count ? sum / static_cast<double>(count) : 0.0;
}

FitResult fit(const DatasetSplit& split, const ModelConfig& model_config,
              const TrainConfig& train_config, const Tensor<double>& token_spectral) {
  train_config.validate();
  if (split.train.empty() || split.validation.empty() || split.test.empty()) {
    throw Error(ErrorKind::Split, "fit: every split must be non-empty");
  }
  const std::uint64_t seed = train_config.seed;
  Model<float> model = Model<float>::initialize(model_config, derive_seed(seed, 1), token_spectral);
  Rng shuffle_rng(derive_seed(seed, 2));
  Rng dropout_rng(derive_seed(seed, 3));
  AdamW<float> optimizer(train_config.adamw());
  auto params = model.params().all();

  std::vector<const EncodedTrace*> order;
  order.reserve(split.train.size());
  for (const auto& t : split.train) order.push_back(&t);

  FitResult result;
  result.initial_train_loss = evaluate_loss(model, split.train);
  result.best_val_loss = std::numeric_limits<double>::infinity();
  result.best_params = model.params();

  const auto batch_size = static_cast<std::size_t>(train_config.batch_size);
  int stale = 0;
  for (int epoch = 0; epoch < train_config.epochs; ++epoch) {
    const double lr = step_lr(train_config.lr, train_config.gamma, train_config.step_epochs, epoch);
    shuffle_rng.shuffle(std::span(order));

    double epoch_sum = 0.0;
    std::size_t epoch_count = 0;
    for (std::size_t start = 0; start < order.size(); start += batch_size) {
      const std::size_t end = std::min(order.size(), start + batch_size);
      std::span<const EncodedTrace* const> batch(order.data() + start, end - start);
      auto [sum, count] = batch_gradient(model, batch, true, &dropout_rng);
      if (!std::isfinite(sum)) {
        throw Error(ErrorKind::Numeric, "training diverged at epoch " +
                                            std::to_string(epoch + 1) + " (loss is not finite)");
      }
      optimizer.step(params, lr);
      epoch_sum += sum;
      epoch_count += count;
    }

    const double val = evaluate_loss(model, split.validation);
    if (!std::isfinite(val)) {
      throw Error(ErrorKind::Numeric,
                  "validation loss is not finite after epoch " + std::to_string(epoch + 1));
    }
    const double train_loss = epoch_count ? epoch_sum / static_cast<double>(epoch_count) : 0.0;
    result.history.push_back({epoch + 1, lr, train_loss, val});
    result.epochs_run = epoch + 1;
    spdlog::debug("epoch {} lr {:.6g} train {:.5f} val {:.5f}", epoch + 1, lr, train_loss, val);

    if (val < result.best_val_loss) {
      result.best_val_loss = val;
      result.best_epoch = epoch + 1;
      result.best_params = model.params();
      stale = 0;
    } else if (++stale >= train_config.patience) {
      break;
    }
  }

  Model<float> best(model_config, result.best_params, model.token_spectral());
  result.test = accuracy_at_k(best, split.test);
  return result;
}

RunSummary run_many(int n_fits, std::uint64_t base_seed, std::span<const EncodedTrace> traces,
                    const ModelConfig& model_config, const TrainConfig& train_config,
                    const Tensor<double>& token_spectral, int workers) {
  if (n_fits < 1) throw Error(ErrorKind::Parameter, "run_many: n_fits must be >= 1");
  const std::vector<EncodedTrace> corpus(traces.begin(), traces.end());

  RunSummary summary;
  summary.fits.resize(static_cast<std::size_t>(n_fits));
  std::vector<std::exception_ptr> errors(summary.fits.size());
  std::atomic<std::size_t> next{0};

  auto worker = [&] {
    for (std::size_t i = next++; i < summary.fits.size(); i = next++) {
      try {
        const std::uint64_t seed = base_seed + i;
        TrainConfig tc = train_config;
        tc.seed = seed;
        auto split = split_dataset(corpus, seed);
        summary.fits[i] = {static_cast<int>(i), seed,
                           fit(split, model_config, tc, token_spectral)};
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const int threads = std::clamp(workers, 1, n_fits);
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  std::vector<EvalReport> reports;
  double val_sum = 0.0;
  for (const auto& f : summary.fits) {
    reports.push_back(f.result.test);
    val_sum += f.result.best_val_loss;
  }
  summary.aggregate = aggregate_runs(reports);
  summary.mean_val_loss = val_sum / static_cast<double>(n_fits);
  return summary;
}

void TrialConfig::apply(ModelConfig& model, TrainConfig& train) const {
  model.d_model = embedding;
  model.hidden = hidden;
  model.heads = heads;
  model.layers = layers;
  model.dropout = dropout;
  model.pe.k = spe_k;
  train.gamma = gamma;
  train.lr = lr;
}

TrialConfig sample_trial(const SearchSpace& space, Rng& rng) {
  auto pick = [&rng](const std::vector<int>& values) {
    return values[static_cast<std::size_t>(rng.below(values.size()))];
  };
  TrialConfig t;
  t.embedding = pick(space.embedding);
  t.hidden = pick(space.hidden);
  t.heads = pick(space.heads);
  t.layers = pick(space.layers);
  t.spe_k = pick(space.spe_k);
  t.dropout = rng.uniform(space.dropout_min, space.dropout_max);
  t.gamma = rng.uniform(space.gamma_min, space.gamma_max);
  t.lr = std::exp(rng.uniform(std::log(space.lr_min), std::log(space.lr_max)));
  // exp(log(x)) can land one ulp outside the range.
  t.lr = std::clamp(t.lr, space.lr_min, space.lr_max);
  return t;
}

bool contains(const SearchSpace& space, const TrialConfig& t) {
  auto in = [](const std::vector<int>& values, int v) {
    return std::find(values.begin(), values.end(), v) != values.end();
  };
  return in(space.embedding, t.embedding) && in(space.hidden, t.hidden) &&
         in(space.heads, t.heads) && in(space.layers, t.layers) && in(space.spe_k, t.spe_k) &&
         t.dropout >= space.dropout_min && t.dropout <= space.dropout_max &&
         t.gamma >= space.gamma_min && t.gamma <= space.gamma_max && t.lr >= space.lr_min &&
         t.lr <= space.lr_max && t.embedding % t.heads == 0;
}

SearchResult random_search(const SearchSpace& space, int budget, std::uint64_t seed,
                           const DatasetSplit& split, const ModelConfig& base_model,
                           const TrainConfig& base_train, const Tensor<double>& token_spectral) {
  if (budget < 1) throw Error(ErrorKind::Parameter, "random_search: budget must be >= 1");
  Rng rng(seed);
  SearchResult out;
  double best = std::numeric_limits<double>::infinity();
  for (int i = 0; i < budget; ++i) {
    Trial trial;
    trial.index = i;
    trial.config = sample_trial(space, rng);
    ModelConfig mc = base_model;
    TrainConfig tc = base_train;
    trial.config.apply(mc, tc);
    tc.seed = derive_seed(seed, static_cast<std::uint64_t>(i));

    Tensor<double> spectral = token_spectral;
    if (mc.pe.mode == PeMode::Structural && spectral.cols() != static_cast<std::size_t>(mc.pe.k)) {
      // The sampled k selects the leading columns of a wider table, zero-filled when narrower.
      Tensor<double> resized(spectral.rows(), static_cast<std::size_t>(mc.pe.k));
      for (std::size_t r = 0; r < spectral.rows(); ++r) {
        for (std::size_t c = 0; c < std::min(resized.cols(), spectral.cols()); ++c) {
          resized(r, c) = spectral(r, c);
        }
      }
      spectral = std::move(resized);
    }

    FitResult r = fit(split, mc, tc, spectral);
    trial.val_loss = r.best_val_loss;
    trial.test = r.test;
    spdlog::info("trial {}: emb {} hidden {} heads {} layers {} lr {:.5g} -> val {:.5f}", i,
                 mc.d_model, mc.hidden, mc.heads, mc.layers, tc.lr, trial.val_loss);
    if (trial.val_loss < best) {
      best = trial.val_loss;
      out.best = out.trials.size();
      out.best_model = mc;
      out.best_train = tc;
      out.best_train.seed = base_train.seed;
    }
    out.trials.push_back(std::move(trial));
  }
  return out;
}

void write_trial_log(const std::filesystem::path& path, std::span<const Trial> trials) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  csv::write_row(out, {"trial", "emb", "hidden", "heads", "layers", "dropout", "gamma", "lr",
                       "spe_k", "val_loss", "acc1", "acc3", "acc5"});
  auto num = [](double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return std::string(buf);
  };
  auto acc = [&](const Trial& t, int k) {
    auto it = t.test.accuracy.find(k);
    return it == t.test.accuracy.end() ? std::string() : num(it->second);
  };
  for (const auto& t : trials) {
    const auto& c = t.config;
    csv::write_row(out, {std::to_string(t.index), std::to_string(c.embedding),
                         std::to_string(c.hidden), std::to_string(c.heads),
                         std::to_string(c.layers), num(c.dropout), num(c.gamma), num(c.lr),
                         std::to_string(c.spe_k), num(t.val_loss), acc(t, 1), acc(t, 3),
                         acc(t, 5)});
  }
}

template std::pair<double, std::size_t> batch_gradient<float>(
    Model<float>&, std::span<const EncodedTrace* const>, bool, Rng*, bool);
template std::pair<double, std::size_t> batch_gradient<double>(
    Model<double>&, std::span<const EncodedTrace* const>, bool, Rng*, bool);

}  // namespace ppm
