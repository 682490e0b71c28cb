#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "ppm/event_log.hpp"
#include "ppm/model.hpp"

namespace ppm {

struct EvalReport {
  std::map<int, double> accuracy;  // k -> accuracy@k in [0, 1]
  std::size_t positions = 0;       // scored (prefix, next) pairs
  // Number of activities already seen -> accuracy@1 at that point.
  std::map<std::size_t, double> by_prefix_length;
  std::map<std::size_t, std::size_t> prefix_counts;
};

/// Scores for every position of an input sequence: row i ranks the token
/// that follows inputs[0..i]. Only relative order within a row matters.
using ScoreFn = std::function<Tensor<float>(std::span<const int> inputs)>;

/// Micro-averaged accuracy@k over every position whose target is a real
/// next token (an activity or EOS). Throws ErrorKind::Evaluation on an
/// empty dataset.
EvalReport accuracy_at_k(const ScoreFn& scores, std::span<const EncodedTrace> dataset,
                         const std::vector<int>& ks = {1, 3, 5});
EvalReport accuracy_at_k(const Model<float>& model, std::span<const EncodedTrace> dataset,
                         const std::vector<int>& ks = {1, 3, 5});

struct MetricStats {
  double mean = 0.0;
  double std = 0.0;  // population
};

struct Aggregate {
  std::map<int, MetricStats> accuracy;  // k -> stats
  std::size_t runs = 0;
};

/// Throws ErrorKind::Aggregation for an empty list or differing k sets.
Aggregate aggregate_runs(std::span<const EvalReport> reports);

struct ResultRow {
  std::string method;  // none | sin | spe
  int model_size = 0;
  Aggregate aggregate;
};

/// method,model_size,k,mean,std
void write_results_csv(const std::filesystem::path& path, std::span<const ResultRow> rows);
/// method,model_size,acc@1,acc@3,... with cells "mean±std" in percent.
void write_table_csv(const std::filesystem::path& path, std::span<const ResultRow> rows);

}  // namespace ppm
