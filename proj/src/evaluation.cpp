#include "ppm/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "ppm/csv.hpp"
#include "ppm/errors.hpp"

namespace ppm {

namespace {

std::string format_number(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::ofstream open_for_write(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  return out;
}

}  // namespace

EvalReport accuracy_at_k(const ScoreFn& scores, std::span<const EncodedTrace> dataset,
                         const std::vector<int>& ks) {
  if (dataset.empty()) throw Error(ErrorKind::Evaluation, "accuracy_at_k: empty dataset");
  if (ks.empty()) throw Error(ErrorKind::Evaluation, "accuracy_at_k: no k values");
  for (int k : ks) {
    if (k < 1) throw Error(ErrorKind::Parameter, "accuracy_at_k: k must be >= 1");
  }

  std::map<int, std::size_t> hits;
  std::map<std::size_t, std::size_t> prefix_hits;
  EvalReport report;
  for (const auto& trace : dataset) {
    // Positions past EOS only have PAD targets; by causality they cannot
    // influence earlier rows, so the sequence is cut at EOS.
    const std::size_t n = trace.true_length - 1;
    std::span<const int> inputs(trace.ids.data(), n);
    Tensor<float> s = scores(inputs);
    if (s.rows() != n) throw Error(ErrorKind::Shape, "accuracy_at_k: score rows != inputs");
    for (std::size_t i = 0; i < n; ++i) {
      const int target = trace.ids[i + 1];
      if (target == kPad || target == kSos) continue;
      auto ranked = rank_next_tokens<float>(s.row(i));
      std::size_t rank = 0;
      while (rank < ranked.size() && ranked[rank].first != target) ++rank;
      for (int k : ks) {
        if (rank < static_cast<std::size_t>(k)) ++hits[k];
      }
      ++report.positions;
      ++report.prefix_counts[i];
      if (rank == 0) ++prefix_hits[i];
    }
  }
  if (report.positions == 0) throw Error(ErrorKind::Evaluation, "accuracy_at_k: no positions");
  for (int k : ks) {
    report.accuracy[k] =
        static_cast<double>(hits[k]) / static_cast<double>(report.positions);
  }
  for (auto [len, count] : report.prefix_counts) {
    report.by_prefix_length[len] =
        static_cast<double>(prefix_hits[len]) / static_cast<double>(count);
  }
  return report;
}

EvalReport accuracy_at_k(const Model<float>& model, std::span<const EncodedTrace> dataset,
                         const std::vector<int>& ks) {
  return accuracy_at_k(
      [&model](std::span<const int> inputs) { return model.forward(inputs, false, nullptr); },
      dataset, ks);
}

Aggregate aggregate_runs(std::span<const EvalReport> reports) {
  if (reports.empty()) throw Error(ErrorKind::Aggregation, "aggregate_runs: no reports");
  Aggregate agg;
  agg.runs = reports.size();
  for (const auto& r : reports) {
    if (r.accuracy.size() != reports.front().accuracy.size() ||
        !std::equal(r.accuracy.begin(), r.accuracy.end(), reports.front().accuracy.begin(),
                    [](const auto& a, const auto& b) { return a.first == b.first; })) {
      throw Error(ErrorKind::Aggregation, "aggregate_runs: reports use different k sets");
    }
  }
  const double n = static_cast<double>(reports.size());
  for (const auto& [k, _] : reports.front().accuracy) {
    double sum = 0.0;
    for (const auto& r : reports) sum += r.accuracy.at(k);
    const double mean = sum / n;
    double sq = 0.0;
    for (const auto& r : reports) sq += (r.accuracy.at(k) - mean) * (r.accuracy.at(k) - mean);
    agg.accuracy[k] = {mean, std::sqrt(sq / n)};
  }
  return agg;
}

void write_results_csv(const std::filesystem::path& path, std::span<const ResultRow> rows) {
  auto out = open_for_write(path);
  csv::write_row(out, {"method", "model_size", "k", "mean", "std"});
  for (const auto& row : rows) {
    for (const auto& [k, stats] : row.aggregate.accuracy) {
      csv::write_row(out, {row.method, std::to_string(row.model_size), std::to_string(k),
                           format_number(stats.mean), format_number(stats.std)});
    }
  }
}

void write_table_csv(const std::filesystem::path& path, std::span<const ResultRow> rows) {
  auto out = open_for_write(path);
  csv::Row header{"method", "model_size"};
  if (!rows.empty()) {
    for (const auto& [k, _] : rows.front().aggregate.accuracy) {
      header.push_back("acc@" + std::to_string(k));
    }
  }
  csv::write_row(out, header);
  for (const auto& row : rows) {
    csv::Row cells{row.method, std::to_string(row.model_size)};
    for (const auto& [k, stats] : row.aggregate.accuracy) {
      char buf[64];
      std::snprintf(buf, sizeof buf, "%.1f±%.1f", 100.0 * stats.mean, 100.0 * stats.std);
      cells.emplace_back(buf);
    }
    csv::write_row(out, cells);
  }
}

}  // namespace ppm
