#include "ppm/event_log.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <unordered_set>

#include "json.hpp"
#include "ppm/csv.hpp"
#include "ppm/errors.hpp"
#include "ppm/rng.hpp"

namespace ppm {

namespace {

const std::string kSpecialNames[] = {"<pad>", "<sos>", "<eos>"};

std::size_t column_index(const csv::Row& header, const std::string& name) {
  auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) {
    throw Error(ErrorKind::Format, "event log: missing column '" + name + "'");
  }
  return static_cast<std::size_t>(it - header.begin());
}

std::optional<double> parse_number(const std::string& s) {
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) return std::nullopt;
  return value;
}

}  // namespace

Vocabulary Vocabulary::from_names(std::vector<std::string> names) {
  Vocabulary vocab;
  vocab.ids_.reserve(names.size());
  for (std::size_t i = 0; i < names.size(); ++i) {
    auto [_, inserted] = vocab.ids_.emplace(names[i], static_cast<int>(i) + kFirstActivity);
    if (!inserted) {
      throw Error(ErrorKind::Vocabulary, "vocabulary: duplicate activity '" + names[i] + "'");
    }
  }
  vocab.names_ = std::move(names);
  return vocab;
}

std::optional<int> Vocabulary::find(std::string_view name) const {
  auto it = ids_.find(std::string(name));
  if (it == ids_.end()) return std::nullopt;
  return it->second;
}

int Vocabulary::id_of(std::string_view name) const {
  if (auto id = find(name)) return *id;
  throw Error(ErrorKind::Vocabulary, "vocabulary: unknown activity '" + std::string(name) + "'");
}

const std::string& Vocabulary::name_of(int id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= size()) {
    throw Error(ErrorKind::Index, "vocabulary: token id " + std::to_string(id) + " out of range");
  }
  if (is_special(id)) return kSpecialNames[id];
  return names_[static_cast<std::size_t>(id - kFirstActivity)];
}

void Vocabulary::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  out << nlohmann::json{{"names", names_}}.dump(2) << '\n';
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot read " + path.string());
  try {
    auto doc = nlohmann::json::parse(in);
    return from_names(doc.at("names").get<std::vector<std::string>>());
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Format, path.string() + ": " + e.what());
  }
}

std::vector<Trace> parse_event_log(const std::filesystem::path& path, const CsvDescriptor& format) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot read " + path.string());
  return parse_event_log(in, format);
}

std::vector<Trace> parse_event_log(std::istream& in, const CsvDescriptor& format) {
  auto rows = csv::read(in);
  // A lone empty field is a blank line.
  std::erase_if(rows, [](const csv::Row& r) { return r.size() == 1 && r[0].empty(); });
  if (rows.empty()) throw Error(ErrorKind::EmptyLog, "event log: file is empty");

  const csv::Row& header = rows.front();
  const std::size_t case_col = column_index(header, format.case_column);
  const std::size_t act_col = column_index(header, format.activity_column);
  const std::size_t order_col = column_index(header, format.order_column);
  const std::size_t needed = std::max({case_col, act_col, order_col}) + 1;

  if (rows.size() == 1) throw Error(ErrorKind::EmptyLog, "event log: header without events");

  struct Event {
    std::string activity;
    std::string order;
  };
  std::vector<std::string> case_order;
  std::unordered_map<std::string, std::vector<Event>> events;
  bool numeric_order = true;

  for (std::size_t r = 1; r < rows.size(); ++r) {
    csv::Row& row = rows[r];
    if (row.size() < needed) {
      throw Error(ErrorKind::Format, "event log: row " + std::to_string(r + 1) + " has " +
                                         std::to_string(row.size()) + " fields");
    }
    numeric_order = numeric_order && parse_number(row[order_col]).has_value();
    auto [it, inserted] = events.try_emplace(row[case_col]);
    if (inserted) case_order.push_back(row[case_col]);
    it->second.push_back({std::move(row[act_col]), std::move(row[order_col])});
  }

  std::vector<Trace> traces;
  traces.reserve(case_order.size());
  for (const auto& case_id : case_order) {
    auto& list = events[case_id];
    if (numeric_order) {
      std::stable_sort(list.begin(), list.end(), [](const Event& a, const Event& b) {
        return *parse_number(a.order) < *parse_number(b.order);
      });
    } else {
      std::stable_sort(list.begin(), list.end(),
                       [](const Event& a, const Event& b) { return a.order < b.order; });
    }
    Trace trace{case_id, {}};
    trace.activities.reserve(list.size());
    for (auto& e : list) trace.activities.push_back(std::move(e.activity));
    traces.push_back(std::move(trace));
  }
  return traces;
}

void write_event_log(const std::filesystem::path& path, std::span<const Trace> traces) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  csv::write_row(out, {"case_id", "activity", "order"});
  for (const auto& trace : traces) {
    for (std::size_t i = 0; i < trace.activities.size(); ++i) {
      csv::write_row(out, {trace.case_id, trace.activities[i], std::to_string(i + 1)});
    }
  }
  if (!out) throw Error(ErrorKind::Io, "write failed: " + path.string());
}

Vocabulary build_vocabulary(std::span<const Trace> traces) {
  std::vector<std::string> names;
  std::unordered_set<std::string> seen;
  for (const auto& trace : traces) {
    for (const auto& activity : trace.activities) {
      if (seen.insert(activity).second) names.push_back(activity);
    }
  }
  return Vocabulary::from_names(std::move(names));
}

std::size_t default_max_length(std::span<const Trace> traces) {
  std::size_t longest = 0;
  for (const auto& t : traces) longest = std::max(longest, t.activities.size());
  return longest + 2;
}

EncodedTrace encode_trace(const Trace& trace, const Vocabulary& vocab, std::size_t max_length) {
  const std::size_t true_length = trace.activities.size() + 2;
  if (true_length > max_length) {
    throw Error(ErrorKind::Length, "trace '" + trace.case_id + "' has " +
                                       std::to_string(trace.activities.size()) +
                                       " activities; padded length is " +
                                       std::to_string(max_length));
  }
  EncodedTrace encoded;
  encoded.ids.assign(max_length, kPad);
  encoded.true_length = true_length;
  encoded.ids[0] = kSos;
  for (std::size_t i = 0; i < trace.activities.size(); ++i) {
    encoded.ids[i + 1] = vocab.id_of(trace.activities[i]);
  }
  encoded.ids[true_length - 1] = kEos;
  return encoded;
}

std::vector<EncodedTrace> encode_traces(std::span<const Trace> traces, const Vocabulary& vocab,
                                        std::size_t max_length) {
  std::vector<EncodedTrace> out;
  out.reserve(traces.size());
  for (const auto& t : traces) out.push_back(encode_trace(t, vocab, max_length));
  return out;
}

std::vector<std::string> decode_trace(const EncodedTrace& trace, const Vocabulary& vocab) {
  std::vector<std::string> names;
  for (int id : trace.ids) {
    if (!Vocabulary::is_special(id)) names.push_back(vocab.name_of(id));
  }
  return names;
}

DatasetSplit split_dataset(std::vector<EncodedTrace> traces, std::uint64_t seed) {
  if (traces.size() < 10) {
    throw Error(ErrorKind::Split,
                "split needs at least 10 traces, got " + std::to_string(traces.size()));
  }
  Rng rng(seed);
  rng.shuffle(std::span(traces));

  const std::size_t n = traces.size();
  const std::size_t n_holdout = n / 10;
  const std::size_t n_train = n - 2 * n_holdout;

  DatasetSplit split;
  split.seed = seed;
  auto first = std::make_move_iterator(traces.begin());
  split.train.assign(first, first + static_cast<std::ptrdiff_t>(n_train));
  split.validation.assign(first + static_cast<std::ptrdiff_t>(n_train),
                          first + static_cast<std::ptrdiff_t>(n_train + n_holdout));
  split.test.assign(first + static_cast<std::ptrdiff_t>(n_train + n_holdout),
                    std::make_move_iterator(traces.end()));
  return split;
}

TraceStats dataset_stats(std::span<const Trace> traces) {
  if (traces.empty()) throw Error(ErrorKind::EmptyLog, "stats: no traces");
  TraceStats stats;
  stats.trace_count = traces.size();
  stats.min = traces.front().activities.size();
  std::unordered_set<std::string_view> distinct;
  double sum = 0.0;
  for (const auto& t : traces) {
    const std::size_t len = t.activities.size();
    sum += static_cast<double>(len);
    stats.min = std::min(stats.min, len);
    stats.max = std::max(stats.max, len);
    for (const auto& a : t.activities) distinct.insert(a);
  }
  stats.activity_count = distinct.size();
  stats.mean = sum / static_cast<double>(traces.size());
  double sq = 0.0;
  for (const auto& t : traces) {
    const double d = static_cast<double>(t.activities.size()) - stats.mean;
    sq += d * d;
  }
  stats.stddev = std::sqrt(sq / static_cast<double>(traces.size()));
  return stats;
}

}  // namespace ppm
