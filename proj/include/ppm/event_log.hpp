#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace ppm {

inline constexpr int kPad = 0;
inline constexpr int kSos = 1;
inline constexpr int kEos = 2;
inline constexpr int kFirstActivity = 3;

/// Activity name <-> token id. Ids 0..2 are PAD, SOS, EOS; activities start
/// at 3 in first-occurrence order.
class Vocabulary {
 public:
  Vocabulary() = default;

  /// Throws ErrorKind::Vocabulary on duplicate names.
  static Vocabulary from_names(std::vector<std::string> names);

  std::optional<int> find(std::string_view name) const;
  int id_of(std::string_view name) const;
  const std::string& name_of(int id) const;

  std::size_t size() const { return names_.size() + kFirstActivity; }
  std::size_t activity_count() const { return names_.size(); }
  const std::vector<std::string>& activity_names() const { return names_; }

  static bool is_special(int id) { return id < kFirstActivity; }

  void save(const std::filesystem::path& path) const;
  static Vocabulary load(const std::filesystem::path& path);

  bool operator==(const Vocabulary& other) const { return names_ == other.names_; }

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, int> ids_;
};

struct Trace {
  std::string case_id;
  std::vector<std::string> activities;
};

/// SOS, activity ids, EOS, then PAD up to the fixed length.
struct EncodedTrace {
  std::vector<int> ids;
  std::size_t true_length = 0;

  bool operator==(const EncodedTrace&) const = default;
};

struct DatasetSplit {
  std::vector<EncodedTrace> train;
  std::vector<EncodedTrace> validation;
  std::vector<EncodedTrace> test;
  std::uint64_t seed = 0;
};

/// Column mapping for CSV ingestion. The order column is compared
/// numerically when every value parses as a number, otherwise as a string
/// (which orders ISO-8601 timestamps correctly).
struct CsvDescriptor {
  std::string case_column = "case_id";
  std::string activity_column = "activity";
  std::string order_column = "order";
};

struct TraceStats {
  std::size_t trace_count = 0;
  std::size_t activity_count = 0;  // distinct activity names
  double mean = 0.0;
  double stddev = 0.0;  // population
  std::size_t min = 0;
  std::size_t max = 0;
};

std::vector<Trace> parse_event_log(const std::filesystem::path& path,
                                   const CsvDescriptor& format = {});
std::vector<Trace> parse_event_log(std::istream& in, const CsvDescriptor& format = {});

/// Writes traces as case_id,activity,order rows (order = 1-based index).
void write_event_log(const std::filesystem::path& path, std::span<const Trace> traces);

Vocabulary build_vocabulary(std::span<const Trace> traces);

/// Longest trace + 2 (room for SOS and EOS).
std::size_t default_max_length(std::span<const Trace> traces);

EncodedTrace encode_trace(const Trace& trace, const Vocabulary& vocab, std::size_t max_length);
std::vector<EncodedTrace> encode_traces(std::span<const Trace> traces, const Vocabulary& vocab,
                                        std::size_t max_length);

/// Activity names of an encoded trace with specials and padding removed.
std::vector<std::string> decode_trace(const EncodedTrace& trace, const Vocabulary& vocab);

/// Seeded shuffle, then 80/10/10 with rounding remainders going to train.
DatasetSplit split_dataset(std::vector<EncodedTrace> traces, std::uint64_t seed);

TraceStats dataset_stats(std::span<const Trace> traces);

}  // namespace ppm
