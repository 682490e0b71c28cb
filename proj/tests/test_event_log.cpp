#include <gtest/gtest.h>

#include <algorithm>
#include <set>
#include <sstream>

#include "ppm/errors.hpp"
#include "ppm/event_log.hpp"
#include "test_util.hpp"

namespace ppm {
namespace {

std::vector<Trace> parse(const std::string& text, const CsvDescriptor& format = {}) {
  std::istringstream in(text);
  return parse_event_log(in, format);
}

template <typename F>
ErrorKind kind_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorKind::Io;
}

EncodedTrace encoded(std::size_t n) {
  return {std::vector<int>(n + 2, kFirstActivity), n + 2};
}

TEST(ParseEventLog, GroupsByCase) {
  auto traces = parse("case_id,activity,order\nc1,a,1\nc1,b,2\nc2,a,1\n");
  ASSERT_EQ(traces.size(), 2u);
  EXPECT_EQ(traces[0].case_id, "c1");
  EXPECT_EQ(traces[0].activities, (std::vector<std::string>{"a", "b"}));
  EXPECT_EQ(traces[1].case_id, "c2");
  EXPECT_EQ(traces[1].activities, (std::vector<std::string>{"a"}));
}

TEST(ParseEventLog, SortsBySortKey) {
  auto traces = parse("case_id,activity,order\nc1,b,2\nc1,a,1\n");
  EXPECT_EQ(traces[0].activities, (std::vector<std::string>{"a", "b"}));
}

TEST(ParseEventLog, NumericKeysCompareAsNumbers) {
  auto traces = parse("case_id,activity,order\nc1,ten,10\nc1,nine,9\n");
  EXPECT_EQ(traces[0].activities, (std::vector<std::string>{"nine", "ten"}));
}

TEST(ParseEventLog, TimestampKeysAndTiesKeepFileOrder) {
  auto traces = parse(
      "case_id,activity,order\n"
      "c1,late,2024-01-02T10:00:00\n"
      "c1,first,2024-01-01T09:00:00\n"
      "c1,second,2024-01-01T09:00:00\n");
  EXPECT_EQ(traces[0].activities, (std::vector<std::string>{"first", "second", "late"}));
}

TEST(ParseEventLog, CustomColumnsAndExtraColumns) {
  auto traces = parse("ts,patient,step,resource\n1,p1,x,r\n2,p1,y,r\n",
                      {"patient", "step", "ts"});
  ASSERT_EQ(traces.size(), 1u);
  EXPECT_EQ(traces[0].activities, (std::vector<std::string>{"x", "y"}));
}

TEST(ParseEventLog, Errors) {
  EXPECT_EQ(kind_of([] { parse("case_id,activity,order\n"); }), ErrorKind::EmptyLog);
  EXPECT_EQ(kind_of([] { parse(""); }), ErrorKind::EmptyLog);
  EXPECT_EQ(kind_of([] { parse("case_id,activity\nc1,a\n"); }), ErrorKind::Format);
  EXPECT_EQ(kind_of([] { parse_event_log("/nonexistent/log.csv"); }), ErrorKind::Io);
}

TEST(ParseEventLog, WriteThenParseRoundTrips) {
  test::TempDir dir("event_log_roundtrip");
  std::vector<Trace> traces{{"c1", {"a", "b,c", "a"}}, {"c2", {"\"q\""}}};
  write_event_log(dir / "log.csv", traces);
  auto back = parse_event_log(dir / "log.csv");
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].activities, traces[0].activities);
  EXPECT_EQ(back[1].activities, traces[1].activities);
}

TEST(Vocabulary, SpecialsAndFirstOccurrenceOrder) {
  std::vector<Trace> traces{{"c1", {"b", "a"}}, {"c2", {"a", "c"}}};
  auto vocab = build_vocabulary(traces);
  EXPECT_EQ(vocab.size(), 6u);
  EXPECT_EQ(vocab.id_of("b"), 3);
  EXPECT_EQ(vocab.id_of("a"), 4);
  EXPECT_EQ(vocab.id_of("c"), 5);
  EXPECT_EQ(vocab.name_of(kPad), "<pad>");
  EXPECT_EQ(vocab.name_of(kSos), "<sos>");
  EXPECT_EQ(vocab.name_of(kEos), "<eos>");
  for (int id = kFirstActivity; id < static_cast<int>(vocab.size()); ++id) {
    EXPECT_EQ(vocab.id_of(vocab.name_of(id)), id);
  }
}

TEST(Vocabulary, TwoActivitiesGiveSizeFive) {
  auto vocab = build_vocabulary(std::vector<Trace>{{"c", {"a", "b"}}});
  EXPECT_EQ(vocab.size(), 5u);
}

TEST(Vocabulary, EmptyNameIsOrdinary) {
  auto vocab = build_vocabulary(std::vector<Trace>{{"c", {"", "a"}}});
  EXPECT_EQ(vocab.size(), 5u);
  EXPECT_EQ(vocab.id_of(""), 3);
}

TEST(Vocabulary, DuplicatesAndUnknownsRejected) {
  EXPECT_EQ(kind_of([] { Vocabulary::from_names({"a", "a"}); }), ErrorKind::Vocabulary);
  auto vocab = Vocabulary::from_names({"a"});
  EXPECT_FALSE(vocab.find("zzz").has_value());
  EXPECT_EQ(kind_of([&] { vocab.id_of("zzz"); }), ErrorKind::Vocabulary);
}

TEST(Vocabulary, Deterministic) {
  std::vector<Trace> traces{{"c1", {"x", "y", "z"}}, {"c2", {"z", "w"}}};
  EXPECT_EQ(build_vocabulary(traces), build_vocabulary(traces));
}

TEST(Vocabulary, SaveLoad) {
  test::TempDir dir("vocab_save");
  auto vocab = Vocabulary::from_names({"b", "a", "with space"});
  vocab.save(dir / "vocab.json");
  EXPECT_EQ(Vocabulary::load(dir / "vocab.json"), vocab);
  EXPECT_NE(test::read_file(dir / "vocab.json").find("\"names\""), std::string::npos);
}

TEST(EncodeTrace, Layout) {
  auto vocab = Vocabulary::from_names({"a", "b"});
  auto enc = encode_trace({"c", {"a", "b"}}, vocab, 6);
  EXPECT_EQ(enc.ids, (std::vector<int>{1, 3, 4, 2, 0, 0}));
  EXPECT_EQ(enc.true_length, 4u);
}

TEST(EncodeTrace, Errors) {
  auto vocab = Vocabulary::from_names({"a"});
  EXPECT_EQ(kind_of([&] { encode_trace({"c", {"a", "a", "a", "a", "a"}}, vocab, 6); }),
            ErrorKind::Length);
  EXPECT_NO_THROW(encode_trace({"c", {"a", "a", "a", "a"}}, vocab, 6));
  EXPECT_EQ(kind_of([&] { encode_trace({"c", {"nope"}}, vocab, 6); }), ErrorKind::Vocabulary);
}

TEST(EncodeTrace, RoundTripProperty) {
  Rng rng(11);
  std::vector<std::string> names{"a", "b", "c", "d", ""};
  auto vocab = Vocabulary::from_names(names);
  for (int rep = 0; rep < 200; ++rep) {
    Trace t{"c", {}};
    const auto len = 1 + rng.below(10);
    for (std::size_t i = 0; i < len; ++i) t.activities.push_back(names[rng.below(names.size())]);
    auto enc = encode_trace(t, vocab, 12);
    ASSERT_EQ(enc.ids.size(), 12u);
    EXPECT_EQ(enc.ids[0], kSos);
    EXPECT_EQ(enc.ids[enc.true_length - 1], kEos);
    for (std::size_t i = enc.true_length; i < enc.ids.size(); ++i) EXPECT_EQ(enc.ids[i], kPad);
    EXPECT_EQ(decode_trace(enc, vocab), t.activities);
  }
}

TEST(EncodeTrace, DefaultMaxLength) {
  std::vector<Trace> traces{{"c1", {"a"}}, {"c2", {"a", "b", "c"}}};
  EXPECT_EQ(default_max_length(traces), 5u);
}

TEST(SplitDataset, Sizes) {
  for (std::uint64_t seed : {0u, 7u, 123u}) {
    std::vector<EncodedTrace> ten;
    for (int i = 0; i < 10; ++i) ten.push_back(encoded(i + 1));
    auto s = split_dataset(ten, seed);
    EXPECT_EQ(s.train.size(), 8u);
    EXPECT_EQ(s.validation.size(), 1u);
    EXPECT_EQ(s.test.size(), 1u);
  }
  std::vector<EncodedTrace> hundred(100, encoded(1));
  auto s = split_dataset(hundred, 1);
  EXPECT_EQ(s.train.size(), 80u);
  EXPECT_EQ(s.validation.size(), 10u);
  EXPECT_EQ(s.test.size(), 10u);
  std::vector<EncodedTrace> odd(19, encoded(1));
  s = split_dataset(odd, 1);
  EXPECT_EQ(s.train.size(), 17u);
  EXPECT_EQ(s.validation.size(), 1u);
  EXPECT_EQ(s.test.size(), 1u);
}

TEST(SplitDataset, TooFew) {
  EXPECT_EQ(kind_of([] { split_dataset(std::vector<EncodedTrace>(9, encoded(1)), 0); }),
            ErrorKind::Split);
}

TEST(SplitDataset, DeterministicPartition) {
  std::vector<EncodedTrace> traces;
  for (int i = 0; i < 57; ++i) traces.push_back(encoded(static_cast<std::size_t>(i + 1)));
  auto a = split_dataset(traces, 42);
  auto b = split_dataset(traces, 42);
  EXPECT_EQ(a.train, b.train);
  EXPECT_EQ(a.validation, b.validation);
  EXPECT_EQ(a.test, b.test);

  // Every trace is distinct by length, so the lengths identify members.
  std::multiset<std::size_t> seen;
  for (const auto* part : {&a.train, &a.validation, &a.test}) {
    for (const auto& t : *part) seen.insert(t.true_length);
  }
  std::multiset<std::size_t> expected;
  for (const auto& t : traces) expected.insert(t.true_length);
  EXPECT_EQ(seen, expected);

  auto c = split_dataset(traces, 43);
  EXPECT_NE(a.train, c.train);
}

TEST(DatasetStats, HandComputed) {
  std::vector<Trace> traces{{"c1", {"a", "b"}}, {"c2", {"a", "b", "c", "d"}}};
  auto s = dataset_stats(traces);
  EXPECT_DOUBLE_EQ(s.mean, 3.0);
  EXPECT_DOUBLE_EQ(s.stddev, 1.0);
  EXPECT_EQ(s.min, 2u);
  EXPECT_EQ(s.max, 4u);
  EXPECT_EQ(s.trace_count, 2u);
  EXPECT_EQ(s.activity_count, 4u);

  auto single = dataset_stats(std::vector<Trace>{{"c", {"a", "a", "a", "a", "a"}}});
  EXPECT_DOUBLE_EQ(single.mean, 5.0);
  EXPECT_DOUBLE_EQ(single.stddev, 0.0);
  EXPECT_EQ(kind_of([] { dataset_stats(std::vector<Trace>{}); }), ErrorKind::EmptyLog);
}

}  // namespace
}  // namespace ppm
