#include <gtest/gtest.h>

#include <chrono>
#include <cmath>
#include <sstream>

#include "cli.hpp"
#include "json.hpp"
#include "ppm/csv.hpp"
#include "ppm/event_log.hpp"
#include "test_util.hpp"

namespace ppm {
namespace {

using nlohmann::json;

struct Run {
  int code;
  std::string out;
};

Run run(std::vector<std::string> args) {
  testing::internal::CaptureStdout();
  testing::internal::CaptureStderr();
  const int code = cli::run(args);
  Run r{code, testing::internal::GetCapturedStdout()};
  testing::internal::GetCapturedStderr();
  return r;
}

std::vector<csv::Row> read_csv(const std::filesystem::path& p) {
  std::istringstream in(test::read_file(p));
  return csv::read(in);
}

// Small corpus shared by the command tests.
class CliTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new test::TempDir("cli");
    ASSERT_EQ(run({"synth", "--out", (dir_->path() / "data").string(), "--n_traces", "300",
                   "--n_types", "5", "--activities_per_type", "3", "--seed", "2"})
                  .code,
              0);
  }
  static void TearDownTestSuite() { delete dir_; }
  static std::string path(const std::string& leaf) { return (dir_->path() / leaf).string(); }
  static std::string log() { return path("data/log.csv"); }
  static std::string ontology() { return path("data/ontology.json"); }
  static std::vector<std::string> tiny_model() {
    return {"--d_model", "8", "--hidden", "8", "--heads", "2", "--layers", "1", "--spe_k", "4",
            "--epochs", "2"};
  }
  static test::TempDir* dir_;
};
test::TempDir* CliTest::dir_ = nullptr;

std::vector<std::string> operator+(std::vector<std::string> a, const std::vector<std::string>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

TEST_F(CliTest, SynthIsDeterministicAndReingests) {
  auto r = run({"synth", "--out", path("again"), "--n_traces", "300", "--n_types", "5",
                "--activities_per_type", "3", "--seed", "2"});
  ASSERT_EQ(r.code, 0);
  EXPECT_EQ(test::read_file(path("again/log.csv")), test::read_file(log()));
  EXPECT_EQ(test::read_file(path("again/ontology.json")), test::read_file(ontology()));

  auto traces = parse_event_log(log());
  EXPECT_EQ(traces.size(), 300u);
  EXPECT_NO_THROW(parse_ontology(ontology()));
  auto stats = dataset_stats(traces);
  char line[64];
  std::snprintf(line, sizeof line, "length mean: %.4f", stats.mean);
  EXPECT_NE(r.out.find(line), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("traces: 300"), std::string::npos);
}

TEST_F(CliTest, StatsOnToyAndEmptyFiles) {
  test::write_file(path("toy.csv"), "case_id,activity,order\nc1,a,1\nc1,b,2\nc2,a,1\nc2,b,2\nc2,c,3\nc2,d,4\n");
  auto r = run({"stats", "--log", path("toy.csv")});
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("length mean: 3.0000"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("length std: 1.0000"), std::string::npos);
  EXPECT_NE(r.out.find("length min: 2"), std::string::npos);
  EXPECT_NE(r.out.find("length max: 4"), std::string::npos);

  test::write_file(path("empty.csv"), "");
  EXPECT_EQ(run({"stats", "--log", path("empty.csv")}).code, 2);
  EXPECT_EQ(run({"stats"}).code, 1);
}

TEST_F(CliTest, TrainEvalRoundTrip) {
  const auto start = std::chrono::steady_clock::now();
  auto r = run(std::vector<std::string>{"train", "--log", log(), "--ontology", ontology(), "--pe",
                                        "none,sin,spe", "--n_fits", "2", "--out", path("train")} +
               tiny_model());
  ASSERT_EQ(r.code, 0);
  EXPECT_LT(std::chrono::steady_clock::now() - start, std::chrono::seconds(60));

  auto table = read_csv(path("train/aggregate.csv"));
  ASSERT_EQ(table.size(), 4u);
  EXPECT_EQ(table[0], (csv::Row{"method", "model_size", "acc@1", "acc@3", "acc@5"}));
  EXPECT_EQ(table[3][0], "spe");
  EXPECT_EQ(table[3][1], "8");

  auto metrics = json::parse(test::read_file(path("train/spe/metrics.json")));
  ASSERT_EQ(metrics.size(), 2u);
  for (const auto& m : metrics) {
    for (const char* key : {"fit", "seed", "val_loss", "acc@1", "acc@3", "acc@5"}) {
      EXPECT_TRUE(m.contains(key)) << key;
    }
    EXPECT_LE(m["acc@1"].get<double>(), m["acc@3"].get<double>());
    EXPECT_LE(m["acc@3"].get<double>(), m["acc@5"].get<double>());
  }
  const auto& best = metrics[0]["val_loss"].get<double>() <= metrics[1]["val_loss"].get<double>()
                         ? metrics[0]
                         : metrics[1];

  // The saved checkpoint on its own test split reproduces the training metrics.
  r = run({"eval", "--checkpoint", path("train/spe/checkpoint"), "--log", log(), "--out", path("eval")});
  ASSERT_EQ(r.code, 0);
  auto rows = read_csv(path("eval/eval.csv"));
  ASSERT_EQ(rows.size(), 4u);
  double prev = 0;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const double acc = std::stod(rows[i][1]);
    EXPECT_EQ(acc, best["acc@" + rows[i][0]].get<double>());
    EXPECT_GE(acc, prev);
    prev = acc;
  }
}

TEST_F(CliTest, EvalErrors) {
  EXPECT_EQ(run({"eval", "--checkpoint", path("missing"), "--log", log(), "--out", path("e")}).code, 2);
  ASSERT_EQ(run(std::vector<std::string>{"train", "--log", log(), "--pe", "none", "--n_fits", "1",
                                         "--out", path("t1")} + tiny_model())
                .code,
            0);
  test::write_file(path("foreign.csv"), "case_id,activity,order\nc1,unknown step,1\n");
  EXPECT_EQ(run({"eval", "--checkpoint", path("t1/none/checkpoint"), "--log", path("foreign.csv"),
                 "--split", "all", "--out", path("e")})
                .code,
            2);
}

TEST_F(CliTest, TuneWritesReusableConfig) {
  auto r = run(std::vector<std::string>{"tune", "--log", log(), "--ontology", ontology(), "--budget",
                                        "2", "--epochs", "1", "--out", path("tune")});
  ASSERT_EQ(r.code, 0);
  auto trials = read_csv(path("tune/trials.csv"));
  EXPECT_EQ(trials.size(), 3u);
  auto best = json::parse(test::read_file(path("tune/best_config.json")));
  EXPECT_EQ(best["pe"], "spe");
  r = run({"train", "--config", path("tune/best_config.json"), "--n_fits", "1", "--epochs", "1",
           "--out", path("retrain")});
  EXPECT_EQ(r.code, 0);
  auto table = read_csv(path("retrain/aggregate.csv"));
  EXPECT_EQ(table[1][1], std::to_string(best["d_model"].get<int>()));

  EXPECT_EQ(run({"tune", "--log", log(), "--budget", "0", "--out", path("tune0")}).code, 1);
}

TEST_F(CliTest, EncodeGraph) {
  test::write_file(path("k2.json"), R"({"nodes": [{"name": "a", "kind": "activity"},
      {"name": "b", "kind": "activity"}], "edges": [["a", "b"]]})");
  ASSERT_EQ(run({"encode-graph", "--ontology", path("k2.json"), "--k", "1", "--out", path("k2")}).code, 0);
  auto rows = read_csv(path("k2/embeddings.csv"));
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[0], (csv::Row{"node", "kind", "c1"}));
  EXPECT_NEAR(std::stod(rows[1][2]), 1 / std::sqrt(2.0), 1e-12);
  EXPECT_NEAR(std::stod(rows[2][2]), -1 / std::sqrt(2.0), 1e-12);

  const auto first = test::read_file(path("k2/embeddings.csv"));
  ASSERT_EQ(run({"encode-graph", "--ontology", path("k2.json"), "--k", "1", "--out", path("k2")}).code, 0);
  EXPECT_EQ(test::read_file(path("k2/embeddings.csv")), first);

  ASSERT_EQ(run({"encode-graph", "--ontology", ontology(), "--k", "6", "--out", path("syn")}).code, 0);
  EXPECT_EQ(read_csv(path("syn/embeddings.csv")).size(), 5u * 4 + 1);

  test::write_file(path("split.json"), R"({"nodes": [{"name": "a", "kind": "activity"},
      {"name": "b", "kind": "activity"}, {"name": "c", "kind": "activity"},
      {"name": "d", "kind": "activity"}], "edges": [["a", "b"], ["c", "d"]]})");
  testing::internal::CaptureStderr();
  const int code = cli::run({"encode-graph", "--ontology", path("split.json"), "--out", path("x")});
  const auto err = testing::internal::GetCapturedStderr();
  EXPECT_EQ(code, 2);
  EXPECT_NE(err.find("c"), std::string::npos);
}

TEST_F(CliTest, ConfigPrecedenceAndErrors) {
  test::write_file(path("cfg.json"), R"({"n_traces": 50, "n_types": 3, "seed": 9})");
  auto r = run({"synth", "--config", path("cfg.json"), "--n_traces", "40", "--out", path("cfg_out")});
  ASSERT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("traces: 40"), std::string::npos);

  test::write_file(path("bad.json"), R"({"no_such_key": 1})");
  EXPECT_EQ(run({"synth", "--config", path("bad.json"), "--out", path("x")}).code, 1);
  test::write_file(path("typed.json"), R"({"n_traces": "many"})");
  EXPECT_EQ(run({"synth", "--config", path("typed.json"), "--out", path("x")}).code, 1);
  EXPECT_EQ(run({"train", "--log", log(), "--pe", "rope", "--out", path("x")}).code, 1);
  EXPECT_EQ(run({"bogus"}).code, 1);
  EXPECT_EQ(run({"synth", "--d_model", "7", "--heads", "2", "--out", path("x"), "--n_traces", "10"}).code, 0);
  EXPECT_EQ(run(std::vector<std::string>{"train", "--log", log(), "--pe", "none", "--heads", "3",
                                         "--out", path("x")} + std::vector<std::string>{"--n_fits", "1"})
                .code,
            1);
}

TEST_F(CliTest, DivergenceExitsWithNumericCode) {
  auto r = run(std::vector<std::string>{"train", "--log", log(), "--pe", "none", "--n_fits", "1",
                                        "--out", path("diverge")} +
               tiny_model() + std::vector<std::string>{"--lr", "1e30", "--gamma", "1"});
  EXPECT_EQ(r.code, 3);
}

}  // namespace
}  // namespace ppm
