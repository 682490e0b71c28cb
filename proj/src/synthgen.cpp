#include "ppm/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>

#include "ppm/errors.hpp"
#include "ppm/rng.hpp"

namespace ppm {

namespace {

std::string type_name(int t) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "T%02d", t);
  return buf;
}

std::vector<double> tempered_softmax(std::vector<double> logits, double temperature) {
  const double t = std::max(temperature, 1e-6);
  const double mx = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (auto& l : logits) {
    l = std::exp((l - mx) / t);
    z += l;
  }
  for (auto& l : logits) l /= z;
  return logits;
}

std::size_t draw(const std::vector<double>& probs, Rng& rng) {
  double u = rng.uniform();
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (u < probs[i]) return i;
    u -= probs[i];
  }
  return probs.size() - 1;
}

}  // namespace

void SynthConfig::validate() const {
  auto fail = [](const std::string& m) { throw Error(ErrorKind::Config, "synth: " + m); };
  if (n_types < 2) fail("n_types must be >= 2");
  if (activities_per_type < 1) fail("activities_per_type must be >= 1");
  if (n_traces < 1) fail("n_traces must be >= 1");
  if (min_length < 1) fail("min_length must be >= 1");
  if (max_length < min_length) fail("max_length must be >= min_length");
  if (!(length_std > 0.0)) fail("length_std must be > 0");
  if (!(length_outlier_fraction >= 0.0 && length_outlier_fraction <= 1.0)) {
    fail("length_outlier_fraction must lie in [0, 1]");
  }
  if (!(temperature >= 0.0)) fail("temperature must be >= 0");
}

OntologyGraph gen_ontology(const SynthConfig& config) {
  config.validate();
  std::vector<OntologyNode> nodes;
  std::vector<std::pair<std::string, std::string>> edges;
  for (int t = 0; t < config.n_types; ++t) nodes.push_back({type_name(t), NodeKind::Type});
  for (int t = 0; t < config.n_types; ++t) {
    for (int a = 0; a < config.activities_per_type; ++a) {
      nodes.push_back({type_name(t) + "-A" + std::to_string(a), NodeKind::Activity});
    }
  }
  const int ring_edges = config.n_types == 2 ? 1 : config.n_types;
  for (int t = 0; t < ring_edges; ++t) {
    edges.emplace_back(type_name(t), type_name((t + 1) % config.n_types));
  }
  for (int t = 0; t < config.n_types; ++t) {
    for (int a = 0; a < config.activities_per_type; ++a) {
      edges.emplace_back(type_name(t), type_name(t) + "-A" + std::to_string(a));
    }
  }
  return OntologyGraph::create(std::move(nodes), edges);
}

std::vector<Trace> gen_traces(const SynthConfig& config, const OntologyGraph& graph) {
  config.validate();

  // Activities grouped by the type node they hang off.
  std::vector<std::size_t> type_nodes;
  for (std::size_t i = 0; i < graph.node_count(); ++i) {
    if (graph.nodes()[i].kind == NodeKind::Type) type_nodes.push_back(i);
  }
  std::vector<std::vector<std::string>> members(type_nodes.size());
  for (auto [a, b] : graph.edges()) {
    for (std::size_t t = 0; t < type_nodes.size(); ++t) {
      const std::size_t other = a == type_nodes[t] ? b : b == type_nodes[t] ? a : SIZE_MAX;
      if (other != SIZE_MAX && graph.nodes()[other].kind == NodeKind::Activity) {
        members[t].push_back(graph.nodes()[other].name);
      }
    }
  }
  std::erase_if(members, [](const auto& m) { return m.empty(); });
  if (members.size() < 2) throw Error(ErrorKind::Config, "synth: need two populated types");
  const std::size_t n_types = members.size();

  Rng structure(derive_seed(config.seed, 0));
  std::vector<double> start_logits(n_types);
  for (auto& l : start_logits) l = structure.normal();
  const auto start = tempered_softmax(start_logits, config.temperature);
  std::vector<std::vector<double>> transition(n_types);
  for (std::size_t i = 0; i < n_types; ++i) {
    std::vector<double> logits(n_types);
    for (auto& l : logits) l = structure.normal();
    logits[i] += config.type_affinity;
    transition[i] = tempered_softmax(logits, config.temperature);
  }

  Rng rng(derive_seed(config.seed, 1));
  auto sample_length = [&] {
    if (rng.uniform() < config.length_outlier_fraction) {
      return config.min_length +
             static_cast<int>(rng.below(static_cast<std::uint64_t>(config.max_length -
                                                                   config.min_length + 1)));
    }
    for (;;) {
      const long len = std::lround(config.length_mean + config.length_std * rng.normal());
      if (len >= config.min_length && len <= config.max_length) return static_cast<int>(len);
    }
  };

  std::vector<Trace> traces;
  traces.reserve(static_cast<std::size_t>(config.n_traces));
  const int width = static_cast<int>(std::to_string(config.n_traces).size());
  std::vector<int> counts(n_types);
  for (int c = 0; c < config.n_traces; ++c) {
    char id[32];
    std::snprintf(id, sizeof id, "case_%0*d", width, c);
    Trace trace{id, {}};
    const int length = sample_length();
    std::fill(counts.begin(), counts.end(), 0);
    for (int step = 0; step < length; ++step) {
      std::size_t type;
      if (step == 0) {
        type = draw(start, rng);
      } else {
        const auto dominant = static_cast<std::size_t>(
            std::max_element(counts.begin(), counts.end()) - counts.begin());
        type = draw(transition[dominant], rng);
      }
      ++counts[type];
      const auto& acts = members[type];
      trace.activities.push_back(acts[rng.below(acts.size())]);
    }
    traces.push_back(std::move(trace));
  }
  return traces;
}

}  // namespace ppm
