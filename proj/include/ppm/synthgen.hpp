#pragma once

#include <cstdint>
#include <vector>

#include "ppm/event_log.hpp"
#include "ppm/ontology.hpp"

namespace ppm {

/// Synthetic corpus whose next activity depends on which activity types a
/// trace has already visited, not on their order.
struct SynthConfig {
  int n_types = 22;
  int activities_per_type = 4;
  int n_traces = 5000;
  int min_length = 2;
  int max_length = 25;
  double length_mean = 15.0;
  double length_std = 3.0;
  // Share of lengths drawn uniformly from [min_length, max_length] instead of
  // the truncated normal; keeps both endpoints reachable.
  double length_outlier_fraction = 0.05;
  // Softens the type-transition logits; near 0 the next type is a function
  // of the history.
  double temperature = 0.5;
  // Extra logit for staying on the dominant type.
  double type_affinity = 1.0;
  std::uint64_t seed = 0;

  /// Throws ErrorKind::Config.
  void validate() const;
};

/// Type nodes "T00".."T<n-1>" linked in a ring (a single edge for two
/// types); each type node links to its activities "T07-A0", "T07-A1", ...
OntologyGraph gen_ontology(const SynthConfig& config);

/// Each trace: sample a length, then repeatedly pick the next type from a
/// fixed random transition matrix row selected by the most frequent type so
/// far (lowest index on ties; a fixed start distribution for the first
/// event) and a uniform activity of that type.
std::vector<Trace> gen_traces(const SynthConfig& config, const OntologyGraph& graph);

}  // namespace ppm
