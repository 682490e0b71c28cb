#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "ppm/event_log.hpp"
#include "ppm/tensor.hpp"

namespace ppm {

enum class NodeKind { Activity, Type };

std::string_view to_string(NodeKind kind);

struct OntologyNode {
  std::string name;
  NodeKind kind = NodeKind::Activity;
};

/// Undirected, simple, connected graph of activity and activity-type nodes.
/// Construction validates; an existing instance always satisfies the
/// invariants.
class OntologyGraph {
 public:
  using Edge = std::pair<std::size_t, std::size_t>;

  /// Throws ErrorKind::Format for unknown/duplicate names, self-loops and
  /// duplicate edges; ErrorKind::Connectivity if the graph is disconnected
  /// (the message lists every component).
  static OntologyGraph create(std::vector<OntologyNode> nodes,
                              const std::vector<std::pair<std::string, std::string>>& edges);

  std::size_t node_count() const { return nodes_.size(); }
  std::size_t edge_count() const { return edges_.size(); }
  const std::vector<OntologyNode>& nodes() const { return nodes_; }
  const std::vector<Edge>& edges() const { return edges_; }
  std::optional<std::size_t> index_of(std::string_view name) const;

  void save(const std::filesystem::path& path) const;

 private:
  std::vector<OntologyNode> nodes_;
  std::vector<Edge> edges_;
  std::unordered_map<std::string, std::size_t> index_;
};

OntologyGraph parse_ontology(const std::filesystem::path& path);
OntologyGraph parse_ontology_json(std::string_view text);

/// Connected components as lists of node indices, ordered by smallest member.
std::vector<std::vector<std::size_t>> connected_components(
    std::size_t node_count, const std::vector<std::pair<std::size_t, std::size_t>>& edges);

struct LaplacianFactorization {
  Tensor<double> delta;              // I - D^-1/2 A D^-1/2
  std::vector<double> eigenvalues;   // ascending
  Tensor<double> eigenvectors;       // orthonormal columns
};

LaplacianFactorization build_laplacian(const OntologyGraph& graph);

/// Spectral node coordinates: row i holds eigenvector columns 1..k of node i
/// (column 0, the trivial eigenvector, is skipped). Each column's sign is
/// fixed so that its largest-magnitude entry is positive.
class NodeEmbeddingTable {
 public:
  NodeEmbeddingTable() = default;
  NodeEmbeddingTable(std::vector<OntologyNode> nodes, Tensor<double> vectors);

  std::size_t k() const { return vectors_.cols(); }
  std::size_t node_count() const { return nodes_.size(); }
  const std::vector<OntologyNode>& nodes() const { return nodes_; }
  const Tensor<double>& vectors() const { return vectors_; }

  /// Null when the name is not a graph node.
  std::optional<std::span<const double>> find(std::string_view name) const;

  /// node,kind,c1..ck with full double precision.
  void save_csv(const std::filesystem::path& path) const;
  static NodeEmbeddingTable load_csv(const std::filesystem::path& path);

 private:
  std::vector<OntologyNode> nodes_;
  Tensor<double> vectors_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Throws ErrorKind::Parameter for k < 1. Components beyond n-1 are zero.
NodeEmbeddingTable node_embeddings(const LaplacianFactorization& fact, const OntologyGraph& graph,
                                   int k);

/// Spectral vector for a token: the node's row for activities present in the
/// graph, zeros for PAD/SOS/EOS and for activities the ontology lacks (the
/// latter with a warning).
std::vector<double> embedding_for_token(const NodeEmbeddingTable& table, const Vocabulary& vocab,
                                        int token_id);

}  // namespace ppm
