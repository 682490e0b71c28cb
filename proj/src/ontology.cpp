#include "ppm/ontology.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "json.hpp"
#include "ppm/csv.hpp"
#include "ppm/errors.hpp"
#include "ppm/jacobi.hpp"

namespace ppm {

namespace {

NodeKind parse_kind(const std::string& s) {
  if (s == "activity") return NodeKind::Activity;
  if (s == "type") return NodeKind::Type;
  throw Error(ErrorKind::Format, "ontology: unknown node kind '" + s + "'");
}

std::string format_double(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

}  // namespace

std::string_view to_string(NodeKind kind) {
  return kind == NodeKind::Activity ? "activity" : "type";
}

std::vector<std::vector<std::size_t>> connected_components(
    std::size_t node_count, const std::vector<std::pair<std::size_t, std::size_t>>& edges) {
  std::vector<std::size_t> parent(node_count);
  std::iota(parent.begin(), parent.end(), 0);
  auto root = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (auto [a, b] : edges) {
    auto ra = root(a), rb = root(b);
    if (ra != rb) parent[std::max(ra, rb)] = std::min(ra, rb);
  }
  std::vector<std::vector<std::size_t>> components;
  std::vector<std::size_t> slot(node_count, SIZE_MAX);
  for (std::size_t i = 0; i < node_count; ++i) {
    auto r = root(i);
    if (slot[r] == SIZE_MAX) {
      slot[r] = components.size();
      components.emplace_back();
    }
    components[slot[r]].push_back(i);
  }
  return components;
}

OntologyGraph OntologyGraph::create(
    std::vector<OntologyNode> nodes,
    const std::vector<std::pair<std::string, std::string>>& edges) {
  OntologyGraph g;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (!g.index_.emplace(nodes[i].name, i).second) {
      throw Error(ErrorKind::Format, "ontology: duplicate node '" + nodes[i].name + "'");
    }
  }
  g.nodes_ = std::move(nodes);
  if (g.nodes_.empty()) throw Error(ErrorKind::Format, "ontology: no nodes");

  std::set<Edge> seen;
  for (const auto& [a, b] : edges) {
    auto ia = g.index_of(a);
    auto ib = g.index_of(b);
    if (!ia || !ib) {
      throw Error(ErrorKind::Format,
                  "ontology: edge references unknown node '" + (ia ? b : a) + "'");
    }
    if (*ia == *ib) throw Error(ErrorKind::Format, "ontology: self-loop on '" + a + "'");
    Edge e{std::min(*ia, *ib), std::max(*ia, *ib)};
    if (!seen.insert(e).second) {
      throw Error(ErrorKind::Format, "ontology: duplicate edge '" + a + "' - '" + b + "'");
    }
    g.edges_.push_back(e);
  }

  if (g.nodes_.size() == 1) {
    throw Error(ErrorKind::Connectivity, "ontology: isolated node '" + g.nodes_[0].name + "'");
  }
  auto components = connected_components(g.nodes_.size(), g.edges_);
  if (components.size() > 1) {
    std::ostringstream msg;
    msg << "ontology: graph has " << components.size() << " connected components:";
    for (std::size_t c = 0; c < components.size(); ++c) {
      msg << "\n  [" << c + 1 << "]";
      for (auto i : components[c]) msg << ' ' << g.nodes_[i].name;
    }
    throw Error(ErrorKind::Connectivity, msg.str());
  }
  return g;
}

std::optional<std::size_t> OntologyGraph::index_of(std::string_view name) const {
  auto it = index_.find(std::string(name));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

void OntologyGraph::save(const std::filesystem::path& path) const {
  nlohmann::json doc;
  doc["nodes"] = nlohmann::json::array();
  for (const auto& n : nodes_) {
    doc["nodes"].push_back({{"name", n.name}, {"kind", to_string(n.kind)}});
  }
  doc["edges"] = nlohmann::json::array();
  for (auto [a, b] : edges_) doc["edges"].push_back({nodes_[a].name, nodes_[b].name});
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  out << doc.dump(1) << '\n';
}

OntologyGraph parse_ontology_json(std::string_view text) {
  std::vector<OntologyNode> nodes;
  std::vector<std::pair<std::string, std::string>> edges;
  try {
    auto doc = nlohmann::json::parse(text);
    for (const auto& n : doc.at("nodes")) {
      nodes.push_back({n.at("name").get<std::string>(), parse_kind(n.at("kind").get<std::string>())});
    }
    for (const auto& e : doc.at("edges")) {
      if (!e.is_array() || e.size() != 2) {
        throw Error(ErrorKind::Format, "ontology: edge must be a [name, name] pair");
      }
      edges.emplace_back(e[0].get<std::string>(), e[1].get<std::string>());
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Format, std::string("ontology: ") + e.what());
  }
  return OntologyGraph::create(std::move(nodes), edges);
}

OntologyGraph parse_ontology(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot read " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_ontology_json(buffer.str());
}

LaplacianFactorization build_laplacian(const OntologyGraph& graph) {
  const std::size_t n = graph.node_count();
  std::vector<double> degree(n, 0.0);
  for (auto [a, b] : graph.edges()) {
    degree[a] += 1.0;
    degree[b] += 1.0;
  }
  LaplacianFactorization f;
  f.delta = Tensor<double>::identity(n);
  for (auto [a, b] : graph.edges()) {
    const double w = 1.0 / std::sqrt(degree[a] * degree[b]);
    f.delta(a, b) -= w;
    f.delta(b, a) -= w;
  }
  auto eig = symmetric_eigen(f.delta);
  f.eigenvalues = std::move(eig.values);
  f.eigenvectors = std::move(eig.vectors);
  return f;
}

NodeEmbeddingTable::NodeEmbeddingTable(std::vector<OntologyNode> nodes, Tensor<double> vectors)
    : nodes_(std::move(nodes)), vectors_(std::move(vectors)) {
  for (std::size_t i = 0; i < nodes_.size(); ++i) index_.emplace(nodes_[i].name, i);
}

std::optional<std::span<const double>> NodeEmbeddingTable::find(std::string_view name) const {
  auto it = index_.find(std::string(name));
  if (it == index_.end()) return std::nullopt;
  return vectors_.row(it->second);
}

void NodeEmbeddingTable::save_csv(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  csv::Row header{"node", "kind"};
  for (std::size_t c = 0; c < k(); ++c) header.push_back("c" + std::to_string(c + 1));
  csv::write_row(out, header);
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    csv::Row row{nodes_[i].name, std::string(to_string(nodes_[i].kind))};
    for (double x : vectors_.row(i)) row.push_back(format_double(x));
    csv::write_row(out, row);
  }
}

NodeEmbeddingTable NodeEmbeddingTable::load_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot read " + path.string());
  auto rows = csv::read(in);
  if (rows.empty() || rows[0].size() < 3) {
    throw Error(ErrorKind::Format, path.string() + ": expected node,kind,c1..ck header");
  }
  const std::size_t k = rows[0].size() - 2;
  std::vector<OntologyNode> nodes;
  Tensor<double> vectors(rows.size() - 1, k);
  for (std::size_t r = 1; r < rows.size(); ++r) {
    if (rows[r].size() != k + 2) {
      throw Error(ErrorKind::Format, path.string() + ": ragged row " + std::to_string(r + 1));
    }
    nodes.push_back({rows[r][0], parse_kind(rows[r][1])});
    for (std::size_t c = 0; c < k; ++c) {
      try {
        vectors(r - 1, c) = std::stod(rows[r][c + 2]);
      } catch (const std::exception&) {
        throw Error(ErrorKind::Format, path.string() + ": bad number '" + rows[r][c + 2] + "'");
      }
    }
  }
  return NodeEmbeddingTable(std::move(nodes), std::move(vectors));
}

NodeEmbeddingTable node_embeddings(const LaplacianFactorization& fact, const OntologyGraph& graph,
                                   int k) {
  if (k < 1) throw Error(ErrorKind::Parameter, "node_embeddings: k must be >= 1");
  const std::size_t n = graph.node_count();
  const std::size_t dim = static_cast<std::size_t>(k);
  const std::size_t used = std::min(dim, n - 1);

  Tensor<double> vectors(n, dim);
  for (std::size_t c = 0; c < used; ++c) {
    const std::size_t col = c + 1;
    // Largest magnitude entry; near-equal magnitudes count as a tie so that
    // rounding noise cannot decide the sign.
    std::size_t pivot = 0;
    double best = -1.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double m = std::abs(fact.eigenvectors(i, col));
      if (m > best * (1.0 + 1e-12) + 1e-300) {
        best = m;
        pivot = i;
      }
    }
    const double sign = fact.eigenvectors(pivot, col) < 0.0 ? -1.0 : 1.0;
    for (std::size_t i = 0; i < n; ++i) vectors(i, c) = sign * fact.eigenvectors(i, col);
  }
  return NodeEmbeddingTable(graph.nodes(), std::move(vectors));
}

std::vector<double> embedding_for_token(const NodeEmbeddingTable& table, const Vocabulary& vocab,
                                        int token_id) {
  std::vector<double> out(table.k(), 0.0);
  if (Vocabulary::is_special(token_id)) return out;
  const std::string& name = vocab.name_of(token_id);
  if (auto row = table.find(name)) {
    std::copy(row->begin(), row->end(), out.begin());
  } else {
    spdlog::warn("activity '{}' is not in the ontology; using a zero structural encoding", name);
  }
  return out;
}

}  // namespace ppm
