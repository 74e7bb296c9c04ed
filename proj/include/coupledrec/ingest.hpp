#pragma once

#include "coupledrec/common.hpp"

#include <Eigen/Core>

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace coupledrec {

/// Category substituted for empty cells. It is counted like any other value.
inline constexpr std::string_view kMissingValue = "⊥";

using CodeMatrix = Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic>;
using CodeVector = Eigen::Matrix<int, Eigen::Dynamic, 1>;

/// Objects described by categorical attributes. `cells(o, j)` is an index
/// into `domains[j]`.
struct CategoricalTable {
  std::vector<std::string> object_ids;
  std::vector<std::string> attribute_names;
  std::vector<std::vector<std::string>> domains;
  CodeMatrix cells;

  Index num_objects() const { return static_cast<Index>(object_ids.size()); }
  Index num_attributes() const { return static_cast<Index>(attribute_names.size()); }
  Index domain_size(Index attribute) const {
    return static_cast<Index>(domains[static_cast<std::size_t>(attribute)].size());
  }

  /// Builds domains in first-appearance order. Empty strings become kMissingValue.
  static CategoricalTable from_rows(std::vector<std::string> object_ids,
                                    std::vector<std::string> attribute_names,
                                    const std::vector<std::vector<std::string>>& values);

  /// Throws InputError on any broken invariant.
  void validate() const;

  friend bool operator==(const CategoricalTable& a, const CategoricalTable& b);
};

CategoricalTable load_attribute_table(const std::filesystem::path& path);
void write_attribute_table(const CategoricalTable& table, std::ostream& out);
void write_attribute_table(const CategoricalTable& table, const std::filesystem::path& path);

struct Rating {
  Index user = 0;
  Index item = 0;
  double value = 0.0;
  friend bool operator==(const Rating&, const Rating&) = default;
};

/// Sparse explicit ratings with dense user and item indices.
/// `user_ids[u]` / `item_ids[i]` give back the source identifiers.
struct RatingDataset {
  std::vector<Rating> triples;
  Index num_users = 0;
  Index num_items = 0;
  double r_min = 1.0;
  double r_max = 5.0;
  std::vector<std::string> user_ids;
  std::vector<std::string> item_ids;

  std::size_t size() const { return triples.size(); }
  bool empty() const { return triples.empty(); }

  double clamp(double value) const;
  double global_mean() const;

  /// Same index spaces and ids, only the selected triples.
  RatingDataset subset(std::span<const std::size_t> rows) const;

  std::unordered_map<std::string, Index> user_lookup() const;
  std::unordered_map<std::string, Index> item_lookup() const;

  void validate() const;

  friend bool operator==(const RatingDataset&, const RatingDataset&) = default;
};

RatingDataset load_ratings(const std::filesystem::path& path, double r_min, double r_max);
void write_ratings(const RatingDataset& ratings, const std::filesystem::path& path);

struct Edge {
  Index src = 0;
  Index dst = 0;
  double weight = 0.0;
  friend bool operator==(const Edge&, const Edge&) = default;
};

struct Neighbor {
  Index node = 0;
  double weight = 0.0;
};

/// Weighted directed graph over [0, node_count). Self-loops are dropped on
/// construction; with `normalize` each node's outgoing weights sum to one
/// (nodes whose outgoing weight is all zero lose those edges).
class RelationGraph {
public:
  RelationGraph() = default;
  explicit RelationGraph(Index node_count) : node_count_(node_count), offsets_(node_count + 1, 0) {}
  RelationGraph(Index node_count, std::vector<Edge> edges, bool normalize);

  Index node_count() const { return node_count_; }
  bool normalized() const { return normalized_; }
  bool empty() const { return edges_.empty(); }
  std::size_t self_loops_dropped() const { return self_loops_dropped_; }

  /// Edges sorted by (src, dst).
  const std::vector<Edge>& edges() const { return edges_; }

  std::span<const Neighbor> neighbors(Index node) const;

  void validate() const;

private:
  Index node_count_ = 0;
  std::vector<Edge> edges_;
  std::vector<std::size_t> offsets_;
  std::vector<Neighbor> adjacency_;
  bool normalized_ = false;
  std::size_t self_loops_dropped_ = 0;
};

/// User-user (S) and item-item (W) relations used by coupled factorization.
struct CouplingGraphs {
  RelationGraph users;
  RelationGraph items;

  bool empty() const { return users.empty() && items.empty(); }
};

/// `node_ids` is the id list of the file the graph refers to (ratings users,
/// ratings items, or attribute-table objects).
RelationGraph load_graph(const std::filesystem::path& path, std::span<const std::string> node_ids,
                         bool normalize);

}  // namespace coupledrec
