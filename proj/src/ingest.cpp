#include "coupledrec/ingest.hpp"

#include "coupledrec/csv.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <ostream>
#include <set>
#include <tuple>
#include <unordered_set>

namespace coupledrec {
namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  return s;
}

std::optional<double> parse_decimal(std::string_view text) {
  text = trim(text);
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size() || text.empty() || !std::isfinite(value)) {
    return std::nullopt;
  }
  return value;
}

std::string where(const std::filesystem::path& path, std::size_t line) {
  return path.string() + ":" + std::to_string(line) + ": ";
}

}  // namespace

// --- CategoricalTable -------------------------------------------------------

CategoricalTable CategoricalTable::from_rows(std::vector<std::string> object_ids,
                                             std::vector<std::string> attribute_names,
                                             const std::vector<std::vector<std::string>>& values) {
  CategoricalTable table;
  table.object_ids = std::move(object_ids);
  table.attribute_names = std::move(attribute_names);
  const auto m = table.num_objects();
  const auto n = table.num_attributes();
  if (static_cast<Index>(values.size()) != m) {
    throw InputError("value rows do not match the number of object ids");
  }
  table.domains.assign(static_cast<std::size_t>(n), {});
  table.cells.resize(m, n);
  std::vector<std::unordered_map<std::string, int>> codes(static_cast<std::size_t>(n));
  for (Index o = 0; o < m; ++o) {
    const auto& row = values[static_cast<std::size_t>(o)];
    if (static_cast<Index>(row.size()) != n) {
      throw InputError("row for object '" + table.object_ids[static_cast<std::size_t>(o)] +
                       "' has " + std::to_string(row.size()) + " values, expected " + std::to_string(n));
    }
    for (Index j = 0; j < n; ++j) {
      std::string value = row[static_cast<std::size_t>(j)];
      if (value.empty()) value = kMissingValue;
      auto& lookup = codes[static_cast<std::size_t>(j)];
      auto [it, inserted] = lookup.try_emplace(value, static_cast<int>(lookup.size()));
      if (inserted) table.domains[static_cast<std::size_t>(j)].push_back(value);
      table.cells(o, j) = it->second;
    }
  }
  table.validate();
  return table;
}

void CategoricalTable::validate() const {
  const auto m = num_objects();
  const auto n = num_attributes();
  if (n < 1) throw InputError("attribute table needs at least one attribute");
  if (static_cast<Index>(domains.size()) != n) throw InputError("one domain per attribute required");
  if (cells.rows() != m || cells.cols() != n) throw InputError("cell matrix shape mismatch");
  std::unordered_set<std::string> seen;
  for (const auto& id : object_ids) {
    if (!seen.insert(id).second) throw InputError("duplicate object id '" + id + "'");
  }
  seen.clear();
  for (const auto& name : attribute_names) {
    if (!seen.insert(name).second) throw InputError("duplicate attribute name '" + name + "'");
  }
  for (Index j = 0; j < n; ++j) {
    const auto size = domain_size(j);
    if (size < 1) throw InputError("attribute '" + attribute_names[static_cast<std::size_t>(j)] + "' has an empty domain");
    for (Index o = 0; o < m; ++o) {
      if (cells(o, j) < 0 || cells(o, j) >= size) {
        throw InputError("cell (" + std::to_string(o) + "," + std::to_string(j) + ") outside its domain");
      }
    }
  }
}

bool operator==(const CategoricalTable& a, const CategoricalTable& b) {
  return a.object_ids == b.object_ids && a.attribute_names == b.attribute_names &&
         a.domains == b.domains && a.cells.rows() == b.cells.rows() &&
         a.cells.cols() == b.cells.cols() && a.cells == b.cells;
}

CategoricalTable load_attribute_table(const std::filesystem::path& path) {
  const auto doc = csv::read_file(path);
  if (doc.header.size() < 2) {
    throw InputError(path.string() + ": header must be 'id,attr1,...,attrN' with at least one attribute");
  }
  std::vector<std::string> names(doc.header.begin() + 1, doc.header.end());
  std::vector<std::string> ids;
  std::vector<std::vector<std::string>> values;
  std::unordered_set<std::string> seen;
  for (std::size_t r = 0; r < doc.rows.size(); ++r) {
    const auto& row = doc.rows[r];
    if (row.size() != doc.header.size()) {
      throw InputError(where(path, doc.line_numbers[r]) + "ragged row: " + std::to_string(row.size()) +
                       " fields, expected " + std::to_string(doc.header.size()));
    }
    if (!seen.insert(row[0]).second) {
      throw InputError(where(path, doc.line_numbers[r]) + "duplicate id '" + row[0] + "'");
    }
    ids.push_back(row[0]);
    values.emplace_back(row.begin() + 1, row.end());
  }
  try {
    return CategoricalTable::from_rows(std::move(ids), std::move(names), values);
  } catch (const InputError& e) {
    throw InputError(path.string() + ": " + e.what());
  }
}

void write_attribute_table(const CategoricalTable& table, std::ostream& out) {
  csv::Row header{"id"};
  header.insert(header.end(), table.attribute_names.begin(), table.attribute_names.end());
  out << csv::join(header) << '\n';
  for (Index o = 0; o < table.num_objects(); ++o) {
    csv::Row row{table.object_ids[static_cast<std::size_t>(o)]};
    for (Index j = 0; j < table.num_attributes(); ++j) {
      const auto& value = table.domains[static_cast<std::size_t>(j)][static_cast<std::size_t>(table.cells(o, j))];
      row.push_back(value == kMissingValue ? std::string{} : value);
    }
    out << csv::join(row) << '\n';
  }
}

void write_attribute_table(const CategoricalTable& table, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  write_attribute_table(table, out);
}

// --- RatingDataset ----------------------------------------------------------

double RatingDataset::clamp(double value) const { return std::clamp(value, r_min, r_max); }

double RatingDataset::global_mean() const {
  if (triples.empty()) throw std::invalid_argument("global mean of an empty rating set");
  double sum = 0.0;
  for (const auto& t : triples) sum += t.value;
  return sum / static_cast<double>(triples.size());
}

RatingDataset RatingDataset::subset(std::span<const std::size_t> rows) const {
  RatingDataset out;
  out.num_users = num_users;
  out.num_items = num_items;
  out.r_min = r_min;
  out.r_max = r_max;
  out.user_ids = user_ids;
  out.item_ids = item_ids;
  out.triples.reserve(rows.size());
  for (auto r : rows) out.triples.push_back(triples.at(r));
  return out;
}

std::unordered_map<std::string, Index> RatingDataset::user_lookup() const {
  std::unordered_map<std::string, Index> m;
  for (std::size_t u = 0; u < user_ids.size(); ++u) m.emplace(user_ids[u], static_cast<Index>(u));
  return m;
}

std::unordered_map<std::string, Index> RatingDataset::item_lookup() const {
  std::unordered_map<std::string, Index> m;
  for (std::size_t i = 0; i < item_ids.size(); ++i) m.emplace(item_ids[i], static_cast<Index>(i));
  return m;
}

void RatingDataset::validate() const {
  if (!(r_min < r_max)) throw InputError("rating range requires r_min < r_max");
  if (!user_ids.empty() && static_cast<Index>(user_ids.size()) != num_users) {
    throw InputError("user id list does not match num_users");
  }
  if (!item_ids.empty() && static_cast<Index>(item_ids.size()) != num_items) {
    throw InputError("item id list does not match num_items");
  }
  std::set<std::pair<Index, Index>> seen;
  for (const auto& t : triples) {
    if (t.user < 0 || t.user >= num_users || t.item < 0 || t.item >= num_items) {
      throw InputError("rating index out of range");
    }
    if (!(t.value >= r_min && t.value <= r_max)) throw InputError("rating outside the rating range");
    if (!seen.emplace(t.user, t.item).second) throw InputError("duplicate (user, item) rating");
  }
}

RatingDataset load_ratings(const std::filesystem::path& path, double r_min, double r_max) {
  if (!(r_min < r_max)) throw InputError("rating range requires r_min < r_max");
  const auto doc = csv::read_file(path);
  csv::require_header(doc, {"user_id", "item_id", "rating"}, path);
  RatingDataset data;
  data.r_min = r_min;
  data.r_max = r_max;
  std::unordered_map<std::string, Index> users;
  std::unordered_map<std::string, Index> items;
  std::set<std::pair<Index, Index>> seen;
  for (std::size_t r = 0; r < doc.rows.size(); ++r) {
    const auto& row = doc.rows[r];
    const auto at = where(path, doc.line_numbers[r]);
    if (row.size() != 3) throw InputError(at + "expected 3 fields, got " + std::to_string(row.size()));
    auto value = parse_decimal(row[2]);
    if (!value) throw InputError(at + "rating '" + row[2] + "' is not a decimal number");
    if (*value < r_min || *value > r_max) {
      throw InputError(at + "rating " + row[2] + " outside [" + to_roundtrip_string(r_min) + ", " +
                       to_roundtrip_string(r_max) + "]");
    }
    auto [uit, unew] = users.try_emplace(row[0], static_cast<Index>(users.size()));
    if (unew) data.user_ids.push_back(row[0]);
    auto [iit, inew] = items.try_emplace(row[1], static_cast<Index>(items.size()));
    if (inew) data.item_ids.push_back(row[1]);
    if (!seen.emplace(uit->second, iit->second).second) {
      throw InputError(at + "duplicate rating for user '" + row[0] + "' and item '" + row[1] + "'");
    }
    data.triples.push_back({uit->second, iit->second, *value});
  }
  data.num_users = static_cast<Index>(data.user_ids.size());
  data.num_items = static_cast<Index>(data.item_ids.size());
  return data;
}

void write_ratings(const RatingDataset& ratings, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "user_id,item_id,rating\n";
  for (const auto& t : ratings.triples) {
    out << csv::join({ratings.user_ids[static_cast<std::size_t>(t.user)],
                      ratings.item_ids[static_cast<std::size_t>(t.item)], to_roundtrip_string(t.value)})
        << '\n';
  }
}

// --- RelationGraph ----------------------------------------------------------

RelationGraph::RelationGraph(Index node_count, std::vector<Edge> edges, bool normalize)
    : node_count_(node_count), normalized_(normalize) {
  if (node_count < 0) throw InputError("negative node count");
  std::vector<Edge> kept;
  kept.reserve(edges.size());
  for (const auto& e : edges) {
    if (e.src < 0 || e.src >= node_count || e.dst < 0 || e.dst >= node_count) {
      throw InputError("edge endpoint outside [0, " + std::to_string(node_count) + ")");
    }
    if (!(e.weight >= 0.0) || !std::isfinite(e.weight)) throw InputError("edge weight must be finite and nonnegative");
    if (e.src == e.dst) {
      ++self_loops_dropped_;
      continue;
    }
    kept.push_back(e);
  }
  std::sort(kept.begin(), kept.end(),
            [](const Edge& a, const Edge& b) { return std::tie(a.src, a.dst) < std::tie(b.src, b.dst); });
  for (std::size_t k = 1; k < kept.size(); ++k) {
    if (kept[k].src == kept[k - 1].src && kept[k].dst == kept[k - 1].dst) {
      throw InputError("duplicate edge " + std::to_string(kept[k].src) + " -> " + std::to_string(kept[k].dst));
    }
  }
  if (normalize) {
    std::vector<double> totals(static_cast<std::size_t>(node_count), 0.0);
    for (const auto& e : kept) totals[static_cast<std::size_t>(e.src)] += e.weight;
    std::erase_if(kept, [&](const Edge& e) { return totals[static_cast<std::size_t>(e.src)] == 0.0; });
    for (auto& e : kept) e.weight /= totals[static_cast<std::size_t>(e.src)];
  }
  edges_ = std::move(kept);
  offsets_.assign(static_cast<std::size_t>(node_count) + 1, 0);
  for (const auto& e : edges_) ++offsets_[static_cast<std::size_t>(e.src) + 1];
  std::partial_sum(offsets_.begin(), offsets_.end(), offsets_.begin());
  adjacency_.reserve(edges_.size());
  for (const auto& e : edges_) adjacency_.push_back({e.dst, e.weight});
}

std::span<const Neighbor> RelationGraph::neighbors(Index node) const {
  if (adjacency_.empty()) return {};
  const auto begin = offsets_[static_cast<std::size_t>(node)];
  const auto end = offsets_[static_cast<std::size_t>(node) + 1];
  return {adjacency_.data() + begin, end - begin};
}

void RelationGraph::validate() const {
  for (const auto& e : edges_) {
    if (e.src == e.dst) throw InputError("self-loop in relation graph");
    if (e.weight < 0.0) throw InputError("negative edge weight");
  }
  if (!normalized_) return;
  for (Index v = 0; v < node_count_; ++v) {
    const auto nbrs = neighbors(v);
    if (nbrs.empty()) continue;
    double total = 0.0;
    for (const auto& nb : nbrs) total += nb.weight;
    if (std::abs(total - 1.0) > 1e-9) throw InputError("normalized row does not sum to one");
  }
}

RelationGraph load_graph(const std::filesystem::path& path, std::span<const std::string> node_ids,
                         bool normalize) {
  const auto doc = csv::read_file(path);
  csv::require_header(doc, {"src", "dst", "weight"}, path);
  std::unordered_map<std::string_view, Index> lookup;
  for (std::size_t v = 0; v < node_ids.size(); ++v) lookup.emplace(node_ids[v], static_cast<Index>(v));
  std::vector<Edge> edges;
  std::set<std::pair<Index, Index>> seen;
  for (std::size_t r = 0; r < doc.rows.size(); ++r) {
    const auto& row = doc.rows[r];
    const auto at = where(path, doc.line_numbers[r]);
    if (row.size() != 3) throw InputError(at + "expected 3 fields, got " + std::to_string(row.size()));
    Edge e;
    for (int side = 0; side < 2; ++side) {
      auto it = lookup.find(row[static_cast<std::size_t>(side)]);
      if (it == lookup.end()) throw InputError(at + "unknown id '" + row[static_cast<std::size_t>(side)] + "'");
      (side == 0 ? e.src : e.dst) = it->second;
    }
    auto weight = parse_decimal(row[2]);
    if (!weight) throw InputError(at + "weight '" + row[2] + "' is not a decimal number");
    if (*weight < 0.0) throw InputError(at + "negative weight " + row[2]);
    e.weight = *weight;
    if (e.src != e.dst && !seen.emplace(e.src, e.dst).second) {
      throw InputError(at + "duplicate edge '" + row[0] + "' -> '" + row[1] + "'");
    }
    edges.push_back(e);
  }
  return RelationGraph(static_cast<Index>(node_ids.size()), std::move(edges), normalize);
}

}  // namespace coupledrec
