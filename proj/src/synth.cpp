#include "coupledrec/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <string>

namespace coupledrec {
namespace {

RelationGraph random_links(Index nodes, double density, std::mt19937_64& rng) {
  std::bernoulli_distribution link(std::clamp(density, 0.0, 1.0));
  std::vector<Edge> edges;
  for (Index a = 0; a < nodes; ++a) {
    for (Index b = a + 1; b < nodes; ++b) {
      if (link(rng)) {
        edges.push_back({a, b, 1.0});
        edges.push_back({b, a, 1.0});
      }
    }
  }
  return RelationGraph(nodes, std::move(edges), true);
}

}  // namespace

SyntheticData synth_coupled(const SynthConfig& config) {
  if (config.users < 2 || config.items < 2 || config.rank < 1) {
    throw std::invalid_argument("synthetic data needs at least 2 users, 2 items and rank 1");
  }
  if (config.rank > std::min(config.users, config.items)) throw std::invalid_argument("rank exceeds min(users, items)");
  std::mt19937_64 rng(config.seed);
  std::normal_distribution<double> factor(0.0, config.factor_scale);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::bernoulli_distribution observed(std::clamp(config.rating_density, 0.0, 1.0));

  SyntheticData data;
  data.truth.P.resize(config.users, config.rank);
  data.truth.Q.resize(config.items, config.rank);
  for (Index u = 0; u < config.users; ++u) {
    for (Index f = 0; f < config.rank; ++f) data.truth.P(u, f) = factor(rng);
  }
  for (Index i = 0; i < config.items; ++i) {
    for (Index f = 0; f < config.rank; ++f) data.truth.Q(i, f) = factor(rng);
  }
  data.truth.offset = config.offset;
  data.graphs.users = random_links(config.users, config.friend_density, rng);
  data.graphs.items = random_links(config.items, config.friend_density, rng);

  auto& ratings = data.ratings;
  ratings.num_users = config.users;
  ratings.num_items = config.items;
  for (Index u = 0; u < config.users; ++u) ratings.user_ids.push_back("u" + std::to_string(u));
  for (Index i = 0; i < config.items; ++i) ratings.item_ids.push_back("i" + std::to_string(i));
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (Index u = 0; u < config.users; ++u) {
    for (Index i = 0; i < config.items; ++i) {
      if (!observed(rng)) continue;
      double value = cmf_predict(data.truth, &data.graphs, u, i);
      if (config.noise > 0.0) value += config.noise * noise(rng);
      if (config.quantize) value = std::round(std::clamp(value, 1.0, 5.0));
      lo = std::min(lo, value);
      hi = std::max(hi, value);
      ratings.triples.push_back({u, i, value});
    }
  }
  if (config.quantize) {
    ratings.r_min = 1.0;
    ratings.r_max = 5.0;
  } else {
    ratings.r_min = ratings.empty() ? 0.0 : std::floor(lo);
    ratings.r_max = ratings.empty() ? 1.0 : std::max(std::ceil(hi), ratings.r_min + 1.0);
  }
  return data;
}

PlantedClusters synth_clusters(const SynthClustersConfig& config) {
  if (config.clusters < 1 || config.per_cluster < 1 || config.attributes < 1) {
    throw std::invalid_argument("planted clusters need positive sizes");
  }
  if (config.domain_size < config.clusters) throw std::invalid_argument("domain smaller than the cluster count");
  std::mt19937_64 rng(config.seed);
  std::uniform_int_distribution<Index> any_value(0, config.domain_size - 1);
  std::bernoulli_distribution corrupt(std::clamp(config.noise, 0.0, 1.0));

  // Prototype values are distinct across clusters within each attribute.
  std::vector<std::vector<Index>> prototype(static_cast<std::size_t>(config.attributes));
  for (auto& column : prototype) {
    column.resize(static_cast<std::size_t>(config.domain_size));
    std::iota(column.begin(), column.end(), Index{0});
    std::shuffle(column.begin(), column.end(), rng);
  }
  std::vector<std::string> ids;
  std::vector<std::string> names;
  for (Index j = 0; j < config.attributes; ++j) names.push_back("a" + std::to_string(j));
  std::vector<std::vector<std::string>> values;
  PlantedClusters out;
  for (Index c = 0; c < config.clusters; ++c) {
    for (Index r = 0; r < config.per_cluster; ++r) {
      ids.push_back("o" + std::to_string(ids.size()));
      std::vector<std::string> row;
      for (Index j = 0; j < config.attributes; ++j) {
        Index value = prototype[static_cast<std::size_t>(j)][static_cast<std::size_t>(c)];
        if (corrupt(rng)) value = any_value(rng);
        row.push_back("v" + std::to_string(value));
      }
      values.push_back(std::move(row));
      out.labels.push_back(c);
    }
  }
  out.table = CategoricalTable::from_rows(std::move(ids), std::move(names), values);
  return out;
}

}  // namespace coupledrec
