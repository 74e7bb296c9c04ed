#include "coupledrec/cf.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>
#include <unordered_map>

namespace coupledrec {
namespace {

std::size_t sz(Index i) { return static_cast<std::size_t>(i); }

void require_request(const RatingIndex& ratings, const PredictionRequest& req) {
  if (ratings.size() == 0) throw std::invalid_argument("prediction from an empty rating set");
  if (req.user < 0 || req.user >= ratings.num_users()) throw std::out_of_range("user index out of range");
  if (req.item < 0 || req.item >= ratings.num_items()) throw std::out_of_range("item index out of range");
  if (req.cap < 1) throw std::invalid_argument("neighbour cap must be at least 1");
}

struct Scored {
  Index index;
  double weight;
  double deviation;
};

// Sort by descending weight, ascending index, then keep at most cap.
void keep_top(std::vector<Scored>& scored, Index cap) {
  std::sort(scored.begin(), scored.end(), [](const Scored& a, const Scored& b) {
    return a.weight != b.weight ? a.weight > b.weight : a.index < b.index;
  });
  if (static_cast<Index>(scored.size()) > cap) scored.resize(sz(cap));
}

// Walks two index-sorted entry lists and calls f(a_value, b_value) on matches.
template <typename F>
void for_each_common(std::span<const Entry> a, std::span<const Entry> b, F&& f) {
  auto ia = a.begin();
  auto ib = b.begin();
  while (ia != a.end() && ib != b.end()) {
    if (ia->index < ib->index) {
      ++ia;
    } else if (ib->index < ia->index) {
      ++ib;
    } else {
      f(ia->index, ia->value, ib->value);
      ++ia;
      ++ib;
    }
  }
}

void record(PredictionStats* stats, Index candidates, Index neighbors) {
  if (stats) *stats = {candidates, neighbors};
}

}  // namespace

double MeanCache::fallback(Index user, Index item) const {
  if (has_user[sz(user)]) return user_mean(user);
  if (has_item[sz(item)]) return item_mean(item);
  return global_mean;
}

RatingIndex::RatingIndex(const RatingDataset& ratings)
    : num_users_(ratings.num_users), num_items_(ratings.num_items), r_min_(ratings.r_min), r_max_(ratings.r_max) {
  auto build = [&](bool by_user, std::vector<std::size_t>& offsets, std::vector<Entry>& entries) {
    const Index rows = by_user ? num_users_ : num_items_;
    offsets.assign(sz(rows) + 1, 0);
    for (const auto& t : ratings.triples) ++offsets[sz(by_user ? t.user : t.item) + 1];
    std::partial_sum(offsets.begin(), offsets.end(), offsets.begin());
    entries.resize(ratings.triples.size());
    auto cursor = offsets;
    for (const auto& t : ratings.triples) {
      const Index row = by_user ? t.user : t.item;
      entries[cursor[sz(row)]++] = {by_user ? t.item : t.user, t.value};
    }
    for (Index r = 0; r < rows; ++r) {
      std::sort(entries.begin() + static_cast<std::ptrdiff_t>(offsets[sz(r)]),
                entries.begin() + static_cast<std::ptrdiff_t>(offsets[sz(r) + 1]),
                [](const Entry& a, const Entry& b) { return a.index < b.index; });
    }
  };
  build(true, user_offsets_, by_user_);
  build(false, item_offsets_, by_item_);

  auto means_of = [&](Index rows, auto&& row_entries, Eigen::VectorXd& mean, std::vector<bool>& present) {
    mean = Eigen::VectorXd::Zero(rows);
    present.assign(sz(rows), false);
    for (Index r = 0; r < rows; ++r) {
      const auto entries = row_entries(r);
      if (entries.empty()) continue;
      double sum = 0.0;
      for (const auto& e : entries) sum += e.value;
      mean(r) = sum / static_cast<double>(entries.size());
      present[sz(r)] = true;
    }
  };
  means_of(num_users_, [this](Index u) { return user_ratings(u); }, means_.user_mean, means_.has_user);
  means_of(num_items_, [this](Index i) { return item_ratings(i); }, means_.item_mean, means_.has_item);
  means_.global_mean = ratings.empty() ? 0.5 * (r_min_ + r_max_) : ratings.global_mean();
}

double RatingIndex::clamp(double value) const { return std::clamp(value, r_min_, r_max_); }

std::span<const Entry> RatingIndex::user_ratings(Index user) const {
  return {by_user_.data() + user_offsets_[sz(user)], user_offsets_[sz(user) + 1] - user_offsets_[sz(user)]};
}

std::span<const Entry> RatingIndex::item_ratings(Index item) const {
  return {by_item_.data() + item_offsets_[sz(item)], item_offsets_[sz(item) + 1] - item_offsets_[sz(item)]};
}

std::optional<double> RatingIndex::rating(Index user, Index item) const {
  const auto row = user_ratings(user);
  auto it = std::lower_bound(row.begin(), row.end(), item, [](const Entry& e, Index i) { return e.index < i; });
  if (it == row.end() || it->index != item) return std::nullopt;
  return it->value;
}

CoupledItems CoupledItems::align(const RatingDataset& ratings, const CategoricalTable& items,
                                 const ClusterModel& clusters, SimilarityMatrix similarity) {
  if (clusters.assignment.size() != items.num_objects() || similarity.rows() != items.num_objects() ||
      similarity.cols() != items.num_objects()) {
    throw std::invalid_argument("clusters and similarity must cover the item attribute table");
  }
  std::unordered_map<std::string, Index> rows;
  for (Index o = 0; o < items.num_objects(); ++o) rows.emplace(items.object_ids[sz(o)], o);
  CoupledItems out;
  out.object_of_item.assign(sz(ratings.num_items), -1);
  for (Index i = 0; i < ratings.num_items; ++i) {
    auto it = rows.find(ratings.item_ids[sz(i)]);
    if (it != rows.end()) out.object_of_item[sz(i)] = it->second;
  }
  out.cluster_of_object = clusters.assignment;
  out.similarity = std::move(similarity);
  return out;
}

Index CoupledItems::largest_cluster() const {
  std::unordered_map<Index, Index> sizes;
  Index best = 0;
  for (Index object : object_of_item) {
    if (object >= 0) best = std::max(best, ++sizes[cluster_of_object(object)]);
  }
  return best;
}

double predict_coupled(const RatingIndex& ratings, const CoupledItems& items, const PredictionRequest& req,
                       PredictionStats* stats) {
  require_request(ratings, req);
  if (static_cast<Index>(items.object_of_item.size()) != ratings.num_items()) {
    throw std::invalid_argument("coupled item alignment does not match the rating set");
  }
  const auto& means = ratings.means();
  if (!means.has_user[sz(req.user)]) {
    record(stats, 0, 0);
    return ratings.clamp(means.fallback(req.user, req.item));
  }
  const Index target = items.object_of_item[sz(req.item)];
  std::vector<Scored> scored;
  if (target >= 0) {
    for (const auto& e : ratings.user_ratings(req.user)) {
      if (e.index == req.item) continue;
      const Index object = items.object_of_item[sz(e.index)];
      if (object < 0) continue;
      if (req.source == NeighborSource::cluster && items.cluster_of_object(object) != items.cluster_of_object(target)) {
        continue;
      }
      scored.push_back({e.index, items.similarity(object, target), e.value - means.item_mean(e.index)});
    }
  }
  const auto candidates = static_cast<Index>(scored.size());
  keep_top(scored, req.cap);
  double num = 0.0;
  double den = 0.0;
  for (const auto& s : scored) {
    num += s.weight * s.deviation;
    den += s.weight;
  }
  record(stats, candidates, static_cast<Index>(scored.size()));
  if (scored.empty() || den == 0.0) return ratings.clamp(means.user_mean(req.user));
  return ratings.clamp(means.user_mean(req.user) + num / den);
}

double rating_similarity(const RatingIndex& ratings, Index a, Index b) {
  const auto& means = ratings.means();
  double dot = 0.0;
  double na = 0.0;
  double nb = 0.0;
  int common = 0;
  for_each_common(ratings.item_ratings(a), ratings.item_ratings(b), [&](Index user, double ra, double rb) {
    const double da = ra - means.user_mean(user);
    const double db = rb - means.user_mean(user);
    dot += da * db;
    na += da * da;
    nb += db * db;
    ++common;
  });
  if (common < 2 || na == 0.0 || nb == 0.0) return 0.0;
  return std::clamp(dot / std::sqrt(na * nb), -1.0, 1.0);
}

double user_correlation(const RatingIndex& ratings, Index u, Index v) {
  std::vector<std::pair<double, double>> pairs;
  for_each_common(ratings.user_ratings(u), ratings.user_ratings(v),
                  [&](Index, double ru, double rv) { pairs.emplace_back(ru, rv); });
  if (pairs.size() < 2) return 0.0;
  double mu = 0.0;
  double mv = 0.0;
  for (auto [ru, rv] : pairs) {
    mu += ru;
    mv += rv;
  }
  mu /= static_cast<double>(pairs.size());
  mv /= static_cast<double>(pairs.size());
  double dot = 0.0;
  double nu = 0.0;
  double nv = 0.0;
  for (auto [ru, rv] : pairs) {
    dot += (ru - mu) * (rv - mv);
    nu += (ru - mu) * (ru - mu);
    nv += (rv - mv) * (rv - mv);
  }
  if (nu == 0.0 || nv == 0.0) return 0.0;
  return std::clamp(dot / std::sqrt(nu * nv), -1.0, 1.0);
}

double predict_item_based(const RatingIndex& ratings, const PredictionRequest& req, PredictionStats* stats) {
  require_request(ratings, req);
  const auto& means = ratings.means();
  if (!means.has_user[sz(req.user)]) {
    record(stats, 0, 0);
    return ratings.clamp(means.fallback(req.user, req.item));
  }
  std::vector<Scored> scored;
  Index candidates = 0;
  for (const auto& e : ratings.user_ratings(req.user)) {
    if (e.index == req.item) continue;
    ++candidates;
    const double sim = rating_similarity(ratings, e.index, req.item);
    if (sim > 0.0) scored.push_back({e.index, sim, e.value - means.item_mean(e.index)});
  }
  keep_top(scored, req.cap);
  double num = 0.0;
  double den = 0.0;
  for (const auto& s : scored) {
    num += s.weight * s.deviation;
    den += std::abs(s.weight);
  }
  record(stats, candidates, static_cast<Index>(scored.size()));
  if (den == 0.0) return ratings.clamp(means.user_mean(req.user));
  return ratings.clamp(means.user_mean(req.user) + num / den);
}

double predict_user_based(const RatingIndex& ratings, const PredictionRequest& req, PredictionStats* stats) {
  require_request(ratings, req);
  const auto& means = ratings.means();
  if (!means.has_user[sz(req.user)]) {
    record(stats, 0, 0);
    return ratings.clamp(means.fallback(req.user, req.item));
  }
  std::vector<Scored> scored;
  Index candidates = 0;
  for (const auto& e : ratings.item_ratings(req.item)) {
    if (e.index == req.user) continue;
    ++candidates;
    const double w = user_correlation(ratings, req.user, e.index);
    if (w > 0.0) scored.push_back({e.index, w, e.value - means.user_mean(e.index)});
  }
  keep_top(scored, req.cap);
  double num = 0.0;
  double den = 0.0;
  for (const auto& s : scored) {
    num += s.weight * s.deviation;
    den += std::abs(s.weight);
  }
  record(stats, candidates, static_cast<Index>(scored.size()));
  if (den == 0.0) return ratings.clamp(means.user_mean(req.user));
  return ratings.clamp(means.user_mean(req.user) + num / den);
}

double predict_slope_one(const RatingIndex& ratings, const PredictionRequest& req, PredictionStats* stats) {
  require_request(ratings, req);
  const auto& means = ratings.means();
  if (!means.has_user[sz(req.user)]) {
    record(stats, 0, 0);
    return ratings.clamp(means.fallback(req.user, req.item));
  }
  const auto target = ratings.item_ratings(req.item);
  double num = 0.0;
  double den = 0.0;
  Index candidates = 0;
  Index used = 0;
  for (const auto& e : ratings.user_ratings(req.user)) {
    if (e.index == req.item) continue;
    ++candidates;
    double diff = 0.0;
    Index count = 0;
    for_each_common(target, ratings.item_ratings(e.index), [&](Index, double ry, double rj) {
      diff += ry - rj;
      ++count;
    });
    if (count == 0) continue;
    const double c = static_cast<double>(count);
    num += c * (diff / c + e.value);
    den += c;
    ++used;
  }
  record(stats, candidates, used);
  if (den == 0.0) return ratings.clamp(means.user_mean(req.user));
  return ratings.clamp(num / den);
}

double UserBasedCF::predict(Index user, Index item, PredictionStats* stats) const {
  return predict_user_based(ratings_, {user, item, NeighborSource::global, cap_}, stats);
}

double ItemBasedCF::predict(Index user, Index item, PredictionStats* stats) const {
  return predict_item_based(ratings_, {user, item, NeighborSource::global, cap_}, stats);
}

double SlopeOne::predict(Index user, Index item, PredictionStats* stats) const {
  return predict_slope_one(ratings_, {user, item, NeighborSource::global, 1}, stats);
}

double CoupledItemCF::predict(Index user, Index item, PredictionStats* stats) const {
  return predict_coupled(ratings_, *items_, {user, item, source_, cap_}, stats);
}

std::vector<Index> top_n(const RatingIndex& ratings, const Predictor& predictor, Index user, Index n,
                         PredictionStats* stats) {
  if (n < 1) throw std::invalid_argument("top-n needs n >= 1");
  const auto rated = ratings.user_ratings(user);
  std::vector<std::pair<double, Index>> scored;
  auto next_rated = rated.begin();
  PredictionStats worst;
  for (Index item = 0; item < ratings.num_items(); ++item) {
    while (next_rated != rated.end() && next_rated->index < item) ++next_rated;
    if (next_rated != rated.end() && next_rated->index == item) continue;
    PredictionStats one;
    scored.emplace_back(predictor.predict(user, item, &one), item);
    worst.candidates = std::max(worst.candidates, one.candidates);
    worst.neighbors = std::max(worst.neighbors, one.neighbors);
  }
  std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
    return a.first != b.first ? a.first > b.first : a.second < b.second;
  });
  if (static_cast<Index>(scored.size()) > n) scored.resize(sz(n));
  if (stats) *stats = worst;
  std::vector<Index> out;
  out.reserve(scored.size());
  for (const auto& s : scored) out.push_back(s.second);
  return out;
}

}  // namespace coupledrec
