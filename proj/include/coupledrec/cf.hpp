#pragma once

// Neighbourhood collaborative filtering: the cluster-scoped coupled item CF
// and the user-based, item-based and Slope One baselines it is compared with.

#include "coupledrec/coupling.hpp"
#include "coupledrec/ingest.hpp"
#include "coupledrec/kmodes.hpp"

#include <Eigen/Core>

#include <memory>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace coupledrec {

struct Entry {
  Index index = 0;  // item for a user's row, user for an item's column
  double value = 0.0;
};

/// Mean ratings over observed entries only.
struct MeanCache {
  Eigen::VectorXd user_mean;
  Eigen::VectorXd item_mean;
  std::vector<bool> has_user;
  std::vector<bool> has_item;
  double global_mean = 0.0;

  /// user mean, else item mean, else global mean
  double fallback(Index user, Index item) const;
};

/// Row (per user) and column (per item) views of a rating set, each sorted by index.
class RatingIndex {
public:
  explicit RatingIndex(const RatingDataset& ratings);

  Index num_users() const { return num_users_; }
  Index num_items() const { return num_items_; }
  std::size_t size() const { return by_user_.size(); }
  double r_min() const { return r_min_; }
  double r_max() const { return r_max_; }
  double clamp(double value) const;

  std::span<const Entry> user_ratings(Index user) const;
  std::span<const Entry> item_ratings(Index item) const;
  std::optional<double> rating(Index user, Index item) const;

  const MeanCache& means() const { return means_; }

private:
  Index num_users_ = 0;
  Index num_items_ = 0;
  double r_min_ = 1.0;
  double r_max_ = 5.0;
  std::vector<std::size_t> user_offsets_;
  std::vector<Entry> by_user_;
  std::vector<std::size_t> item_offsets_;
  std::vector<Entry> by_item_;
  MeanCache means_;
};

enum class NeighborSource { cluster, global };

struct PredictionRequest {
  Index user = 0;
  Index item = 0;
  NeighborSource source = NeighborSource::cluster;
  Index cap = 30;
};

/// Size of the candidate neighbour set scanned and how many were used.
struct PredictionStats {
  Index candidates = 0;
  Index neighbors = 0;
};

/// Attribute-side inputs of coupled CF, aligned to rating item indices.
struct CoupledItems {
  std::vector<Index> object_of_item;  // -1 when the item has no attribute row
  Assignment cluster_of_object;
  SimilarityMatrix similarity;        // object x object CIS

  /// Matches rating items to attribute-table rows by id.
  static CoupledItems align(const RatingDataset& ratings, const CategoricalTable& items,
                            const ClusterModel& clusters, SimilarityMatrix similarity);

  /// Largest number of rating items sharing one cluster.
  Index largest_cluster() const;
};

/// Cluster-scoped coupled item CF:
///   r̄_u + sum_x Sim(x,y) (r_ux - r̄_x) / sum_x Sim(x,y)
/// over the `cap` most similar items x rated by u (in y's cluster unless the
/// request asks for global neighbours). Clamped to the rating range.
double predict_coupled(const RatingIndex& ratings, const CoupledItems& items, const PredictionRequest& req,
                       PredictionStats* stats = nullptr);

/// Adjusted cosine over co-raters; 0 with fewer than two co-raters or a zero norm.
double rating_similarity(const RatingIndex& ratings, Index a, Index b);

/// Pearson correlation of two users over co-rated items; same degenerate rule.
double user_correlation(const RatingIndex& ratings, Index u, Index v);

double predict_item_based(const RatingIndex& ratings, const PredictionRequest& req, PredictionStats* stats = nullptr);
double predict_user_based(const RatingIndex& ratings, const PredictionRequest& req, PredictionStats* stats = nullptr);
double predict_slope_one(const RatingIndex& ratings, const PredictionRequest& req, PredictionStats* stats = nullptr);

class Predictor {
public:
  virtual ~Predictor() = default;
  virtual double predict(Index user, Index item, PredictionStats* stats = nullptr) const = 0;
};

class UserBasedCF final : public Predictor {
public:
  UserBasedCF(const RatingDataset& train, Index cap) : ratings_(train), cap_(cap) {}
  double predict(Index user, Index item, PredictionStats* stats = nullptr) const override;

private:
  RatingIndex ratings_;
  Index cap_;
};

class ItemBasedCF final : public Predictor {
public:
  ItemBasedCF(const RatingDataset& train, Index cap) : ratings_(train), cap_(cap) {}
  double predict(Index user, Index item, PredictionStats* stats = nullptr) const override;

private:
  RatingIndex ratings_;
  Index cap_;
};

class SlopeOne final : public Predictor {
public:
  explicit SlopeOne(const RatingDataset& train) : ratings_(train) {}
  double predict(Index user, Index item, PredictionStats* stats = nullptr) const override;

private:
  RatingIndex ratings_;
};

class CoupledItemCF final : public Predictor {
public:
  CoupledItemCF(const RatingDataset& train, std::shared_ptr<const CoupledItems> items, Index cap,
                NeighborSource source = NeighborSource::cluster)
      : ratings_(train), items_(std::move(items)), cap_(cap), source_(source) {}
  double predict(Index user, Index item, PredictionStats* stats = nullptr) const override;

private:
  RatingIndex ratings_;
  std::shared_ptr<const CoupledItems> items_;
  Index cap_;
  NeighborSource source_;
};

/// Unrated items by descending prediction, ties by ascending item index.
std::vector<Index> top_n(const RatingIndex& ratings, const Predictor& predictor, Index user, Index n,
                         PredictionStats* stats = nullptr);

}  // namespace coupledrec
