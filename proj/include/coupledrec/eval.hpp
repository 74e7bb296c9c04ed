#pragma once

#include "coupledrec/cf.hpp"
#include "coupledrec/ingest.hpp"
#include "coupledrec/kmodes.hpp"
#include "coupledrec/mf.hpp"

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace coupledrec {

// ---------------------------------------------------------------- metrics

template <typename DerivedA, typename DerivedB>
double rmse(const Eigen::MatrixBase<DerivedA>& actual, const Eigen::MatrixBase<DerivedB>& predicted) {
  if (actual.size() == 0) throw std::invalid_argument("rmse of an empty test set");
  if (actual.size() != predicted.size()) throw std::invalid_argument("rmse: size mismatch");
  return std::sqrt((actual - predicted).squaredNorm() / static_cast<double>(actual.size()));
}

template <typename DerivedA, typename DerivedB>
double mae(const Eigen::MatrixBase<DerivedA>& actual, const Eigen::MatrixBase<DerivedB>& predicted) {
  if (actual.size() == 0) throw std::invalid_argument("mae of an empty test set");
  if (actual.size() != predicted.size()) throw std::invalid_argument("mae: size mismatch");
  return (actual - predicted).cwiseAbs().sum() / static_cast<double>(actual.size());
}

/// (actual, predicted) pairs.
double rmse(std::span<const std::pair<double, double>> pairs);
double mae(std::span<const std::pair<double, double>> pairs);

/// Chance-corrected agreement of two labelings of the same objects.
double adjusted_rand_index(std::span<const Index> a, std::span<const Index> b);

// ---------------------------------------------------------------- folds

struct FoldPlan {
  int folds = 0;
  std::vector<int> fold_of;  // rating triple -> fold

  std::vector<std::size_t> test_rows(int fold) const;
  std::vector<std::size_t> train_rows(int fold) const;
};

/// Seeded shuffle, then round-robin fold assignment (sizes differ by at most one).
FoldPlan kfold(const RatingDataset& ratings, int folds, std::uint64_t seed);

// ---------------------------------------------------------------- algorithms

enum class Algorithm { ucf, icf, slope1, ck_cf, basemf, cmf };

Algorithm parse_algorithm(std::string_view label);
std::string_view algorithm_label(Algorithm algorithm);
inline constexpr std::string_view kAlgorithmLabels = "ucf, icf, slope1, ck-cf, basemf, cmf";

struct AlgorithmSpec {
  Algorithm algorithm = Algorithm::icf;
  Index cap = 30;
  NeighborSource source = NeighborSource::cluster;
  KModesOptions clustering;  // ck-cf
  TrainConfig mf;            // basemf, cmf
};

/// Side information. Item attributes feed ck-cf; graphs feed cmf.
struct AuxInputs {
  const CategoricalTable* item_attributes = nullptr;
  const CouplingGraphs* graphs = nullptr;
};

using PredictorFactory = std::function<std::unique_ptr<Predictor>(const RatingDataset& train)>;

/// Builds training-set predictors for `spec`. For ck-cf the item clustering
/// and CIS matrix come from attributes only and are computed once here.
PredictorFactory make_factory(const AlgorithmSpec& spec, const RatingDataset& all, const AuxInputs& aux);

/// The coupled-item inputs ck-cf uses, exposed for benchmarking.
std::shared_ptr<const CoupledItems> build_coupled_items(const RatingDataset& ratings, const CategoricalTable& items,
                                                        const KModesOptions& clustering);

// ---------------------------------------------------------------- cross-validation

struct FoldResult {
  int fold = -1;  // -1 for the aggregate
  double rmse = 0.0;
  double mae = 0.0;
  std::size_t n_test = 0;
  double seconds = 0.0;
};

struct EvalReport {
  std::string algorithm;
  std::vector<FoldResult> folds;
  FoldResult aggregate;  // micro-average over the union of test folds
  double seconds = 0.0;
  std::vector<std::pair<std::string, std::string>> config;
};

EvalReport cross_validate(const RatingDataset& ratings, const PredictorFactory& factory, std::string label,
                          int folds, std::uint64_t seed);
EvalReport cross_validate(const RatingDataset& ratings, const AuxInputs& aux, const AlgorithmSpec& spec, int folds,
                          std::uint64_t seed);

/// `algo,fold,rmse,mae,n_test,seconds` rows plus a final `all` row.
void write_report_csv(const EvalReport& report, std::ostream& out, bool header = true);

// ---------------------------------------------------------------- synthetic data

struct SynthConfig {
  std::uint64_t seed = 0;
  Index users = 200;
  Index items = 200;
  Index rank = 4;
  double friend_density = 0.05;  // probability of a user-user and of an item-item link
  double noise = 0.3;            // Gaussian sigma
  double rating_density = 0.2;   // probability a (user, item) cell is observed
  double offset = 3.0;
  double factor_scale = 0.7;     // sigma of the planted factor entries
  bool quantize = true;          // clip to [1, 5] and round to integers
};

struct SyntheticData {
  RatingDataset ratings;
  CouplingGraphs graphs;
  FactorModeld truth;
};

/// Ratings drawn from the coupled forward model with planted factors and
/// relation graphs (undirected links, row-normalised).
SyntheticData synth_coupled(const SynthConfig& config);

struct SynthClustersConfig {
  std::uint64_t seed = 0;
  Index clusters = 3;
  Index per_cluster = 20;
  Index attributes = 6;
  Index domain_size = 6;
  double noise = 0.1;  // probability a cell is replaced by a uniform random value
};

struct PlantedClusters {
  CategoricalTable table;
  std::vector<Index> labels;
};

PlantedClusters synth_clusters(const SynthClustersConfig& config);

// ---------------------------------------------------------------- throughput

struct BenchResult {
  std::string algorithm;
  Index k = 0;
  Index requests = 0;
  double seconds = 0.0;
  double throughput = 0.0;  // recommendation lists per second
  Index max_candidates = 0;
};

struct BenchOptions {
  Index requests = 100;
  Index warmup = 10;
  Index list_length = 10;
  std::uint64_t seed = 0;
  /// When positive, a request scanning more candidates than this throws.
  Index candidate_bound = 0;
};

/// Times `requests` top-N lists for seeded users after `warmup` untimed ones.
BenchResult throughput_bench(const Predictor& predictor, const RatingIndex& ratings, std::string algorithm, Index k,
                             const BenchOptions& options);

/// `algo,k,requests,seconds,throughput,max_candidates`
void write_bench_csv(std::span<const BenchResult> rows, std::ostream& out, bool header = true);
inline constexpr std::string_view kBenchHeader = "algo,k,requests,seconds,throughput,max_candidates";

}  // namespace coupledrec
