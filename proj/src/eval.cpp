#include "coupledrec/eval.hpp"

#include "coupledrec/csv.hpp"

#include <algorithm>
#include <chrono>
#include <map>
#include <numeric>
#include <ostream>
#include <random>
#include <unordered_set>

namespace coupledrec {
namespace {

double choose2(double n) { return n * (n - 1.0) / 2.0; }

}  // namespace

double rmse(std::span<const std::pair<double, double>> pairs) {
  if (pairs.empty()) throw std::invalid_argument("rmse of an empty test set");
  double sum = 0.0;
  for (auto [actual, predicted] : pairs) sum += (actual - predicted) * (actual - predicted);
  return std::sqrt(sum / static_cast<double>(pairs.size()));
}

double mae(std::span<const std::pair<double, double>> pairs) {
  if (pairs.empty()) throw std::invalid_argument("mae of an empty test set");
  double sum = 0.0;
  for (auto [actual, predicted] : pairs) sum += std::abs(actual - predicted);
  return sum / static_cast<double>(pairs.size());
}

double adjusted_rand_index(std::span<const Index> a, std::span<const Index> b) {
  if (a.size() != b.size()) throw std::invalid_argument("labelings differ in length");
  const auto n = static_cast<double>(a.size());
  if (a.size() < 2) return 1.0;
  std::map<std::pair<Index, Index>, double> joint;
  std::map<Index, double> rows;
  std::map<Index, double> cols;
  for (std::size_t i = 0; i < a.size(); ++i) {
    joint[{a[i], b[i]}] += 1.0;
    rows[a[i]] += 1.0;
    cols[b[i]] += 1.0;
  }
  double index = 0.0;
  for (const auto& [key, count] : joint) index += choose2(count);
  double sum_rows = 0.0;
  for (const auto& [key, count] : rows) sum_rows += choose2(count);
  double sum_cols = 0.0;
  for (const auto& [key, count] : cols) sum_cols += choose2(count);
  const double expected = sum_rows * sum_cols / choose2(n);
  const double maximum = 0.5 * (sum_rows + sum_cols);
  if (maximum == expected) return 1.0;  // both labelings trivial
  return (index - expected) / (maximum - expected);
}

std::vector<std::size_t> FoldPlan::test_rows(int fold) const {
  std::vector<std::size_t> out;
  for (std::size_t r = 0; r < fold_of.size(); ++r) {
    if (fold_of[r] == fold) out.push_back(r);
  }
  return out;
}

std::vector<std::size_t> FoldPlan::train_rows(int fold) const {
  std::vector<std::size_t> out;
  for (std::size_t r = 0; r < fold_of.size(); ++r) {
    if (fold_of[r] != fold) out.push_back(r);
  }
  return out;
}

FoldPlan kfold(const RatingDataset& ratings, int folds, std::uint64_t seed) {
  if (folds < 2) throw std::invalid_argument("need at least 2 folds");
  if (ratings.size() < static_cast<std::size_t>(folds)) {
    throw std::invalid_argument("fewer ratings (" + std::to_string(ratings.size()) + ") than folds (" +
                                std::to_string(folds) + ")");
  }
  std::vector<std::size_t> order(ratings.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  FoldPlan plan;
  plan.folds = folds;
  plan.fold_of.resize(ratings.size());
  for (std::size_t p = 0; p < order.size(); ++p) plan.fold_of[order[p]] = static_cast<int>(p % static_cast<std::size_t>(folds));
  return plan;
}

Algorithm parse_algorithm(std::string_view label) {
  if (label == "ucf") return Algorithm::ucf;
  if (label == "icf") return Algorithm::icf;
  if (label == "slope1") return Algorithm::slope1;
  if (label == "ck-cf") return Algorithm::ck_cf;
  if (label == "basemf") return Algorithm::basemf;
  if (label == "cmf") return Algorithm::cmf;
  throw InputError("unknown algorithm '" + std::string(label) + "' (expected one of " +
                   std::string(kAlgorithmLabels) + ")");
}

std::string_view algorithm_label(Algorithm algorithm) {
  switch (algorithm) {
    case Algorithm::ucf: return "ucf";
    case Algorithm::icf: return "icf";
    case Algorithm::slope1: return "slope1";
    case Algorithm::ck_cf: return "ck-cf";
    case Algorithm::basemf: return "basemf";
    case Algorithm::cmf: return "cmf";
  }
  return "?";
}

std::shared_ptr<const CoupledItems> build_coupled_items(const RatingDataset& ratings, const CategoricalTable& items,
                                                        const KModesOptions& clustering) {
  CoupledSimilarity similarity(items);
  auto clusters = ck_modes(similarity, clustering);
  return std::make_shared<const CoupledItems>(
      CoupledItems::align(ratings, items, clusters, coupling_matrix(similarity)));
}

PredictorFactory make_factory(const AlgorithmSpec& spec, const RatingDataset& all, const AuxInputs& aux) {
  switch (spec.algorithm) {
    case Algorithm::ucf:
      return [cap = spec.cap](const RatingDataset& train) { return std::make_unique<UserBasedCF>(train, cap); };
    case Algorithm::icf:
      return [cap = spec.cap](const RatingDataset& train) { return std::make_unique<ItemBasedCF>(train, cap); };
    case Algorithm::slope1:
      return [](const RatingDataset& train) { return std::make_unique<SlopeOne>(train); };
    case Algorithm::ck_cf: {
      if (aux.item_attributes == nullptr) throw InputError("ck-cf needs an item attribute table");
      auto items = build_coupled_items(all, *aux.item_attributes, spec.clustering);
      return [items, cap = spec.cap, source = spec.source](const RatingDataset& train) {
        return std::make_unique<CoupledItemCF>(train, items, cap, source);
      };
    }
    case Algorithm::basemf:
    case Algorithm::cmf: {
      const CouplingGraphs* graphs = nullptr;
      if (spec.algorithm == Algorithm::cmf) {
        if (aux.graphs == nullptr) throw InputError("cmf needs relation graphs");
        graphs = aux.graphs;
      }
      return [graphs, config = spec.mf](const RatingDataset& training) {
        auto result = train(training, graphs, config);
        return std::make_unique<FactorPredictor>(std::move(result.model), graphs, training.r_min, training.r_max);
      };
    }
  }
  throw std::logic_error("unhandled algorithm");
}

EvalReport cross_validate(const RatingDataset& ratings, const PredictorFactory& factory, std::string label, int folds,
                          std::uint64_t seed) {
  using Clock = std::chrono::steady_clock;
  const auto plan = kfold(ratings, folds, seed);
  EvalReport report;
  report.algorithm = std::move(label);
  std::vector<std::pair<double, double>> all_pairs;
  all_pairs.reserve(ratings.size());
  const auto start = Clock::now();
  for (int f = 0; f < folds; ++f) {
    const auto fold_start = Clock::now();
    const auto train_rows = plan.train_rows(f);
    const auto test_rows = plan.test_rows(f);
    // Leakage guard: no triple may be both trained on and scored.
    std::unordered_set<std::size_t> trained(train_rows.begin(), train_rows.end());
    for (auto r : test_rows) {
      if (trained.count(r) != 0) throw std::logic_error("fold " + std::to_string(f) + " tests on a training triple");
    }
    const auto predictor = factory(ratings.subset(train_rows));
    std::vector<std::pair<double, double>> pairs;
    pairs.reserve(test_rows.size());
    for (auto r : test_rows) {
      const auto& t = ratings.triples[r];
      pairs.emplace_back(t.value, ratings.clamp(predictor->predict(t.user, t.item)));
    }
    FoldResult result;
    result.fold = f;
    result.rmse = rmse(pairs);
    result.mae = mae(pairs);
    result.n_test = pairs.size();
    result.seconds = std::chrono::duration<double>(Clock::now() - fold_start).count();
    report.folds.push_back(result);
    all_pairs.insert(all_pairs.end(), pairs.begin(), pairs.end());
  }
  report.seconds = std::chrono::duration<double>(Clock::now() - start).count();
  report.aggregate.fold = -1;
  report.aggregate.rmse = rmse(all_pairs);
  report.aggregate.mae = mae(all_pairs);
  report.aggregate.n_test = all_pairs.size();
  report.aggregate.seconds = report.seconds;
  report.config = {{"folds", std::to_string(folds)}, {"seed", std::to_string(seed)}};
  return report;
}

EvalReport cross_validate(const RatingDataset& ratings, const AuxInputs& aux, const AlgorithmSpec& spec, int folds,
                          std::uint64_t seed) {
  auto report = cross_validate(ratings, make_factory(spec, ratings, aux), std::string(algorithm_label(spec.algorithm)),
                               folds, seed);
  report.config.emplace_back("cap", std::to_string(spec.cap));
  report.config.emplace_back("k", std::to_string(spec.clustering.k));
  report.config.emplace_back("rank", std::to_string(spec.mf.rank));
  report.config.emplace_back("lambda", to_roundtrip_string(spec.mf.lambda));
  report.config.emplace_back("lr", to_roundtrip_string(spec.mf.learning_rate));
  report.config.emplace_back("epochs", std::to_string(spec.mf.epochs));
  return report;
}

void write_report_csv(const EvalReport& report, std::ostream& out, bool header) {
  if (header) out << "algo,fold,rmse,mae,n_test,seconds\n";
  auto row = [&](const FoldResult& r, const std::string& fold) {
    out << csv::escape(report.algorithm) << ',' << fold << ',' << to_fixed_string(r.rmse, 6) << ','
        << to_fixed_string(r.mae, 6) << ',' << r.n_test << ',' << to_fixed_string(r.seconds, 6) << '\n';
  };
  for (const auto& f : report.folds) row(f, std::to_string(f.fold));
  row(report.aggregate, "all");
}

}  // namespace coupledrec
