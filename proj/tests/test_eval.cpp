#include "coupledrec/eval.hpp"

#include "test_support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <set>
#include <sstream>

namespace coupledrec {
namespace {

RatingDataset small_ratings(std::uint64_t seed, Index users, Index items, double density) {
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution keep(density);
  std::uniform_int_distribution<int> star(1, 5);
  RatingDataset d;
  d.num_users = users;
  d.num_items = items;
  for (Index u = 0; u < users; ++u) d.user_ids.push_back("u" + std::to_string(u));
  for (Index i = 0; i < items; ++i) d.item_ids.push_back("i" + std::to_string(i));
  for (Index u = 0; u < users; ++u) {
    for (Index i = 0; i < items; ++i) {
      if (keep(rng)) d.triples.push_back({u, i, static_cast<double>(star(rng))});
    }
  }
  return d;
}

class ConstantPredictor final : public Predictor {
public:
  explicit ConstantPredictor(double value) : value_(value) {}
  double predict(Index, Index, PredictionStats* stats) const override {
    if (stats) *stats = {};
    return value_;
  }

private:
  double value_;
};

TEST(Metrics, UnitExamples) {
  const std::vector<std::pair<double, double>> perfect{{1, 1}, {4, 4}};
  EXPECT_EQ(rmse(perfect), 0.0);
  EXPECT_EQ(mae(perfect), 0.0);
  const std::vector<std::pair<double, double>> errors{{0, 0}, {0, 2}};
  EXPECT_DOUBLE_EQ(rmse(errors), std::sqrt(2.0));
  EXPECT_DOUBLE_EQ(mae(errors), 1.0);
  Eigen::Vector2d actual(0, 0), predicted(0, 2);
  EXPECT_DOUBLE_EQ(rmse(actual, predicted), std::sqrt(2.0));
  EXPECT_DOUBLE_EQ(mae(actual, predicted), 1.0);
  EXPECT_THROW(rmse(std::span<const std::pair<double, double>>()), std::invalid_argument);
  EXPECT_THROW(mae(Eigen::VectorXd(), Eigen::VectorXd()), std::invalid_argument);
}

TEST(Metrics, RmseDominatesMae) {
  std::mt19937_64 rng(99);
  std::uniform_int_distribution<int> length(1, 50);
  std::normal_distribution<double> value(0.0, 2.0);
  for (int trial = 0; trial < 1000; ++trial) {
    Eigen::VectorXd a(length(rng));
    Eigen::VectorXd b(a.size());
    for (Index k = 0; k < a.size(); ++k) {
      a(k) = value(rng);
      b(k) = value(rng);
    }
    const double r = rmse(a, b);
    const double m = mae(a, b);
    EXPECT_GE(m, 0.0);
    EXPECT_GE(r + 1e-12, m);
  }
}

TEST(Kfold, PartitionInvariants) {
  const auto d = small_ratings(1, 20, 20, 0.3);
  for (int folds : {2, 3, 5, 7}) {
    const auto plan = kfold(d, folds, 42);
    ASSERT_EQ(plan.fold_of.size(), d.size());
    std::vector<std::size_t> sizes(static_cast<std::size_t>(folds));
    std::set<std::size_t> seen;
    for (int f = 0; f < folds; ++f) {
      const auto test = plan.test_rows(f);
      const auto train = plan.train_rows(f);
      EXPECT_EQ(test.size() + train.size(), d.size());
      for (auto r : test) EXPECT_TRUE(seen.insert(r).second);
      std::set<std::size_t> train_set(train.begin(), train.end());
      for (auto r : test) EXPECT_EQ(train_set.count(r), 0u);
      sizes[static_cast<std::size_t>(f)] = test.size();
    }
    EXPECT_EQ(seen.size(), d.size());
    const auto [lo, hi] = std::minmax_element(sizes.begin(), sizes.end());
    EXPECT_LE(*hi - *lo, 1u);
  }
  EXPECT_EQ(kfold(d, 5, 3).fold_of, kfold(d, 5, 3).fold_of);
  EXPECT_NE(kfold(d, 5, 3).fold_of, kfold(d, 5, 4).fold_of);
  EXPECT_THROW(kfold(d, 1, 0), std::invalid_argument);
  auto tiny = small_ratings(1, 2, 2, 1.0);
  EXPECT_THROW(kfold(tiny, 5, 0), std::invalid_argument);
}

TEST(CrossValidate, ConstantPredictorGivesSpreadAroundIt) {
  const auto d = small_ratings(2, 30, 30, 0.3);
  const double c = 3.0;
  const auto report = cross_validate(
      d, [c](const RatingDataset&) { return std::make_unique<ConstantPredictor>(c); }, "const", 5, 11);
  ASSERT_EQ(report.folds.size(), 5u);
  double squared = 0.0;
  double absolute = 0.0;
  for (const auto& t : d.triples) {
    squared += (t.value - c) * (t.value - c);
    absolute += std::abs(t.value - c);
  }
  const double n = static_cast<double>(d.size());
  EXPECT_EQ(report.aggregate.n_test, d.size());
  EXPECT_NEAR(report.aggregate.rmse, std::sqrt(squared / n), 1e-12);
  EXPECT_NEAR(report.aggregate.mae, absolute / n, 1e-12);
}

TEST(CrossValidate, TrainsWithoutTestTriples) {
  const auto d = small_ratings(3, 15, 15, 0.4);
  const auto plan = kfold(d, 5, 8);
  int fold = 0;
  auto factory = [&](const RatingDataset& train) {
    std::multiset<std::tuple<Index, Index>> keys;
    for (const auto& t : train.triples) keys.insert({t.user, t.item});
    for (auto r : plan.test_rows(fold)) {
      EXPECT_EQ(keys.count({d.triples[r].user, d.triples[r].item}), 0u);
    }
    EXPECT_EQ(train.size(), plan.train_rows(fold).size());
    ++fold;
    return std::make_unique<ConstantPredictor>(3.0);
  };
  cross_validate(d, factory, "probe", 5, 8);
  EXPECT_EQ(fold, 5);
}

TEST(CrossValidate, SpecDrivenRunsAreDeterministic) {
  const auto d = small_ratings(4, 25, 25, 0.3);
  AlgorithmSpec spec;
  spec.algorithm = Algorithm::basemf;
  spec.mf = {.rank = 2, .epochs = 5, .seed = 9};
  const auto a = cross_validate(d, AuxInputs{}, spec, 5, 1);
  const auto b = cross_validate(d, AuxInputs{}, spec, 5, 1);
  EXPECT_EQ(a.aggregate.rmse, b.aggregate.rmse);
  EXPECT_EQ(a.aggregate.mae, b.aggregate.mae);
  spec.algorithm = Algorithm::cmf;
  EXPECT_THROW(cross_validate(d, AuxInputs{}, spec, 5, 1), InputError);
  spec.algorithm = Algorithm::ck_cf;
  EXPECT_THROW(cross_validate(d, AuxInputs{}, spec, 5, 1), InputError);
}

TEST(Report, CsvLayout) {
  EvalReport report;
  report.algorithm = "icf";
  report.folds = {{0, 1.0, 0.5, 3, 0.25}, {1, 2.0, 1.5, 2, 0.5}};
  report.aggregate = {-1, 1.5, 1.0, 5, 0.75};
  std::ostringstream out;
  write_report_csv(report, out);
  EXPECT_EQ(out.str(),
            "algo,fold,rmse,mae,n_test,seconds\n"
            "icf,0,1.000000,0.500000,3,0.250000\n"
            "icf,1,2.000000,1.500000,2,0.500000\n"
            "icf,all,1.500000,1.000000,5,0.750000\n");
}

TEST(Algorithms, Labels) {
  for (auto label : {"ucf", "icf", "slope1", "ck-cf", "basemf", "cmf"}) {
    EXPECT_EQ(algorithm_label(parse_algorithm(label)), label);
  }
  EXPECT_THROW(parse_algorithm("svd"), InputError);
}

TEST(Synth, SeededAndShaped) {
  SynthConfig config{.seed = 5, .users = 30, .items = 40, .rank = 3};
  const auto a = synth_coupled(config);
  const auto b = synth_coupled(config);
  EXPECT_EQ(a.ratings.triples.size(), b.ratings.triples.size());
  for (std::size_t k = 0; k < a.ratings.size(); ++k) {
    EXPECT_EQ(a.ratings.triples[k].value, b.ratings.triples[k].value);
  }
  EXPECT_EQ(a.truth, b.truth);
  EXPECT_NO_THROW(a.ratings.validate());
  for (const auto& t : a.ratings.triples) {
    EXPECT_GE(t.value, 1.0);
    EXPECT_LE(t.value, 5.0);
    EXPECT_EQ(t.value, std::round(t.value));
  }
  config.friend_density = 0.0;
  const auto plain = synth_coupled(config);
  EXPECT_TRUE(plain.graphs.users.empty());
  EXPECT_TRUE(plain.graphs.items.empty());
}

TEST(Synth, NoiselessForwardModelIsExact) {
  const auto data = synth_coupled({.seed = 8, .users = 25, .items = 25, .rank = 3, .friend_density = 0.1,
                                   .noise = 0.0, .quantize = false});
  ASSERT_FALSE(data.ratings.empty());
  for (const auto& t : data.ratings.triples) {
    EXPECT_EQ(cmf_predict(data.truth, &data.graphs, t.user, t.item), t.value);
  }
}

TEST(Ari, KnownValues) {
  const std::vector<Index> a{0, 0, 1, 1, 2, 2};
  const std::vector<Index> relabeled{5, 5, 3, 3, 4, 4};
  EXPECT_DOUBLE_EQ(adjusted_rand_index(a, relabeled), 1.0);
  // index 2, row pairs 3, column pairs 6, expected 3 * 6 / 15
  const std::vector<Index> merged{0, 0, 0, 1, 1, 1};
  EXPECT_NEAR(adjusted_rand_index(a, merged), (2.0 - 1.2) / (4.5 - 1.2), 1e-15);
  EXPECT_THROW(adjusted_rand_index(a, std::vector<Index>{0}), std::invalid_argument);
}

TEST(Synth, PlantedClusters) {
  const auto planted = synth_clusters({.seed = 1});
  EXPECT_EQ(planted.table.num_objects(), 60);
  EXPECT_EQ(planted.table.num_attributes(), 6);
  EXPECT_EQ(planted.labels.size(), 60u);
  const auto clean = synth_clusters({.seed = 1, .noise = 0.0});
  for (Index o = 0; o < 60; ++o) {
    for (Index p = 0; p < 60; ++p) {
      const bool same_rows = clean.table.cells.row(o) == clean.table.cells.row(p);
      EXPECT_EQ(same_rows, clean.labels[static_cast<std::size_t>(o)] == clean.labels[static_cast<std::size_t>(p)]);
    }
  }
}

TEST(Bench, CandidateSetsFollowStructure) {
  const auto planted = synth_clusters({.seed = 2, .clusters = 4, .per_cluster = 10});
  auto d = small_ratings(6, 30, 40, 0.3);
  d.item_ids = planted.table.object_ids;
  const RatingIndex index(d);
  const BenchOptions options{.requests = 20, .warmup = 3, .seed = 4};

  // users drawn exactly as the benchmark draws them
  std::vector<Index> active;
  for (Index u = 0; u < index.num_users(); ++u) {
    if (!index.user_ratings(u).empty()) active.push_back(u);
  }
  std::mt19937_64 rng(options.seed);
  std::uniform_int_distribution<std::size_t> pick(0, active.size() - 1);
  for (Index r = 0; r < options.warmup; ++r) pick(rng);
  Index co_raters = 0;
  for (Index r = 0; r < options.requests; ++r) {
    const Index u = active[pick(rng)];
    for (Index i = 0; i < index.num_items(); ++i) {
      if (!index.rating(u, i)) {
        Index raters = 0;
        for (const auto& e : index.item_ratings(i)) raters += e.index != u;
        co_raters = std::max(co_raters, raters);
      }
    }
  }

  std::vector<BenchResult> rows;
  for (Index k : {2, 4, 8}) {
    auto items = build_coupled_items(d, planted.table, {.k = k, .seed = 3});
    const CoupledItemCF ck(d, items, 30);
    auto result = throughput_bench(ck, index, "ck-cf", k, options);
    EXPECT_LE(result.max_candidates, items->largest_cluster());
    auto again = throughput_bench(ck, index, "ck-cf", k, options);
    EXPECT_EQ(again.max_candidates, result.max_candidates);
    rows.push_back(result);

    const UserBasedCF ucf(d, 30);
    auto user_based = throughput_bench(ucf, index, "ucf", k, options);
    EXPECT_EQ(user_based.max_candidates, co_raters);
    rows.push_back(user_based);
  }
  std::ostringstream out;
  write_bench_csv(rows, out);
  std::istringstream lines(out.str());
  std::string line;
  std::getline(lines, line);
  EXPECT_EQ(line, kBenchHeader);
  int count = 0;
  while (std::getline(lines, line)) {
    EXPECT_EQ(std::count(line.begin(), line.end(), ','), 5);
    ++count;
  }
  EXPECT_EQ(count, 6);

  const auto tight = BenchOptions{.requests = 5, .warmup = 0, .seed = 4, .candidate_bound = 1};
  const UserBasedCF ucf(d, 30);
  EXPECT_THROW(throughput_bench(ucf, index, "ucf", 1, tight), std::logic_error);
}

}  // namespace
}  // namespace coupledrec
