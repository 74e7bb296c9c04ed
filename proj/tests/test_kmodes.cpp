#include "coupledrec/eval.hpp"
#include "coupledrec/kmodes.hpp"

#include "test_support.hpp"

#include <gtest/gtest.h>

#include <random>
#include <set>
#include <sstream>

namespace coupledrec {
namespace {

using testing::brute_force_mode;
using testing::random_table;
using testing::t1_table;

CategoricalTable copies_table() {
  std::vector<std::string> ids;
  std::vector<std::vector<std::string>> rows;
  const std::vector<std::vector<std::string>> protos{{"a", "p", "x"}, {"b", "q", "y"}, {"c", "r", "z"}};
  for (int copy = 0; copy < 3; ++copy) {
    for (int g = 0; g < 3; ++g) {
      ids.push_back("o" + std::to_string(ids.size()));
      rows.push_back(protos[static_cast<std::size_t>(g)]);
    }
  }
  return CategoricalTable::from_rows(ids, {"c1", "c2", "c3"}, rows);
}

std::vector<Index> labels_of(const ClusterModel& m) { return {m.assignment.begin(), m.assignment.end()}; }

TEST(InitModes, DistinctObjectsAndDeterminism) {
  const auto table = t1_table();
  const auto all = init_modes(table, 4, 1);
  std::multiset<std::vector<int>> rows;
  std::multiset<std::vector<int>> objects;
  for (Index r = 0; r < 4; ++r) {
    rows.insert({all(r, 0), all(r, 1)});
    objects.insert({table.cells(r, 0), table.cells(r, 1)});
  }
  EXPECT_EQ(rows, objects);
  EXPECT_EQ(init_modes(table, 2, 42), init_modes(table, 2, 42));
  const auto one = init_modes(table, 1, 3);
  EXPECT_EQ(one.rows(), 1);
  EXPECT_THROW(init_modes(table, 5, 0), std::invalid_argument);
  EXPECT_THROW(init_modes(table, 0, 0), std::invalid_argument);
}

TEST(Assign, PicksExplicitArgmaxAndBreaksTiesLow) {
  const auto table = t1_table();
  CoupledSimilarity sim(table);
  FrequencyIndex index(table);
  const auto params = CouplingParams::uniform(2);
  CodeMatrix modes(2, 2);
  modes << 0, 0,  // (x, a) = object 0
      1, 0;       // (y, a) = object 2
  const auto a = assign(sim, modes);
  for (Index o = 0; o < 4; ++o) {
    const std::vector<int> obj{table.cells(o, 0), table.cells(o, 1)};
    const double s0 = cis(index, params, obj, std::vector<int>{0, 0});
    const double s1 = cis(index, params, obj, std::vector<int>{1, 0});
    ASSERT_NE(s0, s1);
    EXPECT_EQ(a(o), s0 > s1 ? 0 : 1) << "object " << o;
  }
  // object 2 equals mode 1 and its CIS to mode 1 is the larger one
  EXPECT_EQ(a(2), 1);

  CodeMatrix twins(2, 2);
  twins << 1, 0, 1, 0;
  EXPECT_TRUE((assign(sim, twins).array() == 0).all());

  CodeMatrix single(1, 2);
  single << 0, 1;
  EXPECT_TRUE((assign(sim, single).array() == 0).all());
}

TEST(UpdateMode, SingleAttributeExample) {
  const auto table = CategoricalTable::from_rows({"0", "1", "2"}, {"c"}, {{"a"}, {"a"}, {"b"}});
  CoupledSimilarity sim(table);
  const std::vector<Index> members{0, 1, 2};
  // sums: a -> 2*(4/8) + 2/5 = 1.4 ; b -> 2*(2/5) + 1/3
  const auto oracle = brute_force_mode(table, members);
  EXPECT_NEAR(oracle.best, 1.4, 1e-15);
  EXPECT_NEAR(oracle.runner_up, 0.8 + 1.0 / 3.0, 1e-15);
  EXPECT_EQ(update_mode(sim, members)(0), 0);
}

TEST(UpdateMode, IdenticalMembersAndSingleMember) {
  const auto table = copies_table();
  CoupledSimilarity sim(table);
  const std::vector<Index> same{0, 3, 6};
  EXPECT_EQ(update_mode(sim, same), CodeVector(table.cells.row(0).transpose()));
  for (Index o = 0; o < table.num_objects(); ++o) {
    const std::vector<Index> one{o};
    const auto oracle = brute_force_mode(table, one);
    EXPECT_EQ(update_mode(sim, one), oracle.mode);
  }
  EXPECT_THROW(update_mode(sim, std::vector<Index>{}), std::invalid_argument);
}

TEST(UpdateMode, MatchesBruteForceOnRandomTables) {
  std::mt19937_64 rng(17);
  int checked = 0;
  for (int trial = 0; trial < 60; ++trial) {
    const auto table = random_table(rng, 12, 3, 4);
    CoupledSimilarity sim(table);
    std::bernoulli_distribution keep(0.5);
    std::vector<Index> members;
    for (Index o = 0; o < table.num_objects(); ++o) {
      if (keep(rng)) members.push_back(o);
    }
    if (members.empty()) members.push_back(0);
    const auto oracle = brute_force_mode(table, members);
    const auto mode = update_mode(sim, members);
    double total = 0.0;
    for (Index o : members) total += sim.cis_to(o, mode);
    EXPECT_NEAR(total, oracle.best, 1e-9);
    if (oracle.best - oracle.runner_up > 1e-9) {
      EXPECT_EQ(mode, oracle.mode);
      ++checked;
    }
  }
  EXPECT_GT(checked, 20);
}

TEST(CkModes, RecoversIdenticalCopies) {
  const auto table = copies_table();
  std::vector<Index> truth;
  for (Index o = 0; o < table.num_objects(); ++o) truth.push_back(o % 3);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto model = ck_modes(table, {.k = 3, .seed = seed, .max_iter = 20});
    EXPECT_DOUBLE_EQ(adjusted_rand_index(labels_of(model), truth), 1.0) << "seed " << seed;
    EXPECT_LE(model.iterations, 3) << "seed " << seed;
    EXPECT_TRUE(model.converged);
  }
}

TEST(CkModes, ObjectiveInvariantsAndDeterminism) {
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 20; ++trial) {
    const auto table = random_table(rng, 25, 4, 5);
    const Index k = std::min<Index>(3, table.num_objects());
    CoupledSimilarity sim(table);
    const auto model = ck_modes(sim, {.k = k, .seed = static_cast<std::uint64_t>(trial), .max_iter = 50});
    EXPECT_NEAR(model.objective, clustering_objective(sim, model.assignment, model.modes), 1e-9);
    for (std::size_t t = 1; t < model.objective_history.size(); ++t) {
      EXPECT_GE(model.objective_history[t], model.objective_history[t - 1] - 1e-9);
    }
    for (Index o = 0; o < model.assignment.size(); ++o) {
      EXPECT_GE(model.assignment(o), 0);
      EXPECT_LT(model.assignment(o), k);
    }
    for (Index c = 0; c < k; ++c) {
      for (Index j = 0; j < table.num_attributes(); ++j) {
        EXPECT_GE(model.modes(c, j), 0);
        EXPECT_LT(model.modes(c, j), table.domain_size(j));
      }
    }
    const auto again = ck_modes(sim, {.k = k, .seed = static_cast<std::uint64_t>(trial), .max_iter = 50});
    EXPECT_EQ(again.assignment, model.assignment);
    EXPECT_EQ(again.modes, model.modes);
    EXPECT_EQ(again.objective_history, model.objective_history);
  }
}

TEST(CkModes, SingleIterationAndKEqualsObjects) {
  const auto table = copies_table();
  const auto once = ck_modes(table, {.k = 2, .seed = 4, .max_iter = 1});
  EXPECT_EQ(once.iterations, 1);
  EXPECT_EQ(once.objective_history.size(), 1u);

  const auto singles = ck_modes(table, {.k = table.num_objects(), .seed = 1, .max_iter = 10});
  for (auto size : singles.cluster_sizes()) EXPECT_EQ(size, 1);

  const auto whole = ck_modes(table, {.k = 1, .seed = 1, .max_iter = 10});
  EXPECT_TRUE((whole.assignment.array() == 0).all());
  EXPECT_THROW(ck_modes(table, {.k = 2, .seed = 1, .max_iter = 0}), std::invalid_argument);
}

TEST(CkModes, RestartsKeepTheBestObjective) {
  const auto planted = synth_clusters({.seed = 3});
  CoupledSimilarity sim(planted.table);
  const auto single = ck_modes(sim, {.k = 3, .seed = 9, .max_iter = 50, .restarts = 1});
  const auto multi = ck_modes(sim, {.k = 3, .seed = 9, .max_iter = 50, .restarts = 8});
  EXPECT_GE(multi.objective, single.objective - 1e-12);
}

TEST(PlainKModes, BaselineBehaviour) {
  const auto table = copies_table();
  std::vector<Index> truth;
  for (Index o = 0; o < table.num_objects(); ++o) truth.push_back(o % 3);
  const auto model = plain_k_modes(table, {.k = 3, .seed = 5, .max_iter = 20});
  EXPECT_DOUBLE_EQ(adjusted_rand_index(labels_of(model), truth), 1.0);
  const std::vector<int> row{table.cells(0, 0), table.cells(0, 1), table.cells(0, 2)};
  EXPECT_EQ(simple_matching(table, 0, row), 3);
  const auto again = plain_k_modes(table, {.k = 3, .seed = 5, .max_iter = 20});
  EXPECT_EQ(again.assignment, model.assignment);

  const auto singles = plain_k_modes(table, {.k = 4, .seed = 2, .max_iter = 10});
  EXPECT_TRUE(singles.converged);
}

TEST(ClusterCsv, Schemas) {
  const auto table = t1_table();
  const auto model = ck_modes(table, {.k = 2, .seed = 0, .max_iter = 10});
  std::ostringstream a;
  std::ostringstream m;
  write_assignment_csv(table, model, a);
  write_modes_csv(table, model, m);
  EXPECT_EQ(a.str().rfind("object_id,cluster\no0,", 0), 0u);
  EXPECT_EQ(m.str().rfind("cluster,j,k\n0,", 0), 0u);
}

}  // namespace
}  // namespace coupledrec
