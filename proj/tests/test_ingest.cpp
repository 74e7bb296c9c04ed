#include "coupledrec/csv.hpp"
#include "coupledrec/ingest.hpp"

#include "test_support.hpp"

#include <gtest/gtest.h>

#include <random>
#include <set>
#include <sstream>

namespace coupledrec {
namespace {

using testing::TempDir;

TEST(Csv, QuotedFieldsAndCrlf) {
  EXPECT_EQ(csv::split_line("a,\"b,c\",d\r"), (csv::Row{"a", "b,c", "d"}));
  EXPECT_EQ(csv::split_line("\"say \"\"hi\"\"\",,x"), (csv::Row{"say \"hi\"", "", "x"}));
  EXPECT_THROW(csv::split_line("\"open"), InputError);
  EXPECT_EQ(csv::escape("p,q"), "\"p,q\"");
  EXPECT_EQ(csv::escape("plain"), "plain");
}

TEST(LoadAttributeTable, BuildsDomainsInFirstAppearanceOrder) {
  TempDir dir("attrs");
  auto path = dir.write("items.csv", "id,color,size\nu1,red,S\nu2,blue,M\nu3,red,\"L,XL\"\n");
  const auto table = load_attribute_table(path);
  EXPECT_EQ(table.num_attributes(), 2);
  EXPECT_EQ(table.num_objects(), 3);
  EXPECT_EQ(table.domains[0], (std::vector<std::string>{"red", "blue"}));
  EXPECT_EQ(table.domains[1], (std::vector<std::string>{"S", "M", "L,XL"}));
  EXPECT_EQ(table.cells(2, 0), 0);
  EXPECT_EQ(table.cells(2, 1), 2);
}

TEST(LoadAttributeTable, EmptyCellBecomesSentinel) {
  TempDir dir("attrs");
  auto path = dir.write("items.csv", "id,color,size\r\nu1,red,S\r\nu2,,M\r\n");
  const auto table = load_attribute_table(path);
  EXPECT_EQ(table.domains[0], (std::vector<std::string>{"red", std::string(kMissingValue)}));
  EXPECT_EQ(table.cells(1, 0), 1);
}

TEST(LoadAttributeTable, RejectsDuplicateIdsAndRaggedRows) {
  TempDir dir("attrs");
  try {
    load_attribute_table(dir.write("dup.csv", "id,c\nu1,a\nu1,b\n"));
    FAIL() << "duplicate id accepted";
  } catch (const InputError& e) {
    EXPECT_NE(std::string(e.what()).find("u1"), std::string::npos);
  }
  try {
    load_attribute_table(dir.write("ragged.csv", "id,c,d\nu1,a,b\nu2,a\n"));
    FAIL() << "ragged row accepted";
  } catch (const InputError& e) {
    EXPECT_NE(std::string(e.what()).find(":3:"), std::string::npos) << e.what();
  }
  EXPECT_THROW(load_attribute_table(dir.path() / "missing.csv"), InputError);
}

TEST(LoadAttributeTable, WriteThenLoadRoundTrips) {
  TempDir dir("roundtrip");
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 25; ++trial) {
    auto table = testing::random_table(rng, 12, 4, 5);
    // sprinkle missing values and awkward labels
    auto values = std::vector<std::vector<std::string>>();
    for (Index o = 0; o < table.num_objects(); ++o) {
      std::vector<std::string> row;
      for (Index j = 0; j < table.num_attributes(); ++j) {
        auto v = table.domains[static_cast<std::size_t>(j)][static_cast<std::size_t>(table.cells(o, j))];
        if (v == "v1") v = "";
        if (v == "v2") v = "with,comma \"q\"";
        row.push_back(v);
      }
      values.push_back(row);
    }
    table = CategoricalTable::from_rows(table.object_ids, table.attribute_names, values);
    const auto path = dir.path() / ("t" + std::to_string(trial) + ".csv");
    write_attribute_table(table, path);
    EXPECT_EQ(load_attribute_table(path), table);
  }
}

TEST(LoadRatings, DenseFirstAppearanceIndexing) {
  TempDir dir("ratings");
  auto path = dir.write("r.csv", "user_id,item_id,rating\nbob,m1,4\nann,m2,3.5\nbob,m3,1\nann,m1,5\n");
  const auto data = load_ratings(path, 1.0, 5.0);
  EXPECT_EQ(data.num_users, 2);
  EXPECT_EQ(data.num_items, 3);
  EXPECT_EQ(data.user_ids, (std::vector<std::string>{"bob", "ann"}));
  EXPECT_EQ(data.item_ids, (std::vector<std::string>{"m1", "m2", "m3"}));
  EXPECT_EQ(data.triples[3], (Rating{1, 0, 5.0}));
  EXPECT_NO_THROW(data.validate());
  EXPECT_EQ(load_ratings(path, 1.0, 5.0), data);
}

TEST(LoadRatings, RejectsOutOfRangeAndDuplicates) {
  TempDir dir("ratings");
  try {
    load_ratings(dir.write("r.csv", "user_id,item_id,rating\na,x,3\na,y,6.0\n"), 1.0, 5.0);
    FAIL();
  } catch (const InputError& e) {
    EXPECT_NE(std::string(e.what()).find(":3:"), std::string::npos) << e.what();
  }
  EXPECT_THROW(load_ratings(dir.write("d.csv", "user_id,item_id,rating\na,x,3\na,x,4\n"), 1.0, 5.0), InputError);
  EXPECT_THROW(load_ratings(dir.write("h.csv", "user,item,rating\na,x,3\n"), 1.0, 5.0), InputError);
  EXPECT_THROW(load_ratings(dir.write("n.csv", "user_id,item_id,rating\na,x,three\n"), 1.0, 5.0), InputError);
}

TEST(LoadRatings, ReindexingIsABijection) {
  TempDir dir("ratings");
  std::string text = "user_id,item_id,rating\n";
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<int> id(0, 30);
  std::set<std::pair<int, int>> used;
  for (int r = 0; r < 200; ++r) {
    int u = id(rng), i = id(rng);
    if (!used.emplace(u, i).second) continue;
    text += "user" + std::to_string(u) + ",item" + std::to_string(i) + ",3\n";
  }
  const auto data = load_ratings(dir.write("r.csv", text), 1.0, 5.0);
  const auto users = data.user_lookup();
  EXPECT_EQ(static_cast<Index>(users.size()), data.num_users);
  for (Index u = 0; u < data.num_users; ++u) EXPECT_EQ(users.at(data.user_ids[static_cast<std::size_t>(u)]), u);
}

TEST(LoadGraph, NormalizesAndDropsSelfLoops) {
  TempDir dir("graph");
  const std::vector<std::string> ids{"a", "b", "c"};
  const auto g = load_graph(dir.write("g.csv", "src,dst,weight\na,b,1\na,c,1\na,a,1\n"), ids, true);
  EXPECT_EQ(g.self_loops_dropped(), 1u);
  ASSERT_EQ(g.neighbors(0).size(), 2u);
  EXPECT_DOUBLE_EQ(g.neighbors(0)[0].weight, 0.5);
  EXPECT_DOUBLE_EQ(g.neighbors(0)[1].weight, 0.5);
  EXPECT_TRUE(g.neighbors(1).empty());
  EXPECT_NO_THROW(g.validate());

  const auto empty = load_graph(dir.write("e.csv", "src,dst,weight\n"), ids, true);
  EXPECT_TRUE(empty.empty());
  EXPECT_EQ(empty.node_count(), 3);
}

TEST(LoadGraph, RejectsUnknownIdsAndNegativeWeights) {
  TempDir dir("graph");
  const std::vector<std::string> ids{"a", "b"};
  try {
    load_graph(dir.write("g.csv", "src,dst,weight\na,zed,1\n"), ids, false);
    FAIL();
  } catch (const InputError& e) {
    EXPECT_NE(std::string(e.what()).find("zed"), std::string::npos);
  }
  EXPECT_THROW(load_graph(dir.write("n.csv", "src,dst,weight\na,b,-1\n"), ids, false), InputError);
}

TEST(RelationGraph, NormalizedRowsSumToOne) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> w(0.0, 3.0);
  std::vector<Edge> edges;
  for (Index a = 0; a < 20; ++a) {
    for (Index b = 0; b < 20; ++b) {
      if (a != b && (a * 7 + b * 3) % 5 == 0) edges.push_back({a, b, w(rng)});
    }
  }
  RelationGraph g(20, edges, true);
  for (Index v = 0; v < 20; ++v) {
    double total = 0.0;
    for (const auto& nb : g.neighbors(v)) total += nb.weight;
    if (!g.neighbors(v).empty()) EXPECT_NEAR(total, 1.0, 1e-9);
  }
}

}  // namespace
}  // namespace coupledrec
