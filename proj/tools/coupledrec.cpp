// coupledrec: batch front end for similarity, clustering, prediction,
// factor training, cross-validation and throughput runs.
//
// Every subcommand accepts --config FILE with `key = value` lines, where key is
// a long flag name without the dashes. Flags given on the command line win.
// Exit status: 0 success, 2 bad input or flags, 1 runtime failure.

#include "coupledrec/cf.hpp"
#include "coupledrec/coupling.hpp"
#include "coupledrec/csv.hpp"
#include "coupledrec/eval.hpp"
#include "coupledrec/ingest.hpp"
#include "coupledrec/kmodes.hpp"
#include "coupledrec/mf.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <charconv>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace {

using namespace coupledrec;

struct Options {
  std::string config;
  std::string ratings;
  std::string items;
  std::string social;
  std::string item_links;
  std::string pairs;
  std::string model;
  std::string output = "-";
  std::string modes_output;
  std::string loss_output;
  std::string algo = "ck-cf";
  std::string algos = "ucf,icf,slope1,ck-cf";
  std::string method = "ck";
  std::string scope = "cluster";
  std::string ks = "2,4,8";
  Index k = 3;
  int max_iter = 100;
  int restarts = 1;
  Index cap = 30;
  Index rank = 8;
  double lambda = 0.05;
  double lr = 0.01;
  int epochs = 20;
  double init_scale = 0.1;
  bool train_offset = false;
  bool normalize_social = true;
  bool normalize_links = true;
  int folds = 5;
  std::uint64_t seed = 0;
  int threads = 1;
  double rating_min = 1.0;
  double rating_max = 5.0;
  Index requests = 100;
  Index warmup = 10;
  Index list_length = 10;
};

// ---------------------------------------------------------------- output

class Output {
public:
  explicit Output(std::string path) : path_(std::move(path)) {}
  std::ostream& stream() { return buffer_; }
  void commit() const {
    if (path_ == "-") {
      std::cout << buffer_.str() << std::flush;
      return;
    }
    write_text(path_, buffer_.str());
  }
  static void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot open output file '" + path + "'");
    out << text;
    if (!out.flush()) throw std::runtime_error("failed writing '" + path + "'");
  }

private:
  std::string path_;
  std::ostringstream buffer_;
};

// ---------------------------------------------------------------- inputs

RatingDataset read_ratings(const Options& o) {
  if (o.ratings.empty()) throw InputError("--ratings is required");
  return load_ratings(o.ratings, o.rating_min, o.rating_max);
}

CategoricalTable read_items(const Options& o) {
  if (o.items.empty()) throw InputError("--items is required");
  return load_attribute_table(o.items);
}

CouplingGraphs read_graphs(const Options& o, const RatingDataset& ratings) {
  CouplingGraphs graphs{RelationGraph(ratings.num_users), RelationGraph(ratings.num_items)};
  if (!o.social.empty()) graphs.users = load_graph(o.social, ratings.user_ids, o.normalize_social);
  if (!o.item_links.empty()) graphs.items = load_graph(o.item_links, ratings.item_ids, o.normalize_links);
  return graphs;
}

KModesOptions clustering_options(const Options& o) {
  return {.k = o.k, .seed = o.seed, .max_iter = o.max_iter, .restarts = o.restarts};
}

TrainConfig train_config(const Options& o) {
  TrainConfig c;
  c.rank = o.rank;
  c.lambda = o.lambda;
  c.learning_rate = o.lr;
  c.epochs = o.epochs;
  c.init_scale = o.init_scale;
  c.seed = o.seed;
  c.train_offset = o.train_offset;
  c.validate();
  return c;
}

NeighborSource parse_scope(const std::string& scope) {
  if (scope == "cluster") return NeighborSource::cluster;
  if (scope == "global") return NeighborSource::global;
  throw InputError("unknown scope '" + scope + "' (expected cluster or global)");
}

AlgorithmSpec algorithm_spec(const Options& o, Algorithm algorithm) {
  AlgorithmSpec spec;
  spec.algorithm = algorithm;
  spec.cap = o.cap;
  spec.source = parse_scope(o.scope);
  spec.clustering = clustering_options(o);
  spec.mf = train_config(o);
  return spec;
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  if (out.empty()) throw InputError("empty list '" + text + "'");
  return out;
}

struct SideInputs {
  std::optional<CategoricalTable> items;
  std::optional<CouplingGraphs> graphs;

  AuxInputs aux() const { return {items ? &*items : nullptr, graphs ? &*graphs : nullptr}; }
};

SideInputs side_inputs(const Options& o, const RatingDataset& ratings, Algorithm algorithm) {
  SideInputs side;
  if (algorithm == Algorithm::ck_cf) side.items = read_items(o);
  if (algorithm == Algorithm::cmf) side.graphs = read_graphs(o, ratings);
  return side;
}

// ---------------------------------------------------------------- commands

void cmd_sim(const Options& o) {
  const auto table = read_items(o);
  CoupledSimilarity similarity(table);
  const auto matrix = coupling_matrix(similarity, o.threads);
  Output out(o.output);
  write_similarity_csv(matrix, table.object_ids, out.stream());
  out.commit();
}

void cmd_cluster(const Options& o) {
  const auto table = read_items(o);
  const auto options = clustering_options(o);
  ClusterModel model;
  if (o.method == "ck") {
    model = ck_modes(table, options);
  } else if (o.method == "plain") {
    model = plain_k_modes(table, options);
  } else {
    throw InputError("unknown clustering method '" + o.method + "' (expected ck or plain)");
  }
  Output out(o.output);
  write_assignment_csv(table, model, out.stream());
  std::optional<Output> modes;
  if (!o.modes_output.empty()) {
    modes.emplace(o.modes_output);
    write_modes_csv(table, model, modes->stream());
  }
  out.commit();
  if (modes) modes->commit();
}

std::unique_ptr<Predictor> load_predictor(const Options& o, Algorithm algorithm, const RatingDataset& ratings,
                                          const SideInputs& side) {
  if (!o.model.empty()) {
    if (algorithm != Algorithm::basemf && algorithm != Algorithm::cmf) {
      throw InputError("--model only applies to basemf and cmf");
    }
    auto model = read_model(std::filesystem::path(o.model));
    if (model.num_users() != ratings.num_users || model.num_items() != ratings.num_items) {
      throw InputError("model shape " + std::to_string(model.num_users()) + "x" + std::to_string(model.num_items()) +
                       " does not match the rating file (" + std::to_string(ratings.num_users) + "x" +
                       std::to_string(ratings.num_items) + ")");
    }
    const CouplingGraphs* graphs = algorithm == Algorithm::cmf ? &*side.graphs : nullptr;
    return std::make_unique<FactorPredictor>(std::move(model), graphs, ratings.r_min, ratings.r_max);
  }
  return make_factory(algorithm_spec(o, algorithm), ratings, side.aux())(ratings);
}

void cmd_predict(const Options& o) {
  const auto algorithm = parse_algorithm(o.algo);
  const auto ratings = read_ratings(o);
  if (o.pairs.empty()) throw InputError("--pairs is required");
  const auto doc = csv::read_file(o.pairs);
  csv::require_header(doc, {"user_id", "item_id"}, o.pairs);
  for (std::size_t r = 0; r < doc.rows.size(); ++r) {
    if (doc.rows[r].size() != 2) {
      throw InputError(o.pairs + ":" + std::to_string(doc.line_numbers[r]) + ": expected 2 fields");
    }
  }
  const auto side = side_inputs(o, ratings, algorithm);
  const auto predictor = load_predictor(o, algorithm, ratings, side);
  const RatingIndex index(ratings);
  const auto& means = index.means();
  const auto users = ratings.user_lookup();
  const auto items = ratings.item_lookup();

  Output out(o.output);
  out.stream() << "user_id,item_id,prediction\n";
  for (const auto& row : doc.rows) {
    const auto u = users.find(row[0]);
    const auto i = items.find(row[1]);
    double value;
    if (u != users.end() && i != items.end()) {
      value = predictor->predict(u->second, i->second);
    } else if (u != users.end() && means.has_user[static_cast<std::size_t>(u->second)]) {
      value = means.user_mean(u->second);
    } else if (i != items.end() && means.has_item[static_cast<std::size_t>(i->second)]) {
      value = means.item_mean(i->second);
    } else {
      value = means.global_mean;
    }
    out.stream() << csv::escape(row[0]) << ',' << csv::escape(row[1]) << ','
                 << to_fixed_string(ratings.clamp(value), 6) << '\n';
  }
  out.commit();
}

void cmd_train_mf(const Options& o) {
  const auto algorithm = parse_algorithm(o.algo);
  if (algorithm != Algorithm::basemf && algorithm != Algorithm::cmf) {
    throw InputError("train-mf needs --algo basemf or cmf");
  }
  const auto ratings = read_ratings(o);
  const auto config = train_config(o);
  std::optional<CouplingGraphs> graphs;
  if (algorithm == Algorithm::cmf) graphs = read_graphs(o, ratings);
  const auto result = train(ratings, graphs ? &*graphs : nullptr, config);
  Output out(o.output);
  write_model(result.model, out.stream());
  std::optional<Output> losses;
  if (!o.loss_output.empty()) {
    losses.emplace(o.loss_output);
    losses->stream() << "epoch,loss\n";
    for (std::size_t e = 0; e < result.epoch_loss.size(); ++e) {
      losses->stream() << e + 1 << ',' << to_roundtrip_string(result.epoch_loss[e]) << '\n';
    }
  }
  out.commit();
  if (losses) losses->commit();
}

void cmd_eval(const Options& o) {
  std::vector<Algorithm> algorithms;
  for (const auto& label : split_list(o.algo)) algorithms.push_back(parse_algorithm(label));
  const auto ratings = read_ratings(o);
  if (o.folds < 2) throw InputError("--folds must be at least 2");
  Output out(o.output);
  bool header = true;
  for (auto algorithm : algorithms) {
    const auto side = side_inputs(o, ratings, algorithm);
    const auto report = cross_validate(ratings, side.aux(), algorithm_spec(o, algorithm), o.folds, o.seed);
    write_report_csv(report, out.stream(), header);
    header = false;
  }
  out.commit();
}

void cmd_bench(const Options& o) {
  std::vector<Algorithm> algorithms;
  for (const auto& label : split_list(o.algos)) algorithms.push_back(parse_algorithm(label));
  std::vector<Index> ks;
  for (const auto& text : split_list(o.ks)) {
    Index k = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), k);
    if (ec != std::errc() || ptr != text.data() + text.size() || k < 1) {
      throw InputError("--ks: '" + text + "' is not a positive integer");
    }
    ks.push_back(k);
  }
  const auto ratings = read_ratings(o);
  const RatingIndex index(ratings);
  const BenchOptions options{.requests = o.requests, .warmup = o.warmup, .list_length = o.list_length, .seed = o.seed};
  std::vector<BenchResult> rows;
  for (auto algorithm : algorithms) {
    const auto side = side_inputs(o, ratings, algorithm);
    // Models that ignore k are built once and timed at every k.
    std::unique_ptr<Predictor> shared;
    for (Index k : ks) {
      auto run = options;
      std::unique_ptr<Predictor> local;
      const Predictor* predictor;
      if (algorithm == Algorithm::ck_cf) {
        auto spec = algorithm_spec(o, algorithm);
        spec.clustering.k = k;
        auto items = build_coupled_items(ratings, *side.items, spec.clustering);
        run.candidate_bound = std::max<Index>(1, items->largest_cluster());
        local = std::make_unique<CoupledItemCF>(ratings, std::move(items), spec.cap, spec.source);
        predictor = local.get();
      } else {
        if (!shared) shared = make_factory(algorithm_spec(o, algorithm), ratings, side.aux())(ratings);
        predictor = shared.get();
      }
      rows.push_back(throughput_bench(*predictor, index, std::string(algorithm_label(algorithm)), k, run));
    }
  }
  Output out(o.output);
  write_bench_csv(rows, out.stream());
  out.commit();
}

// ---------------------------------------------------------------- flags

void add_common(CLI::App& cmd, Options& o) {
  cmd.add_option("--config", o.config, "key = value file supplying defaults for these flags");
  cmd.add_option("--seed", o.seed, "seed for every random choice");
  cmd.add_option("--threads", o.threads, "worker threads")->check(CLI::Range(1, 1024));
  cmd.add_option("-o,--output", o.output, "output file, - for stdout");
}

void add_ratings(CLI::App& cmd, Options& o) {
  cmd.add_option("--ratings", o.ratings, "ratings CSV (user_id,item_id,rating)")->required();
  cmd.add_option("--rating-min", o.rating_min, "lowest valid rating");
  cmd.add_option("--rating-max", o.rating_max, "highest valid rating");
}

void add_side(CLI::App& cmd, Options& o) {
  cmd.add_option("--items", o.items, "item attribute CSV (id,attr1,...)");
  cmd.add_option("--social", o.social, "user relation CSV (src,dst,weight)");
  cmd.add_option("--item-links", o.item_links, "item relation CSV (src,dst,weight)");
  cmd.add_option("--normalize-social", o.normalize_social, "row-normalise user relations");
  cmd.add_option("--normalize-links", o.normalize_links, "row-normalise item relations");
}

void add_clustering(CLI::App& cmd, Options& o) {
  cmd.add_option("-k,--k", o.k, "number of clusters")->check(CLI::PositiveNumber);
  cmd.add_option("--max-iter", o.max_iter, "k-modes round limit")->check(CLI::PositiveNumber);
  cmd.add_option("--restarts", o.restarts, "k-modes initialisations, best objective kept")
      ->check(CLI::PositiveNumber);
}

void add_cf(CLI::App& cmd, Options& o) {
  cmd.add_option("--cap", o.cap, "neighbour limit")->check(CLI::PositiveNumber);
  cmd.add_option("--scope", o.scope, "ck-cf neighbours: cluster or global")
      ->check(CLI::IsMember({"cluster", "global"}));
}

void add_mf(CLI::App& cmd, Options& o) {
  cmd.add_option("-d,--rank", o.rank, "latent dimension")->check(CLI::PositiveNumber);
  cmd.add_option("--lambda", o.lambda, "L2 weight")->check(CLI::NonNegativeNumber);
  cmd.add_option("--lr", o.lr, "SGD step size")->check(CLI::PositiveNumber);
  cmd.add_option("--epochs", o.epochs, "SGD passes")->check(CLI::PositiveNumber);
  cmd.add_option("--init-scale", o.init_scale, "uniform factor init half-width")->check(CLI::PositiveNumber);
  cmd.add_option("--train-offset", o.train_offset, "also learn the global offset");
}

// Arguments after the subcommand, with the config file entries spliced in
// front of the command-line flags so the latter take precedence.
std::vector<std::string> expand_config(std::vector<std::string> args) {
  std::string path;
  for (std::size_t a = 1; a < args.size(); ++a) {
    if (args[a] == "--config" && a + 1 < args.size()) path = args[a + 1];
    if (args[a].rfind("--config=", 0) == 0) path = args[a].substr(9);
  }
  if (path.empty() || args.empty()) return args;
  std::ifstream in(path);
  if (!in) throw InputError("cannot open config file '" + path + "'");
  std::vector<std::string> injected;
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw InputError(path + ":" + std::to_string(number) + ": expected key = value");
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    const auto key = trim(line.substr(0, eq));
    const auto value = trim(line.substr(eq + 1));
    if (key.empty() || key == "config") throw InputError(path + ":" + std::to_string(number) + ": bad key");
    injected.push_back("--" + key + "=" + value);
  }
  args.insert(args.begin() + 1, injected.begin(), injected.end());
  return args;
}

int run(int argc, char** argv) {
  Options o;
  CLI::App app{"Coupled-similarity recommenders: similarity, clustering, CF, factor models, evaluation", "coupledrec"};
  app.require_subcommand(1);
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);

  auto* sim = app.add_subcommand("sim", "pairwise coupled object similarity CSV");
  add_common(*sim, o);
  sim->add_option("--items", o.items, "attribute CSV (id,attr1,...)")->required();

  auto* cluster = app.add_subcommand("cluster", "k-modes clustering of an attribute table");
  add_common(*cluster, o);
  cluster->add_option("--items", o.items, "attribute CSV (id,attr1,...)")->required();
  add_clustering(*cluster, o);
  cluster->add_option("--method", o.method, "ck (coupled) or plain (matching)")->check(CLI::IsMember({"ck", "plain"}));
  cluster->add_option("--modes-output", o.modes_output, "also write cluster modes here");

  auto* predict = app.add_subcommand("predict", "predict ratings for user/item pairs");
  add_common(*predict, o);
  add_ratings(*predict, o);
  add_side(*predict, o);
  add_clustering(*predict, o);
  add_cf(*predict, o);
  add_mf(*predict, o);
  predict->add_option("--algo", o.algo, std::string("one of ") + std::string(kAlgorithmLabels));
  predict->add_option("--pairs", o.pairs, "CSV of user_id,item_id to score")->required();
  predict->add_option("--model", o.model, "factor model from train-mf (basemf/cmf)");

  auto* train_mf = app.add_subcommand("train-mf", "train a factor model and write it");
  add_common(*train_mf, o);
  add_ratings(*train_mf, o);
  add_side(*train_mf, o);
  add_mf(*train_mf, o);
  train_mf->add_option("--algo", o.algo, "basemf or cmf")->check(CLI::IsMember({"basemf", "cmf"}))->required();
  train_mf->add_option("--loss-output", o.loss_output, "per-epoch training loss CSV");

  auto* eval = app.add_subcommand("eval", "k-fold cross-validation report");
  add_common(*eval, o);
  add_ratings(*eval, o);
  add_side(*eval, o);
  add_clustering(*eval, o);
  add_cf(*eval, o);
  add_mf(*eval, o);
  eval->add_option("--algo", o.algo, "comma-separated algorithm labels");
  eval->add_option("--folds", o.folds, "fold count")->check(CLI::Range(2, 1000));

  auto* bench = app.add_subcommand("bench", "top-10 list throughput per algorithm and k");
  add_common(*bench, o);
  add_ratings(*bench, o);
  add_side(*bench, o);
  add_clustering(*bench, o);
  add_cf(*bench, o);
  add_mf(*bench, o);
  bench->add_option("--algos", o.algos, "comma-separated algorithm labels");
  bench->add_option("--ks", o.ks, "comma-separated cluster counts");
  bench->add_option("--requests", o.requests, "timed requests")->check(CLI::PositiveNumber);
  bench->add_option("--warmup", o.warmup, "untimed requests")->check(CLI::NonNegativeNumber);
  bench->add_option("--list-length", o.list_length, "items per recommendation list")->check(CLI::PositiveNumber);

  std::vector<std::string> args(argv + 1, argv + argc);
  try {
    args = expand_config(std::move(args));
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  if (!(o.rating_min < o.rating_max)) throw InputError("--rating-min must be below --rating-max");
  if (o.k < 1 || o.max_iter < 1 || o.restarts < 1) throw InputError("clustering flags must be positive");
  if (*sim) cmd_sim(o);
  if (*cluster) cmd_cluster(o);
  if (*predict) cmd_predict(o);
  if (*train_mf) cmd_train_mf(o);
  if (*eval) cmd_eval(o);
  if (*bench) cmd_bench(o);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const InputError& e) {
    std::cerr << "coupledrec: " << e.what() << '\n';
    return 2;
  } catch (const DomainError& e) {
    std::cerr << "coupledrec: " << e.what() << '\n';
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "coupledrec: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "coupledrec: " << e.what() << '\n';
    return 1;
  }
}
