#include "coupledrec/mf.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>
#include <string>

namespace coupledrec {
namespace {

using RowVector = Eigen::Matrix<double, 1, Eigen::Dynamic>;

constexpr std::string_view kModelMagic = "coupledrec-factor-model";
constexpr int kModelVersion = 1;

// One SGD step on the squared error of a single rating. All deltas are
// computed from the current parameters before any of them is applied.
// Regularisation touches only P_u and Q_i.
void sgd_step(FactorModeld& model, const CouplingGraphs* graphs, const Rating& r, const TrainConfig& config) {
  const double e = r.value - cmf_predict(model, graphs, r.user, r.item);
  const double g = -e;
  const RowVector pu = model.P.row(r.user);
  const RowVector qi = model.Q.row(r.item);
  RowVector user_side = pu;  // P_u + sum_v S_uv P_v
  RowVector item_side = qi;  // Q_i + sum_j W_ij Q_j
  if (graphs != nullptr) {
    for (const auto& nb : graphs->users.neighbors(r.user)) user_side += nb.weight * model.P.row(nb.node);
    for (const auto& nb : graphs->items.neighbors(r.item)) item_side += nb.weight * model.Q.row(nb.node);
  }
  const double lr = config.learning_rate;
  if (graphs != nullptr) {
    for (const auto& nb : graphs->users.neighbors(r.user)) model.P.row(nb.node) -= lr * (g * nb.weight) * qi;
    for (const auto& nb : graphs->items.neighbors(r.item)) model.Q.row(nb.node) -= lr * (g * nb.weight) * pu;
  }
  model.P.row(r.user) -= lr * (g * item_side + config.lambda * pu);
  model.Q.row(r.item) -= lr * (g * user_side + config.lambda * qi);
  if (model.train_offset) model.offset -= lr * g;
}

void expect_token(std::istream& in, std::string_view token) {
  std::string word;
  if (!(in >> word) || word != token) {
    throw InputError("model file: expected '" + std::string(token) + "', got '" + word + "'");
  }
}

template <typename T>
T read_value(std::istream& in, std::string_view what) {
  std::string word;
  if (!(in >> word)) throw InputError("model file: missing " + std::string(what));
  T value{};
  auto [ptr, ec] = std::from_chars(word.data(), word.data() + word.size(), value);
  if (ec != std::errc() || ptr != word.data() + word.size()) {
    throw InputError("model file: bad " + std::string(what) + " '" + word + "'");
  }
  return value;
}

}  // namespace

void TrainConfig::validate() const {
  if (rank < 1) throw std::invalid_argument("rank must be at least 1");
  if (!(lambda >= 0.0)) throw std::invalid_argument("lambda must be nonnegative");
  if (!(learning_rate > 0.0)) throw std::invalid_argument("learning rate must be positive");
  if (epochs < 1) throw std::invalid_argument("epochs must be at least 1");
  if (!(init_scale > 0.0)) throw std::invalid_argument("init scale must be positive");
}

TrainingDiverged::TrainingDiverged(int epoch, double value)
    : std::runtime_error("training diverged at epoch " + std::to_string(epoch) + " (loss " + std::to_string(value) + ")"),
      epoch_(epoch) {}

FactorModeld init_model(const RatingDataset& ratings, const TrainConfig& config) {
  config.validate();
  if (ratings.empty()) throw std::invalid_argument("cannot train on an empty rating set");
  if (config.rank > std::min(ratings.num_users, ratings.num_items)) {
    throw std::invalid_argument("rank " + std::to_string(config.rank) + " exceeds min(users, items) = " +
                                std::to_string(std::min(ratings.num_users, ratings.num_items)));
  }
  std::mt19937_64 rng(config.seed);
  std::uniform_real_distribution<double> uniform(-config.init_scale, config.init_scale);
  FactorModeld model;
  model.P.resize(ratings.num_users, config.rank);
  model.Q.resize(ratings.num_items, config.rank);
  for (Index u = 0; u < model.P.rows(); ++u) {
    for (Index f = 0; f < config.rank; ++f) model.P(u, f) = uniform(rng);
  }
  for (Index i = 0; i < model.Q.rows(); ++i) {
    for (Index f = 0; f < config.rank; ++f) model.Q(i, f) = uniform(rng);
  }
  model.offset = ratings.global_mean();
  model.train_offset = config.train_offset;
  return model;
}

TrainResult train(const RatingDataset& ratings, const CouplingGraphs* graphs, const TrainConfig& config) {
  TrainResult result;
  result.model = init_model(ratings, config);
  if (graphs != nullptr &&
      (graphs->users.node_count() != ratings.num_users || graphs->items.node_count() != ratings.num_items)) {
    throw std::invalid_argument("relation graphs are not indexed like the rating set");
  }
  // A separate stream for shuffling keeps initialisation independent of the shuffle flag.
  std::mt19937_64 shuffle_rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<std::size_t> order(ratings.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    if (config.shuffle) std::shuffle(order.begin(), order.end(), shuffle_rng);
    for (auto k : order) {
      sgd_step(result.model, graphs, ratings.triples[k], config);
      ++result.updates;
    }
    const double value = loss(result.model, graphs, std::span<const Rating>(ratings.triples), config.lambda);
    if (!std::isfinite(value)) throw TrainingDiverged(epoch, value);
    result.epoch_loss.push_back(value);
  }
  return result;
}

std::vector<double> mf_predict_batch(const FactorModeld& model, const CouplingGraphs* graphs,
                                     std::span<const std::pair<Index, Index>> pairs, double r_min, double r_max) {
  std::vector<double> out;
  out.reserve(pairs.size());
  for (auto [u, i] : pairs) out.push_back(std::clamp(cmf_predict(model, graphs, u, i), r_min, r_max));
  return out;
}

double FactorPredictor::predict(Index user, Index item, PredictionStats* stats) const {
  if (stats) *stats = {};
  return std::clamp(cmf_predict(model_, graphs_, user, item), r_min_, r_max_);
}

void write_model(const FactorModeld& model, std::ostream& out) {
  out << kModelMagic << ' ' << kModelVersion << '\n';
  out << "users " << model.num_users() << " items " << model.num_items() << " rank " << model.rank() << '\n';
  out << "offset " << to_roundtrip_string(model.offset) << '\n';
  out << "flags train_offset=" << (model.train_offset ? 1 : 0) << '\n';
  auto dump = [&](const char* name, const FactorModeld::Matrix& m) {
    out << name << '\n';
    for (Index r = 0; r < m.rows(); ++r) {
      for (Index c = 0; c < m.cols(); ++c) out << (c ? " " : "") << to_roundtrip_string(m(r, c));
      out << '\n';
    }
  };
  dump("P", model.P);
  dump("Q", model.Q);
}

void write_model(const FactorModeld& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  write_model(model, out);
}

FactorModeld read_model(std::istream& in) {
  expect_token(in, kModelMagic);
  const int version = read_value<int>(in, "version");
  if (version != kModelVersion) throw InputError("model file: unsupported version " + std::to_string(version));
  expect_token(in, "users");
  const auto users = read_value<Index>(in, "user count");
  expect_token(in, "items");
  const auto items = read_value<Index>(in, "item count");
  expect_token(in, "rank");
  const auto rank = read_value<Index>(in, "rank");
  if (users < 0 || items < 0 || rank < 0) throw InputError("model file: negative dimension");
  FactorModeld model;
  expect_token(in, "offset");
  model.offset = read_value<double>(in, "offset");
  std::string flag;
  expect_token(in, "flags");
  in >> flag;
  if (flag == "train_offset=1") {
    model.train_offset = true;
  } else if (flag != "train_offset=0") {
    throw InputError("model file: bad flags '" + flag + "'");
  }
  auto load = [&](const char* name, Index rows, FactorModeld::Matrix& m) {
    expect_token(in, name);
    m.resize(rows, rank);
    for (Index r = 0; r < rows; ++r) {
      for (Index c = 0; c < rank; ++c) m(r, c) = read_value<double>(in, "factor entry");
    }
  };
  load("P", users, model.P);
  load("Q", items, model.Q);
  return model;
}

FactorModeld read_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open model file: " + path.string());
  return read_model(in);
}

}  // namespace coupledrec
