#pragma once

// Latent factor models. The base model predicts
//   R_m + <P_u, Q_i>
// and the coupled model adds the user-user (S) and item-item (W) relation terms
//   + sum_{v in N(u)} S_uv <P_v, Q_i> + sum_{j in N(i)} W_ij <P_u, Q_j>.
// Passing no graphs (nullptr) always selects the base model.

#include "coupledrec/cf.hpp"
#include "coupledrec/ingest.hpp"

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <vector>

namespace coupledrec {

template <typename Scalar>
struct FactorModel {
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

  Matrix P;  // users x rank
  Matrix Q;  // items x rank
  Scalar offset = Scalar(0);
  bool train_offset = false;

  Index num_users() const { return P.rows(); }
  Index num_items() const { return Q.rows(); }
  Index rank() const { return P.cols(); }

  void validate() const {
    if (P.cols() != Q.cols()) throw std::invalid_argument("P and Q must share the rank");
    if (rank() > std::min(num_users(), num_items())) {
      throw std::invalid_argument("rank exceeds min(users, items)");
    }
    if (!P.allFinite() || !Q.allFinite() || !std::isfinite(static_cast<double>(offset))) {
      throw std::invalid_argument("factor model has non-finite entries");
    }
  }

  friend bool operator==(const FactorModel& a, const FactorModel& b) {
    return a.offset == b.offset && a.train_offset == b.train_offset && a.P.rows() == b.P.rows() &&
           a.P.cols() == b.P.cols() && a.Q.rows() == b.Q.rows() && a.Q.cols() == b.Q.cols() && a.P == b.P &&
           a.Q == b.Q;
  }
};

using FactorModeld = FactorModel<double>;

/// Partial derivatives of the training loss, shaped like the model.
template <typename Scalar>
struct FactorGradient {
  typename FactorModel<Scalar>::Matrix P;
  typename FactorModel<Scalar>::Matrix Q;
  Scalar offset = Scalar(0);
};

template <typename Scalar>
Scalar base_predict(const FactorModel<Scalar>& model, Index user, Index item) {
  return model.offset + model.P.row(user).dot(model.Q.row(item));
}

template <typename Scalar>
Scalar cmf_predict(const FactorModel<Scalar>& model, const CouplingGraphs* graphs, Index user, Index item) {
  Scalar value = base_predict(model, user, item);
  if (graphs == nullptr) return value;
  for (const auto& nb : graphs->users.neighbors(user)) {
    value += Scalar(nb.weight) * model.P.row(nb.node).dot(model.Q.row(item));
  }
  for (const auto& nb : graphs->items.neighbors(item)) {
    value += Scalar(nb.weight) * model.P.row(user).dot(model.Q.row(nb.node));
  }
  return value;
}

/// 1/2 sum (R_ui - R̂_ui)^2 + lambda/2 (|P|_F^2 + |Q|_F^2).
template <typename Scalar>
Scalar loss(const FactorModel<Scalar>& model, const CouplingGraphs* graphs, std::span<const Rating> ratings,
            Scalar lambda) {
  Scalar squared(0);
  for (const auto& r : ratings) {
    const Scalar e = Scalar(r.value) - cmf_predict(model, graphs, r.user, r.item);
    squared += e * e;
  }
  return Scalar(0.5) * squared + Scalar(0.5) * lambda * (model.P.squaredNorm() + model.Q.squaredNorm());
}

/// Adds the derivative of 1/2 (value - R̂_ui)^2 with respect to every
/// parameter R̂_ui depends on, scaled by `scale`, into `grad`.
template <typename Scalar>
void accumulate_residual_gradient(const FactorModel<Scalar>& model, const CouplingGraphs* graphs, const Rating& r,
                                  Scalar scale, FactorGradient<Scalar>& grad) {
  const Scalar e = Scalar(r.value) - cmf_predict(model, graphs, r.user, r.item);
  const Scalar g = -e * scale;  // d(1/2 e^2)/dR̂
  const auto pu = model.P.row(r.user);
  const auto qi = model.Q.row(r.item);
  // dR̂/dP_u = Q_i + sum_j W_ij Q_j ; dR̂/dQ_i = P_u + sum_v S_uv P_v
  grad.P.row(r.user) += g * qi;
  grad.Q.row(r.item) += g * pu;
  if (graphs != nullptr) {
    for (const auto& nb : graphs->users.neighbors(r.user)) {
      grad.P.row(nb.node) += (g * Scalar(nb.weight)) * qi;
      grad.Q.row(r.item) += (g * Scalar(nb.weight)) * model.P.row(nb.node);
    }
    for (const auto& nb : graphs->items.neighbors(r.item)) {
      grad.P.row(r.user) += (g * Scalar(nb.weight)) * model.Q.row(nb.node);
      grad.Q.row(nb.node) += (g * Scalar(nb.weight)) * pu;
    }
  }
  grad.offset += g;
}

/// Exact gradient of loss() with respect to P, Q and the offset.
template <typename Scalar>
FactorGradient<Scalar> gradients(const FactorModel<Scalar>& model, const CouplingGraphs* graphs,
                                 std::span<const Rating> ratings, Scalar lambda) {
  FactorGradient<Scalar> grad;
  grad.P = lambda * model.P;
  grad.Q = lambda * model.Q;
  for (const auto& r : ratings) accumulate_residual_gradient(model, graphs, r, Scalar(1), grad);
  return grad;
}

struct TrainConfig {
  Index rank = 8;
  double lambda = 0.05;
  double learning_rate = 0.01;
  int epochs = 20;
  double init_scale = 0.1;
  std::uint64_t seed = 0;
  bool shuffle = true;
  bool train_offset = false;

  void validate() const;
};

struct TrainResult {
  FactorModeld model;
  std::vector<double> epoch_loss;  // full training loss after each epoch
  std::size_t updates = 0;         // SGD steps taken
};

/// Thrown when the training loss stops being finite.
class TrainingDiverged : public std::runtime_error {
public:
  TrainingDiverged(int epoch, double value);
  int epoch() const { return epoch_; }

private:
  int epoch_;
};

/// Uniform [-init_scale, init_scale] factors under the seed, offset = mean rating.
FactorModeld init_model(const RatingDataset& ratings, const TrainConfig& config);

/// Per-rating SGD on loss(); `graphs == nullptr` trains the base model.
TrainResult train(const RatingDataset& ratings, const CouplingGraphs* graphs, const TrainConfig& config);

/// Predictions clamped to [r_min, r_max].
std::vector<double> mf_predict_batch(const FactorModeld& model, const CouplingGraphs* graphs,
                                     std::span<const std::pair<Index, Index>> pairs, double r_min, double r_max);

class FactorPredictor final : public Predictor {
public:
  FactorPredictor(FactorModeld model, const CouplingGraphs* graphs, double r_min, double r_max)
      : model_(std::move(model)), graphs_(graphs), r_min_(r_min), r_max_(r_max) {}
  double predict(Index user, Index item, PredictionStats* stats = nullptr) const override;
  const FactorModeld& model() const { return model_; }

private:
  FactorModeld model_;
  const CouplingGraphs* graphs_;
  double r_min_;
  double r_max_;
};

/// Text container, version 1:
///   coupledrec-factor-model 1
///   users <u0> items <i0> rank <d>
///   offset <R_m>
///   flags train_offset=<0|1>
///   P            then u0 rows of d values
///   Q            then i0 rows of d values
/// Values are written in shortest round-trip decimal form, so reading back is lossless.
void write_model(const FactorModeld& model, std::ostream& out);
void write_model(const FactorModeld& model, const std::filesystem::path& path);
FactorModeld read_model(std::istream& in);
FactorModeld read_model(const std::filesystem::path& path);

}  // namespace coupledrec
