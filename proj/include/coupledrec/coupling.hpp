#pragma once

// Coupled similarity between categorical objects.
//
// For one attribute j, two values x and y are compared through
//   * intra coupling: how often each value occurs in column j, and
//   * inter coupling: how alike the conditional distributions of every other
//     attribute k are, given x versus given y.
// Their product is the coupled attribute-value similarity; summing it over
// attributes gives the coupled object similarity.

#include "coupledrec/common.hpp"
#include "coupledrec/ingest.hpp"

#include <Eigen/Core>

#include <iosfwd>
#include <span>
#include <vector>

namespace coupledrec {

using SimilarityMatrix = Eigen::MatrixXd;

/// Per attribute: which objects carry each value, plus value-by-value
/// co-occurrence counts for every ordered attribute pair.
class FrequencyIndex {
public:
  explicit FrequencyIndex(const CategoricalTable& table);

  Index num_objects() const { return cells_.rows(); }
  Index num_attributes() const { return cells_.cols(); }
  Index domain_size(Index attribute) const { return static_cast<Index>(members_[idx(attribute)].size()); }

  /// Objects with `value` in `attribute`, ascending.
  std::span<const Index> objects_with(Index attribute, int value) const;
  Index count(Index attribute, int value) const;

  /// Number of objects with value `x` in `j` and value `w` in `k`.
  Index cooccurrence(Index j, int x, Index k, int w) const { return cooc_[pair(j, k)](x, w); }

  int value(Index object, Index attribute) const { return cells_(object, attribute); }
  const CodeMatrix& cells() const { return cells_; }

  /// Throws DomainError unless `value` is a code of `attribute` with a nonzero count.
  void require_present(Index attribute, int value) const;
  void require_in_domain(Index attribute, int value) const;

private:
  static std::size_t idx(Index i) { return static_cast<std::size_t>(i); }
  std::size_t pair(Index j, Index k) const { return idx(j * num_attributes() + k); }

  CodeMatrix cells_;
  std::vector<std::vector<std::vector<Index>>> members_;  // [attribute][value] -> objects
  std::vector<Eigen::MatrixXi> cooc_;                      // [j * n + k] -> |V_j| x |V_k|
};

/// Convex weights for aggregating pairwise inter couplings: row j holds the
/// weight of every other attribute k. The diagonal is unused and zero.
struct CouplingParams {
  Eigen::MatrixXd inter_weights;

  static CouplingParams uniform(Index num_attributes);
  void validate() const;
};

/// Frequency-based similarity of two values of one attribute, in [1/3, 1).
double iaavs(const FrequencyIndex& index, Index j, int x, int y);

/// Fraction of objects with value `x` in attribute `j` whose value in
/// attribute `k` lies in `values`.
double icp(const FrequencyIndex& index, Index k, std::span<const int> values, Index j, int x);

/// Inter coupling of values x, y of attribute j relative to attribute k, via
/// the closed form 2 - sum_w max(P(w|x), P(w|y)).
double ieavs_pair(const FrequencyIndex& index, Index j, Index k, int x, int y);

/// The same quantity by enumerating every subset of k's domain. Refuses
/// domains larger than kMaxExhaustiveDomain.
double ieavs_pair_exhaustive(const FrequencyIndex& index, Index j, Index k, int x, int y);
inline constexpr Index kMaxExhaustiveDomain = 20;

/// Weighted inter coupling over all k != j; 1 for single-attribute tables.
double ieavs(const FrequencyIndex& index, const CouplingParams& params, Index j, int x, int y);

double cavs(const FrequencyIndex& index, const CouplingParams& params, Index j, int x, int y);

/// Coupled similarity between two objects of the indexed table.
double cis(const FrequencyIndex& index, const CouplingParams& params, Index a, Index b);

/// Coupled similarity between two value vectors (one code per attribute).
double cis(const FrequencyIndex& index, const CouplingParams& params, std::span<const int> a,
           std::span<const int> b);

/// Precomputed coupled attribute-value similarities, one |V_j| x |V_j| table
/// per attribute. Lookups replace repeated evaluation of cavs().
class CoupledSimilarity {
public:
  CoupledSimilarity(const CategoricalTable& table, CouplingParams params);
  explicit CoupledSimilarity(const CategoricalTable& table);

  const FrequencyIndex& index() const { return index_; }
  const CouplingParams& params() const { return params_; }
  Index num_objects() const { return index_.num_objects(); }
  Index num_attributes() const { return index_.num_attributes(); }

  double cavs(Index j, int x, int y) const { return cavs_[static_cast<std::size_t>(j)](x, y); }
  const Eigen::MatrixXd& cavs_table(Index j) const { return cavs_[static_cast<std::size_t>(j)]; }

  double cis(Index a, Index b) const;

  template <typename Derived>
  double cis_to(Index object, const Eigen::MatrixBase<Derived>& values) const {
    double total = 0.0;
    for (Index j = 0; j < num_attributes(); ++j) total += cavs(j, index_.value(object, j), values(j));
    return total;
  }

private:
  FrequencyIndex index_;
  CouplingParams params_;
  std::vector<Eigen::MatrixXd> cavs_;
};

/// Full CIS matrix over all objects. Rows of the upper triangle are split
/// across `threads` workers.
SimilarityMatrix coupling_matrix(const CategoricalTable& table, const CouplingParams& params, int threads = 1);
SimilarityMatrix coupling_matrix(const CoupledSimilarity& similarity, int threads = 1);

/// CSV `id_a,id_b,cis`, upper triangle plus diagonal, 12 significant digits.
void write_similarity_csv(const SimilarityMatrix& sim, std::span<const std::string> ids, std::ostream& out);

}  // namespace coupledrec
