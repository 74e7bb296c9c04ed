#pragma once

#include "coupledrec/coupling.hpp"
#include "coupledrec/ingest.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

namespace coupledrec {

using Assignment = Eigen::Matrix<Index, Eigen::Dynamic, 1>;

struct ClusterModel {
  Index k = 0;
  Assignment assignment;  // object -> cluster
  CodeMatrix modes;       // k x attributes
  double objective = 0.0;
  int iterations = 0;     // completed assign + update rounds
  bool converged = false;
  std::vector<double> objective_history;  // objective after each round

  std::vector<Index> cluster_sizes() const;
  std::vector<Index> members(Index cluster) const;
};

struct KModesOptions {
  Index k = 2;
  std::uint64_t seed = 0;
  int max_iter = 100;
  /// Independent initialisations; the run with the highest objective wins.
  int restarts = 1;
};

/// Attribute vectors of k distinct objects drawn uniformly without replacement.
CodeMatrix init_modes(const CategoricalTable& table, Index k, std::uint64_t seed);

/// Each object goes to the mode with the highest coupled similarity; ties go
/// to the lower cluster index.
Assignment assign(const CoupledSimilarity& similarity, const CodeMatrix& modes);

/// Mode maximising the summed coupled similarity to `members`, chosen per
/// attribute over the full domain (ties to the earlier domain value).
CodeVector update_mode(const CoupledSimilarity& similarity, std::span<const Index> members);

/// Sum over objects of CIS(object, mode of its cluster).
double clustering_objective(const CoupledSimilarity& similarity, const Assignment& assignment,
                            const CodeMatrix& modes);

/// K-modes driven by coupled similarity. Throws std::logic_error if the
/// objective ever decreases between rounds (beyond 1e-9).
ClusterModel ck_modes(const CoupledSimilarity& similarity, const KModesOptions& options);
ClusterModel ck_modes(const CategoricalTable& table, const KModesOptions& options);

/// Baseline: similarity = number of matching attributes, modes = majority values.
ClusterModel plain_k_modes(const CategoricalTable& table, const KModesOptions& options);

int simple_matching(const CategoricalTable& table, Index object, std::span<const int> mode);

/// `object_id,cluster`
void write_assignment_csv(const CategoricalTable& table, const ClusterModel& model, std::ostream& out);
/// `cluster,attr1,...,attrN` with value labels
void write_modes_csv(const CategoricalTable& table, const ClusterModel& model, std::ostream& out);

}  // namespace coupledrec
