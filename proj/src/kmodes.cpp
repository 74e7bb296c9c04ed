#include "coupledrec/kmodes.hpp"

#include "coupledrec/csv.hpp"

#include <algorithm>
#include <numeric>
#include <ostream>
#include <random>
#include <stdexcept>
#include <string>

namespace coupledrec {
namespace {

constexpr double kObjectiveSlack = 1e-9;

CodeMatrix draw_modes(const CodeMatrix& cells, Index k, std::uint64_t seed) {
  const Index m = cells.rows();
  if (k < 1 || k > m) {
    throw std::invalid_argument("k must lie in [1, " + std::to_string(m) + "], got " + std::to_string(k));
  }
  std::mt19937_64 rng(seed);
  std::vector<Index> order(static_cast<std::size_t>(m));
  std::iota(order.begin(), order.end(), Index{0});
  CodeMatrix modes(k, cells.cols());
  for (Index c = 0; c < k; ++c) {
    std::uniform_int_distribution<Index> pick(c, m - 1);
    std::swap(order[static_cast<std::size_t>(c)], order[static_cast<std::size_t>(pick(rng))]);
    modes.row(c) = cells.row(order[static_cast<std::size_t>(c)]);
  }
  return modes;
}

struct CoupledPolicy {
  const CoupledSimilarity& sim;

  double similarity(Index object, const CodeMatrix& modes, Index cluster) const {
    return sim.cis_to(object, modes.row(cluster).transpose());
  }
  CodeVector update(std::span<const Index> members) const { return update_mode(sim, members); }
};

struct MatchingPolicy {
  const CategoricalTable& table;

  double similarity(Index object, const CodeMatrix& modes, Index cluster) const {
    int matches = 0;
    for (Index j = 0; j < table.num_attributes(); ++j) matches += table.cells(object, j) == modes(cluster, j);
    return matches;
  }

  CodeVector update(std::span<const Index> members) const {
    if (members.empty()) throw std::invalid_argument("mode of an empty cluster");
    CodeVector mode(table.num_attributes());
    for (Index j = 0; j < table.num_attributes(); ++j) {
      std::vector<Index> counts(static_cast<std::size_t>(table.domain_size(j)), 0);
      for (Index o : members) ++counts[static_cast<std::size_t>(table.cells(o, j))];
      mode(j) = static_cast<int>(std::max_element(counts.begin(), counts.end()) - counts.begin());
    }
    return mode;
  }
};

template <typename Policy>
Assignment assign_with(const Policy& policy, Index num_objects, const CodeMatrix& modes) {
  Assignment out(num_objects);
  for (Index o = 0; o < num_objects; ++o) {
    Index best = 0;
    double best_sim = policy.similarity(o, modes, 0);
    for (Index c = 1; c < modes.rows(); ++c) {
      const double s = policy.similarity(o, modes, c);
      if (s > best_sim) {
        best_sim = s;
        best = c;
      }
    }
    out(o) = best;
  }
  return out;
}

template <typename Policy>
double objective_with(const Policy& policy, const Assignment& assignment, const CodeMatrix& modes) {
  double total = 0.0;
  for (Index o = 0; o < assignment.size(); ++o) total += policy.similarity(o, modes, assignment(o));
  return total;
}

// Moves, for every empty cluster, the object least similar to its own mode
// into that cluster (only objects whose cluster keeps at least one member).
template <typename Policy>
void reseed_empty(const Policy& policy, Assignment& assignment, const CodeMatrix& modes) {
  const Index k = modes.rows();
  std::vector<Index> sizes(static_cast<std::size_t>(k), 0);
  for (Index o = 0; o < assignment.size(); ++o) ++sizes[static_cast<std::size_t>(assignment(o))];
  for (Index c = 0; c < k; ++c) {
    if (sizes[static_cast<std::size_t>(c)] != 0) continue;
    Index donor = -1;
    double worst = 0.0;
    for (Index o = 0; o < assignment.size(); ++o) {
      if (sizes[static_cast<std::size_t>(assignment(o))] < 2) continue;
      const double s = policy.similarity(o, modes, assignment(o));
      if (donor < 0 || s < worst) {
        donor = o;
        worst = s;
      }
    }
    if (donor < 0) throw std::logic_error("no object available to reseed an empty cluster");
    --sizes[static_cast<std::size_t>(assignment(donor))];
    ++sizes[static_cast<std::size_t>(c)];
    assignment(donor) = c;
  }
}

template <typename Policy>
ClusterModel run_kmodes(const Policy& policy, const CodeMatrix& cells, Index k, std::uint64_t seed, int max_iter) {
  if (max_iter < 1) throw std::invalid_argument("max_iter must be at least 1");
  ClusterModel model;
  model.k = k;
  model.modes = draw_modes(cells, k, seed);
  const Index m = cells.rows();
  for (int iter = 1; iter <= max_iter; ++iter) {
    Assignment next = assign_with(policy, m, model.modes);
    reseed_empty(policy, next, model.modes);
    if (iter > 1 && next == model.assignment) {
      model.converged = true;
      break;
    }
    model.assignment = std::move(next);
    for (Index c = 0; c < k; ++c) {
      const auto members = model.members(c);
      model.modes.row(c) = policy.update(members).transpose();
    }
    const double objective = objective_with(policy, model.assignment, model.modes);
    if (!model.objective_history.empty() && objective < model.objective_history.back() - kObjectiveSlack) {
      throw std::logic_error("k-modes objective decreased from " + std::to_string(model.objective_history.back()) +
                             " to " + std::to_string(objective) + " in round " + std::to_string(iter));
    }
    model.objective_history.push_back(objective);
    model.objective = objective;
    model.iterations = iter;
  }
  return model;
}

template <typename Policy>
ClusterModel best_of_restarts(const Policy& policy, const CodeMatrix& cells, const KModesOptions& options) {
  if (options.restarts < 1) throw std::invalid_argument("restarts must be at least 1");
  std::seed_seq seq{options.seed};
  std::vector<std::uint64_t> seeds(static_cast<std::size_t>(options.restarts));
  if (options.restarts == 1) {
    seeds[0] = options.seed;
  } else {
    std::vector<std::uint32_t> words(seeds.size() * 2);
    seq.generate(words.begin(), words.end());
    for (std::size_t r = 0; r < seeds.size(); ++r) seeds[r] = (std::uint64_t{words[2 * r]} << 32) | words[2 * r + 1];
  }
  ClusterModel best;
  for (std::size_t r = 0; r < seeds.size(); ++r) {
    auto model = run_kmodes(policy, cells, options.k, seeds[r], options.max_iter);
    if (r == 0 || model.objective > best.objective) best = std::move(model);
  }
  return best;
}

}  // namespace

std::vector<Index> ClusterModel::cluster_sizes() const {
  std::vector<Index> sizes(static_cast<std::size_t>(k), 0);
  for (Index o = 0; o < assignment.size(); ++o) ++sizes[static_cast<std::size_t>(assignment(o))];
  return sizes;
}

std::vector<Index> ClusterModel::members(Index cluster) const {
  std::vector<Index> out;
  for (Index o = 0; o < assignment.size(); ++o) {
    if (assignment(o) == cluster) out.push_back(o);
  }
  return out;
}

CodeMatrix init_modes(const CategoricalTable& table, Index k, std::uint64_t seed) {
  return draw_modes(table.cells, k, seed);
}

Assignment assign(const CoupledSimilarity& similarity, const CodeMatrix& modes) {
  if (modes.rows() < 1 || modes.cols() != similarity.num_attributes()) {
    throw std::invalid_argument("modes must have one column per attribute and at least one row");
  }
  return assign_with(CoupledPolicy{similarity}, similarity.num_objects(), modes);
}

CodeVector update_mode(const CoupledSimilarity& similarity, std::span<const Index> members) {
  if (members.empty()) throw std::invalid_argument("mode of an empty cluster");
  const auto& index = similarity.index();
  CodeVector mode(similarity.num_attributes());
  for (Index j = 0; j < similarity.num_attributes(); ++j) {
    Eigen::VectorXd counts = Eigen::VectorXd::Zero(index.domain_size(j));
    for (Index o : members) counts(index.value(o, j)) += 1.0;
    // score(v) = sum over members of cavs(j, value, v), grouped by member value
    const Eigen::VectorXd scores = similarity.cavs_table(j).transpose() * counts;
    Index best = 0;
    for (Index v = 1; v < scores.size(); ++v) {
      if (scores(v) > scores(best)) best = v;
    }
    mode(j) = static_cast<int>(best);
  }
  return mode;
}

double clustering_objective(const CoupledSimilarity& similarity, const Assignment& assignment,
                            const CodeMatrix& modes) {
  return objective_with(CoupledPolicy{similarity}, assignment, modes);
}

ClusterModel ck_modes(const CoupledSimilarity& similarity, const KModesOptions& options) {
  return best_of_restarts(CoupledPolicy{similarity}, similarity.index().cells(), options);
}

ClusterModel ck_modes(const CategoricalTable& table, const KModesOptions& options) {
  return ck_modes(CoupledSimilarity(table), options);
}

ClusterModel plain_k_modes(const CategoricalTable& table, const KModesOptions& options) {
  table.validate();
  return best_of_restarts(MatchingPolicy{table}, table.cells, options);
}

int simple_matching(const CategoricalTable& table, Index object, std::span<const int> mode) {
  int matches = 0;
  for (Index j = 0; j < table.num_attributes(); ++j) matches += table.cells(object, j) == mode[static_cast<std::size_t>(j)];
  return matches;
}

void write_assignment_csv(const CategoricalTable& table, const ClusterModel& model, std::ostream& out) {
  out << "object_id,cluster\n";
  for (Index o = 0; o < model.assignment.size(); ++o) {
    out << csv::escape(table.object_ids[static_cast<std::size_t>(o)]) << ',' << model.assignment(o) << '\n';
  }
}

void write_modes_csv(const CategoricalTable& table, const ClusterModel& model, std::ostream& out) {
  csv::Row header{"cluster"};
  header.insert(header.end(), table.attribute_names.begin(), table.attribute_names.end());
  out << csv::join(header) << '\n';
  for (Index c = 0; c < model.modes.rows(); ++c) {
    csv::Row row{std::to_string(c)};
    for (Index j = 0; j < model.modes.cols(); ++j) {
      row.push_back(table.domains[static_cast<std::size_t>(j)][static_cast<std::size_t>(model.modes(c, j))]);
    }
    out << csv::join(row) << '\n';
  }
}

}  // namespace coupledrec
