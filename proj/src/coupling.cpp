#include "coupledrec/coupling.hpp"

#include "coupledrec/csv.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <string>
#include <thread>

namespace coupledrec {

FrequencyIndex::FrequencyIndex(const CategoricalTable& table) : cells_(table.cells) {
  table.validate();
  const auto m = table.num_objects();
  const auto n = table.num_attributes();
  members_.resize(idx(n));
  for (Index j = 0; j < n; ++j) {
    members_[idx(j)].resize(idx(table.domain_size(j)));
    for (Index o = 0; o < m; ++o) members_[idx(j)][idx(cells_(o, j))].push_back(o);
  }
  cooc_.resize(idx(n * n));
  for (Index j = 0; j < n; ++j) {
    for (Index k = 0; k < n; ++k) {
      auto& counts = cooc_[pair(j, k)];
      counts.setZero(table.domain_size(j), table.domain_size(k));
      for (Index o = 0; o < m; ++o) ++counts(cells_(o, j), cells_(o, k));
    }
  }
}

std::span<const Index> FrequencyIndex::objects_with(Index attribute, int value) const {
  require_in_domain(attribute, value);
  return members_[idx(attribute)][static_cast<std::size_t>(value)];
}

Index FrequencyIndex::count(Index attribute, int value) const {
  return static_cast<Index>(objects_with(attribute, value).size());
}

void FrequencyIndex::require_in_domain(Index attribute, int value) const {
  if (attribute < 0 || attribute >= num_attributes()) {
    throw DomainError("attribute " + std::to_string(attribute) + " out of range");
  }
  if (value < 0 || value >= domain_size(attribute)) {
    throw DomainError("value code " + std::to_string(value) + " outside the domain of attribute " +
                      std::to_string(attribute));
  }
}

void FrequencyIndex::require_present(Index attribute, int value) const {
  if (count(attribute, value) == 0) {
    throw DomainError("value code " + std::to_string(value) + " never occurs in attribute " +
                      std::to_string(attribute));
  }
}

CouplingParams CouplingParams::uniform(Index num_attributes) {
  CouplingParams p;
  if (num_attributes < 1) throw std::invalid_argument("at least one attribute required");
  p.inter_weights = Eigen::MatrixXd::Zero(num_attributes, num_attributes);
  if (num_attributes > 1) {
    p.inter_weights.setConstant(1.0 / static_cast<double>(num_attributes - 1));
    p.inter_weights.diagonal().setZero();
  }
  return p;
}

void CouplingParams::validate() const {
  const auto n = inter_weights.rows();
  if (n < 1 || inter_weights.cols() != n) throw std::invalid_argument("inter weights must be square and nonempty");
  if ((inter_weights.array() < 0.0).any()) throw std::invalid_argument("inter weights must be nonnegative");
  if (n == 1) return;
  for (Index j = 0; j < n; ++j) {
    const double off_diagonal = inter_weights.row(j).sum() - inter_weights(j, j);
    if (std::abs(off_diagonal - 1.0) > 1e-12) {
      throw std::invalid_argument("inter weights of attribute " + std::to_string(j) + " do not sum to 1");
    }
  }
}

double iaavs(const FrequencyIndex& index, Index j, int x, int y) {
  index.require_present(j, x);
  index.require_present(j, y);
  const auto fx = static_cast<double>(index.count(j, x));
  const auto fy = static_cast<double>(index.count(j, y));
  return fx * fy / (fx + fy + fx * fy);
}

double icp(const FrequencyIndex& index, Index k, std::span<const int> values, Index j, int x) {
  index.require_present(j, x);
  std::vector<char> in_union(static_cast<std::size_t>(index.num_objects()), 0);
  for (int w : values) {
    for (Index o : index.objects_with(k, w)) in_union[static_cast<std::size_t>(o)] = 1;
  }
  const auto given = index.objects_with(j, x);
  const auto hits = std::count_if(given.begin(), given.end(),
                                  [&](Index o) { return in_union[static_cast<std::size_t>(o)] != 0; });
  return static_cast<double>(hits) / static_cast<double>(given.size());
}

double ieavs_pair(const FrequencyIndex& index, Index j, Index k, int x, int y) {
  if (j == k) throw std::invalid_argument("inter coupling needs two distinct attributes");
  index.require_present(j, x);
  index.require_present(j, y);
  const auto fx = static_cast<double>(index.count(j, x));
  const auto fy = static_cast<double>(index.count(j, y));
  // min over W of 2 - P(W|x) - P(~W|y) puts each w on whichever side has the larger
  // singleton probability, so the minimum is reached value by value.
  double overlap = 0.0;
  for (int w = 0; w < static_cast<int>(index.domain_size(k)); ++w) {
    const double px = static_cast<double>(index.cooccurrence(j, x, k, w)) / fx;
    const double py = static_cast<double>(index.cooccurrence(j, y, k, w)) / fy;
    overlap += std::max(px, py);
  }
  return std::clamp(2.0 - overlap, 0.0, 1.0);
}

double ieavs_pair_exhaustive(const FrequencyIndex& index, Index j, Index k, int x, int y) {
  if (j == k) throw std::invalid_argument("inter coupling needs two distinct attributes");
  const Index size = index.domain_size(k);
  if (size > kMaxExhaustiveDomain) {
    throw std::invalid_argument("exhaustive subset enumeration refused: attribute " + std::to_string(k) +
                                " has " + std::to_string(size) + " values (limit " +
                                std::to_string(kMaxExhaustiveDomain) + ")");
  }
  double best = std::numeric_limits<double>::infinity();
  std::vector<int> subset;
  std::vector<int> complement;
  for (std::uint32_t mask = 0; mask < (std::uint32_t{1} << size); ++mask) {
    subset.clear();
    complement.clear();
    for (int w = 0; w < static_cast<int>(size); ++w) ((mask >> w) & 1u ? subset : complement).push_back(w);
    best = std::min(best, 2.0 - icp(index, k, subset, j, x) - icp(index, k, complement, j, y));
  }
  return best;
}

double ieavs(const FrequencyIndex& index, const CouplingParams& params, Index j, int x, int y) {
  const Index n = index.num_attributes();
  if (n == 1) {
    index.require_present(j, x);
    index.require_present(j, y);
    return 1.0;
  }
  double total = 0.0;
  for (Index k = 0; k < n; ++k) {
    if (k == j) continue;
    const double weight = params.inter_weights(j, k);
    if (weight != 0.0) total += weight * ieavs_pair(index, j, k, x, y);
  }
  return total;
}

double cavs(const FrequencyIndex& index, const CouplingParams& params, Index j, int x, int y) {
  return iaavs(index, j, x, y) * ieavs(index, params, j, x, y);
}

double cis(const FrequencyIndex& index, const CouplingParams& params, Index a, Index b) {
  double total = 0.0;
  for (Index j = 0; j < index.num_attributes(); ++j) total += cavs(index, params, j, index.value(a, j), index.value(b, j));
  return total;
}

double cis(const FrequencyIndex& index, const CouplingParams& params, std::span<const int> a, std::span<const int> b) {
  const auto n = static_cast<std::size_t>(index.num_attributes());
  if (a.size() != n || b.size() != n) throw std::invalid_argument("value vectors need one code per attribute");
  double total = 0.0;
  for (std::size_t j = 0; j < n; ++j) total += cavs(index, params, static_cast<Index>(j), a[j], b[j]);
  return total;
}

CoupledSimilarity::CoupledSimilarity(const CategoricalTable& table)
    : CoupledSimilarity(table, CouplingParams::uniform(table.num_attributes())) {}

CoupledSimilarity::CoupledSimilarity(const CategoricalTable& table, CouplingParams params)
    : index_(table), params_(std::move(params)) {
  params_.validate();
  if (params_.inter_weights.rows() != index_.num_attributes()) {
    throw std::invalid_argument("coupling params sized for a different attribute count");
  }
  cavs_.reserve(static_cast<std::size_t>(index_.num_attributes()));
  for (Index j = 0; j < index_.num_attributes(); ++j) {
    const auto size = index_.domain_size(j);
    Eigen::MatrixXd t(size, size);
    for (int x = 0; x < size; ++x) {
      for (int y = x; y < size; ++y) {
        t(x, y) = t(y, x) = coupledrec::cavs(index_, params_, j, x, y);
      }
    }
    cavs_.push_back(std::move(t));
  }
}

double CoupledSimilarity::cis(Index a, Index b) const {
  double total = 0.0;
  for (Index j = 0; j < num_attributes(); ++j) total += cavs(j, index_.value(a, j), index_.value(b, j));
  return total;
}

SimilarityMatrix coupling_matrix(const CoupledSimilarity& similarity, int threads) {
  const Index m = similarity.num_objects();
  SimilarityMatrix out(m, m);
  auto fill_rows = [&](Index first, Index stride) {
    for (Index a = first; a < m; a += stride) {
      for (Index b = a; b < m; ++b) out(a, b) = similarity.cis(a, b);
    }
  };
  const Index workers = std::clamp<Index>(threads, 1, std::max<Index>(m, 1));
  if (workers == 1) {
    fill_rows(0, 1);
  } else {
    std::vector<std::jthread> pool;
    for (Index w = 0; w < workers; ++w) pool.emplace_back(fill_rows, w, workers);
  }
  for (Index a = 0; a < m; ++a) {
    for (Index b = 0; b < a; ++b) out(a, b) = out(b, a);
  }
  return out;
}

SimilarityMatrix coupling_matrix(const CategoricalTable& table, const CouplingParams& params, int threads) {
  return coupling_matrix(CoupledSimilarity(table, params), threads);
}

void write_similarity_csv(const SimilarityMatrix& sim, std::span<const std::string> ids, std::ostream& out) {
  if (static_cast<Index>(ids.size()) != sim.rows()) throw std::invalid_argument("one id per similarity row required");
  out << "id_a,id_b,cis\n";
  for (Index a = 0; a < sim.rows(); ++a) {
    for (Index b = a; b < sim.cols(); ++b) {
      out << csv::escape(ids[static_cast<std::size_t>(a)]) << ',' << csv::escape(ids[static_cast<std::size_t>(b)]) << ','
          << to_significant_string(sim(a, b), 12) << '\n';
    }
  }
}

}  // namespace coupledrec
