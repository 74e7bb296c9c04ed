#include "coupledrec/csv.hpp"
#include "coupledrec/eval.hpp"

#include <chrono>
#include <ostream>
#include <random>

namespace coupledrec {

BenchResult throughput_bench(const Predictor& predictor, const RatingIndex& ratings, std::string algorithm, Index k,
                             const BenchOptions& options) {
  if (options.requests < 1) throw std::invalid_argument("request count must be at least 1");
  if (options.warmup < 0) throw std::invalid_argument("warmup count must be nonnegative");
  std::vector<Index> active;
  for (Index u = 0; u < ratings.num_users(); ++u) {
    if (!ratings.user_ratings(u).empty()) active.push_back(u);
  }
  if (active.empty()) throw std::invalid_argument("benchmark needs at least one user with ratings");
  std::mt19937_64 rng(options.seed);
  std::uniform_int_distribution<std::size_t> pick(0, active.size() - 1);

  for (Index r = 0; r < options.warmup; ++r) top_n(ratings, predictor, active[pick(rng)], options.list_length);

  BenchResult result;
  result.algorithm = std::move(algorithm);
  result.k = k;
  result.requests = options.requests;
  const auto start = std::chrono::steady_clock::now();
  for (Index r = 0; r < options.requests; ++r) {
    PredictionStats stats;
    top_n(ratings, predictor, active[pick(rng)], options.list_length, &stats);
    result.max_candidates = std::max(result.max_candidates, stats.candidates);
  }
  result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  result.throughput = result.seconds > 0.0 ? static_cast<double>(options.requests) / result.seconds : 0.0;
  if (options.candidate_bound > 0 && result.max_candidates > options.candidate_bound) {
    throw std::logic_error("candidate set of " + std::to_string(result.max_candidates) + " exceeds bound " +
                           std::to_string(options.candidate_bound));
  }
  return result;
}

void write_bench_csv(std::span<const BenchResult> rows, std::ostream& out, bool header) {
  if (header) out << kBenchHeader << '\n';
  for (const auto& r : rows) {
    out << csv::escape(r.algorithm) << ',' << r.k << ',' << r.requests << ',' << to_fixed_string(r.seconds, 6) << ','
        << to_fixed_string(r.throughput, 3) << ',' << r.max_candidates << '\n';
  }
}

}  // namespace coupledrec
