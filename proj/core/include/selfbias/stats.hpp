#pragma once

#include <span>
#include <string>
#include <vector>

#include "selfbias/task.hpp"
#include "selfbias/trajectory.hpp"

namespace selfbias::stats {

// One sample's self-assessed score and reference ("true") score at one
// iteration, on the same task scale.
struct ScorePair {
    std::string sample_id;
    int iteration = 0;
    double self_score = 0.0;
    double true_score = 0.0;

    bool operator==(const ScorePair&) const = default;
};

struct BiasStats {
    std::size_t n = 0;
    double bias = 0.0;
    double dskew = 0.0;
    double mean_self = 0.0;
    double mean_true = 0.0;
};

// Throws ValidationError naming the sample when either score is non-finite
// or lies outside `scale`.
void validate_pair(const ScorePair& pair, const ScoreScale& scale);

// self_score - true_score per pair, order preserved. Non-finite scores are
// rejected with the offending sample_id.
std::vector<double> residuals(std::span<const ScorePair> pairs);

// Mean residual. Positive means the model rates its own output above the
// reference. Throws ValidationError("no samples") on empty input.
double bias(std::span<const ScorePair> pairs);

// Distance skewness of `x` about `gamma`:
//
//   1 - sum_{i,j} |x_i - x_j| / sum_{i,j} |x_i + x_j - 2 gamma|
//
// over all n^2 ordered pairs including i == j. 0 for a sample symmetric
// about gamma, 1 when all mass sits at one constant on one side of gamma.
// Returns 0 when every x_i == gamma. Runs in O(n log n).
double distance_skewness(std::span<const double> x, double gamma = 0.0);

BiasStats summarize(std::span<const ScorePair> pairs, double gamma = 0.0);

struct IterationStats {
    int iteration = 0;
    BiasStats stats;
};

// The score pair that represents `t` at `iteration`: the most recent accepted
// record with index <= iteration. Trajectories that stopped early carry their
// last accepted record forward. Throws if there is no record at index 0.
ScorePair accepted_pair_at(const Trajectory& t, int iteration);

// Statistics per iteration index (ascending) over the accepted output of
// every sample. Trajectories without an iteration-0 record are skipped.
// Mixed task scales are rejected.
std::vector<IterationStats> per_iteration_stats(std::span<const Trajectory> trajectories,
                                                double gamma = 0.0);

// Groups raw pairs by iteration and summarizes each group.
std::vector<IterationStats> stats_by_iteration(std::span<const ScorePair> pairs, double gamma = 0.0);

}  // namespace selfbias::stats
