#include "selfbias/stats.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <optional>
#include <stdexcept>

#include "selfbias/error.hpp"

namespace selfbias::stats {

namespace {

constexpr double kSkewSlack = 1e-9;

void require_finite(const ScorePair& p) {
    if (!std::isfinite(p.self_score) || !std::isfinite(p.true_score)) {
        throw ValidationError("non-finite score for sample '" + p.sample_id + "' at iteration " +
                              std::to_string(p.iteration));
    }
}

// sum_{i,j} |a_i - a_j| for ascending a.
double pairwise_abs_diff_sorted(std::span<const double> a) {
    const auto n = static_cast<double>(a.size());
    double acc = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        acc += a[k] * (2.0 * static_cast<double>(k) - n + 1.0);
    }
    return 2.0 * acc;
}

// sum_{i,j} |a_i + a_j| for ascending a.
double pairwise_abs_sum_sorted(std::span<const double> a) {
    std::vector<double> prefix(a.size() + 1, 0.0);
    for (std::size_t k = 0; k < a.size(); ++k) prefix[k + 1] = prefix[k] + a[k];
    const double total = prefix.back();
    const auto n = a.size();

    double acc = 0.0;
    for (double ai : a) {
        // |a_j - (-a_i)| split at the pivot -a_i.
        const double pivot = -ai;
        const auto m = static_cast<std::size_t>(std::lower_bound(a.begin(), a.end(), pivot) - a.begin());
        const double below = pivot * static_cast<double>(m) - prefix[m];
        const double above = (total - prefix[m]) - pivot * static_cast<double>(n - m);
        acc += below + above;
    }
    return acc;
}

}  // namespace

void validate_pair(const ScorePair& pair, const ScoreScale& scale) {
    require_finite(pair);
    if (!scale.admits(pair.self_score) || !scale.admits(pair.true_score)) {
        throw ValidationError("score out of scale for sample '" + pair.sample_id + "' at iteration " +
                              std::to_string(pair.iteration));
    }
}

std::vector<double> residuals(std::span<const ScorePair> pairs) {
    std::vector<double> out;
    out.reserve(pairs.size());
    for (const auto& p : pairs) {
        require_finite(p);
        out.push_back(p.self_score - p.true_score);
    }
    return out;
}

double bias(std::span<const ScorePair> pairs) {
    if (pairs.empty()) throw ValidationError("no samples");
    const auto r = residuals(pairs);
    return std::accumulate(r.begin(), r.end(), 0.0) / static_cast<double>(r.size());
}

double distance_skewness(std::span<const double> x, double gamma) {
    if (x.empty()) throw ValidationError("no samples");
    if (!std::isfinite(gamma)) throw ValidationError("non-finite gamma");

    std::vector<double> centered;
    centered.reserve(x.size());
    for (double v : x) {
        if (!std::isfinite(v)) throw ValidationError("non-finite residual");
        centered.push_back(v - gamma);
    }
    std::sort(centered.begin(), centered.end());

    const double denom = pairwise_abs_sum_sorted(centered);
    if (denom == 0.0) return 0.0;
    const double raw = 1.0 - pairwise_abs_diff_sorted(centered) / denom;
    if (raw < -kSkewSlack || raw > 1.0 + kSkewSlack) {
        throw std::logic_error("distance skewness out of range: " + std::to_string(raw));
    }
    return std::clamp(raw, 0.0, 1.0);
}

BiasStats summarize(std::span<const ScorePair> pairs, double gamma) {
    if (pairs.empty()) throw ValidationError("no samples");
    const auto r = residuals(pairs);
    BiasStats s;
    s.n = pairs.size();
    double self_sum = 0.0;
    double true_sum = 0.0;
    for (const auto& p : pairs) {
        self_sum += p.self_score;
        true_sum += p.true_score;
    }
    const auto n = static_cast<double>(s.n);
    s.mean_self = self_sum / n;
    s.mean_true = true_sum / n;
    s.bias = std::accumulate(r.begin(), r.end(), 0.0) / n;
    s.dskew = distance_skewness(r, gamma);
    return s;
}

ScorePair accepted_pair_at(const Trajectory& t, int iteration) {
    if (t.iterations.empty() || t.iterations.front().index != 0) {
        throw ValidationError("trajectory '" + t.sample_id + "' has no iteration-0 record");
    }
    const IterationRecord* current = &t.iterations.front();
    for (const auto& rec : t.iterations) {
        if (rec.index > iteration) break;
        if (rec.accepted) current = &rec;
    }
    return ScorePair{t.sample_id, iteration, current->self_score, current->true_score};
}

std::vector<IterationStats> per_iteration_stats(std::span<const Trajectory> trajectories, double gamma) {
    std::vector<const Trajectory*> usable;
    std::optional<TaskKind> kind;
    for (const auto& t : trajectories) {
        if (t.iterations.empty() || t.iterations.front().index != 0) continue;
        const ScoreScale sc = scale_for(t.task.kind());
        if (kind) {
            const ScoreScale ref = scale_for(*kind);
            if (ref.lo != sc.lo || ref.hi != sc.hi || ref.binary != sc.binary) {
                throw ValidationError("trajectories mix score scales ('" + std::string(to_string(*kind)) +
                                      "' and '" + std::string(to_string(t.task.kind())) + "')");
            }
        } else {
            kind = t.task.kind();
        }
        usable.push_back(&t);
    }
    if (usable.empty()) return {};

    int last = 0;
    for (const auto* t : usable) last = std::max(last, t->iterations.back().index);

    std::vector<IterationStats> out;
    out.reserve(static_cast<std::size_t>(last) + 1);
    std::vector<ScorePair> pairs;
    pairs.reserve(usable.size());
    for (int it = 0; it <= last; ++it) {
        pairs.clear();
        for (const auto* t : usable) pairs.push_back(accepted_pair_at(*t, it));
        out.push_back({it, summarize(pairs, gamma)});
    }
    return out;
}

std::vector<IterationStats> stats_by_iteration(std::span<const ScorePair> pairs, double gamma) {
    if (pairs.empty()) throw ValidationError("no samples");
    std::map<int, std::vector<ScorePair>> groups;
    for (const auto& p : pairs) groups[p.iteration].push_back(p);
    std::vector<IterationStats> out;
    for (const auto& [it, group] : groups) out.push_back({it, summarize(group, gamma)});
    return out;
}

}  // namespace selfbias::stats
