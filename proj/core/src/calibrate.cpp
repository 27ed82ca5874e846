#include "selfbias/calibrate.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "selfbias/error.hpp"

namespace selfbias::calibrate {

namespace {

void check_samples(std::span<const double> xs, const char* side) {
    if (xs.size() < 2) {
        throw ValidationError(std::string("quantile map needs at least 2 ") + side + " samples");
    }
    for (double v : xs) {
        if (!std::isfinite(v)) throw ValidationError(std::string("non-finite ") + side + " sample");
    }
}

std::vector<double> resample(std::span<const double> sorted, std::size_t n) {
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double p = static_cast<double>(i) / static_cast<double>(n - 1);
        out[i] = empirical_quantile(sorted, p);
    }
    return out;
}

}  // namespace

QuantileMap::QuantileMap(std::vector<double> source_quantiles, std::vector<double> target_quantiles)
    : source_(std::move(source_quantiles)), target_(std::move(target_quantiles)) {
    if (source_.size() != target_.size()) throw ValidationError("quantile tables differ in length");
    check_samples(source_, "source");
    check_samples(target_, "target");
    if (!std::is_sorted(source_.begin(), source_.end()) || !std::is_sorted(target_.begin(), target_.end())) {
        throw ValidationError("quantile tables must be non-decreasing");
    }
}

double QuantileMap::apply(double value) const {
    if (!std::isfinite(value)) throw ValidationError("cannot map a non-finite value");
    // First source quantile strictly above value; value sits in [s[hi-1], s[hi]).
    const auto it = std::upper_bound(source_.begin(), source_.end(), value);
    if (it == source_.begin()) return target_.front();
    if (it == source_.end()) return target_.back();
    const auto hi = static_cast<std::size_t>(it - source_.begin());
    const auto lo = hi - 1;
    const double frac = (value - source_[lo]) / (source_[hi] - source_[lo]);
    const double mapped = target_[lo] + frac * (target_[hi] - target_[lo]);
    // Rounding in the line above can step past the segment end by an ulp.
    return std::clamp(mapped, target_[lo], target_[hi]);
}

std::string QuantileMap::to_json() const {
    nlohmann::ordered_json j;
    j["source_quantiles"] = source_;
    j["target_quantiles"] = target_;
    return j.dump();
}

QuantileMap QuantileMap::from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
        return QuantileMap(j.at("source_quantiles").get<std::vector<double>>(),
                           j.at("target_quantiles").get<std::vector<double>>());
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("malformed quantile map: ") + e.what());
    }
}

double empirical_quantile(std::span<const double> sorted, double p) {
    if (sorted.empty()) throw ValidationError("empty sample");
    const double pos = std::clamp(p, 0.0, 1.0) * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    if (lo + 1 >= sorted.size()) return sorted.back();
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

QuantileMap fit_quantile_map(std::span<const double> source_samples, std::span<const double> target_samples) {
    check_samples(source_samples, "source");
    check_samples(target_samples, "target");

    std::vector<double> src(source_samples.begin(), source_samples.end());
    std::vector<double> tgt(target_samples.begin(), target_samples.end());
    std::sort(src.begin(), src.end());
    std::sort(tgt.begin(), tgt.end());

    if (src.size() > tgt.size()) {
        tgt = resample(tgt, src.size());
    } else if (tgt.size() > src.size()) {
        src = resample(src, tgt.size());
    }
    // Interpolation between sorted neighbours can only break ordering by
    // rounding; restore it so the constructor invariant holds.
    std::sort(src.begin(), src.end());
    std::sort(tgt.begin(), tgt.end());
    return QuantileMap(std::move(src), std::move(tgt));
}

}  // namespace selfbias::calibrate
