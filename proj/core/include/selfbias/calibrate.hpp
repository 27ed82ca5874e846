#pragma once

#include <span>
#include <string>
#include <vector>

namespace selfbias::calibrate {

// Monotone transport of one empirical score distribution onto another by
// pairing equal percentile ranks. Used to put a proxy metric (roughly
// [0, 1]) on the MQM human scale [-25, 0].
class QuantileMap {
public:
    // Both tables must be non-decreasing, finite, equal length >= 2.
    QuantileMap(std::vector<double> source_quantiles, std::vector<double> target_quantiles);

    // Piecewise-linear between bracketing source quantiles, clamped to the
    // first/last target quantile outside the source range.
    double apply(double value) const;

    const std::vector<double>& source_quantiles() const noexcept { return source_; }
    const std::vector<double>& target_quantiles() const noexcept { return target_; }

    // {"source_quantiles": [...], "target_quantiles": [...]}
    std::string to_json() const;
    static QuantileMap from_json(const std::string& text);

    bool operator==(const QuantileMap&) const = default;

private:
    std::vector<double> source_;
    std::vector<double> target_;
};

// Sorts both samples and pairs equal percentile ranks. When the sample sizes
// differ, the shorter sample's empirical quantile function is linearly
// interpolated onto the longer sample's grid i / (N - 1). Ties are kept.
QuantileMap fit_quantile_map(std::span<const double> source_samples, std::span<const double> target_samples);

inline double apply_quantile_map(const QuantileMap& map, double value) { return map.apply(value); }

// Linear-interpolated empirical quantile of ascending `sorted` at p in [0,1].
double empirical_quantile(std::span<const double> sorted, double p);

}  // namespace selfbias::calibrate
