#pragma once

// Independent reference implementations used to freeze expected values.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <vector>

namespace oracle {

// Direct O(n^2) double loop over all ordered pairs, i == j included.
inline double dskew_brute(std::span<const double> x, double gamma = 0.0) {
    long double num = 0.0L;
    long double den = 0.0L;
    for (double a : x) {
        for (double b : x) {
            num += std::fabs(static_cast<long double>(a) - b);
            den += std::fabs(static_cast<long double>(a) + b - 2.0L * gamma);
        }
    }
    if (den == 0.0L) return 0.0;
    return static_cast<double>(1.0L - num / den);
}

inline double mean(std::span<const double> x) {
    long double s = 0.0L;
    for (double v : x) s += v;
    return static_cast<double>(s / static_cast<long double>(x.size()));
}

// Spearman rank correlation with average ranks for ties.
inline std::vector<double> ranks(std::span<const double> x) {
    std::vector<std::size_t> idx(x.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return x[a] < x[b]; });
    std::vector<double> r(x.size());
    for (std::size_t i = 0; i < idx.size();) {
        std::size_t j = i;
        while (j + 1 < idx.size() && x[idx[j + 1]] == x[idx[i]]) ++j;
        const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
        for (std::size_t t = i; t <= j; ++t) r[idx[t]] = avg;
        i = j + 1;
    }
    return r;
}

inline double spearman(std::span<const double> a, std::span<const double> b) {
    const auto ra = ranks(a);
    const auto rb = ranks(b);
    const double ma = mean(ra), mb = mean(rb);
    double sab = 0, saa = 0, sbb = 0;
    for (std::size_t i = 0; i < ra.size(); ++i) {
        sab += (ra[i] - ma) * (rb[i] - mb);
        saa += (ra[i] - ma) * (ra[i] - ma);
        sbb += (rb[i] - mb) * (rb[i] - mb);
    }
    return sab / std::sqrt(saa * sbb);
}

}  // namespace oracle
