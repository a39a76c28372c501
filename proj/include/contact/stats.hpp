// Small statistics helpers shared across modules: interval estimates and
// weighted least squares.  Quantiles come from boost::math (header-only).
#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

namespace contact::stats {

// Standard normal quantile at probability p in (0,1).
double norm_quantile(double p);

// Student-t quantile, df >= 1, p in (0,1).
double t_quantile(int df, double p);

struct Interval {
    double lo = 0;
    double hi = 0;
};

// Two-sided Wilson score interval for a binomial proportion.
Interval wilson(std::int64_t successes, std::int64_t n, double conf);

// Two-sided Wilson interval for a mean of per-sample values in [0,1] (uses the
// normal approximation on the sample mean; falls back to Wilson when the
// values are all 0/1).
Interval mean_interval(const std::vector<double>& values, double conf);

struct LinFit {
    double slope = 0;
    double intercept = 0;
    double slope_se = 0;
    double r2 = 0;
    int points = 0;
};

// Weighted least squares of y on x; weights are inverse variances up to a
// common scale.  Needs >= 2 distinct x; r2 is the weighted coefficient of
// determination.
LinFit weighted_linfit(const std::vector<double>& x, const std::vector<double>& y,
                       const std::vector<double>& w);

// FNV-1a 64-bit hash; used for stable content hashes in output headers.
std::uint64_t fnv1a(std::string_view data);

}  // namespace contact::stats
