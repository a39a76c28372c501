#include "contact/stats.hpp"

#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>

#include <cmath>
#include <stdexcept>

namespace contact::stats {

double norm_quantile(double p) {
    boost::math::normal_distribution<double> n(0.0, 1.0);
    return boost::math::quantile(n, p);
}

double t_quantile(int df, double p) {
    if (df < 1) throw std::invalid_argument("t_quantile: df < 1");
    boost::math::students_t_distribution<double> t(static_cast<double>(df));
    return boost::math::quantile(t, p);
}

Interval wilson(std::int64_t successes, std::int64_t n, double conf) {
    if (n <= 0) throw std::invalid_argument("wilson: no samples");
    const double z = norm_quantile(0.5 + conf / 2.0);
    const double z2 = z * z;
    const double nn = static_cast<double>(n);
    const double p = static_cast<double>(successes) / nn;
    const double denom = 1.0 + z2 / nn;
    const double center = (p + z2 / (2.0 * nn)) / denom;
    const double half = z * std::sqrt(p * (1.0 - p) / nn + z2 / (4.0 * nn * nn)) / denom;
    return {std::max(0.0, center - half), std::min(1.0, center + half)};
}

Interval mean_interval(const std::vector<double>& values, double conf) {
    if (values.empty()) throw std::invalid_argument("mean_interval: no samples");
    bool binary = true;
    double sum = 0;
    for (double v : values) {
        sum += v;
        if (v != 0.0 && v != 1.0) binary = false;
    }
    const double n = static_cast<double>(values.size());
    if (binary)
        return wilson(static_cast<std::int64_t>(sum + 0.5),
                      static_cast<std::int64_t>(values.size()), conf);
    const double mean = sum / n;
    double ss = 0;
    for (double v : values) ss += (v - mean) * (v - mean);
    const double se = std::sqrt(ss / (n * (n - 1.0) + 1e-300));
    const double z = norm_quantile(0.5 + conf / 2.0);
    return {std::max(0.0, mean - z * se), std::min(1.0, mean + z * se)};
}

LinFit weighted_linfit(const std::vector<double>& x, const std::vector<double>& y,
                       const std::vector<double>& w) {
    if (x.size() != y.size() || x.size() != w.size())
        throw std::invalid_argument("weighted_linfit: length mismatch");
    const int n = static_cast<int>(x.size());
    if (n < 2) throw std::invalid_argument("weighted_linfit: fewer than 2 points");

    double sw = 0, sx = 0, sy = 0;
    for (int i = 0; i < n; ++i) {
        sw += w[i];
        sx += w[i] * x[i];
        sy += w[i] * y[i];
    }
    const double xbar = sx / sw, ybar = sy / sw;
    double sxx = 0, sxy = 0, syy = 0;
    for (int i = 0; i < n; ++i) {
        const double dx = x[i] - xbar, dy = y[i] - ybar;
        sxx += w[i] * dx * dx;
        sxy += w[i] * dx * dy;
        syy += w[i] * dy * dy;
    }
    if (sxx <= 0) throw std::invalid_argument("weighted_linfit: degenerate x");

    LinFit f;
    f.points = n;
    f.slope = sxy / sxx;
    f.intercept = ybar - f.slope * xbar;
    double ss_res = 0;
    for (int i = 0; i < n; ++i) {
        const double r = y[i] - (f.intercept + f.slope * x[i]);
        ss_res += w[i] * r * r;
    }
    f.r2 = (syy > 0) ? 1.0 - ss_res / syy : 1.0;
    const double s2 = (n > 2) ? ss_res / (n - 2) : 0.0;
    f.slope_se = std::sqrt(s2 / sxx);
    return f;
}

std::uint64_t fnv1a(std::string_view data) {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001B3ULL;
    }
    return h;
}

}  // namespace contact::stats
