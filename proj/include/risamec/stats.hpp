#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <vector>

#include <boost/math/distributions/students_t.hpp>

namespace risamec::stats {

inline double mean(std::span<const double> x)
{
    return x.empty() ? 0.0 : std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

/// Sample standard deviation (n - 1 denominator); 0 for fewer than two values.
inline double stddev(std::span<const double> x)
{
    if (x.size() < 2)
        return 0.0;
    const double m = mean(x);
    double s = 0.0;
    for (double v : x)
        s += (v - m) * (v - m);
    return std::sqrt(s / static_cast<double>(x.size() - 1));
}

inline double standard_error(std::span<const double> x)
{
    return x.size() < 2 ? 0.0 : stddev(x) / std::sqrt(static_cast<double>(x.size()));
}

/// 1-based ranks; ties share their average rank.
inline std::vector<double> ranks(std::span<const double> x)
{
    std::vector<std::size_t> idx(x.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
    std::vector<double> r(x.size());
    for (std::size_t i = 0; i < idx.size();) {
        std::size_t j = i;
        while (j + 1 < idx.size() && x[idx[j + 1]] == x[idx[i]])
            ++j;
        const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k)
            r[idx[k]] = avg;
        i = j + 1;
    }
    return r;
}

inline double pearson(std::span<const double> x, std::span<const double> y)
{
    const double mx = mean(x), my = mean(y);
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx == 0.0 || syy == 0.0)
        return 0.0;
    return sxy / std::sqrt(sxx * syy);
}

inline double spearman(std::span<const double> x, std::span<const double> y)
{
    const auto rx = ranks(x);
    const auto ry = ranks(y);
    return pearson(rx, ry);
}

/// One-sided p-value for rho > 0 using t = rho * sqrt((n - 2) / (1 - rho^2)).
inline double spearman_p_greater(double rho, std::size_t n)
{
    if (n < 3)
        return 1.0;
    if (rho >= 1.0)
        return 0.0;
    if (rho <= -1.0)
        return 1.0;
    const double df = static_cast<double>(n - 2);
    const double t = rho * std::sqrt(df / (1.0 - rho * rho));
    boost::math::students_t dist(df);
    return boost::math::cdf(boost::math::complement(dist, t));
}

} // namespace risamec::stats
