#pragma once

#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <functional>
#include <random>
#include <vector>

#include "hmhf/radial_grid.hpp"

namespace hmhf::test {

// HMHF_TEST_SEED overrides the fixed default
inline std::uint64_t seed()
{
    if (char const* env = std::getenv("HMHF_TEST_SEED"))
    {
        return std::strtoull(env, nullptr, 10);
    }
    return 20261015u;
}

inline std::mt19937_64& rng()
{
    static std::mt19937_64 gen(seed());
    return gen;
}

// Sum of a few Gaussians in log r, times (r/(1+r))^m for the origin behaviour.
// Essentially compact on [lo, hi].
inline std::function<double(double)> random_smooth(int m, double lo = 1e-2, double hi = 10.0,
                                                   int bumps = 3, double amplitude = 1.0)
{
    std::uniform_real_distribution<double> centre(std::log(lo) + 1.0, std::log(hi) - 1.0);
    std::uniform_real_distribution<double> width(0.3, 0.8);
    std::uniform_real_distribution<double> amp(-amplitude, amplitude);
    struct Bump
    {
        double c, w, a;
    };
    std::vector<Bump> b;
    for (int k = 0; k < bumps; ++k)
    {
        b.push_back({centre(rng()), width(rng()), amp(rng())});
    }
    return [b, m](double r) {
        const double x = std::log(r);
        double sum = 0.0;
        for (auto const& k : b)
        {
            const double z = (x - k.c) / k.w;
            sum += k.a * std::exp(-z * z);
        }
        return sum * std::pow(r / (1.0 + r), m);
    };
}

// (f, g) in L^2(r dr) with the grid weights
inline double inner(RadialField const& f, RadialField const& g)
{
    auto const w = f.grid().weights();
    double sum = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i)
    {
        sum += w[i] * f.offset(i) * g.offset(i);
    }
    return sum;
}

inline double max_abs(RadialField const& f, double r1 = 0.0, double r2 = INFINITY)
{
    double out = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i)
    {
        const double r = f.grid()[i];
        if (r >= r1 && r <= r2)
        {
            out = std::max(out, std::abs(f.offset(i)));
        }
    }
    return out;
}

// Composite Simpson in x = log r on [log a, log b]; integrand given in r
inline double reference_integral(std::function<double(double)> const& f_times_r2, double a,
                                 double b, std::size_t n = 1000000)
{
    const double xa = std::log(a);
    const double h = (std::log(b) - xa) / static_cast<double>(n);
    double sum = f_times_r2(a) + f_times_r2(b);
    for (std::size_t i = 1; i < n; ++i)
    {
        sum += (i % 2 ? 4.0 : 2.0) * f_times_r2(std::exp(xa + h * static_cast<double>(i)));
    }
    return sum * h / 3.0;
}

}  // namespace hmhf::test
