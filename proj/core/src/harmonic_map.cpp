#include "hmhf/harmonic_map.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "hmhf/energy_diagnostics.hpp"
#include "hmhf/errors.hpp"

namespace hmhf {
namespace {

double log_ratio(BubbleProfile const& p, double r)
{
    return static_cast<double>(p.m) * std::log(r / p.s);
}

// 2 e^t / (1 + e^{2t}) without overflow
double sech(double t)
{
    const double e = std::exp(-std::abs(t));
    return 2.0 * e / (1.0 + e * e);
}

}  // namespace

void validate(BubbleProfile const& profile)
{
    if (profile.m < 1)
    {
        throw ContractViolation("bubble: degree m must be >= 1");
    }
    if (!(profile.s > 0.0) || !std::isfinite(profile.s))
    {
        throw ContractViolation("bubble: scale s must be positive");
    }
}

double eval_Q(BubbleProfile const& profile, double r)
{
    return 2.0 * std::atan(std::exp(-log_ratio(profile, r)));
}

double eval_Q_offset(BubbleProfile const& profile, double r)
{
    return -2.0 * std::atan(std::exp(log_ratio(profile, r)));
}

double eval_h(BubbleProfile const& profile, double r)
{
    return sech(log_ratio(profile, r));
}

double eval_hhat(BubbleProfile const& profile, double r)
{
    return std::tanh(log_ratio(profile, r));
}

double eval_Q_r(BubbleProfile const& profile, double r)
{
    // d/dr [-2 atan(rho^m)] = -2 m rho^{m-1} / (s (1 + rho^{2m}))
    const double t = log_ratio(profile, r);
    const double m = profile.m;
    if (t > 0.0)
    {
        const double e = std::exp(-t);  // rho^{-m}
        return -2.0 * m / r * e / (e * e + 1.0);
    }
    const double e = std::exp(t);  // rho^m
    return -2.0 * m / r * e / (1.0 + e * e);
}

double eval_h_r(BubbleProfile const& profile, double r)
{
    // d/dr [2 rho^m / (1 + rho^{2m})] = 2 m rho^{m-1} (1 - rho^{2m}) / (s (1 + rho^{2m})^2)
    const double t = log_ratio(profile, r);
    const double m = profile.m;
    if (t > 0.0)
    {
        const double e = std::exp(-t);
        const double den = e * e + 1.0;
        return 2.0 * m / r * e * (e * e - 1.0) / (den * den);
    }
    const double e = std::exp(t);
    const double den = 1.0 + e * e;
    return 2.0 * m / r * e * (1.0 - e * e) / (den * den);
}

double eval_hhat_r(BubbleProfile const& profile, double r)
{
    // d/dr [(rho^{2m} - 1)/(rho^{2m} + 1)] = 4 m rho^{2m-1} / (s (1 + rho^{2m})^2)
    const double t = log_ratio(profile, r);
    const double m = profile.m;
    const double e = std::exp(-std::abs(t));
    const double den = 1.0 + e * e;
    return 4.0 * m / r * e * e / (den * den);
}

RadialField sample_Q(GridPtr const& grid, BubbleProfile const& profile)
{
    validate(profile);
    return RadialField::from_offsets(
        grid, [&](double r) { return eval_Q_offset(profile, r); }, InnerLimit::Pi);
}

RadialField sample_h(GridPtr const& grid, BubbleProfile const& profile)
{
    validate(profile);
    return RadialField::from_offsets(grid, [&](double r) { return eval_h(profile, r); });
}

RadialField sample_hhat(GridPtr const& grid, BubbleProfile const& profile)
{
    validate(profile);
    return RadialField::from_offsets(grid,
                                     [&](double r) { return eval_hhat(profile, r); });
}

double bogomolny_residual(BubbleProfile const& profile, RadialGrid const& grid,
                          DerivativeMode mode)
{
    validate(profile);
    const double m = profile.m;
    double worst = 0.0;
    if (mode == DerivativeMode::Analytic)
    {
        for (double r : grid.nodes())
        {
            const double res = eval_Q_r(profile, r) + m / r * eval_h(profile, r);
            worst = std::max(worst, std::abs(res));
        }
        return worst;
    }

    DerivativeMatrix d(grid);
    std::vector<double> q(grid.size());
    std::vector<double> qr(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i)
    {
        q[i] = eval_Q_offset(profile, grid[i]);
    }
    d.apply(q, qr);
    for (std::size_t i = 0; i < grid.size(); ++i)
    {
        const double r = grid[i];
        worst = std::max(worst, std::abs(qr[i] + m / r * eval_h(profile, r)));
    }
    return worst;
}

double bogomolny_residual(BubbleProfile const& profile, GridPtr const& grid,
                          DerivativeMode mode)
{
    return bogomolny_residual(profile, *grid, mode);
}

double energy_of_Q(int m)
{
    auto grid = default_grid();
    return energy(sample_Q(grid, {m, 1.0}), m).total;
}

}  // namespace hmhf
