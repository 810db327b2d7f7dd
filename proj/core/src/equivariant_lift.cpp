#include "hmhf/equivariant_lift.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "hmhf/errors.hpp"
#include "hmhf/tridiagonal.hpp"

namespace hmhf {

LiftedField lift(RadialField const& u, int m)
{
    if (m < 1)
    {
        throw PreconditionError("lift: m must be >= 1");
    }
    if (u.inner_limit() != InnerLimit::Zero)
    {
        throw PreconditionError("lift: E1-type field (u / r^m is unbounded at the origin)");
    }
    auto const& grid = u.grid();
    LiftedField v{u.grid_ptr(), std::vector<double>(u.size()), m};
    for (std::size_t i = 0; i < u.size(); ++i)
    {
        v.values[i] = u.offset(i) / std::pow(grid[i], m);
    }
    return v;
}

RadialField unlift(LiftedField const& v)
{
    auto const& grid = *v.grid;
    std::vector<double> u(v.values.size());
    for (std::size_t i = 0; i < u.size(); ++i)
    {
        u[i] = std::pow(grid[i], v.m) * v.values[i];
    }
    return RadialField(v.grid, std::move(u));
}

std::vector<double> radial_laplacian(LiftedField const& v)
{
    auto const& grid = *v.grid;
    const double dx = grid.log_step();
    const double d = v.dimension();
    const std::size_t n = v.values.size();
    std::vector<double> out(n, 0.0);
    for (std::size_t i = 1; i + 1 < n; ++i)
    {
        const double vxx = (v.values[i + 1] - 2.0 * v.values[i] + v.values[i - 1]) / (dx * dx);
        const double vx = (v.values[i + 1] - v.values[i - 1]) / (2.0 * dx);
        out[i] = (vxx + (d - 2.0) * vx) / (grid[i] * grid[i]);
    }
    return out;
}

double commutation_residual(RadialField const& u, int m, std::optional<double> r1,
                            std::optional<double> r2)
{
    auto const& grid = u.grid();
    const double lo = r1 ? *r1 : 10.0 * grid.r_min();
    const double hi = r2 ? *r2 : grid.r_max() / 10.0;
    auto direct = apply_delta_m(u, m);
    auto lifted = radial_laplacian(lift(u, m));
    double worst = 0.0;
    for (std::size_t i = 1; i + 1 < u.size(); ++i)
    {
        const double r = grid[i];
        if (r < lo || r > hi)
        {
            continue;
        }
        worst = std::max(worst, std::abs(direct.offset(i) - std::pow(r, m) * lifted[i]));
    }
    return worst;
}

double unit_sphere_area(int d)
{
    return 2.0 * std::pow(std::numbers::pi, 0.5 * d) / std::tgamma(0.5 * d);
}

NormIdentity norm_identity_check(RadialField const& u, int m)
{
    if (m < 2)
    {
        throw PreconditionError("norm_identity_check: requires m >= 2");
    }
    auto const& grid = u.grid();
    const auto lifted = lift(u, m);
    const int d = lifted.dimension();
    NormIdentity out;
    out.p = 2.0 * m / (m - 1.0);
    out.angular_constant = unit_sphere_area(d);

    // Both integrals use the trapezoid rule in x = log r: dr = r dx
    double lhs = 0.0;
    double rhs = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i)
    {
        const double r = grid[i];
        const double wx = grid.log_weight(i);
        lhs += wx * r * r * std::pow(std::abs(u.offset(i) / r), out.p);
        rhs += wx * std::pow(r, d) * std::pow(std::abs(lifted.values[i]), out.p);
    }
    out.lhs = std::pow(lhs, 1.0 / out.p);
    out.rhs = std::pow(rhs, 1.0 / out.p);
    return out;
}

LiftedField lifted_heat_step(LiftedField const& v, double dt)
{
    if (!(dt > 0.0))
    {
        throw ConfigError("lifted_heat_step: dt must be positive");
    }
    auto const& grid = *v.grid;
    const std::size_t n = v.values.size();
    const double dx = grid.log_step();
    const double d = v.dimension();
    std::vector<double> sub(n, 0.0), diag(n, 1.0), super(n, 0.0);
    std::vector<double> rhs = v.values;
    // Inner closure v_0 = v_1
    super[0] = -1.0;
    rhs[0] = 0.0;
    for (std::size_t i = 1; i + 1 < n; ++i)
    {
        const double c = dt / (grid[i] * grid[i]);
        const double a = 1.0 / (dx * dx);
        const double b = (d - 2.0) / (2.0 * dx);
        sub[i] = -c * (a - b);
        super[i] = -c * (a + b);
        diag[i] = 1.0 + 2.0 * c * a;
    }
    LiftedField out{v.grid, solve_tridiagonal(sub, diag, super, rhs), v.m};
    return out;
}

LiftedField lifted_heat_evolve(LiftedField v, double dt, int steps)
{
    for (int k = 0; k < steps; ++k)
    {
        v = lifted_heat_step(v, dt);
    }
    return v;
}

double forced_linear_gaussian(int m, double r, double t)
{
    const double a = 1.0 + 4.0 * t;
    return std::pow(r, m) * std::pow(a, -(m + 1.0)) * std::exp(-r * r / a);
}

}  // namespace hmhf
