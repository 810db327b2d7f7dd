#include "hmhf/energy_diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "hmhf/errors.hpp"

namespace hmhf {

std::vector<double> log_derivative(RadialField const& field)
{
    const auto v = field.offsets();
    const std::size_t n = v.size();
    const double scale = 1.0 / (12.0 * field.grid().log_step());
    std::vector<double> d(n);
    for (std::size_t i = 2; i + 2 < n; ++i)
    {
        d[i] = (-v[i + 2] + 8.0 * v[i + 1] - 8.0 * v[i - 1] + v[i - 2]) * scale;
    }
    d[0] = (-25.0 * v[0] + 48.0 * v[1] - 36.0 * v[2] + 16.0 * v[3] - 3.0 * v[4]) * scale;
    d[1] = (-3.0 * v[0] - 10.0 * v[1] + 18.0 * v[2] - 6.0 * v[3] + v[4]) * scale;
    const std::size_t a = n - 1;
    d[a] = (25.0 * v[a] - 48.0 * v[a - 1] + 36.0 * v[a - 2] - 16.0 * v[a - 3]
            + 3.0 * v[a - 4])
           * scale;
    d[a - 1] = (3.0 * v[a] + 10.0 * v[a - 1] - 18.0 * v[a - 2] + 6.0 * v[a - 3]
                - v[a - 4])
               * scale;
    return d;
}

namespace {

struct Densities
{
    std::vector<double> dirichlet;
    std::vector<double> potential;
};

Densities densities(RadialField const& field, int m)
{
    const auto ux = log_derivative(field);
    const double m2 = static_cast<double>(m) * m;
    Densities out{std::vector<double>(ux.size()), std::vector<double>(ux.size())};
    for (std::size_t i = 0; i < ux.size(); ++i)
    {
        const double s = std::sin(field.offset(i));
        out.dirichlet[i] = 0.5 * ux[i] * ux[i];
        out.potential[i] = 0.5 * m2 * s * s;
    }
    return out;
}

double trapezoid(RadialGrid const& grid, std::vector<double> const& f)
{
    double sum = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i)
    {
        sum += grid.log_weight(i) * f[i];
    }
    return sum;
}

// Integral over x in [xa, xb] of the piecewise linear interpolant of f
double window_integral(RadialGrid const& grid, std::vector<double> const& f, double xa,
                       double xb)
{
    const double x0 = std::log(grid.r_min());
    const double dx = grid.log_step();
    const std::size_t n = grid.size();
    double sum = 0.0;
    for (std::size_t k = 0; k + 1 < n; ++k)
    {
        const double left = x0 + dx * static_cast<double>(k);
        const double right = left + dx;
        const double a = std::max(left, xa);
        const double b = std::min(right, xb);
        if (!(b > a))
        {
            continue;
        }
        const double fa = f[k] + (f[k + 1] - f[k]) * (a - left) / dx;
        const double fb = f[k] + (f[k + 1] - f[k]) * (b - left) / dx;
        sum += 0.5 * (b - a) * (fa + fb);
    }
    return sum;
}

}  // namespace

std::vector<double> energy_density(RadialField const& field, int m)
{
    auto d = densities(field, m);
    for (std::size_t i = 0; i < d.dirichlet.size(); ++i)
    {
        d.dirichlet[i] += d.potential[i];
    }
    return d.dirichlet;
}

EnergyBreakdown energy(RadialField const& field, int m, std::optional<double> r1,
                       std::optional<double> r2)
{
    auto const& grid = field.grid();
    const auto d = densities(field, m);

    // Unresolved core (0, r_min) taken as v0 (r / r_min)^m: each part m v0^2 / 4
    const double v0 = field.offset(0);
    const double core = 0.25 * m * v0 * v0;

    EnergyBreakdown out;
    out.dirichlet = trapezoid(grid, d.dirichlet) + core;
    out.potential = trapezoid(grid, d.potential) + core;
    out.total = out.dirichlet + out.potential;

    if (r1 || r2)
    {
        const double a = r1.value_or(0.0);
        const double b = r2.value_or(std::numeric_limits<double>::infinity());
        if (a < 0.0 || !(b > a))
        {
            throw ContractViolation("energy: window requires 0 <= r1 < r2");
        }
        const double xa = a > 0.0 ? std::log(a) : -std::numeric_limits<double>::infinity();
        const double xb = std::log(b);
        std::vector<double> total(d.dirichlet.size());
        for (std::size_t i = 0; i < total.size(); ++i)
        {
            total[i] = d.dirichlet[i] + d.potential[i];
        }
        const double inner = a <= grid.r_min() ? 2.0 * core : 0.0;
        out.window = WindowEnergy{a, b, window_integral(grid, total, xa, xb) + inner};
    }
    return out;
}

double x2_norm(RadialField const& field, int m)
{
    const auto ux = log_derivative(field);
    const double m2 = static_cast<double>(m) * m;
    double sum = 0.0;
    for (std::size_t i = 0; i < ux.size(); ++i)
    {
        const double v = field.offset(i);
        sum += field.grid().log_weight(i) * (ux[i] * ux[i] + m2 * v * v);
    }
    return std::sqrt(sum);
}

double xp_norm(RadialField const& field, int m, double p)
{
    if (!(p >= 1.0))
    {
        throw ContractViolation("xp_norm: p must be in [1, inf]");
    }
    auto const& grid = field.grid();
    const auto ux = log_derivative(field);
    if (std::isinf(p))
    {
        double a = 0.0;
        double b = 0.0;
        for (std::size_t i = 0; i < ux.size(); ++i)
        {
            a = std::max(a, std::abs(ux[i]) / grid[i]);
            b = std::max(b, std::abs(field.offset(i)) / grid[i]);
        }
        return std::max(a, m * b);
    }
    double sum = 0.0;
    const double mp = std::pow(static_cast<double>(m), p);
    for (std::size_t i = 0; i < ux.size(); ++i)
    {
        const double r = grid[i];
        sum += grid.weights()[i]
               * (std::pow(std::abs(ux[i]) / r, p)
                  + mp * std::pow(std::abs(field.offset(i)) / r, p));
    }
    return std::pow(sum, 1.0 / p);
}

double rLp_norm(RadialField const& field, double p)
{
    if (!(p >= 1.0))
    {
        throw ContractViolation("rLp_norm: p must be in [1, inf]");
    }
    auto const& grid = field.grid();
    if (std::isinf(p))
    {
        double worst = 0.0;
        for (std::size_t i = 0; i < grid.size(); ++i)
        {
            worst = std::max(worst, std::abs(field.offset(i)) / grid[i]);
        }
        return worst;
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i)
    {
        sum += grid.weights()[i] * std::pow(std::abs(field.offset(i)) / grid[i], p);
    }
    return std::pow(sum, 1.0 / p);
}

std::string_view to_string(Sector sector)
{
    switch (sector)
    {
        case Sector::E0:
            return "E0";
        case Sector::E1:
            return "E1";
        case Sector::Other:
            break;
    }
    return "Other";
}

namespace {

// Boundary samples must sit near the labelled limits (0 at r_max)
bool boundary_consistent(RadialField const& field)
{
    constexpr double tol = 0.5;
    return std::abs(field.offset(0)) < tol
           && std::abs(field.angle(field.size() - 1)) < tol;
}

}  // namespace

SectorClass classify(RadialField const& field, int m)
{
    SectorClass out;
    out.energy = energy(field, m).total;
    if (!boundary_consistent(field))
    {
        return out;
    }
    const double eq = harmonic_map_energy(m);
    if (field.inner_limit() == InnerLimit::Zero)
    {
        if (out.energy < 2.0 * eq)
        {
            out.label = Sector::E0;
            out.delta1 = 2.0 * eq - out.energy;
        }
    }
    else if (out.energy >= eq * (1.0 - 1e-3) && out.energy <= 3.0 * eq)
    {
        // E(Q) <= E(u) up to quadrature error on the bubble itself
        out.label = Sector::E1;
    }
    return out;
}

double g_functional(double u, int m)
{
    const double a = std::abs(u);
    const double k = std::floor(a / std::numbers::pi);
    const double rem = a - k * std::numbers::pi;
    const double g = m * (2.0 * k + (1.0 - std::cos(rem)));
    return u < 0.0 ? -g : g;
}

double g_inverse(double value, int m)
{
    if (value < 0.0 || value > 2.0 * m)
    {
        throw ContractViolation("g_inverse: value outside [0, 2m]");
    }
    return std::acos(std::clamp(1.0 - value / m, -1.0, 1.0));
}

double pointwise_bound_delta2(int m, double delta1)
{
    if (!(delta1 > 0.0) || delta1 > 4.0 * m)
    {
        throw PreconditionError("pointwise bound: delta1 must lie in (0, 2E(Q)]");
    }
    return std::numbers::pi - g_inverse(2.0 * m - 0.5 * delta1, m);
}

PointwiseBound pointwise_bound_check(RadialField const& field, int m, double delta1)
{
    const auto sector = classify(field, m);
    if (sector.label != Sector::E0)
    {
        throw PreconditionError("pointwise bound: field is not in E0");
    }
    if (sector.energy > 2.0 * harmonic_map_energy(m) - delta1)
    {
        throw PreconditionError("pointwise bound: E(u) exceeds 2E(Q) - delta1");
    }
    PointwiseBound out;
    out.delta2 = pointwise_bound_delta2(m, delta1);
    for (std::size_t i = 0; i < field.size(); ++i)
    {
        out.sup_abs = std::max(out.sup_abs, std::abs(field.angle(i)));
    }
    out.holds = out.sup_abs <= std::numbers::pi - out.delta2;
    return out;
}

double topological_bound_gap(RadialField const& field, int m)
{
    if (!boundary_consistent(field))
    {
        throw ContractViolation("topological bound: boundary values not near pi Z");
    }
    const double inner = inner_value(field.inner_limit());
    const double degree = m * (std::cos(0.0) - std::cos(inner)) / 2.0;
    const double e = energy(field, m).total;
    const double gap = e - 2.0 * std::abs(degree);
    if (gap < -1e-3 * std::max(e, 1.0))
    {
        throw ContractViolation("topological bound: negative gap beyond quadrature error");
    }
    return gap;
}

double exterior_cutoff(double rho)
{
    const double t = std::clamp(rho - 1.0, 0.0, 1.0);
    return t * t * (3.0 - 2.0 * t);
}

double exterior_energy(RadialField const& field, int m, double radius)
{
    auto const& grid = field.grid();
    if (!(radius > grid.r_min() && radius < grid.r_max()))
    {
        throw ContractViolation("exterior_energy: R must lie in (r_min, r_max)");
    }
    const auto density = energy_density(field, m);
    double sum = 0.0;
    for (std::size_t i = 0; i < density.size(); ++i)
    {
        sum += grid.log_weight(i) * exterior_cutoff(grid[i] / radius) * density[i];
    }
    return sum;
}

}  // namespace hmhf
