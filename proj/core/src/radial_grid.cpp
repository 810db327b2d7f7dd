#include "hmhf/radial_grid.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "hmhf/errors.hpp"
#include "hmhf/tridiagonal.hpp"

namespace hmhf {

//---------------------------------------------------------------------------//
// RadialGrid
//---------------------------------------------------------------------------//

RadialGrid::RadialGrid(double r_min, double r_max, std::size_t n)
{
    if (!(r_min > 0.0) || !std::isfinite(r_min))
    {
        throw ConfigError("grid: r_min must be positive and finite, got "
                          + std::to_string(r_min));
    }
    if (!(r_max > r_min) || !std::isfinite(r_max))
    {
        throw ConfigError("grid: r_max must exceed r_min");
    }
    if (n < 16)
    {
        throw ConfigError("grid: node count must be at least 16, got "
                          + std::to_string(n));
    }

    const double log_min = std::log(r_min);
    const double log_span = std::log(r_max) - log_min;
    log_step_ = log_span / static_cast<double>(n - 1);

    nodes_.resize(n);
    weights_.resize(n);
    for (std::size_t i = 0; i < n; ++i)
    {
        nodes_[i] = std::exp(log_min + log_step_ * static_cast<double>(i));
    }
    // Pin the end points exactly
    nodes_.front() = r_min;
    nodes_.back() = r_max;

    for (std::size_t i = 0; i < n; ++i)
    {
        weights_[i] = log_weight(i) * nodes_[i] * nodes_[i];
    }
}

double RadialGrid::log_weight(std::size_t i) const noexcept
{
    return (i == 0 || i + 1 == nodes_.size()) ? 0.5 * log_step_ : log_step_;
}

double RadialGrid::integrate(std::span<const double> f) const
{
    if (f.size() != nodes_.size())
    {
        throw ContractViolation("integrate: sample count does not match grid");
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i)
    {
        sum += weights_[i] * f[i];
    }
    return sum;
}

std::size_t RadialGrid::cell_index(double r) const noexcept
{
    if (!(r > nodes_.front()))
    {
        return 0;
    }
    if (r >= nodes_.back())
    {
        return nodes_.size() - 2;
    }
    auto x = (std::log(r) - std::log(nodes_.front())) / log_step_;
    auto i = static_cast<std::size_t>(std::clamp(std::floor(x), 0.0,
                                                 static_cast<double>(nodes_.size() - 2)));
    // Guard against rounding in the log
    while (i + 2 < nodes_.size() && nodes_[i + 1] <= r)
    {
        ++i;
    }
    while (i > 0 && nodes_[i] > r)
    {
        --i;
    }
    return i;
}

bool RadialGrid::same_as(RadialGrid const& other) const noexcept
{
    return this == &other
           || (nodes_.size() == other.nodes_.size()
               && nodes_.front() == other.nodes_.front()
               && nodes_.back() == other.nodes_.back());
}

GridPtr build_grid(double r_min, double r_max, std::size_t n)
{
    return std::make_shared<RadialGrid const>(r_min, r_max, n);
}

GridPtr default_grid()
{
    static const GridPtr grid = build_grid(kDefaultRMin, kDefaultRMax, kDefaultNodes);
    return grid;
}

//---------------------------------------------------------------------------//
// RadialField
//---------------------------------------------------------------------------//

double inner_value(InnerLimit limit) noexcept
{
    return limit == InnerLimit::Pi ? std::numbers::pi : 0.0;
}

RadialField::RadialField(GridPtr grid, std::vector<double> offsets, InnerLimit inner)
    : grid_{std::move(grid)}, offsets_{std::move(offsets)}, inner_{inner}
{
    if (!grid_)
    {
        throw ContractViolation("field: null grid");
    }
    if (offsets_.size() != grid_->size())
    {
        throw ContractViolation("field: sample count does not match grid");
    }
}

RadialField RadialField::zeros(GridPtr grid, InnerLimit inner)
{
    std::vector<double> v(grid->size(), 0.0);
    return RadialField(std::move(grid), std::move(v), inner);
}

RadialField RadialField::from_angles(GridPtr grid, std::span<const double> angles,
                                     InnerLimit inner)
{
    const double base = inner_value(inner);
    std::vector<double> v(angles.begin(), angles.end());
    for (auto& x : v)
    {
        x -= base;
    }
    return RadialField(std::move(grid), std::move(v), inner);
}

std::vector<double> RadialField::angles() const
{
    std::vector<double> out(offsets_);
    const double base = inner_value(inner_);
    for (auto& x : out)
    {
        x += base;
    }
    return out;
}

bool RadialField::is_finite() const noexcept
{
    return std::all_of(offsets_.begin(), offsets_.end(),
                       [](double x) { return std::isfinite(x); });
}

namespace {

int pi_count(InnerLimit limit)
{
    return limit == InnerLimit::Pi ? 1 : 0;
}

InnerLimit limit_from_count(int k)
{
    if (k == 0)
    {
        return InnerLimit::Zero;
    }
    if (k == 1)
    {
        return InnerLimit::Pi;
    }
    throw ContractViolation("field arithmetic: inner limit leaves {0, pi}");
}

}  // namespace

RadialField& RadialField::operator+=(RadialField const& other)
{
    require_same_grid(*this, other);
    inner_ = limit_from_count(pi_count(inner_) + pi_count(other.inner_));
    for (std::size_t i = 0; i < offsets_.size(); ++i)
    {
        offsets_[i] += other.offsets_[i];
    }
    return *this;
}

RadialField& RadialField::operator-=(RadialField const& other)
{
    require_same_grid(*this, other);
    inner_ = limit_from_count(pi_count(inner_) - pi_count(other.inner_));
    for (std::size_t i = 0; i < offsets_.size(); ++i)
    {
        offsets_[i] -= other.offsets_[i];
    }
    return *this;
}

RadialField& RadialField::operator*=(double factor)
{
    if (inner_ != InnerLimit::Zero && factor != 1.0)
    {
        throw ContractViolation("field arithmetic: cannot scale an E1-type angle");
    }
    for (auto& x : offsets_)
    {
        x *= factor;
    }
    return *this;
}

RadialField operator+(RadialField lhs, RadialField const& rhs)
{
    lhs += rhs;
    return lhs;
}

RadialField operator-(RadialField lhs, RadialField const& rhs)
{
    lhs -= rhs;
    return lhs;
}

RadialField operator*(double factor, RadialField field)
{
    field *= factor;
    return field;
}

void require_same_grid(RadialField const& a, RadialField const& b)
{
    if (!a.grid().same_as(b.grid()))
    {
        throw ContractViolation("fields live on different grids");
    }
}

double leading_exponent(RadialField const& field)
{
    auto const& grid = field.grid();
    const double r_end = 10.0 * grid.r_min();
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < grid.size() && grid[i] <= r_end; ++i)
    {
        const double v = std::abs(field.offset(i));
        if (!(v > 0.0))
        {
            continue;
        }
        const double x = std::log(grid[i]);
        const double y = std::log(v);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
        ++count;
    }
    if (count < 3)
    {
        return std::numeric_limits<double>::quiet_NaN();
    }
    const double nc = static_cast<double>(count);
    return (nc * sxy - sx * sy) / (nc * sxx - sx * sx);
}

//---------------------------------------------------------------------------//
// Delta_m and friends
//---------------------------------------------------------------------------//

double fitted_centrifugal(double log_step, int m)
{
    const double half = 0.5 * static_cast<double>(m) * log_step;
    const double factor = 2.0 * std::sinh(half) / log_step;
    return factor * factor;
}

OperatorStencil delta_m_stencil(RadialGrid const& grid, int m)
{
    if (m < 1)
    {
        throw ContractViolation("Delta_m: degree must be >= 1");
    }
    const std::size_t n = grid.size();
    const double dx2 = grid.log_step() * grid.log_step();
    const double mu = fitted_centrifugal(grid.log_step(), m);

    OperatorStencil st;
    st.sub.assign(n, 0.0);
    st.diag.assign(n, 0.0);
    st.super.assign(n, 0.0);
    for (std::size_t i = 1; i + 1 < n; ++i)
    {
        const double inv_r2 = 1.0 / (grid[i] * grid[i]);
        st.sub[i] = inv_r2 / dx2;
        st.super[i] = inv_r2 / dx2;
        st.diag[i] = -inv_r2 * (2.0 / dx2 + mu);
    }
    return st;
}

RadialField apply_delta_m(RadialField const& field, int m)
{
    const auto st = delta_m_stencil(field.grid(), m);
    const auto v = field.offsets();
    const std::size_t n = v.size();
    std::vector<double> out(n, 0.0);
    for (std::size_t i = 1; i + 1 < n; ++i)
    {
        out[i] = st.sub[i] * v[i - 1] + st.diag[i] * v[i] + st.super[i] * v[i + 1];
    }
    return RadialField(field.grid_ptr(), std::move(out), InnerLimit::Zero);
}

RadialField apply_helmholtz(RadialField const& field, int m, double alpha)
{
    auto lap = apply_delta_m(field, m);
    std::vector<double> out(field.size());
    for (std::size_t i = 0; i < out.size(); ++i)
    {
        out[i] = field.offset(i) - alpha * lap.offset(i);
    }
    return RadialField(field.grid_ptr(), std::move(out), field.inner_limit());
}

RadialField solve_helmholtz(RadialField const& rhs, int m, double alpha)
{
    if (!(alpha > 0.0))
    {
        throw ContractViolation("solve_helmholtz: alpha must be positive");
    }
    auto st = delta_m_stencil(rhs.grid(), m);
    const std::size_t n = rhs.size();
    for (std::size_t i = 0; i < n; ++i)
    {
        st.sub[i] *= -alpha;
        st.super[i] *= -alpha;
        st.diag[i] = 1.0 - alpha * st.diag[i];
    }
    auto x = solve_tridiagonal(st.sub, st.diag, st.super, rhs.offsets());
    return RadialField(rhs.grid_ptr(), std::move(x), rhs.inner_limit());
}

//---------------------------------------------------------------------------//
// Derivative
//---------------------------------------------------------------------------//

DerivativeMatrix::DerivativeMatrix(RadialGrid const& grid) : coeffs_(grid.size())
{
    const std::size_t n = grid.size();
    for (std::size_t i = 1; i + 1 < n; ++i)
    {
        const double h1 = grid[i] - grid[i - 1];
        const double h2 = grid[i + 1] - grid[i];
        coeffs_[i] = {-h2 / (h1 * (h1 + h2)), (h2 - h1) / (h1 * h2),
                      h1 / (h2 * (h1 + h2))};
    }
    {
        const double h1 = grid[1] - grid[0];
        const double h2 = grid[2] - grid[1];
        coeffs_[0] = {-(2.0 * h1 + h2) / (h1 * (h1 + h2)), (h1 + h2) / (h1 * h2),
                      -h1 / (h2 * (h1 + h2))};
    }
    {
        const double h1 = grid[n - 2] - grid[n - 3];
        const double h2 = grid[n - 1] - grid[n - 2];
        coeffs_[n - 1] = {h2 / (h1 * (h1 + h2)), -(h1 + h2) / (h1 * h2),
                          (2.0 * h2 + h1) / (h2 * (h1 + h2))};
    }
}

std::size_t DerivativeMatrix::first_column(std::size_t row) const noexcept
{
    if (row == 0)
    {
        return 0;
    }
    if (row + 1 == coeffs_.size())
    {
        return row - 2;
    }
    return row - 1;
}

void DerivativeMatrix::apply(std::span<const double> x, std::span<double> y) const
{
    for (std::size_t i = 0; i < coeffs_.size(); ++i)
    {
        const std::size_t j = first_column(i);
        y[i] = coeffs_[i][0] * x[j] + coeffs_[i][1] * x[j + 1] + coeffs_[i][2] * x[j + 2];
    }
}

void DerivativeMatrix::apply_transpose(std::span<const double> x, std::span<double> y) const
{
    std::fill(y.begin(), y.end(), 0.0);
    for (std::size_t i = 0; i < coeffs_.size(); ++i)
    {
        const std::size_t j = first_column(i);
        for (std::size_t k = 0; k < 3; ++k)
        {
            y[j + k] += coeffs_[i][k] * x[i];
        }
    }
}

RadialField differentiate(RadialField const& field)
{
    if (field.size() < 3)
    {
        throw ContractViolation("differentiate: need at least 3 nodes");
    }
    DerivativeMatrix d(field.grid());
    std::vector<double> out(field.size());
    d.apply(field.offsets(), out);
    return RadialField(field.grid_ptr(), std::move(out), InnerLimit::Zero);
}

}  // namespace hmhf
