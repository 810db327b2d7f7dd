#pragma once

#include <array>
#include <cstddef>
#include <memory>
#include <span>
#include <vector>

namespace hmhf {

//---------------------------------------------------------------------------//
/*!
 * Geometric node set on [r_min, r_max] with quadrature weights for r dr.
 *
 * Nodes are r_i = r_min (r_max/r_min)^{i/(n-1)}. In the logarithmic
 * coordinate x = log r the nodes are uniform with spacing log_step(), and
 * since r dr = r^2 dx the weights are the trapezoid rule in x applied to
 * f(r) r^2. Grids are immutable and shared between fields by pointer.
 */
class RadialGrid
{
  public:
    RadialGrid(double r_min, double r_max, std::size_t n);

    double r_min() const noexcept { return nodes_.front(); }
    double r_max() const noexcept { return nodes_.back(); }
    std::size_t size() const noexcept { return nodes_.size(); }

    //! Uniform spacing of the nodes in log r
    double log_step() const noexcept { return log_step_; }

    double operator[](std::size_t i) const { return nodes_[i]; }
    std::span<const double> nodes() const noexcept { return nodes_; }

    //! Weights w_i with sum_i w_i f(r_i) ~ int f(r) r dr
    std::span<const double> weights() const noexcept { return weights_; }

    //! Trapezoid weight in x (log_step, halved at both ends)
    double log_weight(std::size_t i) const noexcept;

    double integrate(std::span<const double> f) const;

    //! Largest index i with r_i <= r (clamped to [0, n-2])
    std::size_t cell_index(double r) const noexcept;

    //! Same node set (parameters equal)
    bool same_as(RadialGrid const& other) const noexcept;

  private:
    std::vector<double> nodes_;
    std::vector<double> weights_;
    double log_step_;
};

using GridPtr = std::shared_ptr<RadialGrid const>;

inline constexpr double kDefaultRMin = 1e-4;
inline constexpr double kDefaultRMax = 1e3;
inline constexpr std::size_t kDefaultNodes = 2048;

//! Validated construction; throws ConfigError on bad parameters.
GridPtr build_grid(double r_min, double r_max, std::size_t n);

//! The default resolution (1e-4, 1e3, 2048)
GridPtr default_grid();

//---------------------------------------------------------------------------//
// Fields
//---------------------------------------------------------------------------//

//! Value of lim_{r->0+} u; the outer limit is always 0.
enum class InnerLimit
{
    Zero,
    Pi
};

double inner_value(InnerLimit limit) noexcept;

/*!
 * Sampled angle u(r_i) on a grid.
 *
 * Values are stored as offsets v = u - inner_limit. The flow, its energy
 * and every linear operator in this library are invariant under u -> u - pi,
 * so operators act on the offsets; for E1-sector data this keeps the small
 * quantity u - pi ~ r^m near the origin at full relative precision.
 */
class RadialField
{
  public:
    RadialField(GridPtr grid, std::vector<double> offsets,
                InnerLimit inner = InnerLimit::Zero);

    static RadialField zeros(GridPtr grid, InnerLimit inner = InnerLimit::Zero);

    //! Build from a callable returning the offset at radius r
    template<class F>
    static RadialField from_offsets(GridPtr grid, F&& offset_at,
                                    InnerLimit inner = InnerLimit::Zero)
    {
        std::vector<double> v(grid->size());
        for (std::size_t i = 0; i < v.size(); ++i)
        {
            v[i] = offset_at((*grid)[i]);
        }
        return RadialField(std::move(grid), std::move(v), inner);
    }

    //! Build from true angles
    static RadialField from_angles(GridPtr grid, std::span<const double> angles,
                                   InnerLimit inner);

    RadialGrid const& grid() const noexcept { return *grid_; }
    GridPtr const& grid_ptr() const noexcept { return grid_; }
    std::size_t size() const noexcept { return offsets_.size(); }
    InnerLimit inner_limit() const noexcept { return inner_; }

    std::span<const double> offsets() const noexcept { return offsets_; }
    std::span<double> offsets() noexcept { return offsets_; }
    double offset(std::size_t i) const { return offsets_[i]; }

    double angle(std::size_t i) const { return inner_value(inner_) + offsets_[i]; }
    std::vector<double> angles() const;

    //! All offsets finite
    bool is_finite() const noexcept;

    RadialField& operator+=(RadialField const& other);
    RadialField& operator-=(RadialField const& other);
    RadialField& operator*=(double factor);

  private:
    GridPtr grid_;
    std::vector<double> offsets_;
    InnerLimit inner_;
};

RadialField operator+(RadialField lhs, RadialField const& rhs);
RadialField operator-(RadialField lhs, RadialField const& rhs);
RadialField operator*(double factor, RadialField field);

//! Throws ContractViolation unless both fields live on the same grid
void require_same_grid(RadialField const& a, RadialField const& b);

/*!
 * Least-squares slope of log|u - inner_limit| against log r over the nodes
 * in [r_min, 10 r_min]. For data built by this toolkit it is ~m.
 */
double leading_exponent(RadialField const& field);

//---------------------------------------------------------------------------//
// Operators
//---------------------------------------------------------------------------//

/*!
 * Tridiagonal realization of Delta_m = d_rr + (1/r) d_r - m^2/r^2.
 *
 * Interior rows use the exact transformation Delta_r = r^{-2} d_xx in
 * x = log r with a centered second difference. The centrifugal coefficient
 * is the fitted value mu = (2 sinh(m dx / 2) / dx)^2 = m^2 + O(dx^2), which
 * makes r^m and r^{-m} exact discrete null vectors. First and last rows are
 * zero: boundary nodes carry Dirichlet data.
 */
struct OperatorStencil
{
    std::vector<double> sub;
    std::vector<double> diag;
    std::vector<double> super;
};

//! Fitted centrifugal coefficient for the given log spacing
double fitted_centrifugal(double log_step, int m);

OperatorStencil delta_m_stencil(RadialGrid const& grid, int m);

//! Delta_m applied to the offsets; result is a plain function (inner Zero)
RadialField apply_delta_m(RadialField const& field, int m);

//! Nonuniform three-point derivative; second-order one-sided at the ends
RadialField differentiate(RadialField const& field);

//! (I - alpha Delta_m) applied to the offsets (identity on boundary rows)
RadialField apply_helmholtz(RadialField const& field, int m, double alpha);

//! Solve (I - alpha Delta_m) u = rhs with boundary values taken from rhs
RadialField solve_helmholtz(RadialField const& rhs, int m, double alpha);

/*!
 * Sparse nonuniform first-derivative matrix used by differentiate().
 *
 * Row i has three coefficients acting on columns first_column(i) ..
 * first_column(i) + 2. Exposed so the modulation operators can build the
 * exact discrete adjoint.
 */
class DerivativeMatrix
{
  public:
    explicit DerivativeMatrix(RadialGrid const& grid);

    std::size_t size() const noexcept { return coeffs_.size(); }
    std::size_t first_column(std::size_t row) const noexcept;
    double coeff(std::size_t row, std::size_t k) const { return coeffs_[row][k]; }

    //! y = D x
    void apply(std::span<const double> x, std::span<double> y) const;
    //! y = D^T x
    void apply_transpose(std::span<const double> x, std::span<double> y) const;

  private:
    std::vector<std::array<double, 3>> coeffs_;
};

}  // namespace hmhf
