#pragma once

#include <optional>
#include <vector>

#include "hmhf/radial_grid.hpp"

namespace hmhf {

//! v = u / r^m, a radial function on R^d with d = 2m + 2
struct LiftedField
{
    GridPtr grid;
    std::vector<double> values;
    int m = 1;

    int dimension() const noexcept { return 2 * m + 2; }
};

//! Throws PreconditionError for E1-type input (u / r^m is unbounded)
LiftedField lift(RadialField const& u, int m);
RadialField unlift(LiftedField const& v);

//! r^{-2} (v_xx + (d - 2) v_x), x = log r, centered; zero at the end nodes
std::vector<double> radial_laplacian(LiftedField const& v);

/*!
 * max |Delta_m u - r^m Delta_d (u / r^m)| over the nodes in [r1, r2]
 * (default [10 r_min, r_max / 10]).
 */
double commutation_residual(RadialField const& u, int m,
                            std::optional<double> r1 = {},
                            std::optional<double> r2 = {});

struct NormIdentity
{
    double p = 0.0;    //!< 2m / (m - 1)
    double lhs = 0.0;  //!< ||u / r||_{L^p(r dr)}
    double rhs = 0.0;  //!< (int |v|^p r^{d-1} dr)^{1/p}
    //! |S^{d-1}|; the R^d norm of v is |S^{d-1}|^{1/p} * rhs
    double angular_constant = 0.0;
};

//! Requires m >= 2
NormIdentity norm_identity_check(RadialField const& u, int m);

//! Surface area of the unit sphere in R^d
double unit_sphere_area(int d);

/*!
 * Backward Euler step of v_t = Delta_d v. The outer node keeps its value;
 * the inner node uses the even-extension closure v_x = 0.
 */
LiftedField lifted_heat_step(LiftedField const& v, double dt);

LiftedField lifted_heat_evolve(LiftedField v, double dt, int steps);

//! u(r, t) = r^m (1 + 4t)^{-(m+1)} exp(-r^2 / (1 + 4t)), solves u_t = Delta_m u
double forced_linear_gaussian(int m, double r, double t);

}  // namespace hmhf
