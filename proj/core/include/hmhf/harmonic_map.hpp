#pragma once

#include "hmhf/radial_grid.hpp"

namespace hmhf {

/// Degree and scale of the harmonic map Q^s(r) = pi - 2 arctan((r/s)^m).
struct BubbleProfile
{
    int m = 1;
    double s = 1.0;
};

//! Throws ContractViolation unless m >= 1 and s > 0
void validate(BubbleProfile const& profile);

// Pointwise closed forms. With t = m log(r/s) these are evaluated as
// Q = 2 atan(e^-t), h = sech t, hhat = tanh t, which stay finite and keep
// h^2 + hhat^2 = 1 for any ratio r/s.
double eval_Q(BubbleProfile const& profile, double r);
//! Q^s(r) - pi, accurate near the origin
double eval_Q_offset(BubbleProfile const& profile, double r);
double eval_h(BubbleProfile const& profile, double r);
double eval_hhat(BubbleProfile const& profile, double r);

// Radial derivatives obtained by differentiating the rational forms
// directly (quotient rule), independent of the identities they satisfy.
double eval_Q_r(BubbleProfile const& profile, double r);
double eval_h_r(BubbleProfile const& profile, double r);
double eval_hhat_r(BubbleProfile const& profile, double r);

//! Q^s sampled on a grid (E1 sector, stored as offsets from pi)
RadialField sample_Q(GridPtr const& grid, BubbleProfile const& profile);
RadialField sample_h(GridPtr const& grid, BubbleProfile const& profile);
RadialField sample_hhat(GridPtr const& grid, BubbleProfile const& profile);

enum class DerivativeMode
{
    Analytic,
    FiniteDifference
};

/*!
 * Max over the nodes of |Q_r + (m/r) sin Q|.
 *
 * Analytic mode uses eval_Q_r and the closed form sin Q = h, so the result
 * is rounding-level. Finite-difference mode differentiates the sampled Q and
 * converges at second order.
 */
double bogomolny_residual(BubbleProfile const& profile, RadialGrid const& grid,
                          DerivativeMode mode);

//! Same, on a shared grid
double bogomolny_residual(BubbleProfile const& profile, GridPtr const& grid,
                          DerivativeMode mode);

//! Quadrature of E(Q) on the default grid; equals 2m
double energy_of_Q(int m);

}  // namespace hmhf
