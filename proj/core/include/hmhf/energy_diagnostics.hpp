#pragma once

#include <optional>
#include <string_view>
#include <vector>

#include "hmhf/radial_grid.hpp"

namespace hmhf {

//! E over the window [r1, r2]
struct WindowEnergy
{
    double r1 = 0.0;
    double r2 = 0.0;
    double value = 0.0;
};

//! Exterior energy with cutoff psi(r/R)
struct ExteriorEnergy
{
    double radius = 0.0;
    double value = 0.0;
};

struct EnergyBreakdown
{
    double total = 0.0;
    double dirichlet = 0.0;  //!< (1/2) int u_r^2 r dr
    double potential = 0.0;  //!< (1/2) int m^2 sin^2(u) / r^2 r dr
    std::optional<WindowEnergy> window;
    std::optional<ExteriorEnergy> exterior;
};

/*!
 * Energy E(u) = (1/2) int (u_r^2 + m^2 sin^2 u / r^2) r dr.
 *
 * In x = log r the integrand becomes (1/2)(u_x^2 + m^2 sin^2 u) dx. u_x is
 * taken with fourth-order differences and the x-integral with the trapezoid
 * rule. When r1 or r2 is given, the window energy integrates the piecewise
 * linear interpolant of the same density, so E = E_0^r + E_r^inf exactly.
 * The core r < r_min is modelled as v0 (r / r_min)^m and contributes
 * m v0^2 / 2 (split evenly), counted in windows reaching down to r_min.
 */
EnergyBreakdown energy(RadialField const& field, int m,
                       std::optional<double> r1 = std::nullopt,
                       std::optional<double> r2 = std::nullopt);

//! Energy density (1/2)(u_x^2 + m^2 sin^2 u) per unit log r at each node
std::vector<double> energy_density(RadialField const& field, int m);

//! x-derivative du/dx, fourth order (r u_r)
std::vector<double> log_derivative(RadialField const& field);

// Norms of the offset field, all in the r dr measure.
//! ||u||_{X^2} = (int u_r^2 + m^2 u^2 / r^2)^{1/2}
double x2_norm(RadialField const& field, int m);
//! (||u_r||_p^p + m^p ||u/r||_p^p)^{1/p}; p = infinity gives the max
double xp_norm(RadialField const& field, int m, double p);
//! ||u/r||_{L^p}
double rLp_norm(RadialField const& field, double p);

enum class Sector
{
    E0,
    E1,
    Other
};

std::string_view to_string(Sector sector);

struct SectorClass
{
    Sector label = Sector::Other;
    double energy = 0.0;
    //! 2E(Q) - E(u) for E0 data
    std::optional<double> delta1;
};

//! Sector from the boundary labels and E(u), with E(Q) = 2m
SectorClass classify(RadialField const& field, int m);

//! E(Q) = 2m, the harmonic map energy
inline double harmonic_map_energy(int m)
{
    return 2.0 * m;
}

//! G(u) = int_0^u m |sin s| ds; odd and increasing, G(pi) = 2m
double g_functional(double u, int m);
//! Inverse of G on [0, 2m]
double g_inverse(double value, int m);

struct PointwiseBound
{
    double delta2 = 0.0;
    double sup_abs = 0.0;
    bool holds = false;
};

/*!
 * For E0 data with E(u) <= 2E(Q) - delta1, |G(u(r))| <= E(u)/2 gives
 * sup |u| <= pi - delta2 with delta2 = pi - G^{-1}(2m - delta1/2).
 * Throws PreconditionError if the field is not E0 or exceeds the cap.
 */
PointwiseBound pointwise_bound_check(RadialField const& field, int m, double delta1);

//! delta2 for a given delta1 (no field needed)
double pointwise_bound_delta2(int m, double delta1);

/*!
 * E(u) - 2|deg| with deg = m (cos u(inf) - cos u(0)) / 2 taken from the
 * boundary labels. Nonnegative up to quadrature error; a gross violation
 * raises ContractViolation.
 */
double topological_bound_gap(RadialField const& field, int m);

//! Smooth monotone cutoff: 0 on [0,1], 1 on [2,inf), cubic smoothstep between
double exterior_cutoff(double rho);

//! (1/2) int psi(r/R) (u_r^2 + m^2 sin^2 u / r^2) r dr
double exterior_energy(RadialField const& field, int m, double radius);

}  // namespace hmhf
