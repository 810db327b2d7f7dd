#pragma once

#include <optional>
#include <string>
#include <vector>

#include "hmhf/evolution.hpp"
#include "hmhf/harmonic_map.hpp"
#include "hmhf/radial_grid.hpp"

namespace hmhf {

struct ModulationState
{
    double s = 1.0;
    RadialField xi;                 //!< u - w - Q^s (inner limit Zero)
    std::optional<RadialField> w;   //!< background used in the fit
    double orth_residual = 0.0;     //!< |(xi, chi h^s)| in L^2(r dr)
    double tolerance = 0.0;         //!< bound the residual was driven below
    double xi_x2 = 0.0;             //!< ||xi||_{X^2}
    int iterations = 0;
    bool within_tolerance = true;
};

struct FitOptions
{
    double rel_tol = 1e-9;
    int max_iterations = 200;
    //! Search out to s_init / factor and s_init * factor
    double bracket_factor = 1e3;
    /*!
     * If set, the inner product uses chi h^s with chi = 1 - psi(r / (K s_init)),
     * psi the exterior cutoff. For m = 1 the tail of h^s is not square
     * integrable and a far-field perturbation otherwise dominates g(s).
     */
    std::optional<double> localization;
};

/*!
 * Scale s with (u - w - Q^s, chi h^s) = 0.
 *
 * Brackets the root nearest s_init in log s by outward scanning, then runs
 * Newton in log s safeguarded by bisection. Throws NoBubbleError when no sign
 * change exists in the search range and PreconditionError when s_init is
 * outside [10 r_min, r_max / 10].
 */
ModulationState fit_scale(RadialField const& u, int m,
                          std::optional<RadialField> const& w, double s_init,
                          FitOptions const& options = {});

//! L xi = D xi + (m/r) hhat^s xi with D the nodal derivative matrix
RadialField apply_L(RadialField const& field, BubbleProfile const& profile);

//! L* eta = W^{-1} D^T W eta + (m/r) hhat^s eta: the exact adjoint of apply_L
RadialField apply_Lstar(RadialField const& field, BubbleProfile const& profile);

//! H = L* L
RadialField apply_H(RadialField const& field, BubbleProfile const& profile);

//! max |L h^s| over nodes in [r1, r2]; Analytic uses h_r from its closed form
double annihilation_residual(BubbleProfile const& profile, GridPtr const& grid,
                             DerivativeMode mode, double r1, double r2);

//! 1 + m^2 - 2 m hhat^s at each node (the potential of L L* times r^2)
std::vector<double> reverse_factorization_potential(BubbleProfile const& profile,
                                                    RadialGrid const& grid);

struct ApproxResidual
{
    RadialField residual;
    //! ||d_r f||_{L^1(r dr)} + m ||f / r||_{L^1(r dr)}
    double x1_norm = 0.0;
};

/*!
 * Defect of Q^s + w as a solution:
 * (m^2/r^2) (2 h hhat sin^2 w + h^2 sin 2w), with h, hhat at scale s.
 */
ApproxResidual approx_solution_residual(BubbleProfile const& profile,
                                        RadialField const& w);

struct ScaleTrack
{
    std::vector<double> times;
    std::vector<double> s;
    std::vector<double> sdot;
    std::vector<double> orth_residual;
    std::vector<bool> flagged;   //!< residual above tolerance
    bool truncated = false;
    std::string cause;
};

/*!
 * Fit s at every snapshot of the record, warm-starting from the previous
 * sample (the first uses the concentration scale). w_traj, when given, must
 * be parallel to the snapshots. On NoBubbleError the track stops there.
 */
ScaleTrack track_modulation(TrajectoryRecord const& record,
                            std::vector<RadialField> const* w_traj = nullptr,
                            FitOptions const& options = {});

//! Three-point differences on a nonuniform time axis (one-sided at the ends)
std::vector<double> time_derivative(std::vector<double> const& t,
                                    std::vector<double> const& y);

struct RateCandidate
{
    int L = 1;
    double T = 0.0;
    double c = 0.0;
    double rms = 0.0;
};

struct BlowupRateFit
{
    double T_est = 0.0;
    int L_fit = 1;
    double c_fit = 0.0;
    double rms = 0.0;
    std::vector<RateCandidate> candidates;  //!< best fit for each L
};

//! Minimum number of samples and decades of s for a rate fit
inline constexpr std::size_t kRateFitMinSamples = 30;
inline constexpr double kRateFitMinDecades = 1.5;

/*!
 * Fit log s = log c + L log tau - (2L/(2L-1)) log|log tau|, tau = T - t, for
 * L in {1, 2, 3}. T ranges over (t_last, t_first + 1) so that tau < 1 at
 * every sample. Throws FitUnreliableError on too few samples, too small a
 * range of s, non-decreasing data, or a track longer than one time unit.
 */
BlowupRateFit fit_blowup_rate(ScaleTrack const& track);

struct BubbleDecomposition
{
    BubbleProfile profile;
    RadialField w0;   //!< far-field part of u - Q^s
    RadialField xi;   //!< near-field remainder u - Q^s - w0
    ModulationState fit;
    double split_radius = 0.0;
    double energy_u = 0.0;
    double energy_Q = 0.0;
    double energy_w0 = 0.0;
    double energy_xi = 0.0;
    //! |E(u) - E(Q) - E(w0) - E(xi)|
    double decoupling_error = 0.0;
};

/*!
 * Split u = Q^s + w0 + xi. s comes from fit_scale with the reference
 * background (or none); w0 = (u - Q^s) psi(r / sqrt(s)) keeps the part of the
 * remainder outside the window between the bubble scale and the unit scale.
 */
BubbleDecomposition bubble_decompose(RadialField const& u, int m,
                                     std::optional<RadialField> const& reference_w = {},
                                     std::optional<double> s_init = {},
                                     FitOptions const& options = {});

}  // namespace hmhf
