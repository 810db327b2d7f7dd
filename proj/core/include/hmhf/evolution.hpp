#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "hmhf/energy_diagnostics.hpp"
#include "hmhf/radial_grid.hpp"

namespace hmhf {

enum class Scheme
{
    IMEX1,  //!< implicit Euler on Delta_m, explicit F
    IMEX2   //!< Strang: half F (midpoint), L-stable SDIRK2 on Delta_m, half F
};

std::string_view to_string(Scheme scheme);
Scheme parse_scheme(std::string_view text);

struct StepperConfig
{
    double dt = 1e-3;
    Scheme scheme = Scheme::IMEX1;
    double dt_floor = 1e-12;
    //! dt <= cfl_like_safety * s^2 where s is the concentration scale
    double cfl_like_safety = 0.05;
    //! Concentration flagged when the scale drops below this multiple of r_min
    double concentration_factor = 10.0;
    //! Accepted steps with the flag set before a run is declared Blowup
    int persistence_steps = 20;
    //! Drop F entirely (linear heat flow for Delta_m); used by verification
    bool linear_only = false;
};

//! Throws ConfigError unless dt > dt_floor > 0 and the factors are positive
void validate(StepperConfig const& config);

struct DissipationLedger
{
    double initial_energy = 0.0;
    double current_energy = 0.0;
    //! Sum over steps of dt * ||(u^{n+1} - u^n)/dt||^2_{L^2(r dr)}
    double dissipated = 0.0;
    //! |E0 - E_t - dissipated|
    double residual = 0.0;
};

struct BlowupMonitor
{
    //! (int_0^t ||u/r||^4_{L^4(r dr)} dt)^{1/4} for the offset field
    double l4_accum = 0.0;
    double min_scale_estimate = 0.0;
    bool concentration_flag = false;
};

enum class RunStatus
{
    Global,
    Blowup,
    Aborted
};

std::string_view to_string(RunStatus status);

struct TrajectorySample
{
    double t = 0.0;
    double dt = 0.0;  //!< last accepted step size
    EnergyBreakdown energy;
    double x2_norm = 0.0;
    double sup_abs_u = 0.0;
    DissipationLedger ledger;
    BlowupMonitor monitor;
    std::vector<double> exterior;  //!< one entry per SamplingPolicy radius
};

struct SamplingPolicy
{
    //! Longest gap between samples (measured from the previous sample)
    double interval = 0.1;
    //! Also sample whenever log10 of the concentration scale moves this much
    double scale_log_step = 0.05;
    std::vector<double> exterior_radii{1.0, 10.0};
    bool keep_snapshots = true;
};

struct TrajectoryRecord
{
    int m = 1;
    std::vector<TrajectorySample> samples;
    std::vector<RadialField> snapshots;  //!< parallel to samples when kept
    std::vector<double> exterior_radii;
    RunStatus status = RunStatus::Global;
    std::string message;
    std::size_t steps = 0;
    std::size_t rejected_steps = 0;
};

//! F(u) = (m^2/r^2)(u - sin(2u)/2) on the offsets; series for |u| < 1e-4
RadialField nonlinearity(RadialField const& field, int m);

/*!
 * Discrete Lyapunov energy of the scheme: (1/2) sum over edges of
 * (du)^2/dx plus the trapezoid potential plus kappa u0^2 / 2 for the core
 * r < r_min, kappa = sinh(m dx)/dx. Delta_m u + F(u) is exactly minus
 * its gradient in the weighted inner product, so IMEX1 is a convex-concave
 * splitting and decreases it for every dt.
 */
double lyapunov_energy(RadialField const& field, int m);

/*!
 * One step of size config.dt. The outer value is held fixed; the node at
 * r_min moves with the core closure (u ~ r^m inside r_min), which reduces to
 * the Dirichlet value whenever the data already has that form.
 */
RadialField step(RadialField const& field, int m, StepperConfig const& config);

/*!
 * Concentration scale: radius where the angle crosses pi/2 (E1 labels), or
 * the radius enclosing half the energy (E0 labels). r_max if undefined.
 */
double concentration_scale(RadialField const& field, int m);

/*!
 * Integrate to t_end with energy-guarded adaptive steps.
 *
 * A step that raises the Lyapunov energy is halved and retried down to
 * dt_floor; the step is also capped at cfl_like_safety * s^2 with s the
 * concentration scale. Status is Blowup when the scale stays below
 * concentration_factor * r_min for persistence_steps accepted steps, and
 * Aborted (with the last good samples kept) if the state goes non-finite.
 */
TrajectoryRecord evolve(RadialField const& initial, int m, double t_end,
                        StepperConfig const& config,
                        SamplingPolicy const& sampling = {});

//! Per-sample |E(u0) - E(u(t)) - dissipated(t)|
std::vector<double> dissipation_audit(TrajectoryRecord const& record);

}  // namespace hmhf
