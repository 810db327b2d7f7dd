#include "hmhf/evolution.hpp"

#include <algorithm>
#include <limits>
#include <cmath>
#include <numbers>
#include <string>

#include "hmhf/errors.hpp"
#include "hmhf/tridiagonal.hpp"

namespace hmhf {

std::string_view to_string(Scheme scheme)
{
    return scheme == Scheme::IMEX2 ? "imex2" : "imex1";
}

Scheme parse_scheme(std::string_view text)
{
    if (text == "imex1" || text == "IMEX1")
    {
        return Scheme::IMEX1;
    }
    if (text == "imex2" || text == "IMEX2")
    {
        return Scheme::IMEX2;
    }
    throw ConfigError("unknown scheme '" + std::string(text)
                      + "' (expected imex1 or imex2)");
}

std::string_view to_string(RunStatus status)
{
    switch (status)
    {
        case RunStatus::Global:
            return "Global";
        case RunStatus::Blowup:
            return "Blowup";
        case RunStatus::Aborted:
            break;
    }
    return "Aborted";
}

void validate(StepperConfig const& config)
{
    if (!(config.dt_floor > 0.0))
    {
        throw ConfigError("stepper: dt_floor must be positive");
    }
    if (!(config.dt > config.dt_floor))
    {
        throw ConfigError("stepper: dt must exceed dt_floor");
    }
    if (!(config.cfl_like_safety > 0.0))
    {
        throw ConfigError("stepper: cfl_like_safety must be positive");
    }
    if (!(config.concentration_factor > 0.0) || config.persistence_steps < 1)
    {
        throw ConfigError("stepper: concentration settings must be positive");
    }
}

namespace {

// (u - sin(2u)/2) with the cubic series where cancellation bites
double cubic_part(double u)
{
    if (std::abs(u) < 1e-4)
    {
        const double u2 = u * u;
        return u * u2 * (2.0 / 3.0 - 2.0 / 15.0 * u2);
    }
    return u - 0.5 * std::sin(2.0 * u);
}

//---------------------------------------------------------------------------//
// Internal integrator working directly on offset vectors.
//---------------------------------------------------------------------------//
class FlowIntegrator
{
  public:
    FlowIntegrator(RadialGrid const& grid, int m, bool linear_only)
        : grid_{grid}
        , m_{m}
        , m2_{static_cast<double>(m) * m}
        , mu_{fitted_centrifugal(grid.log_step(), m)}
        , kappa_{std::sinh(m * grid.log_step()) / grid.log_step()}
        , inv_dx2_{1.0 / (grid.log_step() * grid.log_step())}
        , linear_only_{linear_only}
        , inv_r2_(grid.size())
        , sub_(grid.size())
        , diag_(grid.size())
        , super_(grid.size())
        , work_(grid.size())
    {
        for (std::size_t i = 0; i < grid.size(); ++i)
        {
            inv_r2_[i] = 1.0 / (grid[i] * grid[i]);
        }
    }

    // Explicit part of the split: F(v) plus the (mu - m^2) v / r^2 correction
    // that makes implicit(mu) + explicit sum to Delta_r v - m^2 sin(2v)/(2r^2).
    double explicit_rate(std::size_t i, double v) const
    {
        if (linear_only_)
        {
            return 0.0;
        }
        return inv_r2_[i] * (m2_ * cubic_part(v) + (mu_ - m2_) * v);
    }

    // Solve (I - alpha A) x = rhs in place, A the fitted Delta_m. Row 0 is the
    // half cell at r_min closed by the r^m core (tail energy kappa v0^2 / 2);
    // kappa makes r^m an exact null vector. The outer node stays fixed.
    void helmholtz(double alpha, std::vector<double>& rhs)
    {
        const std::size_t n = rhs.size();
        const double c0 = alpha * inv_r2_[0];
        sub_[0] = 0.0;
        super_[0] = -2.0 * c0 * inv_dx2_;
        diag_[0] = 1.0 + c0 * (2.0 * inv_dx2_ + 2.0 * kappa_ / grid_.log_step() + mu_);
        sub_[n - 1] = super_[n - 1] = 0.0;
        diag_[n - 1] = 1.0;
        for (std::size_t i = 1; i + 1 < n; ++i)
        {
            const double c = alpha * inv_r2_[i];
            sub_[i] = -c * inv_dx2_;
            super_[i] = -c * inv_dx2_;
            diag_[i] = 1.0 + c * (2.0 * inv_dx2_ + mu_);
        }
        rhs = solve_tridiagonal(sub_, diag_, super_, rhs);
    }

    void explicit_update(std::vector<double> const& from, double h,
                         std::vector<double>& to) const
    {
        to = from;
        for (std::size_t i = 0; i + 1 < from.size(); ++i)
        {
            to[i] = from[i] + h * explicit_rate(i, from[i]);
        }
    }

    // Explicit midpoint for v' = G(v) over h
    void reaction_midpoint(std::vector<double>& v, double h)
    {
        if (linear_only_)
        {
            return;
        }
        explicit_update(v, 0.5 * h, work_);
        for (std::size_t i = 0; i + 1 < v.size(); ++i)
        {
            v[i] += h * explicit_rate(i, work_[i]);
        }
    }

    void step(std::vector<double>& v, double dt, Scheme scheme)
    {
        if (scheme == Scheme::IMEX1)
        {
            for (std::size_t i = 0; i + 1 < v.size(); ++i)
            {
                v[i] += dt * explicit_rate(i, v[i]);
            }
            helmholtz(dt, v);
            return;
        }

        // Strang splitting around a two-stage, stiffly accurate SDIRK
        constexpr double gamma = 1.0 - 0.70710678118654752440;
        reaction_midpoint(v, 0.5 * dt);
        const std::vector<double> u0 = v;
        std::vector<double> y1 = v;
        helmholtz(gamma * dt, y1);
        // A Y1 = (Y1 - u0) / (gamma dt)
        for (std::size_t i = 0; i < v.size(); ++i)
        {
            v[i] = u0[i] + (1.0 - gamma) / gamma * (y1[i] - u0[i]);
        }
        helmholtz(gamma * dt, v);
        reaction_midpoint(v, 0.5 * dt);
    }

    double lyapunov(std::vector<double> const& v) const
    {
        const double dx = grid_.log_step();
        double grad = 0.0;
        for (std::size_t k = 0; k + 1 < v.size(); ++k)
        {
            const double d = v[k + 1] - v[k];
            grad += d * d;
        }
        double pot = 0.0;
        for (std::size_t i = 0; i < v.size(); ++i)
        {
            const double s = std::sin(v[i]);
            pot += grid_.log_weight(i) * s * s;
        }
        return 0.5 * grad / dx + 0.5 * m2_ * pot + 0.5 * kappa_ * v[0] * v[0];
    }

    double l4_rate(std::vector<double> const& v) const
    {
        double sum = 0.0;
        const auto w = grid_.weights();
        for (std::size_t i = 0; i < v.size(); ++i)
        {
            const double q = v[i] * v[i] * inv_r2_[i];
            sum += w[i] * q * q;
        }
        return sum;
    }

    int m() const noexcept { return m_; }

  private:
    RadialGrid const& grid_;
    int m_;
    double m2_;
    double mu_;
    double kappa_;
    double inv_dx2_;
    bool linear_only_;
    std::vector<double> inv_r2_;
    std::vector<double> sub_;
    std::vector<double> diag_;
    std::vector<double> super_;
    std::vector<double> work_;
};

double crossing_radius(RadialGrid const& grid, std::span<const double> f, double level)
{
    // First node from the origin where f drops below level; interpolate in log r
    for (std::size_t i = 0; i < f.size(); ++i)
    {
        if (f[i] < level)
        {
            if (i == 0)
            {
                return grid.r_min();
            }
            const double t = (f[i - 1] - level) / (f[i - 1] - f[i]);
            return std::exp(std::log(grid[i - 1]) + t * grid.log_step());
        }
    }
    return grid.r_max();
}

double scale_of(RadialGrid const& grid, int m, InnerLimit inner,
                std::vector<double> const& v)
{
    if (inner == InnerLimit::Pi)
    {
        // angle = pi + v < pi/2  <=>  v < -pi/2
        return crossing_radius(grid, v, -0.5 * std::numbers::pi);
    }
    const double m2 = static_cast<double>(m) * m;
    const double dx = grid.log_step();
    std::vector<double> cumulative(v.size(), 0.0);
    for (std::size_t k = 0; k + 1 < v.size(); ++k)
    {
        const double d = v[k + 1] - v[k];
        const double s0 = std::sin(v[k]);
        const double s1 = std::sin(v[k + 1]);
        cumulative[k + 1] = cumulative[k] + 0.5 * d * d / dx
                            + 0.25 * dx * m2 * (s0 * s0 + s1 * s1);
    }
    const double total = cumulative.back();
    if (!(total > 1e-300))
    {
        return grid.r_max();
    }
    for (std::size_t i = 1; i < v.size(); ++i)
    {
        if (cumulative[i] >= 0.5 * total)
        {
            const double t = (0.5 * total - cumulative[i - 1])
                             / (cumulative[i] - cumulative[i - 1]);
            return std::exp(std::log(grid[i - 1]) + t * dx);
        }
    }
    return grid.r_max();
}

}  // namespace

RadialField nonlinearity(RadialField const& field, int m)
{
    auto const& grid = field.grid();
    const double m2 = static_cast<double>(m) * m;
    std::vector<double> out(field.size());
    for (std::size_t i = 0; i < out.size(); ++i)
    {
        out[i] = m2 / (grid[i] * grid[i]) * cubic_part(field.offset(i));
    }
    return RadialField(field.grid_ptr(), std::move(out), InnerLimit::Zero);
}

double lyapunov_energy(RadialField const& field, int m)
{
    FlowIntegrator flow(field.grid(), m, false);
    return flow.lyapunov({field.offsets().begin(), field.offsets().end()});
}

RadialField step(RadialField const& field, int m, StepperConfig const& config)
{
    validate(config);
    FlowIntegrator flow(field.grid(), m, config.linear_only);
    std::vector<double> v(field.offsets().begin(), field.offsets().end());
    flow.step(v, config.dt, config.scheme);
    RadialField out(field.grid_ptr(), std::move(v), field.inner_limit());
    if (!out.is_finite())
    {
        throw SolverError("step: non-finite state");
    }
    return out;
}

double concentration_scale(RadialField const& field, int m)
{
    return scale_of(field.grid(), m, field.inner_limit(),
                    {field.offsets().begin(), field.offsets().end()});
}

TrajectoryRecord evolve(RadialField const& initial, int m, double t_end,
                        StepperConfig const& config, SamplingPolicy const& sampling)
{
    validate(config);
    if (!(t_end > 0.0))
    {
        throw ConfigError("evolve: t_end must be positive");
    }
    if (!(sampling.interval > 0.0))
    {
        throw ConfigError("evolve: sampling interval must be positive");
    }
    if (!initial.is_finite())
    {
        throw ContractViolation("evolve: initial field has non-finite values");
    }

    auto const& grid = initial.grid();
    FlowIntegrator flow(grid, m, config.linear_only);
    const InnerLimit inner = initial.inner_limit();
    const double conc_radius = config.concentration_factor * grid.r_min();

    TrajectoryRecord record;
    record.m = m;
    record.exterior_radii = sampling.exterior_radii;

    std::vector<double> v(initial.offsets().begin(), initial.offsets().end());
    std::vector<double> trial(v.size());

    double t = 0.0;
    double last_dt = 0.0;
    double lyap = flow.lyapunov(v);
    const double lyap_tol = 1e-10 * std::max(lyap, 1.0);
    const double e0 = energy(initial, m).total;
    double dissipated = 0.0;
    double l4_integral = 0.0;
    double l4_rate = flow.l4_rate(v);
    double scale = scale_of(grid, m, inner, v);
    int flagged_steps = 0;
    double shrink = 1.0;

    auto take_sample = [&]() {
        RadialField u(initial.grid_ptr(), v, inner);
        TrajectorySample s;
        s.t = t;
        s.dt = last_dt;
        s.energy = energy(u, m);
        s.x2_norm = x2_norm(u, m);
        for (std::size_t i = 0; i < u.size(); ++i)
        {
            s.sup_abs_u = std::max(s.sup_abs_u, std::abs(u.angle(i)));
        }
        s.ledger.initial_energy = e0;
        s.ledger.current_energy = s.energy.total;
        s.ledger.dissipated = dissipated;
        s.ledger.residual = std::abs(e0 - s.energy.total - dissipated);
        s.monitor.l4_accum = std::pow(l4_integral, 0.25);
        s.monitor.min_scale_estimate = scale;
        s.monitor.concentration_flag = scale < conc_radius;
        for (double radius : sampling.exterior_radii)
        {
            s.exterior.push_back(radius > grid.r_min() && radius < grid.r_max()
                                     ? exterior_energy(u, m, radius)
                                     : std::numeric_limits<double>::quiet_NaN());
        }
        record.samples.push_back(std::move(s));
        if (sampling.keep_snapshots)
        {
            record.snapshots.push_back(std::move(u));
        }
    };

    take_sample();
    // Time trigger counts from the previous sample of any kind
    double next_sample_t = sampling.interval;
    double last_sample_scale = scale;

    while (t < t_end)
    {
        double dt = std::min(config.dt * shrink, config.cfl_like_safety * scale * scale);
        dt = std::max(dt, config.dt_floor);
        const double remaining = t_end - t;
        if (dt >= remaining)
        {
            dt = remaining;
        }
        else if (dt > 0.5 * remaining)
        {
            dt = 0.5 * remaining;  // avoid a sliver final step
        }

        trial = v;
        flow.step(trial, dt, config.scheme);

        const bool finite = std::all_of(trial.begin(), trial.end(),
                                        [](double x) { return std::isfinite(x); });
        if (!finite)
        {
            if (dt > config.dt_floor * 2.0)
            {
                shrink *= 0.5;
                ++record.rejected_steps;
                continue;
            }
            record.status = RunStatus::Aborted;
            record.message = "non-finite state at t = " + std::to_string(t);
            break;
        }

        const double trial_lyap = flow.lyapunov(trial);
        if (trial_lyap > lyap + lyap_tol && dt > config.dt_floor * 2.0)
        {
            shrink *= 0.5;
            ++record.rejected_steps;
            continue;
        }

        // Accept
        double inc = 0.0;
        const auto w = grid.weights();
        for (std::size_t i = 0; i < v.size(); ++i)
        {
            const double d = trial[i] - v[i];
            inc += w[i] * d * d;
        }
        dissipated += inc / dt;
        const double new_rate = flow.l4_rate(trial);
        l4_integral += 0.5 * dt * (l4_rate + new_rate);
        l4_rate = new_rate;

        v.swap(trial);
        lyap = trial_lyap;
        t += dt;
        last_dt = dt;
        ++record.steps;
        shrink = std::min(1.0, shrink * 2.0);
        scale = scale_of(grid, m, inner, v);

        flagged_steps = scale < conc_radius ? flagged_steps + 1 : 0;
        const bool blowup = flagged_steps >= config.persistence_steps;

        const bool time_due = t >= next_sample_t - 1e-12 * std::max(1.0, t);
        const bool scale_due = std::abs(std::log10(scale / last_sample_scale))
                               >= sampling.scale_log_step;
        if (time_due || scale_due || blowup || t >= t_end)
        {
            take_sample();
            last_sample_scale = scale;
            next_sample_t = t + sampling.interval;
        }
        if (blowup)
        {
            record.status = RunStatus::Blowup;
            record.message = "concentration below " + std::to_string(conc_radius)
                             + " persisted at t = " + std::to_string(t);
            break;
        }
    }
    return record;
}

std::vector<double> dissipation_audit(TrajectoryRecord const& record)
{
    std::vector<double> out;
    out.reserve(record.samples.size());
    if (record.samples.empty())
    {
        return out;
    }
    const double e0 = record.samples.front().energy.total;
    for (auto const& s : record.samples)
    {
        out.push_back(std::abs(e0 - s.energy.total - s.ledger.dissipated));
    }
    return out;
}

}  // namespace hmhf
