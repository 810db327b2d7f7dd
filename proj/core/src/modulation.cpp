#include "hmhf/modulation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include "hmhf/energy_diagnostics.hpp"
#include "hmhf/errors.hpp"

namespace hmhf {

namespace {

//---------------------------------------------------------------------------//
// g(s) and its log-derivative for fixed data d = u - w (offsets from pi)
//---------------------------------------------------------------------------//
class ScaleEquation
{
  public:
    ScaleEquation(RadialGrid const& grid, int m, std::vector<double> data,
                  std::vector<double> chi)
        : grid_{grid}, m_{m}, data_{std::move(data)}, chi_{std::move(chi)}
        , log_r_(grid.size())
    {
        for (std::size_t i = 0; i < grid.size(); ++i)
        {
            log_r_[i] = std::log(grid[i]);
        }
    }

    struct Value
    {
        double g = 0.0;
        double dg_dlogs = 0.0;
        double xi_norm = 0.0;
        double h_norm = 0.0;
    };

    Value evaluate(double log_s) const
    {
        const auto w = grid_.weights();
        const double m = m_;
        Value out;
        double hh = 0.0;
        double xi2 = 0.0;
        double xhh = 0.0;
        for (std::size_t i = 0; i < data_.size(); ++i)
        {
            const double t = m * (log_r_[i] - log_s);
            const double e = std::exp(-std::abs(t));
            const double h = 2.0 * e / (1.0 + e * e);
            const double hhat = std::copysign((1.0 - e * e) / (1.0 + e * e), t);
            // Q - pi = -2 atan(e^t)
            const double q_off = t > 0.0 ? -std::numbers::pi + 2.0 * std::atan(e)
                                         : -2.0 * std::atan(e);
            const double xi = data_[i] - q_off;
            const double ch = chi_.empty() ? h : chi_[i] * h;
            out.g += w[i] * xi * ch;
            hh += w[i] * h * ch;
            xhh += w[i] * xi * ch * hhat;
            xi2 += w[i] * xi * xi;
            out.h_norm += w[i] * ch * ch;
        }
        out.dg_dlogs = -m * hh + m * xhh;
        out.xi_norm = std::sqrt(xi2);
        out.h_norm = std::sqrt(out.h_norm);
        return out;
    }

  private:
    RadialGrid const& grid_;
    int m_;
    std::vector<double> data_;
    std::vector<double> chi_;
    std::vector<double> log_r_;
};

double tolerance_of(ScaleEquation::Value const& v, double rel_tol)
{
    // Rounding floor: g is a sum of products of O(1) offsets with h
    return std::max(rel_tol * v.xi_norm * v.h_norm, 1e-13 * v.h_norm * v.h_norm);
}

}  // namespace

ModulationState fit_scale(RadialField const& u, int m,
                          std::optional<RadialField> const& w, double s_init,
                          FitOptions const& options)
{
    validate(BubbleProfile{m, 1.0});
    auto const& grid = u.grid();
    if (!(s_init >= 10.0 * grid.r_min() && s_init <= grid.r_max() / 10.0))
    {
        throw PreconditionError("fit_scale: s_init outside [10 r_min, r_max/10]");
    }
    if (!u.is_finite())
    {
        throw PreconditionError("fit_scale: non-finite field");
    }

    // data = (u - w) - pi, as offsets
    std::vector<double> data(u.size());
    const double shift = inner_value(u.inner_limit()) - std::numbers::pi;
    for (std::size_t i = 0; i < data.size(); ++i)
    {
        data[i] = u.offset(i) + shift;
    }
    if (w)
    {
        require_same_grid(u, *w);
        const double wshift = inner_value(w->inner_limit());
        for (std::size_t i = 0; i < data.size(); ++i)
        {
            data[i] -= w->offset(i) + wshift;
        }
    }
    std::vector<double> chi;
    if (options.localization)
    {
        const double cut = *options.localization * s_init;
        chi.resize(u.size());
        for (std::size_t i = 0; i < chi.size(); ++i)
        {
            chi[i] = 1.0 - exterior_cutoff(grid[i] / cut);
        }
    }
    const ScaleEquation eq(grid, m, data, chi);

    const double y0 = std::log(s_init);
    const double span = std::log(options.bracket_factor);
    const double y_lo = std::max(y0 - span, std::log(grid.r_min()));
    const double y_hi = std::min(y0 + span, std::log(grid.r_max()));

    int iterations = 0;
    auto v0 = eq.evaluate(y0);
    double y_root = y0;
    ScaleEquation::Value v_root = v0;

    if (std::abs(v0.g) > tolerance_of(v0, options.rel_tol))
    {
        // Scan outward on both sides with growing steps; the first sign change
        // found closest to y0 wins.
        double a = y0, b = y0;
        ScaleEquation::Value va = v0, vb = v0;
        bool found = false;
        double left = y0, right = y0;
        ScaleEquation::Value vl = v0, vr = v0;
        double stride = 0.01;
        while (!found && (left > y_lo || right < y_hi))
        {
            const double next_right = std::min(right + stride, y_hi);
            const double next_left = std::max(left - stride, y_lo);
            if (right < y_hi)
            {
                auto vn = eq.evaluate(next_right);
                ++iterations;
                if ((vn.g > 0.0) != (vr.g > 0.0) || vn.g == 0.0)
                {
                    a = right, va = vr, b = next_right, vb = vn;
                    found = true;
                }
                right = next_right, vr = vn;
            }
            if (!found && left > y_lo)
            {
                auto vn = eq.evaluate(next_left);
                ++iterations;
                if ((vn.g > 0.0) != (vl.g > 0.0) || vn.g == 0.0)
                {
                    a = next_left, va = vn, b = left, vb = vl;
                    found = true;
                }
                left = next_left, vl = vn;
            }
            stride *= 1.25;
        }
        if (!found)
        {
            throw NoBubbleError("fit_scale: no sign change of (xi, h^s) within a factor "
                                + std::to_string(options.bracket_factor)
                                + " of s_init");
        }

        // Safeguarded Newton on [a, b]
        double y = std::abs(va.g) < std::abs(vb.g) ? a : b;
        auto vy = std::abs(va.g) < std::abs(vb.g) ? va : vb;
        for (int k = 0; k < options.max_iterations; ++k)
        {
            if (std::abs(vy.g) <= tolerance_of(vy, options.rel_tol) || b - a < 1e-15)
            {
                break;
            }
            double y_new = y - vy.g / vy.dg_dlogs;
            if (!std::isfinite(y_new) || y_new <= a || y_new >= b)
            {
                y_new = 0.5 * (a + b);
            }
            auto vn = eq.evaluate(y_new);
            ++iterations;
            if ((vn.g > 0.0) == (va.g > 0.0))
            {
                a = y_new, va = vn;
            }
            else
            {
                b = y_new, vb = vn;
            }
            y = y_new, vy = vn;
        }
        y_root = y;
        v_root = vy;
    }

    const double s = std::exp(y_root);
    const BubbleProfile profile{m, s};
    RadialField xi = RadialField::zeros(u.grid_ptr());
    for (std::size_t i = 0; i < xi.size(); ++i)
    {
        xi.offsets()[i] = data[i] - eval_Q_offset(profile, grid[i]);
    }
    const double tol = tolerance_of(v_root, options.rel_tol);
    ModulationState state{s, xi, w, std::abs(v_root.g), tol, x2_norm(xi, m),
                          iterations, std::abs(v_root.g) <= 10.0 * tol};
    return state;
}

//---------------------------------------------------------------------------//
// Linearized operators
//---------------------------------------------------------------------------//

RadialField apply_L(RadialField const& field, BubbleProfile const& profile)
{
    validate(profile);
    auto const& grid = field.grid();
    DerivativeMatrix d(grid);
    std::vector<double> out(field.size());
    d.apply(field.offsets(), out);
    for (std::size_t i = 0; i < out.size(); ++i)
    {
        out[i] += profile.m / grid[i] * eval_hhat(profile, grid[i]) * field.offset(i);
    }
    return RadialField(field.grid_ptr(), std::move(out));
}

RadialField apply_Lstar(RadialField const& field, BubbleProfile const& profile)
{
    validate(profile);
    auto const& grid = field.grid();
    const auto w = grid.weights();
    DerivativeMatrix d(grid);
    std::vector<double> weighted(field.size());
    for (std::size_t i = 0; i < weighted.size(); ++i)
    {
        weighted[i] = w[i] * field.offset(i);
    }
    std::vector<double> out(field.size());
    d.apply_transpose(weighted, out);
    for (std::size_t i = 0; i < out.size(); ++i)
    {
        out[i] = out[i] / w[i]
                 + profile.m / grid[i] * eval_hhat(profile, grid[i]) * field.offset(i);
    }
    return RadialField(field.grid_ptr(), std::move(out));
}

RadialField apply_H(RadialField const& field, BubbleProfile const& profile)
{
    return apply_Lstar(apply_L(field, profile), profile);
}

double annihilation_residual(BubbleProfile const& profile, GridPtr const& grid,
                             DerivativeMode mode, double r1, double r2)
{
    validate(profile);
    std::vector<double> lh(grid->size());
    if (mode == DerivativeMode::Analytic)
    {
        for (std::size_t i = 0; i < lh.size(); ++i)
        {
            const double r = (*grid)[i];
            lh[i] = eval_h_r(profile, r)
                    + profile.m / r * eval_hhat(profile, r) * eval_h(profile, r);
        }
    }
    else
    {
        auto l = apply_L(sample_h(grid, profile), profile);
        std::copy(l.offsets().begin(), l.offsets().end(), lh.begin());
    }
    double worst = 0.0;
    for (std::size_t i = 0; i < lh.size(); ++i)
    {
        const double r = (*grid)[i];
        if (r >= r1 && r <= r2)
        {
            worst = std::max(worst, std::abs(lh[i]));
        }
    }
    return worst;
}

std::vector<double> reverse_factorization_potential(BubbleProfile const& profile,
                                                    RadialGrid const& grid)
{
    validate(profile);
    const double m = profile.m;
    std::vector<double> out(grid.size());
    for (std::size_t i = 0; i < out.size(); ++i)
    {
        out[i] = 1.0 + m * m - 2.0 * m * eval_hhat(profile, grid[i]);
    }
    return out;
}

ApproxResidual approx_solution_residual(BubbleProfile const& profile,
                                        RadialField const& w)
{
    validate(profile);
    if (w.inner_limit() != InnerLimit::Zero)
    {
        throw PreconditionError("approx_solution_residual: w must be E0-type");
    }
    auto const& grid = w.grid();
    const double m2 = static_cast<double>(profile.m) * profile.m;
    std::vector<double> f(w.size());
    for (std::size_t i = 0; i < f.size(); ++i)
    {
        const double r = grid[i];
        const double h = eval_h(profile, r);
        const double hhat = eval_hhat(profile, r);
        const double sw = std::sin(w.offset(i));
        f[i] = m2 / (r * r)
               * (2.0 * h * hhat * sw * sw + h * h * std::sin(2.0 * w.offset(i)));
    }
    RadialField residual(w.grid_ptr(), std::move(f));
    auto fr = differentiate(residual);
    const auto wt = grid.weights();
    double d1 = 0.0, r1 = 0.0;
    for (std::size_t i = 0; i < residual.size(); ++i)
    {
        d1 += wt[i] * std::abs(fr.offset(i));
        r1 += wt[i] * std::abs(residual.offset(i)) / grid[i];
    }
    return ApproxResidual{std::move(residual), d1 + profile.m * r1};
}

//---------------------------------------------------------------------------//
// Tracking
//---------------------------------------------------------------------------//

std::vector<double> time_derivative(std::vector<double> const& t,
                                    std::vector<double> const& y)
{
    const std::size_t n = t.size();
    std::vector<double> out(n, 0.0);
    if (n < 2)
    {
        return out;
    }
    if (n == 2)
    {
        out[0] = out[1] = (y[1] - y[0]) / (t[1] - t[0]);
        return out;
    }
    {
        const double h0 = t[1] - t[0];
        const double h1 = t[2] - t[1];
        out.front() = -(2.0 * h0 + h1) / (h0 * (h0 + h1)) * y[0]
                      + (h0 + h1) / (h0 * h1) * y[1]
                      - h0 / (h1 * (h0 + h1)) * y[2];
    }
    {
        const double h0 = t[n - 2] - t[n - 3];
        const double h1 = t[n - 1] - t[n - 2];
        out.back() = h1 / (h0 * (h0 + h1)) * y[n - 3]
                     - (h0 + h1) / (h0 * h1) * y[n - 2]
                     + (2.0 * h1 + h0) / (h1 * (h0 + h1)) * y[n - 1];
    }
    for (std::size_t i = 1; i + 1 < n; ++i)
    {
        // Three-point Lagrange derivative at t_i
        const double h0 = t[i] - t[i - 1];
        const double h1 = t[i + 1] - t[i];
        out[i] = -h1 / (h0 * (h0 + h1)) * y[i - 1]
                 + (h1 - h0) / (h0 * h1) * y[i]
                 + h0 / (h1 * (h0 + h1)) * y[i + 1];
    }
    return out;
}

ScaleTrack track_modulation(TrajectoryRecord const& record,
                            std::vector<RadialField> const* w_traj,
                            FitOptions const& options)
{
    if (record.snapshots.size() != record.samples.size())
    {
        throw PreconditionError("track_modulation: record has no field snapshots");
    }
    if (w_traj && w_traj->size() != record.snapshots.size())
    {
        throw PreconditionError("track_modulation: background trajectory length mismatch");
    }
    ScaleTrack track;
    std::optional<double> prev;
    for (std::size_t k = 0; k < record.snapshots.size(); ++k)
    {
        auto const& u = record.snapshots[k];
        auto const& grid = u.grid();
        double s_init = prev ? *prev : concentration_scale(u, record.m);
        s_init = std::clamp(s_init, 10.0 * grid.r_min(), grid.r_max() / 10.0);
        std::optional<RadialField> w;
        if (w_traj)
        {
            w = (*w_traj)[k];
        }
        try
        {
            auto state = fit_scale(u, record.m, w, s_init, options);
            track.times.push_back(record.samples[k].t);
            track.s.push_back(state.s);
            track.orth_residual.push_back(state.orth_residual);
            track.flagged.push_back(!state.within_tolerance);
            prev = state.s;
        }
        catch (NoBubbleError const& e)
        {
            track.truncated = true;
            track.cause = "sample " + std::to_string(k) + ": " + e.what();
            break;
        }
        catch (PreconditionError const& e)
        {
            track.truncated = true;
            track.cause = "sample " + std::to_string(k) + ": " + e.what();
            break;
        }
    }
    track.sdot = time_derivative(track.times, track.s);
    return track;
}

//---------------------------------------------------------------------------//
// Blow-up rate
//---------------------------------------------------------------------------//

namespace {

struct RateModel
{
    std::vector<double> const& t;
    std::vector<double> const& log_s;

    // Best c for fixed (L, T) and the rms residual
    RateCandidate evaluate(int L, double T) const
    {
        const double k = 2.0 * L / (2.0 * L - 1.0);
        const std::size_t n = t.size();
        std::vector<double> r(n);
        double mean = 0.0;
        for (std::size_t i = 0; i < n; ++i)
        {
            const double lt = std::log(T - t[i]);
            r[i] = log_s[i] - (L * lt - k * std::log(std::abs(lt)));
            mean += r[i];
        }
        mean /= static_cast<double>(n);
        double ss = 0.0;
        for (double x : r)
        {
            ss += (x - mean) * (x - mean);
        }
        return RateCandidate{L, T, std::exp(mean), std::sqrt(ss / static_cast<double>(n))};
    }
};

}  // namespace

BlowupRateFit fit_blowup_rate(ScaleTrack const& track)
{
    const std::size_t n = track.times.size();
    if (n < kRateFitMinSamples || track.s.size() != n)
    {
        throw FitUnreliableError("fit_blowup_rate: need at least "
                                 + std::to_string(kRateFitMinSamples) + " samples");
    }
    const double s_max = *std::max_element(track.s.begin(), track.s.end());
    const double s_min = *std::min_element(track.s.begin(), track.s.end());
    if (!(s_min > 0.0) || std::log10(s_max / s_min) < kRateFitMinDecades)
    {
        throw FitUnreliableError("fit_blowup_rate: s spans fewer than 1.5 decades");
    }
    if (!(track.s.back() < track.s.front()))
    {
        throw FitUnreliableError("fit_blowup_rate: s is not decreasing");
    }
    const double t_first = track.times.front();
    const double t_last = track.times.back();
    const double room = t_first + 1.0 - t_last;
    if (!(room > 0.0))
    {
        throw FitUnreliableError("fit_blowup_rate: track spans a time unit or more");
    }

    std::vector<double> log_s(n);
    std::transform(track.s.begin(), track.s.end(), log_s.begin(),
                   [](double x) { return std::log(x); });
    RateModel model{track.times, log_s};

    // Offsets T - t_last from a small multiple of the last step up to the room
    const double dt_last = t_last - track.times[n - 2];
    const double lo = std::log(std::max(1e-6 * dt_last, 1e-300));
    const double hi = std::log(room * (1.0 - 1e-9));

    BlowupRateFit fit;
    fit.rms = std::numeric_limits<double>::infinity();
    for (int L = 1; L <= 3; ++L)
    {
        auto at = [&](double log_delta) {
            return model.evaluate(L, t_last + std::exp(log_delta));
        };
        constexpr int scan = 200;
        double best_x = lo;
        double best_rms = std::numeric_limits<double>::infinity();
        for (int j = 0; j <= scan; ++j)
        {
            const double x = lo + (hi - lo) * j / scan;
            const double rms = at(x).rms;
            if (rms < best_rms)
            {
                best_rms = rms, best_x = x;
            }
        }
        // Golden-section refinement around the scan minimum
        const double h = (hi - lo) / scan;
        double a = std::max(lo, best_x - h), b = std::min(hi, best_x + h);
        const double g = 0.5 * (std::sqrt(5.0) - 1.0);
        double c = b - g * (b - a), d = a + g * (b - a);
        double fc = at(c).rms, fd = at(d).rms;
        for (int it = 0; it < 100 && b - a > 1e-12; ++it)
        {
            if (fc < fd)
            {
                b = d, d = c, fd = fc;
                c = b - g * (b - a);
                fc = at(c).rms;
            }
            else
            {
                a = c, c = d, fc = fd;
                d = a + g * (b - a);
                fd = at(d).rms;
            }
        }
        auto cand = at(0.5 * (a + b));
        if (best_rms < cand.rms)
        {
            cand = at(best_x);
        }
        fit.candidates.push_back(cand);
        if (cand.rms < fit.rms)
        {
            fit.rms = cand.rms;
            fit.T_est = cand.T;
            fit.L_fit = cand.L;
            fit.c_fit = cand.c;
        }
    }
    return fit;
}

//---------------------------------------------------------------------------//
// Decomposition
//---------------------------------------------------------------------------//

BubbleDecomposition bubble_decompose(RadialField const& u, int m,
                                     std::optional<RadialField> const& reference_w,
                                     std::optional<double> s_init,
                                     FitOptions const& options)
{
    if (u.inner_limit() != InnerLimit::Pi)
    {
        throw PreconditionError("bubble_decompose: u must be E1-type");
    }
    auto const& grid = u.grid();
    double s0 = s_init ? *s_init : concentration_scale(u, m);
    s0 = std::clamp(s0, 10.0 * grid.r_min(), grid.r_max() / 10.0);
    auto fit = fit_scale(u, m, reference_w, s0, options);
    const BubbleProfile profile{m, fit.s};
    const double split = std::sqrt(fit.s);

    auto q = sample_Q(u.grid_ptr(), profile);
    RadialField rem = u - q;  // inner Zero
    RadialField w0 = RadialField::zeros(u.grid_ptr());
    RadialField xi = RadialField::zeros(u.grid_ptr());
    for (std::size_t i = 0; i < u.size(); ++i)
    {
        const double psi = exterior_cutoff(grid[i] / split);
        w0.offsets()[i] = psi * rem.offset(i);
        xi.offsets()[i] = rem.offset(i) - w0.offset(i);
    }
    BubbleDecomposition out{profile, w0, xi, fit, split};
    out.energy_u = energy(u, m).total;
    out.energy_Q = energy(q, m).total;
    out.energy_w0 = energy(w0, m).total;
    out.energy_xi = energy(xi, m).total;
    out.decoupling_error
        = std::abs(out.energy_u - out.energy_Q - out.energy_w0 - out.energy_xi);
    return out;
}

}  // namespace hmhf
