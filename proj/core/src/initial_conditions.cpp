#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include <fmt/format.h>

#include "hmhf/energy_diagnostics.hpp"
#include "hmhf/errors.hpp"
#include "hmhf/experiment_runner.hpp"
#include "hmhf/harmonic_map.hpp"

namespace hmhf {

namespace {

RadialField family_field(InitialConditionSpec const& spec, int m, GridPtr const& grid,
                         double A)
{
    const BubbleProfile bump{m, spec.sigma};
    const BubbleProfile bubble{m, spec.s0};
    switch (spec.family)
    {
        case IcFamily::E0Bump:
            return RadialField::from_offsets(
                grid, [&](double r) { return A * eval_h(bump, r); }, InnerLimit::Zero);
        case IcFamily::E1Excited:
            return RadialField::from_offsets(
                grid,
                [&](double r) { return eval_Q_offset(bubble, r) + A * eval_h(bump, r); },
                InnerLimit::Pi);
        case IcFamily::QExact:
            return sample_Q(grid, bubble);
        case IcFamily::CustomSamples:
            break;
    }
    throw ContractViolation("family_field: custom samples have no amplitude");
}

RadialField read_samples(std::string const& file, GridPtr const& grid)
{
    std::ifstream in(file);
    if (!in)
    {
        throw ConfigError(fmt::format("ic_file: cannot open '{}'", file));
    }
    std::vector<double> rs, us;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line))
    {
        ++line_no;
        if (auto hash = line.find('#'); hash != std::string::npos)
        {
            line.resize(hash);
        }
        std::replace(line.begin(), line.end(), ',', ' ');
        std::istringstream ls(line);
        double r = 0.0, u = 0.0;
        if (!(ls >> r))
        {
            continue;  // blank line
        }
        if (!(ls >> u) || !std::isfinite(r) || !std::isfinite(u) || r <= 0.0)
        {
            throw ConfigError(fmt::format("ic_file: line {}: expected 'r angle' with r > 0",
                                          line_no));
        }
        if (!rs.empty() && r <= rs.back())
        {
            throw ConfigError(fmt::format("ic_file: line {}: radii must increase", line_no));
        }
        rs.push_back(r);
        us.push_back(u);
    }
    if (rs.size() < 2)
    {
        throw ConfigError("ic_file: need at least two samples");
    }
    const double slack = 1e-9;
    if (rs.front() > grid->r_min() * (1.0 + slack) || rs.back() < grid->r_max() * (1.0 - slack))
    {
        throw ConfigError("ic_file: samples must cover [r_min, r_max]");
    }
    // Inner limit from the sample nearest the origin
    const InnerLimit inner = std::abs(us.front() - std::numbers::pi) < std::abs(us.front())
                                 ? InnerLimit::Pi
                                 : InnerLimit::Zero;
    std::vector<double> angles(grid->size());
    std::size_t k = 0;
    for (std::size_t i = 0; i < angles.size(); ++i)
    {
        const double r = std::clamp((*grid)[i], rs.front(), rs.back());
        while (k + 2 < rs.size() && rs[k + 1] < r)
        {
            ++k;
        }
        // Linear in log r
        const double t = (std::log(r) - std::log(rs[k])) / (std::log(rs[k + 1]) - std::log(rs[k]));
        angles[i] = us[k] + std::clamp(t, 0.0, 1.0) * (us[k + 1] - us[k]);
    }
    return RadialField::from_angles(grid, angles, inner);
}

void check_sector(RadialField const& u, InitialConditionSpec const& spec, int m)
{
    const auto cls = classify(u, m);
    const double eq = harmonic_map_energy(m);
    const bool expect_e1 = spec.family != IcFamily::E0Bump
                           && !(spec.family == IcFamily::CustomSamples
                                && u.inner_limit() == InnerLimit::Zero);
    if (expect_e1)
    {
        if (cls.label != Sector::E1 || cls.energy > 3.0 * eq)
        {
            throw ConfigError(fmt::format(
                "initial condition: expected E1-type data with E in [E(Q), 3E(Q)], "
                "got sector {} with E = {:.6g} E(Q)",
                to_string(cls.label), cls.energy / eq));
        }
    }
    else if (cls.label != Sector::E0)
    {
        throw ConfigError(fmt::format(
            "initial condition: expected E0-type data with E < 2E(Q), got sector {} "
            "with E = {:.6g} E(Q)",
            to_string(cls.label), cls.energy / eq));
    }
}

}  // namespace

RadialField build_initial_condition(InitialConditionSpec const& spec, int m,
                                    GridPtr const& grid, double& amplitude)
{
    amplitude = spec.A;
    if (spec.family == IcFamily::CustomSamples)
    {
        auto u = read_samples(spec.file, grid);
        check_sector(u, spec, m);
        return u;
    }
    if (spec.energy && (spec.family == IcFamily::E0Bump || spec.family == IcFamily::E1Excited))
    {
        const double target = *spec.energy * harmonic_map_energy(m);
        const double sign = spec.A < 0.0 ? -1.0 : 1.0;
        auto excess = [&](double a) {
            return energy(family_field(spec, m, grid, sign * a), m).total - target;
        };
        double lo = 0.0;
        double f_lo = excess(lo);
        double hi = lo;
        bool bracketed = false;
        constexpr double stride = 0.05;
        for (int k = 1; k <= 2000; ++k)
        {
            hi = stride * k;
            const double f_hi = excess(hi);
            if ((f_hi > 0.0) != (f_lo > 0.0))
            {
                bracketed = true;
                break;
            }
            lo = hi, f_lo = f_hi;
        }
        if (!bracketed)
        {
            throw ConfigError(fmt::format(
                "ic_energy: no amplitude with sign {} reaches {} E(Q)", sign, *spec.energy));
        }
        for (int it = 0; it < 200 && hi - lo > 1e-14 * std::max(1.0, hi); ++it)
        {
            const double mid = 0.5 * (lo + hi);
            const double f_mid = excess(mid);
            if ((f_mid > 0.0) == (f_lo > 0.0))
            {
                lo = mid, f_lo = f_mid;
            }
            else
            {
                hi = mid;
            }
        }
        amplitude = sign * 0.5 * (lo + hi);
    }
    auto u = family_field(spec, m, grid, amplitude);
    check_sector(u, spec, m);
    return u;
}

RadialField build_initial_condition(InitialConditionSpec const& spec, int m,
                                    GridPtr const& grid)
{
    double amplitude = 0.0;
    return build_initial_condition(spec, m, grid, amplitude);
}

}  // namespace hmhf
