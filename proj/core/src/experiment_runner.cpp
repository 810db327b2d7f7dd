#include "hmhf/experiment_runner.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <mutex>
#include <numbers>
#include <thread>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "hmhf/energy_diagnostics.hpp"
#include "hmhf/errors.hpp"
#include "hmhf/harmonic_map.hpp"

namespace hmhf {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

CheckResult make_check(std::string name, bool passed, double value, double threshold,
                       std::string detail = {})
{
    return CheckResult{std::move(name), passed, value, threshold, std::move(detail)};
}

double max_of(std::vector<double> const& v)
{
    double out = 0.0;
    for (double x : v)
    {
        if (std::isfinite(x))
        {
            out = std::max(out, x);
        }
    }
    return out;
}

// Relative spread of s over the final half of the samples
double final_half_spread(std::vector<double> const& t, std::vector<double> const& s)
{
    if (s.empty())
    {
        return kNaN;
    }
    const double s_inf = s.back();
    const double t_half = 0.5 * (t.front() + t.back());
    double spread = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i)
    {
        if (t[i] >= t_half)
        {
            spread = std::max(spread, std::abs(s[i] - s_inf) / s_inf);
        }
    }
    return spread;
}

double distance_to_bubble(RadialField const& u, int m, double s)
{
    auto q = sample_Q(u.grid_ptr(), BubbleProfile{m, s});
    return energy(u - q, m).total;
}

void scenario_checks(RunResult& res, RadialField const& u0)
{
    auto const& cfg = res.config;
    auto const& rec = res.record;
    const int m = cfg.m;
    const double eq = harmonic_map_energy(m);
    const double e0 = res.initial_energy;
    auto const& last = rec.samples.back();
    const bool global = rec.status == RunStatus::Global;

    // Ledger and far-field checks apply to every run
    const double ledger_max = max_of(dissipation_audit(rec));
    res.metrics["max_ledger_residual"] = ledger_max;
    res.checks.push_back(make_check("dissipation_ledger", ledger_max < 0.01 * e0, ledger_max,
                                    0.01 * e0, "max |E0 - E(t) - dissipated| < 1% E0"));
    if (global && rec.exterior_radii.size() >= 3)
    {
        const double ext0 = rec.samples.front().exterior[2];
        const double ext1 = last.exterior[2];
        res.metrics["exterior_far_initial"] = ext0;
        res.metrics["exterior_far_final"] = ext1;
        res.checks.push_back(make_check("no_exterior_concentration", ext1 <= ext0 + 0.01 * e0,
                                        ext1, ext0 + 0.01 * e0,
                                        "exterior energy at r_max/10, final <= initial + 1% E0"));
    }

    if (cfg.scenario == "q_stationarity")
    {
        auto q = sample_Q(u0.grid_ptr(), BubbleProfile{m, cfg.ic.s0});
        double drift = 0.0;
        for (auto const& snap : rec.snapshots)
        {
            drift = std::max(drift, x2_norm(snap - q, m));
        }
        const double limit = 1e-3 * q_norm_scale(m);
        res.metrics["max_x2_drift"] = drift;
        res.checks.push_back(make_check("status_global", global, global ? 1 : 0, 1));
        res.checks.push_back(make_check("stationarity_drift", drift <= limit, drift, limit,
                                        "max_t ||u(t) - Q||_X2 <= 1e-3 sqrt(2 E(Q))"));
    }
    else if (cfg.scenario == "below_threshold_decay")
    {
        const double delta1 = 0.2 * 2.0 * eq;
        const double delta2 = pointwise_bound_delta2(m, delta1);
        const double bound = std::numbers::pi - delta2;
        std::size_t violations = 0;
        double sup_all = 0.0;
        for (auto const& s : rec.samples)
        {
            sup_all = std::max(sup_all, s.sup_abs_u);
            violations += s.sup_abs_u > bound ? 1 : 0;
        }
        res.metrics["pointwise_delta2"] = delta2;
        res.metrics["sup_t_sup_abs_u"] = sup_all;
        res.checks.push_back(make_check("status_global", global, global ? 1 : 0, 1));
        res.checks.push_back(make_check("energy_decay", last.energy.total < 0.05 * e0,
                                        last.energy.total, 0.05 * e0, "E(t_end) < 5% E0"));
        res.checks.push_back(make_check("sup_decay", last.sup_abs_u < 0.1, last.sup_abs_u, 0.1,
                                        "sup |u(t_end)| < 0.1"));
        res.checks.push_back(make_check("pointwise_bound", violations == 0,
                                        static_cast<double>(violations), 0,
                                        fmt::format("samples with sup|u| > pi - delta2 = {:.6g}",
                                                    bound)));
    }
    else if (cfg.scenario == "above_threshold_stability")
    {
        bool ok_track = res.track && !res.track->truncated && !res.track->s.empty();
        double spread = kNaN, dist = kNaN;
        std::size_t flagged = 0;
        if (ok_track)
        {
            spread = final_half_spread(res.track->times, res.track->s);
            dist = distance_to_bubble(rec.snapshots.back(), m, res.track->s.back());
            flagged = static_cast<std::size_t>(
                std::count(res.track->flagged.begin(), res.track->flagged.end(), true));
        }
        res.metrics["scale_spread_final_half"] = spread;
        res.metrics["energy_distance_to_bubble"] = dist;
        res.checks.push_back(make_check("status_global", global, global ? 1 : 0, 1));
        res.checks.push_back(make_check("scale_stabilized", ok_track && spread < 0.05, spread,
                                        0.05, "|s - s_inf| / s_inf over the final half"));
        res.checks.push_back(make_check("converged_to_bubble", ok_track && dist < 0.05 * eq,
                                        dist, 0.05 * eq, "E(u(t_end) - Q^{s_inf}) < 5% E(Q)"));
        res.checks.push_back(make_check("orthogonality", ok_track && flagged == 0,
                                        static_cast<double>(flagged), 0,
                                        "samples with orth_residual above tolerance"));
    }
    else if (cfg.scenario == "m1_blowup")
    {
        const bool blowup = rec.status == RunStatus::Blowup;
        res.checks.push_back(make_check("status_blowup", blowup, blowup ? 1 : 0, 1));
        double decades = kNaN;
        if (res.track && res.track->s.size() >= 2)
        {
            auto const& s = res.track->s;
            decades = std::log10(*std::max_element(s.begin(), s.end()) / s.back());
        }
        res.metrics["scale_decades"] = decades;
        res.checks.push_back(make_check("scale_decades", decades >= 1.5, decades, 1.5,
                                        "log10(max s / final s)"));

        bool ratio_ok = false;
        double ratio_drop = kNaN;
        if (res.rate && res.track)
        {
            auto const& tr = *res.track;
            const double s_last = tr.s.back();
            std::vector<double> ratio;
            for (std::size_t i = 0; i < tr.s.size(); ++i)
            {
                if (tr.s[i] <= 10.0 * s_last && tr.times[i] < res.rate->T_est)
                {
                    ratio.push_back(tr.s[i] / std::sqrt(res.rate->T_est - tr.times[i]));
                }
            }
            if (ratio.size() >= 2)
            {
                ratio_ok = true;
                for (std::size_t i = 1; i < ratio.size(); ++i)
                {
                    ratio_ok = ratio_ok && ratio[i] < ratio[i - 1];
                }
                ratio_drop = ratio.back() / ratio.front();
            }
        }
        res.metrics["self_similar_ratio_change"] = ratio_drop;
        res.checks.push_back(make_check("ratio_decreasing", ratio_ok, ratio_drop, 1.0,
                                        "s / sqrt(T - t) strictly decreasing over the final "
                                        "decade of s"));
        const bool l1 = res.rate && res.rate->L_fit == 1;
        res.checks.push_back(make_check("rate_selects_L1", l1,
                                        res.rate ? res.rate->L_fit : kNaN, 1,
                                        res.rate ? "" : res.rate_error));
    }
}

EndState classify_end(RunResult const& res)
{
    auto const& rec = res.record;
    if (rec.status == RunStatus::Blowup)
    {
        return EndState::Blowup;
    }
    if (rec.status == RunStatus::Aborted)
    {
        return EndState::Undetermined;
    }
    auto const& last = rec.samples.back();
    if (res.sector == Sector::E0)
    {
        return last.energy.total < kDecayEnergyFraction * res.initial_energy
                   ? EndState::Decayed
                   : EndState::Undetermined;
    }
    if (res.sector == Sector::E1 && res.track && !res.track->truncated
        && !res.track->s.empty() && !rec.snapshots.empty())
    {
        const double spread = final_half_spread(res.track->times, res.track->s);
        const double dist
            = distance_to_bubble(rec.snapshots.back(), res.config.m, res.track->s.back());
        if (spread < kScaleStabilityFraction
            && dist < kDecayEnergyFraction * harmonic_map_energy(res.config.m))
        {
            return EndState::ConvergedToQ;
        }
    }
    return EndState::Undetermined;
}

// Trailing part of the track where s decreases, limited to under one time unit
std::optional<ScaleTrack> rate_window(ScaleTrack const& track)
{
    const std::size_t n = track.s.size();
    if (n < 2)
    {
        return std::nullopt;
    }
    std::size_t first = n - 1;
    while (first > 0 && track.s[first - 1] > track.s[first]
           && track.times.back() - track.times[first - 1] < 0.9)
    {
        --first;
    }
    ScaleTrack w;
    w.times.assign(track.times.begin() + static_cast<long>(first), track.times.end());
    w.s.assign(track.s.begin() + static_cast<long>(first), track.s.end());
    w.sdot.assign(track.sdot.begin() + static_cast<long>(first), track.sdot.end());
    return w;
}

}  // namespace

std::string_view to_string(EndState state)
{
    switch (state)
    {
        case EndState::Decayed:
            return "Decayed";
        case EndState::ConvergedToQ:
            return "ConvergedToQ";
        case EndState::Blowup:
            return "Blowup";
        case EndState::Undetermined:
            break;
    }
    return "Undetermined";
}

double q_norm_scale(int m)
{
    return std::sqrt(2.0 * harmonic_map_energy(m));
}

bool RunResult::all_passed() const
{
    return std::all_of(checks.begin(), checks.end(), [](auto const& c) { return c.passed; });
}

RunResult execute(RunConfig const& config)
{
    validate(config);
    const auto start = std::chrono::steady_clock::now();
    auto grid = build_grid(config.r_min, config.r_max, config.n);
    RunResult res;
    res.config = config;
    auto u0 = build_initial_condition(config.ic, config.m, grid, res.amplitude);
    const auto cls = classify(u0, config.m);
    res.sector = cls.label;
    res.initial_energy = cls.energy;

    SamplingPolicy sampling;
    sampling.interval = config.sample_every;
    sampling.exterior_radii = {1.0, 10.0, config.r_max / 10.0};
    res.record = evolve(u0, config.m, config.t_end, config.stepper, sampling);
    auto const& rec = res.record;
    const std::size_t ns = rec.samples.size();

    std::vector<double> times(ns);
    for (std::size_t i = 0; i < ns; ++i)
    {
        times[i] = rec.samples[i].t;
    }
    res.s.assign(ns, kNaN);
    res.sdot.assign(ns, kNaN);
    res.orth.assign(ns, kNaN);
    if (res.sector == Sector::E1)
    {
        FitOptions options;
        options.localization = config.fit_localization;
        res.track = track_modulation(rec, nullptr, options);
        for (std::size_t i = 0; i < res.track->s.size(); ++i)
        {
            res.s[i] = res.track->s[i];
            res.sdot[i] = res.track->sdot[i];
            res.orth[i] = res.track->orth_residual[i];
        }
        if (auto window = rate_window(*res.track))
        {
            try
            {
                res.rate = fit_blowup_rate(*window);
            }
            catch (FitUnreliableError const& e)
            {
                res.rate_error = e.what();
            }
        }
    }
    else
    {
        for (std::size_t i = 0; i < ns; ++i)
        {
            res.s[i] = rec.samples[i].monitor.min_scale_estimate;
        }
        res.sdot = time_derivative(times, res.s);
    }

    auto const& last = rec.samples.back();
    res.metrics["initial_energy"] = res.initial_energy;
    res.metrics["amplitude"] = res.amplitude;
    res.metrics["final_time"] = last.t;
    res.metrics["final_energy"] = last.energy.total;
    res.metrics["final_sup_abs_u"] = last.sup_abs_u;
    res.metrics["final_x2_norm"] = last.x2_norm;
    res.metrics["final_scale"] = res.s.empty() ? kNaN : res.s.back();
    res.metrics["l4_accum"] = last.monitor.l4_accum;
    res.metrics["steps"] = static_cast<double>(rec.steps);
    res.metrics["rejected_steps"] = static_cast<double>(rec.rejected_steps);
    if (res.rate)
    {
        res.metrics["rate_T_est"] = res.rate->T_est;
        res.metrics["rate_L_fit"] = res.rate->L_fit;
        res.metrics["rate_c_fit"] = res.rate->c_fit;
        res.metrics["rate_rms"] = res.rate->rms;
    }

    scenario_checks(res, u0);
    res.end_state = classify_end(res);
    res.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return res;
}

std::string trajectory_csv(RunResult const& result)
{
    std::string out
        = "t,E_total,E_dirichlet,E_potential,X2_norm,sup_abs_u,s,sdot,orth_residual,"
          "dissipation_residual,l4_accum,exterior_energy_R1,exterior_energy_R10\n";
    auto const& samples = result.record.samples;
    for (std::size_t i = 0; i < samples.size(); ++i)
    {
        auto const& s = samples[i];
        const double ext1 = s.exterior.size() > 0 ? s.exterior[0] : kNaN;
        const double ext10 = s.exterior.size() > 1 ? s.exterior[1] : kNaN;
        out += fmt::format("{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
                           s.t, s.energy.total, s.energy.dirichlet, s.energy.potential,
                           s.x2_norm, s.sup_abs_u, result.s[i], result.sdot[i], result.orth[i],
                           s.ledger.residual, s.monitor.l4_accum, ext1, ext10);
    }
    return out;
}

std::string summary_json(RunResult const& result)
{
    using nlohmann::json;
    auto const& cfg = result.config;
    auto num = [](double x) { return std::isfinite(x) ? json(x) : json(nullptr); };

    json checks = json::array();
    for (auto const& c : result.checks)
    {
        checks.push_back({{"name", c.name},
                          {"passed", c.passed},
                          {"value", num(c.value)},
                          {"threshold", num(c.threshold)},
                          {"detail", c.detail}});
    }
    json metrics = json::object();
    for (auto const& [k, v] : result.metrics)
    {
        metrics[k] = num(v);
    }
    json ledger_t = json::array(), ledger_r = json::array();
    for (auto const& s : result.record.samples)
    {
        ledger_t.push_back(s.t);
        ledger_r.push_back(num(s.ledger.residual));
    }
    json rate = nullptr;
    if (result.rate)
    {
        json candidates = json::array();
        for (auto const& c : result.rate->candidates)
        {
            candidates.push_back({{"L", c.L}, {"T", c.T}, {"c", c.c}, {"rms", c.rms}});
        }
        rate = {{"T_est", result.rate->T_est},
                {"L_fit", result.rate->L_fit},
                {"c_fit", result.rate->c_fit},
                {"rms", result.rate->rms},
                {"candidates", candidates}};
    }
    else if (!result.rate_error.empty())
    {
        rate = {{"error", result.rate_error}};
    }
    json track = nullptr;
    if (result.track)
    {
        track = {{"samples", result.track->s.size()},
                 {"truncated", result.track->truncated},
                 {"cause", result.track->cause}};
    }

    json doc = {
        {"scenario", cfg.scenario},
        {"status", std::string(to_string(result.record.status))},
        {"message", result.record.message},
        {"end_state", std::string(to_string(result.end_state))},
        {"sector", std::string(to_string(result.sector))},
        {"all_checks_passed", result.all_passed()},
        {"checks", checks},
        {"metrics", metrics},
        {"blowup_rate_fit", rate},
        {"scale_track", track},
        {"provenance",
         {{"m", cfg.m},
          {"grid",
           {{"r_min", cfg.r_min},
            {"r_max", cfg.r_max},
            {"n", cfg.n},
            {"spacing", "geometric"}}},
          {"stepper",
           {{"scheme", std::string(to_string(cfg.stepper.scheme))},
            {"dt", cfg.stepper.dt},
            {"dt_floor", cfg.stepper.dt_floor},
            {"cfl_safety", cfg.stepper.cfl_like_safety},
            {"concentration_factor", cfg.stepper.concentration_factor},
            {"persistence_steps", cfg.stepper.persistence_steps},
            {"linear_only", cfg.stepper.linear_only},
            {"steps", result.record.steps},
            {"rejected_steps", result.record.rejected_steps}}},
          {"initial_condition",
           {{"family", std::string(to_string(cfg.ic.family))},
            {"A", result.amplitude},
            {"sigma", cfg.ic.sigma},
            {"s0", cfg.ic.s0},
            {"target_energy", cfg.ic.energy ? json(*cfg.ic.energy) : json(nullptr)}}},
          {"t_end", cfg.t_end},
          {"sample_every", cfg.sample_every},
          {"seed", cfg.seed}}},
        {"dissipation_ledger", {{"t", ledger_t}, {"residual", ledger_r}}},
    };
    return doc.dump(2) + "\n";
}

void write_artifacts(RunResult const& result, std::filesystem::path const& dir)
{
    std::filesystem::create_directories(dir);
    auto write = [&](std::string const& name, std::string const& text) {
        std::ofstream f(dir / name, std::ios::binary);
        if (!f)
        {
            throw Error(fmt::format("cannot write '{}'", (dir / name).string()));
        }
        f << text;
    };
    write("trajectory.csv", trajectory_csv(result));
    write("summary.json", summary_json(result));
    write("config.txt", format_config(result.config));
}

//---------------------------------------------------------------------------//
// Sweeps
//---------------------------------------------------------------------------//

std::vector<ParameterAxis> parse_parameter_grid(std::string_view text)
{
    std::vector<ParameterAxis> axes;
    std::size_t pos = 0, line_no = 0;
    auto trim = [](std::string_view s) {
        const auto a = s.find_first_not_of(" \t\r");
        if (a == std::string_view::npos)
        {
            return std::string_view{};
        }
        return s.substr(a, s.find_last_not_of(" \t\r") - a + 1);
    };
    while (pos <= text.size())
    {
        auto end = text.find('\n', pos);
        if (end == std::string_view::npos)
        {
            end = text.size();
        }
        auto line = text.substr(pos, end - pos);
        pos = end + 1;
        ++line_no;
        if (auto hash = line.find('#'); hash != std::string_view::npos)
        {
            line = line.substr(0, hash);
        }
        line = trim(line);
        if (line.empty())
        {
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string_view::npos)
        {
            throw ConfigError(fmt::format("grid line {}: expected 'key = v1, v2, ...'", line_no));
        }
        ParameterAxis axis{std::string(trim(line.substr(0, eq))), {}};
        auto rest = line.substr(eq + 1);
        while (true)
        {
            const auto comma = rest.find(',');
            auto item = trim(rest.substr(0, comma));
            if (item.empty())
            {
                throw ConfigError(fmt::format("grid line {}: empty value", line_no));
            }
            axis.values.emplace_back(item);
            if (comma == std::string_view::npos)
            {
                break;
            }
            rest = rest.substr(comma + 1);
        }
        if (axis.key.empty())
        {
            throw ConfigError(fmt::format("grid line {}: missing key", line_no));
        }
        for (auto const& a : axes)
        {
            if (a.key == axis.key)
            {
                throw ConfigError(fmt::format("grid line {}: duplicate key '{}'", line_no,
                                              axis.key));
            }
        }
        axes.push_back(std::move(axis));
    }
    return axes;
}

std::vector<SweepRow> sweep(RunConfig const& base, std::vector<ParameterAxis> const& axes,
                            unsigned threads, std::optional<std::filesystem::path> const& out_dir)
{
    std::size_t total = axes.empty() ? 0 : 1;
    for (auto const& a : axes)
    {
        total *= a.values.size();
    }
    std::vector<SweepRow> rows(total);
    for (std::size_t idx = 0; idx < total; ++idx)
    {
        rows[idx].index = idx;
        rows[idx].values.resize(axes.size());
        std::size_t rem = idx;
        for (std::size_t k = axes.size(); k-- > 0;)
        {
            rows[idx].values[k] = axes[k].values[rem % axes[k].values.size()];
            rem /= axes[k].values.size();
        }
    }

    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t idx = next++; idx < total; idx = next++)
        {
            auto& row = rows[idx];
            try
            {
                RunConfig cfg = base;
                for (std::size_t k = 0; k < axes.size(); ++k)
                {
                    apply_setting(cfg, axes[k].key, row.values[k]);
                }
                auto res = execute(cfg);
                row.ok = true;
                row.status = res.record.status;
                row.end_state = res.end_state;
                row.initial_energy = res.initial_energy;
                row.final_energy = res.record.samples.back().energy.total;
                row.final_scale = res.s.empty() ? kNaN : res.s.back();
                if (out_dir)
                {
                    write_artifacts(res, *out_dir / fmt::format("point_{:04d}", idx));
                }
            }
            catch (std::exception const& e)
            {
                row.ok = false;
                row.error = e.what();
            }
        }
    };
    const unsigned n_workers
        = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(total, 1))));
    std::vector<std::thread> pool;
    for (unsigned k = 1; k < n_workers; ++k)
    {
        pool.emplace_back(worker);
    }
    worker();
    for (auto& t : pool)
    {
        t.join();
    }
    return rows;
}

std::string sweep_csv(std::vector<ParameterAxis> const& axes, std::vector<SweepRow> const& rows)
{
    std::string out = "index";
    for (auto const& a : axes)
    {
        out += "," + a.key;
    }
    out += ",ok,status,end_state,initial_energy,final_energy,final_scale,error\n";
    for (auto const& row : rows)
    {
        out += std::to_string(row.index);
        for (auto const& v : row.values)
        {
            out += "," + v;
        }
        std::string err = row.error;
        std::replace(err.begin(), err.end(), ',', ';');
        std::replace(err.begin(), err.end(), '\n', ' ');
        out += fmt::format(",{},{},{},{},{},{},{}\n", row.ok ? "true" : "false",
                           row.ok ? to_string(row.status) : "-",
                           row.ok ? to_string(row.end_state) : "-", row.initial_energy,
                           row.final_energy, row.final_scale, err);
    }
    return out;
}

}  // namespace hmhf
