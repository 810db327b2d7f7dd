#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <tuple>

#include <fmt/format.h>

#include "hmhf/errors.hpp"
#include "hmhf/experiment_runner.hpp"

namespace hmhf {

namespace {

std::string_view trim(std::string_view s)
{
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos)
    {
        return {};
    }
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

double parse_double(std::string_view key, std::string_view value)
{
    double out = 0.0;
    auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
    if (ec != std::errc{} || ptr != value.data() + value.size() || !std::isfinite(out))
    {
        throw ConfigError(fmt::format("{}: '{}' is not a finite number", key, value));
    }
    return out;
}

long long parse_integer(std::string_view key, std::string_view value)
{
    long long out = 0;
    auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
    if (ec != std::errc{} || ptr != value.data() + value.size())
    {
        throw ConfigError(fmt::format("{}: '{}' is not an integer", key, value));
    }
    return out;
}

bool parse_bool(std::string_view key, std::string_view value)
{
    if (value == "true" || value == "1" || value == "yes")
    {
        return true;
    }
    if (value == "false" || value == "0" || value == "no")
    {
        return false;
    }
    throw ConfigError(fmt::format("{}: '{}' is not a boolean", key, value));
}

IcFamily parse_family(std::string_view value)
{
    if (value == "e0_bump")
    {
        return IcFamily::E0Bump;
    }
    if (value == "e1_excited")
    {
        return IcFamily::E1Excited;
    }
    if (value == "q_exact")
    {
        return IcFamily::QExact;
    }
    if (value == "custom_samples")
    {
        return IcFamily::CustomSamples;
    }
    throw ConfigError(fmt::format(
        "ic: unknown family '{}' (expected e0_bump, e1_excited, q_exact, custom_samples)",
        value));
}

std::string fmt_num(double x)
{
    return fmt::format("{}", x);
}

}  // namespace

std::string_view to_string(IcFamily family)
{
    switch (family)
    {
        case IcFamily::E0Bump:
            return "e0_bump";
        case IcFamily::E1Excited:
            return "e1_excited";
        case IcFamily::QExact:
            return "q_exact";
        case IcFamily::CustomSamples:
            break;
    }
    return "custom_samples";
}

RunConfig scenario_preset(std::string_view scenario)
{
    RunConfig c;
    c.scenario = std::string(scenario);
    if (scenario == "q_stationarity")
    {
        c.m = 2;
        c.ic.family = IcFamily::QExact;
        c.ic.s0 = 1.0;
        c.stepper.dt = 1e-3;
        c.t_end = 1.0;
        c.sample_every = 0.05;
    }
    else if (scenario == "below_threshold_decay")
    {
        c.m = 2;
        c.ic.family = IcFamily::E0Bump;
        c.ic.A = 1.0;
        c.ic.sigma = 1.0;
        c.ic.energy = 1.8;
        c.stepper.dt = 1e-3;
        c.t_end = 20.0;
        c.sample_every = 0.1;
    }
    else if (scenario == "above_threshold_stability")
    {
        c.m = 4;
        c.ic.family = IcFamily::E1Excited;
        c.ic.s0 = 1.0;
        c.ic.sigma = 3.0;
        c.ic.A = 1.0;
        c.ic.energy = 2.5;
        c.stepper.dt = 1e-3;
        c.t_end = 20.0;
        c.sample_every = 0.1;
    }
    else if (scenario == "m1_blowup")
    {
        // Small initial scale so the collapse finishes well inside one time
        // unit, where the logarithmic rate model is meaningful
        c.m = 1;
        c.r_min = 1e-6;
        c.r_max = 10.0;
        c.ic.family = IcFamily::E1Excited;
        c.ic.s0 = 0.01;
        c.ic.sigma = 0.1;
        c.ic.A = -1.5;
        c.stepper.dt = 1e-5;
        // Blowup declared at 3e-5; each further decade costs ten times the steps
        c.stepper.concentration_factor = 30.0;
        c.t_end = 0.01;
        c.sample_every = 1e-5;
        c.fit_localization = 4.0;
    }
    else if (scenario != "custom")
    {
        throw ConfigError(fmt::format(
            "scenario: unknown tag '{}' (expected q_stationarity, below_threshold_decay, "
            "above_threshold_stability, m1_blowup, custom)",
            scenario));
    }
    return c;
}

void apply_setting(RunConfig& c, std::string_view key, std::string_view value)
{
    if (value.empty())
    {
        throw ConfigError(fmt::format("{}: empty value", key));
    }
    if (key == "scenario")
    {
        c = [&] {
            auto preset = scenario_preset(value);
            preset.seed = c.seed;
            preset.out = c.out;
            return preset;
        }();
    }
    else if (key == "m")
    {
        c.m = static_cast<int>(parse_integer(key, value));
    }
    else if (key == "r_min")
    {
        c.r_min = parse_double(key, value);
    }
    else if (key == "r_max")
    {
        c.r_max = parse_double(key, value);
    }
    else if (key == "n")
    {
        const auto n = parse_integer(key, value);
        if (n < 0)
        {
            throw ConfigError("n: must be positive");
        }
        c.n = static_cast<std::size_t>(n);
    }
    else if (key == "dt")
    {
        c.stepper.dt = parse_double(key, value);
    }
    else if (key == "scheme")
    {
        c.stepper.scheme = parse_scheme(value);
    }
    else if (key == "dt_floor")
    {
        c.stepper.dt_floor = parse_double(key, value);
    }
    else if (key == "cfl_safety")
    {
        c.stepper.cfl_like_safety = parse_double(key, value);
    }
    else if (key == "concentration_factor")
    {
        c.stepper.concentration_factor = parse_double(key, value);
    }
    else if (key == "persistence_steps")
    {
        c.stepper.persistence_steps = static_cast<int>(parse_integer(key, value));
    }
    else if (key == "linear_only")
    {
        c.stepper.linear_only = parse_bool(key, value);
    }
    else if (key == "t_end")
    {
        c.t_end = parse_double(key, value);
    }
    else if (key == "sample_every")
    {
        c.sample_every = parse_double(key, value);
    }
    else if (key == "ic")
    {
        c.ic.family = parse_family(value);
    }
    else if (key == "ic_A")
    {
        c.ic.A = parse_double(key, value);
    }
    else if (key == "ic_sigma")
    {
        c.ic.sigma = parse_double(key, value);
    }
    else if (key == "ic_s0")
    {
        c.ic.s0 = parse_double(key, value);
    }
    else if (key == "ic_energy")
    {
        if (value == "none")
        {
            c.ic.energy.reset();
        }
        else
        {
            c.ic.energy = parse_double(key, value);
        }
    }
    else if (key == "ic_file")
    {
        c.ic.file = std::string(value);
    }
    else if (key == "fit_localization")
    {
        if (value == "none")
        {
            c.fit_localization.reset();
        }
        else
        {
            c.fit_localization = parse_double(key, value);
        }
    }
    else if (key == "seed")
    {
        const auto s = parse_integer(key, value);
        if (s < 0)
        {
            throw ConfigError("seed: must be nonnegative");
        }
        c.seed = static_cast<std::uint64_t>(s);
    }
    else if (key == "out")
    {
        c.out = std::string(value);
    }
    else
    {
        throw ConfigError(fmt::format("unknown key '{}'", key));
    }
}

RunConfig parse_config(std::string_view text)
{
    std::vector<std::tuple<std::size_t, std::string, std::string>> entries;
    std::set<std::string> seen;
    std::optional<std::string> scenario;
    std::size_t line_no = 0;
    std::size_t pos = 0;
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
            throw ConfigError(fmt::format("line {}: expected 'key = value'", line_no));
        }
        std::string key(trim(line.substr(0, eq)));
        std::string value(trim(line.substr(eq + 1)));
        if (key.empty())
        {
            throw ConfigError(fmt::format("line {}: missing key", line_no));
        }
        if (!seen.insert(key).second)
        {
            throw ConfigError(fmt::format("line {}: duplicate key '{}'", line_no, key));
        }
        if (key == "scenario")
        {
            scenario = value;
        }
        else
        {
            entries.emplace_back(line_no, key, value);
        }
    }

    RunConfig config = scenario ? scenario_preset(*scenario) : RunConfig{};
    for (auto const& [line, key, value] : entries)
    {
        try
        {
            apply_setting(config, key, value);
        }
        catch (ConfigError const& e)
        {
            throw ConfigError(fmt::format("line {}: {}", line, e.what()));
        }
    }
    return config;
}

RunConfig load_config(std::filesystem::path const& path)
{
    std::ifstream in(path);
    if (!in)
    {
        throw ConfigError(fmt::format("cannot open config '{}'", path.string()));
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    auto config = parse_config(ss.str());
    // Relative sample files resolve against the config's directory
    if (config.ic.family == IcFamily::CustomSamples && !config.ic.file.empty())
    {
        std::filesystem::path f(config.ic.file);
        if (f.is_relative())
        {
            config.ic.file = (path.parent_path() / f).string();
        }
    }
    return config;
}

void validate(RunConfig const& c)
{
    if (std::find(std::begin(kScenarios), std::end(kScenarios), c.scenario)
        == std::end(kScenarios))
    {
        throw ConfigError(fmt::format("scenario: unknown tag '{}'", c.scenario));
    }
    if (c.m < 1)
    {
        throw ConfigError("m: degree must be >= 1");
    }
    if (!(c.r_min > 0.0))
    {
        throw ConfigError("r_min: must be positive");
    }
    if (!(c.r_max > c.r_min))
    {
        throw ConfigError("r_max: must exceed r_min");
    }
    if (c.n < 16)
    {
        throw ConfigError("n: need at least 16 nodes");
    }
    validate(c.stepper);
    if (!(c.t_end > 0.0))
    {
        throw ConfigError("t_end: must be positive");
    }
    if (!(c.sample_every > 0.0))
    {
        throw ConfigError("sample_every: must be positive");
    }
    auto const& ic = c.ic;
    if (ic.family == IcFamily::E0Bump || ic.family == IcFamily::E1Excited)
    {
        if (!(ic.sigma > 0.0))
        {
            throw ConfigError("ic_sigma: must be positive");
        }
    }
    if (ic.family != IcFamily::E0Bump && ic.family != IcFamily::CustomSamples)
    {
        if (!(ic.s0 > c.r_min && ic.s0 < c.r_max))
        {
            throw ConfigError("ic_s0: bubble scale must lie inside (r_min, r_max)");
        }
    }
    if (ic.energy)
    {
        if (ic.family == IcFamily::QExact || ic.family == IcFamily::CustomSamples)
        {
            throw ConfigError("ic_energy: only e0_bump and e1_excited have a free amplitude");
        }
        if (!(*ic.energy > 0.0))
        {
            throw ConfigError("ic_energy: must be positive");
        }
        if (ic.family == IcFamily::E0Bump && !(*ic.energy < 2.0))
        {
            throw ConfigError("ic_energy: E0 data must stay below 2 E(Q)");
        }
        if (ic.family == IcFamily::E1Excited && !(*ic.energy >= 1.0 && *ic.energy <= 3.0))
        {
            throw ConfigError("ic_energy: E1 data must lie in [E(Q), 3 E(Q)]");
        }
        if (ic.A == 0.0)
        {
            throw ConfigError("ic_A: sign of the amplitude is needed when ic_energy is set");
        }
    }
    if (ic.family == IcFamily::CustomSamples && ic.file.empty())
    {
        throw ConfigError("ic_file: required for custom_samples");
    }
    if (c.fit_localization && !(*c.fit_localization > 0.0))
    {
        throw ConfigError("fit_localization: must be positive");
    }
    if (c.out.empty())
    {
        throw ConfigError("out: output directory must not be empty");
    }
}

std::string format_config(RunConfig const& c)
{
    std::string s;
    auto line = [&](std::string_view key, std::string const& value) {
        s += fmt::format("{} = {}\n", key, value);
    };
    line("scenario", c.scenario);
    line("m", std::to_string(c.m));
    line("r_min", fmt_num(c.r_min));
    line("r_max", fmt_num(c.r_max));
    line("n", std::to_string(c.n));
    line("dt", fmt_num(c.stepper.dt));
    line("scheme", std::string(to_string(c.stepper.scheme)));
    line("dt_floor", fmt_num(c.stepper.dt_floor));
    line("cfl_safety", fmt_num(c.stepper.cfl_like_safety));
    line("concentration_factor", fmt_num(c.stepper.concentration_factor));
    line("persistence_steps", std::to_string(c.stepper.persistence_steps));
    line("linear_only", c.stepper.linear_only ? "true" : "false");
    line("t_end", fmt_num(c.t_end));
    line("sample_every", fmt_num(c.sample_every));
    line("ic", std::string(to_string(c.ic.family)));
    line("ic_A", fmt_num(c.ic.A));
    line("ic_sigma", fmt_num(c.ic.sigma));
    line("ic_s0", fmt_num(c.ic.s0));
    line("ic_energy", c.ic.energy ? fmt_num(*c.ic.energy) : "none");
    if (!c.ic.file.empty())
    {
        line("ic_file", c.ic.file);
    }
    line("fit_localization", c.fit_localization ? fmt_num(*c.fit_localization) : "none");
    line("seed", std::to_string(c.seed));
    line("out", c.out);
    return s;
}

}  // namespace hmhf
