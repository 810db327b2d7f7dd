#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "hmhf/errors.hpp"
#include "hmhf/experiment_runner.hpp"

namespace {

enum ExitCode
{
    kOk = 0,
    kChecksFailed = 1,
    kUsage = 2,
    kRuntime = 3
};

std::string read_file(std::filesystem::path const& path)
{
    std::ifstream in(path);
    if (!in)
    {
        throw hmhf::ConfigError(fmt::format("cannot open '{}'", path.string()));
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void print_result(hmhf::RunResult const& res)
{
    fmt::print("scenario {}  status {}  end_state {}  ({:.1f} s, {} steps)\n",
               res.config.scenario, to_string(res.record.status), to_string(res.end_state),
               res.seconds, res.record.steps);
    if (!res.record.message.empty())
    {
        fmt::print("  {}\n", res.record.message);
    }
    for (auto const& c : res.checks)
    {
        fmt::print("  {} {:<28} value {:<12.6g} threshold {:.6g}\n", c.passed ? "PASS" : "FAIL",
                   c.name, c.value, c.threshold);
    }
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Corotational harmonic map heat flow: simulation and diagnostics"};
    app.require_subcommand(1);

    std::string out_dir;
    std::optional<std::uint64_t> seed;
    unsigned threads = std::max(1u, std::thread::hardware_concurrency());
    app.add_option("--out", out_dir, "Output directory (overrides the config's 'out')");
    app.add_option("--seed", seed, "Seed recorded in the run provenance");
    app.add_option("--threads", threads, "Worker threads for sweeps")->check(CLI::PositiveNumber);

    std::string run_config;
    auto* run = app.add_subcommand("run", "Run one configuration and write its artifacts");
    run->add_option("config", run_config, "Config file")->required();

    std::string sweep_config, grid_file;
    auto* sweep = app.add_subcommand("sweep", "Run a parameter grid over a base configuration");
    sweep->add_option("config", sweep_config, "Base config file")->required();
    sweep->add_option("--grid", grid_file, "Parameter grid file")->required();

    std::string check_config;
    auto* check = app.add_subcommand("check", "Validate a configuration without running it");
    check->add_option("config", check_config, "Config file")->required();

    // Global flags are accepted after the subcommand too
    for (auto* sub : {run, sweep, check})
    {
        sub->fallthrough();
    }

    CLI11_PARSE(app, argc, argv);

    auto load = [&](std::string const& path) {
        auto cfg = hmhf::load_config(path);
        if (!out_dir.empty())
        {
            cfg.out = out_dir;
        }
        if (seed)
        {
            cfg.seed = *seed;
        }
        hmhf::validate(cfg);
        return cfg;
    };

    try
    {
        if (*check)
        {
            auto cfg = load(check_config);
            fmt::print("{}", hmhf::format_config(cfg));
            fmt::print("# config is valid\n");
            return kOk;
        }
        if (*run)
        {
            auto cfg = load(run_config);
            auto res = hmhf::execute(cfg);
            hmhf::write_artifacts(res, cfg.out);
            print_result(res);
            fmt::print("artifacts written to {}\n", cfg.out);
            if (res.record.status == hmhf::RunStatus::Aborted)
            {
                return kRuntime;
            }
            return res.all_passed() ? kOk : kChecksFailed;
        }
        if (*sweep)
        {
            auto cfg = load(sweep_config);
            auto axes = hmhf::parse_parameter_grid(read_file(grid_file));
            const std::filesystem::path dir(cfg.out);
            auto rows = hmhf::sweep(cfg, axes, threads, dir);
            std::filesystem::create_directories(dir);
            const auto table = hmhf::sweep_csv(axes, rows);
            std::ofstream(dir / "sweep_summary.csv") << table;
            fmt::print("{}", table);
            return kOk;
        }
    }
    catch (hmhf::ConfigError const& e)
    {
        fmt::print(stderr, "invalid configuration: {}\n", e.what());
        return kUsage;
    }
    catch (std::exception const& e)
    {
        fmt::print(stderr, "error: {}\n", e.what());
        return kRuntime;
    }
    return kUsage;
}
