#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "hmhf/energy_diagnostics.hpp"
#include "hmhf/errors.hpp"
#include "hmhf/experiment_runner.hpp"
#include "hmhf/harmonic_map.hpp"

using namespace hmhf;
namespace fs = std::filesystem;

namespace {

std::string error_of(std::string_view text)
{
    try
    {
        validate(parse_config(text));
    }
    catch (ConfigError const& e)
    {
        return e.what();
    }
    return {};
}

RunConfig quick_e0(double A)
{
    auto c = parse_config("ic = e0_bump\nm = 2\nn = 512\ndt = 1e-2\nt_end = 2\nsample_every = 0.5\n");
    c.ic.A = A;
    return c;
}

fs::path scratch(std::string const& name)
{
    auto p = fs::temp_directory_path() / ("hmhf_test_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

}  // namespace

TEST_SUITE("experiment_runner")
{
    TEST_CASE("config grammar: comments, blanks, spacing")
    {
        auto c = parse_config("# header\n\n  m=3   # trailing\nr_min = 1e-5\n\tn = 300\nscheme = imex2\n");
        CHECK(c.m == 3);
        CHECK(c.r_min == 1e-5);
        CHECK(c.n == 300);
        CHECK(c.stepper.scheme == Scheme::IMEX2);
        CHECK(c.scenario == "custom");
    }

    TEST_CASE("scenario presets load first; explicit keys win regardless of order")
    {
        auto a = parse_config("dt = 5e-4\nscenario = q_stationarity\n");
        auto b = parse_config("scenario = q_stationarity\ndt = 5e-4\n");
        CHECK(a.stepper.dt == 5e-4);
        CHECK(b.stepper.dt == 5e-4);
        CHECK(a.ic.family == IcFamily::QExact);
        CHECK(format_config(a) == format_config(b));
    }

    TEST_CASE("presets match their scenarios")
    {
        auto q = scenario_preset("q_stationarity");
        CHECK(q.m == 2);
        CHECK(q.stepper.dt == 1e-3);
        CHECK(q.t_end == 1.0);
        auto d = scenario_preset("below_threshold_decay");
        CHECK(d.m == 2);
        REQUIRE(d.ic.energy.has_value());
        CHECK(*d.ic.energy == doctest::Approx(1.8));
        CHECK(d.t_end == 20.0);
        auto s = scenario_preset("above_threshold_stability");
        CHECK(s.m == 4);
        CHECK(s.ic.family == IcFamily::E1Excited);
        CHECK(s.ic.s0 == 1.0);
        CHECK(s.ic.sigma == 3.0);
        auto b = scenario_preset("m1_blowup");
        CHECK(b.m == 1);
        CHECK(b.ic.family == IcFamily::E1Excited);
        CHECK_THROWS_AS(scenario_preset("nope"), ConfigError);
        for (auto tag : kScenarios)
        {
            CHECK_NOTHROW(validate(scenario_preset(tag)));
        }
    }

    TEST_CASE("format_config round trips")
    {
        for (auto tag : kScenarios)
        {
            auto c = scenario_preset(tag);
            c.seed = 42;
            auto back = parse_config(format_config(c));
            CHECK(format_config(back) == format_config(c));
        }
    }

    TEST_CASE("parse errors name the line")
    {
        auto msg = [](std::string_view text) {
            try
            {
                parse_config(text);
            }
            catch (ConfigError const& e)
            {
                return std::string(e.what());
            }
            return std::string();
        };
        CHECK(msg("m = 2\nm = 3\n").find("line 2") != std::string::npos);
        CHECK(msg("m = 2\nfoo = 1\n").find("foo") != std::string::npos);
        CHECK(msg("m = 2\nfoo = 1\n").find("line 2") != std::string::npos);
        CHECK(msg("n = twelve\n").find("line 1") != std::string::npos);
        CHECK(msg("dt 0.1\n").find("line 1") != std::string::npos);
        CHECK(msg("m = \n").find("line 1") != std::string::npos);
        CHECK(msg("scheme = rk4\n").find("scheme") != std::string::npos);
        CHECK(msg("linear_only = maybe\n").find("linear_only") != std::string::npos);
    }

    TEST_CASE("validation is total and specific")
    {
        CHECK(error_of("m = 0").find("m:") != std::string::npos);
        CHECK(error_of("r_min = 0").find("r_min") != std::string::npos);
        CHECK(error_of("r_min = 10\nr_max = 1").find("r_max") != std::string::npos);
        CHECK(error_of("n = 8").find("n:") != std::string::npos);
        CHECK(error_of("dt = 1e-13").find("dt") != std::string::npos);
        CHECK(error_of("t_end = 0").find("t_end") != std::string::npos);
        CHECK(error_of("sample_every = -1").find("sample_every") != std::string::npos);
        CHECK(error_of("ic_sigma = 0").find("ic_sigma") != std::string::npos);
        CHECK(error_of("ic = q_exact\nic_s0 = 1e9").find("ic_s0") != std::string::npos);
        CHECK(error_of("ic_energy = 2.5").find("ic_energy") != std::string::npos);
        CHECK(error_of("ic = e1_excited\nic_energy = 3.5").find("ic_energy") != std::string::npos);
        CHECK(error_of("ic = q_exact\nic_energy = 1.5").find("ic_energy") != std::string::npos);
        CHECK(error_of("ic = custom_samples").find("ic_file") != std::string::npos);
        CHECK(error_of("fit_localization = -2").find("fit_localization") != std::string::npos);
        CHECK(error_of("m = 2").empty());
    }

    TEST_CASE("initial data hits the requested energy and sector")
    {
        auto g = default_grid();
        InitialConditionSpec e0;
        e0.family = IcFamily::E0Bump;
        e0.energy = 1.8;
        double A = 0.0;
        auto u = build_initial_condition(e0, 2, g, A);
        CHECK(energy(u, 2).total == doctest::Approx(1.8 * 4.0).epsilon(1e-10));
        CHECK(A > 0.0);
        CHECK(classify(u, 2).label == Sector::E0);

        InitialConditionSpec e1;
        e1.family = IcFamily::E1Excited;
        e1.s0 = 1.0;
        e1.sigma = 3.0;
        e1.A = -1.0;
        e1.energy = 2.5;
        auto v = build_initial_condition(e1, 4, g, A);
        CHECK(energy(v, 4).total == doctest::Approx(2.5 * 8.0).epsilon(1e-10));
        CHECK(A < 0.0);
        CHECK(classify(v, 4).label == Sector::E1);

        InitialConditionSpec q;
        q.family = IcFamily::QExact;
        q.s0 = 0.5;
        auto w = build_initial_condition(q, 3, g);
        CHECK(classify(w, 3).label == Sector::E1);

        InitialConditionSpec heavy;
        heavy.family = IcFamily::E0Bump;
        heavy.A = 3.0;
        CHECK_THROWS_AS(build_initial_condition(heavy, 2, g), ConfigError);
    }

    TEST_CASE("custom samples: read, interpolate, reject bad files")
    {
        auto dir = scratch("samples");
        auto g = build_grid(1e-3, 100.0, 256);
        {
            std::ofstream f(dir / "q.txt");
            f << "# r angle\n";
            for (double x = std::log(1e-4); x <= std::log(200.0); x += 0.01)
            {
                f.precision(17);
                f << std::exp(x) << ", " << eval_Q({2, 1.0}, std::exp(x)) << "\n";
            }
        }
        InitialConditionSpec spec;
        spec.family = IcFamily::CustomSamples;
        spec.file = (dir / "q.txt").string();
        auto u = build_initial_condition(spec, 2, g);
        CHECK(u.inner_limit() == InnerLimit::Pi);
        auto q = sample_Q(g, {2, 1.0});
        for (std::size_t i = 0; i < u.size(); ++i)
        {
            CHECK(std::abs(u.angle(i) - q.angle(i)) < 1e-4);
        }

        {
            std::ofstream f(dir / "short.txt");
            f << "0.01 3.0\n1.0 1.5\n";
        }
        spec.file = (dir / "short.txt").string();
        CHECK_THROWS_AS(build_initial_condition(spec, 2, g), ConfigError);
        {
            std::ofstream f(dir / "garbage.txt");
            f << "0.0001 3.1\nhello\n";
        }
        spec.file = (dir / "garbage.txt").string();
        CHECK_THROWS_AS(build_initial_condition(spec, 2, g), ConfigError);
        spec.file = (dir / "missing.txt").string();
        CHECK_THROWS_AS(build_initial_condition(spec, 2, g), ConfigError);
    }

    TEST_CASE("relative ic_file paths resolve against the config file")
    {
        auto dir = scratch("relpath");
        {
            std::ofstream f(dir / "run.cfg");
            f << "ic = custom_samples\nic_file = data.txt\n";
        }
        auto c = load_config(dir / "run.cfg");
        CHECK(fs::path(c.ic.file) == dir / "data.txt");
        CHECK_THROWS_AS(load_config(dir / "absent.cfg"), ConfigError);
    }

    TEST_CASE("trajectory CSV header and summary JSON layout")
    {
        auto c = parse_config("scenario = q_stationarity\nt_end = 0.2\nn = 512\n");
        auto res = execute(c);
        auto csv = trajectory_csv(res);
        const auto header = csv.substr(0, csv.find('\n'));
        CHECK(header
              == "t,E_total,E_dirichlet,E_potential,X2_norm,sup_abs_u,s,sdot,orth_residual,"
                 "dissipation_residual,l4_accum,exterior_energy_R1,exterior_energy_R10");
        std::size_t rows = 0;
        for (char ch : csv)
        {
            rows += ch == '\n';
        }
        CHECK(rows == res.record.samples.size() + 1);

        auto j = nlohmann::json::parse(summary_json(res));
        CHECK(j["scenario"] == "q_stationarity");
        CHECK(j["status"] == "Global");
        CHECK(j.contains("metrics"));
        CHECK(j.contains("provenance"));
        CHECK(j["provenance"]["grid"]["n"] == 512);
        REQUIRE(j["checks"].is_array());
        for (auto const& chk : j["checks"])
        {
            CHECK(chk.contains("name"));
            CHECK(chk["passed"].is_boolean());
        }
        CHECK(j["dissipation_ledger"]["residual"].size() == res.record.samples.size());
        CHECK(j["all_checks_passed"] == res.all_passed());
    }

    TEST_CASE("artifacts are written")
    {
        auto dir = scratch("artifacts");
        auto c = parse_config("scenario = q_stationarity\nt_end = 0.1\nn = 256\n");
        write_artifacts(execute(c), dir);
        CHECK(fs::exists(dir / "trajectory.csv"));
        CHECK(fs::exists(dir / "summary.json"));
        CHECK(fs::exists(dir / "config.txt"));
        std::ifstream f(dir / "config.txt");
        std::stringstream ss;
        ss << f.rdbuf();
        CHECK(format_config(parse_config(ss.str())) == format_config(c));
    }

    TEST_CASE("identical configs give bit-identical output")
    {
        auto c = quick_e0(1.0);
        CHECK(trajectory_csv(execute(c)) == trajectory_csv(execute(c)));
    }

    TEST_CASE("q_norm_scale")
    {
        CHECK(q_norm_scale(2) == doctest::Approx(std::sqrt(8.0)));
    }

    TEST_CASE("parameter grids")
    {
        auto axes = parse_parameter_grid("# sweep\nm = 1, 2\n ic_A = 0.1,0.2 , 0.3\n");
        REQUIRE(axes.size() == 2);
        CHECK(axes[0].key == "m");
        CHECK(axes[1].values == std::vector<std::string>{"0.1", "0.2", "0.3"});
        CHECK(parse_parameter_grid("").empty());
        CHECK(parse_parameter_grid("# nothing\n\n").empty());
        CHECK_THROWS_AS(parse_parameter_grid("m 1, 2\n"), ConfigError);
        CHECK_THROWS_AS(parse_parameter_grid("m = 1,,2\n"), ConfigError);
        CHECK_THROWS_AS(parse_parameter_grid("m = 1\nm = 2\n"), ConfigError);
    }

    TEST_CASE("empty sweep is an empty table")
    {
        auto rows = sweep(quick_e0(0.1), {}, 2);
        CHECK(rows.empty());
        CHECK(sweep_csv({}, rows) == "index,ok,status,end_state,initial_energy,final_energy,final_scale,error\n");
    }

    TEST_CASE("sweep rows do not depend on the thread count; failures are recorded")
    {
        auto axes = parse_parameter_grid("ic_A = 0.1, 0.2\nn = 8, 256\n");
        auto one = sweep(quick_e0(0.1), axes, 1);
        auto two = sweep(quick_e0(0.1), axes, 3);
        REQUIRE(one.size() == 4);
        CHECK(sweep_csv(axes, one) == sweep_csv(axes, two));
        for (auto const& row : one)
        {
            CAPTURE(row.index);
            const bool bad_n = row.values[1] == "8";
            CHECK(row.ok == !bad_n);
            if (bad_n)
            {
                CHECK(row.error.find("n:") != std::string::npos);
            }
        }
    }

    TEST_CASE("sweep writes per-point artifacts")
    {
        auto dir = scratch("sweep");
        auto axes = parse_parameter_grid("ic_A = 0.1, 0.2\n");
        auto rows = sweep(quick_e0(0.1), axes, 2, dir);
        CHECK(rows.size() == 2);
        CHECK(fs::exists(dir / "point_0000" / "summary.json"));
        CHECK(fs::exists(dir / "point_0001" / "trajectory.csv"));
    }

    TEST_CASE("small E0 bumps decay for m = 1 and m = 2")
    {
        auto base = parse_config("ic = e0_bump\nn = 1024\ndt = 1e-2\nt_end = 40\nsample_every = 1\n");
        auto axes = parse_parameter_grid("m = 1, 2\nic_A = 0.1, 0.3\n");
        auto rows = sweep(base, axes, 2);
        for (auto const& row : rows)
        {
            CAPTURE(row.index);
            CHECK(row.ok);
            CHECK(row.end_state == EndState::Decayed);
        }
    }

    TEST_CASE("E1 energy ramp below 3E(Q) converges to a bubble (m = 4)")
    {
        auto base = scenario_preset("above_threshold_stability");
        auto axes = parse_parameter_grid("ic_energy = 1.5, 2.2, 2.8\n");
        auto rows = sweep(base, axes, 2);
        for (auto const& row : rows)
        {
            CAPTURE(row.index);
            CHECK(row.ok);
            CHECK(row.status == RunStatus::Global);
            CHECK(row.end_state == EndState::ConvergedToQ);
        }
    }
}
