#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "hmhf/evolution.hpp"
#include "hmhf/modulation.hpp"
#include "hmhf/radial_grid.hpp"

namespace hmhf {

//---------------------------------------------------------------------------//
// Configuration
//---------------------------------------------------------------------------//

enum class IcFamily
{
    E0Bump,         //!< A h(r / sigma)
    E1Excited,      //!< Q(r / s0) + A h(r / sigma)
    QExact,         //!< Q(r / s0)
    CustomSamples   //!< (r, angle) pairs read from a file
};

std::string_view to_string(IcFamily family);

struct InitialConditionSpec
{
    IcFamily family = IcFamily::E0Bump;
    double A = 0.5;
    double sigma = 1.0;
    double s0 = 1.0;
    //! If set, A is re-solved (keeping its sign) so E(u0) = energy * E(Q)
    std::optional<double> energy;
    std::string file;
};

inline constexpr std::string_view kScenarios[] = {
    "q_stationarity", "below_threshold_decay", "above_threshold_stability",
    "m1_blowup", "custom"};

struct RunConfig
{
    std::string scenario = "custom";
    int m = 2;
    double r_min = kDefaultRMin;
    double r_max = kDefaultRMax;
    std::size_t n = kDefaultNodes;
    StepperConfig stepper;
    double t_end = 1.0;
    double sample_every = 0.1;
    InitialConditionSpec ic;
    //! Localization factor K for the scale fit (see FitOptions)
    std::optional<double> fit_localization;
    std::uint64_t seed = 0;
    std::string out = "out";
};

/*!
 * Parse `key = value` lines (`#` starts a comment). A `scenario` key loads
 * that preset first; every other key then overrides it regardless of order.
 * Unknown keys, duplicates and malformed values raise ConfigError naming the
 * line.
 */
RunConfig parse_config(std::string_view text);
RunConfig load_config(std::filesystem::path const& path);

//! Apply one key; used by the parser and by sweeps
void apply_setting(RunConfig& config, std::string_view key, std::string_view value);

//! Preset values for a scenario tag (ConfigError for unknown tags)
RunConfig scenario_preset(std::string_view scenario);

//! Total validation; the message names the violated condition
void validate(RunConfig const& config);

//! Canonical `key = value` rendering (round-trips through parse_config)
std::string format_config(RunConfig const& config);

//---------------------------------------------------------------------------//
// Initial data
//---------------------------------------------------------------------------//

/*!
 * Build u0 on the grid. With a target energy, A is found by scanning |A| in
 * small steps from zero to the first crossing, then bisection. The result
 * must classify into the family's sector and lie in its energy window
 * (E0: below 2E(Q); E1: [E(Q), 3E(Q)]), otherwise ConfigError.
 */
RadialField build_initial_condition(InitialConditionSpec const& spec, int m,
                                    GridPtr const& grid);

//! Same, also reporting the amplitude used
RadialField build_initial_condition(InitialConditionSpec const& spec, int m,
                                    GridPtr const& grid, double& amplitude);

//---------------------------------------------------------------------------//
// Runs
//---------------------------------------------------------------------------//

enum class EndState
{
    Decayed,
    ConvergedToQ,
    Blowup,
    Undetermined
};

std::string_view to_string(EndState state);

//! Relative thresholds used by classification and the scenario checks
inline constexpr double kDecayEnergyFraction = 0.05;
inline constexpr double kScaleStabilityFraction = 0.05;

struct CheckResult
{
    std::string name;
    bool passed = false;
    double value = 0.0;
    double threshold = 0.0;
    std::string detail;
};

struct RunResult
{
    RunConfig config;
    double amplitude = 0.0;
    double initial_energy = 0.0;
    Sector sector = Sector::Other;
    TrajectoryRecord record;
    //! Per-sample s, sdot and orthogonality residual (NaN where undefined)
    std::vector<double> s;
    std::vector<double> sdot;
    std::vector<double> orth;
    std::optional<ScaleTrack> track;
    std::optional<BlowupRateFit> rate;
    std::string rate_error;
    std::vector<CheckResult> checks;
    std::map<std::string, double> metrics;
    EndState end_state = EndState::Undetermined;
    double seconds = 0.0;

    bool all_passed() const;
};

//! Execute a validated config in memory (no files written)
RunResult execute(RunConfig const& config);

//! Trajectory CSV (header plus one row per sample)
std::string trajectory_csv(RunResult const& result);

//! Summary JSON text
std::string summary_json(RunResult const& result);

//! Write trajectory.csv, summary.json and config.txt into the directory
void write_artifacts(RunResult const& result, std::filesystem::path const& dir);

//! Scale value used for the stationarity drift: sqrt(2 E(Q))
double q_norm_scale(int m);

//---------------------------------------------------------------------------//
// Sweeps
//---------------------------------------------------------------------------//

struct ParameterAxis
{
    std::string key;
    std::vector<std::string> values;
};

//! `key = v1, v2, ...` lines; zero axes means an empty sweep
std::vector<ParameterAxis> parse_parameter_grid(std::string_view text);

struct SweepRow
{
    std::size_t index = 0;
    std::vector<std::string> values;  //!< parallel to the axes
    bool ok = false;
    std::string error;
    RunStatus status = RunStatus::Aborted;
    EndState end_state = EndState::Undetermined;
    double initial_energy = 0.0;
    double final_energy = 0.0;
    double final_scale = 0.0;
};

/*!
 * Run the cartesian product of the axes (first axis outermost) on `threads`
 * workers. Rows are stored by point index, so the table does not depend on
 * scheduling. When out_dir is set each point writes into point_NNNN/.
 * Failures are recorded in the row and do not stop the sweep.
 */
std::vector<SweepRow> sweep(RunConfig const& base, std::vector<ParameterAxis> const& axes,
                            unsigned threads,
                            std::optional<std::filesystem::path> const& out_dir = {});

std::string sweep_csv(std::vector<ParameterAxis> const& axes,
                      std::vector<SweepRow> const& rows);

}  // namespace hmhf
