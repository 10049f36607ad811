#ifndef GPLOCALIZE_EXPERIMENT_HPP
#define GPLOCALIZE_EXPERIMENT_HPP

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "gplocalize/field.hpp"
#include "gplocalize/localizers.hpp"
#include "gplocalize/trajectory.hpp"

namespace gplocalize {

/// Everything a run needs. See README for the config file keys.
struct ExperimentConfig {
    Method method = Method::gp_localize;

    /// One entry per field. Synthesized fields share the grid below.
    std::vector<Hyperparams> hyperparams = {default_hyperparams()};
    int rows = 30;
    int cols = 30;
    double cell_size = 1.0;
    /// When non-empty, fields are read from these files instead of being
    /// synthesized; one file per entry of `hyperparams`.
    std::vector<std::string> field_csv;

    int tau = 10;
    int support_size = 40;
    int particle_count = 400;
    int sample_paths = 400;
    MotionNoise noise{0.002, 0.0005, 0.01, 0.002};
    double resample_fraction = 0.5;
    TrajectorySpec trajectory;
    /// Spread of the initial belief around the true start pose.
    double initial_sd = 0.0;
    double initial_heading_sd = 0.0;
    BaselineSizes baseline;

    int runs = 1;
    std::uint64_t seed = 1;
    bool record_timing = false;
    /// Leading steps dropped from timing series.
    int warmup_steps = 5;
    std::vector<Method> bench_methods = comparison_methods();

    static Hyperparams default_hyperparams();
    std::size_t field_count() const { return hyperparams.size(); }
    /// Seed of run `r`: seed + r.
    std::uint64_t run_seed(int r) const { return seed + static_cast<std::uint64_t>(r); }
    void validate() const;
};

/// Flat `key = value` text, one pair per line, `#` starts a comment.
/// Unknown keys, repeated keys and malformed values raise ParseError with
/// the offending line. Missing keys keep their defaults.
ExperimentConfig parse_experiment_config(const std::string& text);
ExperimentConfig load_experiment_config(const std::string& path);

/// Independent stream seed for one part of a run (field, trajectory, ...).
std::uint64_t derive_seed(std::uint64_t run_seed, std::uint64_t stream);

/// The world of one run, shared by every method run on that seed.
struct Scenario {
    std::uint64_t seed = 0;
    std::vector<FieldGrid> fields;
    std::vector<std::shared_ptr<const SupportModel>> models;
    Trajectory trajectory;
    /// Odometry as reported to the filter, one per true action.
    std::vector<OdometryAction> odometry;
    /// measurements[i] is taken at trajectory.poses[i], one value per field.
    std::vector<Eigen::VectorXd> measurements;
    std::uint64_t filter_seed = 0;
};

/// Fields for `run_seed`: synthesized, or loaded when field_csv is set.
std::vector<FieldGrid> make_fields(const ExperimentConfig& config, std::uint64_t run_seed);
Scenario build_scenario(const ExperimentConfig& config, std::uint64_t run_seed);
FilterConfig filter_config(const ExperimentConfig& config, const Scenario& scenario);

struct StepRecord {
    std::uint64_t t = 0;
    Pose true_pose;
    Pose estimate;
    /// Distance between true and estimated locations.
    double error = 0.0;
    double step_ms = 0.0;
    std::size_t state_bytes = 0;
};

struct RunResult {
    Method method = Method::gp_localize;
    std::uint64_t seed = 0;
    std::vector<StepRecord> records;
    double mean_error = 0.0;
};

/// Runs one method over a scenario. step_ms is 0 unless record_timing.
RunResult run_method(const ExperimentConfig& config, const Scenario& scenario, Method method);

/// config.method over config.runs seeds.
std::vector<RunResult> run_experiment(const ExperimentConfig& config);

/// Every method in `methods` on each run's shared scenario, run-major.
std::vector<RunResult> compare_methods(const ExperimentConfig& config, const std::vector<Method>& methods);

double mean_error(const std::vector<RunResult>& runs);

struct TimingSeries {
    Method method = Method::gp_localize;
    std::vector<std::uint64_t> t;
    std::vector<double> step_ms;
};

/// Per-step wall time of each of config.bench_methods on the first run's
/// scenario, with the first warmup_steps steps dropped.
std::vector<TimingSeries> benchmark_timing(const ExperimentConfig& config);

/// Columns t,true_x,true_y,true_heading,est_x,est_y,est_heading,error,step_ms,state_bytes
void save_report_csv(const std::vector<StepRecord>& records, const std::string& path);
std::string format_report_csv(const std::vector<StepRecord>& records);
std::vector<StepRecord> parse_report_csv(const std::string& text);
std::vector<StepRecord> load_report_csv(const std::string& path);

/// Columns method,t,step_ms
void save_timing_csv(const std::vector<TimingSeries>& series, const std::string& path);
/// Columns method,run,seed,mean_error
void save_summary_csv(const std::vector<RunResult>& runs, const std::string& path);

} // namespace gplocalize

#endif // GPLOCALIZE_EXPERIMENT_HPP
