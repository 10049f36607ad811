#include "gplocalize/experiment.hpp"

#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <random>
#include <sstream>
#include <stdexcept>

#include "gplocalize/errors.hpp"
#include "gplocalize/support_selection.hpp"

namespace gplocalize {

namespace {

constexpr std::uint64_t kTrajectoryStream = 1;
constexpr std::uint64_t kOdometryStream = 2;
constexpr std::uint64_t kMeasurementStream = 3;
constexpr std::uint64_t kFilterStream = 4;
constexpr std::uint64_t kFieldStream = 1000;

const char* const kReportHeader = "t,true_x,true_y,true_heading,est_x,est_y,est_heading,error,step_ms,state_bytes";

void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << text;
    if (!out) throw std::runtime_error("failed writing " + path);
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::invalid_argument("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

template <typename T>
T parse_cell(const std::string& s, std::size_t line) {
    T v{};
    const char* end = s.data() + s.size();
    const auto res = std::from_chars(s.data(), end, v);
    if (s.empty() || res.ec != std::errc() || res.ptr != end)
        throw ParseError("malformed value '" + s + "'", line);
    if constexpr (std::is_floating_point_v<T>) {
        if (!std::isfinite(v)) throw ParseError("non-finite value '" + s + "'", line);
    }
    return v;
}

} // namespace

std::uint64_t derive_seed(std::uint64_t run_seed, std::uint64_t stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(run_seed), static_cast<std::uint32_t>(run_seed >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
    std::uint32_t words[2];
    seq.generate(words, words + 2);
    return (static_cast<std::uint64_t>(words[0]) << 32) | words[1];
}

std::vector<FieldGrid> make_fields(const ExperimentConfig& config, std::uint64_t run_seed) {
    config.validate();
    std::vector<FieldGrid> fields;
    for (std::size_t m = 0; m < config.field_count(); ++m) {
        if (!config.field_csv.empty()) {
            fields.push_back(load_field_csv(config.field_csv[m]));
            continue;
        }
        const Hyperparams& h = config.hyperparams[m];
        fields.push_back(synthesize_field(config.rows, config.cols, h, derive_seed(run_seed, kFieldStream + m),
                                          Eigen::Vector2d::Zero(), Eigen::Vector2d::Constant(config.cell_size),
                                          std::sqrt(h.noise_var)));
    }
    return fields;
}

Scenario build_scenario(const ExperimentConfig& config, std::uint64_t run_seed) {
    Scenario s;
    s.seed = run_seed;
    s.fields = make_fields(config, run_seed);
    const Eigen::Vector2d lower = s.fields.front().lower();
    const Eigen::Vector2d upper = s.fields.front().upper();
    for (const auto& f : s.fields) {
        if ((f.lower() - lower).cwiseAbs().maxCoeff() > 1e-12 || (f.upper() - upper).cwiseAbs().maxCoeff() > 1e-12)
            throw std::invalid_argument("all fields must cover the same area");
    }
    for (std::size_t m = 0; m < s.fields.size(); ++m) {
        const auto candidates = s.fields[m].cell_centers();
        const Hyperparams& h = config.hyperparams[m];
        s.models.push_back(std::make_shared<const SupportModel>(
            select_support_set(candidates, config.support_size, h), h));
    }

    s.trajectory = generate_trajectory(config.trajectory, lower, upper, derive_seed(run_seed, kTrajectoryStream));

    Rng odometry_rng(derive_seed(run_seed, kOdometryStream));
    for (const auto& u : s.trajectory.actions) s.odometry.push_back(perturb_action(u, config.noise, odometry_rng));

    Rng measurement_rng(derive_seed(run_seed, kMeasurementStream));
    for (const auto& pose : s.trajectory.poses) {
        Eigen::VectorXd z(static_cast<Eigen::Index>(s.fields.size()));
        for (std::size_t m = 0; m < s.fields.size(); ++m)
            z(static_cast<Eigen::Index>(m)) = field_measure(s.fields[m], pose.location, measurement_rng);
        s.measurements.push_back(z);
    }
    s.filter_seed = derive_seed(run_seed, kFilterStream);
    return s;
}

FilterConfig filter_config(const ExperimentConfig& config, const Scenario& scenario) {
    FilterConfig fc;
    fc.fields = scenario.models;
    fc.tau = config.tau;
    fc.particle_count = config.particle_count;
    fc.sample_path_count = config.sample_paths;
    fc.noise = config.noise;
    fc.resample_fraction = config.resample_fraction;
    fc.initial.kind = InitialBelief::Kind::gaussian;
    fc.initial.start = scenario.trajectory.start;
    fc.initial.location_sd = config.initial_sd;
    fc.initial.heading_sd = config.initial_heading_sd;
    return fc;
}

RunResult run_method(const ExperimentConfig& config, const Scenario& scenario, Method method) {
    using clock = std::chrono::steady_clock;
    RunResult result;
    result.method = method;
    result.seed = scenario.seed;

    Rng rng(scenario.filter_seed);
    auto localizer = make_localizer(method, filter_config(config, scenario), config.baseline, rng);
    double total = 0.0;
    for (std::size_t i = 0; i < scenario.odometry.size(); ++i) {
        const auto start = clock::now();
        localizer->step(scenario.odometry[i], scenario.measurements[i], rng);
        const auto stop = clock::now();

        StepRecord rec;
        rec.t = i + 1;
        rec.true_pose = scenario.trajectory.poses[i];
        rec.estimate = localizer->estimate();
        rec.error = (rec.true_pose.location - rec.estimate.location).norm();
        if (config.record_timing) rec.step_ms = std::chrono::duration<double, std::milli>(stop - start).count();
        rec.state_bytes = localizer->state_bytes();
        total += rec.error;
        result.records.push_back(rec);
    }
    result.mean_error = result.records.empty() ? 0.0 : total / static_cast<double>(result.records.size());
    return result;
}

std::vector<RunResult> run_experiment(const ExperimentConfig& config) {
    return compare_methods(config, {config.method});
}

std::vector<RunResult> compare_methods(const ExperimentConfig& config, const std::vector<Method>& methods) {
    config.validate();
    std::vector<RunResult> out;
    for (int r = 0; r < config.runs; ++r) {
        const Scenario scenario = build_scenario(config, config.run_seed(r));
        for (Method m : methods) out.push_back(run_method(config, scenario, m));
    }
    return out;
}

double mean_error(const std::vector<RunResult>& runs) {
    if (runs.empty()) return 0.0;
    double sum = 0.0;
    for (const auto& r : runs) sum += r.mean_error;
    return sum / static_cast<double>(runs.size());
}

std::vector<TimingSeries> benchmark_timing(const ExperimentConfig& config) {
    ExperimentConfig timed = config;
    timed.record_timing = true;
    timed.validate();
    const Scenario scenario = build_scenario(timed, timed.run_seed(0));
    std::vector<TimingSeries> out;
    for (Method m : timed.bench_methods) {
        const RunResult run = run_method(timed, scenario, m);
        TimingSeries series;
        series.method = m;
        for (const auto& rec : run.records) {
            if (rec.t <= static_cast<std::uint64_t>(timed.warmup_steps)) continue;
            series.t.push_back(rec.t);
            series.step_ms.push_back(rec.step_ms);
        }
        out.push_back(std::move(series));
    }
    return out;
}

std::string format_report_csv(const std::vector<StepRecord>& records) {
    std::ostringstream out;
    out << kReportHeader << '\n';
    for (const auto& r : records) {
        out << r.t << ',' << format_double(r.true_pose.location.x()) << ','
            << format_double(r.true_pose.location.y()) << ',' << format_double(r.true_pose.heading) << ','
            << format_double(r.estimate.location.x()) << ',' << format_double(r.estimate.location.y()) << ','
            << format_double(r.estimate.heading) << ',' << format_double(r.error) << ','
            << format_double(r.step_ms) << ',' << r.state_bytes << '\n';
    }
    return out.str();
}

void save_report_csv(const std::vector<StepRecord>& records, const std::string& path) {
    write_file(path, format_report_csv(records));
}

std::vector<StepRecord> parse_report_csv(const std::string& text) {
    std::istringstream in(text);
    std::string raw;
    std::size_t line = 0;
    bool header = false;
    std::vector<StepRecord> out;
    while (std::getline(in, raw)) {
        ++line;
        if (!raw.empty() && raw.back() == '\r') raw.pop_back();
        if (raw.empty()) continue;
        if (!header) {
            if (raw != kReportHeader) throw ParseError(std::string("report header must be ") + kReportHeader, line);
            header = true;
            continue;
        }
        std::vector<std::string> cells;
        std::string cell;
        std::istringstream row(raw);
        while (std::getline(row, cell, ',')) cells.push_back(cell);
        if (raw.back() == ',') cells.emplace_back();
        if (cells.size() != 10)
            throw ParseError("expected 10 columns, found " + std::to_string(cells.size()), line);
        StepRecord r;
        r.t = parse_cell<std::uint64_t>(cells[0], line);
        r.true_pose.location = Eigen::Vector2d(parse_cell<double>(cells[1], line), parse_cell<double>(cells[2], line));
        r.true_pose.heading = parse_cell<double>(cells[3], line);
        r.estimate.location = Eigen::Vector2d(parse_cell<double>(cells[4], line), parse_cell<double>(cells[5], line));
        r.estimate.heading = parse_cell<double>(cells[6], line);
        r.error = parse_cell<double>(cells[7], line);
        r.step_ms = parse_cell<double>(cells[8], line);
        r.state_bytes = parse_cell<std::size_t>(cells[9], line);
        if (r.error < 0.0) throw ParseError("error must be >= 0", line);
        out.push_back(r);
    }
    if (!header) throw ParseError("empty report", line + 1);
    return out;
}

std::vector<StepRecord> load_report_csv(const std::string& path) { return parse_report_csv(read_file(path)); }

void save_timing_csv(const std::vector<TimingSeries>& series, const std::string& path) {
    std::ostringstream out;
    out << "method,t,step_ms\n";
    for (const auto& s : series)
        for (std::size_t i = 0; i < s.t.size(); ++i)
            out << method_name(s.method) << ',' << s.t[i] << ',' << format_double(s.step_ms[i]) << '\n';
    write_file(path, out.str());
}

void save_summary_csv(const std::vector<RunResult>& runs, const std::string& path) {
    std::ostringstream out;
    out << "method,run,seed,mean_error\n";
    // runs arrive run-major; number them per method
    std::map<Method, int> counter;
    for (const auto& r : runs)
        out << method_name(r.method) << ',' << counter[r.method]++ << ',' << r.seed << ','
            << format_double(r.mean_error) << '\n';
    write_file(path, out.str());
}

} // namespace gplocalize
