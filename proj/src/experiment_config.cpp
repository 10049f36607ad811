#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "gplocalize/errors.hpp"
#include "gplocalize/experiment.hpp"

namespace gplocalize {

namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream in(s);
    while (std::getline(in, item, sep)) out.push_back(trim(item));
    if (!s.empty() && s.back() == sep) out.emplace_back();
    return out;
}

struct Entry {
    std::string value;
    std::size_t line;
};

class Reader {
public:
    explicit Reader(std::map<std::string, Entry> entries) : entries_(std::move(entries)) {}

    bool has(const std::string& key) const { return entries_.count(key) > 0; }
    std::size_t line(const std::string& key) const { return entries_.at(key).line; }
    const std::string& raw(const std::string& key) const { return entries_.at(key).value; }

    double number(const std::string& key, double fallback) const {
        return has(key) ? to_number(raw(key), line(key)) : fallback;
    }
    long integer(const std::string& key, long fallback) const {
        return has(key) ? to_integer(raw(key), line(key)) : fallback;
    }
    std::vector<double> numbers(const std::string& key) const {
        std::vector<double> out;
        for (const auto& item : split(raw(key), ',')) out.push_back(to_number(item, line(key)));
        return out;
    }

    static double to_number(const std::string& s, std::size_t line) {
        double v = 0.0;
        const char* end = s.data() + s.size();
        const auto res = std::from_chars(s.data(), end, v);
        if (s.empty() || res.ec != std::errc() || res.ptr != end || !std::isfinite(v))
            throw ParseError("'" + s + "' is not a finite number", line);
        return v;
    }
    static long to_integer(const std::string& s, std::size_t line) {
        long v = 0;
        const char* end = s.data() + s.size();
        const auto res = std::from_chars(s.data(), end, v);
        if (s.empty() || res.ec != std::errc() || res.ptr != end)
            throw ParseError("'" + s + "' is not an integer", line);
        return v;
    }

private:
    std::map<std::string, Entry> entries_;
};

const char* const kKeys[] = {
    "method",       "fields",         "signal_var",        "length_scale",   "prior_mean",
    "noise_sd",     "rows",           "cols",              "cell_size",      "field_csv",
    "tau",          "support_size",   "particle_count",    "sample_paths",   "alphas",
    "resample_fraction", "trajectory", "steps",            "step_length",    "lane_spacing",
    "margin",       "turn_sd",        "waypoints",         "start_heading",  "initial_sd",
    "initial_heading_sd", "sod_truncate_size", "sod_even_size", "runs",      "seed",
    "record_timing", "warmup_steps",  "bench_methods",
};

bool known_key(const std::string& key) {
    for (const char* k : kKeys)
        if (key == k) return true;
    return false;
}

// Broadcasts a one-value list to every field.
std::vector<double> per_field(const Reader& r, const std::string& key, std::size_t fields, double fallback) {
    if (!r.has(key)) return std::vector<double>(fields, fallback);
    auto v = r.numbers(key);
    if (v.size() == 1) return std::vector<double>(fields, v[0]);
    if (v.size() != fields) {
        throw ParseError(key + " lists " + std::to_string(v.size()) + " values for " +
                             std::to_string(fields) + " fields",
                         r.line(key));
    }
    return v;
}

} // namespace

Hyperparams ExperimentConfig::default_hyperparams() {
    Hyperparams h;
    h.signal_var = 1.0;
    h.noise_var = 0.01;
    h.length_scales = Eigen::Vector2d(4.0, 4.0);
    h.prior_mean = 0.0;
    return h;
}

void ExperimentConfig::validate() const {
    if (hyperparams.empty()) throw std::invalid_argument("config: at least one field is required");
    for (const auto& h : hyperparams) {
        h.validate();
        if (h.dim() != 2) throw std::invalid_argument("config: fields are two-dimensional");
    }
    if (!field_csv.empty() && field_csv.size() != hyperparams.size())
        throw std::invalid_argument("config: one field_csv entry per field is required");
    if (rows < 1 || cols < 1) throw std::invalid_argument("config: rows and cols must be positive");
    if (!(cell_size > 0.0)) throw std::invalid_argument("config: cell_size must be positive");
    if (tau < 1) throw std::invalid_argument("config: tau must be >= 1");
    if (support_size < 1) throw std::invalid_argument("config: support_size must be >= 1");
    if (particle_count < 1) throw std::invalid_argument("config: particle_count must be >= 1");
    if (sample_paths < 1) throw std::invalid_argument("config: sample_paths must be >= 1");
    noise.validate();
    if (!(resample_fraction >= 0.0 && resample_fraction <= 1.0))
        throw std::invalid_argument("config: resample_fraction must lie in [0, 1]");
    trajectory.validate();
    if (!(initial_sd >= 0.0) || !(initial_heading_sd >= 0.0))
        throw std::invalid_argument("config: initial spreads must be >= 0");
    if (baseline.truncate < 1 || baseline.even < 1)
        throw std::invalid_argument("config: baseline subset sizes must be >= 1");
    if (runs < 1) throw std::invalid_argument("config: runs must be >= 1");
    if (warmup_steps < 0) throw std::invalid_argument("config: warmup_steps must be >= 0");
    if (bench_methods.empty()) throw std::invalid_argument("config: bench_methods is empty");
}

ExperimentConfig parse_experiment_config(const std::string& text) {
    std::map<std::string, Entry> entries;
    std::istringstream in(text);
    std::string raw;
    std::size_t line = 0;
    while (std::getline(in, raw)) {
        ++line;
        if (const auto hash = raw.find('#'); hash != std::string::npos) raw.erase(hash);
        const std::string s = trim(raw);
        if (s.empty()) continue;
        const auto eq = s.find('=');
        if (eq == std::string::npos) throw ParseError("expected 'key = value'", line);
        const std::string key = trim(std::string_view(s).substr(0, eq));
        const std::string value = trim(std::string_view(s).substr(eq + 1));
        if (!known_key(key)) throw ParseError("unknown key '" + key + "'", line);
        if (entries.count(key)) throw ParseError("key '" + key + "' given twice", line);
        if (value.empty()) throw ParseError("key '" + key + "' has no value", line);
        entries.emplace(key, Entry{value, line});
    }
    const Reader r(std::move(entries));

    ExperimentConfig c;
    auto wrap = [&](const std::string& key, auto&& fn) {
        try {
            fn();
        } catch (const std::invalid_argument& e) {
            throw ParseError(e.what(), r.line(key));
        }
    };
    if (r.has("method")) wrap("method", [&] { c.method = parse_method(r.raw("method")); });

    if (r.has("field_csv")) c.field_csv = split(r.raw("field_csv"), ',');
    std::size_t fields = 1;
    if (r.has("fields")) {
        const long n = r.integer("fields", 1);
        if (n < 1) throw ParseError("fields must be >= 1", r.line("fields"));
        fields = static_cast<std::size_t>(n);
    } else if (!c.field_csv.empty()) {
        fields = c.field_csv.size();
    }
    const Hyperparams base = ExperimentConfig::default_hyperparams();
    const auto signal = per_field(r, "signal_var", fields, base.signal_var);
    const auto length = per_field(r, "length_scale", fields, base.length_scales(0));
    const auto mean = per_field(r, "prior_mean", fields, base.prior_mean);
    const auto noise = per_field(r, "noise_sd", fields, std::sqrt(base.noise_var));
    c.hyperparams.clear();
    for (std::size_t m = 0; m < fields; ++m) {
        Hyperparams h;
        h.signal_var = signal[m];
        h.length_scales = Eigen::Vector2d(length[m], length[m]);
        h.prior_mean = mean[m];
        h.noise_var = noise[m] * noise[m];
        if (noise[m] < 0.0) throw ParseError("noise_sd must be >= 0", r.line("noise_sd"));
        c.hyperparams.push_back(h);
    }

    c.rows = static_cast<int>(r.integer("rows", c.rows));
    c.cols = static_cast<int>(r.integer("cols", c.cols));
    c.cell_size = r.number("cell_size", c.cell_size);
    c.tau = static_cast<int>(r.integer("tau", c.tau));
    c.support_size = static_cast<int>(r.integer("support_size", c.support_size));
    c.particle_count = static_cast<int>(r.integer("particle_count", c.particle_count));
    c.sample_paths = static_cast<int>(r.integer("sample_paths", c.sample_paths));
    if (r.has("alphas")) {
        const auto a = r.numbers("alphas");
        if (a.size() != 4) throw ParseError("alphas needs 4 values", r.line("alphas"));
        c.noise = MotionNoise{a[0], a[1], a[2], a[3]};
    }
    c.resample_fraction = r.number("resample_fraction", c.resample_fraction);

    auto& tr = c.trajectory;
    if (r.has("trajectory")) {
        const std::string& kind = r.raw("trajectory");
        if (kind == "lawnmower") tr.kind = TrajectorySpec::Kind::lawnmower;
        else if (kind == "random-walk") tr.kind = TrajectorySpec::Kind::random_walk;
        else if (kind == "waypoints") tr.kind = TrajectorySpec::Kind::waypoints;
        else throw ParseError("trajectory must be lawnmower, random-walk or waypoints", r.line("trajectory"));
    }
    tr.steps = static_cast<int>(r.integer("steps", tr.steps));
    tr.step_length = r.number("step_length", tr.step_length);
    tr.lane_spacing = r.number("lane_spacing", tr.lane_spacing);
    tr.margin = r.number("margin", tr.margin);
    tr.turn_sd = r.number("turn_sd", tr.turn_sd);
    tr.start_heading = r.number("start_heading", tr.start_heading);
    if (r.has("waypoints")) {
        for (const auto& pair : split(r.raw("waypoints"), ';')) {
            std::istringstream xy(pair);
            std::string x, y, extra;
            if (!(xy >> x >> y) || (xy >> extra))
                throw ParseError("waypoints are 'x y' pairs separated by ';'", r.line("waypoints"));
            tr.waypoints.emplace_back(Reader::to_number(x, r.line("waypoints")),
                                      Reader::to_number(y, r.line("waypoints")));
        }
    }
    if (tr.kind == TrajectorySpec::Kind::waypoints && tr.waypoints.empty())
        throw ParseError("trajectory = waypoints needs a waypoints key", r.has("trajectory") ? r.line("trajectory") : 0);

    c.initial_sd = r.number("initial_sd", c.initial_sd);
    c.initial_heading_sd = r.number("initial_heading_sd", c.initial_heading_sd);
    c.baseline.truncate = static_cast<int>(r.integer("sod_truncate_size", c.baseline.truncate));
    c.baseline.even = static_cast<int>(r.integer("sod_even_size", c.baseline.even));
    c.runs = static_cast<int>(r.integer("runs", c.runs));
    if (r.has("seed")) {
        const long s = r.integer("seed", 0);
        if (s < 0) throw ParseError("seed must be >= 0", r.line("seed"));
        c.seed = static_cast<std::uint64_t>(s);
    }
    if (r.has("record_timing")) {
        const std::string& v = r.raw("record_timing");
        if (v == "true") c.record_timing = true;
        else if (v == "false") c.record_timing = false;
        else throw ParseError("record_timing must be true or false", r.line("record_timing"));
    }
    c.warmup_steps = static_cast<int>(r.integer("warmup_steps", c.warmup_steps));
    if (r.has("bench_methods")) {
        c.bench_methods.clear();
        for (const auto& name : split(r.raw("bench_methods"), ','))
            wrap("bench_methods", [&] { c.bench_methods.push_back(parse_method(name)); });
    }

    try {
        c.validate();
    } catch (const std::invalid_argument& e) {
        throw ParseError(e.what(), 0);
    }
    return c;
}

ExperimentConfig load_experiment_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open config file " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_experiment_config(ss.str());
}

} // namespace gplocalize
