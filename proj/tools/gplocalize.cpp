#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "gplocalize/errors.hpp"
#include "gplocalize/experiment.hpp"
#include "gplocalize/support_selection.hpp"

using namespace gplocalize;

namespace {

constexpr int kConfigError = 2;
constexpr int kNumericalError = 3;

struct Options {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> method;
    std::string out;
};

ExperimentConfig load(const Options& o) {
    ExperimentConfig c = o.config.empty() ? ExperimentConfig{} : load_experiment_config(o.config);
    if (o.seed) c.seed = *o.seed;
    if (o.method) c.method = parse_method(*o.method);
    c.validate();
    return c;
}

// out.csv -> out_<tag>.csv
std::string tagged_path(const std::string& path, const std::string& tag) {
    std::filesystem::path p(path);
    const std::string stem = p.stem().string() + "_" + tag;
    return (p.parent_path() / (stem + p.extension().string())).string();
}

void print_runs(const std::vector<RunResult>& runs) {
    for (const auto& r : runs)
        std::printf("%-15s seed %-20llu mean error %.6f\n", method_name(r.method).c_str(),
                    static_cast<unsigned long long>(r.seed), r.mean_error);
}

int cmd_synth(const Options& o) {
    const auto config = load(o);
    const auto fields = make_fields(config, config.run_seed(0));
    for (std::size_t m = 0; m < fields.size(); ++m) {
        const std::string path = fields.size() == 1 ? o.out : tagged_path(o.out, "field" + std::to_string(m));
        save_field_csv(fields[m], path);
        std::printf("wrote %s (%lldx%lld)\n", path.c_str(), static_cast<long long>(fields[m].rows()),
                    static_cast<long long>(fields[m].cols()));
    }
    return 0;
}

int cmd_select_support(const Options& o) {
    const auto config = load(o);
    const auto fields = make_fields(config, config.run_seed(0));
    std::ofstream out(o.out);
    if (!out) throw std::runtime_error("cannot write " + o.out);
    out << "field,rank,index,x,y\n";
    for (std::size_t m = 0; m < fields.size(); ++m) {
        const auto candidates = fields[m].cell_centers();
        const auto picks = greedy_support_indices(candidates, config.support_size, config.hyperparams[m]);
        for (std::size_t k = 0; k < picks.size(); ++k) {
            const auto& x = candidates[picks[k]];
            out << m << ',' << k << ',' << picks[k] << ',' << format_double(x(0)) << ','
                << format_double(x(1)) << '\n';
        }
    }
    std::printf("wrote %s\n", o.out.c_str());
    return 0;
}

int cmd_localize(const Options& o) {
    const auto config = load(o);
    const auto runs = run_experiment(config);
    for (std::size_t r = 0; r < runs.size(); ++r) {
        if (o.out.empty()) continue;
        const std::string path = runs.size() == 1 ? o.out : tagged_path(o.out, "run" + std::to_string(r));
        save_report_csv(runs[r].records, path);
    }
    print_runs(runs);
    std::printf("%-15s overall mean error %.6f\n", method_name(config.method).c_str(), mean_error(runs));
    return 0;
}

int cmd_compare(const Options& o) {
    const auto config = load(o);
    const auto runs = compare_methods(config, comparison_methods());
    if (!o.out.empty()) save_summary_csv(runs, o.out);
    print_runs(runs);
    for (Method m : comparison_methods()) {
        std::vector<RunResult> mine;
        for (const auto& r : runs)
            if (r.method == m) mine.push_back(r);
        std::printf("%-15s overall mean error %.6f\n", method_name(m).c_str(), mean_error(mine));
    }
    return 0;
}

int cmd_bench(const Options& o) {
    const auto config = load(o);
    const auto series = benchmark_timing(config);
    if (!o.out.empty()) save_timing_csv(series, o.out);
    for (const auto& s : series) {
        double total = 0.0;
        for (double ms : s.step_ms) total += ms;
        std::printf("%-15s %zu steps, mean %.3f ms/step\n", method_name(s.method).c_str(), s.step_ms.size(),
                    s.step_ms.empty() ? 0.0 : total / static_cast<double>(s.step_ms.size()));
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Localization with online sparse Gaussian process field models"};
    app.require_subcommand(1);
    Options o;

    auto add_common = [&](CLI::App* sub, bool out_required) {
        sub->add_option("--config", o.config, "Experiment config file (key = value)")->check(CLI::ExistingFile);
        sub->add_option("--seed", o.seed, "Base seed, overrides the config");
        auto* out = sub->add_option("--out", o.out, "Output file");
        if (out_required) out->required();
    };
    auto* synth = app.add_subcommand("synth", "Synthesize the field grid(s) of the first run");
    add_common(synth, true);
    auto* support = app.add_subcommand("select-support", "Greedy support set over the grid cell centers");
    add_common(support, true);
    auto* localize = app.add_subcommand("localize", "Run one method; writes the per-step report");
    add_common(localize, false);
    localize->add_option("--method", o.method, "gp-localize, sod-truncate, sod-even, full-gp, offline-pitc or dead-reckoning");
    auto* compare = app.add_subcommand("compare", "Run every method on shared seeds; writes a summary");
    add_common(compare, false);
    auto* bench = app.add_subcommand("bench", "Per-step timing series of the bench methods");
    add_common(bench, false);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kConfigError;
    }

    try {
        if (*synth) return cmd_synth(o);
        if (*support) return cmd_select_support(o);
        if (*localize) return cmd_localize(o);
        if (*compare) return cmd_compare(o);
        if (*bench) return cmd_bench(o);
    } catch (const ParseError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kConfigError;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kConfigError;
    } catch (const IllConditionedError& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return kNumericalError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
