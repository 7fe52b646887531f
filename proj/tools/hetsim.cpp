// hetsim: run the downlink simulator from the command line.
//
//   hetsim --preset fig-scheduling --seed 1 --out results/
//   hetsim --scenario assoc-pair --sweep price --threads 4
//   hetsim --scenario grid25 --scheduler rr --power equal --assoc default

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/core.h>
#include <fmt/ostream.h>

#include "hetnet/hetnet.hpp"

namespace fs = std::filesystem;
using namespace hetnet;

namespace {

struct Options {
    std::string preset;
    std::string scenario;
    std::string config;
    std::vector<std::uint64_t> seeds;
    std::optional<double> price;
    std::optional<double> distance;
    std::string sweep;
    std::vector<double> values;
    std::string out;
    std::string estimator, scheduler, power, assoc;
    std::optional<std::size_t> horizon;
    std::size_t threads = 1;
    bool events = false;
    bool per_run = false;
    std::string dump_gains;
    bool quiet = false;
};

std::string file_label(std::string s) {
    for (char& ch : s)
        if (ch == '/' || ch == ' ') ch = '-';
    return s;
}

std::ofstream open_output(const fs::path& path) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot write " + path.string());
    return os;
}

void close_output(std::ofstream& os, const fs::path& path) {
    os.close();
    if (!os) throw std::runtime_error("failed writing " + path.string());
}

Experiment build_experiment(const Options& o) {
    Experiment e;
    if (!o.preset.empty()) {
        e = preset(o.preset);
    } else {
        e.name = "run";
    }
    if (!o.config.empty()) {
        std::ifstream in(o.config);
        if (!in) throw std::runtime_error("cannot open config file: " + o.config);
        nlohmann::json j;
        try {
            in >> j;
        } catch (const nlohmann::json::parse_error& err) {
            throw std::invalid_argument("malformed config file " + o.config + ": " + err.what());
        }
        e.base = sim_config_from_json(j, e.base);
    }
    SimConfig& c = e.base;
    if (!o.scenario.empty()) c.scenario = o.scenario;
    if (o.price) c.price = *o.price;
    if (o.distance) c.scenario_params.station_distance_m = *o.distance;
    if (o.horizon) c.horizon_frames = *o.horizon;
    if (!o.estimator.empty()) c.estimator = parse_estimator(o.estimator);
    const bool policy_override = !o.scheduler.empty() || !o.power.empty() || !o.assoc.empty();
    if (!o.scheduler.empty()) c.scheduler = parse_scheduler(o.scheduler);
    if (!o.power.empty()) c.power = parse_power(o.power);
    if (!o.assoc.empty()) c.association = parse_association(o.assoc);
    if (e.name == "run") e.name = file_label(fs::path(c.scenario).stem().string());
    if (policy_override || e.policies.empty()) e.policies = {policy_of(c)};
    if (!o.sweep.empty()) {
        e.axis = parse_sweep_axis(o.sweep);
        e.values = default_sweep_values(e.axis, c.scenario);
    }
    if (!o.values.empty()) {
        if (e.axis == SweepAxis::none) throw std::invalid_argument("--values needs a sweep axis");
        e.values = o.values;
    }
    c.validate();
    return e;
}

std::string run_name(const Experiment& e, const RunSpec& spec, bool with_value) {
    std::string name = e.name;
    if (e.policies.size() > 1) name += "_" + file_label(spec.policy);
    if (with_value) name += fmt::format("_{}{}", to_string(e.axis), format_number(spec.value));
    return name + fmt::format("_seed{}", spec.config.seed);
}

int run_cli(const Options& o) {
    const Experiment e = build_experiment(o);
    const std::vector<std::uint64_t> seeds = o.seeds.empty() ? std::vector<std::uint64_t>{e.base.seed} : o.seeds;

    std::string out = o.out;
    if (out.empty()) {
        const char* env = std::getenv("HETSIM_OUT");
        out = env && *env ? env : "hetsim-out";
    }
    const fs::path dir(out);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) throw std::runtime_error("cannot create output directory " + out);

    if (!o.dump_gains.empty()) {
        SimConfig c = e.base;
        c.seed = seeds.front();
        const Simulation sim(make_scenario(c), c);
        const fs::path path = dir / o.dump_gains;
        auto os = open_output(path);
        sim.gains().write_csv(os);
        close_output(os, path);
    }

    const auto specs = expand(e, seeds);
    const auto results = run_all(specs, o.threads);

    const bool sweep = e.axis != SweepAxis::none;
    for (std::size_t k = 0; k < specs.size(); ++k) {
        const auto& spec = specs[k];
        const auto& r = results[k];
        if (!sweep || o.per_run) {
            const std::string name = run_name(e, spec, sweep);
            const fs::path path = dir / (name + ".csv");
            auto os = open_output(path);
            write_metrics_csv(os, r.series);
            close_output(os, path);
            if (o.events) {
                const fs::path epath = dir / (name + "_events.csv");
                auto es = open_output(epath);
                write_events_csv(es, r.events);
                close_output(es, epath);
            }
        }
        if (!o.quiet) {
            const auto& m = final_metrics(r);
            std::string where = sweep ? fmt::format(" {}={}", to_string(e.axis), format_number(spec.value)) : "";
            fmt::print("{}{} seed={}: objective={} weighted_throughput={} kbit/s power={} W efficiency={} kbit/s/W "
                       "active={}\n",
                       spec.policy, where, spec.config.seed, format_number(m.objective),
                       format_number(m.weighted_throughput), format_number(m.total_power_w),
                       format_number(m.energy_efficiency), m.active_stations);
        }
    }
    if (sweep) {
        const fs::path path = dir / fmt::format("{}_{}.csv", e.name, to_string(e.axis));
        auto os = open_output(path);
        write_sweep_csv(os, sweep_rows(e, specs, results));
        close_output(os, path);
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Heterogeneous OFDMA downlink simulator"};
    app.failure_message(CLI::FailureMessage::help);
    Options o;
    std::vector<std::string> presets(preset_names().begin(), preset_names().end());

    app.add_option("--preset", o.preset, "Figure preset")->check(CLI::IsMember(presets));
    app.add_option("--scenario", o.scenario, "Built-in scenario (grid25, power-pair, assoc-pair, large) or a .json file");
    app.add_option("--config", o.config, "SimConfig JSON file; flags override it")->check(CLI::ExistingFile);
    app.add_option("--seed,--seeds", o.seeds, "Seed(s); comma-separated or repeated")->delimiter(',');
    app.add_option("--price", o.price, "Energy price for every station")->check(CLI::NonNegativeNumber);
    app.add_option("--distance", o.distance, "power-pair inter-station distance, m")->check(CLI::PositiveNumber);
    app.add_option("--sweep", o.sweep, "Sweep axis")->check(CLI::IsMember({"price", "distance", "none"}));
    app.add_option("--values", o.values, "Sweep points (default per scenario)")->delimiter(',');
    app.add_option("--out", o.out, "Output directory (default $HETSIM_OUT, else ./hetsim-out)");
    app.add_option("--estimator", o.estimator, "Association estimator")->check(CLI::IsMember({"ae", "es"}));
    app.add_option("--scheduler", o.scheduler, "Scheduler")->check(CLI::IsMember({"pf-fast", "pf-slow", "rr"}));
    app.add_option("--power", o.power, "Power policy")->check(CLI::IsMember({"gradient", "equal"}));
    app.add_option("--assoc", o.assoc, "Association policy")->check(CLI::IsMember({"proposed", "default", "son-zhou"}));
    app.add_option("--horizon", o.horizon, "Frames per run");
    app.add_option("--threads", o.threads, "Worker threads for sweeps")->check(CLI::PositiveNumber);
    app.add_flag("--events", o.events, "Also write an events CSV per run");
    app.add_flag("--per-run", o.per_run, "With a sweep, also write each run's metrics CSV");
    app.add_option("--dump-gains", o.dump_gains, "Write the static channel gains to this file in the output directory");
    app.add_flag("-q,--quiet", o.quiet, "No summary lines");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& err) {
        return app.exit(err);
    }
    try {
        return run_cli(o);
    } catch (const std::exception& err) {
        fmt::print(std::cerr, "hetsim: error: {}\n", err.what());
        return 1;
    }
}
