// platguard: simulate, run, bench, evaluate and verify from the command line.
//
// Exit codes: 0 success, 1 runtime error, 2 invalid arguments or
// configuration, 3 acceptance-check failure (verify).

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "platguard/platguard.hpp"
#include "platguard/verification/acceptance.hpp"

namespace fs = std::filesystem;
using namespace platguard;

namespace {

enum ExitCode : int { kOk = 0, kRuntime = 1, kInvalid = 2, kVerifyFailed = 3 };

/// Thrown for anything that maps to exit code 2.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void log(const std::string& msg) { std::cerr << "platguard: " << msg << '\n'; }

nlohmann::json read_json_file(const fs::path& p) {
    std::ifstream in(p);
    if (!in) throw IoError("cannot open '" + p.string() + "'");
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("'" + p.string() + "': " + e.what());
    }
}

std::ofstream open_out(const fs::path& p) {
    std::ofstream out(p, std::ios::trunc);
    if (!out) throw IoError("cannot open '" + p.string() + "' for writing");
    return out;
}

PipelineConfig load_config(const fs::path& p) {
    try {
        return pipeline_config_from_json(read_json_file(p));
    } catch (const ConfigError& e) {
        throw UsageError(e.what());
    } catch (const FormatError& e) {
        throw UsageError(e.what());
    }
}

/// Validates config against the stream's class count and strides.
void check_config_against_stream(const PipelineConfig& c, const TensorStreamHeader& h) {
    try {
        c.validate(h.num_classes);
    } catch (const ConfigError& e) {
        throw UsageError(e.what());
    }
    if (c.decode.strides != h.strides) throw UsageError("decode.strides differ from the tensor stream's strides");
}

// ---------------------------------------------------------------------------

struct SimulateArgs {
    std::string scenario;
    std::string spec_file;
    std::string out_tensors;
    std::string out_gt;
    std::string out_config;
};

int cmd_simulate(const SimulateArgs& a) {
    ScenarioSpec spec;
    if (!a.spec_file.empty()) {
        try {
            spec = scenario_from_json(read_json_file(a.spec_file));
        } catch (const SpecError& e) {
            throw UsageError(e.what());
        } catch (const FormatError& e) {
            throw UsageError(e.what());
        }
    } else {
        const auto catalog = builtin_scenarios();
        const auto it = catalog.find(a.scenario);
        if (it == catalog.end()) {
            std::string names;
            for (const auto& [name, _] : catalog) names += " " + name;
            throw UsageError("unknown scenario '" + a.scenario + "'; built-in:" + names);
        }
        spec = it->second;
    }

    const auto config = builtin_pipeline_config();
    std::vector<GroundTruthFrame> truth;
    std::pair<TensorStreamHeader, std::vector<RawTensorSet>> rendered;
    try {
        truth = generate_scenario(spec);
        rendered = render_scenario(spec, truth, config.decode);
    } catch (const SpecError& e) {
        throw UsageError(e.what());
    } catch (const EncodingCollisionError& e) {
        throw UsageError(e.what());
    }

    const auto n = write_tensor_stream(a.out_tensors, rendered.first, rendered.second);
    open_out(a.out_gt) << ground_truth_to_json(spec, truth).dump(1) << '\n';
    if (!a.out_config.empty()) open_out(a.out_config) << to_json(config).dump(2) << '\n';
    log("scenario '" + spec.name + "': wrote " + std::to_string(n) + " frames to " + a.out_tensors);
    return kOk;
}

// ---------------------------------------------------------------------------

struct RunArgs {
    std::string tensors, config, alerts_out, results_out, transitions_out;
};

int cmd_run(const RunArgs& a) {
    const auto config = load_config(a.config);
    PlaybackBackend backend(a.tensors, 1);
    check_config_against_stream(config, backend.geometry());

    auto alerts = open_out(a.alerts_out);
    auto results = open_out(a.results_out);
    std::optional<std::ofstream> transitions;
    if (!a.transitions_out.empty()) transitions = open_out(a.transitions_out);
    JsonlSink sink(&alerts, &results, transitions ? &*transitions : nullptr);

    const auto s = run_pipeline(backend, config, sink);
    alerts.flush();
    results.flush();
    nlohmann::json summary = {{"frames", s.frames}, {"alerts", s.alerts}, {"errors", s.errors}, {"aborted", s.aborted}};
    if (!s.abort_reason.empty()) summary["abort_reason"] = s.abort_reason;
    std::cout << summary.dump() << '\n';
    if (s.aborted || !alerts || !results) {
        log("run aborted: " + s.abort_reason);
        return kRuntime;
    }
    return kOk;
}

// ---------------------------------------------------------------------------

struct BenchArgs {
    std::string tensors, config, out_csv, summary_out, gt;
    double power_w = 0;
    int warmup = 1;
    std::uint32_t loops = 1;
    double delay_ms = 0;
    double iou = 0.5;
    int class_id = -1;
    std::optional<double> accuracy_pct;
    std::optional<double> latency_ms;
};

int cmd_bench(const BenchArgs& a) {
    if (!(a.power_w > 0)) throw UsageError("--power-w must be positive");
    if (a.warmup < 0) throw UsageError("--warmup must be non-negative");
    if (a.latency_ms && !(*a.latency_ms > 0)) throw UsageError("--latency-ms must be positive");
    const auto config = load_config(a.config);
    PlaybackBackend backend(a.tensors, a.loops, std::chrono::duration<double, std::milli>(a.delay_ms));
    check_config_against_stream(config, backend.geometry());
    if (backend.geometry().frame_count <= static_cast<std::uint32_t>(a.warmup))
        throw UsageError("insufficient samples: warmup " + std::to_string(a.warmup) + " >= frame count " +
                         std::to_string(backend.geometry().frame_count));
    std::vector<GroundTruthFrame> truth;
    if (!a.gt.empty()) truth = ground_truth_from_json(read_json_file(a.gt));

    const auto run = measure_latency(backend, config, static_cast<std::size_t>(a.warmup));

    std::optional<EvalResult> eval;
    if (!truth.empty()) {
        const int cls = a.class_id >= 0 ? a.class_id : config.decode.person_class_id;
        const auto preds = predictions_from_results(run.results);
        // Looping replays the ground truth once per loop.
        std::vector<GroundTruthFrame> gt_loops;
        for (std::uint32_t l = 0; l < a.loops; ++l)
            for (auto g : truth) {
                g.frame_index += std::uint64_t{l} * truth.size();
                gt_loops.push_back(std::move(g));
            }
        eval = evaluate_run(preds, gt_loops, a.iou, cls);
    }

    const double latency = a.latency_ms.value_or(run.stats.mean_ms);
    std::optional<double> acc_pct = a.accuracy_pct;
    if (!acc_pct && eval) acc_pct = 100.0 * eval->accuracy;

    nlohmann::json summary = {{"latency", to_json(run.stats)}, {"latency_used_ms", latency}, {"power_w", a.power_w}};
    summary["accuracy"] = eval ? nlohmann::json(eval->accuracy) : nlohmann::json(nullptr);
    summary["precision"] = eval ? nlohmann::json(eval->precision) : nlohmann::json(nullptr);
    summary["recall"] = eval ? nlohmann::json(eval->recall) : nlohmann::json(nullptr);
    summary["accuracy_pct"] = acc_pct ? nlohmann::json(*acc_pct) : nlohmann::json(nullptr);
    summary["efficiency"] =
        acc_pct ? nlohmann::json(compute_efficiency(*acc_pct, latency, a.power_w)) : nlohmann::json(nullptr);

    auto csv = open_out(a.out_csv);
    write_bench_csv(csv, run.records);
    if (!csv) throw IoError("write to '" + a.out_csv + "' failed");
    if (!a.summary_out.empty()) open_out(a.summary_out) << summary.dump(2) << '\n';
    std::cout << summary.dump(2) << '\n';
    return kOk;
}

// ---------------------------------------------------------------------------

struct EvaluateArgs {
    std::string pred, gt;
    double iou = 0.5;
    int class_id = 0;
};

int cmd_evaluate(const EvaluateArgs& a) {
    std::ifstream in(a.pred);
    if (!in) throw IoError("cannot open '" + a.pred + "'");
    const auto preds = read_predictions_jsonl(in);
    const auto truth = ground_truth_from_json(read_json_file(a.gt));
    const auto e = evaluate_run(preds, truth, a.iou, a.class_id);
    std::cout << to_json(e).dump(2) << '\n';
    return kOk;
}

// ---------------------------------------------------------------------------

int cmd_verify(const std::string& workdir) {
    const fs::path dir = workdir.empty() ? fs::temp_directory_path() / "platguard-verify" : fs::path(workdir);
    bool ok = true;
    for (const auto& r : acceptance::run_all(dir)) {
        std::cout << acceptance::format_line(r) << '\n';
        ok = ok && r.passed;
    }
    std::cout << (ok ? "all acceptance criteria passed" : "acceptance FAILED") << '\n';
    return ok ? kOk : kVerifyFailed;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Train-platform safety monitor: YOLOX post-processing, train state, yellow-line alerts"};
    app.require_subcommand(1);

    SimulateArgs sim;
    auto* simulate = app.add_subcommand("simulate", "Render a scenario to a tensor stream and ground truth");
    auto* scen_opt = simulate->add_option("--scenario", sim.scenario, "Built-in scenario name");
    auto* spec_opt = simulate->add_option("--spec", sim.spec_file, "Scenario spec JSON file");
    scen_opt->excludes(spec_opt);
    simulate->add_option("--out-tensors", sim.out_tensors, "Tensor stream output")->required();
    simulate->add_option("--out-gt", sim.out_gt, "Ground-truth JSON output")->required();
    simulate->add_option("--out-config", sim.out_config, "Also write the matching pipeline config");

    RunArgs run;
    auto* run_cmd = app.add_subcommand("run", "Run the safety pipeline over a tensor stream");
    run_cmd->add_option("--tensors", run.tensors)->required();
    run_cmd->add_option("--config", run.config)->required();
    run_cmd->add_option("--alerts-out", run.alerts_out)->required();
    run_cmd->add_option("--results-out", run.results_out)->required();
    run_cmd->add_option("--transitions-out", run.transitions_out, "Train state transition log (JSONL)");

    BenchArgs bench;
    auto* bench_cmd = app.add_subcommand("bench", "Measure latency and efficiency");
    bench_cmd->add_option("--tensors", bench.tensors)->required();
    bench_cmd->add_option("--config", bench.config)->required();
    bench_cmd->add_option("--power-w", bench.power_w, "Device power draw in watts")->required();
    bench_cmd->add_option("--warmup", bench.warmup, "Frames excluded from statistics")->capture_default_str();
    bench_cmd->add_option("--out-csv", bench.out_csv)->required();
    bench_cmd->add_option("--summary-out", bench.summary_out, "Also write the summary JSON here");
    bench_cmd->add_option("--gt", bench.gt, "Ground truth JSON for accuracy");
    bench_cmd->add_option("--iou", bench.iou)->capture_default_str();
    bench_cmd->add_option("--class-id", bench.class_id, "Class evaluated (default: person class)");
    bench_cmd->add_option("--loops", bench.loops)->capture_default_str()->check(CLI::PositiveNumber);
    bench_cmd->add_option("--delay-ms", bench.delay_ms, "Simulated backend delay per frame")
        ->capture_default_str()
        ->check(CLI::NonNegativeNumber);
    std::optional<double> acc_override, lat_override;
    bench_cmd->add_option("--accuracy-pct", acc_override, "Use this accuracy instead of evaluating");
    bench_cmd->add_option("--latency-ms", lat_override, "Use this latency instead of the measured mean");

    EvaluateArgs ev;
    auto* eval_cmd = app.add_subcommand("evaluate", "Score predictions against ground truth");
    eval_cmd->add_option("--pred", ev.pred, "Predictions JSONL (or pipeline results)")->required();
    eval_cmd->add_option("--gt", ev.gt)->required();
    eval_cmd->add_option("--iou", ev.iou)->capture_default_str();
    eval_cmd->add_option("--class-id", ev.class_id)->capture_default_str();

    std::string verify_dir;
    auto* verify = app.add_subcommand("verify", "Run the acceptance checks");
    verify->add_option("--workdir", verify_dir, "Scratch directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kOk : kInvalid;
    }

    try {
        if (*simulate) {
            if (sim.scenario.empty() && sim.spec_file.empty()) throw UsageError("need --scenario or --spec");
            return cmd_simulate(sim);
        }
        if (*run_cmd) return cmd_run(run);
        if (*bench_cmd) {
            bench.accuracy_pct = acc_override;
            bench.latency_ms = lat_override;
            return cmd_bench(bench);
        }
        if (*eval_cmd) return cmd_evaluate(ev);
        if (*verify) return cmd_verify(verify_dir);
    } catch (const UsageError& e) {
        log(e.what());
        return kInvalid;
    } catch (const InsufficientSamplesError& e) {
        log(e.what());
        return kInvalid;
    } catch (const std::exception& e) {
        log(e.what());
        return kRuntime;
    }
    return kInvalid;
}
