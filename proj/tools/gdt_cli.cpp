// gdt: synthesize sequences, train, track, evaluate, gradient-check and ablate.
// Exit codes: 0 success, 1 validation error, 2 runtime failure.

#include <glob.h>

#include <algorithm>
#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "gdt/gdt.hpp"

namespace {

using namespace gdt;

Config config_or_default(const std::string& path) { return path.empty() ? Config{} : load_config(path); }

bool is_sequence_dir(const fs::path& p) { return fs::exists(p / "groundtruth_rect.txt"); }

std::vector<SequenceDataset> load_training_data(const fs::path& dir) {
    if (is_sequence_dir(dir)) return {load_sequence(dir)};
    if (!fs::is_directory(dir)) throw ValidationError("training data directory not found: " + dir.string());
    std::vector<fs::path> dirs;
    for (const auto& e : fs::directory_iterator(dir)) {
        if (e.is_directory() && is_sequence_dir(e.path())) dirs.push_back(e.path());
    }
    std::sort(dirs.begin(), dirs.end());
    if (dirs.empty()) throw ValidationError(dir.string() + " contains no sequence directories");
    std::vector<SequenceDataset> out;
    for (const auto& d : dirs) out.push_back(load_sequence(d));
    return out;
}

std::vector<std::string> expand_glob(const std::string& pattern) {
    glob_t g{};
    const int rc = ::glob(pattern.c_str(), 0, nullptr, &g);
    std::vector<std::string> out;
    if (rc == 0) {
        for (std::size_t i = 0; i < g.gl_pathc; ++i) out.emplace_back(g.gl_pathv[i]);
    }
    globfree(&g);
    if (rc != 0 && rc != GLOB_NOMATCH) throw RuntimeFailure("glob failed for '" + pattern + "'");
    if (out.empty()) throw ValidationError("no result files match '" + pattern + "'");
    return out;
}

int cmd_synth(const std::string& out, std::uint64_t seed) {
    for (const auto& s : attribute_suite(seed)) {
        save_sequence(s, fs::path(out) / s.name);
        std::printf("wrote %s (%zu frames)\n", (fs::path(out) / s.name).c_str(), s.frames.size());
    }
    return 0;
}

int cmd_train(const std::string& data, const std::string& variant, const std::string& config, const std::string& out) {
    const Config cfg = config_or_default(config);
    const Variant v = parse_variant(variant);
    const auto sequences = load_training_data(data);
    OfflineHooks hooks;
    hooks.on_step_done = [](int step, const TrackerModel&) { std::fprintf(stderr, "offline step %d done\n", step); };
    const TrackerModel m = train_offline(sequences, cfg, v, hooks);
    save_model(m, out);
    std::printf("wrote %s (%s, trained on %zu sequences)\n", out.c_str(), to_string(v).c_str(), sequences.size());
    return 0;
}

int cmd_track(const std::string& model, const std::string& seq_dir, const std::string& config, const std::string& out,
              std::optional<std::uint64_t> seed) {
    const Config cfg = config_or_default(config);
    const TrackerModel m = load_model(model);
    const SequenceDataset seq = load_sequence(seq_dir);
    const TrackResult r = track_sequence(m, seq, cfg, seed.value_or(cfg.seed));
    save_result(r, out);
    const Curve s = success_curve(result_ious(r));
    const Curve p = precision_curve(result_errors(r));
    std::printf("%s (%s): success AUC %.3f, precision@20 %.3f\n", r.sequence.c_str(), r.variant.c_str(), s.auc,
                precision_at_20(p));
    return 0;
}

int cmd_eval(const std::string& pattern, const std::string& out) {
    fs::create_directories(out);
    std::vector<PlotSeries> series;
    std::string table = "| sequence | variant | frames | success AUC | precision@20 | failure rate | robustness |\n"
                        "|---|---|---|---|---|---|---|\n";
    std::ofstream csv(fs::path(out) / "summary.csv");
    if (!csv) throw RuntimeFailure("cannot write " + (fs::path(out) / "summary.csv").string());
    csv << "sequence,variant,frames,success_auc,precision20,failure_rate,robustness\n";
    for (const auto& path : expand_glob(pattern)) {
        const TrackResult r = load_result(path);
        const auto ious = result_ious(r);
        const Curve s = success_curve(ious);
        const Curve p = precision_curve(result_errors(r));
        const double f = failure_rate(ious);
        const std::string label = r.sequence + " (" + r.variant + ")";
        write_curves_csv(fs::path(out) / (r.sequence + "_" + r.variant + "_curves.csv"), p, s);
        series.push_back({label, p, s});
        char buf[256];
        std::snprintf(buf, sizeof buf, "| %s | %s | %zu | %.3f | %.3f | %.3f | %.3f |\n", r.sequence.c_str(),
                      r.variant.c_str(), r.boxes.size(), s.auc, precision_at_20(p), f, robustness(f));
        table += buf;
        csv << r.sequence << ',' << r.variant << ',' << r.boxes.size() << ',' << detail::format_real(s.auc) << ','
            << detail::format_real(precision_at_20(p)) << ',' << detail::format_real(f) << ','
            << detail::format_real(robustness(f)) << '\n';
    }
    write_curves_svg(fs::path(out) / "curves.svg", series);
    std::ofstream(fs::path(out) / "summary.md") << table;
    std::cout << table;
    return 0;
}

int cmd_gradcheck(std::size_t seeds) {
    BatteryOptions opt;
    opt.seeds = seeds;
    const auto entries = run_gradient_battery(opt);
    for (const auto& e : entries) {
        std::printf("%-4s %-34s max rel error %.3e  (%zu coords checked, %zu skipped at kinks, %zu seeds)\n",
                    e.passed ? "PASS" : "FAIL", e.name.c_str(), e.max_rel_error, e.checked, e.skipped, e.seeds);
    }
    const bool ok = battery_passed(entries);
    std::printf("%s\n", ok ? "all gradient checks passed" : "gradient check FAILED");
    return ok ? 0 : 2;
}

int cmd_ablate(std::size_t k, const std::string& out, const std::string& config) {
    if (k == 0) throw ValidationError("--seeds must be at least 1");
    const Config cfg = config_or_default(config);
    std::vector<std::uint64_t> seeds;
    for (std::size_t s = 1; s <= k; ++s) seeds.push_back(s);
    const auto report = run_ablation(attribute_suite(cfg.suite_seed), seeds, cfg,
                                     [](const std::string& m) { std::fprintf(stderr, "%s\n", m.c_str()); });
    save_ablation(report, out);
    std::cout << ablation_table(report);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Gated deformable-fusion tracker: data synthesis, training, tracking and evaluation"};
    app.require_subcommand(1);

    std::string out, config, data, variant = "gate", model, seq, results;
    std::uint64_t seed = 7;
    std::optional<std::uint64_t> track_seed;
    std::size_t seeds = 20, ablate_seeds = 3;

    auto* synth = app.add_subcommand("synth", "Write the six-sequence attribute suite");
    synth->add_option("--out", out, "Output directory")->required();
    synth->add_option("--seed", seed, "Suite seed")->capture_default_str();

    auto* train = app.add_subcommand("train", "Staged offline training");
    train->add_option("--data", data, "Sequence directory, or a directory of sequence directories")->required();
    train->add_option("--variant", variant, "baseline, deform or gate")->capture_default_str();
    train->add_option("--config", config, "JSON config (defaults when omitted)");
    train->add_option("--out", out, "Model file (JSON)")->required();

    auto* track = app.add_subcommand("track", "One-pass tracking of a sequence");
    track->add_option("--model", model, "Model file")->required();
    track->add_option("--seq", seq, "Sequence directory")->required();
    track->add_option("--out", out, "Result JSON")->required();
    track->add_option("--config", config, "JSON config");
    track->add_option("--seed", track_seed, "Tracker RNG seed (default: config seed)");

    auto* eval = app.add_subcommand("eval", "Curves, plots and summary table for saved results");
    eval->add_option("--results", results, "Glob of result JSON files")->required();
    eval->add_option("--out", out, "Report directory")->required();

    auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference gradient battery");
    gradcheck->add_option("--seeds", seeds, "Random instances per check")->capture_default_str();

    auto* ablate = app.add_subcommand("ablate", "Three-variant ablation over the attribute suite");
    ablate->add_option("--seeds", ablate_seeds, "Number of seeds (1..K)")->capture_default_str();
    ablate->add_option("--out", out, "Report directory")->required();
    ablate->add_option("--config", config, "JSON config");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    }

    try {
        if (*synth) return cmd_synth(out, seed);
        if (*train) return cmd_train(data, variant, config, out);
        if (*track) return cmd_track(model, seq, config, out, track_seed);
        if (*eval) return cmd_eval(results, out);
        if (*gradcheck) return cmd_gradcheck(seeds);
        if (*ablate) return cmd_ablate(ablate_seeds, out, config);
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const ShapeError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const RuntimeFailure& e) {
        std::cerr << "failure: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "failure: " << e.what() << '\n';
        return 2;
    }
    return 1;
}
