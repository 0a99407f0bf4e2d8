#pragma once

#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"

#include "gdt/io.hpp"
#include "gdt/metrics.hpp"
#include "gdt/synthseq.hpp"
#include "gdt/tracker.hpp"
#include "gdt/training.hpp"

namespace gdt {

/// Offline-trained models for one seed. The baseline and deform models are the
/// step-1 and step-2 snapshots of the gate run; staged training makes them
/// identical to training those variants on their own.
struct VariantModels {
    TrackerModel baseline, deform, gate;

    const TrackerModel& of(Variant v) const {
        return v == Variant::baseline ? baseline : v == Variant::deform ? deform : gate;
    }
};

inline std::vector<SequenceDataset> training_suite(std::uint64_t seed) { return attribute_suite(1000 + seed); }

inline VariantModels train_variants(const std::vector<SequenceDataset>& training, const Config& cfg) {
    VariantModels out;
    OfflineHooks hooks;
    hooks.on_step_done = [&](int step, const TrackerModel& m) {
        if (step == 1) out.baseline = m;
        if (step == 2) out.deform = m;
    };
    out.gate = train_offline(training, cfg, Variant::gate, hooks);
    out.baseline.variant = Variant::baseline;
    out.deform.variant = Variant::deform;
    return out;
}

struct MeanStd {
    double mean = 0.0;
    double std = 0.0;  // sample standard deviation; 0 for a single value
};

inline MeanStd mean_std(const std::vector<double>& v) {
    if (v.empty()) throw ValidationError("mean_std: no values");
    MeanStd r;
    for (double x : v) r.mean += x;
    r.mean /= static_cast<double>(v.size());
    if (v.size() > 1) {
        double ss = 0.0;
        for (double x : v) ss += (x - r.mean) * (x - r.mean);
        r.std = std::sqrt(ss / static_cast<double>(v.size() - 1));
    }
    return r;
}

struct AblationRow {
    std::string variant;
    std::string attribute;
    std::vector<double> auc;           // one per seed
    std::vector<double> precision20;   // one per seed
    MeanStd auc_stats, precision_stats;
};

struct AblationReport {
    std::vector<std::uint64_t> seeds;
    std::vector<AblationRow> rows;  // variant-major: 3 variants x attributes
    // Per seed, per sequence: the gate variant's per-frame mean gate (frame 0 included).
    std::vector<std::map<std::string, std::vector<double>>> gate_logs;

    const AblationRow& row(const std::string& variant, const std::string& attribute) const {
        for (const auto& r : rows) {
            if (r.variant == variant && r.attribute == attribute) return r;
        }
        throw ValidationError("ablation report has no row " + variant + "/" + attribute);
    }
};

/// Mean gate over the occlusion window and over the `before` frames preceding it.
struct GateWindow {
    double before = 0.0;
    double during = 0.0;
};

inline GateWindow gate_window(const std::vector<double>& gates, const Occluder& occ, std::size_t before = 10) {
    if (occ.first_frame < before || occ.last_frame >= gates.size() || occ.last_frame < occ.first_frame) {
        throw ValidationError("gate_window: occlusion window does not fit the gate log");
    }
    std::vector<double> pre(gates.begin() + static_cast<long>(occ.first_frame - before), gates.begin() + static_cast<long>(occ.first_frame));
    std::vector<double> in(gates.begin() + static_cast<long>(occ.first_frame), gates.begin() + static_cast<long>(occ.last_frame + 1));
    return {mean_std(pre).mean, mean_std(in).mean};
}

inline std::vector<double> gate_log(const TrackResult& r) {
    std::vector<double> g;
    for (const auto& v : r.mean_gates) {
        if (!v) throw ValidationError("gate_log: result of variant '" + r.variant + "' has no gate values");
        g.push_back(*v);
    }
    return g;
}

using AblationProgress = std::function<void(const std::string& message)>;

/// Trains the three variants for every seed and tracks every suite sequence
/// with each. Deterministic in (suite, seeds, cfg).
inline AblationReport run_ablation(const std::vector<SequenceDataset>& suite, const std::vector<std::uint64_t>& seeds,
                                   const Config& cfg, const AblationProgress& progress = {}) {
    if (seeds.empty()) throw ValidationError("run_ablation: at least one seed is required");
    if (suite.empty()) throw ValidationError("run_ablation: empty suite");
    validate(cfg);
    const Variant variants[] = {Variant::baseline, Variant::deform, Variant::gate};
    AblationReport rep;
    rep.seeds = seeds;
    for (Variant v : variants) {
        for (const auto& s : suite) rep.rows.push_back(AblationRow{to_string(v), s.name, {}, {}, {}, {}});
    }
    for (std::uint64_t seed : seeds) {
        Config c = cfg;
        c.seed = seed;
        if (progress) progress("seed " + std::to_string(seed) + ": offline training");
        const VariantModels models = train_variants(training_suite(seed), c);
        std::map<std::string, std::vector<double>> logs;
        std::size_t r = 0;
        for (Variant v : variants) {
            for (const auto& s : suite) {
                if (progress) progress("seed " + std::to_string(seed) + ": " + to_string(v) + " on " + s.name);
                const TrackResult res = track_sequence(models.of(v), s, c, seed);
                auto& row = rep.rows[r++];
                row.auc.push_back(success_curve(result_ious(res)).auc);
                row.precision20.push_back(precision_at_20(precision_curve(result_errors(res))));
                if (v == Variant::gate) logs[s.name] = gate_log(res);
            }
        }
        rep.gate_logs.push_back(std::move(logs));
    }
    for (auto& row : rep.rows) {
        row.auc_stats = mean_std(row.auc);
        row.precision_stats = mean_std(row.precision20);
    }
    return rep;
}

inline std::string ablation_table(const AblationReport& rep) {
    std::string out = "| variant | attribute | success AUC | precision@20 |\n|---|---|---|---|\n";
    char buf[256];
    for (const auto& r : rep.rows) {
        std::snprintf(buf, sizeof buf, "| %s | %s | %.3f ± %.3f | %.3f ± %.3f |\n", r.variant.c_str(), r.attribute.c_str(),
                      r.auc_stats.mean, r.auc_stats.std, r.precision_stats.mean, r.precision_stats.std);
        out += buf;
    }
    return out;
}

inline nlohmann::json ablation_json(const AblationReport& rep) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& r : rep.rows) {
        rows.push_back({{"variant", r.variant},
                        {"attribute", r.attribute},
                        {"auc", r.auc},
                        {"precision20", r.precision20},
                        {"auc_mean", r.auc_stats.mean},
                        {"auc_std", r.auc_stats.std},
                        {"precision20_mean", r.precision_stats.mean},
                        {"precision20_std", r.precision_stats.std}});
    }
    nlohmann::json logs = nlohmann::json::array();
    for (std::size_t i = 0; i < rep.seeds.size(); ++i) logs.push_back({{"seed", rep.seeds[i]}, {"mean_gate", rep.gate_logs[i]}});
    return {{"seeds", rep.seeds}, {"rows", rows}, {"gate_logs", logs}};
}

/// Writes table.md, table.csv, report.json and gate_logs.csv into `dir`.
inline void save_ablation(const AblationReport& rep, const fs::path& dir) {
    fs::create_directories(dir);
    auto open = [&](const char* name) {
        std::ofstream out(dir / name);
        if (!out) throw RuntimeFailure("cannot write " + (dir / name).string());
        return out;
    };
    open("table.md") << ablation_table(rep);
    {
        auto out = open("table.csv");
        out << "variant,attribute,auc_mean,auc_std,precision20_mean,precision20_std\n";
        for (const auto& r : rep.rows) {
            out << r.variant << ',' << r.attribute << ',' << detail::format_real(r.auc_stats.mean) << ','
                << detail::format_real(r.auc_stats.std) << ',' << detail::format_real(r.precision_stats.mean) << ','
                << detail::format_real(r.precision_stats.std) << '\n';
        }
    }
    open("report.json") << ablation_json(rep).dump(2) << '\n';
    {
        auto out = open("gate_logs.csv");
        out << "seed,sequence,frame,mean_gate\n";
        for (std::size_t i = 0; i < rep.seeds.size(); ++i) {
            for (const auto& [name, log] : rep.gate_logs[i]) {
                for (std::size_t t = 0; t < log.size(); ++t) {
                    out << rep.seeds[i] << ',' << name << ',' << t << ',' << detail::format_real(log[t]) << '\n';
                }
            }
        }
    }
}

}  // namespace gdt
