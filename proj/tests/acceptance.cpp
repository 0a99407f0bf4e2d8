// Acceptance report: one PASS/FAIL line per criterion, tolerances pinned below.
// Exits 0 once every criterion has been evaluated; --strict exits 1 on any FAIL.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "gdt/gdt.hpp"
#include "oracles.hpp"

using namespace gdt;
namespace fs = std::filesystem;

namespace {

constexpr double kGradTolerance = 1e-4;
constexpr double kGradEps = 1e-5;
constexpr std::size_t kGradSeeds = 20;
constexpr double kGradBudgetSeconds = 120.0;
constexpr std::size_t kIdentityInputs = 100;
constexpr std::size_t kOracleInstances = 50;
constexpr double kOracleTolerance = 1e-12;
constexpr double kConvTolerance = 1e-10;
constexpr double kRidgeTolerance = 1e-8;
constexpr double kSpotTolerance = 1e-12;
constexpr std::size_t kTrackSeeds = 5;
constexpr double kStaticMinAuc = 0.8;
constexpr double kAttributeMinAuc = 0.5;
constexpr std::size_t kAttributeMinSeeds = 4;
constexpr double kTrackBudgetSeconds = 15 * 60.0;
constexpr std::size_t kGateMinSeeds = 4;
constexpr std::size_t kAblationSeeds = 3;

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::vector<std::pair<int, std::string>> g_lines;
std::vector<std::pair<int, Outcome>> g_results;

void report(int id, const char* title, const Outcome& o) {
    const std::string line = "criterion " + std::to_string(id) + (o.pass ? " PASS: " : " FAIL: ") + title + "  (" +
                             o.detail + ")";
    std::printf("%s\n", line.c_str());
    std::fflush(stdout);
    g_lines.emplace_back(id, line);
    g_results.emplace_back(id, o);
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, double a) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, a);
    return buf;
}

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// --- 1: gradient battery ------------------------------------------------------

Outcome gradient_battery(const std::string& cli) {
    const auto t0 = std::chrono::steady_clock::now();
    BatteryOptions opt;
    opt.seeds = kGradSeeds;
    opt.eps = kGradEps;
    opt.tolerance = kGradTolerance;
    const auto entries = run_gradient_battery(opt);
    const double secs = seconds_since(t0);
    double worst = 0.0;
    std::string failed;
    for (const auto& e : entries) {
        worst = std::max(worst, e.max_rel_error);
        if (!e.passed) failed += " " + e.name;
    }
    const int rc = std::system((cli + " gradcheck --seeds " + std::to_string(kGradSeeds) + " > /dev/null").c_str());
    const bool cli_ok = rc == 0;
    Outcome o;
    o.pass = battery_passed(entries) && secs < kGradBudgetSeconds && cli_ok;
    o.detail = std::to_string(entries.size()) + " checks x " + std::to_string(kGradSeeds) + " seeds, max rel error " +
               fmt("%.2e", worst) + " <= " + fmt("%.0e", kGradTolerance) + ", " + fmt("%.1f", secs) + " s < " +
               fmt("%.0f", kGradBudgetSeconds) + " s, cli gradcheck exit " + std::to_string(WEXITSTATUS(rc)) +
               (failed.empty() ? "" : ", failing:" + failed);
    return o;
}

// --- 2: fusion stage is the identity at initialisation ----------------------

Outcome identity_at_init() {
    std::mt19937_64 rng(2024);
    std::size_t mismatches = 0;
    double max_offset = 0.0;
    for (std::size_t i = 0; i < kIdentityInputs; ++i) {
        TrackerModel gate = TrackerModel::create(NetworkConfig{}, Variant::gate, 1000 + i);
        TrackerModel deform = gate, base = gate;
        deform.variant = Variant::deform;
        base.variant = Variant::baseline;
        const Tensor in = oracle::random_tensor(gate.input_dims(), rng, -2.0, 2.0);
        const Tensor features = front_end_forward(gate, in, nullptr);
        const OffsetField f = regress_offsets(features, gate.deform);
        for (double v : f.offsets.values()) max_offset = std::max(max_offset, std::abs(v));
        if (!(deform_features(features, f) == features)) ++mismatches;
        const Tensor ref = forward(base, in).logits;
        if (!(forward(deform, in).logits == ref) || !(forward(gate, in).logits == ref)) ++mismatches;
    }
    return {mismatches == 0 && max_offset == 0.0,
            std::to_string(kIdentityInputs) + " random inputs, bitwise-equal logits across variants, " +
                std::to_string(mismatches) + " mismatches, max |offset| " + fmt("%g", max_offset)};
}

// --- 3: independent oracles ---------------------------------------------------

Outcome oracle_agreement() {
    double conv = 0, deform = 0, ridge = 0;
    std::size_t mining_bad = 0, metric_bad = 0;
    for (std::size_t s = 0; s < kOracleInstances; ++s) {
        std::mt19937_64 rng(9000 + s);
        const Tensor x = oracle::random_tensor({7, 6, 3}, rng);
        const Tensor k = oracle::random_tensor({3, 3, 3, 4}, rng);
        const Tensor b = oracle::random_tensor({4}, rng);
        for (std::size_t stride : {1, 2})
            for (std::size_t pad : {0, 1}) {
                if ((7 + 2 * pad - 3) % stride || (6 + 2 * pad - 3) % stride) continue;
                conv = std::max(conv, max_abs_diff(conv2d(x, k, b, stride, pad), oracle::conv2d(x, k, b, stride, pad)));
            }
        const Tensor theta = oracle::random_tensor({7, 6, 2}, rng, -3.0, 3.0);
        deform = std::max(deform, max_abs_diff(deform_features(x, OffsetField(theta)), oracle::deform(x, theta)));

        std::vector<Tensor> feats;
        std::vector<BoundingBox> src, gt;
        std::vector<std::vector<double>> X, Y;
        std::uniform_real_distribution<double> u(-3, 3);
        for (int i = 0; i < 30; ++i) {
            feats.push_back(oracle::random_tensor({8}, rng));
            src.push_back({40 + u(rng), 40 + u(rng), 25 + u(rng), 25 + u(rng)});
            gt.push_back({40 + u(rng), 40 + u(rng), 25 + u(rng), 25 + u(rng)});
            X.emplace_back(feats.back().values().begin(), feats.back().values().end());
            const auto t = box_offsets(src.back(), gt.back());
            Y.emplace_back(t.begin(), t.end());
        }
        const BoxRegressor r = bbox_regress_train(feats, src, gt, 0.1);
        const auto ref = oracle::ridge(X, Y, 0.1);
        for (std::size_t t = 0; t < 4; ++t) {
            for (std::size_t i = 0; i < 8; ++i) ridge = std::max(ridge, std::abs(r.weights[i * 4 + t] - ref[t][i]));
            ridge = std::max(ridge, std::abs(r.intercept[t] - ref[t][8]));
        }

        std::vector<double> scores(1024);
        std::uniform_int_distribution<int> q(0, 50);
        for (double& v : scores) v = q(rng) / 50.0;
        if (hard_negative_mining(scores, 96) != oracle::top_k(scores, 96)) ++mining_bad;

        std::vector<double> errs(40), ious(40);
        std::uniform_real_distribution<double> e(0, 60), o(0, 1);
        for (double& v : errs) v = std::round(e(rng));
        for (double& v : ious) v = std::round(o(rng) * 50) / 50;
        const Curve pc = precision_curve(errs), sc = success_curve(ious);
        for (std::size_t i = 0; i <= 50; ++i) {
            if (pc.values[i] != oracle::count_fraction(errs, static_cast<double>(i), true)) ++metric_bad;
            if (sc.values[i] != oracle::count_fraction(ious, static_cast<double>(i) * 0.02, false)) ++metric_bad;
        }
    }
    Outcome out;
    out.pass = conv <= kConvTolerance && deform <= kOracleTolerance && ridge <= kRidgeTolerance && mining_bad == 0 &&
               metric_bad == 0;
    out.detail = std::to_string(kOracleInstances) + " instances each; conv " + fmt("%.1e", conv) + " (tol " +
                 fmt("%.0e", kConvTolerance) + "), deform " +
                 fmt("%.1e", deform) + " (tol " + fmt("%.0e", kOracleTolerance) + "), ridge " + fmt("%.1e", ridge) +
                 " (tol " + fmt("%.0e", kRidgeTolerance) + "), mining mismatches " + std::to_string(mining_bad) +
                 ", curve mismatches " + std::to_string(metric_bad);
    return out;
}

// --- 4: spot values ---------------------------------------------------------

Outcome spot_values() {
    std::vector<std::string> bad;
    auto near = [&](const char* what, double got, double want) {
        if (!(std::abs(got - want) <= kSpotTolerance)) bad.push_back(std::string(what) + "=" + fmt("%.17g", got));
    };
    near("sigmoid(0)", sigmoid(0.0), 0.5);
    near("xent(0,0)", softmax_xent(Tensor::vector({0.0, 0.0}), 0).loss, std::log(2.0));
    if (!(softmax_xent(Tensor::vector({50.0, -50.0}), 0).loss < 1e-9)) bad.push_back("xent(50,-50)");
    near("relu(-3.7)", activate(Tensor::vector({-3.7}), Activation::relu)[0], 0.0);
    near("conv [2]*[3]", conv2d(Tensor({1, 1, 1}, 2.0), Tensor({1, 1, 1, 1}, 3.0), Tensor({1}), 1, 0)[0], 6.0);
    ParamGroup p("p", Tensor::vector({1.0}));
    p.grad[0] = 0.5;
    sgd_step(p, {1.0, 0.0, 0.0});
    near("sgd", p.value[0], 0.5);
    ParamGroup q("q", Tensor::vector({2.0}));
    sgd_step(q, {1.0, 0.0, 0.0005});
    near("weight decay", q.value[0], 1.999);
    auto exact = [&](const char* what, double got, double want) {
        if (got != want) bad.push_back(std::string(what) + "=" + fmt("%.17g", got));
    };
    exact("iou", iou({0, 0, 2, 2}, {1, 1, 2, 2}), 1.0 / 7.0);
    Tensor grid({2, 2, 1}, std::vector<double>{0, 1, 2, 3});
    near("bilinear mid", bilinear_sample(grid, 0.5, 0.5)[0], 1.5);
    near("bilinear out", bilinear_sample(grid, -2.5, 0.0)[0], 0.0);
    near("fuse 0.5", fuse(Tensor({1, 1, 1}, 2.0), Tensor({1, 1, 1}, 4.0), GateMap(Tensor({1, 1}, 0.5)))[0], 3.0);
    near("robustness", robustness(0.01), std::exp(-1.0));
    exact("p@20 {10,30}", precision_at_20(precision_curve({10.0, 30.0})), 0.5);
    exact("p@20", precision_at_20(precision_curve({0.0, 10.0, 20.0, 60.0})), 0.75);
    near("auc", success_curve(std::vector<double>(4, 1.0)).auc, 50.0 / 51.0);
    GateParams g = GateParams::create(3, 3, 32, 64, *std::make_unique<std::mt19937_64>(1));
    for (ParamGroup* grp : g.groups()) grp->value.fill(0.0);
    near("zero gate", mean_gate(compute_gate(Tensor({3, 3, 32}, 1.0), g)), 0.5);
    return {bad.empty(), "17 reference values, iou and precision@20 exact, others within " + fmt("%.0e", kSpotTolerance) +
                             (bad.empty() ? std::string() : ", off:" + [&] {
                                 std::string s;
                                 for (auto& b : bad) s += " " + b;
                                 return s;
                             }())};
}

// --- 5, 6, 8: tracking runs -------------------------------------------------

struct InstrumentLog {
    std::size_t frames = 0, bad_frames = 0;
    std::size_t batches = 0, bad_batches = 0;
    std::vector<std::size_t> updates;
    std::size_t sequence_frames = 0;
};

void check_frame_samples(InstrumentLog& log, const std::vector<Sample>& s, std::size_t n_pos, std::size_t n_neg,
                         const SamplingConfig& sc) {
    ++log.frames;
    std::size_t pos = 0, neg = 0;
    bool ok = true;
    for (const auto& x : s) {
        if (x.label == 1) {
            ++pos;
            ok = ok && x.iou >= sc.pos_iou;
        } else {
            ++neg;
            ok = ok && x.iou <= sc.neg_iou;
        }
    }
    if (!ok || pos != n_pos || neg != n_neg) ++log.bad_frames;
}

void check_batch(InstrumentLog& log, const BatchRecord& r, const TrainConfig& tc) {
    ++log.batches;
    const bool ok = r.positives == tc.batch_pos && r.mined.size() == tc.batch_neg && r.pool == tc.neg_pool &&
                    r.mined == oracle::top_k(r.pool_scores, tc.batch_neg);
    if (!ok) ++log.bad_batches;
}

struct TrackingRuns {
    // [seed][sequence name] -> AUC for the variants that were run
    std::vector<std::map<std::string, std::map<std::string, double>>> auc;
    std::vector<GateWindow> occlusion;
    InstrumentLog offline, online;
    double seconds = 0.0;
};

TrackingRuns run_tracking(const Config& cfg) {
    TrackingRuns out;
    const auto t0 = std::chrono::steady_clock::now();
    const auto suite = attribute_suite(cfg.suite_seed);
    auto find = [&](const std::string& name) -> const SequenceDataset& {
        for (const auto& s : suite)
            if (s.name == name) return s;
        throw std::runtime_error("missing sequence " + name);
    };
    for (std::uint64_t seed = 1; seed <= kTrackSeeds; ++seed) {
        Config c = cfg;
        c.seed = seed;
        const bool instrument = seed == 1;
        VariantModels models;
        {
            OfflineHooks hooks;
            hooks.on_step_done = [&](int step, const TrackerModel& m) {
                if (step == 1) models.baseline = m;
                if (step == 2) models.deform = m;
            };
            if (instrument) {
                hooks.on_frame_samples = [&](int, const std::vector<Sample>& s) {
                    check_frame_samples(out.offline, s, c.train.pos_per_frame, c.train.neg_per_frame, c.sampling);
                };
                hooks.on_batch = [&](const BatchRecord& r) { check_batch(out.offline, r, c.train); };
            }
            models.gate = train_offline(training_suite(seed), c, Variant::gate, hooks);
            models.baseline.variant = Variant::baseline;
            models.deform.variant = Variant::deform;
        }
        std::map<std::string, std::map<std::string, double>> aucs;
        for (Variant v : {Variant::baseline, Variant::deform, Variant::gate}) {
            const auto r = track_sequence(models.of(v), find("static"), c, seed);
            aucs["static"][to_string(v)] = success_curve(result_ious(r)).auc;
        }
        for (const char* name : {"rotation", "deformation"}) {
            const auto r = track_sequence(models.gate, find(name), c, seed);
            aucs[name]["gate"] = success_curve(result_ious(r)).auc;
        }
        {
            const auto& occ = find("occlusion");
            TrackerHooks hooks;
            if (instrument) {
                hooks.on_samples = [&](std::size_t f, const std::vector<Sample>& s) {
                    const bool first = f == 0;
                    check_frame_samples(out.online, s, first ? c.track.init_pos : c.track.update_pos_per_frame,
                                        first ? c.track.init_neg : c.track.update_neg_per_frame, c.sampling);
                };
                hooks.on_batch = [&](const BatchRecord& r) { check_batch(out.online, r, c.train); };
                hooks.on_update = [&](std::size_t f) { out.online.updates.push_back(f); };
                out.online.sequence_frames = occ.frames.size();
            }
            const auto r = track_sequence(models.gate, occ, c, seed, hooks);
            out.occlusion.push_back(gate_window(gate_log(r), *occ.spec->occluder));
        }
        out.auc.push_back(std::move(aucs));
        std::fprintf(stderr, "tracking seed %llu done (%.0f s)\n", static_cast<unsigned long long>(seed), seconds_since(t0));
    }
    out.seconds = seconds_since(t0);
    return out;
}

Outcome tracking_quality(const TrackingRuns& runs) {
    bool static_ok = true;
    std::size_t rot = 0, def = 0;
    std::string detail = "static AUC per seed (baseline/deform/gate):";
    for (const auto& a : runs.auc) {
        const auto& s = a.at("static");
        for (const auto& [v, auc] : s) static_ok = static_ok && auc >= kStaticMinAuc;
        detail += " " + fmt("%.2f", s.at("baseline")) + "/" + fmt("%.2f", s.at("deform")) + "/" + fmt("%.2f", s.at("gate"));
    }
    detail += "; gate rotation:";
    for (const auto& a : runs.auc) {
        const double v = a.at("rotation").at("gate");
        rot += v >= kAttributeMinAuc;
        detail += " " + fmt("%.2f", v);
    }
    detail += "; gate deformation:";
    for (const auto& a : runs.auc) {
        const double v = a.at("deformation").at("gate");
        def += v >= kAttributeMinAuc;
        detail += " " + fmt("%.2f", v);
    }
    const bool time_ok = runs.seconds < kTrackBudgetSeconds;
    detail += "; thresholds static >= " + fmt("%.2f", kStaticMinAuc) + ", attributes >= " + fmt("%.2f", kAttributeMinAuc) +
              " in >= " + std::to_string(kAttributeMinSeeds) + "/" + std::to_string(kTrackSeeds) + " seeds; " +
              fmt("%.0f", runs.seconds) + " s < " + fmt("%.0f", kTrackBudgetSeconds) + " s";
    return {static_ok && rot >= kAttributeMinSeeds && def >= kAttributeMinSeeds && time_ok, detail};
}

Outcome gate_under_occlusion(const TrackingRuns& runs) {
    std::size_t drops = 0;
    std::string detail = "mean gate before -> during occlusion:";
    for (const auto& w : runs.occlusion) {
        drops += w.during < w.before;
        detail += " " + fmt("%.4f", w.before) + "->" + fmt("%.4f", w.during);
    }
    detail += "; drop required in >= " + std::to_string(kGateMinSeeds) + "/" + std::to_string(runs.occlusion.size()) +
              " seeds, observed " + std::to_string(drops);
    return {drops >= kGateMinSeeds, detail};
}

Outcome instrumentation(const TrackingRuns& runs, const Config& cfg) {
    std::vector<std::size_t> expected;
    for (std::size_t f = cfg.track.update_interval; f < runs.online.sequence_frames; f += cfg.track.update_interval)
        expected.push_back(f);
    const bool ok = runs.offline.frames > 0 && runs.offline.bad_frames == 0 && runs.offline.batches > 0 &&
                    runs.offline.bad_batches == 0 && runs.online.frames > 0 && runs.online.bad_frames == 0 &&
                    runs.online.batches > 0 && runs.online.bad_batches == 0 && runs.online.updates == expected;
    std::string upd;
    for (std::size_t f : runs.online.updates) upd += (upd.empty() ? "" : ",") + std::to_string(f);
    return {ok, "offline " + std::to_string(runs.offline.frames) + " frames (" + std::to_string(runs.offline.bad_frames) +
                    " bad), " + std::to_string(runs.offline.batches) + " batches of " + std::to_string(cfg.train.batch_pos) +
                    "+" + std::to_string(cfg.train.batch_neg) + " from " + std::to_string(cfg.train.neg_pool) + " (" +
                    std::to_string(runs.offline.bad_batches) + " bad); online " + std::to_string(runs.online.frames) +
                    " frames (" + std::to_string(runs.online.bad_frames) + " bad), " +
                    std::to_string(runs.online.batches) + " batches (" + std::to_string(runs.online.bad_batches) +
                    " bad), updates at frames " + upd};
}

// --- 7: ablation reproducibility --------------------------------------------

Outcome ablation_repro(const std::string& cli, const fs::path& work) {
    const auto t0 = std::chrono::steady_clock::now();
    const fs::path a = work / "ablation_a", b = work / "ablation_b";
    fs::remove_all(a);
    fs::remove_all(b);
    const std::string base = cli + " ablate --seeds " + std::to_string(kAblationSeeds) + " --out ";
    const int ra = std::system((base + a.string() + " > " + (work / "ablation_a.log").string() + " 2>&1").c_str());
    const int rb = std::system((base + b.string() + " > " + (work / "ablation_b.log").string() + " 2>&1").c_str());
    std::size_t differing = 0, files = 0;
    for (const char* f : {"table.md", "table.csv", "report.json", "gate_logs.csv"}) {
        ++files;
        if (!fs::exists(a / f) || read_file(a / f) != read_file(b / f)) ++differing;
    }
    std::size_t rows = 0;
    std::set<std::string> variants, attributes;
    {
        std::istringstream in(read_file(a / "table.csv"));
        std::string line;
        std::getline(in, line);
        while (std::getline(in, line)) {
            ++rows;
            const auto c1 = line.find(','), c2 = line.find(',', c1 + 1);
            variants.insert(line.substr(0, c1));
            attributes.insert(line.substr(c1 + 1, c2 - c1 - 1));
        }
    }
    const bool ok = ra == 0 && rb == 0 && differing == 0 && rows == 18 && variants.size() == 3 && attributes.size() == 6;
    return {ok, "two runs of 'gdt ablate --seeds " + std::to_string(kAblationSeeds) + "': exit " +
                    std::to_string(WEXITSTATUS(ra)) + "/" + std::to_string(WEXITSTATUS(rb)) + ", " +
                    std::to_string(differing) + " of " + std::to_string(files) + " files differ, table " +
                    std::to_string(variants.size()) + " variants x " + std::to_string(attributes.size()) +
                    " attributes (" + std::to_string(rows) + " rows), " + fmt("%.0f", seconds_since(t0)) + " s"};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Acceptance report"};
    std::string cli, work = "acceptance_work", report_path;
    bool strict = false;
    app.add_option("--cli", cli, "Path to the gdt executable")->required();
    app.add_option("--work", work, "Scratch directory");
    app.add_option("--report", report_path, "Also write the PASS/FAIL lines to this file");
    app.add_flag("--strict", strict, "Exit 1 if any criterion fails");
    CLI11_PARSE(app, argc, argv);
    fs::create_directories(work);

    const Config cfg;
    report(1, "gradient battery", gradient_battery(cli));
    report(2, "identity at initialisation", identity_at_init());
    report(3, "independent oracles", oracle_agreement());
    report(4, "reference spot values", spot_values());
    const TrackingRuns runs = run_tracking(cfg);
    report(5, "tracking on static / rotation / deformation", tracking_quality(runs));
    report(6, "gate drops under occlusion", gate_under_occlusion(runs));
    report(7, "ablation is reproducible", ablation_repro(cli, work));
    report(8, "sampling, mining and update schedule", instrumentation(runs, cfg));

    std::sort(g_results.begin(), g_results.end(), [](auto& x, auto& y) { return x.first < y.first; });
    std::size_t passed = 0;
    for (const auto& [id, o] : g_results) passed += o.pass;
    const std::string summary =
        "acceptance: " + std::to_string(passed) + " of " + std::to_string(g_results.size()) + " criteria pass";
    std::printf("%s\n", summary.c_str());
    if (!report_path.empty()) {
        std::sort(g_lines.begin(), g_lines.end());
        std::ofstream out(report_path);
        for (const auto& [id, line] : g_lines) out << line << '\n';
        out << summary << '\n';
    }
    return strict && passed != g_results.size() ? 1 : 0;
}
