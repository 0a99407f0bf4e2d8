#pragma once

// On-disk formats: sequence directories, tracking results, curves and models.
//
//   <seq>/frames/0001.pgm ...      8-bit binary PGM, one per frame
//   <seq>/groundtruth_rect.txt     "x,y,w,h" per line, 0-based pixels
//   <seq>/meta.json                optional: name and occluded flags

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "gdt/image.hpp"
#include "gdt/metrics.hpp"
#include "gdt/network.hpp"
#include "gdt/synthseq.hpp"
#include "gdt/tracker.hpp"

namespace gdt {

namespace fs = std::filesystem;

namespace detail {

inline std::string format_real(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::string frame_name(std::size_t index) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%04zu.pgm", index + 1);
    return buf;
}

inline double parse_real(const std::string& field, const std::string& where) {
    std::size_t b = field.find_first_not_of(" \t\r");
    std::size_t e = field.find_last_not_of(" \t\r");
    if (b == std::string::npos) throw ValidationError(where + ": empty field");
    const std::string s = field.substr(b, e - b + 1);
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used != s.size()) throw ValidationError(where + ": bad number '" + s + "'");
        return v;
    } catch (const std::logic_error&) {
        throw ValidationError(where + ": bad number '" + s + "'");
    }
}

}  // namespace detail

/// Parses groundtruth_rect.txt content; errors name the offending line.
inline std::vector<BoundingBox> parse_groundtruth(std::istream& in, const std::string& source) {
    std::vector<BoundingBox> boxes;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        std::vector<std::string> fields;
        std::stringstream ss(line);
        for (std::string f; std::getline(ss, f, ',');) fields.push_back(f);
        const std::string where = source + " line " + std::to_string(lineno);
        if (fields.size() != 4) {
            throw ValidationError(where + ": expected 4 comma-separated fields, got " + std::to_string(fields.size()));
        }
        BoundingBox b{detail::parse_real(fields[0], where), detail::parse_real(fields[1], where),
                      detail::parse_real(fields[2], where), detail::parse_real(fields[3], where)};
        if (!b.valid()) throw ValidationError(where + ": box must have finite coordinates and positive size");
        boxes.push_back(b);
    }
    return boxes;
}

inline SequenceDataset load_sequence(const fs::path& dir) {
    if (!fs::is_directory(dir)) throw ValidationError("sequence directory not found: " + dir.string());
    SequenceDataset seq;
    seq.name = dir.filename().string();
    if (seq.name.empty()) seq.name = dir.parent_path().filename().string();

    const fs::path gt_path = dir / "groundtruth_rect.txt";
    std::ifstream gt_in(gt_path);
    if (!gt_in) throw ValidationError("missing " + gt_path.string());
    seq.gt = parse_groundtruth(gt_in, gt_path.string());

    std::vector<fs::path> frames;
    if (fs::is_directory(dir / "frames")) {
        for (const auto& e : fs::directory_iterator(dir / "frames")) {
            if (e.is_regular_file() && e.path().extension() == ".pgm") frames.push_back(e.path());
        }
    }
    std::sort(frames.begin(), frames.end());
    if (frames.size() != seq.gt.size()) {
        throw ValidationError(dir.string() + ": " + std::to_string(frames.size()) + " frames but " +
                              std::to_string(seq.gt.size()) + " ground-truth lines");
    }
    for (const auto& f : frames) seq.frames.push_back(read_pgm(f));
    seq.occluded.assign(seq.frames.size(), false);

    const fs::path meta_path = dir / "meta.json";
    if (fs::exists(meta_path)) {
        std::ifstream in(meta_path);
        try {
            const auto j = nlohmann::json::parse(in);
            if (j.contains("name")) seq.name = j.at("name").get<std::string>();
            if (j.contains("occluded")) {
                const auto occ = j.at("occluded").get<std::vector<bool>>();
                if (occ.size() != seq.frames.size()) throw ValidationError(meta_path.string() + ": occluded length mismatch");
                seq.occluded = occ;
            }
        } catch (const nlohmann::json::exception& e) {
            throw ValidationError(meta_path.string() + ": " + e.what());
        }
    }
    return seq;
}

inline void save_sequence(const SequenceDataset& seq, const fs::path& dir) {
    if (seq.frames.size() != seq.gt.size()) throw ValidationError("save_sequence: frame and ground-truth counts differ");
    std::error_code ec;
    fs::create_directories(dir / "frames", ec);
    if (ec) throw RuntimeFailure("cannot create " + (dir / "frames").string() + ": " + ec.message());
    for (std::size_t t = 0; t < seq.frames.size(); ++t) write_pgm(dir / "frames" / detail::frame_name(t), seq.frames[t]);
    std::ofstream gt(dir / "groundtruth_rect.txt");
    if (!gt) throw RuntimeFailure("cannot write " + (dir / "groundtruth_rect.txt").string());
    for (const auto& b : seq.gt) {
        gt << detail::format_real(b.x) << ',' << detail::format_real(b.y) << ',' << detail::format_real(b.w) << ','
           << detail::format_real(b.h) << '\n';
    }
    nlohmann::json meta{{"name", seq.name}, {"occluded", seq.occluded}};
    std::ofstream m(dir / "meta.json");
    if (!m) throw RuntimeFailure("cannot write " + (dir / "meta.json").string());
    m << meta.dump(2) << '\n';
}

// --- results -----------------------------------------------------------------

inline nlohmann::json box_json(const BoundingBox& b) { return {b.x, b.y, b.w, b.h}; }

inline BoundingBox box_from_json(const nlohmann::json& j) {
    if (!j.is_array() || j.size() != 4) throw ValidationError("box must be an array [x, y, w, h]");
    return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>()};
}

inline std::vector<double> result_ious(const TrackResult& r) {
    std::vector<double> o;
    for (std::size_t i = 0; i < r.boxes.size(); ++i) o.push_back(iou(r.boxes[i], r.gt[i]));
    return o;
}

inline std::vector<double> result_errors(const TrackResult& r) {
    std::vector<double> e;
    for (std::size_t i = 0; i < r.boxes.size(); ++i) e.push_back(center_error(r.boxes[i], r.gt[i]));
    return e;
}

inline void write_curves_csv(const fs::path& path, const Curve& precision, const Curve& success) {
    std::ofstream out(path);
    if (!out) throw RuntimeFailure("cannot write " + path.string());
    out << "precision_threshold_px,precision,success_threshold_iou,success\n";
    for (std::size_t i = 0; i < precision.values.size(); ++i) {
        out << detail::format_real(precision.thresholds[i]) << ',' << detail::format_real(precision.values[i]) << ','
            << detail::format_real(success.thresholds[i]) << ',' << detail::format_real(success.values[i]) << '\n';
    }
}

struct PlotSeries {
    std::string label;
    Curve precision;
    Curve success;
};

/// Two side-by-side panels: precision vs. pixel threshold, success vs. overlap threshold.
inline void write_curves_svg(const fs::path& path, const std::vector<PlotSeries>& series) {
    static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};
    const double pw = 320, ph = 240, margin = 40;
    std::ofstream out(path);
    if (!out) throw RuntimeFailure("cannot write " + path.string());
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << 2 * pw + 3 * margin << "\" height=\""
        << ph + 2 * margin + 16.0 * static_cast<double>(series.size()) << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
    for (int panel = 0; panel < 2; ++panel) {
        const double x0 = margin + panel * (pw + margin), y0 = margin;
        const double tmax = panel == 0 ? 50.0 : 1.0;
        out << "<rect x=\"" << x0 << "\" y=\"" << y0 << "\" width=\"" << pw << "\" height=\"" << ph
            << "\" fill=\"none\" stroke=\"black\"/>\n";
        out << "<text x=\"" << x0 + pw / 2 << "\" y=\"" << y0 - 8 << "\" text-anchor=\"middle\">"
            << (panel == 0 ? "Precision plot" : "Success plot") << "</text>\n";
        out << "<text x=\"" << x0 + pw / 2 << "\" y=\"" << y0 + ph + 28 << "\" text-anchor=\"middle\">"
            << (panel == 0 ? "location error threshold (px)" : "overlap threshold") << "</text>\n";
        for (std::size_t s = 0; s < series.size(); ++s) {
            const Curve& c = panel == 0 ? series[s].precision : series[s].success;
            out << "<polyline fill=\"none\" stroke=\"" << colors[s % 6] << "\" stroke-width=\"1.5\" points=\"";
            for (std::size_t i = 0; i < c.values.size(); ++i) {
                out << x0 + pw * c.thresholds[i] / tmax << ',' << y0 + ph * (1.0 - c.values[i]) << ' ';
            }
            out << "\"/>\n";
        }
    }
    for (std::size_t s = 0; s < series.size(); ++s) {
        char buf[160];
        std::snprintf(buf, sizeof buf, "%s  precision@20 %.3f  success AUC %.3f", series[s].label.c_str(),
                      precision_at_20(series[s].precision), series[s].success.auc);
        out << "<text x=\"" << margin << "\" y=\"" << ph + 2 * margin + 16.0 * static_cast<double>(s) + 4
            << "\" fill=\"" << colors[s % 6] << "\">" << buf << "</text>\n";
    }
    out << "</svg>\n";
}

inline nlohmann::json result_json(const TrackResult& r) {
    nlohmann::json frames = nlohmann::json::array();
    for (std::size_t i = 0; i < r.boxes.size(); ++i) {
        nlohmann::json f{{"frame", i}, {"box", box_json(r.boxes[i])}, {"confidence", r.confidences[i]}};
        f["mean_gate"] = r.mean_gates[i] ? nlohmann::json(*r.mean_gates[i]) : nlohmann::json(nullptr);
        frames.push_back(f);
    }
    nlohmann::json gt = nlohmann::json::array();
    for (const auto& b : r.gt) gt.push_back(box_json(b));
    return {{"sequence", r.sequence}, {"variant", r.variant}, {"frames", frames}, {"gt", gt}};
}

inline TrackResult result_from_json(const nlohmann::json& j) {
    TrackResult r;
    try {
        r.sequence = j.at("sequence").get<std::string>();
        r.variant = j.at("variant").get<std::string>();
        for (const auto& f : j.at("frames")) {
            r.boxes.push_back(box_from_json(f.at("box")));
            r.confidences.push_back(f.at("confidence").get<double>());
            const auto& g = f.at("mean_gate");
            r.mean_gates.push_back(g.is_null() ? std::nullopt : std::optional<double>(g.get<double>()));
        }
        for (const auto& b : j.at("gt")) r.gt.push_back(box_from_json(b));
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("malformed result: ") + e.what());
    }
    if (r.gt.size() != r.boxes.size() || r.boxes.empty()) throw ValidationError("result: frame and ground-truth counts differ");
    return r;
}

/// Writes <path> (JSON) plus <stem>_curves.csv and <stem>_curves.svg next to it.
inline void save_result(const TrackResult& r, const fs::path& path) {
    if (r.boxes.size() != r.gt.size() || r.confidences.size() != r.boxes.size() || r.mean_gates.size() != r.boxes.size()) {
        throw ValidationError("save_result: per-frame lengths differ");
    }
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw RuntimeFailure("cannot write " + path.string());
    out << result_json(r).dump(2) << '\n';
    const Curve p = precision_curve(result_errors(r));
    const Curve s = success_curve(result_ious(r));
    const fs::path stem = path.parent_path() / path.stem();
    write_curves_csv(stem.string() + "_curves.csv", p, s);
    write_curves_svg(stem.string() + "_curves.svg", {{r.sequence + " (" + r.variant + ")", p, s}});
}

inline TrackResult load_result(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open result " + path.string());
    try {
        return result_from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::parse_error& e) {
        throw ValidationError(path.string() + ": " + e.what());
    }
}

// --- models ------------------------------------------------------------------

inline nlohmann::json tensor_json(const Tensor& t) {
    return {{"dims", t.dims()}, {"data", std::vector<double>(t.values().begin(), t.values().end())}};
}

inline Tensor tensor_from_json(const nlohmann::json& j) {
    Tensor t(j.at("dims").get<Dims>());
    const auto data = j.at("data").get<std::vector<double>>();
    if (data.size() != t.size()) throw ValidationError("tensor data length does not match its dims");
    std::copy(data.begin(), data.end(), t.values().begin());
    return t;
}

inline nlohmann::json model_json(const TrackerModel& m) {
    nlohmann::json params = nlohmann::json::object();
    TrackerModel copy = m;
    for (auto [p, role] : copy.all_groups()) params[p->name] = tensor_json(p->value);
    nlohmann::json j{{"format", "gdt-model-1"}, {"variant", to_string(m.variant)}, {"network", m.shape}, {"params", params}};
    if (m.bbox_reg) j["bbox_reg"] = {{"weights", tensor_json(m.bbox_reg->weights)}, {"intercept", tensor_json(m.bbox_reg->intercept)}};
    return j;
}

inline TrackerModel model_from_json(const nlohmann::json& j) {
    try {
        if (j.at("format") != "gdt-model-1") throw ValidationError("unknown model format");
        TrackerModel m = TrackerModel::create(j.at("network").get<NetworkConfig>(), parse_variant(j.at("variant")), 0);
        const auto& params = j.at("params");
        for (auto [p, role] : m.all_groups()) {
            if (!params.contains(p->name)) throw ValidationError("model is missing parameter " + p->name);
            Tensor v = tensor_from_json(params.at(p->name));
            if (v.dims() != p->value.dims()) {
                throw ValidationError("parameter " + p->name + " has dims " + dims_to_string(v.dims()) + ", expected " +
                                      dims_to_string(p->value.dims()));
            }
            p->value = std::move(v);
        }
        if (j.contains("bbox_reg")) {
            m.bbox_reg = BoxRegressor{tensor_from_json(j["bbox_reg"].at("weights")), tensor_from_json(j["bbox_reg"].at("intercept"))};
        }
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("malformed model: ") + e.what());
    }
}

inline void save_model(const TrackerModel& m, const fs::path& path) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw RuntimeFailure("cannot write model " + path.string());
    out << model_json(m).dump() << '\n';
}

inline TrackerModel load_model(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open model " + path.string());
    try {
        return model_from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::parse_error& e) {
        throw ValidationError(path.string() + ": " + e.what());
    }
}

}  // namespace gdt
