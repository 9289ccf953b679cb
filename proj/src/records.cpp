#include "egofov/records.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <ostream>
#include <sstream>

#include "egofov/error.hpp"
#include "json.hpp"

namespace egofov {

namespace {

using Json = nlohmann::ordered_json;

Json point(const std::optional<Point2>& p) {
    if (!p) return nullptr;
    return Json::array({p->x, p->y});
}

std::optional<Point2> read_point(const Json& j, const char* key) {
    if (!j.contains(key) || j[key].is_null()) return std::nullopt;
    const Json& v = j[key];
    if (!v.is_array() || v.size() != 2) throw Error(ErrorCode::Format, std::string("record field '") + key + "' must be [x, y]");
    return Point2{v[0].get<double>(), v[1].get<double>()};
}

Json finite_or_null(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

LocalizationStatus status_from_string(const std::string& s) {
    if (s == "matched") return LocalizationStatus::Matched;
    if (s == "sensor-fallback") return LocalizationStatus::SensorFallback;
    if (s == "failed") return LocalizationStatus::Failed;
    throw Error(ErrorCode::Format, "unknown status '" + s + "'");
}

}  // namespace

std::string to_json_line(const LocalizationResult& r, const RecordContext& context) {
    Json j;
    j["v"] = kRecordVersion;
    j["frame"] = r.frame;
    if (context.timestamp_ms) j["timestamp_ms"] = *context.timestamp_ms;
    if (context.reference) j["reference"] = *context.reference;
    if (context.reference_index) j["reference_index"] = *context.reference_index;
    j["f_pov"] = point(r.f_pov);
    j["f_ref"] = point(r.f_ref);
    j["f_s"] = point(r.f_s);
    j["f"] = point(r.f);
    j["alpha"] = r.alpha;
    j["score"] = finite_or_null(r.score);
    j["inliers"] = r.inliers;
    j["accepted"] = r.accepted;
    j["status"] = std::string(to_string(r.status));
    j["note"] = r.note;
    if (context.vision_only) j["vision_only"] = *context.vision_only;
    if (r.affine) j["affine"] = r.affine->m;
    return j.dump();
}

LocalizationResult parse_result_line(const std::string& line) {
    Json j;
    try {
        j = Json::parse(line);
    } catch (const Json::exception& e) {
        throw Error(ErrorCode::Format, std::string("result record is not valid JSON: ") + e.what());
    }
    if (!j.is_object() || !j.contains("v") || j["v"] != kRecordVersion) {
        throw Error(ErrorCode::Format, "result record lacks \"v\": 1");
    }
    LocalizationResult r;
    try {
        r.frame = j.at("frame").get<std::string>();
        if (auto p = read_point(j, "f_pov")) r.f_pov = *p;
        r.f_ref = read_point(j, "f_ref");
        r.f_s = read_point(j, "f_s");
        r.f = read_point(j, "f");
        r.alpha = j.value("alpha", 0.0);
        r.score = j.contains("score") && !j["score"].is_null() ? j["score"].get<double>()
                                                                : std::numeric_limits<double>::infinity();
        r.inliers = j.value("inliers", 0);
        r.accepted = j.value("accepted", false);
        r.status = status_from_string(j.value("status", std::string("failed")));
        r.note = j.value("note", std::string());
        if (j.contains("affine") && !j["affine"].is_null()) {
            AffineMap a;
            a.m = j["affine"].get<std::array<double, 6>>();
            r.affine = a;
        }
    } catch (const Json::exception& e) {
        throw Error(ErrorCode::Format, std::string("malformed result record: ") + e.what());
    }
    return r;
}

std::vector<LocalizationResult> load_results(const std::filesystem::path& path) {
    std::vector<std::filesystem::path> files;
    std::error_code ec;
    if (std::filesystem::is_directory(path, ec)) {
        for (const auto& item : std::filesystem::directory_iterator(path)) {
            if (item.is_regular_file() && item.path().extension() == ".jsonl") files.push_back(item.path());
        }
        std::sort(files.begin(), files.end());
    } else {
        files.push_back(path);
    }
    std::vector<LocalizationResult> out;
    for (const auto& f : files) {
        std::ifstream in(f);
        if (!in) throw Error(ErrorCode::Io, "cannot open " + f.string());
        std::string line;
        while (std::getline(in, line)) {
            if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
            out.push_back(parse_result_line(line));
        }
    }
    return out;
}

std::string to_json(const EvaluationReport& r) {
    return Json{{"v", kRecordVersion},
                {"count", r.count},
                {"correct", r.correct},
                {"correct_without_sensors", r.correct_without_sensors},
                {"accuracy", r.accuracy},
                {"accuracy_without_sensors", r.accuracy_without_sensors},
                {"accepted", r.accepted},
                {"accepted_correct", r.accepted_correct},
                {"mean_error", r.mean_error},
                {"median_error", r.median_error},
                {"failures", r.failures}}
        .dump(2);
}

void write_timeline(std::ostream& out, const PairTimeline& timeline) {
    out << "# " << timeline.first << ' ' << timeline.second << " step_ms " << timeline.step_ms << '\n';
    for (const auto& s : timeline.samples) {
        out << s.timestamp_ms << ' ';
        if (std::isfinite(s.score)) out << s.score; else out << "inf";
        out << ' ' << (s.joint ? 1 : 0) << '\n';
    }
}

std::string to_json_line(const Attribution& a) {
    return Json{{"v", kRecordVersion},
                {"start_ms", a.interval.start_ms},
                {"end_ms", a.interval.end_ms},
                {"participants", a.participants},
                {"label", a.label},
                {"score", finite_or_null(a.score)},
                {"low_confidence", a.low_confidence}}
        .dump();
}

void write_counts(const std::map<std::string, int>& counts, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
    Json c = Json::object();
    for (const auto& [label, n] : counts) c[label] = n;
    out << Json{{"v", kRecordVersion}, {"counts", c}}.dump(2) << '\n';
}

std::map<std::string, int> load_counts(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    const std::string text = ss.str();
    std::map<std::string, int> out;
    if (text.find_first_not_of(" \t\r\n") == std::string::npos) return out;
    try {
        const Json j = Json::parse(text);
        for (auto it = j.at("counts").begin(); it != j.at("counts").end(); ++it) {
            const int n = it.value().get<int>();
            if (n < 0) throw Error(ErrorCode::Format, "negative count for " + it.key());
            out[it.key()] = n;
        }
    } catch (const Json::exception& e) {
        throw Error(ErrorCode::Format, std::string("malformed attribution counts: ") + e.what());
    }
    return out;
}

}  // namespace egofov
