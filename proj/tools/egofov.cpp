#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "egofov/config.hpp"
#include "egofov/corpus.hpp"
#include "egofov/error.hpp"
#include "egofov/joint.hpp"
#include "egofov/pipeline.hpp"
#include "egofov/records.hpp"
#include "egofov/synth.hpp"

namespace fs = std::filesystem;
using namespace egofov;

namespace {

constexpr int kExitAccepted = 0;
constexpr int kExitError = 1;
constexpr int kExitRejected = 2;

struct Common {
    std::string config;
    std::vector<std::string> set;
    int jobs = 1;

    RunConfig resolve() const {
        return resolve_config(config.empty() ? std::nullopt : std::optional<fs::path>(config), set);
    }
};

void add_common(CLI::App* cmd, Common& c) {
    cmd->add_option("--config", c.config, "JSON config file (default: $EGOFOV_CONFIG)");
    cmd->add_option("--set", c.set, "Override a config key, e.g. ransac.iterations=500")->take_all();
}

void add_jobs(CLI::App* cmd, Common& c) {
    cmd->add_option("--jobs", c.jobs, "Worker threads")->check(CLI::PositiveNumber);
}

// Output stream that is stdout unless a path is given.
class Output {
public:
    explicit Output(const std::string& path) {
        if (!path.empty()) {
            if (const auto parent = fs::path(path).parent_path(); !parent.empty()) fs::create_directories(parent);
            file_ = std::make_unique<std::ofstream>(path);
            if (!*file_) throw Error(ErrorCode::Io, "cannot write " + path);
        }
    }
    std::ostream& get() { return file_ ? *file_ : std::cout; }

private:
    std::unique_ptr<std::ofstream> file_;
};

template <class Task>
void parallel(std::size_t count, int jobs, Task task) {
    const std::size_t workers = std::min<std::size_t>(count, static_cast<std::size_t>(std::max(1, jobs)));
    if (workers <= 1) {
        for (std::size_t i = 0; i < count; ++i) task(i);
        return;
    }
    std::vector<std::thread> threads;
    std::vector<std::exception_ptr> failures(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        threads.emplace_back([&, w] {
            try {
                for (std::size_t i = w; i < count; i += workers) task(i);
            } catch (...) {
                failures[w] = std::current_exception();
            }
        });
    }
    for (auto& t : threads) t.join();
    for (auto& f : failures) {
        if (f) std::rethrow_exception(f);
    }
}

struct Reference {
    std::string id;
    GrayImage image;
    FeatureSet features;
    ReferenceGeometry geometry;
    const ReferenceEntry* entry = nullptr;
    double heading = 0.0;
};

Reference load_reference(const ReferenceEntry& entry, const LocalizerConfig& config) {
    Reference r;
    r.id = entry.id;
    try {
        r.image = load_image(entry.image_path);
    } catch (const Error& e) {
        throw Error(ErrorCode::Load, "reference '" + entry.id + "': " + e.what());
    }
    r.features = extract_features(r.image, config.features);
    r.geometry = entry.geometry();
    r.entry = &entry;
    r.heading = entry.heading();
    return r;
}

std::optional<HeadPose> pick_pose(const std::vector<HeadPose>& trace, std::optional<std::int64_t> timestamp,
                                  std::int64_t tolerance) {
    if (trace.empty()) return std::nullopt;
    if (!timestamp) return trace.front();
    return pose_at(trace, *timestamp, tolerance);
}

// Lowest-scoring accepted result, else lowest-scoring matched, else the first.
std::size_t best_result(const std::vector<LocalizationResult>& results) {
    std::size_t best = 0;
    auto rank = [](const LocalizationResult& r) {
        if (r.accepted) return 0;
        if (r.status == LocalizationStatus::Matched) return 1;
        if (r.status == LocalizationStatus::SensorFallback) return 2;
        return 3;
    };
    for (std::size_t i = 1; i < results.size(); ++i) {
        const int a = rank(results[i]), b = rank(results[best]);
        if (a < b || (a == b && results[i].score < results[best].score)) best = i;
    }
    return best;
}

int run_localize(const Common& common, const std::string& pov_path, const std::string& ref_path,
                 const std::string& corpus_path, const std::string& entry_id, std::optional<double> lat,
                 std::optional<double> lon, int candidates, std::optional<double> ref_yaw,
                 std::optional<double> ref_heading, double ref_hfov, const std::string& sensors,
                 std::optional<std::int64_t> timestamp, std::optional<double> alpha, const std::string& out_path,
                 bool show_info, const std::string& frame_name) {
    RunConfig config = common.resolve();
    if (alpha) {
        config.localizer.alpha_override = *alpha;
        config.validate();
    }
    const GrayImage pov = load_image(pov_path);
    const FeatureSet pov_features = extract_features(pov, config.localizer.features);

    Corpus corpus;
    std::vector<Reference> refs;
    if (!ref_path.empty()) {
        Reference r;
        r.id = fs::path(ref_path).stem().string();
        r.image = load_image(ref_path);
        r.features = extract_features(r.image, config.localizer.features);
        if (ref_yaw) {
            r.geometry = PanoramaGeometry{r.image.width(), r.image.height(), *ref_yaw * M_PI / 180.0};
        } else if (ref_heading) {
            r.geometry = FlatGeometry{r.image.width(), r.image.height(), *ref_heading * M_PI / 180.0, 0.0,
                                      ref_hfov * M_PI / 180.0};
        }
        refs.push_back(std::move(r));
    } else {
        corpus = load_corpus(corpus_path);
        std::vector<const ReferenceEntry*> chosen;
        if (!entry_id.empty()) {
            const ReferenceEntry* e = corpus.find(entry_id);
            if (!e) throw Error(ErrorCode::Lookup, "corpus has no entry '" + entry_id + "'");
            chosen.push_back(e);
        } else if (lat && lon) {
            chosen = nearest_references(corpus, *lat, *lon, static_cast<std::size_t>(candidates));
        } else {
            throw Error(ErrorCode::Parameter, "--corpus needs --entry or --lat/--lon");
        }
        for (const auto* e : chosen) refs.push_back(load_reference(*e, config.localizer));
    }

    std::optional<HeadPose> pose;
    if (!sensors.empty()) pose = pick_pose(load_sensor_trace(sensors), timestamp, config.joint.pose_tolerance_ms);

    std::vector<LocalizationResult> results;
    for (const auto& r : refs) {
        const ReferenceView view{&r.image, &r.features, r.geometry};
        results.push_back(localize(pov, pov_features, view, pose, config.localizer));
    }
    const std::size_t best = best_result(results);
    LocalizationResult& result = results[best];
    result.frame = frame_name.empty() ? fs::path(pov_path).stem().string() : frame_name;

    RecordContext ctx;
    ctx.reference = refs[best].id;
    if (refs.size() > 1) ctx.reference_index = static_cast<int>(best);
    Output out(out_path);
    out.get() << to_json_line(result, ctx) << '\n';

    if (show_info && refs[best].entry && result.f) {
        if (const auto region = annotation_at(*refs[best].entry, *result.f)) {
            std::cerr << "[" << region->label << "] " << region->info << '\n';
        } else {
            std::cerr << "no annotated region at the focus\n";
        }
    }
    return result.accepted ? kExitAccepted : kExitRejected;
}

int run_video(const Common& common, const std::string& frames_dir, const std::vector<std::string>& ref_paths,
              const std::string& corpus_path, const std::string& sensors, int stride, const std::string& out_path) {
    const RunConfig config = common.resolve();
    std::vector<StreamFrame> frames = list_frames(frames_dir, false);
    std::vector<StreamFrame> sampled;
    for (std::size_t k = 0; k < frames.size(); k += static_cast<std::size_t>(stride)) sampled.push_back(frames[k]);

    Corpus corpus;
    std::vector<Reference> refs;
    if (!corpus_path.empty()) {
        corpus = load_corpus(corpus_path);
        for (const auto& e : corpus.entries()) refs.push_back(load_reference(e, config.localizer));
    }
    for (const auto& path : ref_paths) {
        Reference r;
        r.id = fs::path(path).stem().string();
        r.image = load_image(path);
        r.features = extract_features(r.image, config.localizer.features);
        refs.push_back(std::move(r));
    }
    if (refs.empty()) throw Error(ErrorCode::Parameter, "video needs --ref or --corpus");
    const std::vector<HeadPose> trace = sensors.empty() ? std::vector<HeadPose>{} : load_sensor_trace(sensors);

    std::vector<std::string> lines(sampled.size());
    parallel(sampled.size(), common.jobs, [&](std::size_t i) {
        const StreamFrame& frame = sampled[i];
        const GrayImage pov = load_image(frame.path);
        const FeatureSet pov_features = extract_features(pov, config.localizer.features);
        const auto pose = trace.empty() ? std::nullopt : pose_at(trace, frame.timestamp_ms, config.joint.pose_tolerance_ms);

        std::vector<ReferenceCandidate> candidates;
        for (const auto& r : refs) {
            ReferenceCandidate c;
            c.image = &r.image;
            c.heading = r.heading;
            c.panoramic = std::holds_alternative<PanoramaGeometry>(r.geometry);
            try {
                c.match = match_images(pov_features, r.features, r.image, pov_center(pov), config.localizer);
                if (c.panoramic) c.match->f_ref.x = wrap_coordinate(c.match->f_ref.x, r.image.width());
            } catch (const Error& e) {
                if (e.code() != ErrorCode::InsufficientMatches && e.code() != ErrorCode::NoConsensus &&
                    e.code() != ErrorCode::EmptyIndex) {
                    throw;
                }
            }
            candidates.push_back(std::move(c));
        }
        std::optional<double> yaw;
        if (pose) yaw = euler_from_rotation(pose->rotation).yaw;
        const Selection sel = select_reference(pov, candidates, yaw, config.localizer.gist, config.localizer.window);
        const Reference& chosen = refs[sel.index];
        const ReferenceView view{&chosen.image, &chosen.features, chosen.geometry};
        LocalizationResult result = localize(pov, pov_features, view, pose, config.localizer);
        result.frame = frame.path.filename().string();
        RecordContext ctx;
        ctx.timestamp_ms = frame.timestamp_ms;
        ctx.reference = chosen.id;
        ctx.reference_index = static_cast<int>(sel.index);
        ctx.vision_only = !pose.has_value();
        lines[i] = to_json_line(result, ctx);
    });
    Output out(out_path);
    for (const auto& line : lines) out.get() << line << '\n';
    return kExitAccepted;
}

// Splits of `people` into two blocks of at least two, each reported once.
std::vector<std::vector<std::set<std::string>>> two_block_partitions(const std::vector<std::string>& people) {
    std::vector<std::vector<std::set<std::string>>> out;
    const std::size_t n = people.size();
    if (n < 4 || n > 16) return out;
    for (std::uint32_t mask = 1; mask < (1u << n) - 1; ++mask) {
        if (!(mask & 1u)) continue;  // person 0 always in the first block
        std::set<std::string> a, b;
        for (std::size_t k = 0; k < n; ++k) ((mask >> k) & 1u ? a : b).insert(people[k]);
        if (a.size() >= 2 && b.size() >= 2) out.push_back({a, b});
    }
    return out;
}

std::string json_string_list(const std::set<std::string>& items) {
    std::string s = "[";
    bool first = true;
    for (const auto& i : items) {
        s += (first ? "\"" : ",\"") + i + "\"";
        first = false;
    }
    return s + "]";
}

std::string json_times(const std::vector<std::int64_t>& times) {
    std::string s = "[";
    for (std::size_t i = 0; i < times.size(); ++i) s += (i ? "," : "") + std::to_string(times[i]);
    return s + "]";
}

int run_joint(const Common& common, const std::string& session_path, const std::string& corpus_path, int k,
              const std::string& out_dir) {
    if (k != 2) {
        throw Error(ErrorCode::Parameter,
                    "only k = 2 is supported; larger groups are found from pair timelines (group events)");
    }
    const RunConfig config = common.resolve();
    const SessionFile session = load_session(session_path);
    const auto timelines = joint_timelines(session.streams, config.joint, config.localizer, common.jobs);

    const fs::path out(out_dir);
    fs::create_directories(out / "timelines");
    for (const auto& tl : timelines) {
        std::ofstream f(out / "timelines" / (tl.first + "-" + tl.second + ".txt"));
        if (!f) throw Error(ErrorCode::Io, "cannot write timeline for " + tl.first + "-" + tl.second);
        write_timeline(f, tl);
    }

    std::vector<std::pair<const PairTimeline*, Interval>> intervals;
    {
        std::ofstream f(out / "intervals.jsonl");
        for (const auto& tl : timelines) {
            for (const auto& iv : joint_intervals(tl, config.joint.min_duration_ms)) {
                intervals.emplace_back(&tl, iv);
                f << "{\"v\":1,\"pair\":[\"" << tl.first << "\",\"" << tl.second << "\"],\"start_ms\":" << iv.start_ms
                  << ",\"end_ms\":" << iv.end_ms << "}\n";
            }
        }
    }

    std::vector<std::string> people;
    for (const auto& s : session.streams) people.push_back(s.person_id);
    {
        std::ofstream f(out / "group_events.jsonl");
        const std::set<std::string> everyone(people.begin(), people.end());
        f << "{\"v\":1,\"type\":\"group\",\"members\":" << json_string_list(everyone)
          << ",\"timestamps\":" << json_times(group_events(timelines, everyone)) << "}\n";
        for (const auto& blocks : two_block_partitions(people)) {
            f << "{\"v\":1,\"type\":\"partition\",\"blocks\":[" << json_string_list(blocks[0]) << ","
              << json_string_list(blocks[1]) << "],\"timestamps\":" << json_times(partition_events(timelines, blocks))
              << "}\n";
        }
    }

    std::map<std::string, int> counts;
    if (!corpus_path.empty()) {
        const Corpus corpus = load_corpus(corpus_path);
        const auto references = load_references(corpus, config.localizer.features);
        std::vector<Attribution> attributions(intervals.size());
        parallel(intervals.size(), common.jobs, [&](std::size_t i) {
            const auto& [tl, iv] = intervals[i];
            attributions[i] = attribute_exhibit(iv, {tl->first, tl->second}, session.streams, references,
                                                config.joint, config.localizer);
        });
        std::ofstream f(out / "attributions.jsonl");
        for (const auto& a : attributions) f << to_json_line(a) << '\n';
        counts = viewer_counts(attributions);
    }
    write_counts(counts, out / "attributions.json");

    if (session.floorplan) {
        const HeatmapGrid grid = build_heatmap(counts, *session.floorplan, config.joint.heatmap_sigma);
        save_ppm(render_heatmap(grid), out / "heatmap.ppm");
        write_heatmap_sidecar(grid, counts, out / "heatmap.txt");
    }
    std::cout << timelines.size() << " pair timelines, " << intervals.size() << " joint intervals\n";
    return kExitAccepted;
}

int run_heatmap(const Common& common, const std::string& attributions, const std::string& floorplan,
                std::optional<double> sigma, const std::string& out_path) {
    const RunConfig config = common.resolve();
    const auto counts = load_counts(attributions);
    const Floorplan plan = load_floorplan(floorplan);
    const HeatmapGrid grid = build_heatmap(counts, plan, sigma.value_or(config.joint.heatmap_sigma));
    if (const auto parent = fs::path(out_path).parent_path(); !parent.empty()) fs::create_directories(parent);
    save_ppm(render_heatmap(grid), out_path);
    write_heatmap_sidecar(grid, counts, fs::path(out_path).replace_extension(".txt"));
    return kExitAccepted;
}

void write_script(const std::vector<std::vector<int>>& script, const std::vector<std::string>& ids, const fs::path& path) {
    std::ofstream f(path);
    f << "# person: exhibit index per second (-1 elsewhere)\n";
    for (std::size_t p = 0; p < script.size(); ++p) {
        f << ids[p] << ':';
        for (int e : script[p]) f << ' ' << e;
        f << '\n';
    }
}

int run_synth(const std::string& spec_path, int count, const std::string& out_dir, const std::string& kind,
              std::optional<std::uint64_t> seed, int seconds) {
    const fs::path out(out_dir);
    fs::create_directories(out);
    if (kind == "pairs") {
        DatasetSpec spec;
        if (!spec_path.empty()) {
            std::ifstream in(spec_path);
            if (!in) throw Error(ErrorCode::Io, "cannot open " + spec_path);
            std::stringstream ss;
            ss << in.rdbuf();
            spec = parse_dataset_spec(ss.str());
        } else {
            spec.truth.noise_sigma = 10.0;
            spec.truth.brightness_shift = 20.0;
            spec.truth.occlusion = 0.2;
            spec.truth.drift_rate = 2.0 * M_PI / 180.0;
            spec.textures = {Texture::Glyphs, Texture::Noise, Texture::Checker};
        }
        if (seed) spec.scene.seed = *seed;
        write_dataset(spec, count, out);
        std::ofstream(out / "spec.json") << to_json(spec) << '\n';
        std::cout << "wrote " << count << " pairs to " << out.string() << '\n';
        return kExitAccepted;
    }
    if (kind == "session") {
        const ScriptedSession session =
            generate_session(seed.value_or(7), demo_session_script(), 4, demo_session_params());
        const auto streams = session_streams(session);
        write_session(out, streams, session_floorplan(session));
        save_pgm(session.panorama, out / "gallery.pgm");
        ReferenceEntry entry;
        entry.id = "gallery";
        entry.image_path = fs::absolute(out / "gallery.pgm");
        entry.kind = ReferenceKind::Panorama;
        entry.width = session.panorama.width();
        entry.height = session.panorama.height();
        entry.yaw_at_left_edge_deg = session.geometry.yaw_at_left_edge * 180.0 / M_PI;
        entry.annotations = session.exhibits;
        write_corpus(Corpus({entry}), out / "manifest.json");
        write_floorplan(session_floorplan(session), out / "floorplan.json");
        std::vector<std::string> ids;
        for (const auto& s : streams) ids.push_back(s.person_id);
        write_script(session.script, ids, out / "script.txt");
        std::cout << "wrote session with " << streams.size() << " people to " << out.string() << '\n';
        return kExitAccepted;
    }
    if (kind == "video") {
        TruthParams p;
        p.noise_sigma = 5.0;
        p.brightness_shift = 10.0;
        p.drift_rate = M_PI / 180.0;
        const ScriptedVideo video = generate_scripted_video(seed.value_or(11), seconds, p);
        fs::create_directories(out / "frames");
        fs::create_directories(out / "cameras");
        std::vector<ReferenceEntry> entries;
        for (std::size_t c = 0; c < video.cameras.size(); ++c) {
            const std::string id = "camera" + std::to_string(c);
            save_pgm(video.cameras[c], out / "cameras" / (id + ".pgm"));
            ReferenceEntry e;
            e.id = id;
            e.image_path = fs::absolute(out / "cameras" / (id + ".pgm"));
            e.kind = ReferenceKind::Flat;
            e.width = video.cameras[c].width();
            e.height = video.cameras[c].height();
            const auto& g = video.camera_geometry[c];
            e.heading_deg = g.heading * 180.0 / M_PI;
            e.pitch_deg = g.pitch * 180.0 / M_PI;
            e.hfov_deg = g.hfov * 180.0 / M_PI;
            entries.push_back(std::move(e));
        }
        write_corpus(Corpus(std::move(entries)), out / "manifest.json");
        std::ofstream script(out / "script.txt");
        for (const auto& f : video.frames) {
            char name[32];
            std::snprintf(name, sizeof name, "%09lld.pgm", static_cast<long long>(f.timestamp_ms));
            save_pgm(f.image, out / "frames" / name);
            script << f.timestamp_ms << ' ' << f.camera << ' ' << f.focus.x << ' ' << f.focus.y << '\n';
        }
        std::ofstream sensors(out / "sensors.txt");
        write_sensor_trace(sensors, video.poses);
        std::cout << "wrote " << video.frames.size() << " frames to " << out.string() << '\n';
        return kExitAccepted;
    }
    throw Error(ErrorCode::Parameter, "unknown synth kind '" + kind + "' (pairs, session, video)");
}

int run_eval(const std::string& results, const std::string& truth, double radius, const std::string& out_path) {
    const auto records = load_results(results);
    const auto truths = load_truths(truth);
    const EvaluationReport report = evaluate(records, truths, radius);
    Output out(out_path);
    out.get() << to_json(report) << '\n';
    return kExitAccepted;
}

int run_batch(const Common& common, const std::string& data_dir, std::optional<double> alpha, const std::string& out_path) {
    RunConfig config = common.resolve();
    if (alpha) {
        config.localizer.alpha_override = *alpha;
        config.validate();
    }
    const fs::path data(data_dir);
    const Corpus corpus = load_corpus(data / "manifest.json");
    const auto& entries = corpus.entries();
    std::vector<std::string> lines(entries.size());
    parallel(entries.size(), common.jobs, [&](std::size_t i) {
        const ReferenceEntry& e = entries[i];
        const GrayImage ref = load_image(e.image_path);
        const GrayImage pov = load_image(data / "pov" / (e.id + ".pgm"));
        std::optional<HeadPose> pose;
        const fs::path trace = data / "sensors" / (e.id + ".txt");
        if (fs::exists(trace)) pose = pick_pose(load_sensor_trace(trace), std::nullopt, 0);
        const ReferenceView view{&ref, nullptr, e.geometry()};
        LocalizationResult r = localize(pov, view, pose, config.localizer);
        r.frame = e.id;
        RecordContext ctx;
        ctx.reference = e.id;
        lines[i] = to_json_line(r, ctx);
    });
    Output out(out_path.empty() ? (data / "results" / "results.jsonl").string() : out_path);
    for (const auto& line : lines) out.get() << line << '\n';
    return kExitAccepted;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Egocentric field-of-view localization"};
    app.require_subcommand(1);
    Common common;

    auto* loc = app.add_subcommand("localize", "Localize one POV image against a reference");
    std::string pov, ref, corpus, entry, sensors, out, frame;
    std::optional<double> lat, lon, ref_yaw, ref_heading, alpha;
    std::optional<std::int64_t> timestamp;
    double ref_hfov = 90.0;
    int candidates = 1;
    bool show_info = false;
    add_common(loc, common);
    loc->add_option("--pov", pov, "POV image (PGM/PPM)")->required()->check(CLI::ExistingFile);
    auto* ref_opt = loc->add_option("--ref", ref, "Reference image")->check(CLI::ExistingFile);
    auto* corpus_opt = loc->add_option("--corpus", corpus, "Reference manifest");
    ref_opt->excludes(corpus_opt);
    loc->add_option("--entry", entry, "Corpus entry id")->needs(corpus_opt);
    loc->add_option("--lat", lat, "Latitude, degrees")->needs(corpus_opt);
    loc->add_option("--lon", lon, "Longitude, degrees")->needs(corpus_opt);
    loc->add_option("--candidates", candidates, "Score the N nearest references")->check(CLI::PositiveNumber);
    loc->add_option("--ref-yaw", ref_yaw, "Treat --ref as a panorama with this yaw at its left edge, degrees");
    loc->add_option("--ref-heading", ref_heading, "Treat --ref as a flat view with this heading, degrees");
    loc->add_option("--ref-hfov", ref_hfov, "Horizontal field of view of a flat --ref, degrees");
    loc->add_option("--sensors", sensors, "Sensor trace")->check(CLI::ExistingFile);
    loc->add_option("--timestamp", timestamp, "Pose timestamp in the trace, ms (default: first record)");
    loc->add_option("--alpha", alpha, "Blend weight override in [0, 1]")->check(CLI::Range(0.0, 1.0));
    loc->add_option("--out", out, "Output record file (default: stdout)");
    loc->add_option("--frame", frame, "Frame name in the record (default: POV file stem)");
    loc->add_flag("--show-info", show_info, "Print the annotation info card at the focus");

    auto* vid = app.add_subcommand("video", "Localize sampled video frames with camera selection");
    std::string frames_dir, vid_corpus, vid_sensors, vid_out;
    std::vector<std::string> vid_refs;
    int stride = 1;
    add_common(vid, common);
    add_jobs(vid, common);
    vid->add_option("--frames", frames_dir, "Frame directory; file names carry ms timestamps")->required();
    vid->add_option("--ref", vid_refs, "Reference image (repeatable)");
    vid->add_option("--corpus", vid_corpus, "Reference manifest; every entry is a candidate");
    vid->add_option("--sensors", vid_sensors, "Sensor trace");
    vid->add_option("--stride", stride, "Use every n-th frame")->check(CLI::PositiveNumber);
    vid->add_option("--out", vid_out, "Output records (default: stdout)");

    auto* joint = app.add_subcommand("joint", "Joint attention over a multi-person session");
    std::string session, joint_corpus, joint_out;
    int k = 2;
    add_common(joint, common);
    add_jobs(joint, common);
    joint->add_option("--session", session, "Session file")->required()->check(CLI::ExistingFile);
    joint->add_option("--corpus", joint_corpus, "Annotated reference manifest for exhibit attribution");
    joint->add_option("--k", k, "People per match (only 2)");
    joint->add_option("--out", joint_out, "Output directory")->required();

    auto* heat = app.add_subcommand("heatmap", "Render an exhibit heatmap");
    std::string attributions, floorplan, heat_out;
    std::optional<double> sigma;
    add_common(heat, common);
    heat->add_option("--attributions", attributions, "Attribution counts file")->required()->check(CLI::ExistingFile);
    heat->add_option("--floorplan", floorplan, "Floorplan JSON")->required()->check(CLI::ExistingFile);
    heat->add_option("--sigma", sigma, "Kernel sigma, floorplan pixels")->check(CLI::PositiveNumber);
    heat->add_option("--out", heat_out, "Output PPM (sidecar .txt next to it)")->required();

    auto* syn = app.add_subcommand("synth", "Generate synthetic data");
    std::string spec, syn_out, kind = "pairs";
    int count = 10, seconds = 60;
    std::optional<std::uint64_t> seed;
    syn->add_option("--spec", spec, "Dataset settings JSON (pairs)")->check(CLI::ExistingFile);
    syn->add_option("--count", count, "Number of pairs")->check(CLI::NonNegativeNumber);
    syn->add_option("--out", syn_out, "Output directory")->required();
    syn->add_option("--kind", kind, "pairs, session or video")->check(CLI::IsMember({"pairs", "session", "video"}));
    syn->add_option("--seed", seed, "Seed override");
    syn->add_option("--seconds", seconds, "Video length")->check(CLI::PositiveNumber);

    auto* ev = app.add_subcommand("eval", "Score results against ground truth");
    std::string results, truth, ev_out;
    double radius = 0.0;
    ev->add_option("--results", results, "Result file or directory of .jsonl files")->required();
    ev->add_option("--truth", truth, "Truth directory")->required();
    ev->add_option("--radius", radius, "Radius R in pixels (default: per-pair value)");
    ev->add_option("--out", ev_out, "Report file (default: stdout)");

    auto* batch = app.add_subcommand("batch", "Localize every pair of a synthetic dataset");
    std::string data, batch_out;
    std::optional<double> batch_alpha;
    add_common(batch, common);
    add_jobs(batch, common);
    batch->add_option("--data", data, "Dataset directory")->required()->check(CLI::ExistingDirectory);
    batch->add_option("--alpha", batch_alpha, "Blend weight override in [0, 1]")->check(CLI::Range(0.0, 1.0));
    batch->add_option("--out", batch_out, "Output records (default: <data>/results/results.jsonl)");

    auto* cfg = app.add_subcommand("config", "Print the effective configuration");
    add_common(cfg, common);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitError;
    }

    const std::string name = app.get_subcommands().front()->get_name();
    try {
        if (*loc) {
            if (ref.empty() && corpus.empty()) throw Error(ErrorCode::Parameter, "localize needs --ref or --corpus");
            return run_localize(common, pov, ref, corpus, entry, lat, lon, candidates, ref_yaw, ref_heading, ref_hfov,
                                sensors, timestamp, alpha, out, show_info, frame);
        }
        if (*vid) return run_video(common, frames_dir, vid_refs, vid_corpus, vid_sensors, stride, vid_out);
        if (*joint) return run_joint(common, session, joint_corpus, k, joint_out);
        if (*heat) return run_heatmap(common, attributions, floorplan, sigma, heat_out);
        if (*syn) return run_synth(spec, count, syn_out, kind, seed, seconds);
        if (*ev) return run_eval(results, truth, radius, ev_out);
        if (*batch) return run_batch(common, data, batch_alpha, batch_out);
        if (*cfg) {
            std::cout << to_json(common.resolve()) << '\n';
            return kExitAccepted;
        }
    } catch (const Error& e) {
        std::cerr << "egofov " << name << ": " << to_string(e.code()) << " error: " << e.what() << '\n';
        return kExitError;
    } catch (const std::exception& e) {
        std::cerr << "egofov " << name << ": " << e.what() << '\n';
        return kExitError;
    }
    return kExitError;
}
