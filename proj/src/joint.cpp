#include "egofov/joint.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <functional>
#include <limits>
#include <mutex>
#include <sstream>
#include <thread>

#include "egofov/error.hpp"
#include "json.hpp"

namespace egofov {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

using Json = nlohmann::json;

std::int64_t round_to_tick(std::int64_t t, std::int64_t tick) {
    const std::int64_t shifted = t + tick / 2;
    std::int64_t q = shifted / tick;
    if (shifted % tick != 0 && shifted < 0) --q;
    return q * tick;
}

// Runs task(0..count-1) on up to `jobs` threads; rethrows the first failure.
void parallel_for(std::size_t count, int jobs, const std::function<void(std::size_t)>& task) {
    const std::size_t workers = std::min<std::size_t>(count, static_cast<std::size_t>(std::max(1, jobs)));
    if (workers <= 1) {
        for (std::size_t i = 0; i < count; ++i) task(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> threads;
    threads.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        threads.emplace_back([&] {
            for (std::size_t i = next++; i < count; i = next++) {
                try {
                    task(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(failure_mutex);
                    if (!failure) failure = std::current_exception();
                }
            }
        });
    }
    for (auto& t : threads) t.join();
    if (failure) std::rethrow_exception(failure);
}

int nearest_frame(const Stream& stream, std::int64_t t, std::int64_t tolerance) {
    const auto& frames = stream.frames;
    auto it = std::lower_bound(frames.begin(), frames.end(), t,
                               [](const StreamFrame& f, std::int64_t v) { return f.timestamp_ms < v; });
    int best = -1;
    std::int64_t best_gap = 0;
    auto consider = [&](std::ptrdiff_t k) {
        if (k < 0 || k >= static_cast<std::ptrdiff_t>(frames.size())) return;
        const std::int64_t gap = std::llabs(frames[static_cast<std::size_t>(k)].timestamp_ms - t);
        if (gap > tolerance) return;
        if (best < 0 || gap < best_gap) {
            best = static_cast<int>(k);
            best_gap = gap;
        }
    };
    const std::ptrdiff_t pos = it - frames.begin();
    consider(pos - 1);  // earlier frame first so ties keep it
    consider(pos);
    return best;
}

std::string pair_key(const std::string& a, const std::string& b) {
    return a < b ? a + '\n' + b : b + '\n' + a;
}

using JointTable = std::map<std::string, std::map<std::int64_t, bool>>;

JointTable joint_table(const std::vector<PairTimeline>& timelines) {
    JointTable table;
    for (const auto& tl : timelines) {
        auto& row = table[pair_key(tl.first, tl.second)];
        for (const auto& s : tl.samples) row[s.timestamp_ms] = s.joint;
    }
    return table;
}

const std::map<std::int64_t, bool>& table_row(const JointTable& table, const std::string& a, const std::string& b) {
    const auto it = table.find(pair_key(a, b));
    if (it == table.end()) throw Error(ErrorCode::Parameter, "no timeline for pair " + a + "/" + b);
    return it->second;
}

bool joint_at(const std::map<std::int64_t, bool>& row, std::int64_t t) {
    const auto it = row.find(t);
    return it != row.end() && it->second;
}

std::vector<std::int64_t> all_times(const std::vector<PairTimeline>& timelines) {
    std::set<std::int64_t> times;
    for (const auto& tl : timelines) {
        for (const auto& s : tl.samples) times.insert(s.timestamp_ms);
    }
    return {times.begin(), times.end()};
}

double number(const Json& j, const char* key, const std::string& where) {
    if (!j.contains(key) || !j[key].is_number()) {
        throw Error(ErrorCode::Session, where + ": missing numeric field '" + key + "'");
    }
    return j[key].get<double>();
}

void reject_unknown(const Json& j, std::initializer_list<const char*> known, const std::string& where) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (std::none_of(known.begin(), known.end(), [&](const char* k) { return it.key() == k; })) {
            throw Error(ErrorCode::Session, where + ": unknown key '" + it.key() + "'");
        }
    }
}

Floorplan floorplan_from_json(const Json& j) {
    if (!j.is_object()) throw Error(ErrorCode::Session, "floorplan must be an object");
    reject_unknown(j, {"width", "height", "exhibits"}, "floorplan");
    Floorplan plan;
    plan.width = static_cast<int>(number(j, "width", "floorplan"));
    plan.height = static_cast<int>(number(j, "height", "floorplan"));
    if (plan.width <= 0 || plan.height <= 0) throw Error(ErrorCode::Session, "floorplan size must be positive");
    if (j.contains("exhibits")) {
        if (!j["exhibits"].is_array()) throw Error(ErrorCode::Session, "floorplan exhibits must be an array");
        for (const auto& e : j["exhibits"]) {
            reject_unknown(e, {"label", "x", "y"}, "floorplan exhibit");
            if (!e.contains("label") || !e["label"].is_string()) {
                throw Error(ErrorCode::Session, "floorplan exhibit needs a label");
            }
            FloorplanExhibit ex{e["label"].get<std::string>(),
                                {number(e, "x", "floorplan exhibit"), number(e, "y", "floorplan exhibit")}};
            if (ex.position.x < 0 || ex.position.y < 0 || ex.position.x > plan.width ||
                ex.position.y > plan.height) {
                throw Error(ErrorCode::Session, "exhibit '" + ex.label + "' lies outside the floorplan");
            }
            plan.exhibits.push_back(std::move(ex));
        }
    }
    return plan;
}

Json floorplan_to_json(const Floorplan& plan) {
    Json exhibits = Json::array();
    for (const auto& e : plan.exhibits) {
        exhibits.push_back({{"label", e.label}, {"x", e.position.x}, {"y", e.position.y}});
    }
    return {{"width", plan.width}, {"height", plan.height}, {"exhibits", exhibits}};
}

std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

void JointParams::validate() const {
    if (tick_ms <= 0) throw Error(ErrorCode::Parameter, "tick must be positive");
    if (tolerance_ms < 0) throw Error(ErrorCode::Parameter, "tolerance must be non-negative");
    if (stride < 1) throw Error(ErrorCode::Parameter, "stride must be >= 1");
    if (!(joint_threshold > 0.0)) throw Error(ErrorCode::Parameter, "joint threshold must be positive");
    if (min_duration_ms < 0) throw Error(ErrorCode::Parameter, "min duration must be non-negative");
    if (pose_tolerance_ms < 0) throw Error(ErrorCode::Parameter, "pose tolerance must be non-negative");
    if (!(heatmap_sigma > 0.0)) throw Error(ErrorCode::Parameter, "heatmap sigma must be positive");
}

void validate_streams(const std::vector<Stream>& streams) {
    if (streams.size() < 2) {
        throw Error(ErrorCode::Session, "joint analysis needs at least two streams, got " +
                                            std::to_string(streams.size()));
    }
    std::set<std::string> ids;
    for (const auto& s : streams) {
        if (!ids.insert(s.person_id).second) throw Error(ErrorCode::Session, "duplicate person id " + s.person_id);
        for (std::size_t k = 1; k < s.frames.size(); ++k) {
            if (s.frames[k].timestamp_ms <= s.frames[k - 1].timestamp_ms) {
                throw Error(ErrorCode::Session, "timestamps of " + s.person_id + " are not strictly increasing");
            }
        }
    }
}

std::vector<AlignedTuple> synchronize(const std::vector<Stream>& streams, std::int64_t tick_ms,
                                      std::int64_t tolerance_ms) {
    if (tick_ms <= 0) throw Error(ErrorCode::Parameter, "tick must be positive");
    std::set<std::int64_t> ticks;
    for (const auto& s : streams) {
        for (const auto& f : s.frames) ticks.insert(round_to_tick(f.timestamp_ms, tick_ms));
    }
    std::vector<AlignedTuple> out;
    out.reserve(ticks.size());
    for (const std::int64_t t : ticks) {
        AlignedTuple tuple;
        tuple.timestamp_ms = t;
        for (const auto& s : streams) tuple.frames.push_back(nearest_frame(s, t, tolerance_ms));
        out.push_back(std::move(tuple));
    }
    return out;
}

PairTimeline pairwise_match(const std::vector<Stream>& streams, std::size_t i, std::size_t j,
                            const std::vector<AlignedTuple>& tuples,
                            const std::vector<std::vector<FrameFeatures>>& features,
                            const JointParams& params, const LocalizerConfig& config) {
    LocalizerConfig cfg = config;
    cfg.alpha_override = 0.0;
    PairTimeline tl;
    tl.first = streams[i].person_id;
    tl.second = streams[j].person_id;
    tl.step_ms = params.tick_ms * params.stride;

    auto direction = [&](std::size_t a, int fa, std::size_t b, int fb) {
        const FrameFeatures& pov = features[a][static_cast<std::size_t>(fa)];
        const FrameFeatures& ref = features[b][static_cast<std::size_t>(fb)];
        const ReferenceView view{ref.image, &ref.features, std::monostate{}};
        const LocalizationResult r = localize(*pov.image, pov.features, view, std::nullopt, cfg);
        return r.status == LocalizationStatus::Matched ? r.score : kInf;
    };

    for (const auto& tuple : tuples) {
        PairSample sample;
        sample.timestamp_ms = tuple.timestamp_ms;
        sample.score = kInf;
        const int fi = tuple.frames[i];
        const int fj = tuple.frames[j];
        if (fi >= 0 && fj >= 0) {
            const double s_ij = direction(i, fi, j, fj);
            const double s_ji = direction(j, fj, i, fi);
            sample.score = std::min(s_ij, s_ji);
            sample.joint = (std::isfinite(s_ij) && accept(s_ij, params.joint_threshold)) ||
                           (std::isfinite(s_ji) && accept(s_ji, params.joint_threshold));
        }
        tl.samples.push_back(sample);
    }
    return tl;
}

std::vector<PairTimeline> joint_timelines(const std::vector<Stream>& streams, const JointParams& params,
                                          const LocalizerConfig& config, int jobs) {
    params.validate();
    config.validate();
    validate_streams(streams);
    const auto all = synchronize(streams, params.tick_ms, params.tolerance_ms);
    std::vector<AlignedTuple> tuples;
    for (std::size_t k = 0; k < all.size(); k += static_cast<std::size_t>(params.stride)) tuples.push_back(all[k]);

    std::vector<std::vector<FrameFeatures>> features(streams.size());
    std::vector<std::pair<std::size_t, std::size_t>> needed;
    for (std::size_t s = 0; s < streams.size(); ++s) {
        features[s].resize(streams[s].frames.size());
        std::vector<char> used(streams[s].frames.size(), 0);
        for (const auto& t : tuples) {
            if (t.frames[s] >= 0) used[static_cast<std::size_t>(t.frames[s])] = 1;
        }
        for (std::size_t f = 0; f < used.size(); ++f) {
            if (used[f]) needed.emplace_back(s, f);
        }
    }
    parallel_for(needed.size(), jobs, [&](std::size_t k) {
        const auto [s, f] = needed[k];
        const GrayImage& image = streams[s].frames[f].image;
        if (image.empty()) {
            throw Error(ErrorCode::Session, "frame of " + streams[s].person_id + " at " +
                                                std::to_string(streams[s].frames[f].timestamp_ms) +
                                                " ms has no image");
        }
        features[s][f].image = &image;
        features[s][f].features = extract_features(image, config.features);
    });

    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    for (std::size_t i = 0; i < streams.size(); ++i) {
        for (std::size_t j = i + 1; j < streams.size(); ++j) pairs.emplace_back(i, j);
    }
    std::vector<PairTimeline> out(pairs.size());
    parallel_for(pairs.size(), jobs, [&](std::size_t k) {
        out[k] = pairwise_match(streams, pairs[k].first, pairs[k].second, tuples, features, params, config);
    });
    return out;
}

std::vector<Interval> joint_intervals(const PairTimeline& timeline, std::int64_t min_duration_ms) {
    std::vector<Interval> out;
    const std::int64_t max_gap = 2 * timeline.step_ms;
    std::optional<Interval> run;
    auto close = [&] {
        if (run && run->duration() >= min_duration_ms) out.push_back(*run);
        run.reset();
    };
    for (const auto& s : timeline.samples) {
        if (!s.joint) continue;
        if (run && s.timestamp_ms - run->end_ms <= max_gap) {
            run->end_ms = s.timestamp_ms;
        } else {
            close();
            run = Interval{s.timestamp_ms, s.timestamp_ms};
        }
    }
    close();
    return out;
}

std::vector<std::int64_t> group_events(const std::vector<PairTimeline>& timelines,
                                       const std::set<std::string>& group) {
    if (group.size() < 2) throw Error(ErrorCode::Parameter, "a group needs at least two people");
    const JointTable table = joint_table(timelines);
    std::vector<const std::map<std::int64_t, bool>*> rows;
    for (auto a = group.begin(); a != group.end(); ++a) {
        for (auto b = std::next(a); b != group.end(); ++b) rows.push_back(&table_row(table, *a, *b));
    }
    std::vector<std::int64_t> out;
    for (const std::int64_t t : all_times(timelines)) {
        if (std::all_of(rows.begin(), rows.end(), [&](const auto* row) { return joint_at(*row, t); })) {
            out.push_back(t);
        }
    }
    return out;
}

std::vector<std::int64_t> partition_events(const std::vector<PairTimeline>& timelines,
                                           const std::vector<std::set<std::string>>& blocks) {
    const JointTable table = joint_table(timelines);
    std::vector<const std::map<std::int64_t, bool>*> inside, across;
    for (std::size_t b = 0; b < blocks.size(); ++b) {
        for (auto x = blocks[b].begin(); x != blocks[b].end(); ++x) {
            for (auto y = std::next(x); y != blocks[b].end(); ++y) inside.push_back(&table_row(table, *x, *y));
            for (std::size_t c = b + 1; c < blocks.size(); ++c) {
                for (const auto& z : blocks[c]) {
                    if (z == *x) throw Error(ErrorCode::Parameter, "partition blocks overlap on " + z);
                    across.push_back(&table_row(table, *x, z));
                }
            }
        }
    }
    if (inside.empty()) throw Error(ErrorCode::Parameter, "partition has no block of two or more people");
    std::vector<std::int64_t> out;
    for (const std::int64_t t : all_times(timelines)) {
        const bool blocks_joint =
            std::all_of(inside.begin(), inside.end(), [&](const auto* row) { return joint_at(*row, t); });
        const bool cross_apart =
            std::none_of(across.begin(), across.end(), [&](const auto* row) { return joint_at(*row, t); });
        if (blocks_joint && cross_apart) out.push_back(t);
    }
    return out;
}

std::vector<LoadedReference> load_references(const Corpus& corpus, const FeatureParams& params) {
    std::vector<LoadedReference> out;
    out.reserve(corpus.entries().size());
    for (const auto& entry : corpus.entries()) {
        LoadedReference ref;
        ref.entry = &entry;
        try {
            ref.image = load_image(entry.image_path);
        } catch (const Error& e) {
            throw Error(ErrorCode::Load, "reference '" + entry.id + "': " + e.what());
        }
        ref.features = extract_features(ref.image, params);
        out.push_back(std::move(ref));
    }
    return out;
}

Attribution attribute_exhibit(const Interval& interval, const std::vector<std::string>& participants,
                              const std::vector<Stream>& streams,
                              const std::vector<LoadedReference>& references, const JointParams& params,
                              const LocalizerConfig& config) {
    if (interval.end_ms < interval.start_ms) throw Error(ErrorCode::Parameter, "interval ends before it starts");
    Attribution out;
    out.interval = interval;
    out.participants = participants;
    out.score = kInf;
    const std::int64_t middle = interval.start_ms + interval.duration() / 2;

    struct Vote {
        int count = 0;
        double best = kInf;
    };
    std::map<std::string, Vote> votes;
    bool missing = false;
    for (const auto& person : participants) {
        const auto s = std::find_if(streams.begin(), streams.end(),
                                    [&](const Stream& st) { return st.person_id == person; });
        if (s == streams.end()) throw Error(ErrorCode::Session, "unknown participant " + person);
        const int f = nearest_frame(*s, middle, std::max(params.tick_ms, params.tolerance_ms));
        if (f < 0) {
            missing = true;
            continue;
        }
        const StreamFrame& frame = s->frames[static_cast<std::size_t>(f)];
        const FeatureSet pov_features = extract_features(frame.image, config.features);
        const auto pose = pose_at(s->poses, frame.timestamp_ms, params.pose_tolerance_ms);

        std::optional<LocalizationResult> best;
        std::size_t best_ref = 0;
        for (std::size_t r = 0; r < references.size(); ++r) {
            const auto& ref = references[r];
            const ReferenceView view{&ref.image, &ref.features, ref.entry->geometry()};
            LocalizationResult res = localize(frame.image, pov_features, view, pose, config);
            if (res.accepted && (!best || res.score < best->score)) {
                best = std::move(res);
                best_ref = r;
            }
        }
        std::optional<AnnotatedRegion> region;
        if (best) region = annotation_at(*references[best_ref].entry, *best->f);
        if (!region) {
            missing = true;
            continue;
        }
        Vote& v = votes[region->label];
        ++v.count;
        v.best = std::min(v.best, best->score);
    }

    const Vote* winner = nullptr;
    for (const auto& [label, vote] : votes) {
        if (!winner || vote.count > winner->count || (vote.count == winner->count && vote.best < winner->best)) {
            winner = &vote;
            out.label = label;
        }
    }
    if (winner) {
        out.score = winner->best;
        out.low_confidence = missing || winner->count < static_cast<int>(participants.size());
    } else {
        out.low_confidence = true;
    }
    return out;
}

std::map<std::string, int> viewer_counts(const std::vector<Attribution>& attributions) {
    std::map<std::string, std::set<std::string>> viewers;
    for (const auto& a : attributions) {
        if (a.label == "unknown") continue;
        viewers[a.label].insert(a.participants.begin(), a.participants.end());
    }
    std::map<std::string, int> out;
    for (const auto& [label, people] : viewers) out[label] = static_cast<int>(people.size());
    return out;
}

HeatmapGrid build_heatmap(const std::map<std::string, int>& counts, const Floorplan& floorplan, double sigma) {
    if (!(sigma > 0.0)) throw Error(ErrorCode::Parameter, "heatmap sigma must be positive");
    if (floorplan.width <= 0 || floorplan.height <= 0) {
        throw Error(ErrorCode::Parameter, "floorplan size must be positive");
    }
    HeatmapGrid grid;
    grid.width = floorplan.width;
    grid.height = floorplan.height;
    grid.exhibits = floorplan.exhibits;
    grid.values.assign(static_cast<std::size_t>(grid.width) * grid.height, 0.0);
    const double inv = 1.0 / (2.0 * sigma * sigma);
    for (const auto& ex : floorplan.exhibits) {
        const auto it = counts.find(ex.label);
        if (it == counts.end() || it->second <= 0) continue;
        const double weight = it->second;
        for (int y = 0; y < grid.height; ++y) {
            const double dy = y - ex.position.y;
            for (int x = 0; x < grid.width; ++x) {
                const double dx = x - ex.position.x;
                grid.values[static_cast<std::size_t>(y) * grid.width + x] += weight * std::exp(-(dx * dx + dy * dy) * inv);
            }
        }
    }
    return grid;
}

RgbImage render_heatmap(const HeatmapGrid& grid) {
    RgbImage img;
    img.width = grid.width;
    img.height = grid.height;
    img.data.assign(static_cast<std::size_t>(grid.width) * grid.height * 3, 0);
    const double peak = grid.values.empty() ? 0.0 : *std::max_element(grid.values.begin(), grid.values.end());
    if (peak <= 0.0) return img;
    auto channel = [](double v) {
        return static_cast<std::uint8_t>(std::lround(255.0 * std::clamp(v, 0.0, 1.0)));
    };
    for (std::size_t i = 0; i < grid.values.size(); ++i) {
        const double v = grid.values[i] / peak;
        img.data[3 * i] = channel(3.0 * v);
        img.data[3 * i + 1] = channel(3.0 * v - 1.0);
        img.data[3 * i + 2] = channel(3.0 * v - 2.0);
    }
    return img;
}

void write_heatmap_sidecar(const HeatmapGrid& grid, const std::map<std::string, int>& counts,
                           const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
    for (const auto& ex : grid.exhibits) {
        const auto it = counts.find(ex.label);
        out << ex.label << ' ' << ex.position.x << ' ' << ex.position.y << ' '
            << (it == counts.end() ? 0 : it->second) << '\n';
    }
}

Floorplan parse_floorplan(const std::string& json_text) {
    Json j;
    try {
        j = Json::parse(json_text);
    } catch (const Json::exception& e) {
        throw Error(ErrorCode::Session, std::string("floorplan is not valid JSON: ") + e.what());
    }
    return floorplan_from_json(j);
}

Floorplan load_floorplan(const std::filesystem::path& path) { return parse_floorplan(read_text(path)); }

void write_floorplan(const Floorplan& floorplan, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
    out << floorplan_to_json(floorplan).dump(2) << '\n';
}

std::optional<std::int64_t> timestamp_from_filename(const std::filesystem::path& path) {
    const std::string stem = path.stem().string();
    std::size_t end = stem.size();
    while (end > 0 && !std::isdigit(static_cast<unsigned char>(stem[end - 1]))) --end;
    if (end == 0) return std::nullopt;
    std::size_t begin = end;
    while (begin > 0 && std::isdigit(static_cast<unsigned char>(stem[begin - 1]))) --begin;
    if (end - begin > 18) return std::nullopt;
    return std::stoll(stem.substr(begin, end - begin));
}

std::vector<StreamFrame> list_frames(const std::filesystem::path& dir, bool load_images) {
    std::error_code ec;
    if (!std::filesystem::is_directory(dir, ec)) throw Error(ErrorCode::Io, "not a frame directory: " + dir.string());
    std::vector<StreamFrame> frames;
    for (const auto& item : std::filesystem::directory_iterator(dir)) {
        if (!item.is_regular_file()) continue;
        const std::string ext = item.path().extension().string();
        if (ext != ".pgm" && ext != ".ppm" && ext != ".pnm") continue;
        const auto t = timestamp_from_filename(item.path());
        if (!t) continue;
        frames.push_back({*t, item.path(), {}});
    }
    std::sort(frames.begin(), frames.end(), [](const StreamFrame& a, const StreamFrame& b) {
        return a.timestamp_ms != b.timestamp_ms ? a.timestamp_ms < b.timestamp_ms : a.path < b.path;
    });
    for (std::size_t k = 1; k < frames.size(); ++k) {
        if (frames[k].timestamp_ms == frames[k - 1].timestamp_ms) {
            throw Error(ErrorCode::Session, "two frames share timestamp " + std::to_string(frames[k].timestamp_ms) +
                                                " in " + dir.string());
        }
    }
    if (load_images) {
        for (auto& f : frames) f.image = load_image(f.path);
    }
    return frames;
}

SessionFile load_session(const std::filesystem::path& path) {
    Json j;
    try {
        j = Json::parse(read_text(path));
    } catch (const Json::exception& e) {
        throw Error(ErrorCode::Session, "session is not valid JSON: " + std::string(e.what()));
    }
    if (!j.is_object()) throw Error(ErrorCode::Session, "session must be an object");
    reject_unknown(j, {"people", "floorplan"}, "session");
    if (!j.contains("people") || !j["people"].is_array()) throw Error(ErrorCode::Session, "session needs a people array");
    const auto base = path.parent_path();
    SessionFile session;
    for (const auto& p : j["people"]) {
        reject_unknown(p, {"id", "frames", "sensors"}, "session person");
        if (!p.contains("id") || !p["id"].is_string() || !p.contains("frames") || !p["frames"].is_string()) {
            throw Error(ErrorCode::Session, "each person needs string 'id' and 'frames'");
        }
        Stream s;
        s.person_id = p["id"].get<std::string>();
        s.frames = list_frames(base / p["frames"].get<std::string>(), true);
        if (p.contains("sensors")) s.poses = load_sensor_trace(base / p["sensors"].get<std::string>());
        session.streams.push_back(std::move(s));
    }
    if (j.contains("floorplan")) session.floorplan = floorplan_from_json(j["floorplan"]);
    validate_streams(session.streams);
    return session;
}

void write_session(const std::filesystem::path& dir, const std::vector<Stream>& streams,
                   const std::optional<Floorplan>& floorplan) {
    std::filesystem::create_directories(dir);
    Json people = Json::array();
    for (const auto& s : streams) {
        const auto frames_dir = std::filesystem::path(s.person_id) / "frames";
        std::filesystem::create_directories(dir / frames_dir);
        for (const auto& f : s.frames) {
            char name[32];
            std::snprintf(name, sizeof name, "%09lld.pgm", static_cast<long long>(f.timestamp_ms));
            save_pgm(f.image, dir / frames_dir / name);
        }
        Json person{{"id", s.person_id}, {"frames", frames_dir.generic_string()}};
        if (!s.poses.empty()) {
            const auto trace = std::filesystem::path(s.person_id) / "sensors.txt";
            std::ofstream out(dir / trace);
            if (!out) throw Error(ErrorCode::Io, "cannot write " + (dir / trace).string());
            write_sensor_trace(out, s.poses);
            person["sensors"] = trace.generic_string();
        }
        people.push_back(person);
    }
    Json j{{"people", people}};
    if (floorplan) j["floorplan"] = floorplan_to_json(*floorplan);
    std::ofstream out(dir / "session.json");
    if (!out) throw Error(ErrorCode::Io, "cannot write " + (dir / "session.json").string());
    out << j.dump(2) << '\n';
}

}  // namespace egofov
