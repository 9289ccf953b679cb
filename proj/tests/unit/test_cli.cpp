#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iterator>
#include <sstream>
#include <sys/wait.h>

#include "doctest.h"
#include "egofov/imaging.hpp"
#include "egofov/synth.hpp"
#include "helpers.hpp"
#include "json.hpp"

using nlohmann::json;

namespace {

struct Run {
    int code = -1;
    std::string out;
    std::string err;
};

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& p, const std::string& s) {
    std::ofstream out(p);
    out << s;
}

std::string quote(const std::string& s) { return "'" + s + "'"; }

Run run(const testing::TempDir& dir, const std::vector<std::string>& args, const std::string& env = "") {
    std::string cmd = "cd " + quote(dir.path().string()) + " && " + env + " " + quote(EGOFOV_CLI);
    for (const auto& a : args) cmd += " " + quote(a);
    cmd += " >" + quote((dir / "stdout.txt").string()) + " 2>" + quote((dir / "stderr.txt").string());
    const int status = std::system(cmd.c_str());
    Run r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = slurp(dir / "stdout.txt");
    r.err = slurp(dir / "stderr.txt");
    return r;
}

json first_record(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    std::getline(in, line);
    return json::parse(line);
}

std::vector<json> records(const std::string& text) {
    std::vector<json> out;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line))
        if (!line.empty()) out.push_back(json::parse(line));
    return out;
}

// Small pair dataset shared by several cases.
struct Pairs {
    testing::TempDir dir;
    Pairs() {
        write_file(dir / "spec.json", R"({"seed": 3, "truth": {"identity_like": true}})");
        REQUIRE(run(dir, {"synth", "--kind", "pairs", "--spec", "spec.json", "--count", "2", "--out", "clean"}).code == 0);
        write_file(dir / "noisy.json", R"({"seed": 4, "truth": {"noise_sigma": 10, "brightness_shift": 20}})");
        REQUIRE(run(dir, {"synth", "--kind", "pairs", "--spec", "noisy.json", "--count", "2", "--out", "noisy"}).code == 0);
    }
};

}  // namespace

TEST_CASE("localize exit codes and records") {
    Pairs p;
    const testing::TempDir& d = p.dir;
    SUBCASE("noiseless pair is accepted within a pixel") {
        const Run r = run(d, {"localize", "--pov", "clean/pov/000.pgm", "--corpus", "clean/manifest.json", "--entry", "000",
                              "--sensors", "clean/sensors/000.txt", "--out", "r.jsonl"});
        CHECK(r.code == 0);
        const json rec = first_record(slurp(d / "r.jsonl"));
        CHECK(rec["v"] == 1);
        CHECK(rec["accepted"] == true);
        const auto truth = egofov::read_truth(d / "clean/truth/000.txt");
        const egofov::Point2 f{rec["f"][0].get<double>(), rec["f"][1].get<double>()};
        const egofov::Point2 f_ref{rec["f_ref"][0].get<double>(), rec["f_ref"][1].get<double>()};
        CHECK(egofov::distance(f_ref, truth.focus) <= 1.0);
        CHECK(rec.contains("f_s"));
        (void)f;
    }
    SUBCASE("alpha 0 with sensors gives f = f_ref exactly") {
        const Run r = run(d, {"localize", "--pov", "noisy/pov/001.pgm", "--corpus", "noisy/manifest.json", "--entry", "001",
                              "--sensors", "noisy/sensors/001.txt", "--alpha", "0"});
        const json rec = first_record(r.out);
        REQUIRE(rec["status"] == "matched");
        CHECK(rec["alpha"] == 0.0);
        CHECK(rec["f"] == rec["f_ref"]);
        CHECK_FALSE(rec["f_s"].is_null());
    }
    SUBCASE("blank view falls back and exits 2") {
        egofov::save_pgm(egofov::GrayImage(256, 188, 128), d / "blank.pgm");
        const Run r = run(d, {"localize", "--pov", "blank.pgm", "--corpus", "clean/manifest.json", "--entry", "000",
                              "--sensors", "clean/sensors/000.txt"});
        CHECK(r.code == 2);
        const json rec = first_record(r.out);
        CHECK(rec["status"] == "sensor-fallback");
        CHECK(rec["f"] == rec["f_s"]);
    }
    SUBCASE("missing reference is an error") {
        Run r = run(d, {"localize", "--pov", "clean/pov/000.pgm", "--corpus", "clean/manifest.json", "--entry", "nope"});
        CHECK(r.code == 1);
        CHECK(r.err.find("lookup") != std::string::npos);
        r = run(d, {"localize", "--pov", "clean/pov/000.pgm", "--ref", "missing.pgm"});
        CHECK(r.code == 1);
        r = run(d, {"localize", "--pov", "clean/pov/000.pgm", "--corpus", "missing.json", "--entry", "000"});
        CHECK(r.code == 1);
    }
    SUBCASE("identical runs give identical bytes") {
        const std::vector<std::string> args{"localize", "--pov", "noisy/pov/000.pgm", "--corpus", "noisy/manifest.json",
                                            "--entry", "000", "--sensors", "noisy/sensors/000.txt"};
        CHECK(run(d, args).out == run(d, args).out);
    }
    SUBCASE("batch then eval") {
        REQUIRE(run(d, {"batch", "--data", "clean", "--alpha", "0", "--jobs", "2"}).code == 0);
        const Run e = run(d, {"eval", "--results", "clean/results", "--truth", "clean/truth"});
        REQUIRE(e.code == 0);
        CHECK(json::parse(e.out)["accuracy"] == 1.0);
    }
}

TEST_CASE("synth determinism and eval boundary") {
    testing::TempDir d;
    REQUIRE(run(d, {"synth", "--kind", "pairs", "--count", "3", "--seed", "11", "--out", "a"}).code == 0);
    REQUIRE(run(d, {"synth", "--kind", "pairs", "--count", "3", "--seed", "11", "--out", "b"}).code == 0);
    for (const auto& item : std::filesystem::recursive_directory_iterator(d / "a")) {
        if (!item.is_regular_file()) continue;
        const auto rel = std::filesystem::relative(item.path(), d / "a");
        CHECK(slurp(item.path()) == slurp(d / "b" / rel));
    }

    // Oracle results at the truth, then displaced by exactly R.
    // Integer focus and radius keep the boundary exact.
    auto truths = egofov::load_truths(d / "a" / "truth");
    for (auto& [id, t] : truths) {
        t.focus = {std::round(t.focus.x), std::round(t.focus.y)};
        t.radius = std::round(t.radius);
        egofov::write_truth(t, d / "a" / "truth" / (id + ".txt"));
    }
    std::string exact, shifted;
    for (const auto& [id, t] : truths) {
        exact += json{{"v", 1}, {"frame", id}, {"f", {t.focus.x, t.focus.y}}, {"status", "matched"}}.dump() + "\n";
        shifted += json{{"v", 1}, {"frame", id}, {"f", {t.focus.x, t.focus.y + t.radius}}, {"status", "matched"}}.dump() + "\n";
    }
    write_file(d / "exact.jsonl", exact);
    write_file(d / "shifted.jsonl", shifted);
    Run r = run(d, {"eval", "--results", "exact.jsonl", "--truth", "a/truth"});
    REQUIRE(r.code == 0);
    CHECK(json::parse(r.out)["accuracy"] == 1.0);
    r = run(d, {"eval", "--results", "shifted.jsonl", "--truth", "a/truth"});
    CHECK(json::parse(r.out)["accuracy"] == 1.0);
    r = run(d, {"eval", "--results", "shifted.jsonl", "--truth", "a/truth", "--radius", "1"});
    CHECK(json::parse(r.out)["accuracy"] == 0.0);
    write_file(d / "partial.jsonl", exact.substr(0, exact.find('\n') + 1));
    CHECK(run(d, {"eval", "--results", "partial.jsonl", "--truth", "a/truth"}).code == 1);
}

TEST_CASE("config precedence") {
    testing::TempDir d;
    write_file(d / "file.json", R"({"ratio": 0.7})");
    write_file(d / "env.json", R"({"ratio": 0.75})");
    auto ratio = [&](const std::vector<std::string>& args, const std::string& env = "") {
        std::vector<std::string> full{"config"};
        full.insert(full.end(), args.begin(), args.end());
        const Run r = run(d, full, env);
        REQUIRE(r.code == 0);
        return json::parse(r.out)["ratio"].get<double>();
    };
    const std::string env = "EGOFOV_CONFIG=env.json";
    const std::string no_env = "env -u EGOFOV_CONFIG";
    CHECK(ratio({}, no_env) == 0.8);
    CHECK(ratio({"--config", "file.json"}, no_env) == 0.7);
    CHECK(ratio({"--set", "ratio=0.6"}, no_env) == 0.6);
    CHECK(ratio({"--config", "file.json", "--set", "ratio=0.6"}, no_env) == 0.6);
    CHECK(ratio({}, env) == 0.75);
    CHECK(ratio({"--config", "file.json"}, env) == 0.7);
    CHECK(ratio({"--set", "ratio=0.6"}, env) == 0.6);
    const Run bad = run(d, {"config", "--set", "nope=1"}, no_env);
    CHECK(bad.code == 1);
    CHECK(bad.err.find("config") != std::string::npos);
}

TEST_CASE("video stride and vision-only flag") {
    testing::TempDir d;
    std::filesystem::create_directories(d / "frames");
    egofov::Rng rng(1);
    const egofov::GrayImage frame = testing::random_image(rng, 32, 24);
    for (int i = 0; i < 900; ++i) {
        char name[32];
        std::snprintf(name, sizeof name, "f%09d.pgm", i * 33);
        egofov::save_pgm(frame, d / "frames" / name);
    }
    egofov::save_pgm(testing::random_image(rng, 64, 48), d / "ref.pgm");
    const Run r = run(d, {"video", "--frames", "frames", "--ref", "ref.pgm", "--stride", "30", "--jobs", "2"});
    const auto recs = records(r.out);
    CHECK(recs.size() == 30);
    for (std::size_t i = 0; i < recs.size(); ++i) {
        CHECK(recs[i]["vision_only"] == true);
        CHECK(recs[i]["timestamp_ms"] == static_cast<long long>(i) * 30 * 33);
    }
    CHECK(run(d, {"video", "--frames", "frames", "--ref", "ref.pgm", "--stride", "30", "--jobs", "1"}).out == r.out);
}

TEST_CASE("joint and heatmap") {
    testing::TempDir d;
    REQUIRE(run(d, {"synth", "--kind", "session", "--seed", "7", "--out", "s"}).code == 0);
    CHECK(run(d, {"joint", "--session", "s/session.json", "--out", "j3", "--k", "3"}).code == 1);
    const Run r = run(d, {"joint", "--session", "s/session.json", "--corpus", "s/manifest.json", "--out", "j", "--jobs", "2"});
    REQUIRE(r.code == 0);
    int timelines = 0;
    for (const auto& item : std::filesystem::directory_iterator(d / "j" / "timelines")) timelines += item.is_regular_file();
    CHECK(timelines == 6);
    const auto events = records(slurp(d / "j" / "group_events.jsonl"));
    REQUIRE_FALSE(events.empty());
    CHECK(events[0]["type"] == "group");
    CHECK(events[0]["members"].size() == 4);
    CHECK_FALSE(events[0]["timestamps"].empty());
    CHECK(std::filesystem::exists(d / "j" / "heatmap.ppm"));

    write_file(d / "empty.json", "");
    REQUIRE(run(d, {"heatmap", "--attributions", "empty.json", "--floorplan", "s/floorplan.json", "--out", "h.ppm"}).code == 0);
    const egofov::Floorplan plan = egofov::load_floorplan(d / "s" / "floorplan.json");
    const std::string ppm = slurp(d / "h.ppm");
    const std::size_t pixels = static_cast<std::size_t>(plan.width) * plan.height * 3;
    REQUIRE(ppm.size() > pixels);
    CHECK(ppm.substr(ppm.size() - pixels).find_first_not_of('\0') == std::string::npos);
    CHECK(std::filesystem::exists(d / "h.txt"));

    // Fewer than two streams.
    std::filesystem::create_directories(d / "one");
    write_file(d / "one" / "session.json", R"({"people": [{"id": "P1", "frames": "../s/P1/frames"}]})");
    const Run one = run(d, {"joint", "--session", "one/session.json", "--out", "j1"});
    CHECK(one.code == 1);
    CHECK(one.err.find("session") != std::string::npos);
}
