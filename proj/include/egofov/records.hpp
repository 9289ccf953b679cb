#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "egofov/joint.hpp"
#include "egofov/pipeline.hpp"
#include "egofov/synth.hpp"

namespace egofov {

inline constexpr int kRecordVersion = 1;

// Extra fields written by the video command.
struct RecordContext {
    std::optional<std::int64_t> timestamp_ms;
    std::optional<std::string> reference;  // reference id
    std::optional<int> reference_index;
    std::optional<bool> vision_only;
};

// One JSON object per line with "v": 1. Non-finite scores are written as null.
std::string to_json_line(const LocalizationResult& result, const RecordContext& context = {});
LocalizationResult parse_result_line(const std::string& line);
// All records of a .jsonl file, or of every .jsonl file in a directory
// (files in name order). Blank lines are skipped.
std::vector<LocalizationResult> load_results(const std::filesystem::path& path);

std::string to_json(const EvaluationReport& report);

// `timestamp_ms score joint` per sample; score `inf` when unmatched.
void write_timeline(std::ostream& out, const PairTimeline& timeline);
std::string to_json_line(const Attribution& attribution);

// Attribution counts file read by the heatmap command: {"v": 1, "counts": {label: n}}.
// An empty file means no counts.
void write_counts(const std::map<std::string, int>& counts, const std::filesystem::path& path);
std::map<std::string, int> load_counts(const std::filesystem::path& path);

}  // namespace egofov
