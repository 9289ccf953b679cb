#include "egofov/config.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "egofov/error.hpp"
#include "json.hpp"

namespace egofov {

namespace {

using Json = nlohmann::ordered_json;

Json config_json(const RunConfig& c) {
    const auto& l = c.localizer;
    Json alpha = l.alpha_override ? Json(*l.alpha_override) : Json(nullptr);
    return {
        {"mser",
         {{"delta", l.features.mser.delta},
          {"min_area", l.features.mser.min_area},
          {"max_area", l.features.mser.max_area},
          {"max_variation", l.features.mser.max_variation},
          {"duplicate_overlap", l.features.mser.duplicate_overlap},
          {"bright", l.features.mser.bright},
          {"dark", l.features.mser.dark}}},
        {"patch", {{"size", l.features.patch.patch_size}, {"measurement_scale", l.features.patch.measurement_scale}}},
        {"drop_border_regions", l.features.drop_border_regions},
        {"ratio", l.ratio},
        {"ransac",
         {{"iterations", l.ransac.iterations},
          {"inlier_threshold", l.ransac.inlier_threshold},
          {"min_inliers", l.ransac.min_inliers},
          {"seed", l.ransac.seed},
          {"scale_by_diagonal", l.scale_threshold_by_diagonal},
          {"min_threshold", l.min_inlier_threshold}}},
        {"alpha_max", l.alpha_max},
        {"alpha", alpha},
        {"gist",
         {{"canonical_size", l.gist.canonical_size},
          {"scales", l.gist.scales},
          {"orientations", l.gist.orientations},
          {"grid", l.gist.grid},
          {"padding", l.gist.padding},
          {"max_frequency", l.gist.max_frequency},
          {"local_sigma", l.gist.local_sigma},
          {"epsilon", l.gist.epsilon}}},
        {"window_fraction", l.window.panorama_fraction},
        {"accept_threshold", l.accept_threshold},
        {"joint",
         {{"tick_ms", c.joint.tick_ms},
          {"tolerance_ms", c.joint.tolerance_ms},
          {"stride", c.joint.stride},
          {"joint_threshold", c.joint.joint_threshold},
          {"min_duration_ms", c.joint.min_duration_ms},
          {"pose_tolerance_ms", c.joint.pose_tolerance_ms},
          {"heatmap_sigma", c.joint.heatmap_sigma}}},
    };
}

bool same_kind(const Json& def, const Json& value, bool nullable) {
    if (value.is_null()) return nullable;
    if (def.is_boolean()) return value.is_boolean();
    if (def.is_number_integer() || def.is_number_unsigned()) {
        if (value.is_number_integer() || value.is_number_unsigned()) return true;
        return value.is_number_float() && value.get<double>() == static_cast<double>(static_cast<long long>(value.get<double>()));
    }
    if (def.is_number()) return value.is_number();
    if (def.is_null()) return value.is_number();
    if (def.is_string()) return value.is_string();
    return false;
}

void overlay(Json& target, const Json& patch, const std::string& prefix) {
    if (!patch.is_object()) throw Error(ErrorCode::Config, "config" + (prefix.empty() ? "" : " key '" + prefix + "'") + " must be an object");
    for (auto it = patch.begin(); it != patch.end(); ++it) {
        const std::string path = prefix.empty() ? it.key() : prefix + "." + it.key();
        if (!target.contains(it.key())) throw Error(ErrorCode::Config, "unknown config key '" + path + "'");
        Json& slot = target[it.key()];
        if (slot.is_object()) {
            overlay(slot, it.value(), path);
            continue;
        }
        const bool nullable = path == "alpha";
        if (!same_kind(slot, it.value(), nullable)) {
            throw Error(ErrorCode::Config, "config key '" + path + "' has the wrong type");
        }
        if ((slot.is_number_integer() || slot.is_number_unsigned()) && it.value().is_number_float()) {
            slot = static_cast<long long>(it.value().get<double>());
        } else {
            slot = it.value();
        }
    }
}

RunConfig from_json(const Json& j) {
    RunConfig c;
    auto& l = c.localizer;
    const Json& m = j.at("mser");
    l.features.mser.delta = m.at("delta").get<int>();
    l.features.mser.min_area = m.at("min_area").get<int>();
    l.features.mser.max_area = m.at("max_area").get<double>();
    l.features.mser.max_variation = m.at("max_variation").get<double>();
    l.features.mser.duplicate_overlap = m.at("duplicate_overlap").get<double>();
    l.features.mser.bright = m.at("bright").get<bool>();
    l.features.mser.dark = m.at("dark").get<bool>();
    l.features.patch.patch_size = j.at("patch").at("size").get<int>();
    l.features.patch.measurement_scale = j.at("patch").at("measurement_scale").get<double>();
    l.features.drop_border_regions = j.at("drop_border_regions").get<bool>();
    l.ratio = j.at("ratio").get<double>();
    const Json& r = j.at("ransac");
    l.ransac.iterations = r.at("iterations").get<int>();
    l.ransac.inlier_threshold = r.at("inlier_threshold").get<double>();
    l.ransac.min_inliers = r.at("min_inliers").get<int>();
    l.ransac.seed = r.at("seed").get<std::uint64_t>();
    l.scale_threshold_by_diagonal = r.at("scale_by_diagonal").get<bool>();
    l.min_inlier_threshold = r.at("min_threshold").get<double>();
    l.alpha_max = j.at("alpha_max").get<double>();
    if (!j.at("alpha").is_null()) l.alpha_override = j.at("alpha").get<double>();
    const Json& g = j.at("gist");
    l.gist.canonical_size = g.at("canonical_size").get<int>();
    l.gist.scales = g.at("scales").get<int>();
    l.gist.orientations = g.at("orientations").get<int>();
    l.gist.grid = g.at("grid").get<int>();
    l.gist.padding = g.at("padding").get<int>();
    l.gist.max_frequency = g.at("max_frequency").get<double>();
    l.gist.local_sigma = g.at("local_sigma").get<double>();
    l.gist.epsilon = g.at("epsilon").get<double>();
    l.window.panorama_fraction = j.at("window_fraction").get<double>();
    l.accept_threshold = j.at("accept_threshold").get<double>();
    const Json& jt = j.at("joint");
    c.joint.tick_ms = jt.at("tick_ms").get<std::int64_t>();
    c.joint.tolerance_ms = jt.at("tolerance_ms").get<std::int64_t>();
    c.joint.stride = jt.at("stride").get<int>();
    c.joint.joint_threshold = jt.at("joint_threshold").get<double>();
    c.joint.min_duration_ms = jt.at("min_duration_ms").get<std::int64_t>();
    c.joint.pose_tolerance_ms = jt.at("pose_tolerance_ms").get<std::int64_t>();
    c.joint.heatmap_sigma = jt.at("heatmap_sigma").get<double>();
    return c;
}

RunConfig finish(const Json& j) {
    RunConfig c;
    try {
        c = from_json(j);
    } catch (const Json::exception& e) {
        throw Error(ErrorCode::Config, std::string("invalid config value: ") + e.what());
    }
    try {
        c.validate();
    } catch (const Error& e) {
        throw Error(ErrorCode::Config, e.what());
    }
    return c;
}

Json parse_json(const std::string& text, const char* what) {
    try {
        return Json::parse(text);
    } catch (const Json::exception& e) {
        throw Error(ErrorCode::Config, std::string(what) + " is not valid JSON: " + e.what());
    }
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::Config, "cannot open config " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

void RunConfig::validate() const {
    localizer.validate();
    joint.validate();
}

std::string default_config_json() { return config_json(RunConfig{}).dump(2); }

std::string to_json(const RunConfig& config) { return config_json(config).dump(2); }

RunConfig parse_config(const std::string& json_text) {
    Json merged = config_json(RunConfig{});
    overlay(merged, parse_json(json_text, "config"), "");
    return finish(merged);
}

RunConfig load_config(const std::filesystem::path& path) { return parse_config(read_file(path)); }

RunConfig apply_overrides(const RunConfig& base, const std::vector<std::string>& assignments) {
    Json merged = config_json(base);
    for (const auto& a : assignments) {
        const auto eq = a.find('=');
        if (eq == std::string::npos || eq == 0) throw Error(ErrorCode::Config, "override '" + a + "' is not key=value");
        const std::string key = a.substr(0, eq);
        const std::string raw = a.substr(eq + 1);
        Json value;
        try {
            value = Json::parse(raw);
        } catch (const Json::exception&) {
            value = raw;
        }
        Json patch = value;
        std::string rest = key;
        std::vector<std::string> parts;
        for (std::size_t pos; (pos = rest.find('.')) != std::string::npos;) {
            parts.push_back(rest.substr(0, pos));
            rest = rest.substr(pos + 1);
        }
        parts.push_back(rest);
        for (auto it = parts.rbegin(); it != parts.rend(); ++it) patch = Json{{*it, patch}};
        overlay(merged, patch, "");
    }
    return finish(merged);
}

RunConfig resolve_config(const std::optional<std::filesystem::path>& explicit_path,
                         const std::vector<std::string>& assignments) {
    RunConfig base;
    if (explicit_path) {
        base = load_config(*explicit_path);
    } else if (const char* env = std::getenv("EGOFOV_CONFIG"); env && *env) {
        base = load_config(env);
    }
    return apply_overrides(base, assignments);
}

std::string to_json(const DatasetSpec& spec) {
    Json textures = Json::array();
    for (const Texture t : spec.textures) textures.push_back(std::string(to_string(t)));
    const auto& t = spec.truth;
    return Json{
        {"seed", spec.scene.seed},
        {"texture", std::string(to_string(spec.scene.texture))},
        {"textures", textures},
        {"ref_width", spec.scene.ref_width},
        {"ref_height", spec.scene.ref_height},
        {"clutter", spec.scene.clutter},
        {"truth",
         {{"noise_sigma", t.noise_sigma},
          {"brightness_shift", t.brightness_shift},
          {"occlusion", t.occlusion},
          {"drift_rate", t.drift_rate},
          {"max_time", t.max_time},
          {"min_scale", t.min_scale},
          {"max_scale", t.max_scale},
          {"max_rotation", t.max_rotation},
          {"max_shear", t.max_shear},
          {"max_anisotropy", t.max_anisotropy},
          {"max_roll", t.max_roll},
          {"reliability", t.reliability},
          {"pov_width", t.pov_width},
          {"pov_height", t.pov_height},
          {"identity_like", t.identity_like},
          {"yaw_at_left_edge", t.yaw_at_left_edge},
          {"radius_fraction", t.radius_fraction}}},
    }.dump(2);
}

DatasetSpec parse_dataset_spec(const std::string& json_text) {
    Json merged = Json::parse(to_json(DatasetSpec{}));
    const Json user = parse_json(json_text, "dataset settings");
    if (user.is_object() && user.contains("textures")) {
        if (!user["textures"].is_array()) throw Error(ErrorCode::Config, "'textures' must be an array");
        merged["textures"] = Json::array();
        Json rest = user;
        rest.erase("textures");
        overlay(merged, rest, "");
        merged["textures"] = user["textures"];
    } else {
        overlay(merged, user, "");
    }
    DatasetSpec spec;
    try {
        spec.scene.seed = merged.at("seed").get<std::uint64_t>();
        spec.scene.texture = texture_from_string(merged.at("texture").get<std::string>());
        for (const auto& name : merged.at("textures")) {
            if (!name.is_string()) throw Error(ErrorCode::Config, "'textures' entries must be strings");
            spec.textures.push_back(texture_from_string(name.get<std::string>()));
        }
        spec.scene.ref_width = merged.at("ref_width").get<int>();
        spec.scene.ref_height = merged.at("ref_height").get<int>();
        spec.scene.clutter = merged.at("clutter").get<double>();
        const Json& t = merged.at("truth");
        auto& p = spec.truth;
        p.noise_sigma = t.at("noise_sigma").get<double>();
        p.brightness_shift = t.at("brightness_shift").get<double>();
        p.occlusion = t.at("occlusion").get<double>();
        p.drift_rate = t.at("drift_rate").get<double>();
        p.max_time = t.at("max_time").get<double>();
        p.min_scale = t.at("min_scale").get<double>();
        p.max_scale = t.at("max_scale").get<double>();
        p.max_rotation = t.at("max_rotation").get<double>();
        p.max_shear = t.at("max_shear").get<double>();
        p.max_anisotropy = t.at("max_anisotropy").get<double>();
        p.max_roll = t.at("max_roll").get<double>();
        p.reliability = t.at("reliability").get<double>();
        p.pov_width = t.at("pov_width").get<int>();
        p.pov_height = t.at("pov_height").get<int>();
        p.identity_like = t.at("identity_like").get<bool>();
        p.yaw_at_left_edge = t.at("yaw_at_left_edge").get<double>();
        p.radius_fraction = t.at("radius_fraction").get<double>();
    } catch (const Json::exception& e) {
        throw Error(ErrorCode::Config, std::string("invalid dataset settings: ") + e.what());
    } catch (const Error& e) {
        throw Error(ErrorCode::Config, e.what());
    }
    if (spec.scene.ref_width < 64 || spec.scene.ref_height < 64) {
        throw Error(ErrorCode::Config, "reference size must be at least 64x64");
    }
    if (!(spec.scene.clutter >= 0.0 && spec.scene.clutter <= 1.0)) throw Error(ErrorCode::Config, "clutter must lie in [0, 1]");
    return spec;
}

}  // namespace egofov
