#include "egofov/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <set>
#include <sstream>

#include "egofov/error.hpp"

namespace egofov {

namespace {
constexpr double kPi = std::numbers::pi;
}

Rng::Rng(std::uint64_t seed) : state_(seed ^ 0x9E3779B97F4A7C15ULL) {}

std::uint64_t Rng::next() {
    // splitmix64
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

double Rng::uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

int Rng::integer(int lo, int hi) {
    const auto span = static_cast<std::uint64_t>(static_cast<std::int64_t>(hi) - lo + 1);
    return lo + static_cast<int>(next() % span);
}

double Rng::normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
}

std::string_view to_string(Texture texture) {
    switch (texture) {
        case Texture::Glyphs: return "glyphs";
        case Texture::Noise: return "noise";
        case Texture::Checker: return "checker";
    }
    return "glyphs";
}

Texture texture_from_string(std::string_view name) {
    if (name == "glyphs") return Texture::Glyphs;
    if (name == "noise") return Texture::Noise;
    if (name == "checker") return Texture::Checker;
    throw Error(ErrorCode::Parameter, "unknown texture '" + std::string(name) + "'");
}

namespace {

// Float canvas, wrapping horizontally so panoramas have no seam.
struct Canvas {
    int width;
    int height;
    std::vector<float> v;

    Canvas(int w, int h, float fill = 0.0f) : width(w), height(h), v(static_cast<std::size_t>(w) * h, fill) {}
    float& at(int x, int y) {
        x %= width;
        if (x < 0) x += width;
        return v[static_cast<std::size_t>(y) * width + x];
    }

    GrayImage to_image() const {
        std::vector<std::uint8_t> data(v.size());
        for (std::size_t i = 0; i < v.size(); ++i) {
            data[i] = static_cast<std::uint8_t>(std::clamp(std::floor(v[i] + 0.5f), 0.0f, 255.0f));
        }
        return GrayImage(width, height, std::move(data));
    }
};

// Smooth lattice noise in [0, 1], periodic in x.
class ValueNoise {
public:
    ValueNoise(Rng& rng, int width, int height, double cell) {
        nx_ = std::max(1, static_cast<int>(std::round(width / cell)));
        ny_ = std::max(1, static_cast<int>(std::ceil(height / cell))) + 1;
        sx_ = static_cast<double>(width) / nx_;
        sy_ = cell;
        lattice_.resize(static_cast<std::size_t>(nx_) * ny_);
        for (double& l : lattice_) l = rng.uniform();
    }

    double operator()(double x, double y) const {
        const double gx = x / sx_, gy = y / sy_;
        const int ix = static_cast<int>(std::floor(gx)), iy = static_cast<int>(std::floor(gy));
        const double tx = smooth(gx - ix), ty = smooth(gy - iy);
        const double a = value(ix, iy), b = value(ix + 1, iy);
        const double c = value(ix, iy + 1), d = value(ix + 1, iy + 1);
        return (a + (b - a) * tx) * (1 - ty) + (c + (d - c) * tx) * ty;
    }

private:
    static double smooth(double t) { return t * t * (3 - 2 * t); }
    double value(int ix, int iy) const {
        ix %= nx_;
        if (ix < 0) ix += nx_;
        iy = std::clamp(iy, 0, ny_ - 1);
        return lattice_[static_cast<std::size_t>(iy) * nx_ + ix];
    }

    int nx_, ny_;
    double sx_, sy_;
    std::vector<double> lattice_;
};

void fill_polygon(Canvas& c, const std::vector<Point2>& poly, float value) {
    double x0 = poly[0].x, x1 = poly[0].x, y0 = poly[0].y, y1 = poly[0].y;
    for (const auto& p : poly) {
        x0 = std::min(x0, p.x);
        x1 = std::max(x1, p.x);
        y0 = std::min(y0, p.y);
        y1 = std::max(y1, p.y);
    }
    const int ya = std::max(0, static_cast<int>(std::floor(y0)));
    const int yb = std::min(c.height - 1, static_cast<int>(std::ceil(y1)));
    for (int y = ya; y <= yb; ++y) {
        const double py = y;
        std::vector<double> xs;
        for (std::size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++) {
            const Point2 a = poly[j], b = poly[i];
            if ((a.y > py) != (b.y > py)) xs.push_back(a.x + (py - a.y) * (b.x - a.x) / (b.y - a.y));
        }
        std::sort(xs.begin(), xs.end());
        for (std::size_t k = 0; k + 1 < xs.size(); k += 2) {
            const int xa = static_cast<int>(std::ceil(xs[k]));
            const int xb = static_cast<int>(std::floor(xs[k + 1]));
            for (int x = xa; x <= xb; ++x) c.at(x, y) = value;
        }
    }
}

std::vector<Point2> ellipse_polygon(Point2 center, double a, double b, double angle, int sides = 48) {
    std::vector<Point2> poly;
    const double ca = std::cos(angle), sa = std::sin(angle);
    for (int i = 0; i < sides; ++i) {
        const double t = 2.0 * kPi * i / sides;
        const double u = a * std::cos(t), v = b * std::sin(t);
        poly.push_back({center.x + ca * u - sa * v, center.y + sa * u + ca * v});
    }
    return poly;
}

float contrasting_value(Rng& rng) {
    return static_cast<float>(rng.uniform() < 0.5 ? rng.uniform(5, 85) : rng.uniform(170, 250));
}

void draw_glyph(Canvas& c, Rng& rng, Point2 center, double size) {
    const float value = contrasting_value(rng);
    const double angle = rng.uniform(0, kPi);
    switch (rng.integer(0, 3)) {
        case 0:
            fill_polygon(c, ellipse_polygon(center, size, size * rng.uniform(0.35, 1.0), angle), value);
            break;
        case 1: {
            const double w = size, h = size * rng.uniform(0.3, 1.0);
            std::vector<Point2> rect;
            for (auto [u, v] : {std::pair{-w, -h}, {w, -h}, {w, h}, {-w, h}}) {
                rect.push_back({center.x + std::cos(angle) * u - std::sin(angle) * v,
                                center.y + std::sin(angle) * u + std::cos(angle) * v});
            }
            fill_polygon(c, rect, value);
            break;
        }
        default: {
            const int sides = rng.integer(3, 6);
            std::vector<Point2> poly;
            for (int i = 0; i < sides; ++i) {
                const double t = angle + 2.0 * kPi * (i + rng.uniform(-0.3, 0.3)) / sides;
                const double r = size * rng.uniform(0.6, 1.0);
                poly.push_back({center.x + r * std::cos(t), center.y + r * std::sin(t)});
            }
            fill_polygon(c, poly, value);
            break;
        }
    }
}

void background(Canvas& c, Rng& rng, double lo, double hi) {
    const ValueNoise coarse(rng, c.width, c.height, 96.0);
    const ValueNoise fine(rng, c.width, c.height, 24.0);
    for (int y = 0; y < c.height; ++y) {
        for (int x = 0; x < c.width; ++x) {
            const double n = 0.75 * coarse(x, y) + 0.25 * fine(x, y);
            c.at(x, y) = static_cast<float>(lo + (hi - lo) * n);
        }
    }
}

void render_glyphs(Canvas& c, Rng& rng, double clutter) {
    background(c, rng, 90, 170);
    const double per_shape = 1500.0 - 1000.0 * std::clamp(clutter, 0.0, 1.0);
    const int count = static_cast<int>(static_cast<double>(c.width) * c.height / per_shape);
    for (int i = 0; i < count; ++i) {
        const Point2 center{rng.uniform(0, c.width), rng.uniform(0, c.height)};
        draw_glyph(c, rng, center, rng.uniform(4.0, 22.0));
    }
}

void render_noise(Canvas& c, Rng& rng, double clutter) {
    const double base = 48.0 - 24.0 * std::clamp(clutter, 0.0, 1.0);
    const ValueNoise a(rng, c.width, c.height, base);
    const ValueNoise b(rng, c.width, c.height, base / 2);
    const ValueNoise d(rng, c.width, c.height, base / 4);
    constexpr int kLevels = 7;
    for (int y = 0; y < c.height; ++y) {
        for (int x = 0; x < c.width; ++x) {
            const double n = (0.55 * a(x, y) + 0.3 * b(x, y) + 0.15 * d(x, y));
            // Soft terraces: plateaus joined by short ramps.
            const double u = std::clamp((n - 0.2) / 0.6, 0.0, 1.0) * (kLevels - 1);
            const double base_level = std::floor(u);
            const double ramp = std::clamp((u - base_level - 0.45) / 0.1, 0.0, 1.0);
            const double level = base_level + ramp * ramp * (3 - 2 * ramp);
            c.at(x, y) = static_cast<float>(20.0 + 215.0 * level / (kLevels - 1));
        }
    }
}

// Facade of near-identical windows with a few distinct landmarks.
void render_checker(Canvas& c, Rng& rng, double clutter) {
    background(c, rng, 150, 185);
    const int cell_w = rng.integer(28, 36), cell_h = rng.integer(34, 44);
    const int win_w = cell_w * 3 / 5, win_h = cell_h * 3 / 5;
    for (int gy = 0; gy * cell_h < c.height; ++gy) {
        for (int gx = 0; gx * cell_w < c.width; ++gx) {
            const double x0 = gx * cell_w + (cell_w - win_w) / 2.0 + rng.uniform(-1.0, 1.0);
            const double y0 = gy * cell_h + (cell_h - win_h) / 2.0 + rng.uniform(-1.0, 1.0);
            const float value = static_cast<float>(45.0 + rng.uniform(-8.0, 8.0));
            fill_polygon(c, {{x0, y0}, {x0 + win_w, y0}, {x0 + win_w, y0 + win_h}, {x0, y0 + win_h}}, value);
            const double mx = x0 + win_w / 2.0;
            fill_polygon(c, {{mx - 1, y0}, {mx + 1, y0}, {mx + 1, y0 + win_h}, {mx - 1, y0 + win_h}}, 160.0f);
        }
    }
    const int landmarks = static_cast<int>(c.width * c.height / 6000.0 * (0.5 + clutter));
    for (int i = 0; i < landmarks; ++i) {
        const Point2 center{rng.uniform(0, c.width), rng.uniform(0, c.height)};
        draw_glyph(c, rng, center, rng.uniform(6.0, 16.0));
    }
}

struct View {
    GrayImage pov;
    AffineMap affine;
    double brightness = 0.0;
    double occlusion = 0.0;
};

AffineMap random_linear(Rng& rng, const TruthParams& p) {
    const double theta = rng.uniform(-p.max_rotation, p.max_rotation);
    const double s = std::exp(rng.uniform(std::log(p.min_scale), std::log(p.max_scale)));
    const double a = rng.uniform(-p.max_anisotropy, p.max_anisotropy);
    const double k = rng.uniform(-p.max_shear, p.max_shear);
    const AffineMap rot{{std::cos(theta), -std::sin(theta), 0, std::sin(theta), std::cos(theta), 0}};
    const AffineMap scale{{s * (1 + a), 0, 0, 0, s * (1 - a), 0}};
    const AffineMap shear{{1, k, 0, 0, 1, 0}};
    return rot.compose(scale).compose(shear);
}

// A = T(f) * M * T(-c), so A(c) = f.
AffineMap centered_affine(const AffineMap& linear, Point2 c, Point2 f) {
    AffineMap a = linear;
    a.m[2] = f.x - (linear.m[0] * c.x + linear.m[1] * c.y);
    a.m[5] = f.y - (linear.m[3] * c.x + linear.m[4] * c.y);
    return a;
}

bool footprint_inside(const AffineMap& a, int w, int h, int ref_w, int ref_h, double margin, bool wrap_x) {
    for (Point2 corner : {Point2{0, 0}, Point2{w - 1.0, 0}, Point2{0, h - 1.0}, Point2{w - 1.0, h - 1.0}}) {
        const Point2 q = a.apply(corner);
        if (q.y < margin || q.y > ref_h - 1 - margin) return false;
        if (!wrap_x && (q.x < margin || q.x > ref_w - 1 - margin)) return false;
    }
    return true;
}

int pov_width(const TruthParams& p, int ref_width) { return p.pov_width > 0 ? p.pov_width : ref_width / 4; }
int pov_height(const TruthParams& p, int width) {
    return p.pov_height > 0 ? p.pov_height : static_cast<int>(std::lround(width * 1856.0 / 2528.0));
}

void add_occlusion(std::vector<float>& img, int w, int h, double fraction, Rng& rng) {
    if (fraction <= 0.0) return;
    std::vector<std::uint8_t> mask(img.size(), 0);
    std::size_t covered = 0;
    const auto target = static_cast<std::size_t>(fraction * img.size());
    for (int attempt = 0; attempt < 64 && covered < target; ++attempt) {
        const double remaining = static_cast<double>(target - covered);
        const double area = std::max(remaining, 40.0);
        const double ratio = rng.uniform(0.6, 1.0);
        const double a = std::sqrt(area / (kPi * ratio)), b = a * ratio;
        const Point2 center{rng.uniform(0, w), rng.uniform(0, h)};
        const double angle = rng.uniform(0, kPi);
        const float value = static_cast<float>(rng.uniform(30, 220));
        const double ca = std::cos(angle), sa = std::sin(angle);
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                const double dx = x - center.x, dy = y - center.y;
                const double u = (ca * dx + sa * dy) / a, v = (-sa * dx + ca * dy) / b;
                if (u * u + v * v > 1.0) continue;
                const std::size_t i = static_cast<std::size_t>(y) * w + x;
                img[i] = value;
                if (!mask[i]) {
                    mask[i] = 1;
                    ++covered;
                }
            }
        }
    }
}

View render_view(const GrayImage& ref, bool wrap_x, const AffineMap& affine, int w, int h,
                 const TruthParams& p, Rng& rng) {
    View view;
    view.affine = affine;
    const GrayImage warped = warp_view(ref, affine, w, h, wrap_x);
    if (p.identity_like) {
        view.pov = warped;
        return view;
    }
    std::vector<float> img(warped.pixels().begin(), warped.pixels().end());
    view.brightness = p.brightness_shift > 0 ? rng.uniform(-p.brightness_shift, p.brightness_shift) : 0.0;
    for (float& v : img) v += static_cast<float>(view.brightness);
    view.occlusion = p.occlusion > 0 ? rng.uniform(0.0, p.occlusion) : 0.0;
    add_occlusion(img, w, h, view.occlusion, rng);
    if (p.noise_sigma > 0) {
        for (float& v : img) v += static_cast<float>(p.noise_sigma * rng.normal());
    }
    std::vector<std::uint8_t> data(img.size());
    for (std::size_t i = 0; i < img.size(); ++i) {
        data[i] = static_cast<std::uint8_t>(std::clamp(std::floor(img[i] + 0.5f), 0.0f, 255.0f));
    }
    view.pov = GrayImage(w, h, std::move(data));
    return view;
}

EulerAngles panorama_direction(Point2 f, const PanoramaGeometry& g) {
    EulerAngles e;
    e.yaw = wrap_angle(g.yaw_at_left_edge + 2.0 * kPi * f.x / g.width);
    e.pitch = kPi * (0.5 - f.y / g.height);
    return e;
}

EulerAngles flat_direction(Point2 f, const FlatGeometry& g) {
    const double focal = (g.width / 2.0) / std::tan(g.hfov / 2.0);
    const double u = (f.x - g.width / 2.0) / focal, v = (g.height / 2.0 - f.y) / focal;
    EulerAngles e;
    e.yaw = wrap_angle(g.heading + std::atan2(u, 1.0));
    e.pitch = std::atan2(v, std::hypot(1.0, u)) + g.pitch;
    return e;
}

// True pose plus drift accumulated over a random time since alignment.
std::pair<HeadPose, HeadPose> sensor_poses(EulerAngles truth, const TruthParams& p, Rng& rng,
                                           std::int64_t timestamp_ms) {
    truth.roll = rng.uniform(-p.max_roll, p.max_roll);
    HeadPose true_pose{timestamp_ms, rotation_from_euler(truth), p.reliability};
    const double t = rng.uniform(0.0, p.max_time);
    const double rate = p.drift_rate > 0 ? rng.uniform(0.0, p.drift_rate) : 0.0;
    const double direction = rng.uniform(0.0, 2.0 * kPi);
    EulerAngles drifted = truth;
    drifted.yaw = wrap_angle(truth.yaw + rate * t * std::cos(direction));
    drifted.pitch = std::clamp(truth.pitch + rate * t * std::sin(direction), -kPi / 2 + 1e-3, kPi / 2 - 1e-3);
    HeadPose sensor{timestamp_ms, rotation_from_euler(drifted), p.reliability};
    return {true_pose, sensor};
}

std::uint64_t mix(std::uint64_t seed, std::uint64_t salt) {
    Rng r(seed * 0x100000001B3ULL + salt);
    return r.next();
}

}  // namespace

GrayImage render_scene(const SceneSpec& spec) {
    if (spec.ref_width < 16 || spec.ref_height < 16) throw Error(ErrorCode::Parameter, "scene too small");
    Rng rng(spec.seed);
    Canvas canvas(spec.ref_width, spec.ref_height);
    switch (spec.texture) {
        case Texture::Glyphs: render_glyphs(canvas, rng, spec.clutter); break;
        case Texture::Noise: render_noise(canvas, rng, spec.clutter); break;
        case Texture::Checker: render_checker(canvas, rng, spec.clutter); break;
    }
    return canvas.to_image();
}

GrayImage warp_view(const GrayImage& source, const AffineMap& a, int width, int height, bool wrap_x) {
    GrayImage out(width, height);
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            const Point2 q = a.apply({static_cast<double>(x), static_cast<double>(y)});
            const double v = sample_bilinear(source, q.x, q.y, wrap_x);
            out.at(x, y) = static_cast<std::uint8_t>(std::clamp(std::floor(v + 0.5), 0.0, 255.0));
        }
    }
    return out;
}

SyntheticPair generate_pair(const SceneSpec& spec, const TruthParams& params) {
    return generate_pair(spec, params, render_scene(spec));
}

SyntheticPair generate_pair(const SceneSpec& spec, const TruthParams& p, const GrayImage& reference) {
    Rng rng(mix(spec.seed, 0x5eed));
    const int W = reference.width(), H = reference.height();
    const int w = pov_width(p, W), h = pov_height(p, w);
    const Point2 c{w / 2.0, h / 2.0};
    const double margin = 4.0;

    AffineMap affine;
    bool placed = false;
    for (int attempt = 0; attempt < 1000 && !placed; ++attempt) {
        if (p.identity_like) {
            const int tx = rng.integer(static_cast<int>(W * 0.05), static_cast<int>(W * 0.95) - w);
            const int ty = rng.integer(static_cast<int>(margin), H - h - static_cast<int>(margin));
            affine = AffineMap::translation(tx, ty);
        } else {
            const AffineMap linear = random_linear(rng, p);
            const Point2 f{rng.uniform(W * 0.05, W * 0.95), rng.uniform(H * 0.2, H * 0.8)};
            affine = centered_affine(linear, c, f);
        }
        placed = footprint_inside(affine, w, h, W, H, margin, false) && affine.apply(c).x > W * 0.05 &&
                 affine.apply(c).x < W * 0.95;
    }
    if (!placed) throw Error(ErrorCode::Parameter, "POV footprint does not fit in the reference");

    View view = render_view(reference, false, affine, w, h, p, rng);

    SyntheticPair pair;
    pair.ref = reference;
    pair.pov = std::move(view.pov);
    pair.geometry = PanoramaGeometry{W, H, p.yaw_at_left_edge};
    const Point2 focus = affine.apply(c);
    const auto timestamp = static_cast<std::int64_t>(0);
    auto [true_pose, sensor] = sensor_poses(panorama_direction(focus, pair.geometry), p, rng, timestamp);
    pair.sensor = sensor;

    GroundTruth& t = pair.truth;
    t.affine = affine;
    t.focus = focus;
    t.radius = p.radius_fraction * W;
    t.texture = spec.texture;
    t.true_pose = true_pose;
    t.brightness = view.brightness;
    t.noise_sigma = p.identity_like ? 0.0 : p.noise_sigma;
    t.occlusion = view.occlusion;
    t.drift_rate = p.drift_rate;
    return pair;
}

EvaluationReport evaluate(const std::vector<LocalizationResult>& results,
                          const std::map<std::string, GroundTruth>& truths, double radius_override) {
    std::set<std::string> seen;
    for (const auto& r : results) {
        if (!truths.count(r.frame)) throw Error(ErrorCode::Evaluation, "no ground truth for '" + r.frame + "'");
        if (!seen.insert(r.frame).second) throw Error(ErrorCode::Evaluation, "duplicate result '" + r.frame + "'");
    }
    for (const auto& [id, truth] : truths) {
        if (!seen.count(id)) throw Error(ErrorCode::Evaluation, "no result for '" + id + "'");
    }

    EvaluationReport report;
    report.count = results.size();
    std::vector<double> errors;
    for (const auto& r : results) {
        const GroundTruth& t = truths.at(r.frame);
        const double radius = radius_override > 0.0 ? radius_override : t.radius;
        if (r.f) {
            const double e = distance(*r.f, t.focus);
            errors.push_back(e);
            if (e <= radius) {
                ++report.correct;
                if (r.accepted) ++report.accepted_correct;
            }
        } else {
            ++report.failures;
        }
        if (r.f_ref && distance(*r.f_ref, t.focus) <= radius) ++report.correct_without_sensors;
        if (r.accepted) ++report.accepted;
    }
    if (report.count > 0) {
        report.accuracy = static_cast<double>(report.correct) / report.count;
        report.accuracy_without_sensors = static_cast<double>(report.correct_without_sensors) / report.count;
    }
    if (!errors.empty()) {
        double sum = 0.0;
        for (double e : errors) sum += e;
        report.mean_error = sum / errors.size();
        std::sort(errors.begin(), errors.end());
        const std::size_t n = errors.size();
        report.median_error = n % 2 ? errors[n / 2] : 0.5 * (errors[n / 2 - 1] + errors[n / 2]);
    }
    return report;
}

void write_truth(const GroundTruth& t, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
    out << std::setprecision(17);
    out << "id " << t.id << '\n';
    out << "affine";
    for (double v : t.affine.m) out << ' ' << v;
    out << "\nfocus " << t.focus.x << ' ' << t.focus.y << '\n';
    out << "radius " << t.radius << '\n';
    out << "texture " << to_string(t.texture) << '\n';
    out << "pose " << t.true_pose.timestamp_ms;
    for (double v : t.true_pose.rotation) out << ' ' << v;
    out << ' ' << t.true_pose.reliability << '\n';
    out << "brightness " << t.brightness << '\n';
    out << "noise " << t.noise_sigma << '\n';
    out << "occlusion " << t.occlusion << '\n';
    out << "drift " << t.drift_rate << '\n';
}

GroundTruth read_truth(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
    GroundTruth t;
    t.id = path.stem().string();
    std::set<std::string> keys;
    std::string line;
    while (std::getline(in, line)) {
        std::istringstream fields(line);
        std::string key;
        if (!(fields >> key) || key[0] == '#') continue;
        keys.insert(key);
        if (key == "id") {
            fields >> t.id;
        } else if (key == "affine") {
            for (double& v : t.affine.m) fields >> v;
        } else if (key == "focus") {
            fields >> t.focus.x >> t.focus.y;
        } else if (key == "radius") {
            fields >> t.radius;
        } else if (key == "texture") {
            std::string name;
            fields >> name;
            t.texture = texture_from_string(name);
        } else if (key == "pose") {
            fields >> t.true_pose.timestamp_ms;
            for (double& v : t.true_pose.rotation) fields >> v;
            fields >> t.true_pose.reliability;
        } else if (key == "brightness") {
            fields >> t.brightness;
        } else if (key == "noise") {
            fields >> t.noise_sigma;
        } else if (key == "occlusion") {
            fields >> t.occlusion;
        } else if (key == "drift") {
            fields >> t.drift_rate;
        } else {
            throw Error(ErrorCode::Format, path.string() + ": unknown key '" + key + "'");
        }
        if (fields.fail()) throw Error(ErrorCode::Format, path.string() + ": malformed '" + key + "' line");
    }
    for (const char* required : {"affine", "focus", "radius"}) {
        if (!keys.count(required)) throw Error(ErrorCode::Format, path.string() + ": missing '" + required + "'");
    }
    return t;
}

std::map<std::string, GroundTruth> load_truths(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir)) throw Error(ErrorCode::Io, "not a directory: " + dir.string());
    std::map<std::string, GroundTruth> truths;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (entry.path().extension() != ".txt") continue;
        GroundTruth t = read_truth(entry.path());
        const std::string id = t.id;
        if (!truths.emplace(id, std::move(t)).second) throw Error(ErrorCode::Evaluation, "duplicate truth id " + id);
    }
    return truths;
}

std::string pair_id(int index) {
    std::ostringstream s;
    s << std::setw(3) << std::setfill('0') << index;
    return s.str();
}

void write_dataset(const DatasetSpec& spec, int count, const std::filesystem::path& out_dir) {
    if (count < 0) throw Error(ErrorCode::Parameter, "count must be non-negative");
    namespace fs = std::filesystem;
    for (const char* sub : {"ref", "pov", "sensors", "truth"}) fs::create_directories(out_dir / sub);
    std::vector<ReferenceEntry> entries;
    for (int i = 0; i < count; ++i) {
        SceneSpec scene = spec.scene;
        scene.seed = mix(spec.scene.seed, static_cast<std::uint64_t>(i));
        if (!spec.textures.empty()) scene.texture = spec.textures[static_cast<std::size_t>(i) % spec.textures.size()];
        SyntheticPair pair = generate_pair(scene, spec.truth);
        const std::string id = pair_id(i);
        pair.truth.id = id;
        pair.sensor.timestamp_ms = 0;
        save_pgm(pair.ref, out_dir / "ref" / (id + ".pgm"));
        save_pgm(pair.pov, out_dir / "pov" / (id + ".pgm"));
        {
            std::ofstream s(out_dir / "sensors" / (id + ".txt"));
            if (!s) throw Error(ErrorCode::Io, "cannot write sensor trace for " + id);
            write_sensor_trace(s, {pair.sensor});
        }
        write_truth(pair.truth, out_dir / "truth" / (id + ".txt"));

        ReferenceEntry e;
        e.id = id;
        e.image_path = fs::absolute(out_dir / "ref" / (id + ".pgm")).lexically_normal();
        e.kind = ReferenceKind::Panorama;
        e.width = pair.ref.width();
        e.height = pair.ref.height();
        e.yaw_at_left_edge_deg = spec.truth.yaw_at_left_edge * 180.0 / kPi;
        entries.push_back(std::move(e));
    }
    write_corpus(Corpus(std::move(entries)), out_dir / "manifest.json");
}

ScriptedVideo generate_scripted_video(std::uint64_t seed, int seconds, const TruthParams& params) {
    if (seconds < 1) throw Error(ErrorCode::Parameter, "video needs at least one second");
    Rng rng(mix(seed, 0x7664));
    ScriptedVideo video;
    const int cw = 512, ch = 384;
    for (int k = 0; k < 2; ++k) {
        SceneSpec scene{mix(seed, 100 + k), k == 0 ? Texture::Glyphs : Texture::Checker, cw, ch, 0.6};
        video.cameras.push_back(render_scene(scene));
        video.camera_geometry.push_back(FlatGeometry{cw, ch, k * kPi / 2, 0.0, kPi / 2});
    }
    TruthParams p = params;
    if (p.pov_width <= 0) p.pov_width = 256;
    const int w = p.pov_width, h = pov_height(p, w);
    const Point2 c{w / 2.0, h / 2.0};

    int camera = rng.integer(0, 1);
    int run = 0;
    for (int s = 0; s < seconds; ++s) {
        if (run == 0) {
            camera = 1 - camera;
            run = rng.integer(3, 6);
        }
        --run;
        const GrayImage& ref = video.cameras[static_cast<std::size_t>(camera)];
        AffineMap affine;
        for (int attempt = 0; attempt < 1000; ++attempt) {
            const Point2 f{rng.uniform(cw * 0.3, cw * 0.7), rng.uniform(ch * 0.35, ch * 0.65)};
            affine = centered_affine(random_linear(rng, p), c, f);
            if (footprint_inside(affine, w, h, cw, ch, 2.0, false)) break;
        }
        View view = render_view(ref, false, affine, w, h, p, rng);
        ScriptedVideo::Frame frame;
        frame.timestamp_ms = static_cast<std::int64_t>(s) * 1000;
        frame.image = std::move(view.pov);
        frame.camera = camera;
        frame.focus = affine.apply(c);
        const auto direction = flat_direction(frame.focus, video.camera_geometry[static_cast<std::size_t>(camera)]);
        video.poses.push_back(sensor_poses(direction, p, rng, frame.timestamp_ms).second);
        video.frames.push_back(std::move(frame));
    }
    return video;
}

namespace {

struct Gallery {
    GrayImage panorama;
    std::vector<AnnotatedRegion> exhibits;
    std::vector<Point2> centers;
};

// Wall panorama with framed "paintings" spread evenly away from the seam.
Gallery render_gallery(std::uint64_t seed, int exhibits, int width, int height) {
    Rng rng(mix(seed, 0x6a11));
    Canvas c(width, height);
    background(c, rng, 115, 140);
    Gallery g;
    const double spacing = 0.8 * width / exhibits;
    const int pw = static_cast<int>(std::min(180.0, 0.75 * spacing));
    const int ph = pw * 140 / 180;
    for (int e = 0; e < exhibits; ++e) {
        const double cx = width * (0.1 + 0.8 * (e + 0.5) / exhibits);
        const double cy = height / 2.0 + rng.uniform(-20, 20);
        const GrayImage art = render_scene(SceneSpec{mix(seed, 1000 + e), Texture::Glyphs, pw, ph, 0.9});
        const int x0 = static_cast<int>(std::lround(cx - pw / 2.0));
        const int y0 = static_cast<int>(std::lround(cy - ph / 2.0));
        for (int y = -5; y < ph + 5; ++y) {
            for (int x = -5; x < pw + 5; ++x) {
                const bool frame = x < 0 || y < 0 || x >= pw || y >= ph;
                c.at(x0 + x, y0 + y) = frame ? 30.0f : art.at(x, y);
            }
        }
        AnnotatedRegion region;
        region.label = "exhibit-" + std::to_string(e);
        region.polygon = {{x0 - 5.0, y0 - 5.0}, {x0 + pw + 4.0, y0 - 5.0}, {x0 + pw + 4.0, y0 + ph + 4.0},
                          {x0 - 5.0, y0 + ph + 4.0}};
        region.info = "Exhibit " + std::to_string(e);
        g.exhibits.push_back(std::move(region));
        g.centers.push_back({x0 + pw / 2.0, y0 + ph / 2.0});
    }
    g.panorama = c.to_image();
    return g;
}

}  // namespace

ScriptedSession generate_session(std::uint64_t seed, const std::vector<std::vector<int>>& script,
                                 int exhibits, const TruthParams& params) {
    if (script.size() < 2) throw Error(ErrorCode::Session, "a session needs at least two people");
    if (exhibits < 1) throw Error(ErrorCode::Parameter, "a session needs at least one exhibit");
    ScriptedSession session;
    const int W = 1024, H = 512;
    Gallery gallery = render_gallery(seed, exhibits, W, H);
    session.panorama = std::move(gallery.panorama);
    session.geometry = PanoramaGeometry{W, H, params.yaw_at_left_edge};
    session.exhibits = gallery.exhibits;
    session.floorplan_width = 400;
    session.floorplan_height = 300;
    for (int e = 0; e < exhibits; ++e) {
        session.floorplan_positions.push_back({400.0 * (e + 0.5) / exhibits, 60.0 + 180.0 * (e % 2)});
    }
    session.script = script;

    TruthParams p = params;
    if (p.pov_width <= 0) p.pov_width = 256;
    const int w = p.pov_width, h = pov_height(p, w);
    const Point2 c{w / 2.0, h / 2.0};
    Rng rng(mix(seed, 0x5e55));
    for (std::size_t person = 0; person < script.size(); ++person) {
        ScriptedSession::Person who;
        who.id = "P" + std::to_string(person + 1);
        for (std::size_t s = 0; s < script[person].size(); ++s) {
            const int target = script[person][s];
            if (target >= exhibits) throw Error(ErrorCode::Parameter, "script names an unknown exhibit");
            const auto t = static_cast<std::int64_t>(s) * 1000;
            const AffineMap linear = random_linear(rng, p);
            Point2 focus;
            GrayImage frame;
            if (target >= 0) {
                const Point2 center = gallery.centers[static_cast<std::size_t>(target)];
                focus = {center.x + rng.uniform(-15, 15), center.y + rng.uniform(-12, 12)};
                frame = render_view(session.panorama, true, centered_affine(linear, c, focus), w, h, p, rng).pov;
            } else {
                // Somewhere off the gallery wall: content nobody else sees.
                const GrayImage elsewhere =
                    render_scene(SceneSpec{mix(seed, 5000 + person * 1000 + s), Texture::Glyphs, 384, 320, 0.5});
                frame = render_view(elsewhere, false, centered_affine(linear, c, {192.0, 160.0}), w, h, p, rng).pov;
                focus = {rng.uniform(0, W), rng.uniform(H * 0.1, H * 0.3)};
            }
            who.timestamps.push_back(t);
            who.frames.push_back(std::move(frame));
            who.focus.push_back(focus);
            who.poses.push_back(sensor_poses(panorama_direction(focus, session.geometry), p, rng, t).second);
        }
        session.people.push_back(std::move(who));
    }
    return session;
}

std::vector<std::vector<int>> demo_session_script() {
    const int segments[4][6] = {{0, -1, 1, -1, 3, -1}, {0, -1, 2, -1, 3, -1}, {0, -1, 2, -1, -1, -1}, {0, -1, 1, -1, 0, -1}};
    const int lengths[6] = {8, 2, 10, 2, 8, 2};
    std::vector<std::vector<int>> script(4);
    for (int p = 0; p < 4; ++p) {
        for (int s = 0; s < 6; ++s) script[p].insert(script[p].end(), lengths[s], segments[p][s]);
    }
    return script;
}

TruthParams demo_session_params() {
    TruthParams p;
    p.noise_sigma = 5.0;
    p.brightness_shift = 10.0;
    p.occlusion = 0.1;
    p.drift_rate = 0.02;
    p.min_scale = 0.9;
    p.max_scale = 1.1;
    p.max_rotation = 0.1;
    p.max_shear = 0.04;
    p.max_anisotropy = 0.05;
    return p;
}

std::vector<Stream> session_streams(const ScriptedSession& session) {
    std::vector<Stream> out;
    for (const auto& who : session.people) {
        Stream s;
        s.person_id = who.id;
        for (std::size_t k = 0; k < who.frames.size(); ++k) s.frames.push_back({who.timestamps[k], {}, who.frames[k]});
        s.poses = who.poses;
        out.push_back(std::move(s));
    }
    return out;
}

Floorplan session_floorplan(const ScriptedSession& session) {
    Floorplan plan;
    plan.width = session.floorplan_width;
    plan.height = session.floorplan_height;
    for (std::size_t e = 0; e < session.exhibits.size(); ++e) {
        plan.exhibits.push_back({session.exhibits[e].label, session.floorplan_positions[e]});
    }
    return plan;
}

MuseumScene generate_museum_scene(std::uint64_t seed, int exhibits, int views, const TruthParams& params) {
    if (exhibits < 1 || views < 0) throw Error(ErrorCode::Parameter, "invalid museum scene size");
    const int W = 1024, H = 512;
    Gallery gallery = render_gallery(seed, exhibits, W, H);
    MuseumScene scene;
    scene.panorama = std::move(gallery.panorama);
    scene.entry.id = "museum-" + std::to_string(seed);
    scene.entry.kind = ReferenceKind::Panorama;
    scene.entry.width = W;
    scene.entry.height = H;
    scene.entry.yaw_at_left_edge_deg = params.yaw_at_left_edge * 180.0 / kPi;
    scene.entry.annotations = gallery.exhibits;
    const PanoramaGeometry geometry{W, H, params.yaw_at_left_edge};

    TruthParams p = params;
    if (p.pov_width <= 0) p.pov_width = 256;
    const int w = p.pov_width, h = pov_height(p, w);
    const Point2 c{w / 2.0, h / 2.0};
    Rng rng(mix(seed, 0x3e5e));
    for (int v = 0; v < views; ++v) {
        const int e = rng.integer(0, exhibits - 1);
        const auto& poly = gallery.exhibits[static_cast<std::size_t>(e)].polygon;
        const Point2 focus{rng.uniform(poly[0].x + 20, poly[1].x - 20), rng.uniform(poly[0].y + 20, poly[2].y - 20)};
        const AffineMap affine = centered_affine(random_linear(rng, p), c, focus);
        MuseumCase mc;
        mc.pov = render_view(scene.panorama, true, affine, w, h, p, rng).pov;
        mc.focus = focus;
        mc.exhibit = gallery.exhibits[static_cast<std::size_t>(e)].label;
        mc.sensor = sensor_poses(panorama_direction(focus, geometry), p, rng, static_cast<std::int64_t>(v) * 1000).second;
        scene.cases.push_back(std::move(mc));
    }
    return scene;
}

}  // namespace egofov
