#include "egofov/gist.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>

#include "egofov/error.hpp"
#include "egofov/sensor.hpp"

namespace egofov {

void GistParams::validate() const {
    if (canonical_size < 8) throw Error(ErrorCode::Parameter, "gist canonical_size must be >= 8");
    if (scales < 1 || orientations < 1 || grid < 1) {
        throw Error(ErrorCode::Parameter, "gist scales, orientations and grid must be >= 1");
    }
    if (grid > canonical_size) throw Error(ErrorCode::Parameter, "gist grid exceeds canonical size");
    if (padding < 0) throw Error(ErrorCode::Parameter, "gist padding must be >= 0");
    if (!(max_frequency > 0.0 && max_frequency <= 0.5)) {
        throw Error(ErrorCode::Parameter, "gist max_frequency must lie in (0, 0.5]");
    }
    if (!(local_sigma > 0.0) || !(epsilon > 0.0)) {
        throw Error(ErrorCode::Parameter, "gist local_sigma and epsilon must be positive");
    }
}

namespace {

struct FftwDeleter {
    void operator()(fftw_complex* p) const { fftw_free(p); }
};
using FftwBuffer = std::unique_ptr<fftw_complex[], FftwDeleter>;

FftwBuffer make_buffer(std::size_t n) {
    auto* p = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * n));
    if (!p) throw std::bad_alloc();
    return FftwBuffer(p);
}

// FFTW planning is not thread-safe; plans are created once per size under a
// lock and then executed on caller-owned buffers.
struct FftPlans {
    fftw_plan forward;
    fftw_plan backward;
};

const FftPlans& plans_for(int size) {
    static std::mutex mutex;
    static std::map<int, FftPlans> cache;
    std::lock_guard lock(mutex);
    auto it = cache.find(size);
    if (it == cache.end()) {
        const std::size_t n = static_cast<std::size_t>(size) * size;
        auto in = make_buffer(n);
        auto out = make_buffer(n);
        FftPlans p{fftw_plan_dft_2d(size, size, in.get(), out.get(), FFTW_FORWARD, FFTW_ESTIMATE),
                   fftw_plan_dft_2d(size, size, in.get(), out.get(), FFTW_BACKWARD, FFTW_ESTIMATE)};
        it = cache.emplace(size, p).first;
    }
    return it->second;
}

struct FilterBank {
    int size = 0;
    std::vector<std::vector<double>> filters;  // scale-major, then orientation
};

std::shared_ptr<const FilterBank> build_bank(const GistParams& params) {
    auto bank = std::make_shared<FilterBank>();
    const int m = params.canonical_size + 2 * params.padding;
    bank->size = m;
    const double log_bandwidth = std::log(0.55);
    const double angular_sigma = 0.6 * std::numbers::pi / params.orientations;
    for (int s = 0; s < params.scales; ++s) {
        const double f0 = params.max_frequency / std::ldexp(1.0, s);
        for (int o = 0; o < params.orientations; ++o) {
            const double theta = std::numbers::pi * o / params.orientations;
            std::vector<double> filter(static_cast<std::size_t>(m) * m, 0.0);
            for (int ky = 0; ky < m; ++ky) {
                const double v = static_cast<double>(ky < (m + 1) / 2 ? ky : ky - m) / m;
                for (int kx = 0; kx < m; ++kx) {
                    const double u = static_cast<double>(kx < (m + 1) / 2 ? kx : kx - m) / m;
                    const double rho = std::hypot(u, v);
                    if (rho == 0.0) continue;
                    const double radial = std::log(rho / f0);
                    const double dtheta = wrap_angle(std::atan2(v, u) - theta);
                    filter[static_cast<std::size_t>(ky) * m + kx] =
                        std::exp(-radial * radial / (2.0 * log_bandwidth * log_bandwidth)) *
                        std::exp(-dtheta * dtheta / (2.0 * angular_sigma * angular_sigma));
                }
            }
            bank->filters.push_back(std::move(filter));
        }
    }
    return bank;
}

std::shared_ptr<const FilterBank> bank_for(const GistParams& params) {
    static std::mutex mutex;
    static std::vector<std::pair<GistParams, std::shared_ptr<const FilterBank>>> cache;
    std::lock_guard lock(mutex);
    for (const auto& [p, bank] : cache) {
        if (p == params) return bank;
    }
    cache.emplace_back(params, build_bank(params));
    return cache.back().second;
}

struct Tap {
    int index;
    double weight;
};

// Per output sample: box-average taps when shrinking, bilinear when enlarging.
std::vector<std::vector<Tap>> resample_taps(int n_in, int n_out) {
    std::vector<std::vector<Tap>> taps(static_cast<std::size_t>(n_out));
    const double scale = static_cast<double>(n_in) / n_out;
    for (int o = 0; o < n_out; ++o) {
        auto& t = taps[static_cast<std::size_t>(o)];
        if (scale >= 1.0) {
            const double lo = o * scale;
            const double hi = (o + 1) * scale;
            for (int i = static_cast<int>(std::floor(lo)); i < static_cast<int>(std::ceil(hi)); ++i) {
                const double overlap = std::min(hi, i + 1.0) - std::max(lo, static_cast<double>(i));
                if (overlap > 0) t.push_back({std::min(i, n_in - 1), overlap / scale});
            }
        } else {
            const double src = std::clamp((o + 0.5) * scale - 0.5, 0.0, static_cast<double>(n_in - 1));
            const int i0 = static_cast<int>(std::floor(src));
            const double a = src - i0;
            t.push_back({i0, 1.0 - a});
            if (a > 0) t.push_back({std::min(i0 + 1, n_in - 1), a});
        }
    }
    return taps;
}

std::vector<double> to_canonical(const GrayImage& image, int size) {
    const int w = image.width();
    const int h = image.height();
    const auto tx = resample_taps(w, size);
    const auto ty = resample_taps(h, size);
    std::vector<double> rows(static_cast<std::size_t>(h) * size);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < size; ++x) {
            double acc = 0.0;
            for (const auto& t : tx[static_cast<std::size_t>(x)]) acc += t.weight * image.at(t.index, y);
            rows[static_cast<std::size_t>(y) * size + x] = acc / 255.0;
        }
    }
    std::vector<double> out(static_cast<std::size_t>(size) * size);
    for (int y = 0; y < size; ++y) {
        for (int x = 0; x < size; ++x) {
            double acc = 0.0;
            for (const auto& t : ty[static_cast<std::size_t>(y)]) {
                acc += t.weight * rows[static_cast<std::size_t>(t.index) * size + x];
            }
            out[static_cast<std::size_t>(y) * size + x] = acc;
        }
    }
    return out;
}

int reflect(int i, int n) {
    while (i < 0 || i >= n) i = i < 0 ? -i - 1 : 2 * n - i - 1;
    return i;
}

std::vector<double> gaussian_blur(const std::vector<double>& img, int n, double sigma) {
    const int radius = static_cast<int>(std::ceil(3.0 * sigma));
    std::vector<double> kernel(static_cast<std::size_t>(2 * radius + 1));
    double total = 0.0;
    for (int k = -radius; k <= radius; ++k) {
        kernel[static_cast<std::size_t>(k + radius)] = std::exp(-k * k / (2.0 * sigma * sigma));
        total += kernel[static_cast<std::size_t>(k + radius)];
    }
    for (double& k : kernel) k /= total;
    std::vector<double> tmp(img.size()), out(img.size());
    for (int y = 0; y < n; ++y) {
        for (int x = 0; x < n; ++x) {
            double acc = 0.0;
            for (int k = -radius; k <= radius; ++k) {
                acc += kernel[static_cast<std::size_t>(k + radius)] * img[static_cast<std::size_t>(y) * n + reflect(x + k, n)];
            }
            tmp[static_cast<std::size_t>(y) * n + x] = acc;
        }
    }
    for (int y = 0; y < n; ++y) {
        for (int x = 0; x < n; ++x) {
            double acc = 0.0;
            for (int k = -radius; k <= radius; ++k) {
                acc += kernel[static_cast<std::size_t>(k + radius)] * tmp[static_cast<std::size_t>(reflect(y + k, n)) * n + x];
            }
            out[static_cast<std::size_t>(y) * n + x] = acc;
        }
    }
    return out;
}

}  // namespace

GistDescriptor gist_descriptor(const GrayImage& image, const GistParams& params) {
    params.validate();
    const int n = params.canonical_size;
    std::vector<double> img = to_canonical(image, n);

    // Local contrast normalization.
    const std::vector<double> mean = gaussian_blur(img, n, params.local_sigma);
    std::vector<double> residual(img.size()), energy(img.size());
    for (std::size_t i = 0; i < img.size(); ++i) {
        residual[i] = img[i] - mean[i];
        energy[i] = residual[i] * residual[i];
    }
    const std::vector<double> local_var = gaussian_blur(energy, n, params.local_sigma);
    for (std::size_t i = 0; i < img.size(); ++i) {
        img[i] = residual[i] / (std::sqrt(std::max(local_var[i], 0.0)) + params.epsilon);
    }

    const auto bank = bank_for(params);
    const int m = bank->size;
    const std::size_t total = static_cast<std::size_t>(m) * m;
    const FftPlans& plans = plans_for(m);
    auto spatial = make_buffer(total);
    auto spectrum = make_buffer(total);
    auto product = make_buffer(total);
    auto response = make_buffer(total);
    for (int y = 0; y < m; ++y) {
        for (int x = 0; x < m; ++x) {
            const int sy = reflect(y - params.padding, n);
            const int sx = reflect(x - params.padding, n);
            spatial[static_cast<std::size_t>(y) * m + x][0] = img[static_cast<std::size_t>(sy) * n + sx];
            spatial[static_cast<std::size_t>(y) * m + x][1] = 0.0;
        }
    }
    fftw_execute_dft(plans.forward, spatial.get(), spectrum.get());

    const int g = params.grid;
    GistDescriptor d;
    d.values.assign(params.length(), 0.0);
    std::vector<double> cell_count(static_cast<std::size_t>(g) * g, 0.0);
    for (int y = 0; y < n; ++y) {
        for (int x = 0; x < n; ++x) cell_count[static_cast<std::size_t>((y * g / n) * g + x * g / n)] += 1.0;
    }
    const double inv_total = 1.0 / static_cast<double>(total);
    for (std::size_t f = 0; f < bank->filters.size(); ++f) {
        const auto& filter = bank->filters[f];
        for (std::size_t i = 0; i < total; ++i) {
            product[i][0] = spectrum[i][0] * filter[i];
            product[i][1] = spectrum[i][1] * filter[i];
        }
        fftw_execute_dft(plans.backward, product.get(), response.get());
        double* cells = d.values.data() + f * static_cast<std::size_t>(g) * g;
        for (int y = 0; y < n; ++y) {
            const std::size_t row = static_cast<std::size_t>(y + params.padding) * m + params.padding;
            for (int x = 0; x < n; ++x) {
                const double re = response[row + x][0] * inv_total;
                const double im = response[row + x][1] * inv_total;
                cells[(y * g / n) * g + x * g / n] += std::sqrt(re * re + im * im);
            }
        }
        for (int c = 0; c < g * g; ++c) cells[c] /= cell_count[static_cast<std::size_t>(c)];
    }
    return d;
}

double gist_distance(const GistDescriptor& a, const GistDescriptor& b) {
    if (a.values.size() != b.values.size()) {
        throw Error(ErrorCode::Parameter, "gist descriptors differ in length");
    }
    auto norm = [](const std::vector<double>& v) {
        double sq = 0.0;
        for (double x : v) sq += x * x;
        return std::sqrt(sq);
    };
    const double na = norm(a.values);
    const double nb = norm(b.values);
    const double sa = na > 1e-12 ? 1.0 / na : 0.0;
    const double sb = nb > 1e-12 ? 1.0 / nb : 0.0;
    double sq = 0.0;
    for (std::size_t i = 0; i < a.values.size(); ++i) {
        const double diff = a.values[i] * sa - b.values[i] * sb;
        sq += diff * diff;
    }
    return std::sqrt(sq);
}

Window match_window(const GrayImage& pov, const GrayImage& ref, Point2 center, bool panoramic,
                    const WindowPolicy& policy) {
    const double aspect = static_cast<double>(pov.height()) / pov.width();
    const int width = panoramic
                          ? std::max(1, static_cast<int>(std::lround(ref.width() * policy.panorama_fraction)))
                          : pov.width();
    const int height = std::max(1, static_cast<int>(std::lround(width * aspect)));
    return Window{center, width, height};
}

double localization_score(const GrayImage& pov, const GrayImage& ref, const Window& window,
                          bool panoramic, const GistParams& params) {
    const GrayImage w = crop(ref, window, panoramic);
    return gist_distance(gist_descriptor(pov, params), gist_descriptor(w, params));
}

double localization_score(const GrayImage& pov, const GrayImage& ref, Point2 f, bool panoramic,
                          const GistParams& params, const WindowPolicy& policy) {
    return localization_score(pov, ref, match_window(pov, ref, f, panoramic, policy), panoramic, params);
}

bool accept(double score, double threshold) {
    if (!(threshold > 0.0)) throw Error(ErrorCode::Parameter, "acceptance threshold must be positive");
    return score <= threshold;
}

Selection select_reference(const GrayImage& pov, std::span<const ReferenceCandidate> candidates,
                           std::optional<double> pose_yaw, const GistParams& params,
                           const WindowPolicy& policy) {
    if (candidates.empty()) throw Error(ErrorCode::Parameter, "select_reference needs at least one candidate");
    Selection best;
    best.score = std::numeric_limits<double>::infinity();
    bool found = false;
    std::optional<GistDescriptor> pov_gist;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        const auto& c = candidates[i];
        if (!c.match || !c.image) continue;
        if (!pov_gist) pov_gist = gist_descriptor(pov, params);
        const Window w = match_window(pov, *c.image, c.match->f_ref, c.panoramic, policy);
        const double score = gist_distance(*pov_gist, gist_descriptor(crop(*c.image, w, c.panoramic), params));
        if (!found || score < best.score) {
            best = Selection{i, false, score};
            found = true;
        }
    }
    if (found) return best;

    best = Selection{0, true, std::numeric_limits<double>::infinity()};
    if (pose_yaw) {
        double best_gap = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < candidates.size(); ++i) {
            const double gap = std::abs(wrap_angle(candidates[i].heading - *pose_yaw));
            if (gap < best_gap) {
                best_gap = gap;
                best.index = i;
            }
        }
    }
    return best;
}

}  // namespace egofov
