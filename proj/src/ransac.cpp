#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <ostream>
#include <random>

#include "egofov/error.hpp"
#include "egofov/matching.hpp"

namespace egofov {

AffineMap AffineMap::compose(const AffineMap& o) const {
    const auto& a = m;
    const auto& b = o.m;
    return {{a[0] * b[0] + a[1] * b[3], a[0] * b[1] + a[1] * b[4], a[0] * b[2] + a[1] * b[5] + a[2],
             a[3] * b[0] + a[4] * b[3], a[3] * b[1] + a[4] * b[4], a[3] * b[2] + a[4] * b[5] + a[5]}};
}

AffineMap AffineMap::inverse() const {
    const double d = det();
    if (!(std::abs(d) > 1e-12)) throw Error(ErrorCode::Parameter, "affine map is not invertible");
    const double ia = m[4] / d, ib = -m[1] / d, ic = -m[3] / d, id = m[0] / d;
    return {{ia, ib, -(ia * m[2] + ib * m[5]), ic, id, -(ic * m[2] + id * m[5])}};
}

Point2 transfer_focus(const AffineMap& affine, Point2 f_pov) { return affine.apply(f_pov); }

namespace {

double triangle_area(Point2 a, Point2 b, Point2 c) {
    return 0.5 * std::abs((b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y));
}

}  // namespace

AffineMap estimate_affine(std::span<const PointPair, 3> pairs) {
    if (!(triangle_area(pairs[0].pov, pairs[1].pov, pairs[2].pov) > 1e-9)) {
        throw Error(ErrorCode::DegenerateSample, "affine sample points are collinear");
    }
    // Two decoupled 3x3 systems: [x y 1] * (a b tx) = x', [x y 1] * (c d ty) = y'.
    Eigen::Matrix3d design;
    Eigen::Vector3d rx, ry;
    for (int i = 0; i < 3; ++i) {
        design.row(i) << pairs[i].pov.x, pairs[i].pov.y, 1.0;
        rx(i) = pairs[i].ref.x;
        ry(i) = pairs[i].ref.y;
    }
    const Eigen::FullPivLU<Eigen::Matrix3d> lu(design);
    const Eigen::Vector3d top = lu.solve(rx);
    const Eigen::Vector3d bottom = lu.solve(ry);
    AffineMap a{{top(0), top(1), top(2), bottom(0), bottom(1), bottom(2)}};
    if (!(std::abs(a.det()) > 1e-12) || !std::isfinite(a.det())) {
        throw Error(ErrorCode::DegenerateSample, "affine sample yields a singular map");
    }
    return a;
}

AffineMap fit_affine_least_squares(std::span<const PointPair> pairs) {
    if (pairs.size() < 3) throw Error(ErrorCode::DegenerateSample, "least-squares fit needs >= 3 pairs");
    // Center the POV points for conditioning.
    double mx = 0, my = 0;
    for (const auto& p : pairs) { mx += p.pov.x; my += p.pov.y; }
    mx /= static_cast<double>(pairs.size());
    my /= static_cast<double>(pairs.size());
    Eigen::MatrixXd design(pairs.size(), 3);
    Eigen::VectorXd rx(pairs.size()), ry(pairs.size());
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        const auto row = static_cast<Eigen::Index>(i);
        design.row(row) << pairs[i].pov.x - mx, pairs[i].pov.y - my, 1.0;
        rx(row) = pairs[i].ref.x;
        ry(row) = pairs[i].ref.y;
    }
    const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
    if (qr.rank() < 3) throw Error(ErrorCode::DegenerateSample, "least-squares pairs are collinear");
    const Eigen::Vector3d top = qr.solve(rx);
    const Eigen::Vector3d bottom = qr.solve(ry);
    AffineMap a{{top(0), top(1), top(2) - top(0) * mx - top(1) * my,
                 bottom(0), bottom(1), bottom(2) - bottom(0) * mx - bottom(1) * my}};
    if (!(std::abs(a.det()) > 1e-12)) throw Error(ErrorCode::DegenerateSample, "least-squares map is singular");
    return a;
}

void RansacParams::validate() const {
    if (iterations < 1) throw Error(ErrorCode::Parameter, "ransac iterations must be >= 1");
    if (!(inlier_threshold > 0.0)) throw Error(ErrorCode::Parameter, "ransac inlier_threshold must be positive");
    if (min_inliers < 3) throw Error(ErrorCode::Parameter, "ransac min_inliers must be >= 3");
}

namespace {

std::vector<int> inliers_of(const AffineMap& a, std::span<const PointPair> pairs, double threshold) {
    std::vector<int> out;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        if (distance(a.apply(pairs[i].pov), pairs[i].ref) <= threshold) out.push_back(static_cast<int>(i));
    }
    return out;
}

double median_residual(const AffineMap& a, std::span<const PointPair> pairs, const std::vector<int>& subset) {
    std::vector<double> r;
    r.reserve(subset.size());
    for (int i : subset) r.push_back(distance(a.apply(pairs[i].pov), pairs[i].ref));
    if (r.empty()) return 0.0;
    auto mid = r.begin() + static_cast<std::ptrdiff_t>(r.size() / 2);
    std::nth_element(r.begin(), mid, r.end());
    return *mid;
}

}  // namespace

MatchResult ransac_affine(std::span<const Correspondence> correspondences,
                          std::span<const Point2> pov_points, std::span<const Point2> ref_points,
                          const RansacParams& params) {
    params.validate();
    const int n = static_cast<int>(correspondences.size());
    if (n < 3) {
        throw Error(ErrorCode::InsufficientMatches,
                    "ransac needs >= 3 correspondences, got " + std::to_string(n));
    }
    std::vector<PointPair> pairs;
    pairs.reserve(correspondences.size());
    for (const auto& c : correspondences) {
        pairs.push_back({pov_points[static_cast<std::size_t>(c.pov_index)],
                         ref_points[static_cast<std::size_t>(c.ref_index)]});
    }

    std::mt19937_64 rng(params.seed);
    std::uniform_int_distribution<int> pick(0, n - 1);
    int ti = 0, tj = 1, tk = 2;  // lexicographic cursor for exhaustive mode
    bool exhausted = false;

    std::size_t best_count = 0;
    AffineMap best_model;
    double best_median = -1.0;  // lazily computed
    bool have_model = false;

    for (int it = 0; it < params.iterations && !exhausted; ++it) {
        std::array<int, 3> idx{};
        if (params.exhaustive) {
            idx = {ti, tj, tk};
            if (++tk == n) {
                if (++tj == n - 1) {
                    if (++ti == n - 2) exhausted = true;
                    tj = ti + 1;
                }
                tk = tj + 1;
            }
        } else {
            idx[0] = pick(rng);
            do { idx[1] = pick(rng); } while (idx[1] == idx[0]);
            do { idx[2] = pick(rng); } while (idx[2] == idx[0] || idx[2] == idx[1]);
        }
        const std::array<PointPair, 3> sample{pairs[idx[0]], pairs[idx[1]], pairs[idx[2]]};
        AffineMap model;
        try {
            model = estimate_affine(std::span<const PointPair, 3>(sample));
        } catch (const Error&) {
            continue;
        }
        std::size_t count = 0;
        for (const auto& p : pairs) {
            if (distance(model.apply(p.pov), p.ref) <= params.inlier_threshold) ++count;
        }
        if (!have_model || count > best_count) {
            best_count = count;
            best_model = model;
            best_median = -1.0;
            have_model = true;
        } else if (count == best_count && count > 0) {
            // Equal support: the tighter fit wins, then the earlier iteration.
            if (best_median < 0.0) {
                best_median = median_residual(best_model, pairs, inliers_of(best_model, pairs, params.inlier_threshold));
            }
            const double median = median_residual(model, pairs, inliers_of(model, pairs, params.inlier_threshold));
            if (median < best_median) {
                best_model = model;
                best_median = median;
            }
        }
    }

    if (!have_model || best_count < static_cast<std::size_t>(params.min_inliers)) {
        throw Error(ErrorCode::NoConsensus, "ransac found " + std::to_string(best_count) +
                                                " inliers, need " + std::to_string(params.min_inliers));
    }

    std::vector<int> inliers = inliers_of(best_model, pairs, params.inlier_threshold);
    // One least-squares refit on the consensus set. It replaces the sampled
    // model when it gains support, or keeps it with a median residual that is
    // no worse; an exact sampled model is not traded for a biased refit.
    std::vector<PointPair> support;
    for (int i : inliers) support.push_back(pairs[static_cast<std::size_t>(i)]);
    try {
        const AffineMap refit = fit_affine_least_squares(support);
        std::vector<int> refit_inliers = inliers_of(refit, pairs, params.inlier_threshold);
        const bool better =
            refit_inliers.size() > inliers.size() ||
            (refit_inliers.size() == inliers.size() &&
             median_residual(refit, pairs, refit_inliers) <= median_residual(best_model, pairs, inliers));
        if (better) {
            best_model = refit;
            inliers = std::move(refit_inliers);
        }
    } catch (const Error&) {
    }

    MatchResult result;
    result.affine = best_model;
    result.inlier_indices = std::move(inliers);
    return result;
}

void write_correspondences(std::ostream& out, std::span<const Correspondence> correspondences,
                           const MatchResult* result) {
    std::vector<char> inlier(correspondences.size(), 0);
    if (result) {
        for (int i : result->inlier_indices) inlier[static_cast<std::size_t>(i)] = 1;
    }
    for (std::size_t i = 0; i < correspondences.size(); ++i) {
        const auto& c = correspondences[i];
        out << c.pov_index << ' ' << c.ref_index << ' ' << c.descriptor_distance << ' '
            << static_cast<int>(inlier[i]) << '\n';
    }
}

}  // namespace egofov
