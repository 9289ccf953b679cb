#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <limits>
#include <span>
#include <vector>

#include "egofov/features.hpp"
#include "egofov/imaging.hpp"

namespace egofov {

struct Neighbors {
    int first = -1;
    double first_distance = std::numeric_limits<double>::infinity();
    int second = -1;
    double second_distance = std::numeric_limits<double>::infinity();
};

// Squared L2 distance, accumulated in double in dimension order. Both the
// tree and the linear-scan reference use this so results compare exactly.
double squared_distance(const Descriptor& a, const Descriptor& b);

// Exact 2-nearest-neighbour search over 128-d descriptors. Ties are broken by
// the lower descriptor index. Degenerate descriptors are not indexed.
class DescriptorIndex {
public:
    explicit DescriptorIndex(std::span<const Descriptor> descriptors, int leaf_size = 8);

    Neighbors nearest_two(const Descriptor& query) const;
    std::size_t size() const { return points_.size(); }

private:
    struct TreeNode {
        int split_dim = -1;  // -1 marks a leaf
        float split_value = 0.0f;
        int left = -1;
        int right = -1;
        int begin = 0;
        int end = 0;
    };

    int build(int begin, int end, int leaf_size);
    void search(int node, const Descriptor& query, Neighbors& best) const;
    static void offer(Neighbors& best, int index, double dist2);

    std::vector<Descriptor> points_;
    std::vector<int> ids_;  // original index of each stored point
    std::vector<int> order_;
    std::vector<TreeNode> nodes_;
};

DescriptorIndex build_index(std::span<const Descriptor> descriptors);

// Reference implementation used to cross-check the tree.
Neighbors linear_scan_two(std::span<const Descriptor> descriptors, const Descriptor& query);

struct Correspondence {
    int pov_index = 0;
    int ref_index = 0;
    double descriptor_distance = 0.0;
};

// Lowe-style ratio test: keep a query's nearest neighbour iff d1 < ratio * d2.
std::vector<Correspondence> match_descriptors(const DescriptorIndex& index,
                                              std::span<const Descriptor> queries,
                                              double ratio);

// 2x3 matrix [a b tx; c d ty] mapping POV pixels to reference pixels.
struct AffineMap {
    std::array<double, 6> m{1.0, 0.0, 0.0, 0.0, 1.0, 0.0};

    static AffineMap identity() { return {}; }
    static AffineMap translation(double tx, double ty) { return {{1.0, 0.0, tx, 0.0, 1.0, ty}}; }

    double det() const { return m[0] * m[4] - m[1] * m[3]; }
    Point2 apply(Point2 p) const { return {m[0] * p.x + m[1] * p.y + m[2], m[3] * p.x + m[4] * p.y + m[5]}; }
    // (this * other)(p) == this(other(p))
    AffineMap compose(const AffineMap& other) const;
    AffineMap inverse() const;
};

struct PointPair {
    Point2 pov;
    Point2 ref;
};

// Exact fit through three non-collinear pairs. Throws Error(DegenerateSample).
AffineMap estimate_affine(std::span<const PointPair, 3> pairs);

// Least-squares fit over >= 3 pairs. Throws Error(DegenerateSample).
AffineMap fit_affine_least_squares(std::span<const PointPair> pairs);

Point2 transfer_focus(const AffineMap& affine, Point2 f_pov);

struct RansacParams {
    int iterations = 2000;
    double inlier_threshold = 3.0;  // pixels
    int min_inliers = 8;
    std::uint64_t seed = 0;
    bool exhaustive = false;  // enumerate triples in lexicographic order instead of sampling

    void validate() const;
};

struct MatchResult {
    AffineMap affine;
    std::vector<int> inlier_indices;  // into the correspondence list, ascending
    Point2 f_ref;                     // filled by the localization pipeline
};

// Throws Error(InsufficientMatches) with fewer than 3 correspondences and
// Error(NoConsensus) when the best model has fewer than min_inliers.
MatchResult ransac_affine(std::span<const Correspondence> correspondences,
                          std::span<const Point2> pov_points, std::span<const Point2> ref_points,
                          const RansacParams& params);

// Debug dump: `pov_idx ref_idx dist inlier` per line.
void write_correspondences(std::ostream& out, std::span<const Correspondence> correspondences,
                           const MatchResult* result);

}  // namespace egofov
