#include <cmath>
#include <algorithm>
#include <numeric>

#include "egofov/error.hpp"
#include "egofov/matching.hpp"

namespace egofov {

double squared_distance(const Descriptor& a, const Descriptor& b) {
    double sum = 0.0;
    for (std::size_t i = 0; i < a.values.size(); ++i) {
        const double d = static_cast<double>(a.values[i]) - static_cast<double>(b.values[i]);
        sum += d * d;
    }
    return sum;
}

DescriptorIndex::DescriptorIndex(std::span<const Descriptor> descriptors, int leaf_size) {
    for (std::size_t i = 0; i < descriptors.size(); ++i) {
        if (descriptors[i].degenerate) continue;
        points_.push_back(descriptors[i]);
        ids_.push_back(static_cast<int>(i));
    }
    if (points_.empty()) throw Error(ErrorCode::EmptyIndex, "descriptor index needs at least one descriptor");
    order_.resize(points_.size());
    std::iota(order_.begin(), order_.end(), 0);
    build(0, static_cast<int>(points_.size()), std::max(1, leaf_size));
}

int DescriptorIndex::build(int begin, int end, int leaf_size) {
    const int id = static_cast<int>(nodes_.size());
    nodes_.push_back(TreeNode{-1, 0.0f, -1, -1, begin, end});
    if (end - begin <= leaf_size) return id;

    // Split on the dimension with the widest spread.
    int best_dim = 0;
    float best_spread = -1.0f;
    for (int d = 0; d < 128; ++d) {
        float lo = points_[order_[begin]].values[d];
        float hi = lo;
        for (int k = begin + 1; k < end; ++k) {
            const float v = points_[order_[k]].values[d];
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        if (hi - lo > best_spread) {
            best_spread = hi - lo;
            best_dim = d;
        }
    }
    if (best_spread <= 0.0f) return id;  // all points identical: keep as one leaf

    const int mid = begin + (end - begin) / 2;
    auto first = order_.begin() + begin;
    auto last = order_.begin() + end;
    std::nth_element(first, order_.begin() + mid, last, [&](int a, int b) {
        const float va = points_[a].values[best_dim];
        const float vb = points_[b].values[best_dim];
        return va < vb || (va == vb && a < b);
    });
    const float split = points_[order_[mid]].values[best_dim];

    const int left = build(begin, mid, leaf_size);
    const int right = build(mid, end, leaf_size);
    nodes_[id].split_dim = best_dim;
    nodes_[id].split_value = split;
    nodes_[id].left = left;
    nodes_[id].right = right;
    return id;
}

void DescriptorIndex::offer(Neighbors& best, int index, double dist2) {
    auto before = [](double da, int ia, double db, int ib) {
        return da < db || (da == db && ia < ib);
    };
    if (best.first < 0 || before(dist2, index, best.first_distance, best.first)) {
        best.second = best.first;
        best.second_distance = best.first_distance;
        best.first = index;
        best.first_distance = dist2;
    } else if (best.second < 0 || before(dist2, index, best.second_distance, best.second)) {
        best.second = index;
        best.second_distance = dist2;
    }
}

void DescriptorIndex::search(int node_id, const Descriptor& query, Neighbors& best) const {
    const TreeNode& node = nodes_[node_id];
    if (node.split_dim < 0) {
        for (int k = node.begin; k < node.end; ++k) {
            const int p = order_[k];
            offer(best, ids_[p], squared_distance(points_[p], query));
        }
        return;
    }
    // Points equal to the split value can sit on either side, so the plane
    // distance is a lower bound for both children.
    const double diff = static_cast<double>(query.values[node.split_dim]) - node.split_value;
    const int near = diff < 0 ? node.left : node.right;
    const int far = diff < 0 ? node.right : node.left;
    search(near, query, best);
    // Visit on equality so an equidistant point with a lower index is not missed.
    if (best.second < 0 || diff * diff <= best.second_distance) search(far, query, best);
}

Neighbors DescriptorIndex::nearest_two(const Descriptor& query) const {
    Neighbors best;
    search(0, query, best);
    best.first_distance = std::sqrt(best.first_distance);
    if (best.second >= 0) best.second_distance = std::sqrt(best.second_distance);
    return best;
}

DescriptorIndex build_index(std::span<const Descriptor> descriptors) { return DescriptorIndex(descriptors); }

Neighbors linear_scan_two(std::span<const Descriptor> descriptors, const Descriptor& query) {
    Neighbors best;
    for (std::size_t i = 0; i < descriptors.size(); ++i) {
        if (descriptors[i].degenerate) continue;
        const double d2 = squared_distance(descriptors[i], query);
        const int idx = static_cast<int>(i);
        if (best.first < 0 || d2 < best.first_distance) {
            best.second = best.first;
            best.second_distance = best.first_distance;
            best.first = idx;
            best.first_distance = d2;
        } else if (best.second < 0 || d2 < best.second_distance) {
            best.second = idx;
            best.second_distance = d2;
        }
    }
    if (best.first >= 0) best.first_distance = std::sqrt(best.first_distance);
    if (best.second >= 0) best.second_distance = std::sqrt(best.second_distance);
    return best;
}

std::vector<Correspondence> match_descriptors(const DescriptorIndex& index,
                                              std::span<const Descriptor> queries, double ratio) {
    if (!(ratio > 0.0 && ratio <= 1.0)) throw Error(ErrorCode::Parameter, "ratio must lie in (0, 1]");
    std::vector<Correspondence> out;
    for (std::size_t q = 0; q < queries.size(); ++q) {
        if (queries[q].degenerate) continue;
        const Neighbors nn = index.nearest_two(queries[q]);
        if (nn.first < 0) continue;
        if (nn.second >= 0 && !(nn.first_distance < ratio * nn.second_distance)) continue;
        out.push_back({static_cast<int>(q), nn.first, nn.first_distance});
    }
    return out;
}

}  // namespace egofov
