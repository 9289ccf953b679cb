#include <algorithm>
#include <array>
#include <cstdint>
#include <limits>
#include <ostream>

#include "egofov/error.hpp"
#include "egofov/features.hpp"

namespace egofov {

void MserParams::validate() const {
    if (delta < 1) throw Error(ErrorCode::Parameter, "mser delta must be >= 1");
    if (min_area <= 0) throw Error(ErrorCode::Parameter, "mser min_area must be positive");
    if (!(max_area > 0.0 && max_area <= 1.0)) {
        throw Error(ErrorCode::Parameter, "mser max_area must lie in (0, 1]");
    }
    if (!(max_variation > 0.0)) throw Error(ErrorCode::Parameter, "mser max_variation must be positive");
    if (duplicate_overlap < 0.0) throw Error(ErrorCode::Parameter, "mser duplicate_overlap must be >= 0");
}

namespace {

struct Node {
    int level = 0;
    int parent = -1;
    int first_child = -1;
    int next_sibling = -1;
    int main_child = -1;
    std::int64_t area = 0;
    std::int64_t sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
    std::int64_t border = 0;
    double variation = 0.0;
};

// Component tree of the sub-level sets of `keys`, built by union-find over
// pixels visited in ascending key order.
class ComponentTree {
public:
    ComponentTree(const GrayImage& image, Polarity polarity, bool track_pixels)
        : width_(image.width()), height_(image.height()), polarity_(polarity) {
        const auto px = image.pixels();
        const std::size_t n = px.size();
        keys_.resize(n);
        std::array<int, 256> histogram{};
        for (std::size_t i = 0; i < n; ++i) {
            keys_[i] = polarity == Polarity::Bright ? static_cast<std::uint8_t>(255 - px[i]) : px[i];
            ++histogram[keys_[i]];
        }
        std::array<int, 256> rank{};
        for (int k = 0; k < 256; ++k) {
            if (histogram[k] > 0) {
                rank[k] = static_cast<int>(level_keys_.size());
                level_keys_.push_back(k);
            }
        }
        const int levels = static_cast<int>(level_keys_.size());
        positions_.resize(static_cast<std::size_t>(levels));
        for (int r = 0; r < levels; ++r) {
            positions_[r] = levels == 1 ? 0.0 : 255.0 * r / (levels - 1);
        }

        // Counting sort: pixels of each level in ascending index order.
        std::vector<int> level_start(static_cast<std::size_t>(levels) + 1, 0);
        for (std::size_t i = 0; i < n; ++i) ++level_start[rank[keys_[i]] + 1];
        for (int r = 0; r < levels; ++r) level_start[r + 1] += level_start[r];
        std::vector<int> order(n);
        {
            std::vector<int> cursor(level_start.begin(), level_start.end() - 1);
            for (std::size_t i = 0; i < n; ++i) order[cursor[rank[keys_[i]]]++] = static_cast<int>(i);
        }

        build(order, level_start, track_pixels);
    }

    const std::vector<Node>& nodes() const { return nodes_; }
    double position(int level) const { return positions_[static_cast<std::size_t>(level)]; }
    int intensity(int level) const {
        const int key = level_keys_[static_cast<std::size_t>(level)];
        return polarity_ == Polarity::Bright ? 255 - key : key;
    }

    void compute_variation(double delta) {
        for (auto& node : nodes_) node.variation = variation_of(node, delta);
    }

    // Pixels of the subtree rooted at `id`, ascending.
    std::vector<int> pixels_of(int id) const {
        std::vector<int> out;
        std::vector<int> stack{id};
        while (!stack.empty()) {
            const int cur = stack.back();
            stack.pop_back();
            for (int k = pixel_bucket_start_[cur]; k < pixel_bucket_start_[cur + 1]; ++k) {
                out.push_back(pixel_bucket_[k]);
            }
            for (int c = nodes_[cur].first_child; c >= 0; c = nodes_[c].next_sibling) stack.push_back(c);
        }
        std::sort(out.begin(), out.end());
        return out;
    }

private:
    int find(int p) {
        while (uf_[p] != p) {
            uf_[p] = uf_[uf_[p]];
            p = uf_[p];
        }
        return p;
    }

    void build(const std::vector<int>& order, const std::vector<int>& level_start, bool track_pixels) {
        const std::size_t n = order.size();
        uf_.assign(n, -1);
        struct RootData {
            std::int64_t area = 0;
            std::int64_t sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
            std::int64_t border = 0;
            int node = -1;
            int pending_head = -1;
            int pending_tail = -1;
            int touched = -1;
            int created = -1;
        };
        std::vector<RootData> roots(n);
        std::vector<int> pending_next;
        std::vector<int> pixel_node;
        if (track_pixels) pixel_node.assign(n, -1);

        auto touch = [&](int root, int level) {
            RootData& d = roots[root];
            if (d.touched == level) return;
            d.touched = level;
            if (d.node >= 0) {
                const int id = d.node;
                d.node = -1;
                pending_next[id] = -1;
                if (d.pending_tail >= 0) pending_next[d.pending_tail] = id; else d.pending_head = id;
                d.pending_tail = id;
            }
        };

        const int levels = static_cast<int>(level_start.size()) - 1;
        std::vector<int> touched;
        for (int level = 0; level < levels; ++level) {
            touched.clear();
            for (int k = level_start[level]; k < level_start[level + 1]; ++k) {
                const int p = order[k];
                const std::int64_t x = p % width_;
                const std::int64_t y = p / width_;
                uf_[p] = p;
                RootData& d = roots[p];
                d.area = 1;
                d.sx = x; d.sy = y; d.sxx = x * x; d.sxy = x * y; d.syy = y * y;
                d.border = (x == 0 || y == 0 || x + 1 == width_ || y + 1 == height_) ? 1 : 0;
                d.touched = level;
                touched.push_back(p);

                const int neighbors[4] = {
                    x > 0 ? p - 1 : -1,
                    x + 1 < width_ ? p + 1 : -1,
                    y > 0 ? p - width_ : -1,
                    y + 1 < height_ ? p + width_ : -1,
                };
                for (int q : neighbors) {
                    if (q < 0 || uf_[q] < 0) continue;
                    int rp = find(p);
                    int rq = find(q);
                    if (rp == rq) continue;
                    touch(rp, level);
                    touch(rq, level);
                    // Larger component absorbs the smaller; ties go to the lower index.
                    if (roots[rq].area > roots[rp].area || (roots[rq].area == roots[rp].area && rq < rp)) {
                        std::swap(rp, rq);
                    }
                    RootData& keep = roots[rp];
                    RootData& gone = roots[rq];
                    uf_[rq] = rp;
                    keep.area += gone.area;
                    keep.sx += gone.sx; keep.sy += gone.sy;
                    keep.sxx += gone.sxx; keep.sxy += gone.sxy; keep.syy += gone.syy;
                    keep.border += gone.border;
                    if (gone.pending_head >= 0) {
                        if (keep.pending_tail >= 0) pending_next[keep.pending_tail] = gone.pending_head;
                        else keep.pending_head = gone.pending_head;
                        keep.pending_tail = gone.pending_tail;
                    }
                    gone.pending_head = gone.pending_tail = -1;
                    touched.push_back(rp);
                }
            }

            for (int t : touched) {
                const int r = find(t);
                RootData& d = roots[r];
                if (d.created == level) continue;
                d.created = level;
                const int id = static_cast<int>(nodes_.size());
                Node node;
                node.level = level;
                node.area = d.area;
                node.sx = d.sx; node.sy = d.sy;
                node.sxx = d.sxx; node.sxy = d.sxy; node.syy = d.syy;
                node.border = d.border;
                int last_child = -1;
                for (int c = d.pending_head; c >= 0; c = pending_next[c]) {
                    nodes_[c].parent = id;
                    if (last_child >= 0) nodes_[last_child].next_sibling = c; else node.first_child = c;
                    last_child = c;
                    if (node.main_child < 0 || nodes_[c].area > nodes_[node.main_child].area) {
                        node.main_child = c;
                    }
                }
                nodes_.push_back(node);
                pending_next.push_back(-1);
                d.node = id;
                d.pending_head = d.pending_tail = -1;
            }

            if (track_pixels) {
                for (int k = level_start[level]; k < level_start[level + 1]; ++k) {
                    pixel_node[order[k]] = roots[find(order[k])].node;
                }
            }
        }

        if (track_pixels) {
            pixel_bucket_start_.assign(nodes_.size() + 1, 0);
            for (int id : pixel_node) ++pixel_bucket_start_[id + 1];
            for (std::size_t i = 0; i < nodes_.size(); ++i) pixel_bucket_start_[i + 1] += pixel_bucket_start_[i];
            pixel_bucket_.resize(n);
            std::vector<int> cursor(pixel_bucket_start_.begin(), pixel_bucket_start_.end() - 1);
            for (std::size_t p = 0; p < n; ++p) pixel_bucket_[cursor[pixel_node[p]]++] = static_cast<int>(p);
        }
    }

    // Minimum over the node's threshold range of
    //   (area(t + delta) - area(t - delta)) / area(t)
    // where the smaller region follows the largest-child chain.
    double variation_of(const Node& node, double delta) const {
        const double start = position(node.level);
        const double end = node.parent >= 0 ? position(nodes_[node.parent].level)
                                             : std::numeric_limits<double>::infinity();
        auto area_up = [&](double t) {
            const Node* a = &node;
            while (a->parent >= 0 && position(nodes_[a->parent].level) <= t) a = &nodes_[a->parent];
            return static_cast<double>(a->area);
        };
        auto area_down = [&](double t) {
            const Node* d = &node;
            while (d && position(d->level) > t) d = d->main_child >= 0 ? &nodes_[d->main_child] : nullptr;
            return d ? static_cast<double>(d->area) : 0.0;
        };
        auto eval = [&](double t) {
            return (area_up(t + delta) - area_down(t - delta)) / static_cast<double>(node.area);
        };

        // Thresholds whose upper probe lies above the top level are undefined.
        const double top = positions_.back();
        double best = std::numeric_limits<double>::infinity();
        if (start + delta <= top) best = eval(start);
        for (const Node* d = &node; d; d = d->main_child >= 0 ? &nodes_[d->main_child] : nullptr) {
            const double t = position(d->level) + delta;
            if (t < start) break;
            if (t < end && t + delta <= top) best = std::min(best, eval(t));
        }
        return best;
    }

    int width_;
    int height_;
    Polarity polarity_;
    std::vector<std::uint8_t> keys_;
    std::vector<int> level_keys_;
    std::vector<double> positions_;
    std::vector<int> uf_;
    std::vector<Node> nodes_;
    std::vector<int> pixel_bucket_start_;
    std::vector<int> pixel_bucket_;
};

void detect_polarity(const GrayImage& image, const MserParams& params, Polarity polarity,
                     std::vector<InterestRegion>& out) {
    ComponentTree tree(image, polarity, params.keep_pixels);
    tree.compute_variation(params.delta);
    const auto& nodes = tree.nodes();
    const double max_area = params.max_area * static_cast<double>(image.size());

    std::vector<char> stable(nodes.size(), 0);
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        const Node& n = nodes[i];
        if (n.area < params.min_area || static_cast<double>(n.area) > max_area) continue;
        if (n.variation > params.max_variation) continue;
        if (n.parent >= 0 && !(n.variation < nodes[n.parent].variation)) continue;
        bool minimal = true;
        for (int c = n.first_child; c >= 0 && minimal; c = nodes[c].next_sibling) {
            minimal = n.variation <= nodes[c].variation;
        }
        stable[i] = minimal ? 1 : 0;
    }

    std::vector<char> keep(stable);
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        if (!stable[i]) continue;
        int a = nodes[i].parent;
        while (a >= 0 && !stable[a]) a = nodes[a].parent;
        if (a < 0) continue;
        const double big = static_cast<double>(nodes[a].area);
        if (big - static_cast<double>(nodes[i].area) < params.duplicate_overlap * big) {
            if (nodes[i].variation <= nodes[a].variation) keep[a] = 0; else keep[i] = 0;
        }
    }

    for (std::size_t i = 0; i < nodes.size(); ++i) {
        if (!keep[i]) continue;
        const Node& n = nodes[i];
        const double area = static_cast<double>(n.area);
        InterestRegion r;
        r.pixel_count = static_cast<int>(n.area);
        r.centroid = {static_cast<double>(n.sx) / area, static_cast<double>(n.sy) / area};
        r.second_moments.xx = static_cast<double>(n.sxx) / area - r.centroid.x * r.centroid.x;
        r.second_moments.xy = static_cast<double>(n.sxy) / area - r.centroid.x * r.centroid.y;
        r.second_moments.yy = static_cast<double>(n.syy) / area - r.centroid.y * r.centroid.y;
        r.polarity = polarity;
        r.representative_intensity = tree.intensity(n.level);
        r.variation = n.variation;
        r.touches_border = n.border > 0;
        if (params.keep_pixels) r.pixels = tree.pixels_of(static_cast<int>(i));
        out.push_back(std::move(r));
    }
}

}  // namespace

std::vector<InterestRegion> detect_mser(const GrayImage& image, const MserParams& params) {
    params.validate();
    std::vector<InterestRegion> regions;
    if (image.empty()) return regions;
    if (params.bright) detect_polarity(image, params, Polarity::Bright, regions);
    if (params.dark) detect_polarity(image, params, Polarity::Dark, regions);
    return regions;
}

void write_regions(std::ostream& out, const std::vector<InterestRegion>& regions) {
    for (const auto& r : regions) {
        out << r.centroid.x << ' ' << r.centroid.y << ' ' << r.pixel_count << ' '
            << r.second_moments.xx << ' ' << r.second_moments.xy << ' ' << r.second_moments.yy << ' '
            << (r.polarity == Polarity::Bright ? "bright" : "dark") << ' '
            << r.representative_intensity << '\n';
    }
}

}  // namespace egofov
