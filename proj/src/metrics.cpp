#include "seganet/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace seganet {

namespace {

void require_same_dims(const MaskStack& a, const MaskStack& b) {
    if (a.slices != b.slices || a.height != b.height || a.width != b.width)
        throw DataError("mask stacks have different dims");
}

// Exact 3D KD-tree over boundary points; median split by the widest axis.
class KdTree {
public:
    explicit KdTree(std::vector<std::array<double, 3>> pts) : pts_(std::move(pts)) {
        idx_.resize(pts_.size());
        for (std::size_t i = 0; i < idx_.size(); ++i) idx_[i] = i;
        nodes_.reserve(2 * pts_.size());
        root_ = build(0, idx_.size());
    }

    double nearest_sq(const std::array<double, 3>& q) const {
        double best = std::numeric_limits<double>::infinity();
        search(root_, q, best);
        return best;
    }

private:
    struct Node {
        int axis = -1;           // -1 marks a leaf
        double split = 0.0;
        int left = -1, right = -1;
        std::size_t begin = 0, end = 0;
    };

    int build(std::size_t begin, std::size_t end) {
        Node n;
        n.begin = begin;
        n.end = end;
        if (end - begin <= 8) {
            nodes_.push_back(n);
            return static_cast<int>(nodes_.size() - 1);
        }
        std::array<double, 3> lo{}, hi{};
        lo.fill(std::numeric_limits<double>::infinity());
        hi.fill(-std::numeric_limits<double>::infinity());
        for (std::size_t i = begin; i < end; ++i)
            for (int a = 0; a < 3; ++a) {
                lo[a] = std::min(lo[a], pts_[idx_[i]][a]);
                hi[a] = std::max(hi[a], pts_[idx_[i]][a]);
            }
        int axis = 0;
        for (int a = 1; a < 3; ++a)
            if (hi[a] - lo[a] > hi[axis] - lo[axis]) axis = a;

        const std::size_t mid = begin + (end - begin) / 2;
        std::nth_element(idx_.begin() + begin, idx_.begin() + mid, idx_.begin() + end,
                         [&](std::size_t x, std::size_t y) { return pts_[x][axis] < pts_[y][axis]; });
        n.axis = axis;
        n.split = pts_[idx_[mid]][axis];
        const int self = static_cast<int>(nodes_.size());
        nodes_.push_back(n);
        const int l = build(begin, mid);
        const int r = build(mid, end);
        nodes_[self].left = l;
        nodes_[self].right = r;
        return self;
    }

    void search(int ni, const std::array<double, 3>& q, double& best) const {
        const Node& n = nodes_[ni];
        if (n.axis < 0) {
            for (std::size_t i = n.begin; i < n.end; ++i) {
                const auto& p = pts_[idx_[i]];
                const double d0 = q[0] - p[0], d1 = q[1] - p[1], d2 = q[2] - p[2];
                const double d = d0 * d0 + d1 * d1 + d2 * d2;
                if (d < best) best = d;
            }
            return;
        }
        const double delta = q[n.axis] - n.split;
        const int near = delta < 0 ? n.left : n.right;
        const int far = delta < 0 ? n.right : n.left;
        search(near, q, best);
        if (delta * delta < best) search(far, q, best);
    }

    std::vector<std::array<double, 3>> pts_;
    std::vector<std::size_t> idx_;
    std::vector<Node> nodes_;
    int root_ = -1;
};

double median_of(std::vector<double> v) {
    const std::size_t n = v.size();
    std::nth_element(v.begin(), v.begin() + n / 2, v.end());
    double m = v[n / 2];
    if (n % 2 == 0) {
        std::nth_element(v.begin(), v.begin() + n / 2 - 1, v.begin() + n / 2);
        m = (m + v[n / 2 - 1]) / 2.0;
    }
    return m;
}

}  // namespace

double dice_coefficient(const MaskStack& a, const MaskStack& b) {
    require_same_dims(a, b);
    std::size_t na = 0, nb = 0, inter = 0;
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        na += a.data[i];
        nb += b.data[i];
        inter += static_cast<std::size_t>(a.data[i] & b.data[i]);
    }
    if (na + nb == 0) return 1.0;
    return 2.0 * static_cast<double>(inter) / static_cast<double>(na + nb);
}

std::vector<std::array<double, 3>> boundary_points(const MaskStack& mask) {
    std::vector<std::array<double, 3>> pts;
    const int S = mask.slices, H = mask.height, W = mask.width;
    auto at = [&](int s, int y, int x) -> std::uint8_t {
        return mask.data[(static_cast<std::size_t>(s) * H + y) * W + x];
    };
    for (int s = 0; s < S; ++s)
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x) {
                if (!at(s, y, x)) continue;
                const bool boundary = (x > 0 && !at(s, y, x - 1)) ||
                                      (x + 1 < W && !at(s, y, x + 1)) ||
                                      (y > 0 && !at(s, y - 1, x)) ||
                                      (y + 1 < H && !at(s, y + 1, x)) ||
                                      (s > 0 && !at(s - 1, y, x)) ||
                                      (s + 1 < S && !at(s + 1, y, x));
                if (boundary)
                    pts.push_back({x * mask.spacing.dx, y * mask.spacing.dy, s * mask.spacing.dz});
            }
    return pts;
}

std::vector<double> nearest_distances(const std::vector<std::array<double, 3>>& from,
                                      const std::vector<std::array<double, 3>>& to) {
    if (to.empty()) throw NumericError("nearest_distances: empty target point set");
    KdTree tree(to);
    std::vector<double> out(from.size());
    for (std::size_t i = 0; i < from.size(); ++i) out[i] = std::sqrt(tree.nearest_sq(from[i]));
    return out;
}

namespace {

void require_nonempty(const MaskStack& a, const MaskStack& b) {
    if (a.foreground_count() == 0 || b.foreground_count() == 0)
        throw NumericError("distance metric undefined: empty mask");
}

}  // namespace

double hausdorff_distance(const MaskStack& a, const MaskStack& b) {
    require_same_dims(a, b);
    if (a.spacing != b.spacing) throw DataError("mask stacks have different spacing");
    require_nonempty(a, b);
    const auto pa = boundary_points(a);
    const auto pb = boundary_points(b);
    double worst = 0.0;
    for (double d : nearest_distances(pa, pb)) worst = std::max(worst, d);
    for (double d : nearest_distances(pb, pa)) worst = std::max(worst, d);
    return worst;
}

double median_contour_distance(const MaskStack& a, const MaskStack& b) {
    require_same_dims(a, b);
    if (a.spacing != b.spacing) throw DataError("mask stacks have different spacing");
    require_nonempty(a, b);
    const auto pa = boundary_points(a);
    const auto pb = boundary_points(b);
    std::vector<double> pooled = nearest_distances(pa, pb);
    const std::vector<double> back = nearest_distances(pb, pa);
    pooled.insert(pooled.end(), back.begin(), back.end());
    return median_of(std::move(pooled));
}

MetricsReport compare_stacks(const MaskStack& pred, const MaskStack& gt) {
    require_same_dims(pred, gt);
    if (pred.spacing != gt.spacing) throw DataError("mask stacks have different spacing");

    MetricsReport report;
    report.dice = dice_coefficient(pred, gt);
    if (pred.foreground_count() > 0 && gt.foreground_count() > 0) {
        report.hausdorff_mm = hausdorff_distance(pred, gt);
        report.mcd_mm = median_contour_distance(pred, gt);
    }

    auto slice_view = [](const MaskStack& m, int s) {
        MaskStack v;
        v.slices = 1;
        v.height = m.height;
        v.width = m.width;
        v.spacing = m.spacing;
        v.data.assign(m.slice(s), m.slice(s) + m.slice_size());
        return v;
    };
    for (int s = 0; s < pred.slices; ++s) {
        const MaskStack ps = slice_view(pred, s);
        const MaskStack gs = slice_view(gt, s);
        SliceMetrics sm;
        sm.slice = s;
        sm.dice = dice_coefficient(ps, gs);
        if (ps.foreground_count() > 0 && gs.foreground_count() > 0) {
            sm.hausdorff_mm = hausdorff_distance(ps, gs);
            sm.mcd_mm = median_contour_distance(ps, gs);
        }
        report.per_slice.push_back(sm);
    }
    return report;
}

}  // namespace seganet
