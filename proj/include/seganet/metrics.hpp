#pragma once

#include <array>
#include <optional>
#include <vector>

#include "seganet/stack.hpp"

// Segmentation quality metrics in physical units: Dice coefficient,
// Hausdorff distance and median contour distance between boundary point
// sets. Distances are 3D over the whole stack with anisotropic spacing;
// a per-slice 2D breakdown is reported alongside.

namespace seganet {

struct SliceMetrics {
    int slice = 0;
    double dice = 0.0;
    std::optional<double> hausdorff_mm;  // absent when either slice mask is empty
    std::optional<double> mcd_mm;
};

struct MetricsReport {
    double dice = 0.0;
    std::optional<double> hausdorff_mm;
    std::optional<double> mcd_mm;
    std::vector<SliceMetrics> per_slice;
};

// 2|A∩B| / (|A|+|B|); 1.0 when both masks are empty.
double dice_coefficient(const MaskStack& a, const MaskStack& b);

// Centers of foreground voxels with at least one background 6-neighbor
// (in-plane 4-neighborhood plus existing through-plane neighbors), scaled
// to mm. Neighbors outside the volume are ignored.
std::vector<std::array<double, 3>> boundary_points(const MaskStack& mask);

// max over both directions of the point-to-set distance. Both masks must be
// non-empty.
double hausdorff_distance(const MaskStack& a, const MaskStack& b);

// Median of the pooled multiset of nearest-boundary distances from A to B
// and from B to A; even-sized multisets take the mean of the two central
// values.
double median_contour_distance(const MaskStack& a, const MaskStack& b);

MetricsReport compare_stacks(const MaskStack& pred, const MaskStack& gt);

// Directed nearest distances from each of 'from' to the set 'to', via an
// exact KD-tree. Exposed so callers can pool distances the way HD/MCD do.
std::vector<double> nearest_distances(const std::vector<std::array<double, 3>>& from,
                                      const std::vector<std::array<double, 3>>& to);

}  // namespace seganet
