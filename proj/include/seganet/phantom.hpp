#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "seganet/stack.hpp"

// Synthetic cardiac phantom with analytic ground truth. Per phase, the
// "left atrium" is an axis-aligned ellipsoid whose semi-axes are scaled so
// its exact volume follows
//   V(p) = V_min + (V_max - V_min) * g1(p) + (V_preA - V_min) * g2(p)
// where g1 and g2 are unit-height cyclic Gaussian bumps at the configured
// peak phases (g1 dominant). A static "left ventricle" ellipsoid fills the
// lower slices so the slice-selection logic has something to find, and the
// images are blurred masks over a smooth background plus optional noise.

namespace seganet {

struct PhantomSpec {
    double v_max_ml = 110.0;
    double v_min_ml = 80.0;
    double v_prea_ml = 103.0;
    int phases = 30;
    int nx = 80;
    int ny = 80;
    int nslices = 40;
    Spacing spacing{1.25, 1.25, 2.5};
    int peak_max_phase = 12;
    int peak_prea_phase = 24;
    double noise = 0.0;   // image noise sigma, intensity units
    std::uint64_t seed = 1234;

    void validate() const;
};

struct PhantomDataset {
    PhantomSpec spec;
    std::vector<ImageStack> images;  // one per phase
    std::vector<MaskStack> masks;    // LA ground truth, one per phase
    std::vector<bool> lv_flags;      // per slice, apex -> superior
    int lv_top_slice = 0;

    std::vector<double> analytic_volumes_ml;  // exact V(p)
    int analytic_max_phase = 0;
    int analytic_min_phase = 0;
    int analytic_prea_phase = 0;
};

PhantomDataset generate_phantom(const PhantomSpec& spec);

// Writes manifest.txt, per-phase image/mask tensors, lv_flags.txt and
// analytic.json (the ground-truth landmark record) into dir.
void write_phantom_dataset(const std::string& dir, const PhantomDataset& phantom);

// JSON spec file for the CLI; missing fields keep their defaults.
PhantomSpec parse_phantom_spec(const std::string& path);

}  // namespace seganet
