#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "seganet/rng.hpp"
#include "seganet/stack.hpp"

// Stochastic augmentation families applied to image/mask slice pairs during
// training: rigid transforms, crop+rotate, additive noise, k-space line
// corruption, free-form deformation, intensity scaling. Geometric families
// move image and mask through the same coordinate map (bilinear image,
// nearest mask); intensity families never touch the mask. Everything is a
// pure function of its inputs and an explicit RNG.

namespace seganet {

// One training slice: image normalized to [0,1], binary mask, in-plane
// spacing in mm.
struct SliceSample {
    int height = 0;
    int width = 0;
    std::vector<float> image;
    std::vector<std::uint8_t> mask;
    double spacing_x = 1.25;
    double spacing_y = 1.25;

    std::size_t pixel_count() const { return static_cast<std::size_t>(height) * width; }
    void validate() const;
};

struct AugmentSpec {
    // independent enable probability per family, in application order
    double p_rigid = 0.5;
    double p_crop_rotate = 0.5;
    double p_noise = 0.5;
    double p_kspace = 0.5;
    double p_ffd = 0.5;
    double p_intensity = 0.5;

    double rotation_max_deg = 15.0;
    double translation_max_frac = 0.10;
    double flip_prob = 0.5;  // per axis, inside the rigid family
    double crop_fraction_min = 0.8;
    double crop_fraction_max = 1.0;
    double noise_sigma_max = 0.10;
    double kspace_line_fraction_max = 0.10;
    int ffd_grid = 5;
    double ffd_max_displacement_frac = 0.05;  // of image extent, per axis
    double intensity_min = 0.7;
    double intensity_max = 1.3;
    std::uint64_t seed = 0;

    void validate() const;

    static AugmentSpec disabled() {
        AugmentSpec s;
        s.p_rigid = s.p_crop_rotate = s.p_noise = s.p_kspace = s.p_ffd = s.p_intensity = 0.0;
        return s;
    }
};

// Rotation about the image center, translation as a fraction of each dim,
// optional axis flips. Flips are exact index mirrors; rotation/translation
// resample with zero fill outside the frame.
SliceSample rigid_augment(const SliceSample& sample, double angle_deg,
                          std::array<double, 2> shift_frac, std::array<bool, 2> flips);

// Window crop to crop_fraction of each dim, rotation inside the window,
// resize back to the original dims. window_pos in [0,1]^2 places the window
// within the available slack (0.5,0.5 = centered). Spacing metadata is
// rescaled by 1/crop_fraction.
SliceSample crop_rotate(const SliceSample& sample, double crop_fraction, double angle_deg,
                        std::array<double, 2> window_pos = {0.5, 0.5});

// Per-pixel Gaussian noise, clamped to [0,1]. Mask untouched.
SliceSample additive_noise(const SliceSample& sample, double sigma, Rng& rng);

enum class KspaceMode { zero, noise };

// 2D DFT, corrupt a random subset of phase-encode rows (never the DC row),
// inverse transform, take the magnitude, renormalize into [0,1].
SliceSample kspace_corrupt(const SliceSample& sample, double line_fraction, KspaceMode mode,
                           Rng& rng);

// Control-point displacements for a square free-form deformation grid.
struct FfdGrid {
    int size = 5;  // G x G control points, G >= 4
    std::vector<double> dx;  // row-major G*G, pixels
    std::vector<double> dy;
};

// Dense displacement field by cubic B-spline interpolation of the control
// grid; bilinear image sampling with edge clamp, nearest for the mask.
SliceSample ffd_deform(const SliceSample& sample, const FfdGrid& grid);

// image *= factor, clamped to [0,1]. Mask untouched.
SliceSample intensity_scale(const SliceSample& sample, double factor);

// Applies the six families in fixed order, each independently enabled with
// its probability and parameters drawn uniformly from the spec ranges.
SliceSample augment_pipeline(const SliceSample& sample, const AugmentSpec& spec, Rng& rng);

}  // namespace seganet
