#pragma once

#include <optional>
#include <vector>

#include "seganet/stack.hpp"

// Volumetric biomarkers from per-phase mask stacks: atrial slice selection
// above the top ventricular slice, volume-time curves, cycle landmark
// detection (V_max, V_min, V_preA) and the two ejection fractions
//   EF  = (V_max - V_min) / V_max  * 100
//   aEF = (V_preA - V_min) / V_preA * 100

namespace seganet {

struct VolumeCurve {
    std::vector<double> volumes_ml;  // one entry per cardiac phase, cyclic
    std::optional<double> cycle_duration_ms;

    int phase_count() const { return static_cast<int>(volumes_ml.size()); }
    void validate() const;
};

struct CycleLandmarks {
    double v_max_ml = 0.0;
    double v_min_ml = 0.0;
    double v_prea_ml = 0.0;
    int max_phase = 0;
    int min_phase = 0;
    int prea_phase = 0;
};

struct BiomarkerResult {
    double ef_percent = 0.0;
    double aef_percent = 0.0;
};

// Contiguous slice indices strictly above the highest LV-flagged slice,
// for stacks ordered apex -> superior. first == the most basal atrial slice.
struct SliceRange {
    int first = 0;
    int last = 0;  // inclusive
    int count() const { return last - first + 1; }
};

SliceRange select_atrial_slices(const std::vector<bool>& lv_presence);

// Foreground voxel count times voxel volume, in mL.
double mask_volume_ml(const MaskStack& mask);

// One volume per phase, in acquisition order. All stacks must share dims
// and spacing.
VolumeCurve volume_curve(const std::vector<MaskStack>& phases);

// Landmark detection on the cyclic curve. An odd smoothing_window > 1
// applies a centered cyclic moving average for index detection only;
// reported volumes always come from the raw curve. V_preA is the largest
// local maximum strictly between the V_max and V_min phases in forward
// cyclic order.
CycleLandmarks find_landmarks(const VolumeCurve& curve, int smoothing_window = 1);

BiomarkerResult ejection_fractions(const CycleLandmarks& landmarks);

// Full biomarker chain: crop each phase stack to the atrial range implied
// by the LV flags, then curve -> landmarks -> ejection fractions.
struct VolumetricsResult {
    SliceRange atrial_range;
    VolumeCurve curve;
    CycleLandmarks landmarks;
    BiomarkerResult biomarkers;
};

VolumetricsResult run_volumetrics(const std::vector<MaskStack>& phases,
                                  const std::vector<bool>& lv_presence,
                                  int smoothing_window = 1);

}  // namespace seganet
