#include "seganet/volumetrics.hpp"

#include <algorithm>
#include <cmath>

namespace seganet {

void VolumeCurve::validate() const {
    if (volumes_ml.empty()) throw DataError("volume curve is empty");
    for (double v : volumes_ml)
        if (!(v >= 0.0) || !std::isfinite(v))
            throw DataError("volumes must be finite and non-negative");
}

SliceRange select_atrial_slices(const std::vector<bool>& lv_presence) {
    if (lv_presence.empty()) throw DataError("empty LV presence vector");
    int top_lv = -1;
    for (int i = 0; i < static_cast<int>(lv_presence.size()); ++i)
        if (lv_presence[i]) top_lv = i;
    if (top_lv < 0) throw DataError("no ventricular tissue flagged in any slice");
    if (top_lv + 1 >= static_cast<int>(lv_presence.size()))
        throw DataError("empty atrial range: LV present in the topmost slice");
    return SliceRange{top_lv + 1, static_cast<int>(lv_presence.size()) - 1};
}

double mask_volume_ml(const MaskStack& mask) {
    mask.spacing.validate();
    const double voxel_mm3 = mask.spacing.dx * mask.spacing.dy * mask.spacing.dz;
    return static_cast<double>(mask.foreground_count()) * voxel_mm3 / 1000.0;
}

VolumeCurve volume_curve(const std::vector<MaskStack>& phases) {
    if (phases.empty()) throw DataError("no phases given");
    VolumeCurve curve;
    curve.volumes_ml.reserve(phases.size());
    for (const MaskStack& m : phases) {
        if (m.slices != phases[0].slices || m.height != phases[0].height ||
            m.width != phases[0].width)
            throw DataError("phase stacks have inconsistent dims");
        if (!(m.spacing == phases[0].spacing))
            throw DataError("phase stacks have inconsistent spacing");
        curve.volumes_ml.push_back(mask_volume_ml(m));
    }
    return curve;
}

namespace {

std::vector<double> cyclic_moving_average(const std::vector<double>& v, int window) {
    const int n = static_cast<int>(v.size());
    const int half = window / 2;
    std::vector<double> out(v.size());
    for (int i = 0; i < n; ++i) {
        double acc = 0.0;
        for (int k = -half; k <= half; ++k) acc += v[((i + k) % n + n) % n];
        out[i] = acc / window;
    }
    return out;
}

}  // namespace

CycleLandmarks find_landmarks(const VolumeCurve& curve, int smoothing_window) {
    curve.validate();
    const int n = curve.phase_count();
    if (n < 8) throw DataError("landmark detection needs at least 8 phases");
    if (smoothing_window < 1 || smoothing_window % 2 == 0)
        throw DataError("smoothing window must be a positive odd integer");
    if (smoothing_window >= n) throw DataError("smoothing window wider than the curve");

    const std::vector<double>& raw = curve.volumes_ml;
    const std::vector<double> det =
        smoothing_window > 1 ? cyclic_moving_average(raw, smoothing_window) : raw;

    int imax = 0, imin = 0;
    for (int i = 1; i < n; ++i) {
        if (det[i] > det[imax]) imax = i;
        if (det[i] < det[imin]) imin = i;
    }
    if (imax == imin) throw NumericError("no atrial kick detected: flat volume curve");

    // walk forward cyclically from the max, stopping before the min
    auto wrap = [n](int i) { return ((i % n) + n) % n; };
    int best = -1;
    double best_v = 0.0;
    for (int i = wrap(imax + 1); i != imin; i = wrap(i + 1)) {
        const double prev = det[wrap(i - 1)], cur = det[i], next = det[wrap(i + 1)];
        const bool local_max = cur >= prev && cur >= next && (cur > prev || cur > next);
        if (local_max && (best < 0 || cur > best_v)) {
            best = i;
            best_v = cur;
        }
    }
    if (best < 0)
        throw NumericError("no atrial kick detected: no secondary peak between max and min");

    CycleLandmarks lm;
    lm.max_phase = imax;
    lm.min_phase = imin;
    lm.prea_phase = best;
    lm.v_max_ml = raw[imax];
    lm.v_min_ml = raw[imin];
    lm.v_prea_ml = raw[best];
    if (!(lm.v_min_ml <= lm.v_prea_ml && lm.v_prea_ml <= lm.v_max_ml))
        throw NumericError("smoothing produced inconsistent landmark ordering; reduce the window");
    return lm;
}

BiomarkerResult ejection_fractions(const CycleLandmarks& landmarks) {
    if (landmarks.v_max_ml <= 0.0)
        throw DataError("ejection fraction undefined: V_max must be positive");
    if (landmarks.v_prea_ml <= 0.0)
        throw DataError("active ejection fraction undefined: V_preA must be positive");
    BiomarkerResult r;
    r.ef_percent = (landmarks.v_max_ml - landmarks.v_min_ml) / landmarks.v_max_ml * 100.0;
    r.aef_percent = (landmarks.v_prea_ml - landmarks.v_min_ml) / landmarks.v_prea_ml * 100.0;
    return r;
}

VolumetricsResult run_volumetrics(const std::vector<MaskStack>& phases,
                                  const std::vector<bool>& lv_presence, int smoothing_window) {
    if (phases.empty()) throw DataError("no phases given");
    if (static_cast<int>(lv_presence.size()) != phases[0].slices)
        throw DataError("LV flag count does not match slice count");

    VolumetricsResult result;
    result.atrial_range = select_atrial_slices(lv_presence);

    std::vector<MaskStack> atrial;
    atrial.reserve(phases.size());
    for (const MaskStack& m : phases) {
        MaskStack crop;
        crop.slices = result.atrial_range.count();
        crop.height = m.height;
        crop.width = m.width;
        crop.spacing = m.spacing;
        crop.data.assign(m.slice(result.atrial_range.first),
                         m.slice(result.atrial_range.last) + m.slice_size());
        atrial.push_back(std::move(crop));
    }
    result.curve = volume_curve(atrial);
    result.landmarks = find_landmarks(result.curve, smoothing_window);
    result.biomarkers = ejection_fractions(result.landmarks);
    return result;
}

}  // namespace seganet
