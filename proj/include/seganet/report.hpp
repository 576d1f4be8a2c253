#pragma once

#include <string>

#include "seganet/volumetrics.hpp"

// Deterministic report writers for the biomarker chain: a phase/volume CSV,
// a volume-time SVG with landmark markers and the EF/aEF annotation, and a
// small JSON landmark record. Numbers are formatted with 6 significant
// digits and a '.' decimal separator, independent of locale.

namespace seganet {

// Writes <prefix>_curve.csv, <prefix>_curve.svg and <prefix>_landmarks.json.
void write_report(const VolumeCurve& curve, const CycleLandmarks& landmarks,
                  const BiomarkerResult& biomarkers, const std::string& prefix);

// Single comparison row for the metrics CSV.
std::string format_number(double v);

}  // namespace seganet
