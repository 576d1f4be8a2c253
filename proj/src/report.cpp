#include "seganet/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace seganet {

std::string format_number(double v) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

namespace {

void write_text(const std::string& path, const std::string& content) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw DataError("cannot write report file: " + path);
    f << content;
    if (!f) throw DataError("write failed: " + path);
}

struct PlotFrame {
    static constexpr double width = 640, height = 400;
    static constexpr double left = 62, right = 18, top = 42, bottom = 46;
    double vmin, vmax;
    int phases;

    double x(double phase) const {
        return left + phase / std::max(1, phases - 1) * (width - left - right);
    }
    double y(double volume) const {
        const double span = vmax > vmin ? vmax - vmin : 1.0;
        return height - bottom - (volume - vmin) / span * (height - top - bottom);
    }
};

}  // namespace

void write_report(const VolumeCurve& curve, const CycleLandmarks& landmarks,
                  const BiomarkerResult& biomarkers, const std::string& prefix) {
    curve.validate();

    std::ostringstream csv;
    csv << "phase,volume_ml\n";
    for (int p = 0; p < curve.phase_count(); ++p)
        csv << p << "," << format_number(curve.volumes_ml[p]) << "\n";
    write_text(prefix + "_curve.csv", csv.str());

    PlotFrame frame;
    frame.phases = curve.phase_count();
    frame.vmin = *std::min_element(curve.volumes_ml.begin(), curve.volumes_ml.end());
    frame.vmax = *std::max_element(curve.volumes_ml.begin(), curve.volumes_ml.end());
    const double pad = (frame.vmax - frame.vmin) * 0.08 + 1e-9;
    frame.vmin -= pad;
    frame.vmax += pad;

    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"400\" "
           "viewBox=\"0 0 640 400\">\n";
    svg << "<rect width=\"640\" height=\"400\" fill=\"white\"/>\n";
    svg << "<line x1=\"" << format_number(frame.x(0)) << "\" y1=\""
        << format_number(frame.y(frame.vmin)) << "\" x2=\""
        << format_number(frame.x(frame.phases - 1)) << "\" y2=\""
        << format_number(frame.y(frame.vmin)) << "\" stroke=\"black\"/>\n";
    svg << "<line x1=\"" << format_number(frame.x(0)) << "\" y1=\""
        << format_number(frame.y(frame.vmin)) << "\" x2=\"" << format_number(frame.x(0))
        << "\" y2=\"" << format_number(frame.y(frame.vmax)) << "\" stroke=\"black\"/>\n";

    svg << "<polyline fill=\"none\" stroke=\"#1f6fb2\" stroke-width=\"1.5\" points=\"";
    for (int p = 0; p < frame.phases; ++p) {
        if (p) svg << " ";
        svg << format_number(frame.x(p)) << "," << format_number(frame.y(curve.volumes_ml[p]));
    }
    svg << "\"/>\n";

    struct Marker {
        int phase;
        double volume;
        const char* color;
        const char* label;
    };
    const Marker markers[] = {
        {landmarks.max_phase, landmarks.v_max_ml, "#c0392b", "Vmax"},
        {landmarks.min_phase, landmarks.v_min_ml, "#27ae60", "Vmin"},
        {landmarks.prea_phase, landmarks.v_prea_ml, "#8e44ad", "VpreA"},
    };
    for (const Marker& m : markers) {
        svg << "<circle cx=\"" << format_number(frame.x(m.phase)) << "\" cy=\""
            << format_number(frame.y(m.volume)) << "\" r=\"4\" fill=\"" << m.color << "\"/>\n";
        svg << "<text x=\"" << format_number(frame.x(m.phase) + 6) << "\" y=\""
            << format_number(frame.y(m.volume) - 6) << "\" font-size=\"11\" fill=\"" << m.color
            << "\">" << m.label << " " << format_number(m.volume) << " mL</text>\n";
    }

    char annot[128];
    std::snprintf(annot, sizeof(annot), "EF %.1f%%   aEF %.1f%%", biomarkers.ef_percent,
                  biomarkers.aef_percent);
    svg << "<text x=\"62\" y=\"24\" font-size=\"14\" fill=\"black\">" << annot << "</text>\n";
    svg << "<text x=\"280\" y=\"392\" font-size=\"11\" fill=\"black\">cardiac phase</text>\n";
    svg << "<text x=\"10\" y=\"220\" font-size=\"11\" fill=\"black\" "
           "transform=\"rotate(-90 14 220)\">LA volume (mL)</text>\n";
    svg << "</svg>\n";
    write_text(prefix + "_curve.svg", svg.str());

    std::ostringstream js;
    js << "{\n";
    js << "  \"v_max_ml\": " << format_number(landmarks.v_max_ml) << ",\n";
    js << "  \"v_min_ml\": " << format_number(landmarks.v_min_ml) << ",\n";
    js << "  \"v_prea_ml\": " << format_number(landmarks.v_prea_ml) << ",\n";
    js << "  \"max_phase\": " << landmarks.max_phase << ",\n";
    js << "  \"min_phase\": " << landmarks.min_phase << ",\n";
    js << "  \"prea_phase\": " << landmarks.prea_phase << ",\n";
    js << "  \"ef_percent\": " << format_number(biomarkers.ef_percent) << ",\n";
    js << "  \"aef_percent\": " << format_number(biomarkers.aef_percent) << "\n";
    js << "}\n";
    write_text(prefix + "_landmarks.json", js.str());
}

}  // namespace seganet
