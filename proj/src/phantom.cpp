#include "seganet/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "seganet/io.hpp"
#include "seganet/rng.hpp"

namespace seganet {

namespace fs = std::filesystem;

void PhantomSpec::validate() const {
    if (!(v_min_ml < v_prea_ml && v_prea_ml < v_max_ml))
        throw DataError("phantom volumes must satisfy V_min < V_preA < V_max");
    if (v_min_ml <= 0) throw DataError("phantom volumes must be positive");
    if (phases < 8) throw DataError("phantom needs at least 8 phases");
    if (nx < 16 || ny < 16 || nslices < 8) throw DataError("phantom grid too small");
    spacing.validate();
    if (peak_max_phase < 0 || peak_max_phase >= phases || peak_prea_phase < 0 ||
        peak_prea_phase >= phases || peak_max_phase == peak_prea_phase)
        throw DataError("phantom peak phases must be distinct and within the cycle");
    if (noise < 0) throw DataError("phantom noise must be non-negative");
}

namespace {

// z-to-x semi-axis ratio of the atrial ellipsoid
constexpr double kAxisRatioZ = 0.8;

double cyclic_gauss(double p, double mu, double n, double sigma) {
    double d = std::abs(p - mu);
    d = std::min(d, n - d);
    return std::exp(-d * d / (2.0 * sigma * sigma));
}

// Rasterize an axis-aligned ellipsoid by voxel-center test into mask (value 1).
void fill_ellipsoid(MaskStack& mask, double cx, double cy, double cz, double ax, double ay,
                    double az) {
    for (int s = 0; s < mask.slices; ++s) {
        const double z = s * mask.spacing.dz;
        const double rz = (z - cz) / az;
        if (std::abs(rz) > 1.0) continue;
        std::uint8_t* slice = mask.slice(s);
        for (int y = 0; y < mask.height; ++y) {
            const double ry = (y * mask.spacing.dy - cy) / ay;
            for (int x = 0; x < mask.width; ++x) {
                const double rx = (x * mask.spacing.dx - cx) / ax;
                if (rx * rx + ry * ry + rz * rz <= 1.0)
                    slice[static_cast<std::size_t>(y) * mask.width + x] = 1;
            }
        }
    }
}

// Separable Gaussian blur per slice, reflective borders.
void blur_slice(std::vector<float>& img, int h, int w, double sigma) {
    const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
    std::vector<float> kernel(static_cast<std::size_t>(2 * radius + 1));
    float sum = 0.f;
    for (int i = -radius; i <= radius; ++i) {
        kernel[i + radius] = static_cast<float>(std::exp(-0.5 * i * i / (sigma * sigma)));
        sum += kernel[i + radius];
    }
    for (float& k : kernel) k /= sum;
    auto reflect = [](int i, int n) { return i < 0 ? -i : (i >= n ? 2 * n - 2 - i : i); };

    std::vector<float> tmp(img.size());
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            float acc = 0.f;
            for (int k = -radius; k <= radius; ++k)
                acc += kernel[k + radius] * img[static_cast<std::size_t>(y) * w + reflect(x + k, w)];
            tmp[static_cast<std::size_t>(y) * w + x] = acc;
        }
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            float acc = 0.f;
            for (int k = -radius; k <= radius; ++k)
                acc += kernel[k + radius] * tmp[static_cast<std::size_t>(reflect(y + k, h)) * w + x];
            img[static_cast<std::size_t>(y) * w + x] = acc;
        }
}

}  // namespace

PhantomDataset generate_phantom(const PhantomSpec& spec) {
    spec.validate();

    const double extent_x = spec.nx * spec.spacing.dx;
    const double extent_y = spec.ny * spec.spacing.dy;
    const double extent_z = spec.nslices * spec.spacing.dz;
    const double cx = extent_x / 2.0, cy = extent_y / 2.0;
    const double la_cz = 0.65 * extent_z;
    const double lv_cz = 0.20 * extent_z;
    const double lv_semi_xy = 0.30 * std::min(extent_x, extent_y);
    const double lv_semi_z = 0.15 * extent_z;

    // bump width: narrow enough that the two peaks stay separated
    const double sigma = spec.phases / 12.0;

    PhantomDataset out;
    out.spec = spec;
    out.analytic_volumes_ml.resize(spec.phases);

    double a_max = 0.0;
    for (int p = 0; p < spec.phases; ++p) {
        const double g1 = cyclic_gauss(p, spec.peak_max_phase, spec.phases, sigma);
        const double g2 = cyclic_gauss(p, spec.peak_prea_phase, spec.phases, sigma);
        const double v = spec.v_min_ml + (spec.v_max_ml - spec.v_min_ml) * g1 +
                         (spec.v_prea_ml - spec.v_min_ml) * g2;
        out.analytic_volumes_ml[p] = v;
        // V = 4/3 pi a^2 (kAxisRatioZ a), volume in mm^3
        const double a = std::cbrt(3.0 * v * 1000.0 / (4.0 * 3.141592653589793 * kAxisRatioZ));
        a_max = std::max(a_max, a);
    }

    const double c_max = kAxisRatioZ * a_max;
    if (a_max + 2 * spec.spacing.dx > std::min(cx, extent_x - cx) ||
        a_max + 2 * spec.spacing.dy > std::min(cy, extent_y - cy))
        throw DataError("phantom ellipsoid exceeds grid in-plane");
    if (la_cz - c_max < lv_cz + lv_semi_z + spec.spacing.dz ||
        la_cz + c_max > extent_z - spec.spacing.dz)
        throw DataError("phantom ellipsoid exceeds grid through-plane");

    // static LV for slice selection
    MaskStack lv_mask;
    lv_mask.slices = spec.nslices;
    lv_mask.height = spec.ny;
    lv_mask.width = spec.nx;
    lv_mask.spacing = spec.spacing;
    lv_mask.data.assign(lv_mask.slice_size() * spec.nslices, 0);
    fill_ellipsoid(lv_mask, cx, cy, lv_cz, lv_semi_xy, lv_semi_xy, lv_semi_z);

    out.lv_flags.resize(spec.nslices);
    out.lv_top_slice = -1;
    for (int s = 0; s < spec.nslices; ++s) {
        bool any = false;
        const std::uint8_t* sl = lv_mask.slice(s);
        for (std::size_t i = 0; i < lv_mask.slice_size(); ++i)
            if (sl[i]) {
                any = true;
                break;
            }
        out.lv_flags[s] = any;
        if (any) out.lv_top_slice = s;
    }

    Rng rng(spec.seed);
    for (int p = 0; p < spec.phases; ++p) {
        const double v = out.analytic_volumes_ml[p];
        const double a = std::cbrt(3.0 * v * 1000.0 / (4.0 * 3.141592653589793 * kAxisRatioZ));

        MaskStack la;
        la.slices = spec.nslices;
        la.height = spec.ny;
        la.width = spec.nx;
        la.spacing = spec.spacing;
        la.data.assign(la.slice_size() * spec.nslices, 0);
        fill_ellipsoid(la, cx, cy, la_cz, a, a, kAxisRatioZ * a);

        ImageStack img;
        img.slices = spec.nslices;
        img.height = spec.ny;
        img.width = spec.nx;
        img.spacing = spec.spacing;
        img.data.resize(la.data.size());
        for (int s = 0; s < spec.nslices; ++s) {
            std::vector<float> slice(la.slice_size());
            for (std::size_t i = 0; i < slice.size(); ++i)
                slice[i] = 0.9f * la.slice(s)[i] + 0.55f * lv_mask.slice(s)[i];
            blur_slice(slice, spec.ny, spec.nx, 0.8);
            float* dst = img.slice(s);
            for (int y = 0; y < spec.ny; ++y)
                for (int x = 0; x < spec.nx; ++x) {
                    const double bg =
                        0.12 + 0.06 * std::sin(1.7 * 6.2831853 * x / spec.nx + 0.3) *
                                   std::sin(1.3 * 6.2831853 * y / spec.ny + 1.1);
                    double val = bg + slice[static_cast<std::size_t>(y) * spec.nx + x];
                    if (spec.noise > 0) val += rng.normal() * spec.noise;
                    dst[static_cast<std::size_t>(y) * spec.nx + x] =
                        std::min(1.0f, std::max(0.0f, static_cast<float>(val)));
                }
        }
        out.masks.push_back(std::move(la));
        out.images.push_back(std::move(img));
    }

    out.analytic_max_phase = spec.peak_max_phase;
    out.analytic_prea_phase = spec.peak_prea_phase;
    out.analytic_min_phase = 0;
    for (int p = 1; p < spec.phases; ++p)
        if (out.analytic_volumes_ml[p] < out.analytic_volumes_ml[out.analytic_min_phase])
            out.analytic_min_phase = p;
    return out;
}

void write_phantom_dataset(const std::string& dir, const PhantomDataset& phantom) {
    fs::create_directories(dir);

    DatasetManifest manifest;
    manifest.spacing = phantom.spec.spacing;
    manifest.phases = phantom.spec.phases;
    manifest.slices = phantom.spec.nslices;
    manifest.apex_to_superior = true;
    manifest.group = "patient";
    manifest.lv_flags_path = "lv_flags.txt";
    manifest.base_dir = dir;

    char name[64];
    for (int p = 0; p < phantom.spec.phases; ++p) {
        std::snprintf(name, sizeof(name), "image_p%03d.sgt", p);
        manifest.image_paths.push_back(name);
        write_tensor_file((fs::path(dir) / name).string(), to_blob(phantom.images[p]));
        std::snprintf(name, sizeof(name), "mask_p%03d.sgt", p);
        manifest.mask_paths.push_back(name);
        write_tensor_file((fs::path(dir) / name).string(), to_blob(phantom.masks[p]));
    }
    write_lv_flags((fs::path(dir) / "lv_flags.txt").string(), phantom.lv_flags);
    write_manifest(dir, manifest);

    nlohmann::ordered_json j;
    j["analytic_volumes_ml"] = phantom.analytic_volumes_ml;
    j["max_phase"] = phantom.analytic_max_phase;
    j["min_phase"] = phantom.analytic_min_phase;
    j["prea_phase"] = phantom.analytic_prea_phase;
    j["v_max_ml"] = phantom.spec.v_max_ml;
    j["v_min_ml"] = phantom.spec.v_min_ml;
    j["v_prea_ml"] = phantom.spec.v_prea_ml;
    j["lv_top_slice"] = phantom.lv_top_slice;
    std::ofstream f((fs::path(dir) / "analytic.json").string(), std::ios::trunc);
    if (!f) throw DataError("cannot write analytic record in " + dir);
    f << j.dump(2) << "\n";
}

PhantomSpec parse_phantom_spec(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw DataError("cannot open phantom spec: " + path);
    nlohmann::json j;
    try {
        f >> j;
    } catch (const nlohmann::json::exception& e) {
        throw DataError("phantom spec is not valid JSON: " + std::string(e.what()));
    }

    PhantomSpec spec;
    try {
        if (j.contains("v_max_ml")) spec.v_max_ml = j["v_max_ml"].get<double>();
        if (j.contains("v_min_ml")) spec.v_min_ml = j["v_min_ml"].get<double>();
        if (j.contains("v_prea_ml")) spec.v_prea_ml = j["v_prea_ml"].get<double>();
        if (j.contains("phases")) spec.phases = j["phases"].get<int>();
        if (j.contains("grid")) {
            const auto& g = j["grid"];
            spec.nx = g.at(0).get<int>();
            spec.ny = g.at(1).get<int>();
            spec.nslices = g.at(2).get<int>();
        }
        if (j.contains("spacing_mm")) {
            const auto& s = j["spacing_mm"];
            spec.spacing.dx = s.at(0).get<double>();
            spec.spacing.dy = s.at(1).get<double>();
            spec.spacing.dz = s.at(2).get<double>();
        }
        if (j.contains("peak_max_phase")) spec.peak_max_phase = j["peak_max_phase"].get<int>();
        if (j.contains("peak_prea_phase")) spec.peak_prea_phase = j["peak_prea_phase"].get<int>();
        if (j.contains("noise")) spec.noise = j["noise"].get<double>();
        if (j.contains("seed")) spec.seed = j["seed"].get<std::uint64_t>();
    } catch (const nlohmann::json::exception& e) {
        throw DataError("phantom spec field error: " + std::string(e.what()));
    }
    spec.validate();
    return spec;
}

}  // namespace seganet
