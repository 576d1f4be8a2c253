#include "seganet/augment.hpp"

#include <algorithm>
#include <cmath>
#include <complex>

#include "seganet/fft.hpp"

namespace seganet {

void SliceSample::validate() const {
    if (height <= 0 || width <= 0) throw DataError("slice dims must be positive");
    if (image.size() != pixel_count() || mask.size() != pixel_count())
        throw DataError("slice image/mask size does not match dims");
    if (spacing_x <= 0 || spacing_y <= 0) throw DataError("slice spacing must be positive");
    for (float v : image)
        if (!std::isfinite(v)) throw DataError("slice image contains non-finite values");
    for (std::uint8_t v : mask)
        if (v > 1) throw DataError("slice mask must be strictly binary");
}

void AugmentSpec::validate() const {
    auto prob = [](double p) { return p >= 0.0 && p <= 1.0; };
    if (!prob(p_rigid) || !prob(p_crop_rotate) || !prob(p_noise) || !prob(p_kspace) ||
        !prob(p_ffd) || !prob(p_intensity) || !prob(flip_prob))
        throw DataError("augment probabilities must lie in [0,1]");
    if (rotation_max_deg < 0 || rotation_max_deg > 180)
        throw DataError("rotation range must lie in [0,180] degrees");
    if (translation_max_frac < 0 || translation_max_frac > 1)
        throw DataError("translation range must lie in [0,1]");
    if (crop_fraction_min < 0.5 || crop_fraction_max > 1.0 ||
        crop_fraction_min > crop_fraction_max)
        throw DataError("crop fraction range must be ordered within [0.5,1]");
    if (noise_sigma_max < 0) throw DataError("noise sigma must be non-negative");
    if (kspace_line_fraction_max < 0 || kspace_line_fraction_max > 0.2)
        throw DataError("k-space line fraction must lie in [0,0.2]");
    if (ffd_grid < 4) throw DataError("ffd grid needs at least 4 control points per axis");
    if (ffd_max_displacement_frac < 0 || ffd_max_displacement_frac > 0.1)
        throw DataError("ffd displacement must be at most 10% of extent");
    if (intensity_min < 0.5 || intensity_max > 1.5 || intensity_min > intensity_max)
        throw DataError("intensity scale range must be ordered within [0.5,1.5]");
}

namespace {

inline float clamp01(float v) { return std::min(1.0f, std::max(0.0f, v)); }

float sample_bilinear_zero(const std::vector<float>& img, int h, int w, double sy, double sx) {
    const int x0 = static_cast<int>(std::floor(sx));
    const int y0 = static_cast<int>(std::floor(sy));
    const double fx = sx - x0, fy = sy - y0;
    float acc = 0.f;
    for (int dy = 0; dy <= 1; ++dy)
        for (int dx = 0; dx <= 1; ++dx) {
            const int x = x0 + dx, y = y0 + dy;
            if (x < 0 || x >= w || y < 0 || y >= h) continue;
            const double wgt = (dx ? fx : 1.0 - fx) * (dy ? fy : 1.0 - fy);
            acc += static_cast<float>(wgt) * img[static_cast<std::size_t>(y) * w + x];
        }
    return acc;
}

float sample_bilinear_clamp(const std::vector<float>& img, int h, int w, double sy, double sx) {
    sx = std::min(static_cast<double>(w - 1), std::max(0.0, sx));
    sy = std::min(static_cast<double>(h - 1), std::max(0.0, sy));
    const int x0 = std::min(w - 1, static_cast<int>(std::floor(sx)));
    const int y0 = std::min(h - 1, static_cast<int>(std::floor(sy)));
    const int x1 = std::min(w - 1, x0 + 1);
    const int y1 = std::min(h - 1, y0 + 1);
    const double fx = sx - x0, fy = sy - y0;
    const double v00 = img[static_cast<std::size_t>(y0) * w + x0];
    const double v01 = img[static_cast<std::size_t>(y0) * w + x1];
    const double v10 = img[static_cast<std::size_t>(y1) * w + x0];
    const double v11 = img[static_cast<std::size_t>(y1) * w + x1];
    return static_cast<float>((1 - fy) * ((1 - fx) * v00 + fx * v01) +
                              fy * ((1 - fx) * v10 + fx * v11));
}

std::uint8_t sample_nearest_zero(const std::vector<std::uint8_t>& m, int h, int w, double sy,
                                 double sx) {
    const int x = static_cast<int>(std::floor(sx + 0.5));
    const int y = static_cast<int>(std::floor(sy + 0.5));
    if (x < 0 || x >= w || y < 0 || y >= h) return 0;
    return m[static_cast<std::size_t>(y) * w + x];
}

std::uint8_t sample_nearest_clamp(const std::vector<std::uint8_t>& m, int h, int w, double sy,
                                  double sx) {
    int x = static_cast<int>(std::floor(sx + 0.5));
    int y = static_cast<int>(std::floor(sy + 0.5));
    x = std::min(w - 1, std::max(0, x));
    y = std::min(h - 1, std::max(0, y));
    return m[static_cast<std::size_t>(y) * w + x];
}

SliceSample flip_sample(const SliceSample& s, bool flip_x, bool flip_y) {
    SliceSample out = s;
    for (int y = 0; y < s.height; ++y)
        for (int x = 0; x < s.width; ++x) {
            const int sxp = flip_x ? s.width - 1 - x : x;
            const int syp = flip_y ? s.height - 1 - y : y;
            out.image[static_cast<std::size_t>(y) * s.width + x] =
                s.image[static_cast<std::size_t>(syp) * s.width + sxp];
            out.mask[static_cast<std::size_t>(y) * s.width + x] =
                s.mask[static_cast<std::size_t>(syp) * s.width + sxp];
        }
    return out;
}

}  // namespace

SliceSample rigid_augment(const SliceSample& sample, double angle_deg,
                          std::array<double, 2> shift_frac, std::array<bool, 2> flips) {
    sample.validate();
    if (std::abs(angle_deg) > 180.0) throw DataError("rotation angle must lie in [-180,180]");

    SliceSample work = (flips[0] || flips[1]) ? flip_sample(sample, flips[0], flips[1]) : sample;
    if (angle_deg == 0.0 && shift_frac[0] == 0.0 && shift_frac[1] == 0.0) return work;

    const int h = sample.height, w = sample.width;
    const double cx = (w - 1) / 2.0, cy = (h - 1) / 2.0;
    const double tx = shift_frac[0] * w, ty = shift_frac[1] * h;
    const double rad = angle_deg * 3.141592653589793 / 180.0;
    const double c = std::cos(rad), s = std::sin(rad);

    SliceSample out = work;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            // backward map: undo translation, then rotation, about the center
            const double px = x - cx - tx;
            const double py = y - cy - ty;
            const double sx = c * px + s * py + cx;
            const double sy = -s * px + c * py + cy;
            out.image[static_cast<std::size_t>(y) * w + x] =
                sample_bilinear_zero(work.image, h, w, sy, sx);
            out.mask[static_cast<std::size_t>(y) * w + x] =
                sample_nearest_zero(work.mask, h, w, sy, sx);
        }
    return out;
}

SliceSample crop_rotate(const SliceSample& sample, double crop_fraction, double angle_deg,
                        std::array<double, 2> window_pos) {
    sample.validate();
    if (crop_fraction < 0.5 || crop_fraction > 1.0)
        throw DataError("crop fraction must lie in [0.5,1]");
    if (window_pos[0] < 0 || window_pos[0] > 1 || window_pos[1] < 0 || window_pos[1] > 1)
        throw DataError("crop window position must lie in [0,1]");

    const int h = sample.height, w = sample.width;
    const int cw = std::max(2, static_cast<int>(std::lround(crop_fraction * w)));
    const int ch = std::max(2, static_cast<int>(std::lround(crop_fraction * h)));
    const int ox = static_cast<int>(std::lround(window_pos[0] * (w - cw)));
    const int oy = static_cast<int>(std::lround(window_pos[1] * (h - ch)));
    if (ox < 0 || oy < 0 || ox + cw > w || oy + ch > h)
        throw DataError("crop window exceeds image");

    SliceSample window;
    window.height = ch;
    window.width = cw;
    window.spacing_x = sample.spacing_x;
    window.spacing_y = sample.spacing_y;
    window.image.resize(window.pixel_count());
    window.mask.resize(window.pixel_count());
    for (int y = 0; y < ch; ++y)
        for (int x = 0; x < cw; ++x) {
            window.image[static_cast<std::size_t>(y) * cw + x] =
                sample.image[static_cast<std::size_t>(oy + y) * w + ox + x];
            window.mask[static_cast<std::size_t>(y) * cw + x] =
                sample.mask[static_cast<std::size_t>(oy + y) * w + ox + x];
        }

    if (angle_deg != 0.0) window = rigid_augment(window, angle_deg, {0.0, 0.0}, {false, false});

    SliceSample out = sample;
    if (cw == w && ch == h) {
        out.image = window.image;
        out.mask = window.mask;
    } else {
        // align-corners resize back to the original dims
        const double scale_x = w > 1 ? static_cast<double>(cw - 1) / (w - 1) : 0.0;
        const double scale_y = h > 1 ? static_cast<double>(ch - 1) / (h - 1) : 0.0;
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                const double sx = x * scale_x;
                const double sy = y * scale_y;
                out.image[static_cast<std::size_t>(y) * w + x] =
                    sample_bilinear_clamp(window.image, ch, cw, sy, sx);
                out.mask[static_cast<std::size_t>(y) * w + x] =
                    sample_nearest_clamp(window.mask, ch, cw, sy, sx);
            }
    }
    out.spacing_x = sample.spacing_x / crop_fraction;
    out.spacing_y = sample.spacing_y / crop_fraction;
    return out;
}

SliceSample additive_noise(const SliceSample& sample, double sigma, Rng& rng) {
    sample.validate();
    if (sigma < 0) throw DataError("noise sigma must be non-negative");
    SliceSample out = sample;
    if (sigma == 0.0) return out;
    for (float& v : out.image)
        v = clamp01(v + static_cast<float>(rng.normal() * sigma));
    return out;
}

SliceSample kspace_corrupt(const SliceSample& sample, double line_fraction, KspaceMode mode,
                           Rng& rng) {
    sample.validate();
    if (line_fraction < 0 || line_fraction > 0.2)
        throw DataError("k-space line fraction must lie in [0,0.2]");

    const int h = sample.height, w = sample.width;
    std::vector<std::complex<double>> k(sample.pixel_count());
    for (std::size_t i = 0; i < k.size(); ++i) k[i] = {static_cast<double>(sample.image[i]), 0.0};
    fft2(k, h, w, false);

    const int n_corrupt = std::min(h - 1, static_cast<int>(std::lround(line_fraction * h)));
    if (n_corrupt > 0) {
        // partial Fisher-Yates over the non-DC rows 1..h-1
        std::vector<int> rows(static_cast<std::size_t>(h - 1));
        for (int i = 0; i < h - 1; ++i) rows[i] = i + 1;
        for (int i = 0; i < n_corrupt; ++i)
            std::swap(rows[i], rows[i + rng.uniform_int(h - 1 - i)]);

        double sigma_k = 0.0;
        if (mode == KspaceMode::noise) {
            double acc = 0.0;
            for (int y = 1; y < h; ++y)
                for (int x = 0; x < w; ++x) acc += std::norm(k[static_cast<std::size_t>(y) * w + x]);
            sigma_k = std::sqrt(acc / (static_cast<double>(h - 1) * w) / 2.0);
        }
        for (int i = 0; i < n_corrupt; ++i) {
            std::complex<double>* row = k.data() + static_cast<std::size_t>(rows[i]) * w;
            if (mode == KspaceMode::zero) {
                std::fill(row, row + w, std::complex<double>(0.0, 0.0));
            } else {
                for (int x = 0; x < w; ++x)
                    row[x] = {rng.normal() * sigma_k, rng.normal() * sigma_k};
            }
        }
    }

    fft2(k, h, w, true);
    SliceSample out = sample;
    double max_v = 0.0;
    std::vector<double> mag(k.size());
    for (std::size_t i = 0; i < k.size(); ++i) {
        mag[i] = std::abs(k[i]);
        max_v = std::max(max_v, mag[i]);
    }
    const double scale = max_v > 1.0 ? 1.0 / max_v : 1.0;
    for (std::size_t i = 0; i < k.size(); ++i)
        out.image[i] = static_cast<float>(mag[i] * scale);
    return out;
}

// Uniform cubic B-spline basis.
namespace {
inline void bspline_weights(double u, double b[4]) {
    const double u2 = u * u, u3 = u2 * u;
    b[0] = (1 - 3 * u + 3 * u2 - u3) / 6.0;
    b[1] = (4 - 6 * u2 + 3 * u3) / 6.0;
    b[2] = (1 + 3 * u + 3 * u2 - 3 * u3) / 6.0;
    b[3] = u3 / 6.0;
}
}  // namespace

SliceSample ffd_deform(const SliceSample& sample, const FfdGrid& grid) {
    sample.validate();
    const int g = grid.size;
    if (g < 4) throw DataError("ffd grid too small for cubic B-splines");
    if (grid.dx.size() != static_cast<std::size_t>(g) * g ||
        grid.dy.size() != static_cast<std::size_t>(g) * g)
        throw DataError("ffd grid displacement count does not match grid size");
    const int h = sample.height, w = sample.width;
    const double max_dx = 0.1 * w, max_dy = 0.1 * h;
    for (std::size_t i = 0; i < grid.dx.size(); ++i)
        if (std::abs(grid.dx[i]) > max_dx || std::abs(grid.dy[i]) > max_dy)
            throw DataError("ffd displacement exceeds 10% of image extent");

    // control cells span the image: pixel x maps to spline coordinate
    // s in [0, g-3], anchored so indices i..i+3 stay inside the grid
    const double sx_scale = (w > 1) ? static_cast<double>(g - 3) / (w - 1) : 0.0;
    const double sy_scale = (h > 1) ? static_cast<double>(g - 3) / (h - 1) : 0.0;

    SliceSample out = sample;
    double bx[4], by[4];
    for (int y = 0; y < h; ++y) {
        const double sy = y * sy_scale;
        int jy = std::min(g - 4, static_cast<int>(std::floor(sy)));
        bspline_weights(sy - jy, by);
        for (int x = 0; x < w; ++x) {
            const double sx = x * sx_scale;
            int jx = std::min(g - 4, static_cast<int>(std::floor(sx)));
            bspline_weights(sx - jx, bx);
            double dx = 0.0, dy = 0.0;
            for (int m = 0; m < 4; ++m)
                for (int l = 0; l < 4; ++l) {
                    const double wgt = by[m] * bx[l];
                    const std::size_t idx = static_cast<std::size_t>(jy + m) * g + (jx + l);
                    dx += wgt * grid.dx[idx];
                    dy += wgt * grid.dy[idx];
                }
            out.image[static_cast<std::size_t>(y) * w + x] =
                sample_bilinear_clamp(sample.image, h, w, y + dy, x + dx);
            out.mask[static_cast<std::size_t>(y) * w + x] =
                sample_nearest_clamp(sample.mask, h, w, y + dy, x + dx);
        }
    }
    return out;
}

SliceSample intensity_scale(const SliceSample& sample, double factor) {
    sample.validate();
    if (factor < 0.5 || factor > 1.5) throw DataError("intensity factor must lie in [0.5,1.5]");
    SliceSample out = sample;
    for (float& v : out.image) v = clamp01(v * static_cast<float>(factor));
    return out;
}

SliceSample augment_pipeline(const SliceSample& sample, const AugmentSpec& spec, Rng& rng) {
    spec.validate();
    SliceSample s = sample;

    if (rng.bernoulli(spec.p_rigid)) {
        const double angle = rng.uniform(-spec.rotation_max_deg, spec.rotation_max_deg);
        const std::array<double, 2> shift{
            rng.uniform(-spec.translation_max_frac, spec.translation_max_frac),
            rng.uniform(-spec.translation_max_frac, spec.translation_max_frac)};
        const std::array<bool, 2> flips{rng.bernoulli(spec.flip_prob),
                                        rng.bernoulli(spec.flip_prob)};
        s = rigid_augment(s, angle, shift, flips);
    }
    if (rng.bernoulli(spec.p_crop_rotate)) {
        const double frac = rng.uniform(spec.crop_fraction_min, spec.crop_fraction_max);
        const double angle = rng.uniform(-spec.rotation_max_deg, spec.rotation_max_deg);
        const std::array<double, 2> pos{rng.uniform01(), rng.uniform01()};
        s = crop_rotate(s, frac, angle, pos);
    }
    if (rng.bernoulli(spec.p_noise)) {
        s = additive_noise(s, rng.uniform(0.0, spec.noise_sigma_max), rng);
    }
    if (rng.bernoulli(spec.p_kspace)) {
        const double frac = rng.uniform(0.0, spec.kspace_line_fraction_max);
        const KspaceMode mode = rng.bernoulli(0.5) ? KspaceMode::zero : KspaceMode::noise;
        s = kspace_corrupt(s, frac, mode, rng);
    }
    if (rng.bernoulli(spec.p_ffd)) {
        FfdGrid grid;
        grid.size = spec.ffd_grid;
        const std::size_t n = static_cast<std::size_t>(grid.size) * grid.size;
        grid.dx.resize(n);
        grid.dy.resize(n);
        const double mx = spec.ffd_max_displacement_frac * sample.width;
        const double my = spec.ffd_max_displacement_frac * sample.height;
        for (std::size_t i = 0; i < n; ++i) {
            grid.dx[i] = rng.uniform(-mx, mx);
            grid.dy[i] = rng.uniform(-my, my);
        }
        s = ffd_deform(s, grid);
    }
    if (rng.bernoulli(spec.p_intensity)) {
        s = intensity_scale(s, rng.uniform(spec.intensity_min, spec.intensity_max));
    }
    return s;
}

}  // namespace seganet
