#pragma once

#include <cstdint>
#include <vector>

#include "seganet/errors.hpp"

namespace seganet {

// Physical voxel spacing in mm. dz is the slice thickness.
struct Spacing {
    double dx = 1.25;
    double dy = 1.25;
    double dz = 10.0;

    void validate() const {
        if (dx <= 0 || dy <= 0 || dz <= 0) throw DataError("spacing must be positive");
    }
    bool operator==(const Spacing&) const = default;
};

// [slices, H, W] stack of grayscale slices, row-major within a slice.
struct ImageStack {
    int slices = 0;
    int height = 0;
    int width = 0;
    std::vector<float> data;
    Spacing spacing;

    std::size_t slice_size() const { return static_cast<std::size_t>(height) * width; }
    const float* slice(int s) const { return data.data() + slice_size() * s; }
    float* slice(int s) { return data.data() + slice_size() * s; }

    void validate() const {
        spacing.validate();
        if (slices <= 0 || height <= 0 || width <= 0)
            throw DataError("image stack dims must be positive");
        if (data.size() != slice_size() * static_cast<std::size_t>(slices))
            throw DataError("image stack payload does not match dims");
    }
};

// Binary [slices, H, W] stack. Values are strictly 0 or 1.
struct MaskStack {
    int slices = 0;
    int height = 0;
    int width = 0;
    std::vector<std::uint8_t> data;
    Spacing spacing;

    std::size_t slice_size() const { return static_cast<std::size_t>(height) * width; }
    const std::uint8_t* slice(int s) const { return data.data() + slice_size() * s; }
    std::uint8_t* slice(int s) { return data.data() + slice_size() * s; }

    std::size_t foreground_count() const {
        std::size_t n = 0;
        for (std::uint8_t v : data) n += v;
        return n;
    }

    void validate() const {
        spacing.validate();
        if (slices <= 0 || height <= 0 || width <= 0)
            throw DataError("mask stack dims must be positive");
        if (data.size() != slice_size() * static_cast<std::size_t>(slices))
            throw DataError("mask stack payload does not match dims");
        for (std::uint8_t v : data)
            if (v > 1) throw DataError("mask stack must be strictly binary");
    }
};

}  // namespace seganet
