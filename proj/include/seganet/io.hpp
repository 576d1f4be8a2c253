#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "seganet/augment.hpp"
#include "seganet/model.hpp"
#include "seganet/stack.hpp"

// On-disk formats. Everything is little-endian and written deterministically:
// identical inputs produce byte-identical files.
//
// Tensor container (.sgt):
//   magic "SGT1" | dtype u8 (0 = f32, 1 = u8) | ndim u8 | 2 reserved zero
//   bytes | ndim x u32 dims | row-major payload.
//
// Model checkpoint (.sgm):
//   magic "SGM1" | serialized ModelConfig | u64 parameter count | f32
//   parameter payload in canonical plan order | u64 FNV-1a checksum of the
//   payload bytes.
//
// Dataset manifest (manifest.txt): plain text key/value lines naming the
// voxel spacing, phase and slice counts, slice ordering, subject group, the
// per-phase image/mask tensor files and the LV presence flag file.

namespace seganet {

enum class Dtype : std::uint8_t { f32 = 0, u8 = 1 };

struct TensorBlob {
    Dtype dtype = Dtype::f32;
    std::vector<std::uint32_t> dims;
    std::vector<float> f32;       // valid when dtype == f32
    std::vector<std::uint8_t> u8; // valid when dtype == u8

    std::size_t element_count() const;
};

void write_tensor_file(const std::string& path, const TensorBlob& blob);
TensorBlob read_tensor_file(const std::string& path);

// Conversions between stacks and 3D blobs ([slices, H, W]).
TensorBlob to_blob(const ImageStack& stack);
TensorBlob to_blob(const MaskStack& stack);
ImageStack image_stack_from_blob(const TensorBlob& blob, const Spacing& spacing);
MaskStack mask_stack_from_blob(const TensorBlob& blob, const Spacing& spacing);

struct DatasetManifest {
    Spacing spacing;
    int phases = 0;
    int slices = 0;
    bool apex_to_superior = true;
    std::string group = "patient";  // patient | volunteer
    std::string lv_flags_path;
    std::vector<std::string> image_paths;  // one per phase
    std::vector<std::string> mask_paths;   // one per phase
    std::string base_dir;

    void validate_files() const;  // existence + header-level consistency
};

DatasetManifest read_manifest(const std::string& dataset_dir);
void write_manifest(const std::string& dataset_dir, const DatasetManifest& manifest);

// Loaders normalize slice order to apex -> superior in memory.
ImageStack load_image_stack(const DatasetManifest& manifest, int phase);
MaskStack load_mask_stack(const DatasetManifest& manifest, int phase);
std::vector<bool> load_lv_flags(const DatasetManifest& manifest);
void write_lv_flags(const std::string& path, const std::vector<bool>& flags);

// Every (slice, phase) pair of a dataset as a training sample pool.
std::vector<SliceSample> load_slice_pool(const DatasetManifest& manifest);

void save_checkpoint(const std::string& path, const ModelParams& params);
ModelParams load_checkpoint(const std::string& path);

std::uint64_t fnv1a64(const void* data, std::size_t bytes);

}  // namespace seganet
