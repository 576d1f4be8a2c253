#include "seganet/io.hpp"

#include <algorithm>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace seganet {

namespace fs = std::filesystem;

namespace {

constexpr char kTensorMagic[4] = {'S', 'G', 'T', '1'};
constexpr char kModelMagic[4] = {'S', 'G', 'M', '1'};

// All multi-byte fields are little-endian on disk regardless of host order.
template <typename T>
void put_le(std::string& out, T value) {
    for (std::size_t i = 0; i < sizeof(T); ++i)
        out.push_back(static_cast<char>((static_cast<std::uint64_t>(value) >> (8 * i)) & 0xff));
}

template <typename T>
T get_le(const std::string& in, std::size_t& pos) {
    if (pos + sizeof(T) > in.size()) throw DataError("truncated file");
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i)
        v |= static_cast<std::uint64_t>(static_cast<std::uint8_t>(in[pos + i])) << (8 * i);
    pos += sizeof(T);
    return static_cast<T>(v);
}

void put_f32(std::string& out, float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    put_le(out, bits);
}

float get_f32(const std::string& in, std::size_t& pos) {
    const std::uint32_t bits = get_le<std::uint32_t>(in, pos);
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
}

std::string read_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot open file: " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, const std::string& bytes) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw DataError("cannot write file: " + path);
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw DataError("write failed: " + path);
}

}  // namespace

std::uint64_t fnv1a64(const void* data, std::size_t bytes) {
    const auto* p = static_cast<const std::uint8_t*>(data);
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (std::size_t i = 0; i < bytes; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ull;
    }
    return h;
}

std::size_t TensorBlob::element_count() const {
    std::size_t n = 1;
    for (std::uint32_t d : dims) {
        if (d == 0) throw DataError("tensor dims must be positive");
        if (n > (static_cast<std::size_t>(1) << 48) / d)
            throw DataError("tensor dims overflow");
        n *= d;
    }
    return dims.empty() ? 0 : n;
}

void write_tensor_file(const std::string& path, const TensorBlob& blob) {
    const std::size_t n = blob.element_count();
    if (blob.dims.empty()) throw DataError("tensor must have at least one dim");
    if (blob.dims.size() > 255) throw DataError("too many tensor dims");
    if (blob.dtype == Dtype::f32 ? blob.f32.size() != n : blob.u8.size() != n)
        throw DataError("tensor payload does not match dims");

    std::string out;
    out.append(kTensorMagic, 4);
    out.push_back(static_cast<char>(blob.dtype));
    out.push_back(static_cast<char>(blob.dims.size()));
    out.push_back(0);
    out.push_back(0);
    for (std::uint32_t d : blob.dims) put_le(out, d);
    if (blob.dtype == Dtype::f32) {
        for (float v : blob.f32) put_f32(out, v);
    } else {
        out.append(reinterpret_cast<const char*>(blob.u8.data()), blob.u8.size());
    }
    write_file(path, out);
}

TensorBlob read_tensor_file(const std::string& path) {
    const std::string in = read_file(path);
    std::size_t pos = 0;
    if (in.size() < 8 || std::memcmp(in.data(), kTensorMagic, 4) != 0)
        throw DataError("bad magic in tensor file: " + path);
    pos = 4;

    TensorBlob blob;
    const auto dtype = get_le<std::uint8_t>(in, pos);
    if (dtype > 1) throw DataError("unknown dtype code in " + path);
    blob.dtype = static_cast<Dtype>(dtype);
    const auto ndim = get_le<std::uint8_t>(in, pos);
    const auto r0 = get_le<std::uint8_t>(in, pos);
    const auto r1 = get_le<std::uint8_t>(in, pos);
    if (r0 != 0 || r1 != 0) throw DataError("reserved bytes must be zero in " + path);
    if (ndim == 0) throw DataError("tensor must have at least one dim in " + path);

    blob.dims.resize(ndim);
    for (auto& d : blob.dims) d = get_le<std::uint32_t>(in, pos);
    const std::size_t n = blob.element_count();
    const std::size_t elem_size = blob.dtype == Dtype::f32 ? 4 : 1;
    if (in.size() - pos != n * elem_size)
        throw DataError("corrupt tensor file (payload length mismatch): " + path);
    if (blob.dtype == Dtype::f32) {
        blob.f32.resize(n);
        for (std::size_t i = 0; i < n; ++i) blob.f32[i] = get_f32(in, pos);
    } else {
        blob.u8.assign(in.begin() + static_cast<std::ptrdiff_t>(pos), in.end());
    }
    return blob;
}

TensorBlob to_blob(const ImageStack& stack) {
    stack.validate();
    TensorBlob b;
    b.dtype = Dtype::f32;
    b.dims = {static_cast<std::uint32_t>(stack.slices), static_cast<std::uint32_t>(stack.height),
              static_cast<std::uint32_t>(stack.width)};
    b.f32 = stack.data;
    return b;
}

TensorBlob to_blob(const MaskStack& stack) {
    stack.validate();
    TensorBlob b;
    b.dtype = Dtype::u8;
    b.dims = {static_cast<std::uint32_t>(stack.slices), static_cast<std::uint32_t>(stack.height),
              static_cast<std::uint32_t>(stack.width)};
    b.u8 = stack.data;
    return b;
}

ImageStack image_stack_from_blob(const TensorBlob& blob, const Spacing& spacing) {
    if (blob.dtype != Dtype::f32) throw DataError("image stack must be f32");
    if (blob.dims.size() != 3) throw DataError("image stack must be 3D");
    ImageStack s;
    s.slices = static_cast<int>(blob.dims[0]);
    s.height = static_cast<int>(blob.dims[1]);
    s.width = static_cast<int>(blob.dims[2]);
    s.data = blob.f32;
    s.spacing = spacing;
    s.validate();
    return s;
}

MaskStack mask_stack_from_blob(const TensorBlob& blob, const Spacing& spacing) {
    if (blob.dtype != Dtype::u8) throw DataError("mask stack must be u8");
    if (blob.dims.size() != 3) throw DataError("mask stack must be 3D");
    MaskStack s;
    s.slices = static_cast<int>(blob.dims[0]);
    s.height = static_cast<int>(blob.dims[1]);
    s.width = static_cast<int>(blob.dims[2]);
    s.data = blob.u8;
    s.spacing = spacing;
    s.validate();
    return s;
}

// --------------------------------------------------------------------------
// manifest
// --------------------------------------------------------------------------

DatasetManifest read_manifest(const std::string& dataset_dir) {
    const std::string path = (fs::path(dataset_dir) / "manifest.txt").string();
    std::ifstream f(path);
    if (!f) throw DataError("cannot open manifest: " + path);

    DatasetManifest m;
    m.base_dir = dataset_dir;
    std::vector<std::pair<int, std::string>> images, masks;
    std::string line;
    int lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ss(line);
        std::string key;
        ss >> key;
        auto bad = [&](const std::string& why) {
            return DataError("manifest line " + std::to_string(lineno) + ": " + why);
        };
        if (key == "spacing_mm") {
            if (!(ss >> m.spacing.dx >> m.spacing.dy >> m.spacing.dz))
                throw bad("expected three spacing values");
        } else if (key == "phases") {
            if (!(ss >> m.phases)) throw bad("expected phase count");
        } else if (key == "slices") {
            if (!(ss >> m.slices)) throw bad("expected slice count");
        } else if (key == "slice_order") {
            std::string v;
            ss >> v;
            if (v == "apex_to_superior")
                m.apex_to_superior = true;
            else if (v == "superior_to_apex")
                m.apex_to_superior = false;
            else
                throw bad("unknown slice order: " + v);
        } else if (key == "group") {
            ss >> m.group;
            if (m.group != "patient" && m.group != "volunteer")
                throw bad("group must be patient or volunteer");
        } else if (key == "lv_flags") {
            ss >> m.lv_flags_path;
        } else if (key == "phase") {
            // phase <p> image <file> mask <file>, or mask-only for
            // prediction output directories
            int p = -1;
            std::string kw1, f1, kw2, f2;
            if (!(ss >> p >> kw1 >> f1)) throw bad("expected: phase <p> image|mask <file>");
            if (kw1 == "image") {
                if (!(ss >> kw2 >> f2) || kw2 != "mask")
                    throw bad("expected: phase <p> image <file> mask <file>");
                images.emplace_back(p, f1);
                masks.emplace_back(p, f2);
            } else if (kw1 == "mask") {
                images.emplace_back(p, std::string());
                masks.emplace_back(p, f1);
            } else {
                throw bad("expected image or mask after the phase index");
            }
        } else {
            throw bad("unknown key: " + key);
        }
    }

    if (m.phases <= 0) throw DataError("manifest: phase count missing or non-positive");
    if (m.slices <= 0) throw DataError("manifest: slice count missing or non-positive");
    m.spacing.validate();
    if (static_cast<int>(images.size()) != m.phases)
        throw DataError("manifest: phase entry count does not match declared phases");
    std::sort(images.begin(), images.end());
    std::sort(masks.begin(), masks.end());
    m.image_paths.resize(images.size());
    m.mask_paths.resize(masks.size());
    for (int p = 0; p < m.phases; ++p) {
        if (images[p].first != p) throw DataError("manifest: phases must cover 0..P-1 exactly");
        m.image_paths[p] = images[p].second;
        m.mask_paths[p] = masks[p].second;
    }
    m.validate_files();
    return m;
}

void DatasetManifest::validate_files() const {
    auto check = [&](const std::string& rel) {
        if (rel.empty()) return;
        const fs::path p = fs::path(base_dir) / rel;
        if (!fs::exists(p)) throw DataError("manifest references missing file: " + p.string());
    };
    check(lv_flags_path);
    for (const std::string& p : image_paths) check(p);
    for (const std::string& p : mask_paths) check(p);
}

void write_manifest(const std::string& dataset_dir, const DatasetManifest& manifest) {
    fs::create_directories(dataset_dir);
    std::ostringstream out;
    char buf[96];
    std::snprintf(buf, sizeof(buf), "spacing_mm %.6g %.6g %.6g\n", manifest.spacing.dx,
                  manifest.spacing.dy, manifest.spacing.dz);
    out << buf;
    out << "phases " << manifest.phases << "\n";
    out << "slices " << manifest.slices << "\n";
    out << "slice_order " << (manifest.apex_to_superior ? "apex_to_superior" : "superior_to_apex")
        << "\n";
    out << "group " << manifest.group << "\n";
    if (!manifest.lv_flags_path.empty()) out << "lv_flags " << manifest.lv_flags_path << "\n";
    for (int p = 0; p < manifest.phases; ++p) {
        out << "phase " << p;
        if (!manifest.image_paths[p].empty()) out << " image " << manifest.image_paths[p];
        out << " mask " << manifest.mask_paths[p] << "\n";
    }
    write_file((fs::path(dataset_dir) / "manifest.txt").string(), out.str());
}

namespace {

template <typename Stack>
void reverse_slices(Stack& s) {
    const std::size_t n = s.slice_size();
    for (int i = 0, j = s.slices - 1; i < j; ++i, --j)
        std::swap_ranges(s.data.begin() + i * n, s.data.begin() + (i + 1) * n,
                         s.data.begin() + j * n);
}

}  // namespace

ImageStack load_image_stack(const DatasetManifest& manifest, int phase) {
    if (phase < 0 || phase >= manifest.phases) throw DataError("phase index out of range");
    if (manifest.image_paths[phase].empty())
        throw DataError("manifest has no image for phase " + std::to_string(phase));
    const std::string path = (fs::path(manifest.base_dir) / manifest.image_paths[phase]).string();
    ImageStack s = image_stack_from_blob(read_tensor_file(path), manifest.spacing);
    if (s.slices != manifest.slices)
        throw DataError("image stack slice count disagrees with manifest: " + path);
    if (!manifest.apex_to_superior) reverse_slices(s);
    return s;
}

MaskStack load_mask_stack(const DatasetManifest& manifest, int phase) {
    if (phase < 0 || phase >= manifest.phases) throw DataError("phase index out of range");
    const std::string path = (fs::path(manifest.base_dir) / manifest.mask_paths[phase]).string();
    MaskStack s = mask_stack_from_blob(read_tensor_file(path), manifest.spacing);
    if (s.slices != manifest.slices)
        throw DataError("mask stack slice count disagrees with manifest: " + path);
    if (!manifest.apex_to_superior) reverse_slices(s);
    return s;
}

std::vector<bool> load_lv_flags(const DatasetManifest& manifest) {
    if (manifest.lv_flags_path.empty()) throw DataError("manifest has no lv_flags entry");
    const std::string path = (fs::path(manifest.base_dir) / manifest.lv_flags_path).string();
    std::ifstream f(path);
    if (!f) throw DataError("cannot open LV flags: " + path);
    std::vector<bool> flags;
    int v;
    while (f >> v) {
        if (v != 0 && v != 1) throw DataError("LV flags must be 0 or 1: " + path);
        flags.push_back(v == 1);
    }
    if (static_cast<int>(flags.size()) != manifest.slices)
        throw DataError("LV flag count does not match slice count: " + path);
    if (!manifest.apex_to_superior) std::reverse(flags.begin(), flags.end());
    return flags;
}

void write_lv_flags(const std::string& path, const std::vector<bool>& flags) {
    std::ostringstream out;
    for (bool b : flags) out << (b ? 1 : 0) << "\n";
    write_file(path, out.str());
}

std::vector<SliceSample> load_slice_pool(const DatasetManifest& manifest) {
    std::vector<SliceSample> pool;
    pool.reserve(static_cast<std::size_t>(manifest.phases) * manifest.slices);
    for (int p = 0; p < manifest.phases; ++p) {
        const ImageStack img = load_image_stack(manifest, p);
        const MaskStack msk = load_mask_stack(manifest, p);
        if (img.height != msk.height || img.width != msk.width || img.slices != msk.slices)
            throw DataError("image and mask stacks disagree on dims");
        for (int s = 0; s < img.slices; ++s) {
            SliceSample sample;
            sample.height = img.height;
            sample.width = img.width;
            sample.spacing_x = manifest.spacing.dx;
            sample.spacing_y = manifest.spacing.dy;
            sample.image.assign(img.slice(s), img.slice(s) + img.slice_size());
            sample.mask.assign(msk.slice(s), msk.slice(s) + msk.slice_size());
            pool.push_back(std::move(sample));
        }
    }
    return pool;
}

// --------------------------------------------------------------------------
// checkpoint
// --------------------------------------------------------------------------

void save_checkpoint(const std::string& path, const ModelParams& params) {
    const ModelConfig& cfg = params.config();
    std::string out;
    out.append(kModelMagic, 4);
    put_le(out, static_cast<std::uint32_t>(cfg.encode_channels.size()));
    for (int c : cfg.encode_channels) put_le(out, static_cast<std::uint32_t>(c));
    put_le(out, static_cast<std::uint32_t>(cfg.input_channels));
    put_le(out, static_cast<std::uint32_t>(cfg.output_channels));
    put_le(out, static_cast<std::uint32_t>(cfg.kernel_size));
    put_le(out, static_cast<std::uint32_t>(cfg.down_stride));
    put_f32(out, cfg.norm_epsilon);
    put_f32(out, cfg.threshold);
    put_le(out, static_cast<std::uint64_t>(params.count()));

    std::string payload;
    payload.reserve(params.count() * 4);
    for (float v : params.flat()) put_f32(payload, v);
    out += payload;
    put_le(out, fnv1a64(payload.data(), payload.size()));
    write_file(path, out);
}

ModelParams load_checkpoint(const std::string& path) {
    const std::string in = read_file(path);
    if (in.size() < 4 || std::memcmp(in.data(), kModelMagic, 4) != 0)
        throw DataError("bad magic in checkpoint: " + path);
    std::size_t pos = 4;

    ModelConfig cfg;
    const auto nch = get_le<std::uint32_t>(in, pos);
    if (nch < 2 || nch > 64) throw DataError("corrupt checkpoint (channel count): " + path);
    cfg.encode_channels.resize(nch);
    for (auto& c : cfg.encode_channels) c = static_cast<int>(get_le<std::uint32_t>(in, pos));
    cfg.input_channels = static_cast<int>(get_le<std::uint32_t>(in, pos));
    cfg.output_channels = static_cast<int>(get_le<std::uint32_t>(in, pos));
    cfg.kernel_size = static_cast<int>(get_le<std::uint32_t>(in, pos));
    cfg.down_stride = static_cast<int>(get_le<std::uint32_t>(in, pos));
    cfg.norm_epsilon = get_f32(in, pos);
    cfg.threshold = get_f32(in, pos);

    const auto count = get_le<std::uint64_t>(in, pos);
    if (count != parameter_count(cfg))
        throw DataError("checkpoint parameter count does not match its config: " + path);
    if (in.size() - pos != count * 4 + 8) throw DataError("truncated checkpoint: " + path);

    const std::uint64_t expect = fnv1a64(in.data() + pos, count * 4);
    std::vector<float> flat(count);
    for (auto& v : flat) v = get_f32(in, pos);
    const auto stored = get_le<std::uint64_t>(in, pos);
    if (stored != expect) throw DataError("checkpoint checksum mismatch: " + path);
    return ModelParams(cfg, std::move(flat));
}

}  // namespace seganet
