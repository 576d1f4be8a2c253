#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "seganet/io.hpp"
#include "seganet/phantom.hpp"
#include "seganet/report.hpp"
#include "seganet/volumetrics.hpp"

using namespace seganet;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& tag) {
        path = fs::temp_directory_path() / ("seganet_test_" + tag);
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string str() const { return path.string(); }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

std::string slurp(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    REQUIRE(f);
    return std::string(std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("tensor container round trip is bit-exact") {
    TempDir dir("tensor");
    Rng rng(8);
    TensorBlob blob;
    blob.dtype = Dtype::f32;
    blob.dims = {3, 5, 7};
    blob.f32.resize(105);
    for (auto& v : blob.f32) v = static_cast<float>(rng.normal());

    write_tensor_file(dir.file("t.sgt"), blob);
    const TensorBlob back = read_tensor_file(dir.file("t.sgt"));
    CHECK(back.dims == blob.dims);
    CHECK(back.f32 == blob.f32);

    TensorBlob masks;
    masks.dtype = Dtype::u8;
    masks.dims = {2, 4, 4};
    masks.u8.assign(32, 0);
    masks.u8[5] = 1;
    write_tensor_file(dir.file("m.sgt"), masks);
    CHECK(read_tensor_file(dir.file("m.sgt")).u8 == masks.u8);
}

TEST_CASE("tensor container rejects corruption") {
    TempDir dir("tensorbad");
    TensorBlob blob;
    blob.dtype = Dtype::u8;
    blob.dims = {2, 2};
    blob.u8 = {0, 1, 1, 0};
    write_tensor_file(dir.file("ok.sgt"), blob);
    std::string bytes = slurp(dir.file("ok.sgt"));

    {
        std::string bad = bytes;
        bad[0] = 'X';
        std::ofstream(dir.file("magic.sgt"), std::ios::binary) << bad;
        CHECK_THROWS_AS(read_tensor_file(dir.file("magic.sgt")), DataError);
    }
    {
        std::string bad = bytes.substr(0, bytes.size() - 2);  // truncated payload
        std::ofstream(dir.file("trunc.sgt"), std::ios::binary) << bad;
        CHECK_THROWS_AS(read_tensor_file(dir.file("trunc.sgt")), DataError);
    }
    {
        std::string bad = bytes;
        bad[6] = 1;  // reserved byte
        std::ofstream(dir.file("reserved.sgt"), std::ios::binary) << bad;
        CHECK_THROWS_AS(read_tensor_file(dir.file("reserved.sgt")), DataError);
    }
    {
        std::string bad = bytes;
        bad[8] = 3;  // dims now claim 3x2, payload still 4 bytes
        std::ofstream(dir.file("dims.sgt"), std::ios::binary) << bad;
        CHECK_THROWS_AS(read_tensor_file(dir.file("dims.sgt")), DataError);
    }
    CHECK_THROWS_AS(read_tensor_file(dir.file("missing.sgt")), DataError);
}

TEST_CASE("checkpoint round trip restores bit-identical behavior") {
    TempDir dir("ckpt");
    ModelConfig config;
    config.encode_channels = {2, 3, 4};
    ModelParams params = ModelParams::build(config, 2024);
    save_checkpoint(dir.file("model.sgm"), params);

    const ModelParams back = load_checkpoint(dir.file("model.sgm"));
    CHECK(back.config().encode_channels == config.encode_channels);
    CHECK(back.count() == params.count());
    CHECK(back.flat() == params.flat());

    Rng rng(4);
    std::vector<float> img(16 * 16);
    for (auto& v : img) v = static_cast<float>(rng.uniform01());
    Tensor<float> batch({1, 1, 16, 16}, std::move(img));
    const Tensor<float> a = forward(params, batch);
    const Tensor<float> b = forward(back, batch);
    CHECK(a.values() == b.values());

    // writers must be byte-deterministic
    save_checkpoint(dir.file("model2.sgm"), params);
    CHECK(slurp(dir.file("model.sgm")) == slurp(dir.file("model2.sgm")));
}

TEST_CASE("checkpoint rejects checksum and magic corruption") {
    TempDir dir("ckptbad");
    ModelConfig config;
    config.encode_channels = {2, 3, 4};
    save_checkpoint(dir.file("m.sgm"), ModelParams::build(config, 1));
    std::string bytes = slurp(dir.file("m.sgm"));

    std::string flipped = bytes;
    flipped[bytes.size() / 2] ^= 0x40;  // flip a payload bit
    std::ofstream(dir.file("bad.sgm"), std::ios::binary) << flipped;
    CHECK_THROWS_AS(load_checkpoint(dir.file("bad.sgm")), DataError);

    std::string magic = bytes;
    magic[0] = 'Z';
    std::ofstream(dir.file("badmagic.sgm"), std::ios::binary) << magic;
    CHECK_THROWS_AS(load_checkpoint(dir.file("badmagic.sgm")), DataError);
}

TEST_CASE("manifest round trip and validation") {
    TempDir dir("manifest");
    PhantomSpec spec;
    spec.nx = 32;
    spec.ny = 32;
    spec.nslices = 24;
    spec.phases = 8;
    spec.v_max_ml = 12;
    spec.v_min_ml = 8;
    spec.v_prea_ml = 11;
    spec.peak_max_phase = 3;
    spec.peak_prea_phase = 6;
    write_phantom_dataset(dir.str(), generate_phantom(spec));

    const DatasetManifest m = read_manifest(dir.str());
    CHECK(m.phases == 8);
    CHECK(m.slices == 24);
    CHECK(m.spacing == spec.spacing);
    CHECK(m.image_paths.size() == 8);

    const ImageStack img = load_image_stack(m, 0);
    CHECK(img.slices == 24);
    const MaskStack msk = load_mask_stack(m, 0);
    CHECK(msk.slices == 24);
    const std::vector<bool> flags = load_lv_flags(m);
    CHECK(static_cast<int>(flags.size()) == 24);

    const std::vector<SliceSample> pool = load_slice_pool(m);
    CHECK(pool.size() == 8u * 24u);

    // invalid spacing is rejected before anything loads
    std::string text = slurp(dir.file("manifest.txt"));
    std::string bad = text;
    bad.replace(bad.find("spacing_mm 1.25"), 15, "spacing_mm -1.0");
    std::ofstream(dir.file("manifest.txt"), std::ios::trunc) << bad;
    CHECK_THROWS_AS(read_manifest(dir.str()), DataError);

    // missing file is rejected
    std::ofstream(dir.file("manifest.txt"), std::ios::trunc) << text;
    fs::remove(dir.file("image_p003.sgt"));
    CHECK_THROWS_AS(read_manifest(dir.str()), DataError);
}

TEST_CASE("superior-to-apex datasets are normalized on load") {
    TempDir dir("order");
    MaskStack m;
    m.slices = 3;
    m.height = 2;
    m.width = 2;
    m.spacing = {1, 1, 1};
    m.data.assign(12, 0);
    m.data[0] = 1;  // only slice 0 has foreground

    DatasetManifest manifest;
    manifest.spacing = m.spacing;
    manifest.phases = 1;
    manifest.slices = 3;
    manifest.apex_to_superior = false;
    manifest.lv_flags_path = "flags.txt";
    manifest.image_paths = {""};
    manifest.mask_paths = {"m.sgt"};
    manifest.base_dir = dir.str();
    write_tensor_file(dir.file("m.sgt"), to_blob(m));
    write_lv_flags(dir.file("flags.txt"), {true, false, false});
    write_manifest(dir.str(), manifest);

    const DatasetManifest back = read_manifest(dir.str());
    CHECK_FALSE(back.apex_to_superior);
    const MaskStack loaded = load_mask_stack(back, 0);
    CHECK(loaded.slice(2)[0] == 1);  // reversed to apex->superior
    CHECK(loaded.slice(0)[0] == 0);
    const std::vector<bool> flags = load_lv_flags(back);
    CHECK(flags == std::vector<bool>{false, false, true});
}

TEST_CASE("phantom generation is deterministic and matches its analytic record") {
    PhantomSpec spec;
    spec.nx = 48;
    spec.ny = 48;
    spec.nslices = 32;
    spec.phases = 10;
    spec.v_max_ml = 20;
    spec.v_min_ml = 14;
    spec.v_prea_ml = 18;
    spec.peak_max_phase = 4;
    spec.peak_prea_phase = 8;
    spec.noise = 0.0;
    spec.seed = 7;

    const PhantomDataset a = generate_phantom(spec);
    const PhantomDataset b = generate_phantom(spec);
    for (int p = 0; p < spec.phases; ++p) {
        CHECK(a.masks[p].data == b.masks[p].data);
        CHECK(a.images[p].data == b.images[p].data);
    }

    // voxelized volumes track the analytic curve within 2%
    for (int p = 0; p < spec.phases; ++p) {
        const double vox = mask_volume_ml(a.masks[p]);
        CHECK(std::abs(vox - a.analytic_volumes_ml[p]) / a.analytic_volumes_ml[p] <= 0.02);
    }

    // landmark recovery on the emitted masks hits the recorded phases
    const VolumetricsResult r = run_volumetrics(a.masks, a.lv_flags, 1);
    CHECK(r.landmarks.max_phase == a.analytic_max_phase);
    CHECK(r.landmarks.min_phase == a.analytic_min_phase);
    CHECK(r.landmarks.prea_phase == a.analytic_prea_phase);

    // LV flags mark a contiguous lower block ending below the LA
    CHECK(a.lv_top_slice >= 0);
    CHECK(r.atrial_range.first == a.lv_top_slice + 1);
}

TEST_CASE("phantom validates its spec") {
    PhantomSpec bad;
    bad.v_max_ml = 50;
    bad.v_prea_ml = 60;  // violates V_preA < V_max
    CHECK_THROWS_AS(bad.validate(), DataError);

    PhantomSpec tiny;
    tiny.nx = 20;
    tiny.ny = 20;  // ellipsoid cannot fit
    CHECK_THROWS_AS(generate_phantom(tiny), DataError);
}

TEST_CASE("phantom spec JSON parsing") {
    TempDir dir("spec");
    std::ofstream(dir.file("spec.json")) << R"({
        "v_max_ml": 90.0, "v_min_ml": 60.0, "v_prea_ml": 82.0,
        "phases": 20, "grid": [64, 64, 36],
        "spacing_mm": [1.5, 1.5, 3.0],
        "peak_max_phase": 8, "peak_prea_phase": 16,
        "noise": 0.01, "seed": 5
    })";
    const PhantomSpec spec = parse_phantom_spec(dir.file("spec.json"));
    CHECK(spec.v_max_ml == 90.0);
    CHECK(spec.phases == 20);
    CHECK(spec.nx == 64);
    CHECK(spec.nslices == 36);
    CHECK(spec.spacing.dz == 3.0);
    CHECK(spec.seed == 5);

    std::ofstream(dir.file("bad.json")) << "{ not json";
    CHECK_THROWS_AS(parse_phantom_spec(dir.file("bad.json")), DataError);
}

TEST_CASE("report writer emits deterministic CSV and SVG") {
    TempDir dir("report");
    VolumeCurve curve;
    curve.volumes_ml = {50, 52, 60, 72, 80, 74, 66, 60, 58, 62, 68, 64, 55, 51};
    const CycleLandmarks lm = find_landmarks(curve, 1);
    const BiomarkerResult bio = ejection_fractions(lm);

    write_report(curve, lm, bio, dir.file("case"));
    const std::string csv = slurp(dir.file("case_curve.csv"));
    CHECK(csv.starts_with("phase,volume_ml\n"));
    // one header plus one row per phase
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 1 + curve.phase_count());

    const std::string svg = slurp(dir.file("case_curve.svg"));
    CHECK(svg.find("<polyline") != std::string::npos);
    CHECK(svg.find("Vmax") != std::string::npos);
    CHECK(svg.find("aEF") != std::string::npos);

    write_report(curve, lm, bio, dir.file("again"));
    CHECK(slurp(dir.file("again_curve.svg")) == svg);
    CHECK(slurp(dir.file("again_curve.csv")) == csv);

    // constant curve: flat polyline with EF 0, landmarks built by hand
    VolumeCurve flat;
    flat.volumes_ml.assign(10, 42.0);
    CycleLandmarks flat_lm;
    flat_lm.v_max_ml = flat_lm.v_min_ml = flat_lm.v_prea_ml = 42.0;
    flat_lm.max_phase = 0;
    flat_lm.min_phase = 5;
    flat_lm.prea_phase = 8;
    write_report(flat, flat_lm, ejection_fractions(flat_lm), dir.file("flat"));
    const std::string flat_svg = slurp(dir.file("flat_curve.svg"));
    CHECK(flat_svg.find("EF 0.0%") != std::string::npos);

    CHECK_THROWS_AS(write_report(curve, lm, bio, dir.file("no/such/dir/x")), DataError);
}
