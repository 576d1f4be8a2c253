#include "seganet/cli.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "seganet/io.hpp"
#include "seganet/metrics.hpp"
#include "seganet/phantom.hpp"
#include "seganet/report.hpp"
#include "seganet/stats.hpp"
#include "seganet/train.hpp"
#include "seganet/volumetrics.hpp"

namespace seganet {

namespace fs = std::filesystem;

namespace {

struct TrainArgs {
    std::string data_dir;
    std::string out_path;
    int iterations = 500;
    int batch = 8;
    double lr = 1e-4;
    std::uint64_t seed = 0;
    std::vector<int> channels{16, 32, 64, 128, 256};
    bool no_augment = false;
    int checkpoint_every = 0;
};

int cmd_train(const TrainArgs& args) {
    const DatasetManifest manifest = read_manifest(args.data_dir);
    const std::vector<SliceSample> pool = load_slice_pool(manifest);

    ModelConfig model;
    model.encode_channels = args.channels;
    TrainConfig cfg;
    cfg.iterations = args.iterations;
    cfg.batch_size = args.batch;
    cfg.adam.learning_rate = args.lr;
    cfg.seed = args.seed;
    cfg.checkpoint_every = args.checkpoint_every;
    if (args.no_augment) cfg.augment = AugmentSpec::disabled();
    cfg.augment.seed = args.seed;

    CheckpointHook hook;
    if (args.checkpoint_every > 0)
        hook = [&](int iter, const ModelParams& p) {
            save_checkpoint(args.out_path + "." + std::to_string(iter), p);
        };
    TrainResult result = train(model, cfg, pool, hook);

    save_checkpoint(args.out_path, result.params);
    std::ostringstream trace;
    trace << "iteration,loss\n";
    for (std::size_t i = 0; i < result.trace.size(); ++i)
        trace << i << "," << format_number(result.trace[i]) << "\n";
    std::ofstream tf(args.out_path + ".loss.csv", std::ios::trunc);
    if (!tf) throw DataError("cannot write loss trace next to " + args.out_path);
    tf << trace.str();

    std::cout << "trained " << result.trace.size() << " iterations, "
              << result.params.count() << " parameters, final loss "
              << format_number(result.trace.back()) << "\n";
    return 0;
}

int cmd_segment(const std::string& model_path, const std::string& data_dir,
                const std::string& out_dir, float threshold) {
    const ModelParams params = load_checkpoint(model_path);
    const DatasetManifest manifest = read_manifest(data_dir);
    fs::create_directories(out_dir);

    DatasetManifest out = manifest;
    out.base_dir = out_dir;
    out.apex_to_superior = true;  // loaders already normalized the order
    out.image_paths.assign(manifest.phases, std::string());
    out.mask_paths.clear();

    char name[64];
    for (int p = 0; p < manifest.phases; ++p) {
        const ImageStack stack = load_image_stack(manifest, p);
        const MaskStack mask = segment_stack(params, stack, threshold);
        std::snprintf(name, sizeof(name), "pred_p%03d.sgt", p);
        write_tensor_file((fs::path(out_dir) / name).string(), to_blob(mask));
        out.mask_paths.push_back(name);
    }
    if (!manifest.lv_flags_path.empty()) {
        write_lv_flags((fs::path(out_dir) / "lv_flags.txt").string(), load_lv_flags(manifest));
        out.lv_flags_path = "lv_flags.txt";
    }
    write_manifest(out_dir, out);
    std::cout << "segmented " << manifest.phases << " phases into " << out_dir << "\n";
    return 0;
}

int cmd_metrics(const std::string& pred_dir, const std::string& gt_dir,
                const std::string& out_csv) {
    const DatasetManifest pred = read_manifest(pred_dir);
    const DatasetManifest gt = read_manifest(gt_dir);
    if (pred.phases != gt.phases) throw DataError("pred and gt disagree on phase count");
    if (!(pred.spacing == gt.spacing)) throw DataError("pred and gt disagree on spacing");

    const std::string subject = fs::path(pred_dir).filename().string();
    std::ostringstream csv;
    csv << "subject,phase,dice,hd_mm,mcd_mm\n";
    for (int p = 0; p < pred.phases; ++p) {
        const MaskStack pm = load_mask_stack(pred, p);
        const MaskStack gm = load_mask_stack(gt, p);
        const MetricsReport r = compare_stacks(pm, gm);
        csv << subject << "," << p << "," << format_number(r.dice) << ","
            << (r.hausdorff_mm ? format_number(*r.hausdorff_mm) : "undefined") << ","
            << (r.mcd_mm ? format_number(*r.mcd_mm) : "undefined") << "\n";
    }
    std::ofstream f(out_csv, std::ios::trunc);
    if (!f) throw DataError("cannot write metrics CSV: " + out_csv);
    f << csv.str();
    std::cout << "wrote " << pred.phases << " comparisons to " << out_csv << "\n";
    return 0;
}

std::vector<bool> read_flags_file(const std::string& path, bool reverse) {
    std::ifstream f(path);
    if (!f) throw DataError("cannot open LV flags: " + path);
    std::vector<bool> flags;
    int v;
    while (f >> v) {
        if (v != 0 && v != 1) throw DataError("LV flags must be 0 or 1: " + path);
        flags.push_back(v == 1);
    }
    if (flags.empty()) throw DataError("LV flag file is empty: " + path);
    if (reverse) std::reverse(flags.begin(), flags.end());
    return flags;
}

int cmd_volumetrics(const std::string& masks_dir, const std::string& lv_flags_path,
                    const std::string& out_prefix, int smooth) {
    const DatasetManifest manifest = read_manifest(masks_dir);
    std::vector<MaskStack> phases;
    phases.reserve(manifest.phases);
    for (int p = 0; p < manifest.phases; ++p) phases.push_back(load_mask_stack(manifest, p));

    std::vector<bool> flags = lv_flags_path.empty()
                                  ? load_lv_flags(manifest)
                                  : read_flags_file(lv_flags_path, !manifest.apex_to_superior);
    if (static_cast<int>(flags.size()) != manifest.slices)
        throw DataError("LV flag count does not match the mask stacks");

    const VolumetricsResult r = run_volumetrics(phases, flags, smooth);
    write_report(r.curve, r.landmarks, r.biomarkers, out_prefix);

    std::cout << "atrial slices " << r.atrial_range.first << ".." << r.atrial_range.last << "\n"
              << "V_max " << format_number(r.landmarks.v_max_ml) << " mL at phase "
              << r.landmarks.max_phase << "\n"
              << "V_min " << format_number(r.landmarks.v_min_ml) << " mL at phase "
              << r.landmarks.min_phase << "\n"
              << "V_preA " << format_number(r.landmarks.v_prea_ml) << " mL at phase "
              << r.landmarks.prea_phase << "\n"
              << "EF " << format_number(r.biomarkers.ef_percent) << " %\n"
              << "aEF " << format_number(r.biomarkers.aef_percent) << " %\n";
    return 0;
}

int cmd_phantom(const std::string& spec_path, const std::string& out_dir) {
    const PhantomSpec spec = spec_path.empty() ? PhantomSpec() : parse_phantom_spec(spec_path);
    const PhantomDataset phantom = generate_phantom(spec);
    write_phantom_dataset(out_dir, phantom);
    std::cout << "phantom dataset with " << spec.phases << " phases written to " << out_dir
              << "\n";
    return 0;
}

int cmd_augment(const std::string& data_dir, std::uint64_t seed, const std::string& out_dir) {
    const DatasetManifest manifest = read_manifest(data_dir);
    fs::create_directories(out_dir);
    AugmentSpec spec;
    spec.seed = seed;

    DatasetManifest out = manifest;
    out.base_dir = out_dir;
    out.apex_to_superior = true;
    out.image_paths.clear();
    out.mask_paths.clear();

    char name[64];
    for (int p = 0; p < manifest.phases; ++p) {
        ImageStack img = load_image_stack(manifest, p);
        MaskStack msk = load_mask_stack(manifest, p);
        for (int s = 0; s < img.slices; ++s) {
            SliceSample sample;
            sample.height = img.height;
            sample.width = img.width;
            sample.spacing_x = manifest.spacing.dx;
            sample.spacing_y = manifest.spacing.dy;
            sample.image.assign(img.slice(s), img.slice(s) + img.slice_size());
            sample.mask.assign(msk.slice(s), msk.slice(s) + msk.slice_size());
            Rng rng = Rng::substream(seed, static_cast<std::uint64_t>(p),
                                     static_cast<std::uint64_t>(s));
            const SliceSample aug = augment_pipeline(sample, spec, rng);
            std::copy(aug.image.begin(), aug.image.end(), img.slice(s));
            std::copy(aug.mask.begin(), aug.mask.end(), msk.slice(s));
        }
        std::snprintf(name, sizeof(name), "aug_image_p%03d.sgt", p);
        write_tensor_file((fs::path(out_dir) / name).string(), to_blob(img));
        out.image_paths.push_back(name);
        std::snprintf(name, sizeof(name), "aug_mask_p%03d.sgt", p);
        write_tensor_file((fs::path(out_dir) / name).string(), to_blob(msk));
        out.mask_paths.push_back(name);
    }
    if (!manifest.lv_flags_path.empty()) {
        write_lv_flags((fs::path(out_dir) / "lv_flags.txt").string(), load_lv_flags(manifest));
        out.lv_flags_path = "lv_flags.txt";
    }
    write_manifest(out_dir, out);
    std::cout << "augmented preview written to " << out_dir << "\n";
    return 0;
}

std::vector<double> read_value_csv(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw DataError("cannot open cohort CSV: " + path);
    std::vector<double> values;
    std::string line;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        // last comma-separated field of each row; non-numeric rows (headers) skipped
        const std::size_t comma = line.find_last_of(',');
        const std::string field = comma == std::string::npos ? line : line.substr(comma + 1);
        try {
            std::size_t used = 0;
            const double v = std::stod(field, &used);
            if (used == 0) continue;
            values.push_back(v);
        } catch (const std::exception&) {
            continue;
        }
    }
    if (values.empty()) throw DataError("no numeric values found in " + path);
    return values;
}

int cmd_cohort(const std::string& a_path, const std::string& b_path, bool paired) {
    const std::vector<double> a = read_value_csv(a_path);
    const std::vector<double> b = read_value_csv(b_path);
    const TTestResult r = paired ? paired_t_test(a, b) : welch_t_test(a, b);
    std::cout << (paired ? "paired t-test" : "Welch t-test") << "\n"
              << "group_a n=" << r.group_a.n << " mean=" << format_number(r.group_a.mean)
              << " sd=" << format_number(r.group_a.sd) << "\n"
              << "group_b n=" << r.group_b.n << " mean=" << format_number(r.group_b.mean)
              << " sd=" << format_number(r.group_b.sd) << "\n"
              << "t=" << format_number(r.t) << " df=" << format_number(r.df)
              << " p=" << format_number(r.p) << "\n";
    return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
    CLI::App app{"left-atrium segmentation, training and volumetric biomarkers"};
    app.require_subcommand(1);

    TrainArgs train_args;
    CLI::App* train_cmd = app.add_subcommand("train", "train a segmentation model");
    train_cmd->add_option("--data", train_args.data_dir, "dataset directory")->required();
    train_cmd->add_option("--out", train_args.out_path, "output checkpoint path")->required();
    train_cmd->add_option("--iters", train_args.iterations, "training iterations");
    train_cmd->add_option("--batch", train_args.batch, "mini-batch size");
    train_cmd->add_option("--lr", train_args.lr, "Adam learning rate");
    train_cmd->add_option("--seed", train_args.seed, "RNG seed");
    train_cmd->add_option("--channels", train_args.channels, "encode channel dims")
        ->delimiter(',');
    train_cmd->add_flag("--no-augment", train_args.no_augment, "train on raw slices");
    train_cmd->add_option("--checkpoint-every", train_args.checkpoint_every,
                          "periodic checkpoint interval");

    std::string model_path, data_dir, out_dir;
    float threshold = 0.5f;
    CLI::App* segment_cmd = app.add_subcommand("segment", "segment a dataset slice by slice");
    segment_cmd->add_option("--model", model_path, "model checkpoint")->required();
    segment_cmd->add_option("--data", data_dir, "dataset directory")->required();
    segment_cmd->add_option("--out", out_dir, "output directory")->required();
    segment_cmd->add_option("--threshold", threshold, "binarization threshold");

    std::string pred_dir, gt_dir, out_csv;
    CLI::App* metrics_cmd = app.add_subcommand("metrics", "compare predictions to ground truth");
    metrics_cmd->add_option("--pred", pred_dir, "prediction dataset directory")->required();
    metrics_cmd->add_option("--gt", gt_dir, "ground-truth dataset directory")->required();
    metrics_cmd->add_option("--out", out_csv, "output CSV path")->required();

    std::string masks_dir, lv_flags_path, out_prefix;
    int smooth = 1;
    CLI::App* vol_cmd = app.add_subcommand("volumetrics", "volume curve, landmarks, EF and aEF");
    vol_cmd->add_option("--masks", masks_dir, "mask dataset directory")->required();
    vol_cmd->add_option("--lv-flags", lv_flags_path, "per-slice LV presence file");
    vol_cmd->add_option("--out-prefix", out_prefix, "report path prefix")->required();
    vol_cmd->add_option("--smooth", smooth, "odd moving-average window for peak detection");

    std::string phantom_spec, phantom_out;
    CLI::App* phantom_cmd = app.add_subcommand("phantom", "generate a synthetic phantom dataset");
    phantom_cmd->add_option("--spec", phantom_spec, "phantom spec JSON (defaults when omitted)");
    phantom_cmd->add_option("--out", phantom_out, "output dataset directory")->required();

    std::string aug_data, aug_out;
    std::uint64_t aug_seed = 0;
    CLI::App* augment_cmd = app.add_subcommand("augment", "write augmented preview of a dataset");
    augment_cmd->add_option("--data", aug_data, "dataset directory")->required();
    augment_cmd->add_option("--seed", aug_seed, "RNG seed");
    augment_cmd->add_option("--out", aug_out, "output directory")->required();

    std::string cohort_a, cohort_b;
    bool paired = false;
    CLI::App* cohort_cmd = app.add_subcommand("cohort", "two-sample t-test on biomarker CSVs");
    cohort_cmd->add_option("--group-a", cohort_a, "CSV of group A values")->required();
    cohort_cmd->add_option("--group-b", cohort_b, "CSV of group B values")->required();
    cohort_cmd->add_flag("--paired", paired, "paired variant (equal sizes)");

    try {
        app.parse(argc, argv);
        if (*train_cmd) return cmd_train(train_args);
        if (*segment_cmd) return cmd_segment(model_path, data_dir, out_dir, threshold);
        if (*metrics_cmd) return cmd_metrics(pred_dir, gt_dir, out_csv);
        if (*vol_cmd) return cmd_volumetrics(masks_dir, lv_flags_path, out_prefix, smooth);
        if (*phantom_cmd) return cmd_phantom(phantom_spec, phantom_out);
        if (*augment_cmd) return cmd_augment(aug_data, aug_seed, aug_out);
        if (*cohort_cmd) return cmd_cohort(cohort_a, cohort_b, paired);
        std::cerr << "error: no subcommand given\n";
        return 1;
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 1;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 2;
    } catch (const NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return 3;
    } catch (const std::invalid_argument& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
}

}  // namespace seganet
