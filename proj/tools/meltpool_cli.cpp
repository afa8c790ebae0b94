// Command-line front end: generate | preprocess | train | eval | infer.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "meltpool/blob_io.hpp"
#include "meltpool/evaluate.hpp"
#include "meltpool/surrogate.hpp"

namespace fs = std::filesystem;
using namespace meltpool;

namespace {

constexpr char kFieldMagic[8] = {'M', 'P', 'F', 'I', 'E', 'L', 'D', '1'};

std::vector<double> parse_list(const std::string& s) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) out.push_back(std::stod(item));
    }
    if (out.empty()) throw ConfigError("expected a comma-separated list, got '" + s + "'");
    return out;
}

std::array<std::size_t, 3> parse_dims(const std::string& s) {
    std::array<std::size_t, 3> d{};
    char sep1, sep2;
    std::stringstream ss(s);
    if (!(ss >> d[0] >> sep1 >> d[1] >> sep2 >> d[2]) || sep1 != 'x' || sep2 != 'x')
        throw ConfigError("expected dims like 64x32x32, got '" + s + "'");
    return d;
}

unsigned env_workers() {
    if (const char* w = std::getenv("MELTPOOL_WORKERS")) {
        const long n = std::strtol(w, nullptr, 10);
        if (n >= 1) return static_cast<unsigned>(n);
    }
    return 1;
}

std::vector<std::string> find_case_dirs(const std::string& root) {
    std::vector<std::string> dirs;
    if (!fs::is_directory(root)) throw IoError("not a directory: " + root);
    for (const auto& e : fs::directory_iterator(root))
        if (e.is_directory() && fs::exists(e.path() / "meta.json"))
            dirs.push_back(e.path().string());
    std::sort(dirs.begin(), dirs.end());
    if (dirs.empty()) throw IoError("no case directories (meta.json) under " + root);
    return dirs;
}

int cmd_generate(const std::string& material, const std::string& powers,
                 const std::string& velocities, const std::string& out,
                 const std::string& grid, double dx, std::size_t frames,
                 double frame_interval, double beam_radius, const std::string& absorp_model,
                 bool renormalize, double beam_start_x) {
    SimulationConfig base;
    const auto g = parse_dims(grid);
    base.nx = g[0];
    base.ny = g[1];
    base.nz = g[2];
    base.dx = dx;
    base.frame_count = frames;
    base.frame_interval = frame_interval;
    base.beam_radius = beam_radius;
    base.beam_start_x = beam_start_x;
    base.material = material;
    base.renormalize_flux = renormalize;
    if (absorp_model == "verbatim")
        base.absorptivity_model = AbsorptivityModel::Verbatim;
    else if (absorp_model == "fixed")
        base.absorptivity_model = AbsorptivityModel::Fixed;
    else if (absorp_model == "normalized-enthalpy")
        base.absorptivity_model = AbsorptivityModel::NormalizedEnthalpy;
    else
        throw ConfigError("unknown absorptivity model '" + absorp_model + "'");

    std::vector<double> v_m_s;
    for (double v : parse_list(velocities)) v_m_s.push_back(v * 1e-3);  // mm/s -> m/s
    const auto dirs =
        generate_cases(base, parse_list(powers), v_m_s, out, env_workers());
    std::cout << "generated " << dirs.size() << " cases under " << out << "\n";
    return 0;
}

int cmd_preprocess(const std::string& in, const std::string& out, const std::string& crop_s,
                   const std::string& tmax, double split_fraction, std::uint64_t seed) {
    const auto dirs = find_case_dirs(in);
    const auto cd = parse_dims(crop_s);
    CropSpec crop{cd[0], cd[1], cd[2]};
    NormalizationSpec norm;
    if (tmax == "auto") {
        std::vector<CaseResult> cases;
        for (const auto& d : dirs) cases.push_back(read_case_dir(d));
        const auto mat = MaterialProperties::by_name(cases.front().material.name);
        norm.t_max = compute_clip_threshold(cases, mat.t_melt(), norm.clip_percentile);
    } else {
        norm.t_max = std::stod(tmax);
    }
    Dataset ds = build_dataset(dirs, crop, norm, split_fraction, seed);
    write_dataset(ds, out);
    std::size_t train = 0, val = 0;
    for (const auto& c : ds.manifest.cases) (c.split == Split::Train ? train : val)++;
    std::cout << "dataset: " << ds.records.size() << " samples, " << train << " train / "
              << val << " val cases, t_max=" << norm.t_max << " K\n";
    return 0;
}

void write_epoch_log(const std::vector<EpochStat>& history, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write epoch log: " + path);
    for (const auto& s : history) {
        nlohmann::json j{{"epoch", s.epoch}, {"loss", s.mean_loss}, {"lr", s.learning_rate}};
        out << j.dump() << "\n";
    }
}

int cmd_train(const std::string& dataset_dir, const std::string& role_s, std::uint64_t seed,
              const std::string& out, const std::string& t_ckpt, const std::string& m_ckpt,
              std::size_t c0, std::size_t stages, std::size_t epochs, std::size_t batch,
              double early_stop_loss, bool no_warm_start, const std::string& log_path) {
    const Role role = role_from_name(role_s);
    Dataset ds = read_dataset(dataset_dir);

    SurrogateConfig cfg;
    cfg.adopt_manifest(ds.manifest);
    cfg.c0 = c0;
    cfg.stages = stages;
    cfg.seed = seed;
    cfg.max_epochs = epochs;
    cfg.batch_size = batch;
    cfg.early_stop_loss = early_stop_loss;
    cfg.warm_start_masker = !no_warm_start;
    for (int a = 0; a < 3; ++a) {
        const std::size_t dim = a == 0 ? cfg.crop.lx : (a == 1 ? cfg.crop.ly : cfg.crop.lz);
        if (dim % (std::size_t{1} << stages) != 0)
            throw ConfigError("crop dim " + std::to_string(dim) + " is not divisible by 2^" +
                              std::to_string(stages));
        cfg.coarse[a] = dim >> stages;
    }

    auto progress = [&](const EpochStat& s) {
        std::cout << "epoch " << s.epoch << " loss " << s.mean_loss << " lr "
                  << s.learning_rate << "\n";
    };

    TrainResult result;
    if (role == Role::T) {
        result = train_tcnn(ds, cfg, progress);
    } else if (role == Role::M) {
        if (t_ckpt.empty())
            throw ConfigError("train --role m requires --t-checkpoint (pre-trained T-CNN)");
        result = train_mcnn(ds, cfg, read_checkpoint(t_ckpt), progress);
    } else {
        if (m_ckpt.empty())
            throw ConfigError("train --role mt requires --m-checkpoint (trained masker)");
        result = train_mtcnn(ds, cfg, read_checkpoint(m_ckpt), progress);
    }
    write_checkpoint(result.checkpoint, out);
    write_epoch_log(result.history, log_path.empty() ? out + ".log" : log_path);
    std::cout << "wrote " << out << " after " << result.history.size() << " epochs\n";
    return 0;
}

int cmd_eval(const std::string& dataset_dir, const std::string& mt_path,
             const std::string& m_path, const std::string& report,
             const std::string& slices_dir, const std::string& split) {
    Dataset ds = read_dataset(dataset_dir);
    const Checkpoint mt = read_checkpoint(mt_path);
    const Checkpoint m = read_checkpoint(m_path);
    const bool inc_train = split == "train" || split == "all";
    const bool inc_val = split == "val" || split == "all";
    auto records = evaluate_dataset(ds, mt, m, inc_train, inc_val, env_workers());
    emit_report(records, report);
    const auto agg = aggregate_dataset(records);
    std::cout << "records " << agg.count << "  rmse " << agg.mean_rmse << " +/- "
              << agg.stdev_rmse << " %  iou " << agg.mean_iou << " +/- " << agg.stdev_iou
              << " %\n";

    if (!slices_dir.empty()) {
        fs::create_directories(slices_dir);
        const SurrogateConfig cfg = config_of_checkpoint(mt);
        // Mid-y cross-section of the last frame of each case, prediction vs
        // ground truth.
        for (const auto& c : ds.manifest.cases) {
            const SampleRecord* last = nullptr;
            for (const auto& r : ds.records)
                if (r.case_id == c.id && (!last || r.frame_index > last->frame_index))
                    last = &r;
            if (!last) continue;
            Tensor pred = predict_composite(last->point, mt, m);
            std::vector<double> truth(last->field.begin(), last->field.end());
            const std::size_t lx = cfg.crop.lx, ly = cfg.crop.ly, lz = cfg.crop.lz;
            emit_slice_image(pred.vec(), lx, ly, lz, 'y', ly / 2,
                             slices_dir + "/" + c.id + "_pred.pgm");
            emit_slice_image(truth, lx, ly, lz, 'y', ly / 2,
                             slices_dir + "/" + c.id + "_truth.pgm");
        }
    }
    return 0;
}

int cmd_infer(double p, double v, double t, const std::string& mt_path,
              const std::string& m_path, const std::string& out) {
    const Checkpoint mt = read_checkpoint(mt_path);
    const Checkpoint m = read_checkpoint(m_path);
    const auto result = infer_field(p, v, t, mt, m);
    const auto& shape = result.field_kelvin.shape();
    std::vector<char> payload;
    for (int a = 2; a < 5; ++a) {
        const auto d = static_cast<std::uint32_t>(shape[a]);
        const auto* pb = reinterpret_cast<const char*>(&d);
        payload.insert(payload.end(), pb, pb + 4);
    }
    for (double dv : result.field_kelvin.vec()) {
        const auto f = static_cast<float>(dv);
        const auto* pb = reinterpret_cast<const char*>(&f);
        payload.insert(payload.end(), pb, pb + 4);
    }
    write_blob(out, kFieldMagic, payload.data(), payload.size());
    if (result.out_of_range)
        std::cout << "warning: process point outside training ranges\n";
    std::cout << "field " << shape[2] << "x" << shape[3] << "x" << shape[4] << " offset "
              << result.crop_offset[0] << "," << result.crop_offset[1] << ","
              << result.crop_offset[2] << "  min " << result.field_kelvin.min() << " K  max "
              << result.field_kelvin.max() << " K\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"melt pool thermal-field surrogate toolkit"};
    app.require_subcommand(1);

    // generate
    auto* gen = app.add_subcommand("generate", "run the physics generator over a case grid");
    std::string material = "ti64", powers, velocities, out_dir, grid = "128x64x32";
    std::string absorp_model = "normalized-enthalpy";
    double dx = 10e-6, frame_interval = 5e-6, beam_radius = 50e-6, beam_start_x = 20;
    std::size_t frames = 100;
    bool renormalize = false;
    gen->add_option("--material", material, "ti64 or ss316l");
    gen->add_option("--powers", powers, "comma-separated laser powers, W")->required();
    gen->add_option("--velocities", velocities, "comma-separated scan velocities, mm/s")
        ->required();
    gen->add_option("--out", out_dir, "output directory")->required();
    gen->add_option("--grid", grid, "domain cells, e.g. 128x64x32");
    gen->add_option("--dx", dx, "cell size, m");
    gen->add_option("--frames", frames, "frames per case");
    gen->add_option("--frame-interval", frame_interval, "frame spacing, s");
    gen->add_option("--beam-radius", beam_radius, "beam radius r0, m");
    gen->add_option("--beam-start-x", beam_start_x, "beam start, cells");
    gen->add_option("--absorptivity-model", absorp_model,
                    "verbatim | normalized-enthalpy | fixed");
    gen->add_flag("--renormalize-flux", renormalize, "integrate the source to P, not P/2");

    // preprocess
    auto* pre = app.add_subcommand("preprocess", "build a normalized, cropped dataset");
    std::string pre_in, pre_out, crop_s = "64x32x32", tmax = "6500";
    double split_fraction = 0.85;
    std::uint64_t pre_seed = 0;
    pre->add_option("--in", pre_in, "raw case directory")->required();
    pre->add_option("--out", pre_out, "dataset directory")->required();
    pre->add_option("--crop", crop_s, "crop window, e.g. 64x32x32");
    pre->add_option("--tmax", tmax, "clip temperature in K, or 'auto' for the percentile");
    pre->add_option("--split-fraction", split_fraction, "train fraction (case-level)");
    pre->add_option("--seed", pre_seed, "split seed");

    // train
    auto* tr = app.add_subcommand("train", "train one of the T / M / MT networks");
    std::string ds_dir, role_s, tr_out, t_ckpt, m_ckpt, log_path;
    std::uint64_t tr_seed = 0;
    std::size_t c0 = 128, stages = 4, epochs = 300, batch = 4;
    double early_stop_loss = 0.0;
    bool no_warm_start = false;
    tr->add_option("--dataset", ds_dir, "dataset directory")->required();
    tr->add_option("--role", role_s, "t, m or mt")->required();
    tr->add_option("--seed", tr_seed, "init/shuffle seed");
    tr->add_option("--out", tr_out, "checkpoint path")->required();
    tr->add_option("--t-checkpoint", t_ckpt, "pre-trained T-CNN (role m)");
    tr->add_option("--m-checkpoint", m_ckpt, "trained masker (role mt)");
    tr->add_option("--c0", c0, "channels of the first feature map");
    tr->add_option("--stages", stages, "upsample stages");
    tr->add_option("--epochs", epochs, "max epochs");
    tr->add_option("--batch", batch, "batch size");
    tr->add_option("--early-stop-loss", early_stop_loss, "stop when epoch loss reaches this");
    tr->add_flag("--no-warm-start", no_warm_start, "do not seed the masker from T weights");
    tr->add_option("--log", log_path, "per-epoch metrics log path");

    // eval
    auto* ev = app.add_subcommand("eval", "metrics report over a dataset");
    std::string ev_ds, ev_mt, ev_m, report, slices_dir, split = "all";
    ev->add_option("--dataset", ev_ds, "dataset directory")->required();
    ev->add_option("--mt-checkpoint", ev_mt, "MT (or T) checkpoint")->required();
    ev->add_option("--m-checkpoint", ev_m, "masker checkpoint")->required();
    ev->add_option("--report", report, "CSV report path")->required();
    ev->add_option("--slices", slices_dir, "directory for cross-section images");
    ev->add_option("--split", split, "train | val | all");

    // infer
    auto* inf = app.add_subcommand("infer", "single-pass field prediction");
    double in_p = 0, in_v = 0, in_t = 0;
    std::string inf_mt, inf_m, inf_out;
    inf->add_option("--p", in_p, "laser power, W")->required();
    inf->add_option("--v", in_v, "scan velocity, mm/s")->required();
    inf->add_option("--t", in_t, "time, microseconds")->required();
    inf->add_option("--mt-checkpoint", inf_mt, "MT checkpoint")->required();
    inf->add_option("--m-checkpoint", inf_m, "masker checkpoint")->required();
    inf->add_option("--out", inf_out, "output field blob")->required();

    try {
        app.parse(argc, argv);
        if (gen->parsed())
            return cmd_generate(material, powers, velocities, out_dir, grid, dx, frames,
                                frame_interval, beam_radius, absorp_model, renormalize,
                                beam_start_x);
        if (pre->parsed())
            return cmd_preprocess(pre_in, pre_out, crop_s, tmax, split_fraction, pre_seed);
        if (tr->parsed())
            return cmd_train(ds_dir, role_s, tr_seed, tr_out, t_ckpt, m_ckpt, c0, stages,
                             epochs, batch, early_stop_loss, no_warm_start, log_path);
        if (ev->parsed()) return cmd_eval(ev_ds, ev_mt, ev_m, report, slices_dir, split);
        if (inf->parsed()) return cmd_infer(in_p, in_v, in_t, inf_mt, inf_m, inf_out);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    } catch (const IoError& e) {
        std::cerr << "error: io: " << e.what() << "\n";
        return 3;
    } catch (const ConfigError& e) {
        std::cerr << "error: config: " << e.what() << "\n";
        return 4;
    } catch (const DimensionError& e) {
        std::cerr << "error: config: " << e.what() << "\n";
        return 4;
    } catch (const FormatError& e) {
        std::cerr << "error: format: " << e.what() << "\n";
        return 5;
    } catch (const NumericError& e) {
        std::cerr << "error: numeric: " << e.what() << "\n";
        return 6;
    } catch (const std::exception& e) {
        std::cerr << "error: internal: " << e.what() << "\n";
        return 7;
    }
    return 0;
}
