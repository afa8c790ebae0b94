// End-to-end acceptance gate. Each criterion prints exactly one PASS/FAIL
// line; the process exits nonzero if any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include "gradcheck_util.hpp"
#include "meltpool/evaluate.hpp"
#include "meltpool/losses.hpp"
#include "meltpool/surrogate.hpp"

using namespace meltpool;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string read_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(in)), {});
}

int g_failures = 0;

void report(int criterion, const char* what, bool pass, const std::string& detail) {
    std::printf("criterion %2d: %s — %s (%s)\n", criterion, pass ? "PASS" : "FAIL", what,
                detail.c_str());
    std::fflush(stdout);
    if (!pass) ++g_failures;
}

// ---------------------------------------------------------------------------
// Criterion 1: analytic gradients vs central finite differences.

void criterion_gradients() {
    const auto t0 = Clock::now();
    Rng rng(20240901);
    double worst = 0.0;
    std::size_t instances = 0;

    auto sweep = [&](const std::function<Network(std::uint64_t)>& make,
                     const std::function<Tensor()>& input) {
        for (int rep = 0; rep < 20; ++rep) {
            Network net = make(static_cast<std::uint64_t>(rep) + 1);
            const auto r = gradcheck::check_network(net, input(), rng, Mode::Train, 1e-5);
            worst = std::max(worst, r.max_rel_err);
            ++instances;
        }
    };

    sweep([](std::uint64_t s) {
        Network n(NetworkSpec{LayerSpec::fully_connected(5, 4)});
        n.init_parameters(s);
        return n;
    }, [&] { return gradcheck::random_tensor({2, 5}, rng); });
    sweep([](std::uint64_t s) {
        Network n(NetworkSpec{LayerSpec::conv3d(2, 2)});
        n.init_parameters(s);
        return n;
    }, [&] { return gradcheck::random_tensor({1, 2, 3, 3, 4}, rng); });
    sweep([](std::uint64_t) { return Network(NetworkSpec{LayerSpec::upsample()}); },
          [&] { return gradcheck::random_tensor({1, 1, 2, 3, 2}, rng); });
    sweep([](std::uint64_t) { return Network(NetworkSpec{LayerSpec::leaky_relu(0.01)}); },
          [&] { return gradcheck::random_tensor({3, 7}, rng); });
    sweep([](std::uint64_t) {
        return Network(NetworkSpec{LayerSpec::valved_leaky_relu(0.01)});
    }, [&] { return gradcheck::random_tensor({3, 7}, rng); });
    sweep([](std::uint64_t) { return Network(NetworkSpec{LayerSpec::sigmoid()}); },
          [&] { return gradcheck::random_tensor({3, 7}, rng); });
    sweep([](std::uint64_t) { return Network(NetworkSpec{LayerSpec::reshape({7, 2})}); },
          [&] { return gradcheck::random_tensor({2, 14}, rng); });

    const double dt = seconds_since(t0);
    char detail[160];
    std::snprintf(detail, sizeof(detail),
                  "%zu instances, max rel err %.3g, %.1f s", instances, worst, dt);
    report(1, "gradient checks against central differences", worst < 1e-4 && dt < 120.0,
           detail);
}

// ---------------------------------------------------------------------------
// Criterion 2: conservation and source energy balance.

void criterion_conservation() {
    const auto t0 = Clock::now();
    const auto mat = MaterialProperties::ti64();

    SimulationConfig c;
    c.nx = c.ny = c.nz = 32;
    c.power = 0.0;
    c.beam_start_x = 8;
    c.allow_beam_exit = true;
    HeatSolver solver(c, mat);
    Rng rng(5);
    auto& st = solver.state();
    const auto& curve = solver.curve();
    for (std::size_t x = 8; x < 24; ++x)
        for (std::size_t y = 8; y < 24; ++y)
            for (std::size_t z = 8; z < 24; ++z) {
                const std::size_t i = (x * c.ny + y) * c.nz + z;
                const double T = 500.0 + 2500.0 * rng.uniform();
                st.temperature[i] = T;
                st.enthalpy[i] = curve.enthalpy(T);
            }
    const double e0 = solver.total_enthalpy();
    const double dt = stable_timestep(c, mat);
    for (int i = 0; i < 100; ++i) solver.step(dt);
    const double drift = std::abs(solver.total_enthalpy() - e0) / e0;

    SimulationConfig cs = c;
    cs.power = 200.0;
    cs.velocity = 0.5;
    cs.constant_properties = true;
    cs.carve = false;
    HeatSolver heated(cs, mat);
    const double dts = stable_timestep(cs, mat);
    for (int i = 0; i < 60; ++i) heated.step(dts);
    const double absorbed = heated.state().absorbed_energy;
    const double gained = heated.total_enthalpy();
    const double imbalance = std::abs(gained - absorbed) / absorbed;

    const double wall = seconds_since(t0);
    char detail[160];
    std::snprintf(detail, sizeof(detail),
                  "drift %.3g, source imbalance %.3g, %.1f s", drift, imbalance, wall);
    report(2, "enthalpy conservation and source energy balance",
           drift < 1e-6 && imbalance < 0.01 && wall < 60.0, detail);
}

// ---------------------------------------------------------------------------
// Criterion 3: physical sanity of full case runs.

void criterion_physics() {
    const auto t0 = Clock::now();
    const auto mat = MaterialProperties::ti64();
    bool max_principle = true, symmetric = true, voids_monotone = true, melt_monotone = true;
    double worst_asym = 0.0;

    SimulationConfig c;
    c.nx = 64;
    c.ny = 32;
    c.nz = 24;
    c.frame_count = 8;
    c.beam_start_x = 16;
    c.velocity = 0.5;
    c.allow_beam_exit = true;

    // Constant-property run: mirror symmetry about the scan line and the
    // ambient floor.
    SimulationConfig cc = c;
    cc.power = 200.0;
    cc.constant_properties = true;
    const auto sym_run = run_case(cc, mat);
    for (const auto& f : sym_run.frames) {
        for (std::size_t x = 0; x < cc.nx; ++x)
            for (std::size_t y = 0; y < cc.ny / 2; ++y)
                for (std::size_t z = 0; z < cc.nz; ++z) {
                    const double a = f.temperature[(x * cc.ny + y) * cc.nz + z];
                    const double b =
                        f.temperature[(x * cc.ny + (cc.ny - 1 - y)) * cc.nz + z];
                    worst_asym = std::max(worst_asym, std::abs(a - b));
                }
        for (float t : f.temperature)
            if (t < 293.0f) max_principle = false;
    }
    symmetric = worst_asym < 1e-9;

    // Hot run: void fraction never decreases and peak stays bounded.
    SimulationConfig ch = c;
    ch.power = 350.0;
    ch.velocity = 0.4;
    const auto hot = run_case(ch, mat);
    std::size_t prev_voids = 0;
    for (const auto& f : hot.frames) {
        std::size_t v = 0;
        for (auto b : f.voids) v += b;
        if (v < prev_voids) voids_monotone = false;
        prev_voids = v;
        for (float t : f.temperature)
            if (t < 293.0f || t > 10.0f * static_cast<float>(mat.t_vaporization))
                max_principle = false;
    }

    // Melt volume grows with power at fixed speed.
    std::vector<std::size_t> melt;
    for (double p : {180.0, 250.0, 350.0}) {
        SimulationConfig cp = c;
        cp.power = p;
        cp.frame_count = 6;
        const auto r = run_case(cp, mat);
        const auto& last = r.frames.back();
        std::size_t m = 0;
        for (std::size_t i = 0; i < last.temperature.size(); ++i)
            if (last.voids[i] || last.temperature[i] > mat.t_melt()) ++m;
        melt.push_back(m);
    }
    melt_monotone = melt[0] < melt[1] && melt[1] < melt[2];

    const double wall = seconds_since(t0);
    char detail[200];
    std::snprintf(detail, sizeof(detail),
                  "asymmetry %.3g, voids up %d, melt %zu<%zu<%zu, %.1f s", worst_asym,
                  voids_monotone ? 1 : 0, melt[0], melt[1], melt[2], wall);
    report(3, "maximum principle, symmetry, carving and power monotonicity",
           max_principle && symmetric && voids_monotone && melt_monotone && wall < 300.0,
           detail);
}

// ---------------------------------------------------------------------------
// Criterion 4 (+9, 10): the small overfit study.

struct StudyArtifacts {
    std::string t_ckpt, m_ckpt, mt_ckpt, report_csv;
    bool ok = false;
    double rmse = 0.0, iou = 0.0, wall = 0.0;
};

// One full deterministic pipeline run into `dir`.
StudyArtifacts run_study(const std::string& dir) {
    fs::remove_all(dir);
    fs::create_directories(dir);
    StudyArtifacts art;

    SimulationConfig base;
    base.nx = 80;
    base.ny = 32;
    base.nz = 32;
    base.dx = 10e-6;
    base.frame_count = 10;
    base.frame_interval = 20e-6;
    base.beam_start_x = 24;
    base.carve = false;  // conduction-mode study: larger, smoother pools
    const auto dirs = generate_cases(base, {350.0, 450.0}, {0.2, 0.4}, dir + "/raw");
    Dataset ds = build_dataset(dirs, CropSpec{64, 32, 32}, NormalizationSpec{}, 0.75, 9);
    write_dataset(ds, dir + "/ds");

    SurrogateConfig cfg;
    cfg.adopt_manifest(ds.manifest);
    cfg.coarse = {4, 2, 2};
    cfg.stages = 4;
    cfg.c0 = 32;
    cfg.seed = 1234;
    cfg.batch_size = 4;
    cfg.learning_rate = 1e-3;
    cfg.sched_factor = 0.5;
    cfg.sched_patience = 8;
    cfg.min_lr = 1e-6;

    SurrogateConfig tcfg = cfg;
    tcfg.max_epochs = 200;
    tcfg.early_stop_loss = 2e-6;
    const auto t = train_tcnn(ds, tcfg);

    SurrogateConfig mcfg = cfg;
    mcfg.max_epochs = 100;
    mcfg.early_stop_loss = 1e-3;
    const auto m = train_mcnn(ds, mcfg, t.checkpoint);

    SurrogateConfig mtcfg = cfg;
    mtcfg.max_epochs = 200;
    mtcfg.early_stop_loss = 4e-6;
    const auto mt = train_mtcnn(ds, mtcfg, m.checkpoint);

    art.t_ckpt = dir + "/t.ckpt";
    art.m_ckpt = dir + "/m.ckpt";
    art.mt_ckpt = dir + "/mt.ckpt";
    art.report_csv = dir + "/report.csv";
    write_checkpoint(t.checkpoint, art.t_ckpt);
    write_checkpoint(m.checkpoint, art.m_ckpt);
    write_checkpoint(mt.checkpoint, art.mt_ckpt);

    const auto recs = evaluate_dataset(ds, mt.checkpoint, m.checkpoint, true, false);
    emit_report(recs, art.report_csv);
    const auto agg = aggregate_dataset(recs);
    art.rmse = agg.mean_rmse;
    art.iou = agg.mean_iou;
    art.ok = true;
    return art;
}

StudyArtifacts criterion_overfit() {
    const auto t0 = Clock::now();
    StudyArtifacts art = run_study("tmp_acceptance_run1");
    art.wall = seconds_since(t0);
    char detail[160];
    std::snprintf(detail, sizeof(detail), "rmse %.3f%%, mean iou %.2f%%, %.0f s", art.rmse,
                  art.iou, art.wall);
    report(4, "composite overfit on the four-case study",
           art.ok && art.rmse < 3.0 && art.iou > 80.0 && art.wall < 1800.0, detail);
    return art;
}

// ---------------------------------------------------------------------------
// Criterion 5: masking semantics of the composite and the masked loss.

void criterion_masking(const StudyArtifacts& art) {
    bool exact_zero = true, loss_invariant = true;
    if (!art.ok) {
        report(5, "masked voxels are exact zeros and carry no loss", false,
               "study unavailable");
        return;
    }
    const Checkpoint mt = read_checkpoint(art.mt_ckpt);
    const Checkpoint m = read_checkpoint(art.m_ckpt);
    const SurrogateConfig m_cfg = config_of_checkpoint(m);
    const ProcessPoint p{300.0, 600.0, 25.0};

    Network m_net = m.instantiate();
    const Tensor mask_prob = forward_point(m_net, m_cfg, p, Mode::Eval);
    const Tensor composite = predict_composite(p, mt, m);
    Tensor mask(mask_prob.shape());
    std::size_t masked = 0;
    for (std::size_t i = 0; i < mask.numel(); ++i) {
        mask[i] = mask_prob[i] >= 0.5 ? 1.0 : 0.0;
        if (mask[i] != 0.0) {
            ++masked;
            if (composite[i] != 0.0) exact_zero = false;
        }
    }

    // Perturbing the raw MT output inside the mask must leave the masked loss
    // bit-identical.
    Network mt_net = mt.instantiate();
    const SurrogateConfig mt_cfg = config_of_checkpoint(mt);
    Tensor raw = forward_point(mt_net, mt_cfg, p, Mode::Eval);
    Tensor target(raw.shape());
    Rng rng(77);
    for (double& v : target.vec()) v = rng.uniform();
    const double base = masked_mse_loss(raw, target, mask).value;
    Tensor perturbed = raw;
    std::size_t touched = 0;
    for (std::size_t i = 0; i < perturbed.numel() && touched < 50; ++i) {
        if (mask[i] != 0.0) {
            perturbed[i] += 123.456;
            ++touched;
        }
    }
    const double after = masked_mse_loss(perturbed, target, mask).value;
    loss_invariant = touched > 0 && after == base;

    char detail[160];
    std::snprintf(detail, sizeof(detail),
                  "%zu masked voxels all zero: %d, loss delta %.3g", masked,
                  exact_zero ? 1 : 0, after - base);
    report(5, "masked voxels are exact zeros and carry no loss",
           masked > 0 && exact_zero && loss_invariant, detail);
}

// ---------------------------------------------------------------------------
// Criterion 6: valved activation semantics.

void criterion_valve() {
    Rng rng(31);
    bool nonneg = true;
    Network net(NetworkSpec{LayerSpec::valved_leaky_relu(0.01)});
    for (int i = 0; i < 100; ++i) {
        Tensor in({16});
        for (double& v : in.vec()) v = 8.0 * (rng.uniform() - 0.5);
        const Tensor out = net.forward(in, Mode::Eval);
        if (out.min() < 0.0) nonneg = false;
    }

    const Tensor neg({2}, {-1.5, 0.5});
    net.forward(neg, Mode::Train);
    const Tensor g = net.backward(Tensor::full({2}, 1.0));
    const bool train_grad = g[0] != 0.0;

    char detail[120];
    std::snprintf(detail, sizeof(detail), "eval min >= 0: %d, train grad at -1.5: %.3g",
                  nonneg ? 1 : 0, g[0]);
    report(6, "valved activation clamps in eval and leaks gradient in train",
           nonneg && train_grad, detail);
}

// ---------------------------------------------------------------------------
// Criterion 7: plateau scheduler on a flat loss sequence.

void criterion_scheduler() {
    Adam opt;  // lr 2e-4
    PlateauScheduler sched;  // factor 0.2, patience 3
    int reductions = 0;
    for (int i = 0; i < 5; ++i) reductions += sched.step(1.0, opt) ? 1 : 0;
    const bool pass =
        reductions == 1 && std::abs(opt.learning_rate() - 4e-5) < 1e-15;
    char detail[120];
    std::snprintf(detail, sizeof(detail), "%d reduction(s), lr %.6g", reductions,
                  opt.learning_rate());
    report(7, "flat losses trigger exactly one rate cut 2e-4 -> 4e-5", pass, detail);
}

// ---------------------------------------------------------------------------
// Criterion 8: round trips.

void criterion_roundtrips(const StudyArtifacts& art) {
    bool norm_ok = true, ds_ok = false, ckpt_ok = false, report_ok = false;

    // Normalization round trip within one 32-bit ulp.
    NormalizationSpec norm;
    Rng rng(13);
    for (int i = 0; i < 10000; ++i) {
        const double T = norm.t_min + (norm.t_max - norm.t_min) * rng.uniform();
        const auto n32 = static_cast<float>(norm.normalize(T));
        const double back = norm.denormalize(n32);
        const float t32 = static_cast<float>(T);
        const float b32 = static_cast<float>(back);
        const float ulp = std::nextafterf(t32, std::numeric_limits<float>::infinity()) - t32;
        if (std::abs(b32 - t32) > ulp) norm_ok = false;
    }

    if (art.ok) {
        // Dataset: read twice, write again, compare bytes.
        const Dataset d1 = read_dataset("tmp_acceptance_run1/ds");
        write_dataset(d1, "tmp_acceptance_rt_ds");
        ds_ok = read_bytes("tmp_acceptance_run1/ds/samples.bin") ==
                read_bytes("tmp_acceptance_rt_ds/samples.bin");
        fs::remove_all("tmp_acceptance_rt_ds");

        const Checkpoint ck = read_checkpoint(art.mt_ckpt);
        write_checkpoint(ck, "tmp_acceptance_rt.ckpt");
        ckpt_ok = read_bytes(art.mt_ckpt) == read_bytes("tmp_acceptance_rt.ckpt");
        fs::remove("tmp_acceptance_rt.ckpt");

        // Report: parse, re-aggregate, compare with the original aggregation.
        const auto recs = parse_report(art.report_csv);
        emit_report(recs, "tmp_acceptance_rt.csv");
        report_ok = read_bytes(art.report_csv) == read_bytes("tmp_acceptance_rt.csv");
        const auto a1 = aggregate_dataset(recs);
        const auto a2 = aggregate_dataset(parse_report("tmp_acceptance_rt.csv"));
        report_ok = report_ok && a1.mean_rmse == a2.mean_rmse &&
                    a1.stdev_rmse == a2.stdev_rmse && a1.mean_iou == a2.mean_iou;
        fs::remove("tmp_acceptance_rt.csv");
    }

    char detail[160];
    std::snprintf(detail, sizeof(detail), "norm %d, dataset %d, checkpoint %d, report %d",
                  norm_ok, ds_ok, ckpt_ok, report_ok);
    report(8, "normalization, dataset, checkpoint and report round-trips",
           norm_ok && ds_ok && ckpt_ok && report_ok, detail);
}

// ---------------------------------------------------------------------------
// Criterion 9: inference cost is independent of the queried time.

void criterion_constant_time(const StudyArtifacts& art) {
    if (!art.ok) {
        report(9, "inference wall time is flat across query times", false,
               "study unavailable");
        return;
    }
    const Checkpoint mt = read_checkpoint(art.mt_ckpt);
    const Checkpoint m = read_checkpoint(art.m_ckpt);
    // Warm-up.
    infer_field(300.0, 600.0, 5.0, mt, m);

    std::vector<double> medians;
    for (double t_us : {5.0, 50.0, 125.0, 250.0, 500.0}) {
        std::vector<double> times;
        for (int rep = 0; rep < 7; ++rep) {
            const auto t0 = Clock::now();
            infer_field(300.0, 600.0, t_us, mt, m);
            times.push_back(seconds_since(t0));
        }
        std::sort(times.begin(), times.end());
        medians.push_back(times[times.size() / 2]);
    }
    const double lo = *std::min_element(medians.begin(), medians.end());
    const double hi = *std::max_element(medians.begin(), medians.end());
    const double spread = (hi - lo) / lo;
    char detail[120];
    std::snprintf(detail, sizeof(detail), "median %.3f..%.3f s, spread %.1f%%", lo, hi,
                  100.0 * spread);
    report(9, "inference wall time is flat across query times", spread < 0.10, detail);
}

// ---------------------------------------------------------------------------
// Criterion 10: full-pipeline determinism.

void criterion_determinism(const StudyArtifacts& first) {
    if (!first.ok) {
        report(10, "independent study runs are bitwise identical", false,
               "study unavailable");
        return;
    }
    const StudyArtifacts second = run_study("tmp_acceptance_run2");
    const bool ckpts = read_bytes(first.t_ckpt) == read_bytes(second.t_ckpt) &&
                       read_bytes(first.m_ckpt) == read_bytes(second.m_ckpt) &&
                       read_bytes(first.mt_ckpt) == read_bytes(second.mt_ckpt);
    const bool reports = read_bytes(first.report_csv) == read_bytes(second.report_csv);
    char detail[120];
    std::snprintf(detail, sizeof(detail), "checkpoints identical %d, reports identical %d",
                  ckpts, reports);
    report(10, "independent study runs are bitwise identical", ckpts && reports, detail);
    fs::remove_all("tmp_acceptance_run2");
}

}  // namespace

int main() {
    criterion_gradients();
    criterion_conservation();
    criterion_physics();
    const StudyArtifacts study = criterion_overfit();
    criterion_masking(study);
    criterion_valve();
    criterion_scheduler();
    criterion_roundtrips(study);
    criterion_constant_time(study);
    criterion_determinism(study);
    fs::remove_all("tmp_acceptance_run1");
    if (g_failures) {
        std::printf("%d criterion(s) failed\n", g_failures);
        return 1;
    }
    std::printf("all criteria passed\n");
    return 0;
}
