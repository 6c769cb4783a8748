// Acceptance checks A1-A8. One PASS/FAIL line per criterion; the exit status
// is nonzero when any criterion fails.

#include "../dense_oracle.hpp"
#include "cli.hpp"
#include "unloc/config.hpp"
#include "unloc/dataset.hpp"
#include "unloc/gradcheck_registry.hpp"
#include "unloc/init.hpp"
#include "unloc/io.hpp"
#include "unloc/metrics.hpp"
#include "unloc/objective.hpp"
#include "unloc/slotfilter.hpp"
#include "unloc/sync.hpp"
#include "unloc/training.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <numbers>
#include <sstream>
#include <unistd.h>

using namespace unloc;

namespace {

struct Verdict {
    bool pass = false;
    std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

fs::path work_dir() {
    static const fs::path dir = [] {
        const fs::path p = fs::temp_directory_path() / ("unloc_acceptance_" + std::to_string(::getpid()));
        fs::remove_all(p);
        fs::create_directories(p);
        return p;
    }();
    return dir;
}

int cli_run(std::vector<std::string> args, std::string* captured = nullptr) {
    std::ostringstream out;
    const int code = cli::run(args, out, std::cerr);
    if (captured) *captured = out.str();
    return code;
}

// ---------------------------------------------------------------- A1

Verdict a1_gradients() {
    const auto t0 = Clock::now();
    std::size_t passed = 0;
    double worst = 0.0;
    std::string failures;
    for (const GradCheckEntry& e : gradcheck_registry()) {
        const GradCheckRecord r = run_gradcheck(e);
        std::cout << "    " << format_record(r) << '\n';
        if (r.passed) ++passed;
        else failures += ' ' + r.name;
        worst = std::max(worst, r.result.max_rel_error);
    }
    const GradCheckRecord flipped = run_gradcheck(sign_flip_fixture());
    const bool fixture_caught = !flipped.passed && flipped.name.find("linear") != std::string::npos;
    const double elapsed = seconds_since(t0);
    const std::size_t n = gradcheck_registry().size();
    return {passed == n && n >= 12 && fixture_caught && elapsed < 300.0,
            fmt("%zu/%zu modules within tolerance, worst %.2e, sign-flip fixture %s, %.1f s%s", passed, n, worst,
                fixture_caught ? "rejected" : "NOT rejected", elapsed, failures.empty() ? "" : ("; failed:" + failures).c_str())};
}

// ---------------------------------------------------------------- A2 and A7

const std::vector<std::string> kSubsets{"L1", "L2", "C1", "R", "L1,C1,R", "L1,L2,R", "all"};

struct OverfitRun {
    fs::path cfg, dataset, checkpoint, eval_dir;
    bool ok = false;
    std::string error;
    double train_seconds = 0.0;
};

/// 16-sample dataset at desk dimensions, 500 steps, then eval of every
/// subset from the one checkpoint.
const OverfitRun& overfit_run() {
    static const OverfitRun run = [] {
        OverfitRun r;
        const fs::path dir = work_dir() / "overfit";
        fs::create_directories(dir);
        r.cfg = dir / "run.cfg";
        r.dataset = dir / "dataset";
        r.checkpoint = dir / "run" / "checkpoint.unck";
        r.eval_dir = dir / "eval";
        write_file_atomic(r.cfg, "dataset=" + r.dataset.string() +
                                     "\nsynth_duration=4\nseed=7\nsteps=500\nbatch_size=6\nlr=3e-4\n"
                                     "grid_bins=48,36,16\nimage_height=64\nimage_width=64\nfeature_dim=128\n"
                                     "slots=8\niterations=3\n");
        if (cli_run({"synth-gen", "--config", r.cfg.string()}) != 0) {
            r.error = "synth-gen failed";
            return r;
        }
        const auto t0 = Clock::now();
        if (cli_run({"train", "--config", r.cfg.string(), "--out", (dir / "run").string()}) != 0) {
            r.error = "train failed";
            return r;
        }
        r.train_seconds = seconds_since(t0);
        std::vector<std::string> args{"eval", "--config", r.cfg.string(), "--checkpoint", r.checkpoint.string(), "--out",
                                      r.eval_dir.string()};
        for (const std::string& s : kSubsets) args.insert(args.end(), {"--sensors", s});
        if (cli_run(args) != 0) {
            r.error = "eval failed";
            return r;
        }
        r.ok = true;
        return r;
    }();
    return run;
}

Verdict a2_overfit() {
    const OverfitRun& run = overfit_run();
    if (!run.ok) return {false, run.error};
    const double diameter = read_meta(run.dataset).world_diameter;
    const std::size_t samples = read_manifest(run.dataset / kManifestName).size();
    const std::vector<MetricsReport> reports = parse_metrics_csv(read_file(run.eval_dir / "metrics.csv"));
    const auto all = std::find_if(reports.begin(), reports.end(), [](const MetricsReport& r) { return r.label == "L1,L2,C1,C2,C3,R"; });
    if (all == reports.end()) return {false, "no all-sensor row in metrics.csv"};
    const double bound = 0.05 * diameter;
    const bool pass = samples == 16 && all->mean_translation < bound && all->mean_rotation_deg < 2.0 && run.train_seconds < 1800.0;
    return {pass, fmt("%zu samples; translation %.3f m (bound %.3f m = 5%% of %.2f m); rotation %.3f deg (bound 2), "
                      "geodesic %.3f deg; 500 steps in %.1f s",
                      samples, all->mean_translation, bound, diameter, all->mean_rotation_deg, all->mean_geodesic_deg,
                      run.train_seconds)};
}

Verdict a7_on_demand() {
    const OverfitRun& run = overfit_run();
    if (!run.ok) return {false, run.error};
    const std::vector<MetricsReport> reports = parse_metrics_csv(read_file(run.eval_dir / "metrics.csv"));
    bool rows_ok = reports.size() == kSubsets.size();
    for (std::size_t i = 0; rows_ok && i < reports.size(); ++i) {
        const std::vector<SensorId> expect = kSubsets[i] == "all" ? std::vector<SensorId>(kAllSensors.begin(), kAllSensors.end())
                                                                  : parse_sensor_list(kSubsets[i]);
        rows_ok = reports[i].label == sensor_list_string(expect) && reports[i].count == 16;
    }

    const Checkpoint ckpt = read_checkpoint(run.checkpoint);
    UnlocModel model(ckpt.model, ckpt.seed);
    restore(ckpt, model, nullptr);
    const std::vector<SensorSample> samples =
        load_samples(run.dataset, kAllSensors, ckpt.model.image_h, ckpt.model.image_w);
    std::size_t compared = 0, mismatched = 0;
    for (const SensorSample& s : samples) {
        const std::uint64_t seed = sample_noise_seed(ckpt.seed, s);
        const Prediction full = model.predict(s, kAllSensors, seed);
        for (SensorId id : kAllSensors) {
            const std::array<SensorId, 1> single{id};
            const Prediction p = model.predict(s, single, seed);
            ++compared;
            if (!(p.fused == p.per_sensor.at(id)) || !(p.fused == full.per_sensor.at(id))) ++mismatched;
        }
    }
    return {rows_ok && mismatched == 0,
            fmt("%zu subsets evaluated from one checkpoint%s; singleton fused == per-sensor pose on %zu/%zu (sample, sensor) pairs",
                reports.size(), rows_ok ? "" : " (subset rows wrong)", compared - mismatched, compared)};
}

// ---------------------------------------------------------------- A3

Verdict a3_sparse_oracle() {
    Rng rng(303);
    std::uniform_int_distribution<Index> side(2, 8);
    std::uniform_real_distribution<double> fill(0.05, 0.4);
    int inputs = 0;
    double worst = 0.0;
    for (int trial = 0; trial < 120; ++trial) {
        const bool wrap = trial % 2 == 1;
        const Coord3 shape = trial < 4 ? Coord3{8, 8, 8} : Coord3{side(rng), side(rng), side(rng)};
        const SparseTensor3D x = oracle::random_sparse(shape, 2, fill(rng), rng);
        const oracle::Dense3 dx = oracle::densify(x);
        const CbBlock cb("cb", 2, 3, wrap, rng);
        const CbdBlock cbd("cbd", 2, 3, wrap, rng);
        const SparseBackbone bb("bb", 2, 32, wrap, rng);
        worst = std::max({worst, oracle::max_abs_diff(cb(x), oracle::cb(dx, cb)), oracle::max_abs_diff(cbd(x), oracle::cbd(dx, cbd)),
                          oracle::max_abs_diff(bb(x), oracle::backbone(dx, bb))});
        ++inputs;
    }
    return {inputs >= 100 && worst <= 1e-10,
            fmt("%d random sparse inputs (grids up to 8x8x8, wrap on and off), CB/CBD/backbone worst |diff| %.2e", inputs, worst)};
}

// ---------------------------------------------------------------- A4

Verdict a4_slot_contracts() {
    Rng rng(404);
    bool shapes = true;
    double worst_col = 0.0;
    for (SoftmaxAxis axis : {SoftmaxAxis::slots, SoftmaxAxis::inputs})
        for (const auto [n, k] : std::vector<std::pair<Index, Index>>{{1, 1}, {1, 5}, {7, 3}, {64, 20}, {5, 8}, {300, 4}}) {
            const SlotParams p("slot", SlotConfig{k, 8, 1, axis}, rng);
            AttentionTrace tr;
            const Var out = attention_step(Var(normal({n, 8}, 1.0, rng)), init_slots(p, 3), p, &tr);
            shapes = shapes && tr.affinity.value().shape() == Shape{n, k} && out.value().shape() == Shape{k, 8};
            const RowMatrixXd w = tr.weights.value().matrix(n);
            for (Index j = 0; j < k; ++j) worst_col = std::max(worst_col, std::abs(w.col(j).sum() - 1.0));
        }

    const SlotParams lin("slot", SlotConfig{20, 16, 3, SoftmaxAxis::slots}, rng);
    std::vector<double> mults;
    for (Index n : {64, 128, 256}) {
        AffinityCounter c;
        slot_filter(Var(normal({n, 16}, 1.0, rng)), lin, 1, &c);
        mults.push_back(static_cast<double>(c.multiplies));
    }
    const double r1 = mults[1] / mults[0], r2 = mults[2] / mults[1];
    const bool linear = std::abs(r1 - 2.0) <= 0.2 && std::abs(r2 - 2.0) <= 0.2;

    const SlotParams inp("slot", SlotConfig{6, 8, 3, SoftmaxAxis::inputs}, rng);
    const Tensor x = normal({9, 8}, 1.0, rng);
    Tensor dup({27, 8});
    for (Index i = 0; i < 9; ++i)
        for (Index c = 0; c < 3; ++c) dup.matrix(27).row(3 * i + c) = x.matrix(9).row(i);
    const double dup_diff =
        (slot_filter(Var(dup), inp, 21).value().data() - slot_filter(Var(x), inp, 21).value().data()).cwiseAbs().maxCoeff();

    return {shapes && worst_col <= 1e-12 && linear && dup_diff <= 1e-9,
            fmt("affinity N x K %s; max |column sum - 1| %.1e; multiply ratios %.3f, %.3f per doubling; duplication diff %.1e",
                shapes ? "ok" : "WRONG", worst_col, r1, r2, dup_diff)};
}

// ---------------------------------------------------------------- A5

Pose6DoF curve(Timestamp t) {
    const double s = static_cast<double>(t) * 1e-9;
    Pose6DoF p;
    p.translation = Eigen::Vector3d(20 * std::sin(0.1 * s), 15 * std::cos(0.07 * s) + s, 0.2 * std::sin(0.3 * s));
    p.rotation = Eigen::Vector3d(wrap_angle(0.5 * s), 0.02 * std::sin(s), 0.03 * std::cos(0.5 * s));
    return p;
}

Verdict a5_sync_oracle() {
    // k-d tree against a linear scan
    using Tree = KdTree<double, 3>;
    Rng rng(505);
    std::uniform_real_distribution<double> u(-100, 100);
    std::vector<Tree::Point> pts(10000);
    for (auto& p : pts) p = Tree::Point(u(rng), u(rng), u(rng));
    const Tree tree(pts);
    int tree_miss = 0;
    for (int q = 0; q < 1000; ++q) {
        const Tree::Point x(u(rng), u(rng), u(rng));
        std::size_t best = 0;
        double bd = INFINITY;
        for (std::size_t i = 0; i < pts.size(); ++i) {
            const double d = (pts[i] - x).squaredNorm();
            if (d < bd) bd = d, best = i;
        }
        tree_miss += tree.nearest(x) != best;
    }

    // align on a synthetic 4/16/20 Hz run against brute-force matching
    RunConfig rc;
    rc.seed = 5;
    rc.synth.duration = 6.0;
    const fs::path root = work_dir() / "sync_run";
    emit_dataset(rc.synth_config(), root);
    const auto streams = scan_streams(root);
    const GroundTruthStream gt = read_ground_truth(root / "gt.csv");
    const AlignResult ar = align(streams, gt);
    std::size_t align_miss = streams.at(SensorId::R).timestamps.size() == ar.samples.size() ? 0 : 1;
    for (std::size_t k = 0; k < ar.samples.size(); ++k) {
        const AlignedSample& smp = ar.samples[k];
        align_miss += smp.radar_timestamp != streams.at(SensorId::R).timestamps[k];
        align_miss += !(smp.pose == interpolate_pose(gt, smp.radar_timestamp));
        for (SensorId s : kAllSensors) {
            if (s == SensorId::R) continue;
            const auto& ts = streams.at(s).timestamps;
            std::size_t best = 0;
            double bd = INFINITY;
            for (std::size_t i = 0; i < ts.size(); ++i) {
                const double d = (interpolate_pose(gt, ts[i]).translation - smp.pose.translation).squaredNorm();
                if (d < bd) bd = d, best = i;
            }
            align_miss += smp.frame.at(s) != best;
        }
    }
    const std::array<std::size_t, 3> counts{streams.at(SensorId::R).timestamps.size(), streams.at(SensorId::C1).timestamps.size(),
                                            streams.at(SensorId::L1).timestamps.size()};

    // gap_fill with noiseless odometry
    const Timestamp sec = 1'000'000'000, dt = sec / 10;
    GroundTruthStream full, holey;
    for (Timestamp t = 0; t <= 6 * sec; t += dt) full.push_back(t, curve(t));
    std::vector<OdometryIncrement> odo;
    for (std::size_t i = 0; i + 1 < full.size(); ++i)
        odo.push_back({full.timestamps[i], full.timestamps[i + 1], relative_pose(full.poses[i], full.poses[i + 1])});
    for (std::size_t i = 0; i < full.size(); ++i)
        if (full.timestamps[i] <= 2 * sec || full.timestamps[i] >= 4 * sec) holey.push_back(full.timestamps[i], full.poses[i]);
    const GapFillResult filled = gap_fill(holey, odo, sec);
    double gap_err = filled.stream.timestamps == full.timestamps ? 0.0 : INFINITY;
    for (std::size_t i = 0; std::isfinite(gap_err) && i < full.size(); ++i) {
        gap_err = std::max(gap_err, (filled.stream.poses[i].translation - full.poses[i].translation).cwiseAbs().maxCoeff());
        for (int k = 0; k < 3; ++k)
            gap_err = std::max(gap_err, std::abs(wrap_angle(filled.stream.poses[i].rotation[k] - full.poses[i].rotation[k])));
    }

    return {tree_miss == 0 && align_miss == 0 && filled.filled > 0 && gap_err <= 1e-9,
            fmt("k-d tree vs linear scan %d/1000 mismatches; align (%zu radar, %zu camera, %zu LiDAR frames) %zu mismatches; "
                "gap_fill %zu entries, max error %.1e",
                tree_miss, counts[0], counts[1], counts[2], align_miss, filled.filled, gap_err)};
}

// ---------------------------------------------------------------- A6

Verdict a6_loss_semantics() {
    Rng rng(606);
    // additivity of the net loss
    std::map<SensorId, Var> per;
    double oracle_sum = 0.0;
    for (SensorId s : kAllSensors) {
        const Tensor gt = normal({3}, 1.0, rng), gr = uniform({3}, -0.9, 0.9, rng);
        const PoseLoss l = pose_loss(Var(normal({3}, 1.0, rng)), Var(uniform({3}, -0.9, 0.9, rng)), gt, gr,
                                     Var(Tensor::scalar(0.2)), Var(Tensor::scalar(-0.3)), LossMode::stable, 2.0);
        per[s] = l.total;
        oracle_sum += l.total.value()[0];
    }
    const double additivity = std::abs(net_loss(per).value()[0] - oracle_sum);

    // stable mode: the minimizer over alpha is ln c
    const Tensor gt = Tensor::zeros({3}), gr = Tensor::zeros({3});
    const Tensor pt({3}, {0.7, -1.1, 0.4}), pr({3}, {0.1, -0.2, 0.05});
    const double c = 0.7 + 1.1 + 0.4;
    const auto loss_at = [&](double alpha, LossMode mode) {
        return pose_loss(Var(pt), Var(pr), gt, gr, Var(Tensor::scalar(alpha)), Var(Tensor::scalar(0.0)), mode, 2.0).total.value()[0];
    };
    double lo = -10.0, hi = 10.0;
    const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
    while (hi - lo > 1e-9) {
        const double a = hi - phi * (hi - lo), b = lo + phi * (hi - lo);
        if (loss_at(a, LossMode::stable) < loss_at(b, LossMode::stable)) hi = b;
        else lo = a;
    }
    const double alpha_star = 0.5 * (lo + hi), alpha_err = std::abs(alpha_star - std::log(c));

    // literal mode keeps decreasing as alpha falls
    const double l0 = loss_at(0.0, LossMode::paper_literal), l10 = loss_at(-10.0, LossMode::paper_literal),
                 l20 = loss_at(-20.0, LossMode::paper_literal);
    const bool unbounded = l0 > l10 && l10 > l20;

    return {additivity <= 1e-12 && alpha_err <= 1e-4 && unbounded,
            fmt("net-loss additivity |diff| %.1e; stable alpha* %.6f vs ln c %.6f (|diff| %.1e); literal L(0, -10, -20) = %.4g, %.4g, %.4g",
                additivity, alpha_star, std::log(c), alpha_err, l0, l10, l20)};
}

// ---------------------------------------------------------------- A8

Verdict a8_full_scale_shapes() {
    Rng rng(808);
    std::string detail;
    bool ok = true;
    const auto note = [&](bool cond, const std::string& what) {
        ok = ok && cond;
        detail += (detail.empty() ? "" : "; ") + what + (cond ? "" : " [WRONG]");
    };

    const ImageStream stream("cam", 512, 512, 512, 1024, rng);
    const Shape feat = stream.stack.output_shape({1, 3, 512, 512});
    note(feat == Shape{1, 512, 64, 64}, "image 3x512x512 -> features " + shape_str(feat));
    const Tensor tokens = stream.finetune(Var(Tensor::zeros({1, 512, 64, 64}))).value();
    note(tokens.shape() == Shape{256, 1024}, "tokens " + shape_str(tokens.shape()));
    note(stream.finetune.encoding.shape() == Shape{16, 16, 1024}, "positional encoding " + shape_str(stream.finetune.encoding.shape()));

    const SparseBackbone bb("bb", 16, 1, true, rng);
    const auto [grid, channels] = bb.output_shape({480, 368, 128});
    const SparseTensor3D x = oracle::random_sparse({480, 368, 128}, 16, 2e-6, rng);
    const Index pooled = pool_concat(bb(x)).dim(0);
    note(channels == 512 && pooled == 1024,
         fmt("LiDAR backbone -> %lld channels on %lldx%lldx%lld, pooled vector %lld", static_cast<long long>(channels),
             static_cast<long long>(grid[0]), static_cast<long long>(grid[1]), static_cast<long long>(grid[2]),
             static_cast<long long>(pooled)));

    const RegressionHead head("head", 1024, true, rng);
    std::vector<Index> t_trace, r_trace;
    for (const Linear& l : head.translation) t_trace.push_back(l.out_features());
    for (const Linear& l : head.rotation) r_trace.push_back(l.out_features());
    const std::vector<Index> expect{1024, 512, 256, 3};
    const HeadOutput out = head(Var(normal({1024}, 1.0, rng)));
    note(t_trace == expect && r_trace == expect && out.translation.value().size() == 3 && out.rotation.value().size() == 3,
         fmt("regression branches %lld,%lld,%lld,%lld", static_cast<long long>(t_trace[0]), static_cast<long long>(t_trace[1]),
             static_cast<long long>(t_trace[2]), static_cast<long long>(t_trace[3])));
    return {ok, detail};
}

}  // namespace

/// Optional arguments select criteria by id, e.g. `acceptance A3 A5`.
int main(int argc, char** argv) {
    const std::vector<std::string> only(argv + 1, argv + argc);
    const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria{
        {"A1 gradient integrity", a1_gradients},   {"A2 overfit bound", a2_overfit},
        {"A3 sparse-conv oracle", a3_sparse_oracle}, {"A4 slot attention contracts", a4_slot_contracts},
        {"A5 sync oracle", a5_sync_oracle},        {"A6 loss semantics", a6_loss_semantics},
        {"A7 on-demand inference", a7_on_demand},  {"A8 full-scale shapes", a8_full_scale_shapes},
    };
    int failed = 0;
    for (const auto& [name, check] : criteria) {
        if (!only.empty() && std::find(only.begin(), only.end(), name.substr(0, 2)) == only.end()) continue;
        const auto t0 = Clock::now();
        Verdict v;
        try {
            v = check();
        } catch (const std::exception& e) {
            v = {false, std::string("exception: ") + e.what()};
        }
        failed += !v.pass;
        std::cout << (v.pass ? "PASS " : "FAIL ") << name << " -- " << v.detail << fmt(" (%.1f s)", seconds_since(t0)) << '\n'
                  << std::flush;
    }
    fs::remove_all(work_dir());
    std::cout << (failed ? std::to_string(failed) + " criteria failed" : std::string("all criteria passed")) << '\n';
    return failed ? 1 : 0;
}
