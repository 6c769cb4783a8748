#include "cli.hpp"

#include "unloc/config.hpp"
#include "unloc/dataset.hpp"
#include "unloc/errors.hpp"
#include "unloc/gradcheck_registry.hpp"
#include "unloc/io.hpp"
#include "unloc/metrics.hpp"
#include "unloc/training.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>

namespace unloc::cli {

namespace {

struct Options {
    std::string config;
    std::vector<std::string> sensors;  // each occurrence is one subset
    std::string checkpoint;
    std::optional<std::uint64_t> seed;
    std::string out;
    std::string dataset;
    std::string metrics;
    bool inject_sign_flip = false;
};

std::vector<SensorId> parse_subset(const std::string& text) {
    if (text == "all") return {kAllSensors.begin(), kAllSensors.end()};
    return parse_sensor_list(text);
}

RunConfig load_config(const Options& o) {
    RunConfig cfg = o.config.empty() ? RunConfig() : RunConfig::load(o.config);
    if (o.seed) cfg.seed = *o.seed;
    if (!o.dataset.empty()) cfg.dataset = o.dataset;
    if (!o.sensors.empty()) cfg.sensors = parse_subset(o.sensors.front());
    cfg.validate();
    return cfg;
}

std::string subset_file_tag(const std::vector<SensorId>& subset) {
    std::string s = sensor_list_string(subset);
    std::replace(s.begin(), s.end(), ',', '-');
    return s;
}

std::string pose_fields(const Pose6DoF& p) {
    std::string s;
    for (const Eigen::Vector3d* v : {&p.translation, &p.rotation})
        for (int k = 0; k < 3; ++k) s += ',' + format_double((*v)[k]);
    return s;
}

int cmd_synth_gen(const Options& o, std::ostream& out) {
    const RunConfig cfg = load_config(o);
    const SynthConfig sc = cfg.synth_config();
    sc.validate();
    const fs::path root = o.out.empty() ? fs::path(cfg.dataset) : fs::path(o.out);
    const EmitSummary sum = emit_dataset(sc, root);
    const SyncReport rep = sync_dataset(root, cfg.sync);
    out << "dataset " << root.string() << "\n";
    for (const auto& [s, n] : sum.frames) out << "  " << sensor_name(s) << ": " << n << " frames\n";
    out << "  ground truth rows: " << sum.gt_rows << "\n  empty LiDAR frames skipped: " << sum.empty_clouds
        << "\n  world diameter: " << sum.world_diameter << " m\n  manifest samples: " << rep.samples << "\n";
    return kExitOk;
}

int cmd_sync(const Options& o, std::ostream& out) {
    const RunConfig cfg = load_config(o);
    const fs::path root = o.out.empty() ? fs::path(cfg.dataset) : fs::path(o.out);
    const SyncReport rep = sync_dataset(root, cfg.sync);
    out << "samples " << rep.samples << "\ndropped_radar " << rep.dropped_radar << "\ngap_filled " << rep.gap_filled
        << "\ndead_reckoned " << (rep.dead_reckoned ? "yes" : "no") << "\n";
    return kExitOk;
}

std::string loss_header() {
    std::string s = "step,loss";
    for (SensorId id : kAllSensors) s += ',' + std::string(sensor_name(id));
    return s + '\n';
}

/// Rows of an earlier loss log with step < `before`.
std::string kept_loss_rows(const fs::path& path, Index before) {
    if (!fs::exists(path)) return {};
    std::istringstream in(read_file(path));
    std::string line, kept;
    std::getline(in, line);
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (std::stoll(line.substr(0, line.find(','))) < before) kept += line + '\n';
    }
    return kept;
}

int cmd_train(const Options& o, std::ostream& out) {
    const RunConfig cfg = load_config(o);
    const fs::path run_dir = o.out.empty() ? fs::path("run") : fs::path(o.out);
    const std::vector<SensorSample> samples =
        load_samples(cfg.dataset, kAllSensors, cfg.model.image_h, cfg.model.image_w);

    std::optional<Checkpoint> resume;
    if (!o.checkpoint.empty()) resume = read_checkpoint(o.checkpoint);
    ModelConfig mc = cfg.model;
    if (cfg.train.normalize_translation) fit_translation_normalization(mc, samples);
    if (resume && model_config_hash(resume->model) != model_config_hash(mc))
        throw ConfigError("train: checkpoint " + o.checkpoint + " was written for a different model configuration");
    const std::uint64_t seed = resume ? resume->seed : cfg.seed;

    UnlocModel model(mc, seed);
    Trainer trainer(model, cfg.adam, seed);
    if (resume) {
        restore(*resume, model, &trainer.optimizer());
        trainer.restore(resume->step);
    }
    const Index total =
        cfg.train.steps > 0 ? cfg.train.steps : cfg.train.epochs * steps_per_epoch(samples.size(), cfg.train.batch_size);

    fs::create_directories(run_dir);
    std::string log = loss_header() + kept_loss_rows(run_dir / "loss.csv", trainer.steps_taken());
    const auto t0 = std::chrono::steady_clock::now();
    for (Index s = trainer.steps_taken(); s < total; ++s) {
        std::vector<const SensorSample*> batch;
        for (std::size_t i : batch_indices(samples.size(), cfg.train.batch_size, s, seed)) batch.push_back(&samples[i]);
        const StepStats st = trainer.step(batch);
        log += std::to_string(st.step) + ',' + format_double(st.loss);
        for (SensorId id : kAllSensors) log += ',' + format_double(st.sensor_loss.at(id));
        log += '\n';
        if (st.step % 50 == 0 || st.step + 1 == total)
            out << "step " << st.step << " loss " << st.loss << " ("
                << std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() << " s)\n";
    }
    write_file_atomic(run_dir / "loss.csv", log);
    write_checkpoint(run_dir / "checkpoint.unck", capture(model, trainer.optimizer(), trainer.steps_taken(), seed));
    out << "checkpoint " << (run_dir / "checkpoint.unck").string() << " at step " << trainer.steps_taken() << "\n";
    return kExitOk;
}

int cmd_eval(const Options& o, std::ostream& out) {
    const RunConfig cfg = load_config(o);
    if (o.checkpoint.empty()) throw ConfigError("eval: --checkpoint is required");
    const fs::path eval_dir = o.out.empty() ? fs::path("eval") : fs::path(o.out);
    const std::uint64_t before = fnv1a(read_file(o.checkpoint));

    const Checkpoint ckpt = read_checkpoint(o.checkpoint);
    UnlocModel model(ckpt.model, ckpt.seed);
    restore(ckpt, model, nullptr);

    std::vector<std::vector<SensorId>> subsets;
    for (const std::string& s : o.sensors) subsets.push_back(parse_subset(s));
    if (subsets.empty()) subsets.push_back(cfg.sensors);
    std::set<SensorId> needed;
    for (const auto& sub : subsets) needed.insert(sub.begin(), sub.end());
    const std::vector<SensorId> load(needed.begin(), needed.end());
    const std::vector<SensorSample> samples = load_samples(cfg.dataset, load, ckpt.model.image_h, ckpt.model.image_w);

    fs::create_directories(eval_dir);
    std::vector<MetricsReport> reports;
    for (const auto& sub : subsets) {
        std::vector<Pose6DoF> pred, truth;
        std::string csv = "radar_timestamp_ns,gt_x,gt_y,gt_z,gt_yaw,gt_roll,gt_pitch,x,y,z,yaw,roll,pitch\n";
        for (const SensorSample& s : samples) {
            pred.push_back(model.predict(s, sub, sample_noise_seed(ckpt.seed, s)).fused);
            truth.push_back(s.pose);
            csv += std::to_string(s.timestamp) + pose_fields(s.pose) + pose_fields(pred.back()) + '\n';
        }
        write_file_atomic(eval_dir / ("predictions_" + subset_file_tag(sub) + ".csv"), csv);
        reports.push_back(compute_metrics(pred, truth, sensor_list_string(sub)));
    }
    const std::string table = metrics_table(reports) + '\n' + metrics_mae_table(reports);
    write_file_atomic(eval_dir / "metrics.csv", metrics_csv(reports));
    write_file_atomic(eval_dir / "metrics.txt", table);
    out << table;

    if (fnv1a(read_file(o.checkpoint)) != before)
        throw std::runtime_error("eval: checkpoint " + o.checkpoint + " changed during evaluation");
    return kExitOk;
}

int cmd_gradcheck(const Options& o, std::ostream& out) {
    std::vector<GradCheckEntry> entries = gradcheck_registry();
    if (o.inject_sign_flip) entries.push_back(sign_flip_fixture());
    std::string report;
    std::size_t passed = 0;
    std::vector<std::string> failed;
    for (const GradCheckEntry& e : entries) {
        const GradCheckRecord r = run_gradcheck(e);
        report += format_record(r) + '\n';
        out << format_record(r) << '\n' << std::flush;
        if (r.passed) ++passed;
        else failed.push_back(r.name);
    }
    std::string summary = std::to_string(passed) + "/" + std::to_string(entries.size()) + " modules passed";
    for (std::size_t i = 0; i < failed.size(); ++i) summary += (i ? ", " : "; failed: ") + failed[i];
    report += summary + '\n';
    out << summary << '\n';
    if (!o.out.empty()) {
        fs::create_directories(o.out);
        write_file_atomic(fs::path(o.out) / "gradcheck.txt", report);
    }
    return failed.empty() ? kExitOk : kExitRuntime;
}

int cmd_report(const Options& o, std::ostream& out) {
    const fs::path path = !o.metrics.empty() ? fs::path(o.metrics) : fs::path(o.out.empty() ? "eval" : o.out) / "metrics.csv";
    const std::vector<MetricsReport> reports = parse_metrics_csv(read_file(path), path.string());
    out << "Mean translation (m) and rotation (deg), RMSE translation (cm) and rotation (deg)\n"
        << metrics_table(reports) << "\nAbsolute mean error per axis\n"
        << metrics_mae_table(reports);
    return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Multi-sensor 6-DoF localization: synthetic data, training and evaluation", "unloc"};
    app.require_subcommand(1);
    Options o;

    const auto common = [&o](CLI::App* c) {
        c->add_option("--config", o.config, "key=value configuration file")->check(CLI::ExistingFile);
        c->add_option("--seed", o.seed, "run seed (overrides the configuration)");
        c->add_option("--dataset", o.dataset, "dataset root (overrides the configuration)");
        c->add_option("--out", o.out, "output directory");
    };
    CLI::App* synth = app.add_subcommand("synth-gen", "generate a synthetic dataset and its manifest");
    common(synth);
    CLI::App* sync = app.add_subcommand("sync", "align sensor frames to ground truth and write the manifest");
    common(sync);
    CLI::App* train = app.add_subcommand("train", "train on the aligned dataset, writing loss.csv and checkpoint.unck");
    common(train);
    train->add_option("--checkpoint", o.checkpoint, "resume from this checkpoint")->check(CLI::ExistingFile);
    CLI::App* eval = app.add_subcommand("eval", "evaluate a checkpoint on one or more sensor subsets");
    common(eval);
    eval->add_option("--checkpoint", o.checkpoint, "checkpoint to evaluate")->required()->check(CLI::ExistingFile);
    eval->add_option("--sensors", o.sensors, "sensor subset, e.g. L1,C1,R or all (repeatable)");
    for (CLI::App* c : {synth, sync, train})
        c->add_option("--sensors", o.sensors, "active sensors, e.g. L1,C1,R or all")->expected(1);
    CLI::App* grad = app.add_subcommand("gradcheck", "finite-difference check of every differentiable module");
    grad->add_option("--out", o.out, "also write gradcheck.txt here");
    grad->add_flag("--inject-sign-flip", o.inject_sign_flip, "append a fixture with negated gradients (must fail)");
    CLI::App* report = app.add_subcommand("report", "print the metric tables of an evaluation");
    report->add_option("metrics", o.metrics, "metrics.csv (default <out>/metrics.csv)");
    report->add_option("--out", o.out, "evaluation directory");

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "unloc: " << e.what() << "\n";
        return kExitValidation;
    }

    try {
        if (*synth) return cmd_synth_gen(o, out);
        if (*sync) return cmd_sync(o, out);
        if (*train) return cmd_train(o, out);
        if (*eval) return cmd_eval(o, out);
        if (*grad) return cmd_gradcheck(o, out);
        return cmd_report(o, out);
    } catch (const ConfigError& e) {
        err << "unloc: invalid configuration: " << e.what() << "\n";
        return kExitValidation;
    } catch (const DimensionError& e) {
        err << "unloc: shape error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const MissingSensorError& e) {
        err << "unloc: missing sensor: " << e.what() << "\n";
        return kExitValidation;
    } catch (const OutOfRangeError& e) {
        err << "unloc: out of range: " << e.what() << "\n";
        return kExitValidation;
    } catch (const NumericError& e) {
        err << "unloc: numeric failure: " << e.what() << "\n";
        return kExitRuntime;
    } catch (const std::exception& e) {
        err << "unloc: " << e.what() << "\n";
        return kExitRuntime;
    }
}

}  // namespace unloc::cli
