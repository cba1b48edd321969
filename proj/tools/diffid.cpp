// diffid: reference-assisted face-swap detection from the command line.
//
// Exit status: 0 success (detect: real), 1 detect verdict fake, 2 error.

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "diffid/adapter.hpp"
#include "diffid/corpus.hpp"
#include "diffid/error.hpp"
#include "diffid/evaluate.hpp"
#include "diffid/finetune.hpp"
#include "diffid/image_io.hpp"
#include "diffid/quantify.hpp"
#include "diffid/reconstruction.hpp"
#include "diffid/serialize.hpp"
#include "diffid/synthetic.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace diffid;

namespace {

constexpr int kExitError = 2;

struct Options {
    std::string command;
    fs::path out;
    std::string backend = "synthetic";
    fs::path world_config;      // synthetic world for corpora and the synthetic backend
    fs::path generator_config;  // partial overrides applied to the generator's world
    std::optional<double> kappa;
    std::optional<double> beta;
    std::optional<std::uint64_t> seed;
    int workers = 1;
    double gain = 5.0;
    bool no_mask = false;

    // detect
    fs::path ref_path, test_path;
    std::optional<double> threshold;
    fs::path threshold_file;

    // corpus-driven commands
    fs::path manifest;
    std::string strategy = "random";
    std::string level = "frame";
    std::string score = "diffid";
    bool calibrate = false;
    std::string qfs;

    // synth-corpus
    CorpusSpec spec;

    // finetune
    std::string method = "coordinate-descent";
    int budget = 40;
    int train_identities = 10;
    int variants = 4;
};

json read_json_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw IoError(path.string() + ": " + e.what());
    }
}

void write_json_file(const fs::path& path, const json& j) {
    std::ofstream out(path);
    out << j.dump(2) << '\n';
    if (!out) throw IoError("cannot write " + path.string());
}

void ensure_out_dir(const fs::path& out) {
    std::error_code ec;
    fs::create_directories(out, ec);
    if (ec || !fs::is_directory(out)) throw IoError("cannot create output directory " + out.string());
}

SyntheticWorldConfig base_world(const Options& o, const std::optional<SyntheticWorldConfig>& from_manifest) {
    SyntheticWorldConfig cfg = from_manifest.value_or(SyntheticWorldConfig{});
    if (!o.world_config.empty()) cfg = read_json_file(o.world_config).get<SyntheticWorldConfig>();
    return cfg;
}

// The generator may differ from the world that rendered the data (e.g. a tuned generator).
SyntheticWorldConfig generator_world(const Options& o, SyntheticWorldConfig cfg) {
    if (!o.generator_config.empty()) {
        json merged = cfg;
        merged.update(read_json_file(o.generator_config));
        cfg = merged.get<SyntheticWorldConfig>();
    }
    if (o.kappa) cfg.generator_leakage = *o.kappa;
    if (o.beta) cfg.generator_blur = *o.beta;
    cfg.validate();
    return cfg;
}

struct Pipeline {
    std::unique_ptr<GeneratorBackend> backend;
    std::unique_ptr<FacePreprocessor> preprocessor;
    std::optional<SyntheticWorldConfig> generator;
};

Pipeline make_pipeline(const Options& o, const std::optional<SyntheticWorldConfig>& from_manifest) {
    Pipeline p;
    if (o.backend == "synthetic") {
        p.generator = generator_world(o, base_world(o, from_manifest));
        auto world = std::make_shared<const SyntheticWorld>(*p.generator);
        p.backend = std::make_unique<SyntheticBackend>(world);
        p.preprocessor = std::make_unique<SyntheticPreprocessor>(world);
    } else if (o.backend.starts_with("adapter:")) {
        p.backend = std::make_unique<SubprocessAdapter>(parse_adapter_spec(o.backend));
        p.preprocessor = std::make_unique<PassthroughPreprocessor>(p.backend->working_resolution());
    } else {
        throw InvalidArgument("unknown backend '" + o.backend + "' (synthetic or adapter:<command>)");
    }
    return p;
}

// Everything needed to rerun the command, written before any work starts.
json run_config(const Options& o, const Pipeline* p) {
    json j{{"command", o.command},       {"backend", o.backend},   {"workers", o.workers},
           {"gain", o.gain},             {"use_mask", !o.no_mask}, {"strategy", o.strategy},
           {"level", o.level},           {"score", o.score},       {"calibrate", o.calibrate},
           {"out", o.out.string()}};
    j["seed"] = o.seed ? json(*o.seed) : json(nullptr);
    j["threshold"] = o.threshold ? json(*o.threshold) : json(nullptr);
    if (!o.threshold_file.empty()) j["threshold_file"] = o.threshold_file.string();
    if (!o.manifest.empty()) j["manifest"] = fs::absolute(o.manifest).string();
    if (!o.ref_path.empty()) j["ref"] = fs::absolute(o.ref_path).string();
    if (!o.test_path.empty()) j["test"] = fs::absolute(o.test_path).string();
    if (!o.qfs.empty()) j["qfs"] = o.qfs;
    if (p && p->generator) j["generator_world"] = *p->generator;
    if (p && p->backend) j["backend_name"] = p->backend->name();
    if (p && p->preprocessor) j["preprocessor"] = p->preprocessor->name();
    return j;
}

std::vector<int> parse_qfs(const std::string& s) {
    if (s.empty()) return default_sweep_qfs();
    std::vector<int> out;
    std::stringstream in(s);
    for (std::string item; std::getline(in, item, ',');) {
        try {
            std::size_t used = 0;
            const int q = std::stoi(item, &used);
            if (used != item.size()) throw std::invalid_argument(item);
            out.push_back(q);
        } catch (const std::logic_error&) {
            throw InvalidArgument("bad quality factor '" + item + "'");
        }
    }
    return out;
}

EvalConfig eval_config(const Options& o) {
    EvalConfig c;
    c.strategy = parse_strategy(o.strategy);
    if (o.level != "frame" && o.level != "video") throw InvalidArgument("level must be frame or video");
    c.level = o.level == "video" ? Level::Video : Level::Frame;
    c.score = parse_score_kind(o.score);
    if (o.seed) c.seed = *o.seed;
    c.workers = o.workers;
    c.detect.use_mask = !o.no_mask;
    c.detect.gain = o.gain;
    if (o.threshold) c.threshold = *o.threshold;
    if (!o.threshold_file.empty()) c.threshold = read_json_file(o.threshold_file).at("threshold").get<double>();
    return c;
}

void write_scores_csv(const fs::path& path, const EvalReport& r) {
    std::ofstream out(path);
    out.precision(17);
    out << "entry_id,identity,video_id,label,reference_id,ok,score,iesim,ratio_ref,theta_ref,ratio_test,theta_test\n";
    for (const auto& e : r.entries) {
        out << e.entry_id << ',' << e.identity << ',' << e.video_id << ',' << (e.fake ? "fake" : "real") << ','
            << e.reference_id << ',' << (e.ok ? 1 : 0) << ',';
        if (e.ok) {
            out << e.value(r.config.score) << ',' << e.iesim << ',' << e.score.ratio_ref << ',' << e.score.theta_ref
                << ',' << e.score.ratio_test << ',' << e.score.theta_test;
        } else {
            out << ",,,,,";
        }
        out << '\n';
    }
    if (!out) throw IoError("cannot write " + path.string());
}

void print_report(const EvalReport& r) {
    std::printf("auc %.4f%s  (%zu real, %zu fake, %zu failed)\n", r.auc, r.degenerate ? " [degenerate]" : "",
                r.real_scores.size(), r.fake_scores.size(), r.failures);
    if (r.balanced_accuracy) {
        std::printf("threshold %.6g  balanced accuracy %.4f\n", *r.threshold, *r.balanced_accuracy);
    }
}

int cmd_synth_corpus(const Options& o) {
    ensure_out_dir(o.out);
    SyntheticWorldConfig cfg = base_world(o, std::nullopt);
    if (o.seed) cfg.seed = *o.seed;
    json rc = run_config(o, nullptr);
    rc["world_config"] = cfg;
    rc["corpus_spec"] = o.spec;
    write_json_file(o.out / "run_config.json", rc);
    const auto m = materialize_corpus(make_synthetic_corpus(cfg, o.spec), o.out);
    std::printf("wrote %zu entries (%zu tests) to %s\n", m.entries.size(), m.tests().size(),
                (o.out / "manifest.jsonl").c_str());
    return 0;
}

int cmd_detect(const Options& o) {
    ensure_out_dir(o.out);
    const Pipeline p = make_pipeline(o, std::nullopt);
    DetectOptions d;
    d.gain = o.gain;
    d.use_mask = !o.no_mask;
    if (o.threshold) d.threshold = *o.threshold;
    if (!o.threshold_file.empty()) d.threshold = read_json_file(o.threshold_file).at("threshold").get<double>();
    json rc = run_config(o, &p);
    rc["threshold"] = d.threshold;
    write_json_file(o.out / "run_config.json", rc);

    const Image ref = read_image(o.ref_path);
    const Image test = read_image(o.test_path);
    const auto r = detect(ref, test, *p.backend, *p.preprocessor, d);

    write_png(o.out / "diff_ref_space.png", r.diff_ref_space);
    write_png(o.out / "diff_test_space.png", r.diff_test_space);
    write_png(o.out / "quad.png", quad_contact_sheet(r.quad));
    json rec = detection_record(r);
    rec["visualizations"] = {{"diff_ref_space", "diff_ref_space.png"},
                             {"diff_test_space", "diff_test_space.png"},
                             {"quad", "quad.png"}};
    write_json_file(o.out / "result.json", rec);
    std::printf("%s  score %.6g  threshold %.6g  iesim %.6g\n", r.fake ? "FAKE" : "REAL", r.score.value, r.threshold,
                r.iesim);
    return r.fake ? 1 : 0;
}

struct CorpusRun {
    CorpusManifest manifest;
    Pipeline pipeline;
    EvalConfig config;
};

CorpusRun prepare_corpus_run(const Options& o) {
    if (o.calibrate && (o.threshold || !o.threshold_file.empty())) {
        throw InvalidArgument("--calibrate and an explicit threshold are mutually exclusive");
    }
    CorpusRun run{read_manifest(o.manifest), {}, eval_config(o)};
    run.pipeline = make_pipeline(o, run.manifest.world);
    ensure_out_dir(o.out);
    json rc = run_config(o, &run.pipeline);
    rc["config_fingerprint"] = config_fingerprint(run.manifest, run.config);
    rc["eval_config"] = run.config;
    write_json_file(o.out / "run_config.json", rc);
    return run;
}

int cmd_evaluate(const Options& o) {
    auto run = prepare_corpus_run(o);
    EvalReport r = run_evaluation(run.manifest, *run.pipeline.backend, *run.pipeline.preprocessor, run.config);
    if (o.calibrate && !r.real_scores.empty() && !r.fake_scores.empty()) {
        const auto cal = calibrate_threshold(r.real_scores, r.fake_scores);
        r.threshold = cal.threshold;
        r.balanced_accuracy = balanced_accuracy(r.real_scores, r.fake_scores, cal.threshold);
    }
    write_json_file(o.out / "report.json", r);
    write_scores_csv(o.out / "scores.csv", r);
    print_report(r);
    return 0;
}

int cmd_calibrate(const Options& o) {
    auto run = prepare_corpus_run(o);
    const EvalReport r = run_evaluation(run.manifest, *run.pipeline.backend, *run.pipeline.preprocessor, run.config);
    const auto cal = calibrate_threshold(r.real_scores, r.fake_scores);
    json j = cal;
    j["balanced_accuracy"] = balanced_accuracy(r.real_scores, r.fake_scores, cal.threshold);
    j["auc"] = r.auc;
    j["score"] = to_string(run.config.score);
    j["config_fingerprint"] = r.fingerprint;
    write_json_file(o.out / "calibration.json", j);
    write_scores_csv(o.out / "scores.csv", r);
    std::printf("threshold %.6g  (real q95 %.6g, fake q05 %.6g)  balanced accuracy %.4f\n", cal.threshold,
                cal.real_q95, cal.fake_q05, j["balanced_accuracy"].get<double>());
    return 0;
}

int cmd_sweep_jpeg(const Options& o) {
    auto run = prepare_corpus_run(o);
    const auto qfs = parse_qfs(o.qfs);
    const auto s = jpeg_robustness_sweep(run.manifest, *run.pipeline.backend, *run.pipeline.preprocessor, qfs,
                                         run.config);
    std::ofstream summary(o.out / "sweep.csv");
    summary.precision(17);
    summary << "qf,auc,delta_auc,failures\n";
    for (std::size_t i = 0; i < s.qfs.size(); ++i) {
        write_json_file(o.out / ("report_qf" + std::to_string(s.qfs[i]) + ".json"), s.reports[i]);
        summary << s.qfs[i] << ',' << s.reports[i].auc << ',' << s.delta_auc[i] << ',' << s.reports[i].failures << '\n';
        std::printf("qf %3d  auc %.4f  delta %+.4f\n", s.qfs[i], s.reports[i].auc, s.delta_auc[i]);
    }
    std::ofstream traces(o.out / "traces.csv");
    traces.precision(17);
    traces << "entry_id,qf,score,label\n";
    for (const auto& t : s.traces) traces << t.entry_id << ',' << t.qf << ',' << t.score << ',' << (t.fake ? "fake" : "real") << '\n';
    if (!summary || !traces) throw IoError("cannot write sweep outputs in " + o.out.string());
    return 0;
}

int cmd_finetune(const Options& o) {
    ensure_out_dir(o.out);
    std::optional<SyntheticWorldConfig> from_manifest;
    if (!o.manifest.empty()) from_manifest = read_manifest(o.manifest).world;
    const SyntheticWorldConfig start = generator_world(o, base_world(o, from_manifest));
    FinetuneOptions f;
    if (o.method == "grid") {
        f.method = SearchMethod::Grid;
    } else if (o.method != "coordinate-descent") {
        throw InvalidArgument("method must be grid or coordinate-descent");
    }
    f.budget = o.budget;
    json rc = run_config(o, nullptr);
    rc["start_world"] = start;
    rc["method"] = o.method;
    rc["budget"] = o.budget;
    rc["train_identities"] = o.train_identities;
    rc["variants"] = o.variants;
    write_json_file(o.out / "run_config.json", rc);

    const SyntheticWorld world(start);
    const auto train = make_training_set(world, o.train_identities, o.variants, o.seed.value_or(0));
    const PyramidL1Distance perc;
    const auto r = finetune_synthetic_generator(start, train, perc, f);
    write_loss_trace_csv(o.out / "loss_trace.csv", r);
    auto losses = [](const FinetuneLosses& l) {
        return json{{"l_id", l.l_id}, {"l_att_pixel", l.l_att_pixel}, {"l_att_perceptual", l.l_att_perceptual},
                    {"total", l.total}};
    };
    write_json_file(o.out / "tuned.json", json{{"kappa", r.kappa},
                                               {"beta", r.beta},
                                               {"start_loss", losses(r.start)},
                                               {"tuned_loss", losses(r.best)},
                                               {"evaluations", r.trace.size()},
                                               {"tuned_world", r.apply(start)}});
    std::printf("kappa %.4g -> %.4g  beta %.4g -> %.4g  loss %.6g -> %.6g  (%zu evaluations)\n",
                start.generator_leakage, r.kappa, start.generator_blur, r.beta, r.start.total, r.best.total,
                r.trace.size());
    return 0;
}

void add_backend_options(CLI::App* c, Options& o) {
    c->add_option("--backend", o.backend, "synthetic or adapter:<command line>");
    c->add_option("--world-config", o.world_config, "Synthetic world config (JSON)");
    c->add_option("--generator-config", o.generator_config, "Partial world config overriding the generator");
    c->add_option("--kappa", o.kappa, "Synthetic generator leakage");
    c->add_option("--beta", o.beta, "Synthetic generator blur (px)");
    c->add_flag("--no-mask", o.no_mask, "Measure distances over the full frame");
}

void add_threshold_options(CLI::App* c, Options& o) {
    auto* t = c->add_option("--threshold", o.threshold, "Decision threshold on the score");
    auto* f = c->add_option("--threshold-file", o.threshold_file, "calibration.json from the calibrate command");
    t->excludes(f);
}

void add_corpus_options(CLI::App* c, Options& o) {
    c->add_option("manifest", o.manifest, "Corpus manifest (JSONL)")->required();
    c->add_option("--strategy", o.strategy, "random, frontal or same-orientation");
    c->add_option("--level", o.level, "frame or video");
    c->add_option("--score", o.score, "diffid, iesim, l_id_ref, ratio_ref, theta_ref, ratio_test, theta_test, l_id_test");
    c->add_option("--seed", o.seed, "Evaluation seed");
    c->add_option("--workers", o.workers, "Worker threads")->check(CLI::PositiveNumber);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Reference-assisted face-swap detection"};
    app.require_subcommand(1);
    Options o;

    auto* synth = app.add_subcommand("synth-corpus", "Render a labelled synthetic corpus");
    synth->add_option("--out", o.out, "Output directory")->required();
    synth->add_option("--world-config", o.world_config, "Synthetic world config (JSON)");
    synth->add_option("--seed", o.seed, "World seed");
    synth->add_option("--identities", o.spec.identities);
    synth->add_option("--reference-pool", o.spec.reference_pool, "Reference images per identity");
    synth->add_option("--real-tests", o.spec.real_tests, "Real test images per identity");
    synth->add_option("--fake-tests", o.spec.fake_tests, "Fake test images per identity");
    synth->add_option("--frames-per-video", o.spec.frames_per_video);
    synth->add_option("--delta", o.spec.delta_fake, "Identity loss injected into fakes");

    auto* det = app.add_subcommand("detect", "Score one test image against a reference");
    det->add_option("ref", o.ref_path, "Reference image")->required();
    det->add_option("test", o.test_path, "Test image")->required();
    det->add_option("--out", o.out, "Output directory")->required();
    det->add_option("--gain", o.gain, "Diff visualisation gain")->check(CLI::Range(1.0, 1e6));
    add_backend_options(det, o);
    add_threshold_options(det, o);

    auto* eval = app.add_subcommand("evaluate", "AUC of a corpus");
    eval->add_option("--out", o.out, "Output directory")->required();
    add_corpus_options(eval, o);
    add_backend_options(eval, o);
    add_threshold_options(eval, o);
    eval->add_flag("--calibrate", o.calibrate, "Calibrate the threshold on this run and report balanced accuracy");

    auto* sweep = app.add_subcommand("sweep-jpeg", "AUC under JPEG compression of the test images");
    sweep->add_option("--out", o.out, "Output directory")->required();
    sweep->add_option("--qfs", o.qfs, "Comma-separated quality factors (default 20,25,...,100)");
    add_corpus_options(sweep, o);
    add_backend_options(sweep, o);

    auto* cal = app.add_subcommand("calibrate", "Threshold between the real 95th and fake 5th percentiles");
    cal->add_option("--out", o.out, "Output directory")->required();
    add_corpus_options(cal, o);
    add_backend_options(cal, o);

    auto* ft = app.add_subcommand("finetune", "Tune the synthetic generator's leakage and blur");
    ft->add_option("--out", o.out, "Output directory")->required();
    ft->add_option("--manifest", o.manifest, "Take the starting world from this manifest");
    ft->add_option("--world-config", o.world_config, "Starting world config (JSON)");
    ft->add_option("--generator-config", o.generator_config, "Partial overrides of the starting world");
    ft->add_option("--kappa", o.kappa, "Starting leakage");
    ft->add_option("--beta", o.beta, "Starting blur (px)");
    ft->add_option("--method", o.method, "grid or coordinate-descent");
    ft->add_option("--budget", o.budget, "Loss evaluations")->check(CLI::PositiveNumber);
    ft->add_option("--identities", o.train_identities)->check(CLI::PositiveNumber);
    ft->add_option("--variants", o.variants, "Attribute variants per identity");
    ft->add_option("--seed", o.seed, "Training-set seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitError;
    }

    try {
        const std::pair<CLI::App*, int (*)(const Options&)> commands[] = {
            {synth, cmd_synth_corpus}, {det, cmd_detect},      {eval, cmd_evaluate},
            {sweep, cmd_sweep_jpeg},   {cal, cmd_calibrate},   {ft, cmd_finetune}};
        for (const auto& [sub, run] : commands) {
            if (*sub) {
                o.command = sub->get_name();
                return run(o);
            }
        }
    } catch (const PreprocessError& e) {
        std::fprintf(stderr, "error: preprocessing failed: %s\n", e.what());
    } catch (const BackendError& e) {
        std::fprintf(stderr, "error: backend failed: %s\n", e.what());
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
    }
    return kExitError;
}
