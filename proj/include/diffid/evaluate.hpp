#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "diffid/backend.hpp"
#include "diffid/corpus.hpp"
#include "diffid/quantify.hpp"

namespace diffid {

/// P(fake score > real score) with ties counted 1/2. Fake is the positive class.
double auc(std::span<const double> real_scores, std::span<const double> fake_scores);

enum class Strategy { Random, Frontal, SameOrientation };
std::string_view to_string(Strategy s);
Strategy parse_strategy(std::string_view s);

/// Frontal: yaw within [-5, 5]. Same orientation: |yaw - test_yaw| <= 5.
/// Uniform draw among qualifying entries; when none qualify, the entry with
/// minimal |yaw - target| (target 0 for frontal). Returns an index into `pool_yaws`.
std::size_t select_reference(std::span<const double> pool_yaws, Strategy strategy, double test_yaw,
                             std::uint64_t seed);

/// Mean of the frame scores.
double video_score(std::span<const double> frame_scores);

/// Linear-interpolation quantile, q in [0, 1].
double quantile(std::vector<double> values, double q);

struct Calibration {
    double threshold = 0.0;
    double real_q95 = 0.0;
    double fake_q05 = 0.0;
};

/// Midpoint of the 95th percentile of real scores and the 5th percentile of fake scores.
Calibration calibrate_threshold(std::span<const double> real_scores, std::span<const double> fake_scores);

/// Mean of true-negative and true-positive rates; fake iff score > threshold.
double balanced_accuracy(std::span<const double> real_scores, std::span<const double> fake_scores,
                         double threshold);

enum class Level { Frame, Video };
std::string_view to_string(Level l);

/// Which number of a detection is used as the detector score.
enum class ScoreKind { DiffId, IESim, RawIdRef, RatioRef, ThetaRef, RatioTest, ThetaTest, RawIdTest };
std::string_view to_string(ScoreKind k);
ScoreKind parse_score_kind(std::string_view s);

struct EvalConfig {
    Strategy strategy = Strategy::Random;
    Level level = Level::Frame;
    ScoreKind score = ScoreKind::DiffId;
    std::uint64_t seed = 1234;
    int workers = 1;
    int max_frames_per_video = 20;
    DetectOptions detect{.render_visualizations = false};
    /// When set, every test image is JPEG-degraded at this quality first.
    std::optional<int> jpeg_qf;
    /// When set, the report includes the balanced accuracy at this threshold.
    std::optional<double> threshold;
};

/// Everything measured for one test entry.
struct EntryOutcome {
    std::string entry_id;
    std::string identity;
    std::string video_id;
    bool fake = false;
    std::string reference_id;
    bool ok = false;
    std::string error;
    DiffIdScore score;
    double iesim = 0.0;

    double value(ScoreKind kind) const;
};

struct ScoredUnit {
    std::string id;  // entry id or video id
    std::string identity;
    bool fake = false;
    double score = 0.0;
};

struct EvalReport {
    double auc = 0.5;
    /// Set when one class is empty or all scores tie; auc is then 0.5.
    bool degenerate = false;
    std::map<std::string, double> per_identity_auc;
    std::vector<double> real_scores;
    std::vector<double> fake_scores;
    std::vector<ScoredUnit> units;
    std::optional<double> threshold;
    std::optional<double> balanced_accuracy;
    std::size_t failures = 0;
    std::vector<std::string> failure_messages;
    std::string fingerprint;
    EvalConfig config;
    std::vector<EntryOutcome> entries;
};

/// Selects a reference per test entry, runs detection, aggregates to the
/// requested level and computes the AUC. Per-entry failures are counted and
/// excluded. Deterministic given the config seed.
EvalReport run_evaluation(const CorpusManifest& manifest, const GeneratorBackend& backend,
                          const FacePreprocessor& preprocessor, const EvalConfig& config);

/// Recomputes a report from its stored outcomes with another score kind or level.
EvalReport rescore(const EvalReport& report, ScoreKind kind, Level level);

/// Stable hash of the evaluation config and manifest header, as hex.
std::string config_fingerprint(const CorpusManifest& manifest, const EvalConfig& config);

struct SweepTrace {
    std::string entry_id;
    int qf = 0;
    double score = 0.0;
    bool fake = false;
};

struct SweepResult {
    std::vector<int> qfs;
    std::vector<EvalReport> reports;
    /// AUC(qf) - AUC(100); relative to the undegraded run when 100 is absent.
    std::vector<double> delta_auc;
    std::vector<SweepTrace> traces;
};

/// Default quality factors {20, 25, ..., 95, 100}.
std::vector<int> default_sweep_qfs();

/// Re-runs the evaluation with every test image JPEG-degraded at each QF;
/// references stay untouched.
SweepResult jpeg_robustness_sweep(const CorpusManifest& manifest, const GeneratorBackend& backend,
                                  const FacePreprocessor& preprocessor, std::span<const int> qfs,
                                  const EvalConfig& config);

}  // namespace diffid
