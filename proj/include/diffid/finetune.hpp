#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "diffid/backend.hpp"
#include "diffid/image.hpp"
#include "diffid/synthetic.hpp"

namespace diffid {

/// Pluggable perceptual image distance. distance(a, a) == 0 and symmetric.
class PerceptualDistance {
public:
    virtual ~PerceptualDistance() = default;
    virtual double distance(const Image& a, const Image& b) const = 0;
    virtual std::string name() const = 0;
};

/// Mean absolute difference averaged over a box-downsampled pyramid
/// (full, 1/2, 1/4 resolution by default).
class PyramidL1Distance : public PerceptualDistance {
public:
    explicit PyramidL1Distance(int levels = 3);
    double distance(const Image& a, const Image& b) const override;
    std::string name() const override { return "pyramid-l1"; }

private:
    int levels_;
};

struct FinetuneLosses {
    double l_id = 0.0;
    double l_att_pixel = 0.0;
    double l_att_perceptual = 0.0;
    double total = 0.0;
};

struct LossWeights {
    double identity = 1.0;
    double pixel = 1.0;
    double perceptual = 1.0;
};

/// 1 - cos(result, source).
double identity_constraint_loss(const IdentityEmbedding& result, const IdentityEmbedding& source);

/// Attribute parts only: pixel = mean |result - target|, perceptual = perc(result, target).
/// l_id is left at 0 and total is their sum.
FinetuneLosses attribute_constraint_loss(const Image& result, const Image& target, const PerceptualDistance& perc);

/// A swap whose source and target show the same person under different attributes.
struct TrainingPair {
    Image source;
    Image target;
};

/// `identities` x `variants` renders, paired into every ordered (source, target)
/// combination of distinct variants within an identity.
std::vector<TrainingPair> make_training_set(const SyntheticWorld& world, int identities = 10, int variants = 4,
                                            std::uint64_t seed = 0);

/// Mean weighted losses of the generator `backend` over the training pairs.
FinetuneLosses training_loss(const GeneratorBackend& backend, std::span<const TrainingPair> train,
                             const PerceptualDistance& perc, const LossWeights& weights = {});

enum class SearchMethod { Grid, CoordinateDescent };

struct FinetuneOptions {
    SearchMethod method = SearchMethod::CoordinateDescent;
    /// Maximum number of loss evaluations, the starting point included.
    int budget = 40;
    LossWeights weights;
    double kappa_step = 0.1;
    double beta_step = 0.5;
    /// Steps are halved after a sweep without improvement until they drop below this.
    double min_step = 1e-3;
    int grid_points = 5;
};

struct TraceRow {
    int step = 0;
    double kappa = 0.0;
    double beta = 0.0;
    FinetuneLosses losses;
    bool accepted = false;
};

struct FinetuneResult {
    double kappa = 0.0;
    double beta = 0.0;
    FinetuneLosses start;
    FinetuneLosses best;
    std::vector<TraceRow> trace;

    /// The input config with the tuned leakage and blur.
    SyntheticWorldConfig apply(SyntheticWorldConfig cfg) const;
};

/// Derivative-free search over the synthetic generator's (leakage, blur),
/// starting from the values in `cfg`. Never returns a loss above the start.
FinetuneResult finetune_synthetic_generator(const SyntheticWorldConfig& cfg, std::span<const TrainingPair> train,
                                            const PerceptualDistance& perc, const FinetuneOptions& options = {});

/// CSV: step,kappa,beta,l_id,l_att_pixel,l_att_perceptual,total,accepted
void write_loss_trace_csv(const std::filesystem::path& path, const FinetuneResult& result);

}  // namespace diffid
