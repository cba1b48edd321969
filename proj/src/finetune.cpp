#include "diffid/finetune.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "diffid/error.hpp"
#include "diffid/rng.hpp"

namespace diffid {

PyramidL1Distance::PyramidL1Distance(int levels) : levels_(levels) {
    if (levels < 1) throw InvalidArgument("pyramid distance needs at least one level");
}

double PyramidL1Distance::distance(const Image& a, const Image& b) const {
    if (!a.same_shape(b)) throw ShapeError("perceptual distance: images differ in shape");
    Image x = a;
    Image y = b;
    double acc = 0.0;
    int used = 0;
    for (int level = 0; level < levels_; ++level) {
        if (level > 0) {
            if (x.height() < 2 || x.width() < 2) break;
            x = downsample2(x);
            y = downsample2(y);
        }
        acc += mean_abs_diff(x, y);
        ++used;
    }
    return acc / used;
}

double identity_constraint_loss(const IdentityEmbedding& result, const IdentityEmbedding& source) {
    return cosine_distance(result, source);
}

FinetuneLosses attribute_constraint_loss(const Image& result, const Image& target, const PerceptualDistance& perc) {
    if (!result.same_shape(target)) throw ShapeError("attribute loss: result and target differ in shape");
    FinetuneLosses l;
    l.l_att_pixel = mean_abs_diff(result, target);
    l.l_att_perceptual = perc.distance(result, target);
    l.total = l.l_att_pixel + l.l_att_perceptual;
    return l;
}

std::vector<TrainingPair> make_training_set(const SyntheticWorld& world, int identities, int variants,
                                            std::uint64_t seed) {
    if (identities < 1 || variants < 2) {
        throw InvalidArgument("training set needs at least one identity and two attribute variants");
    }
    const std::uint64_t root = derive_seed(world.config().seed, {hash_string("finetune"), seed});
    std::vector<TrainingPair> pairs;
    for (int i = 0; i < identities; ++i) {
        // Identities disjoint from the evaluation corpus.
        const int index = 1000 + i;
        const auto mu = world.identity_latent(index);
        const double log_detail = world.identity_log_detail(index);
        std::vector<Image> renders;
        for (int v = 0; v < variants; ++v) {
            Rng rng(derive_seed(root, {static_cast<std::uint64_t>(i), static_cast<std::uint64_t>(v)}));
            const auto attr = world.sample_attributes(rng, log_detail);
            renders.push_back(world.make_real(mu, attr, derive_seed(root, {hash_string("sample"),
                                                                           static_cast<std::uint64_t>(i),
                                                                           static_cast<std::uint64_t>(v)}))
                                  .image);
        }
        for (int s = 0; s < variants; ++s) {
            for (int t = 0; t < variants; ++t) {
                if (s != t) pairs.push_back({renders[static_cast<std::size_t>(s)], renders[static_cast<std::size_t>(t)]});
            }
        }
    }
    return pairs;
}

FinetuneLosses training_loss(const GeneratorBackend& backend, std::span<const TrainingPair> train,
                             const PerceptualDistance& perc, const LossWeights& weights) {
    if (train.empty()) throw InvalidArgument("fine-tuning needs a nonempty training set");
    FinetuneLosses mean;
    for (const auto& pair : train) {
        const auto z_source = backend.encode_identity(pair.source);
        const Image result = backend.generate(z_source, backend.encode_attributes(pair.target));
        const double l_id = identity_constraint_loss(backend.encode_identity(result), z_source);
        const auto att = attribute_constraint_loss(result, pair.target, perc);
        mean.l_id += l_id;
        mean.l_att_pixel += att.l_att_pixel;
        mean.l_att_perceptual += att.l_att_perceptual;
    }
    const double n = static_cast<double>(train.size());
    mean.l_id = weights.identity * mean.l_id / n;
    mean.l_att_pixel = weights.pixel * mean.l_att_pixel / n;
    mean.l_att_perceptual = weights.perceptual * mean.l_att_perceptual / n;
    mean.total = mean.l_id + mean.l_att_pixel + mean.l_att_perceptual;
    return mean;
}

SyntheticWorldConfig FinetuneResult::apply(SyntheticWorldConfig cfg) const {
    cfg.generator_leakage = kappa;
    cfg.generator_blur = beta;
    return cfg;
}

namespace {

class Search {
public:
    Search(const SyntheticWorldConfig& cfg, std::span<const TrainingPair> train, const PerceptualDistance& perc,
           const FinetuneOptions& options)
        : cfg_(cfg), train_(train), perc_(perc), options_(options) {}

    bool exhausted() const { return static_cast<int>(result_.trace.size()) >= options_.budget; }

    // Evaluates (kappa, beta) and accepts it if strictly better than the incumbent.
    bool try_point(double kappa, double beta) {
        kappa = snap(std::clamp(kappa, 0.0, 1.0));
        beta = snap(std::max(beta, 0.0));
        SyntheticWorldConfig c = cfg_;
        c.generator_leakage = kappa;
        c.generator_blur = beta;
        const SyntheticBackend backend(c);
        TraceRow row{static_cast<int>(result_.trace.size()), kappa, beta,
                     training_loss(backend, train_, perc_, options_.weights), false};
        if (result_.trace.empty()) {
            result_.start = row.losses;
            row.accepted = true;
        } else {
            row.accepted = row.losses.total < result_.best.total;
        }
        if (row.accepted) {
            result_.best = row.losses;
            result_.kappa = kappa;
            result_.beta = beta;
        }
        result_.trace.push_back(row);
        return row.accepted;
    }

    FinetuneResult& result() { return result_; }

private:
    static double snap(double v) { return std::abs(v) < 1e-12 ? 0.0 : v; }

    SyntheticWorldConfig cfg_;
    std::span<const TrainingPair> train_;
    const PerceptualDistance& perc_;
    FinetuneOptions options_;
    FinetuneResult result_;
};

void coordinate_descent(Search& s, const FinetuneOptions& o) {
    double steps[2] = {o.kappa_step, o.beta_step};
    while (!s.exhausted() && std::max(steps[0], steps[1]) >= o.min_step) {
        bool improved = false;
        for (int axis = 0; axis < 2 && !s.exhausted(); ++axis) {
            for (double sign : {-1.0, 1.0}) {
                if (s.exhausted()) break;
                const double k = s.result().kappa + (axis == 0 ? sign * steps[0] : 0.0);
                const double b = s.result().beta + (axis == 1 ? sign * steps[1] : 0.0);
                if (k < 0.0 || k > 1.0 || b < 0.0) continue;
                if (s.try_point(k, b)) {
                    improved = true;
                    break;
                }
            }
        }
        if (!improved) {
            steps[0] /= 2.0;
            steps[1] /= 2.0;
        }
    }
}

void grid_search(Search& s, const FinetuneOptions& o, double kappa0, double beta0) {
    const int n = std::max(o.grid_points, 2);
    const double kmax = std::min(1.0, 2.0 * std::max(kappa0, o.kappa_step));
    const double bmax = 2.0 * std::max(beta0, o.beta_step);
    for (int i = 0; i < n && !s.exhausted(); ++i) {
        for (int j = 0; j < n && !s.exhausted(); ++j) {
            s.try_point(kmax * i / (n - 1), bmax * j / (n - 1));
        }
    }
}

}  // namespace

FinetuneResult finetune_synthetic_generator(const SyntheticWorldConfig& cfg, std::span<const TrainingPair> train,
                                            const PerceptualDistance& perc, const FinetuneOptions& options) {
    cfg.validate();
    if (train.empty()) throw InvalidArgument("fine-tuning needs a nonempty training set");
    if (options.budget < 1) throw InvalidArgument("fine-tuning budget must be >= 1");
    Search search(cfg, train, perc, options);
    search.try_point(cfg.generator_leakage, cfg.generator_blur);
    if (search.result().start.total > 0.0) {
        if (options.method == SearchMethod::Grid) {
            grid_search(search, options, cfg.generator_leakage, cfg.generator_blur);
        } else {
            coordinate_descent(search, options);
        }
    }
    return search.result();
}

void write_loss_trace_csv(const std::filesystem::path& path, const FinetuneResult& result) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out.precision(17);
    out << "step,kappa,beta,l_id,l_att_pixel,l_att_perceptual,total,accepted\n";
    for (const auto& r : result.trace) {
        out << r.step << ',' << r.kappa << ',' << r.beta << ',' << r.losses.l_id << ',' << r.losses.l_att_pixel << ','
            << r.losses.l_att_perceptual << ',' << r.losses.total << ',' << (r.accepted ? 1 : 0) << '\n';
    }
    if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace diffid
