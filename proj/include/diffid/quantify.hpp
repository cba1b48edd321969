#pragma once

#include <string_view>

#include "diffid/backend.hpp"
#include "diffid/image.hpp"
#include "diffid/reconstruction.hpp"

namespace diffid {

/// Floor for l_recon denominators and degenerate-triangle detection.
inline constexpr double kDefaultEps = 1e-8;

enum class Space { Ref, Test };

std::string_view to_string(Space space);

/// Masked L2 distances within one attribute space:
///   l_recon    = |M (self-reconstruction - original)|
///   l_recon_id = |M (cross-identity generation - original)|
///   l_id       = |M (self-reconstruction - cross-identity generation)|
/// The three diff vectors close a triangle: v_recon + v_id = v_recon_id.
struct DistanceTriple {
    double l_recon = 0.0;
    double l_recon_id = 0.0;
    double l_id = 0.0;
    Space space = Space::Ref;

    /// |l_recon - l_recon_id| <= l_id <= l_recon + l_recon_id within `tol`.
    bool feasible(double tol = 1e-9) const;
};

struct DiffIdScore {
    double ratio_ref = 0.0;   // l_ref:id / l_ref:recon
    double ratio_test = 0.0;  // l_test:id / l_test:recon
    double theta_ref = 0.0;   // radians
    double theta_test = 0.0;
    double value = 0.0;       // the metric M
    DistanceTriple ref;
    DistanceTriple test;
};

/// Ref space uses (i_rr, i_tr) against the reference; test space mirrors it
/// with (i_tt, i_rt) against the test image. `mask` must belong to `original`.
DistanceTriple distance_triple(const Image& original, const ReconstructionQuad& quad, const FaceMask& mask,
                               Space space);

/// Angle between the l_recon and l_recon_id sides via the law of cosines,
/// argument clamped to [-1, 1]; 0 when either side is shorter than eps.
double angle_from_triple(const DistanceTriple& t, double eps = kDefaultEps);

/// M = (l_ref:id / max(l_ref:recon, eps)) (l_test:id / max(l_test:recon, eps)) (θ_ref + θ_test) / 2.
DiffIdScore diffid_metric(const DistanceTriple& ref, const DistanceTriple& test, double eps = kDefaultEps);

/// Identity-embedding baseline: 1 - cos(Φ_id(ref), Φ_id(test)), in [0, 2].
double iesim_score(const Image& ref, const Image& test, const GeneratorBackend& backend);

struct DetectOptions {
    double threshold = 0.6;
    double eps = kDefaultEps;
    /// When false the full frame is used instead of the face masks.
    bool use_mask = true;
    double gain = 5.0;
    bool render_visualizations = true;
};

struct DetectionResult {
    DiffIdScore score;
    /// 1 - cos of the identity embeddings already extracted for the quad.
    double iesim = 0.0;
    bool fake = false;
    double threshold = 0.0;
    double yaw_ref = 0.0;
    double yaw_test = 0.0;
    ReconstructionQuad quad;
    /// gain * diff(i_rr, i_tr) and gain * diff(i_tt, i_rt); empty when not rendered.
    Image diff_ref_space;
    Image diff_test_space;
};

/// preprocess -> reconstruct -> distance triples -> metric -> verdict.
/// PreprocessError and BackendError propagate unchanged.
DetectionResult detect(const Image& ref, const Image& test, const GeneratorBackend& backend,
                       const FacePreprocessor& preprocessor, const DetectOptions& options = {});

}  // namespace diffid
