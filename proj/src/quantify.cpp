#include "diffid/quantify.hpp"

#include <algorithm>
#include <cmath>

#include "diffid/error.hpp"

namespace diffid {

std::string_view to_string(Space space) { return space == Space::Ref ? "ref" : "test"; }

bool DistanceTriple::feasible(double tol) const {
    return std::abs(l_recon - l_recon_id) <= l_id + tol && l_id <= l_recon + l_recon_id + tol;
}

DistanceTriple distance_triple(const Image& original, const ReconstructionQuad& quad, const FaceMask& mask,
                               Space space) {
    if (!mask.matches(original)) throw ShapeError("distance_triple: mask does not match the original image");
    const Image& self = space == Space::Ref ? quad.i_rr : quad.i_tt;
    const Image& cross = space == Space::Ref ? quad.i_tr : quad.i_rt;
    DistanceTriple t;
    t.space = space;
    t.l_recon = masked_l2(self, original, mask);
    t.l_recon_id = masked_l2(cross, original, mask);
    t.l_id = masked_l2(self, cross, mask);
    return t;
}

double angle_from_triple(const DistanceTriple& t, double eps) {
    if (t.l_recon < eps || t.l_recon_id < eps) return 0.0;
    const double num = t.l_recon * t.l_recon + t.l_recon_id * t.l_recon_id - t.l_id * t.l_id;
    const double arg = std::clamp(num / (2.0 * t.l_recon * t.l_recon_id), -1.0, 1.0);
    return std::acos(arg);
}

DiffIdScore diffid_metric(const DistanceTriple& ref, const DistanceTriple& test, double eps) {
    if (ref.space != Space::Ref || test.space != Space::Test) {
        throw InvalidArgument("diffid_metric: expects a ref-space and a test-space triple");
    }
    DiffIdScore s;
    s.ref = ref;
    s.test = test;
    s.ratio_ref = ref.l_id / std::max(ref.l_recon, eps);
    s.ratio_test = test.l_id / std::max(test.l_recon, eps);
    s.theta_ref = angle_from_triple(ref, eps);
    s.theta_test = angle_from_triple(test, eps);
    s.value = s.ratio_ref * s.ratio_test * (s.theta_ref + s.theta_test) / 2.0;
    return s;
}

double iesim_score(const Image& ref, const Image& test, const GeneratorBackend& backend) {
    return cosine_distance(backend.encode_identity(ref), backend.encode_identity(test));
}

DetectionResult detect(const Image& ref, const Image& test, const GeneratorBackend& backend,
                       const FacePreprocessor& preprocessor, const DetectOptions& options) {
    const AlignedFace ref_face = preprocessor.detect_align(ref);
    const AlignedFace test_face = preprocessor.detect_align(test);

    DetectionResult r;
    r.quad = reconstruct_quad(ref_face.image, test_face.image, backend);
    const FaceMask ref_mask =
        options.use_mask ? ref_face.mask : FaceMask::full(ref_face.image.height(), ref_face.image.width());
    const FaceMask test_mask =
        options.use_mask ? test_face.mask : FaceMask::full(test_face.image.height(), test_face.image.width());

    const auto ref_triple = distance_triple(ref_face.image, r.quad, ref_mask, Space::Ref);
    const auto test_triple = distance_triple(test_face.image, r.quad, test_mask, Space::Test);
    r.score = diffid_metric(ref_triple, test_triple, options.eps);
    r.iesim = cosine_distance(r.quad.id_ref, r.quad.id_test);
    r.threshold = options.threshold;
    r.fake = r.score.value > options.threshold;
    r.yaw_ref = ref_face.yaw_deg;
    r.yaw_test = test_face.yaw_deg;
    if (options.render_visualizations) {
        r.diff_ref_space = render_diff_visualization(pixel_diff(r.quad.i_rr, r.quad.i_tr), options.gain);
        r.diff_test_space = render_diff_visualization(pixel_diff(r.quad.i_tt, r.quad.i_rt), options.gain);
    }
    return r;
}

}  // namespace diffid
