#include "diffid/backend.hpp"

#include <algorithm>
#include <cmath>

#include "diffid/error.hpp"

namespace diffid {

namespace {

double sum_squares(const std::vector<double>& v) {
    double acc = 0.0;
    for (double x : v) acc += x * x;
    return acc;
}

}  // namespace

double IdentityEmbedding::norm() const { return std::sqrt(sum_squares(values)); }

void IdentityEmbedding::validate() const {
    for (double v : values) {
        if (!std::isfinite(v)) throw InvalidArgument("identity embedding has a non-finite entry");
    }
    if (!(sum_squares(values) > 0.0)) throw InvalidArgument("identity embedding has zero norm");
}

double cosine_distance(const IdentityEmbedding& a, const IdentityEmbedding& b) {
    if (a.dim() != b.dim()) throw ShapeError("identity embeddings differ in dimension");
    const double na = sum_squares(a.values);
    const double nb = sum_squares(b.values);
    if (!(na > 0.0) || !(nb > 0.0)) throw InvalidArgument("cosine of a zero-norm embedding");
    double dot = 0.0;
    for (std::size_t i = 0; i < a.dim(); ++i) dot += a.values[i] * b.values[i];
    // sqrt(na * nb) rather than sqrt(na) * sqrt(nb): exact 1 for identical inputs.
    const double cosine = std::clamp(dot / std::sqrt(na * nb), -1.0, 1.0);
    return 1.0 - cosine;
}

AlignedFace PassthroughPreprocessor::detect_align(const Image& image) const {
    if (image.height() != resolution_.height || image.width() != resolution_.width) {
        throw PreprocessError("passthrough preprocessor expects " + std::to_string(resolution_.height) +
                              "x" + std::to_string(resolution_.width) + " aligned faces, got " +
                              std::to_string(image.height()) + "x" + std::to_string(image.width()));
    }
    return AlignedFace{image, FaceMask::full(image.height(), image.width()), 0.0};
}

}  // namespace diffid
