#pragma once

#include "diffid/backend.hpp"
#include "diffid/image.hpp"

namespace diffid {

/// The four attribute-aligned generations of a (reference, test) pair.
/// Naming: i_<identity source><attribute source>, r = reference, t = test.
struct ReconstructionQuad {
    Image i_rr;  // G(id_ref,  att_ref)
    Image i_tr;  // G(id_test, att_ref)
    Image i_tt;  // G(id_test, att_test)
    Image i_rt;  // G(id_ref,  att_test)

    IdentityEmbedding id_ref;
    IdentityEmbedding id_test;
    AttributeEmbedding att_ref;
    AttributeEmbedding att_test;
};

/// Extracts both embeddings of each image once and crosses them through the
/// generator. Backend failures are rethrown as BackendError naming the step.
ReconstructionQuad reconstruct_quad(const Image& ref, const Image& test, const GeneratorBackend& backend);

/// 2x2 sheet laid out as [i_rr i_tr; i_rt i_tt]: top row shares the
/// reference attributes, bottom row the test attributes.
Image quad_contact_sheet(const ReconstructionQuad& quad);

}  // namespace diffid
