#include "diffid/reconstruction.hpp"

#include <string>

#include "diffid/error.hpp"

namespace diffid {

namespace {

template <typename F>
auto with_context(const char* step, F&& f) -> decltype(f()) {
    try {
        return f();
    } catch (const std::exception& e) {
        throw BackendError(std::string("reconstruction failed at ") + step + ": " + e.what());
    }
}

}  // namespace

ReconstructionQuad reconstruct_quad(const Image& ref, const Image& test, const GeneratorBackend& backend) {
    const Resolution res = backend.working_resolution();
    for (const Image* img : {&ref, &test}) {
        if (img->height() != res.height || img->width() != res.width) {
            throw ShapeError("reconstruct_quad: input is " + std::to_string(img->height()) + "x" +
                             std::to_string(img->width()) + ", backend works at " +
                             std::to_string(res.height) + "x" + std::to_string(res.width));
        }
    }

    ReconstructionQuad q;
    q.id_ref = with_context("identity encoding of the reference", [&] { return backend.encode_identity(ref); });
    q.att_ref = with_context("attribute encoding of the reference", [&] { return backend.encode_attributes(ref); });
    q.id_test = with_context("identity encoding of the test image", [&] { return backend.encode_identity(test); });
    q.att_test = with_context("attribute encoding of the test image", [&] { return backend.encode_attributes(test); });

    q.i_rr = with_context("generation (id-ref, att-ref)", [&] { return backend.generate(q.id_ref, q.att_ref); });
    q.i_tr = with_context("generation (id-test, att-ref)", [&] { return backend.generate(q.id_test, q.att_ref); });
    q.i_tt = with_context("generation (id-test, att-test)", [&] { return backend.generate(q.id_test, q.att_test); });
    q.i_rt = with_context("generation (id-ref, att-test)", [&] { return backend.generate(q.id_ref, q.att_test); });
    return q;
}

Image quad_contact_sheet(const ReconstructionQuad& quad) {
    return contact_sheet(quad.i_rr, quad.i_tr, quad.i_rt, quad.i_tt);
}

}  // namespace diffid
