#pragma once

#include <filesystem>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "diffid/backend.hpp"

namespace diffid {

// Real generators plug in through an external process speaking line-delimited
// JSON on stdin/stdout. One request per line, one reply per line:
//
//   {"op":"describe"}
//       -> {"ok":true,"height":H,"width":W,"normalizes_identity":bool,"name":"..."}
//   {"op":"encode_identity","image":"/abs/in.png"}
//       -> {"ok":true,"identity":[...]}
//   {"op":"encode_attributes","image":"/abs/in.png"}
//       -> {"ok":true,"attributes":[...],"yaw":deg}          (yaw optional)
//   {"op":"generate","identity":[...],"attributes":[...],"output":"/abs/out.png"}
//       -> {"ok":true}                                         (PNG written to output)
//
// Any reply may instead be {"ok":false,"error":"..."}. Model files are located
// by the adapter itself, typically through environment variables.

class SubprocessAdapter : public GeneratorBackend {
public:
    /// `argv[0]` is looked up on PATH. Spawns the process and issues describe.
    explicit SubprocessAdapter(std::vector<std::string> argv);
    ~SubprocessAdapter() override;

    SubprocessAdapter(const SubprocessAdapter&) = delete;
    SubprocessAdapter& operator=(const SubprocessAdapter&) = delete;

    IdentityEmbedding encode_identity(const Image& image) const override;
    AttributeEmbedding encode_attributes(const Image& image) const override;
    Image generate(const IdentityEmbedding& identity, const AttributeEmbedding& attributes) const override;
    Resolution working_resolution() const override { return resolution_; }
    bool normalizes_identity() const override { return normalizes_identity_; }
    /// One request in flight per process; the evaluation harness clones per worker.
    bool concurrent() const override { return false; }
    std::unique_ptr<GeneratorBackend> clone() const override;
    std::string name() const override { return name_; }

private:
    struct Process;

    nlohmann::json call(const nlohmann::json& request) const;
    std::filesystem::path scratch_file(const char* stem) const;

    std::vector<std::string> argv_;
    std::unique_ptr<Process> process_;
    std::filesystem::path scratch_;
    mutable std::mutex mutex_;
    mutable std::uint64_t counter_ = 0;
    Resolution resolution_;
    bool normalizes_identity_ = false;
    std::string name_;
};

/// Splits "adapter:<command line>" (whitespace-separated, no quoting) into argv.
std::vector<std::string> parse_adapter_spec(std::string_view spec);

}  // namespace diffid
