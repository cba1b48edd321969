#include "diffid/adapter.hpp"

#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <atomic>
#include <cerrno>
#include <csignal>
#include <cstdio>
#include <cstring>
#include <sstream>

#include "diffid/error.hpp"
#include "diffid/image_io.hpp"

extern char** environ;

namespace diffid {

struct SubprocessAdapter::Process {
    pid_t pid = -1;
    std::FILE* to_child = nullptr;
    std::FILE* from_child = nullptr;

    explicit Process(const std::vector<std::string>& argv) {
        if (argv.empty()) throw InvalidArgument("adapter: empty command line");
        // A dead adapter must surface as an error, not kill the host with SIGPIPE.
        struct sigaction old {};
        if (sigaction(SIGPIPE, nullptr, &old) == 0 && old.sa_handler == SIG_DFL) std::signal(SIGPIPE, SIG_IGN);

        int in_pipe[2];
        int out_pipe[2];
        if (pipe(in_pipe) != 0) throw BackendError(std::string("adapter: pipe failed: ") + std::strerror(errno));
        if (pipe(out_pipe) != 0) {
            close(in_pipe[0]);
            close(in_pipe[1]);
            throw BackendError(std::string("adapter: pipe failed: ") + std::strerror(errno));
        }
        posix_spawn_file_actions_t actions;
        posix_spawn_file_actions_init(&actions);
        posix_spawn_file_actions_adddup2(&actions, in_pipe[0], STDIN_FILENO);
        posix_spawn_file_actions_adddup2(&actions, out_pipe[1], STDOUT_FILENO);
        for (int fd : {in_pipe[0], in_pipe[1], out_pipe[0], out_pipe[1]}) posix_spawn_file_actions_addclose(&actions, fd);

        std::vector<char*> args;
        for (const auto& a : argv) args.push_back(const_cast<char*>(a.c_str()));
        args.push_back(nullptr);
        const int rc = posix_spawnp(&pid, args[0], &actions, nullptr, args.data(), environ);
        posix_spawn_file_actions_destroy(&actions);
        close(in_pipe[0]);
        close(out_pipe[1]);
        if (rc != 0) {
            close(in_pipe[1]);
            close(out_pipe[0]);
            throw BackendError("adapter: cannot start '" + argv[0] + "': " + std::strerror(rc));
        }
        to_child = fdopen(in_pipe[1], "w");
        from_child = fdopen(out_pipe[0], "r");
    }

    ~Process() {
        if (to_child) std::fclose(to_child);
        if (from_child) std::fclose(from_child);
        if (pid > 0) {
            int status = 0;
            waitpid(pid, &status, 0);
        }
    }

    Process(const Process&) = delete;
    Process& operator=(const Process&) = delete;
};

namespace {

std::atomic<std::uint64_t> g_instances{0};

}  // namespace

SubprocessAdapter::SubprocessAdapter(std::vector<std::string> argv) : argv_(std::move(argv)) {
    process_ = std::make_unique<Process>(argv_);
    scratch_ = std::filesystem::temp_directory_path() /
               ("diffid-adapter-" + std::to_string(getpid()) + "-" + std::to_string(g_instances++));
    std::filesystem::create_directories(scratch_);

    const auto d = call({{"op", "describe"}});
    try {
        resolution_ = {d.at("height").get<int>(), d.at("width").get<int>()};
        normalizes_identity_ = d.value("normalizes_identity", false);
        name_ = "adapter:" + d.value("name", argv_.front());
    } catch (const nlohmann::json::exception& e) {
        throw BackendError(std::string("adapter: malformed describe reply: ") + e.what());
    }
    if (resolution_.height < 1 || resolution_.width < 1) throw BackendError("adapter: invalid working resolution");
}

SubprocessAdapter::~SubprocessAdapter() {
    process_.reset();
    std::error_code ec;
    std::filesystem::remove_all(scratch_, ec);
}

nlohmann::json SubprocessAdapter::call(const nlohmann::json& request) const {
    const std::lock_guard lock(mutex_);
    const std::string op = request.value("op", "");
    const std::string line = request.dump() + "\n";
    if (std::fputs(line.c_str(), process_->to_child) == EOF || std::fflush(process_->to_child) != 0) {
        throw BackendError("adapter: cannot send '" + op + "' (process gone?)");
    }
    std::string reply;
    char buf[4096];
    while (std::fgets(buf, sizeof buf, process_->from_child)) {
        reply += buf;
        if (!reply.empty() && reply.back() == '\n') break;
    }
    if (reply.empty()) throw BackendError("adapter: no reply to '" + op + "'");
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(reply);
    } catch (const nlohmann::json::exception& e) {
        throw BackendError("adapter: unparseable reply to '" + op + "': " + e.what());
    }
    if (!j.value("ok", false)) throw BackendError("adapter: '" + op + "' failed: " + j.value("error", "no message"));
    return j;
}

std::filesystem::path SubprocessAdapter::scratch_file(const char* stem) const {
    const std::lock_guard lock(mutex_);
    return scratch_ / (std::string(stem) + "-" + std::to_string(counter_++) + ".png");
}

IdentityEmbedding SubprocessAdapter::encode_identity(const Image& image) const {
    const auto path = scratch_file("in");
    write_png(path, image);
    const auto j = call({{"op", "encode_identity"}, {"image", path.string()}});
    std::filesystem::remove(path);
    IdentityEmbedding z;
    try {
        z.values = j.at("identity").get<std::vector<double>>();
    } catch (const nlohmann::json::exception& e) {
        throw BackendError(std::string("adapter: malformed identity reply: ") + e.what());
    }
    z.validate();
    return z;
}

AttributeEmbedding SubprocessAdapter::encode_attributes(const Image& image) const {
    const auto path = scratch_file("in");
    write_png(path, image);
    const auto j = call({{"op", "encode_attributes"}, {"image", path.string()}});
    std::filesystem::remove(path);
    AttributeEmbedding a;
    try {
        a.values = j.at("attributes").get<std::vector<double>>();
        if (j.contains("yaw") && !j["yaw"].is_null()) a.yaw_deg = j["yaw"].get<double>();
    } catch (const nlohmann::json::exception& e) {
        throw BackendError(std::string("adapter: malformed attribute reply: ") + e.what());
    }
    return a;
}

Image SubprocessAdapter::generate(const IdentityEmbedding& identity, const AttributeEmbedding& attributes) const {
    const auto path = scratch_file("out");
    nlohmann::json req{{"op", "generate"}, {"identity", identity.values}, {"attributes", attributes.values},
                       {"output", path.string()}};
    if (attributes.yaw_deg) req["yaw"] = *attributes.yaw_deg;
    call(req);
    Image out = read_png(path);
    std::filesystem::remove(path);
    if (out.height() != resolution_.height || out.width() != resolution_.width) {
        throw BackendError("adapter: generated image does not match the declared working resolution");
    }
    return out;
}

std::unique_ptr<GeneratorBackend> SubprocessAdapter::clone() const { return std::make_unique<SubprocessAdapter>(argv_); }

std::vector<std::string> parse_adapter_spec(std::string_view spec) {
    constexpr std::string_view prefix = "adapter:";
    if (spec.starts_with(prefix)) spec.remove_prefix(prefix.size());
    std::istringstream in{std::string(spec)};
    std::vector<std::string> argv;
    for (std::string word; in >> word;) argv.push_back(word);
    if (argv.empty()) throw InvalidArgument("adapter spec names no executable");
    return argv;
}

}  // namespace diffid
