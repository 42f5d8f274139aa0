#include <cstdio>
#include <filesystem>
#include <memory>
#include <optional>

#include <CLI11.hpp>
#include <httplib.h>
#include <spdlog/spdlog.h>

#include "service.hpp"
#include "tooling.hpp"

int main(int argc, char** argv) {
    namespace fs = std::filesystem;
    using namespace maskforge;

    CLI::App app{"maskforge try-on HTTP service", "maskforge_serve"};
    std::string host = "127.0.0.1";
    int port = 8080;
    int canon_side = tooling::kDefaultCanonSide;
    std::optional<fs::path> canon_path;
    std::optional<fs::path> lib_dir;
    std::optional<fs::path> labels_path;
    app.add_option("--host", host, "Bind address")->capture_default_str();
    app.add_option("--port", port, "Port (0 picks a free one)")->check(CLI::Range(0, 65535))->capture_default_str();
    app.add_option("--canon", canon_path, "Canonical layout JSON")->check(CLI::ExistingFile);
    app.add_option("--canon-size", canon_side, "Working side of the canonical frame")->check(CLI::Range(16, 4096));
    app.add_option("--lib", lib_dir, "Style library directory")->check(CLI::ExistingDirectory);
    app.add_option("--labels", labels_path, "Parsing label config JSON")->check(CLI::ExistingFile);
    CLI11_PARSE(app, argc, argv);

    tooling::configure_logging();
    auto state = std::make_shared<service::ServiceState>();
    try {
        state->canon = tooling::load_canon(canon_path, canon_side);
        state->library = tooling::load_library(lib_dir, state->canon);
        state->labels = tooling::load_labels(labels_path);
    } catch (const std::exception& e) {
        spdlog::error("startup failed: {}", e.what());
        return 2;
    }

    httplib::Server server;
    service::install_routes(server, state);
    if (port == 0) {
        port = server.bind_to_any_port(host);
    } else if (!server.bind_to_port(host, port)) {
        spdlog::error("cannot bind {}:{}", host, port);
        return 2;
    }
    std::fprintf(stderr, "listening on %s:%d (%zu templates)\n", host.c_str(), port, state->library.templates.size());
    return server.listen_after_bind() ? 0 : 3;
}
