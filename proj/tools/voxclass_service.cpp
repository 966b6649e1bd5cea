// Live classification backend: websocket sessions at /session, model
// metadata at GET /models. See docs/protocol.md.

#include <csignal>
#include <cstdlib>
#include <iostream>
#include <memory>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "voxclass/model_io.hpp"
#include "voxclass/service/server.hpp"

using namespace voxclass;

namespace {
service::Server* g_server = nullptr;

void on_signal(int) {
    // stop() only touches sockets; good enough for a local tool.
    if (g_server)
        std::thread([] { g_server->stop(); }).detach();
}
}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Streaming voice classification service"};
    std::vector<std::string> models;
    std::string host = "127.0.0.1";
    unsigned short port = 8765;
    service::SessionOptions options;
    app.add_option("--model", models, "Model file; repeat for several tasks")->required();
    app.add_option("--host", host, "Listen address")->capture_default_str();
    app.add_option("--port", port, "Listen port (0 = any free port)")->capture_default_str();
    app.add_option("--silence-rms", options.silence_rms, "RMS gate below which chunks count as silence")
        ->check(CLI::NonNegativeNumber)
        ->capture_default_str();
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }

    const char* log_env = std::getenv("VOXCLASS_LOG");
    const bool quiet = log_env != nullptr && std::string(log_env) == "quiet";
    service::ModelRegistry registry;
    try {
        for (const auto& path : models) {
            registry.add(load_model(path));
            if (!quiet)
                std::cerr << "loaded " << path << '\n';
        }
    } catch (const IoError& e) {
        std::cerr << "I/O error: " << e.what() << '\n';
        return 2;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    }

    try {
        service::Server server(registry, host, port, options, [quiet](const std::string& msg) {
            if (!quiet)
                std::cerr << msg << '\n';
        });
        g_server = &server;
        std::signal(SIGINT, on_signal);
        std::signal(SIGTERM, on_signal);
        // Scripts parse this line to find the port.
        std::cout << "listening " << host << ':' << server.port() << std::endl;
        server.run();
        g_server = nullptr;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
