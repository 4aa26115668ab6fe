#include "cspace/error.hpp"
#include "cspace/http.hpp"
#include "cspace/service.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <csignal>
#include <fstream>
#include <iostream>

namespace {

cspace::HttpServer* g_server = nullptr;

void on_signal(int) {
    if (g_server) g_server->stop();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Concept-space refinement server"};
    std::string corpus, embeddings, config_path, host = "127.0.0.1";
    int port = 8080;
    std::optional<std::uint64_t> seed;
    bool dump_config = false;
    app.add_option("--corpus", corpus, "Documents as JSON lines or plain text")->check(CLI::ExistingPath);
    app.add_option("--embeddings", embeddings, "Word vectors, one `word f1 ... fd` row per line")->check(CLI::ExistingFile);
    app.add_option("--port", port, "Port to listen on")->check(CLI::Range(0, 65535));
    app.add_option("--host", host, "Address to bind");
    app.add_option("--config", config_path, "JSON session config")->check(CLI::ExistingFile);
    app.add_option("--seed", seed, "t-SNE seed");
    app.add_flag("--dump-config", dump_config, "Print the effective config and exit");
    CLI11_PARSE(app, argc, argv);

    try {
        nlohmann::json cj = nlohmann::json::object();
        if (!config_path.empty()) {
            std::ifstream in(config_path);
            cj = nlohmann::json::parse(in);
        }
        auto config = cspace::SessionConfig::from_json(cj);
        if (seed) config.tsne.seed = *seed;
        if (dump_config) {
            std::cout << config.to_json().dump(2) << '\n';
            return 0;
        }

        cspace::SessionManager sessions;
        if (!corpus.empty() || !embeddings.empty()) {
            if (corpus.empty() || embeddings.empty()) {
                std::cerr << "--corpus and --embeddings go together\n";
                return 2;
            }
            cspace::SessionSources sources;
            sources.corpus_path = corpus;
            sources.embeddings_path = embeddings;
            const auto s = sessions.create(std::move(sources), config);
            const auto snap = s->snapshot();
            std::cout << "session " << s->id() << ": " << snap->hierarchy.concepts.size() << " concepts, "
                      << snap->topics.topics.size() << " topics\n";
        }

        cspace::HttpServer server(sessions);
        g_server = &server;
        std::signal(SIGINT, on_signal);
        std::signal(SIGTERM, on_signal);
        if (port == 0) {
            port = server.bind_any(host);
            if (port < 0) {
                std::cerr << "cannot bind " << host << '\n';
                return 1;
            }
            std::cout << "listening on http://" << host << ':' << port << std::endl;
            return server.serve() ? 0 : 1;
        }
        std::cout << "listening on http://" << host << ':' << port << std::endl;
        if (!server.listen(host, port)) {
            std::cerr << "cannot listen on " << host << ':' << port << '\n';
            return 1;
        }
    } catch (const cspace::Error& e) {
        std::cerr << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
