#include "cspace/http.hpp"

#include "cspace/error.hpp"

#include <httplib.h>
#include <nlohmann/json.hpp>

namespace cspace {

using json = nlohmann::json;

int http_status(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::UnknownSession: return 404;
    case ErrorKind::UnknownTarget:
    case ErrorKind::UnknownWord:
    case ErrorKind::UnknownConcept: return 404;
    case ErrorKind::JobAlreadyRunning:
    case ErrorKind::EmptyQueue: return 409;
    case ErrorKind::ForbiddenAction:
    case ErrorKind::LastConcept: return 422;
    default: return 400;
    }
}

namespace {

void send(httplib::Response& res, const json& body, int status = 200) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

void fail(httplib::Response& res, int status, const std::string& kind, const std::string& message) {
    send(res, {{"error", kind}, {"message", message}}, status);
}

json parse_body(const httplib::Request& req) {
    if (req.body.empty()) return json::object();
    try {
        return json::parse(req.body);
    } catch (const json::exception& e) {
        throw Error(ErrorKind::InvalidArgument, std::string("body is not JSON: ") + e.what());
    }
}

double number_param(const httplib::Request& req, const char* name, std::optional<double> fallback = std::nullopt) {
    if (!req.has_param(name)) {
        if (fallback) return *fallback;
        throw Error(ErrorKind::InvalidArgument, std::string("missing query parameter ") + name);
    }
    try {
        std::size_t used = 0;
        const auto v = req.get_param_value(name);
        const double x = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return x;
    } catch (const std::exception&) {
        throw Error(ErrorKind::InvalidArgument, std::string("query parameter ") + name + " is not a number");
    }
}

json snapshot_summary(const Session& s, const Snapshot& snap) {
    return {{"session", s.id()},
            {"generation", snap.generation},
            {"hierarchy_hash", snap.hierarchy_hash},
            {"topic_hash", snap.topic_hash},
            {"level", snap.hierarchy.level},
            {"projection_stale", snap.projection_stale},
            {"topics_stale", snap.topics_stale},
            {"recommendations", snap.queue.size()}};
}

json recommendations_json(const Snapshot& snap) {
    json items = json::array();
    for (std::size_t i = 0; i < snap.queue.size(); ++i) {
        auto j = snap.queue[i].to_json();
        j["index"] = i;
        items.push_back(std::move(j));
    }
    return {{"generation", snap.generation}, {"items", std::move(items)}};
}

}  // namespace

struct HttpServer::Impl {
    SessionManager& sessions;
    httplib::Server server;
    int bound_port = -1;

    explicit Impl(SessionManager& m) : sessions(m) {}

    using Handler = std::function<void(const httplib::Request&, httplib::Response&)>;

    // Wraps a handler so library errors map onto status codes.
    static httplib::Server::Handler guarded(Handler h) {
        return [h = std::move(h)](const httplib::Request& req, httplib::Response& res) {
            try {
                h(req, res);
            } catch (const Error& e) {
                fail(res, http_status(e.kind()), std::string(to_string(e.kind())), e.what());
            } catch (const json::exception& e) {
                fail(res, 400, "InvalidArgument", e.what());
            } catch (const std::exception& e) {
                fail(res, 500, "Internal", e.what());
            }
        };
    }

    std::shared_ptr<Session> session(const httplib::Request& req) const { return sessions.get(req.matches[1]); }

    void routes() {
        server.Get("/health", guarded([](const httplib::Request&, httplib::Response& res) { send(res, {{"status", "ok"}}); }));

        server.Get("/sessions", guarded([this](const httplib::Request&, httplib::Response& res) { send(res, {{"sessions", sessions.ids()}}); }));

        server.Post("/sessions", guarded([this](const httplib::Request& req, httplib::Response& res) {
            auto body = parse_body(req);
            std::shared_ptr<Session> s;
            if (body.contains("load")) {
                s = sessions.load(body["load"].get<std::string>());
            } else {
                auto r = CreateRequest::from_json(body);
                s = sessions.create(std::move(r.sources), std::move(r.config));
            }
            auto snap = s->snapshot();
            send(res, snapshot_summary(*s, *snap), 201);
        }));

        server.Delete(R"(/sessions/([^/]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
            if (!sessions.erase(req.matches[1])) throw Error(ErrorKind::UnknownSession, req.matches[1]);
            send(res, {{"deleted", std::string(req.matches[1])}});
        }));

        server.Get(R"(/sessions/([^/]+)/state)", guarded([this](const httplib::Request& req, httplib::Response& res) {
            const auto view = req.has_param("view") ? req.get_param_value("view") : std::string("concept");
            send(res, session(req)->state(view));
        }));

        server.Get(R"(/sessions/([^/]+)/config)",
                   guarded([this](const httplib::Request& req, httplib::Response& res) { send(res, session(req)->config().to_json()); }));

        server.Post(R"(/sessions/([^/]+)/actions)", guarded([this](const httplib::Request& req, httplib::Response& res) {
            auto s = session(req);
            const auto action = RefinementAction::from_json(parse_body(req));
            const auto snap = s->apply_action(action);
            send(res, snapshot_summary(*s, *snap));
        }));

        server.Get(R"(/sessions/([^/]+)/actions)",
                   guarded([this](const httplib::Request& req, httplib::Response& res) { send(res, session(req)->export_artifact("log")); }));

        server.Get(R"(/sessions/([^/]+)/permitted)", guarded([this](const httplib::Request& req, httplib::Response& res) {
            auto s = session(req);
            const auto snap = s->snapshot();
            if (!req.has_param("word")) throw Error(ErrorKind::InvalidArgument, "missing query parameter word");
            const auto w = req.get_param_value("word");
            const auto role = role_of(snap->hierarchy, w);
            json kinds = json::array();
            if (role) {
                for (const auto k : permitted_actions(*role)) kinds.push_back(std::string(to_string(k)));
            }
            send(res, {{"word", w}, {"role", role ? json(std::string(to_string(*role))) : json(nullptr)}, {"actions", kinds}});
        }));

        server.Post(R"(/sessions/([^/]+)/recompute/(tsne|topics))", guarded([this](const httplib::Request& req, httplib::Response& res) {
            auto s = session(req);
            s->start_job(parse_job_kind(std::string(req.matches[2])));
            send(res, s->job().to_json(), 202);
        }));

        server.Post(R"(/sessions/([^/]+)/jobs/current/cancel)", guarded([this](const httplib::Request& req, httplib::Response& res) {
            auto s = session(req);
            s->cancel_job();
            send(res, s->job().to_json());
        }));

        server.Get(R"(/sessions/([^/]+)/jobs/current)",
                   guarded([this](const httplib::Request& req, httplib::Response& res) { send(res, session(req)->job().to_json()); }));

        server.Get(R"(/sessions/([^/]+)/recommendations)", guarded([this](const httplib::Request& req, httplib::Response& res) {
            send(res, recommendations_json(*session(req)->snapshot()));
        }));

        server.Post(R"(/sessions/([^/]+)/recommendations/(\d+)/(accept|reject))",
                    guarded([this](const httplib::Request& req, httplib::Response& res) {
                        auto s = session(req);
                        const auto index = static_cast<std::size_t>(std::stoul(std::string(req.matches[2])));
                        const auto snap = std::string(req.matches[3]) == "accept" ? s->accept_recommendation(index)
                                                                                   : s->reject_recommendation(index);
                        auto out = snapshot_summary(*s, *snap);
                        out["queue"] = recommendations_json(*snap)["items"];
                        send(res, out);
                    }));

        server.Get(R"(/sessions/([^/]+)/quality)", guarded([this](const httplib::Request& req, httplib::Response& res) {
            auto s = session(req);
            const auto snap = s->snapshot();
            auto out = snap->quality.to_json();
            out["generation"] = snap->generation;
            send(res, out);
        }));

        server.Get(R"(/sessions/([^/]+)/search)", guarded([this](const httplib::Request& req, httplib::Response& res) {
            auto s = session(req);
            const auto q = req.has_param("q") ? req.get_param_value("q") : std::string();
            json hits = json::array();
            for (const auto& h : s->search(q)) hits.push_back(h.to_json());
            send(res, {{"query", q}, {"results", hits}});
        }));

        server.Get(R"(/sessions/([^/]+)/xray)", guarded([this](const httplib::Request& req, httplib::Response& res) {
            auto s = session(req);
            const Vec2 p{number_param(req, "x"), number_param(req, "y")};
            send(res, s->xray(p, number_param(req, "r", 5.0)));
        }));

        server.Get(R"(/sessions/([^/]+)/abstraction)", guarded([this](const httplib::Request& req, httplib::Response& res) {
            send(res, {{"level", session(req)->abstraction_level()}, {"min", kMinLevel}, {"max", kMaxLevel}});
        }));

        server.Put(R"(/sessions/([^/]+)/abstraction)", guarded([this](const httplib::Request& req, httplib::Response& res) {
            auto s = session(req);
            const auto body = parse_body(req);
            if (!body.contains("level") || !body["level"].is_number_integer()) {
                throw Error(ErrorKind::InvalidArgument, "body needs an integer level");
            }
            const auto snap = s->set_abstraction_level(body["level"].get<int>());
            send(res, snapshot_summary(*s, *snap));
        }));

        server.Get(R"(/sessions/([^/]+)/export/(hierarchy|weights|topics|layout|projection))",
                   guarded([this](const httplib::Request& req, httplib::Response& res) {
                       send(res, session(req)->export_artifact(std::string(req.matches[2])));
                   }));

        server.Post(R"(/sessions/([^/]+)/save)", guarded([this](const httplib::Request& req, httplib::Response& res) {
            auto s = session(req);
            const auto body = parse_body(req);
            if (!body.contains("dir")) throw Error(ErrorKind::InvalidArgument, "body needs dir");
            s->save(body["dir"].get<std::string>());
            send(res, {{"saved", body["dir"]}});
        }));

        server.set_error_handler([](const httplib::Request&, httplib::Response& res) {
            if (res.body.empty()) fail(res, res.status, "NotFound", "no such endpoint");
        });
    }
};

HttpServer::HttpServer(SessionManager& sessions) : impl_(std::make_unique<Impl>(sessions)) { impl_->routes(); }

HttpServer::~HttpServer() { stop(); }

bool HttpServer::listen(const std::string& host, int port) { return impl_->server.listen(host, port); }

int HttpServer::bind_any(const std::string& host) {
    impl_->bound_port = impl_->server.bind_to_any_port(host);
    return impl_->bound_port;
}

bool HttpServer::serve() { return impl_->server.listen_after_bind(); }

void HttpServer::stop() {
    if (impl_->server.is_running()) impl_->server.stop();
}

bool HttpServer::running() const { return impl_->server.is_running(); }

}  // namespace cspace
