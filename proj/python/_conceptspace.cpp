#include "cspace/error.hpp"
#include "cspace/hierarchy.hpp"
#include "cspace/refinement.hpp"
#include "cspace/service.hpp"
#include "cspace/topicmodel.hpp"

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <nlohmann/json.hpp>

namespace py = pybind11;
using json = nlohmann::json;

namespace {

std::vector<std::vector<cspace::Vec2>> to_clusters(const std::vector<std::vector<std::pair<double, double>>>& in) {
    std::vector<std::vector<cspace::Vec2>> out;
    for (const auto& c : in) {
        auto& pts = out.emplace_back();
        for (const auto& [x, y] : c) pts.push_back({x, y});
    }
    return out;
}

std::unique_ptr<cspace::Session> make_session(const std::string& corpus, const std::string& embeddings,
                                              const std::string& config) {
    cspace::SessionSources src;
    src.corpus_path = corpus;
    src.embeddings_path = embeddings;
    auto cfg = cspace::SessionConfig::from_json(json::parse(config));
    return std::make_unique<cspace::Session>("py", std::move(src), std::move(cfg));
}

std::unique_ptr<cspace::Session> session_from_request(const std::string& request) {
    auto r = cspace::CreateRequest::from_json(json::parse(request));
    return std::make_unique<cspace::Session>("py", std::move(r.sources), std::move(r.config));
}

std::string summary(const cspace::Snapshot& s) {
    return json{{"generation", s.generation},
                {"hierarchy_hash", s.hierarchy_hash},
                {"topic_hash", s.topic_hash},
                {"projection_stale", s.projection_stale},
                {"topics_stale", s.topics_stale}}
        .dump();
}

}  // namespace

PYBIND11_MODULE(_conceptspace, m) {
    m.doc() = "Concept-space refinement engine";

    py::register_exception<cspace::Error>(m, "Error");
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const json::exception& e) {
            PyErr_SetString(PyExc_ValueError, e.what());
        }
    });

    m.def("default_config", [] { return cspace::SessionConfig{}.to_json().dump(); });
    m.def("rmsstd", [](const std::vector<std::vector<std::pair<double, double>>>& c) { return cspace::rmsstd(to_clusters(c)); });
    m.def("s_dbw", [](const std::vector<std::vector<std::pair<double, double>>>& c) { return cspace::s_dbw(to_clusters(c)); });
    m.def("effective_neighborhood", [](int level, int base) { return cspace::effective_neighborhood(level, base); },
          py::arg("level"), py::arg("base") = 6);
    m.def("spike", [](std::pair<double, double> owner, std::pair<double, double> target, double sim) {
        const auto s = cspace::make_spike({owner.first, owner.second}, {target.first, target.second}, sim);
        return py::dict(py::arg("endpoint") = std::make_pair(s.endpoint.x, s.endpoint.y),
                        py::arg("distance") = s.distance, py::arg("endpoint_distance") = s.endpoint_distance,
                        py::arg("opacity") = s.opacity);
    });

    py::class_<cspace::Session>(m, "Session")
        .def(py::init(&make_session), py::arg("corpus"), py::arg("embeddings"), py::arg("config") = "{}",
             py::call_guard<py::gil_scoped_release>())
        .def_static("from_request", &session_from_request, py::arg("request"), py::call_guard<py::gil_scoped_release>())
        .def_static("load", [](const std::string& dir) { return cspace::Session::load(dir); }, py::arg("dir"),
                    py::call_guard<py::gil_scoped_release>())
        .def_property_readonly("generation", [](const cspace::Session& s) { return s.snapshot()->generation; })
        .def_property_readonly("hierarchy_hash", [](const cspace::Session& s) { return s.snapshot()->hierarchy_hash; })
        .def_property_readonly("topic_hash", [](const cspace::Session& s) { return s.snapshot()->topic_hash; })
        .def_property("level", &cspace::Session::abstraction_level,
                      [](cspace::Session& s, int level) { s.set_abstraction_level(level); })
        .def("state", [](const cspace::Session& s, const std::string& view) { return s.state(view).dump(); },
             py::arg("view") = "concept")
        .def("apply", [](cspace::Session& s, const std::string& action) {
            return summary(*s.apply_action(cspace::RefinementAction::from_json(json::parse(action))));
        })
        .def("recommendations", [](const cspace::Session& s) {
            json j = json::array();
            for (const auto& r : s.snapshot()->queue) j.push_back(r.to_json());
            return j.dump();
        })
        .def("accept", [](cspace::Session& s, std::size_t i) { return summary(*s.accept_recommendation(i)); })
        .def("reject", [](cspace::Session& s, std::size_t i) { return summary(*s.reject_recommendation(i)); })
        .def("recompute", [](cspace::Session& s, const std::string& kind) { s.start_job(cspace::parse_job_kind(kind)); })
        .def("wait", &cspace::Session::wait_for_job, py::call_guard<py::gil_scoped_release>())
        .def("job", [](const cspace::Session& s) { return s.job().to_json().dump(); })
        .def("quality", [](const cspace::Session& s) { return s.snapshot()->quality.to_json().dump(); })
        .def("search", [](const cspace::Session& s, const std::string& q, std::size_t limit) {
            json j = json::array();
            for (const auto& h : s.search(q, limit)) j.push_back(h.to_json());
            return j.dump();
        }, py::arg("q"), py::arg("limit") = 20)
        .def("xray", [](const cspace::Session& s, double x, double y, double r) { return s.xray({x, y}, r).dump(); },
             py::arg("x"), py::arg("y"), py::arg("r") = 5.0)
        .def("export", [](const cspace::Session& s, const std::string& kind) { return s.export_artifact(kind).dump(); })
        .def("save", [](const cspace::Session& s, const std::string& dir) { s.save(dir); })
        .def("replay_matches", [](const cspace::Session& s) {
            const auto snap = s.snapshot();
            cspace::RefinementEnv env;
            env.store = &s.store();
            env.canvas = &snap->canvas;
            env.stats = &s.corpus().stats;
            env.params = s.config().abstraction;
            env.params.level = snap->hierarchy.level;
            return cspace::hierarchy_hash(cspace::replay(s.initial_hierarchy(), s.action_log(), env)) == snap->hierarchy_hash;
        });
}
