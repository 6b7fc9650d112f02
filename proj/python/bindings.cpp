#include "latticework/engine.hpp"
#include "latticework/error.hpp"
#include "latticework/ingestion.hpp"
#include "latticework/lattice.hpp"

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

namespace py = pybind11;
using nlohmann::json;

namespace {

py::object to_py(const json& j) {
    switch (j.type()) {
        case json::value_t::null:            return py::none();
        case json::value_t::boolean:         return py::bool_(j.get<bool>());
        case json::value_t::number_integer:  return py::int_(j.get<long long>());
        case json::value_t::number_unsigned: return py::int_(j.get<unsigned long long>());
        case json::value_t::number_float:    return py::float_(j.get<double>());
        case json::value_t::string:          return py::str(j.get_ref<const std::string&>());
        case json::value_t::array: {
            py::list out;
            for (const auto& e : j) out.append(to_py(e));
            return out;
        }
        case json::value_t::object: {
            py::dict out;
            for (const auto& [k, v] : j.items()) out[py::str(k)] = to_py(v);
            return out;
        }
        default: return py::none();
    }
}

json tasks_json(const std::vector<lw::Task>& ts) {
    json out = json::array();
    for (const auto& t : ts) out.push_back(lw::to_json(t));
    return out;
}

json actions_json(const std::vector<lw::ProposedAction>& as) {
    json out = json::array();
    for (const auto& a : as) out.push_back(lw::to_json(a));
    return out;
}

lw::Config make_config(const std::string& store, const std::map<std::string, std::string>& overrides) {
    lw::Config c;
    c.store_root = store;
    for (const auto& [k, v] : overrides) c.set_from_string(k, v);
    c.check();
    return c;
}

} // namespace

PYBIND11_MODULE(_latticework, m) {
    m.doc() = "Behavior-lattice engine";

    // Raised as LatticeworkError(code, message).
    static PyObject* error_type = PyErr_NewException("latticework._latticework.LatticeworkError", PyExc_RuntimeError, nullptr);
    m.attr("LatticeworkError") = py::handle(error_type);
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const lw::Error& e) {
            py::tuple args = py::make_tuple(std::string(lw::to_string(e.code())), std::string(e.what()));
            PyErr_SetObject(error_type, args.ptr());
        }
    });

    m.def("validate_lattice", [](const std::string& doc) {
        json out = json::array();
        for (const auto& v : lw::validate(lw::load(doc)))
            out.push_back({{"node", v.node}, {"rule", lw::to_string(v.rule)}, {"layer", v.layer}, {"detail", v.detail}});
        return to_py(out);
    }, py::arg("lattice_json"));

    m.def("descendants", [](const std::string& doc, const std::string& node) {
        auto trail = lw::descendants(lw::load(doc), node);
        json layers = json::object();
        for (const auto& [l, ids] : trail.descendants_by_layer) layers[std::to_string(l)] = ids;
        return to_py({{"root", trail.root}, {"nodes", layers}, {"leaf_observations", trail.leaf_observations}});
    }, py::arg("lattice_json"), py::arg("node_id"));

    m.def("segment_sessions", [](const std::string& records_jsonl, const std::string& policy, const std::string& tz) {
        auto sessions = lw::segment_sessions(lw::parse_records_jsonl(records_jsonl), lw::session_policy_from_string(policy),
                                             lw::TimeZone::parse(tz));
        json out = json::array();
        for (const auto& s : sessions) out.push_back(lw::to_json(s));
        return to_py(out);
    }, py::arg("records_jsonl"), py::arg("policy") = "calendar_day", py::arg("timezone") = "UTC");

    py::class_<lw::Engine>(m, "Engine")
        .def(py::init([](const std::string& store, const std::map<std::string, std::string>& overrides) {
                 return std::make_unique<lw::Engine>(make_config(store, overrides));
             }),
             py::arg("store"), py::arg("overrides") = std::map<std::string, std::string>{})
        .def("ingest", [](lw::Engine& e, const std::filesystem::path& records, std::optional<std::filesystem::path> denylist) {
                 auto s = e.ingest(records, denylist);
                 return to_py({{"kept", s.kept}, {"dropped", s.dropped}, {"sessions", s.sessions}});
             }, py::arg("records"), py::arg("denylist") = std::nullopt)
        .def("build", &lw::Engine::build)
        .def("merge", &lw::Engine::merge)
        .def("tasks", [](lw::Engine& e) {
                 auto s = e.tasks();
                 return to_py({{"task_day", s.task_day}, {"retained", tasks_json(s.retained)}, {"rejected", tasks_json(s.rejected)}});
             })
        .def("propose", [](lw::Engine& e) { return to_py(actions_json(e.propose())); })
        .def("actions", [](const lw::Engine& e) { return to_py(actions_json(e.actions())); })
        .def("steer", [](lw::Engine& e, const std::string& id, const std::string& note) { return to_py(lw::to_json(e.steer(id, note))); })
        .def("approve", [](lw::Engine& e, const std::string& id) { return to_py(lw::to_json(e.approve(id))); })
        .def("run", [](lw::Engine& e, const std::string& id) {
                 lw::AgentRun r;
                 {
                     py::gil_scoped_release release;
                     r = e.run_action(id);
                 }
                 return to_py(lw::to_json(r));
             })
        .def("final_lattice", [](const lw::Engine& e) { return lw::save(e.final_lattice()); })
        .def("export", [](const lw::Engine& e) { return to_py(e.export_insights()); })
        .def("provenance", [](const lw::Engine& e, const std::string& id) { return to_py(e.provenance(id)); });
}
