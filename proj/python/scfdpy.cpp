/**
 * @file scfdpy.cpp
 * @brief Python bindings: trace generation, training, classification,
 *        profile persistence and the sequence-model baseline.
 */
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "scfd/detector.hpp"
#include "scfd/pst.hpp"
#include "scfd/synthgen.hpp"

namespace py = pybind11;
using namespace scfd;

namespace {

ExecutionTrace trace_from_calls(const std::vector<std::string>& calls, const std::string& source_id, bool terminated) {
    ExecutionTrace t;
    t.source_id = source_id;
    t.events.push_back(TraceEvent::begin());
    for (const auto& c : calls) t.events.push_back(TraceEvent::call(c));
    if (terminated) t.events.push_back(TraceEvent::end());
    return t;
}

AttackKind attack_of(const std::string& name) {
    if (auto a = parse_attack(name)) return *a;
    throw py::value_error("unknown attack '" + name + "'");
}

py::dict verdict_dict(const Verdict& v) {
    py::dict d;
    d["malicious"] = v.malicious;
    d["rule"] = rule_token(v.rule);
    d["distance"] = v.distance;
    d["theta"] = v.theta;
    d["cluster"] = v.closest_cluster ? py::cast(*v.closest_cluster) : py::none();
    d["unseen"] = v.unseen_name.empty() ? py::none() : py::cast(v.unseen_name);
    return d;
}

std::vector<std::string> names_of(const Profile& p, const std::vector<std::size_t>& idx) {
    std::vector<std::string> out;
    for (auto i : idx) out.push_back(p.alphabet.name(i));
    return out;
}

}  // namespace

PYBIND11_MODULE(scfdpy, m) {
    m.doc() = "Syscall frequency distribution anomaly detection";

    static PyObject* err = PyErr_NewException("scfdpy.ScfdError", PyExc_RuntimeError, nullptr);
    m.attr("ScfdError") = py::reinterpret_borrow<py::object>(err);
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const Error& e) {
            PyErr_SetString(err, (std::string(errc_name(e.code())) + ": " + e.what()).c_str());
        }
    });

    py::class_<ExecutionTrace>(m, "Trace")
        .def(py::init(&trace_from_calls), py::arg("calls"), py::arg("source_id") = "", py::arg("terminated") = true)
        .def_property_readonly("calls", &ExecutionTrace::calls)
        .def_readonly("source_id", &ExecutionTrace::source_id)
        .def_property_readonly("terminated", &ExecutionTrace::terminated)
        .def_property_readonly("flow", &flow_of)
        .def("__len__", &ExecutionTrace::call_count)
        .def("__eq__", [](const ExecutionTrace& a, const ExecutionTrace& b) { return a == b; });

    m.def(
        "gen",
        [](std::uint64_t seed, std::size_t n, const std::string& attack, int flow, bool timestamps) {
            WorkloadSpec s;
            s.seed = seed;
            s.timestamps = timestamps;
            return gen_corpus(s, n, attack_of(attack), flow ? FlowChoice(flow) : std::nullopt);
        },
        py::arg("seed"), py::arg("n"), py::arg("attack") = "none", py::arg("flow") = 0, py::arg("timestamps") = false,
        "Synthetic traces; flow 0 draws the upload decision, 1 forces upload, 2 skips it.");

    m.def(
        "to_jsonl",
        [](const std::vector<ExecutionTrace>& traces) {
            std::ostringstream os;
            write_jsonl(os, traces);
            return os.str();
        },
        py::arg("traces"));
    m.def(
        "parse_log",
        [](const std::string& text, const std::string& format, bool watchdog) {
            const LogFormat f = format == "strace" ? LogFormat::StraceText : LogFormat::Jsonl;
            return parse_event_log_string(text, f, watchdog ? RegionPolicy::Watchdog : RegionPolicy::Strict);
        },
        py::arg("text"), py::arg("format") = "jsonl", py::arg("watchdog") = false);

    m.def("cutoff", [](double p0) { return compute_cutoff(p0).theta; }, py::arg("p0"));

    py::class_<Profile>(m, "Profile")
        .def_property_readonly("alphabet", [](const Profile& p) { return p.alphabet.names(); })
        .def_property_readonly("kept", [](const Profile& p) { return names_of(p, p.reduction.kept); })
        .def_property_readonly("merged", [](const Profile& p) { return names_of(p, p.reduction.merged); })
        .def_property_readonly("residual", [](const Profile& p) { return p.reduction.residual_expected; })
        .def_property_readonly("k", [](const Profile& p) { return p.clusters.size(); })
        .def_property_readonly("theta", [](const Profile& p) { return p.cutoff.theta; })
        .def_property_readonly("p0", [](const Profile& p) { return p.cutoff.p0; })
        .def(
            "classify",
            [](const Profile& p, const ExecutionTrace& t, const std::string& disable) {
                return verdict_dict(classify(p, t, disabled_rules(disable)));
            },
            py::arg("trace"), py::arg("disable_rules") = "")
        .def(
            "explain",
            [](const Profile& p, const ExecutionTrace& t, const std::string& disable) {
                return explain(classify(p, t, disabled_rules(disable)), p);
            },
            py::arg("trace"), py::arg("disable_rules") = "")
        .def("to_bytes", [](const Profile& p) { return py::bytes(serialize_profile(p)); })
        .def_static("from_bytes", [](const py::bytes& b) { return deserialize_profile(std::string(b)); })
        .def("save", &save_profile, py::arg("path"))
        .def_static("load", &load_profile, py::arg("path"))
        .def("__str__", &profile_to_text);

    m.def(
        "train",
        [](const std::vector<ExecutionTrace>& traces, double p0, int max_k, double bound_td, int candidate_stride,
           int threads) {
            GkmConfig cfg;
            cfg.max_k = max_k;
            cfg.bound_td = bound_td;
            cfg.candidate_stride = candidate_stride;
            cfg.threads = threads;
            py::gil_scoped_release nogil;
            return train_profile(load_training_set(traces), cfg, p0);
        },
        py::arg("traces"), py::arg("p0") = 0.05, py::arg("max_k") = 10, py::arg("bound_td") = 1000.0,
        py::arg("candidate_stride") = 1, py::arg("threads") = 1);

    py::class_<PstModel>(m, "Pst")
        .def_property_readonly("depth", &PstModel::max_depth)
        .def_property_readonly("node_count", &PstModel::node_count)
        .def("score", &pst_score, py::arg("trace"))
        .def(
            "classify",
            [](const PstModel& m, const ExecutionTrace& t, double threshold) {
                const auto v = pst_classify(m, t, threshold);
                py::dict d;
                d["malicious"] = v.malicious;
                d["position"] = v.position ? py::cast(*v.position) : py::none();
                d["probability"] = v.probability;
                return d;
            },
            py::arg("trace"), py::arg("threshold") = kPstThreshold)
        .def("dump", &pst_dump);

    m.def(
        "pst_train",
        [](const std::vector<ExecutionTrace>& traces, int depth, std::uint64_t min_count) {
            return pst_train(traces, depth, min_count);
        },
        py::arg("traces"), py::arg("depth"), py::arg("min_count") = 1);
}
