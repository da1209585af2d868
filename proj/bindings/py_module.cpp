#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <random>

#include "ffagent/corpus.hpp"
#include "ffagent/encoder.hpp"
#include "ffagent/env.hpp"
#include "ffagent/errors.hpp"
#include "ffagent/metrics.hpp"
#include "ffagent/rltrain.hpp"
#include "ffagent/saffa.hpp"

namespace py = pybind11;
using namespace ffagent;

PYBIND11_MODULE(_ffagent, m) {
    m.doc() = "text-driven video fast-forwarding: encoder, agent, and metrics";

    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<DataError>(m, "DataError", PyExc_ValueError);
    py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);

    py::enum_<Action>(m, "Action")
        .value("DECELERATE", Action::Decelerate)
        .value("DO_NOTHING", Action::DoNothing)
        .value("ACCELERATE", Action::Accelerate);

    py::class_<Kinematics>(m, "Kinematics")
        .def(py::init([](int nu, int omega) { return Kinematics{nu, omega}; }),
             py::arg("nu") = 1, py::arg("omega") = 1)
        .def_readwrite("nu", &Kinematics::nu)
        .def_readwrite("omega", &Kinematics::omega)
        .def("__repr__", [](const Kinematics& k) {
            return "Kinematics(nu=" + std::to_string(k.nu) +
                   ", omega=" + std::to_string(k.omega) + ")";
        });

    m.def("nrpe", &nrpe, py::arg("f"), py::arg("num_frames"), py::arg("q") = 128,
          "normalized reversed positional encoding of frame f");
    m.def("skip_encoding", &skip_encoding, py::arg("s_hat"), py::arg("s_star"),
          py::arg("nu_max") = 25, "one-hot relative speed-up encoding");
    m.def("compose_state", &compose_state, py::arg("e_doc"), py::arg("e_clip"), py::arg("e_pos"),
          py::arg("e_skip"));
    m.def("apply_action", &apply_action, py::arg("kinematics"), py::arg("action"),
          py::arg("nu_max") = 25, py::arg("omega_max") = 5);

    m.def("reward", &reward, py::arg("alignment"), py::arg("is_terminal"),
          py::arg("s_hat_final"), py::arg("s_star"), py::arg("lambda_"), py::arg("sigma") = 0.5);
    m.def("discounted_returns", &discounted_returns, py::arg("rewards"), py::arg("gamma") = 0.99);
    m.def("entropy", &entropy, py::arg("dist"));

    m.def("cosine_embedding_loss", &cosine_embedding_loss, py::arg("e_doc"), py::arg("e_clip"),
          py::arg("y"), py::arg("eta") = 0.0);

    m.def(
        "precision_recall_f1",
        [](const std::vector<std::size_t>& selected,
           const std::vector<std::pair<int, int>>& segments, std::size_t num_frames) {
            const PRF r = precision_recall_f1(selected, segments, num_frames);
            return py::make_tuple(r.precision, r.recall, r.f1);
        },
        py::arg("selected"), py::arg("segments"), py::arg("num_frames"));
    m.def("output_speedup", &output_speedup, py::arg("num_frames"), py::arg("num_selected"));
    m.def("overall_performance", &overall_performance, py::arg("f1"), py::arg("s_hat"),
          py::arg("s_star"));
    m.def("roc_auc", &roc_auc, py::arg("scores"), py::arg("labels"));
    m.def("mrr", &mrr, py::arg("ranks"));

    // end-to-end helpers on saved artifacts
    m.def(
        "fastforward",
        [](const std::string& dataset_manifest, const std::string& encoder_prefix,
           const std::string& agent_prefix, int s_star) {
            Encoder encoder = Encoder::load(encoder_prefix + ".json", encoder_prefix + ".bin");
            Agent agent = Agent::load(agent_prefix + ".json", agent_prefix + ".bin");
            const auto videos = load_dataset(dataset_manifest);
            py::dict out;
            for (const auto& v : videos) {
                RolloutOptions opts;
                opts.s_star = s_star;
                opts.mode = SelectMode::Greedy;
                opts.keep_states = false;
                const EpisodeTrace trace = rollout(v, encoder, agent, opts, nullptr);
                out[py::str(v.id)] = trace.frames;
            }
            return out;
        },
        py::arg("dataset_manifest"), py::arg("encoder_prefix"), py::arg("agent_prefix"),
        py::arg("s_star") = 12,
        "greedy frame selection for every video in a dataset; returns {video_id: frames}");
}
