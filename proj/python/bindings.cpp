#include "stlfunnel/commands.hpp"
#include "stlfunnel/error.hpp"
#include "stlfunnel/fragment.hpp"
#include "stlfunnel/funnel.hpp"
#include "stlfunnel/parser.hpp"
#include "stlfunnel/reward.hpp"

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace stlfunnel;

namespace {

struct PyFormula {
    FormulaPtr ptr;
    std::vector<std::string> variables;
};

struct PySchedule {
    RewardSpec spec;
};

struct PyEnvironment {
    std::shared_ptr<SimulatedEnv> env;
};

py::dict segment_dict(const FunnelSegment& s)
{
    py::dict d;
    d["t_begin"] = s.t_begin;
    d["t_first"] = s.t_first;
    d["t_end"] = s.t_end;
    d["gamma0"] = s.params.gamma0;
    d["gamma_inf"] = s.params.gamma_inf;
    d["l"] = s.params.l;
    d["rho_max"] = s.params.rho_max;
    d["t_star"] = s.params.t_star;
    d["conjunct"] = s.psi_index;
    d["window"] = py::make_tuple(s.window.lo, s.window.hi);
    return d;
}

py::dict summary_dict(const EvalSummary& s)
{
    py::dict d;
    d["episodes"] = s.episodes;
    d["satisfaction_rate"] = s.satisfaction_rate;
    d["min_robustness"] = s.min_robustness;
    d["mean_robustness"] = s.mean_robustness;
    return d;
}

py::dict verdict_dict(const SatisfactionResult& r)
{
    py::dict d;
    d["satisfied"] = r.satisfied;
    d["robustness"] = r.robustness;
    d["obligation_robustness"] = r.obligation_robustness;
    return d;
}

RunConfig config_from(const std::string& path, const std::vector<std::string>& overrides,
                      const std::optional<std::string>& out)
{
    auto cfg = load_run_config(path, overrides);
    if (out) {
        cfg.output_dir = *out;
    }
    return cfg;
}

} // namespace

PYBIND11_MODULE(_stlfunnel, m)
{
    m.doc() = "Funnel-shaped rewards for signal temporal logic tasks and a time-aware DQN trainer.";

    // exception types are kept for the lifetime of the interpreter
    static PyObject* base = nullptr;
    static PyObject* parse_error = nullptr;
    static PyObject* fragment_error = nullptr;
    static PyObject* domain_error = nullptr;
    static PyObject* config_error = nullptr;
    static PyObject* divergence_error = nullptr;
    static PyObject* io_error = nullptr;
    base = py::exception<Error>(m, "Error", PyExc_RuntimeError).release().ptr();
    parse_error = py::exception<ParseError>(m, "ParseError", base).release().ptr();
    fragment_error = py::exception<FragmentError>(m, "FragmentError", base).release().ptr();
    domain_error = py::exception<DomainError>(m, "DomainError", base).release().ptr();
    config_error = py::exception<ConfigError>(m, "ConfigError", base).release().ptr();
    divergence_error = py::exception<DivergenceError>(m, "DivergenceError", base).release().ptr();
    io_error = py::exception<IoError>(m, "IoError", base).release().ptr();
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) {
                std::rethrow_exception(p);
            }
        } catch (const ConfigError& e) {
            // the offending key travels as an attribute
            py::object inst = py::handle(config_error)(e.what());
            inst.attr("key") = e.key();
            PyErr_SetObject(config_error, inst.ptr());
        } catch (const ParseError& e) {
            PyErr_SetString(parse_error, e.what());
        } catch (const FragmentError& e) {
            PyErr_SetString(fragment_error, e.what());
        } catch (const DomainError& e) {
            PyErr_SetString(domain_error, e.what());
        } catch (const DivergenceError& e) {
            PyErr_SetString(divergence_error, e.what());
        } catch (const IoError& e) {
            PyErr_SetString(io_error, e.what());
        } catch (const Error& e) {
            PyErr_SetString(base, e.what());
        }
    });

    py::class_<PyFormula>(m, "Formula")
        .def_property_readonly("variables", [](const PyFormula& f) { return f.variables; })
        .def_property_readonly("horizon", [](const PyFormula& f) { return horizon(*f.ptr); })
        .def_property_readonly("fragment",
                               [](const PyFormula& f) { return std::string(to_string(classify_fragment(*f.ptr))); })
        .def("__str__", [](const PyFormula& f) { return to_string(*f.ptr); })
        .def("__repr__", [](const PyFormula& f) { return "Formula('" + to_string(*f.ptr) + "')"; })
        .def("__eq__", [](const PyFormula& a, const PyFormula& b) { return structurally_equal(*a.ptr, *b.ptr); });

    m.def(
        "parse_formula",
        [](const std::string& text, const std::vector<std::string>& variables, bool fragment) {
            return PyFormula{fragment ? parse_formula(text, variables) : parse_stl(text, variables), variables};
        },
        py::arg("text"), py::arg("variables"), py::arg("fragment") = true,
        "Parse a formula over the named state variables. With fragment=True the formula must "
        "be a conjunction of temporal operators with non-temporal bodies.");

    m.def(
        "robustness",
        [](const PyFormula& f, const std::vector<StateVector>& trace, int t) { return rho_trace(*f.ptr, trace, t); },
        py::arg("formula"), py::arg("trace"), py::arg("t") = 0, "Robustness of the formula at step t of a trace.");
    m.def(
        "robustness_signal", [](const PyFormula& f, const std::vector<StateVector>& trace) { return rho_signal(*f.ptr, trace); },
        py::arg("formula"), py::arg("trace"), "Robustness at every step at which the trace is long enough.");
    m.def(
        "check",
        [](const PyFormula& f, const std::vector<StateVector>& trace) { return verdict_dict(check_satisfaction(*f.ptr, trace)); },
        py::arg("formula"), py::arg("trace"), "Satisfaction verdict of a whole trace.");

    m.def("funnel_rate", &funnel_rate, py::arg("gamma0"), py::arg("gamma_inf"), py::arg("rho_max"), py::arg("t_star"),
          "Decay rate that makes the funnel reach rho_max at t_star.");
    m.def(
        "gamma_value",
        [](double gamma0, double gamma_inf, double l, double elapsed) {
            FunnelParams p;
            p.gamma0 = gamma0;
            p.gamma_inf = gamma_inf;
            p.l = l;
            return gamma_value(p, elapsed);
        },
        py::arg("gamma0"), py::arg("gamma_inf"), py::arg("l"), py::arg("elapsed"));

    py::class_<PySchedule>(m, "Schedule")
        .def_property_readonly("horizon", [](const PySchedule& s) { return s.spec.schedule.horizon; })
        .def_property_readonly("fragment",
                               [](const PySchedule& s) { return std::string(to_string(s.spec.schedule.fragment)); })
        .def_property_readonly("mode", [](const PySchedule& s) { return std::string(to_string(s.spec.mode)); })
        .def_property_readonly("segments",
                               [](const PySchedule& s) {
                                   py::list out;
                                   for (const auto& seg : s.spec.schedule.segments) {
                                       out.append(segment_dict(seg));
                                   }
                                   return out;
                               })
        .def("active", [](const PySchedule& s, int t) {
            const auto a = s.spec.schedule.active_at(t);
            return std::vector<std::size_t>(a.begin(), a.end());
        })
        .def("gamma", [](const PySchedule& s, std::size_t segment, int t) {
            return gamma_eval(s.spec.schedule.segments.at(segment), t);
        })
        .def("reward", [](const PySchedule& s, const StateVector& state, int t) { return reward(s.spec, state, t); },
             py::arg("state"), py::arg("t"));

    m.def(
        "build_schedule",
        [](const PyFormula& f, const std::vector<std::pair<double, double>>& bounds, int horizon,
           const std::vector<std::optional<double>>& gamma_inf, const std::vector<std::optional<int>>& t_star,
           const std::string& mode) {
            std::vector<RhoBounds> b;
            for (const auto& [lo, hi] : bounds) {
                b.push_back({lo, hi});
            }
            std::vector<FunnelOverrides> over(std::max(gamma_inf.size(), t_star.size()));
            for (std::size_t i = 0; i < over.size(); ++i) {
                over[i].gamma_inf = i < gamma_inf.size() ? gamma_inf[i] : std::nullopt;
                over[i].t_star = i < t_star.size() ? t_star[i] : std::nullopt;
            }
            return PySchedule{{build_schedule(f.ptr, b, over, horizon), parse_reward_mode(mode)}};
        },
        py::arg("formula"), py::arg("bounds"), py::arg("horizon"), py::arg("gamma_inf") = std::vector<std::optional<double>>{},
        py::arg("t_star") = std::vector<std::optional<int>>{}, py::arg("mode") = "funnel",
        "Funnel schedule from per-conjunct (rho_min, rho_max) bounds.");

    py::class_<PyEnvironment>(m, "Environment")
        .def(py::init([](const std::string& kind, std::optional<int> horizon) {
                 auto cfg = default_env_config(parse_env_kind(kind));
                 if (horizon) {
                     cfg.horizon = *horizon;
                 }
                 return PyEnvironment{std::shared_ptr<SimulatedEnv>(make_environment(cfg))};
             }),
             py::arg("kind"), py::arg("horizon") = std::nullopt)
        .def_property_readonly("name", [](const PyEnvironment& e) { return e.env->name(); })
        .def_property_readonly("variables", [](const PyEnvironment& e) { return e.env->variables(); })
        .def_property_readonly("horizon", [](const PyEnvironment& e) { return e.env->horizon(); })
        .def_property_readonly("action_count", [](const PyEnvironment& e) { return e.env->actions().size(); })
        .def("decode", [](const PyEnvironment& e, std::size_t a) { return e.env->actions().decode(a); })
        .def("reset", [](const PyEnvironment& e, std::uint64_t seed) { return e.env->reset(seed); }, py::arg("seed") = 0)
        .def("step", [](const PyEnvironment& e, const StateVector& s, std::size_t a) { return e.env->step(s, a); });

    m.def(
        "run_funnel",
        [](const std::string& config, const std::vector<std::string>& overrides, const std::optional<std::string>& out) {
            const auto r = cmd_funnel(config_from(config, overrides, out));
            py::dict d;
            d["fragment"] = std::string(to_string(r.schedule.fragment));
            py::list segs;
            for (const auto& s : r.schedule.segments) {
                segs.append(segment_dict(s));
            }
            d["segments"] = segs;
            d["files"] = r.files;
            return d;
        },
        py::arg("config"), py::arg("overrides") = std::vector<std::string>{}, py::arg("out") = std::nullopt);
    m.def(
        "train",
        [](const std::string& config, const std::vector<std::string>& overrides, const std::optional<std::string>& out) {
            TrainResult r;
            {
                py::gil_scoped_release release;
                r = cmd_train(config_from(config, overrides, out));
            }
            py::dict d;
            d["steps"] = r.steps;
            d["log_csv"] = r.log.to_csv();
            d["best_eval"] = r.best_eval ? py::object(summary_dict(*r.best_eval)) : py::none();
            d["files"] = r.files;
            return d;
        },
        py::arg("config"), py::arg("overrides") = std::vector<std::string>{}, py::arg("out") = std::nullopt);
    m.def(
        "evaluate",
        [](const std::string& config, const std::vector<std::string>& overrides, const std::optional<std::string>& out,
           std::optional<int> episodes) {
            const auto r = cmd_eval(config_from(config, overrides, out), episodes);
            py::dict d;
            d["summary"] = summary_dict(r.evaluation.summary);
            py::list eps;
            for (const auto& e : r.evaluation.episodes) {
                eps.append(verdict_dict(e));
            }
            d["episodes"] = eps;
            d["files"] = r.files;
            return d;
        },
        py::arg("config"), py::arg("overrides") = std::vector<std::string>{}, py::arg("out") = std::nullopt,
        py::arg("episodes") = std::nullopt);
    m.def(
        "monitor",
        [](const std::string& config, const std::string& trajectory, const std::vector<std::string>& overrides,
           const std::optional<std::string>& out) {
            auto cfg = config_from(config, overrides, out);
            cfg.trajectory = trajectory;
            const auto r = cmd_monitor(cfg);
            py::dict d = verdict_dict(r.verdict);
            d["steps"] = r.steps;
            d["files"] = r.files;
            return d;
        },
        py::arg("config"), py::arg("trajectory"), py::arg("overrides") = std::vector<std::string>{},
        py::arg("out") = std::nullopt);
}
