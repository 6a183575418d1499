#include "stlfunnel/run_config.hpp"

#include "stlfunnel/error.hpp"
#include "stlfunnel/log.hpp"
#include "stlfunnel/parser.hpp"

#include "json.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace stlfunnel {

using nlohmann::json;

namespace {

std::string join(const std::string& prefix, const std::string& key)
{
    return prefix.empty() ? key : prefix + "." + key;
}

void reject_unknown(const json& obj, const std::string& prefix, std::initializer_list<const char*> allowed)
{
    if (!obj.is_object()) {
        throw ConfigError(prefix, "expected an object");
    }
    const std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto& [k, v] : obj.items()) {
        if (ok.count(k) == 0) {
            throw ConfigError(join(prefix, k), "unknown key");
        }
    }
}

template <typename T>
T get_as(const json& obj, const std::string& prefix, const char* key, T fallback)
{
    const auto it = obj.find(key);
    if (it == obj.end() || it->is_null()) {
        return fallback;
    }
    try {
        if constexpr (std::is_same_v<T, double>) {
            if (!it->is_number()) {
                throw ConfigError(join(prefix, key), "expected a number");
            }
        } else if constexpr (std::is_integral_v<T> && !std::is_same_v<T, bool>) {
            if (!it->is_number_integer() && !it->is_number_unsigned()) {
                throw ConfigError(join(prefix, key), "expected an integer");
            }
            if constexpr (std::is_unsigned_v<T>) {
                if (it->is_number_integer() && it->get<std::int64_t>() < 0) {
                    throw ConfigError(join(prefix, key), "must be non-negative");
                }
            }
        } else if constexpr (std::is_same_v<T, bool>) {
            if (!it->is_boolean()) {
                throw ConfigError(join(prefix, key), "expected true or false");
            }
        } else if constexpr (std::is_same_v<T, std::string>) {
            if (!it->is_string()) {
                throw ConfigError(join(prefix, key), "expected a string");
            }
        }
        return it->get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(join(prefix, key), e.what());
    }
}

template <typename T>
std::optional<T> get_opt(const json& obj, const std::string& prefix, const char* key)
{
    if (!obj.contains(key) || obj.at(key).is_null()) {
        return std::nullopt;
    }
    return get_as<T>(obj, prefix, key, T{});
}

std::vector<Range> parse_box(const json& j, const std::string& key)
{
    if (!j.is_array()) {
        throw ConfigError(key, "expected a list of [lo, hi] pairs");
    }
    std::vector<Range> out;
    for (std::size_t i = 0; i < j.size(); ++i) {
        const auto& p = j[i];
        const std::string k = key + "." + std::to_string(i);
        if (!p.is_array() || p.size() != 2 || !p[0].is_number() || !p[1].is_number()) {
            throw ConfigError(k, "expected [lo, hi]");
        }
        const Range r{p[0].get<double>(), p[1].get<double>()};
        if (!(std::isfinite(r.lo) && std::isfinite(r.hi) && r.lo <= r.hi)) {
            throw ConfigError(k, "needs finite lo <= hi");
        }
        out.push_back(r);
    }
    return out;
}

std::vector<double> parse_point(const json& j, const std::string& key)
{
    if (!j.is_array()) {
        throw ConfigError(key, "expected a list of numbers");
    }
    std::vector<double> out;
    for (std::size_t i = 0; i < j.size(); ++i) {
        if (!j[i].is_number()) {
            throw ConfigError(key + "." + std::to_string(i), "expected a number");
        }
        out.push_back(j[i].get<double>());
    }
    return out;
}

EnvConfig parse_env(const json& j)
{
    const std::string p = "env";
    reject_unknown(j, p, {"kind", "tau", "horizon", "reset", "pendulum", "state_box"});
    const auto kind_text = get_as<std::string>(j, p, "kind", "");
    if (kind_text.empty()) {
        throw ConfigError("env.kind", "missing (pendulum, diffdrive or integrator)");
    }
    EnvConfig cfg;
    try {
        cfg = default_env_config(parse_env_kind(kind_text));
    } catch (const DomainError& e) {
        throw ConfigError("env.kind", e.what());
    }
    cfg.tau = get_as<double>(j, p, "tau", cfg.tau);
    if (!(cfg.tau > 0.0) || !std::isfinite(cfg.tau)) {
        throw ConfigError("env.tau", "must be positive");
    }
    cfg.horizon = get_as<int>(j, p, "horizon", cfg.horizon);
    if (cfg.horizon < 1) {
        throw ConfigError("env.horizon", "must be at least 1");
    }
    if (j.contains("reset")) {
        const auto& r = j.at("reset");
        reject_unknown(r, "env.reset", {"type", "point", "box"});
        const auto type = get_as<std::string>(r, "env.reset", "type", "fixed");
        if (type == "fixed") {
            cfg.reset.type = ResetDistribution::Type::Fixed;
            if (r.contains("point")) {
                cfg.reset.point = parse_point(r.at("point"), "env.reset.point");
            }
        } else if (type == "uniform") {
            cfg.reset.type = ResetDistribution::Type::Uniform;
            if (!r.contains("box")) {
                throw ConfigError("env.reset.box", "required for a uniform reset");
            }
            cfg.reset.box = parse_box(r.at("box"), "env.reset.box");
        } else {
            throw ConfigError("env.reset.type", "expected fixed or uniform");
        }
    }
    if (j.contains("pendulum")) {
        const auto& c = j.at("pendulum");
        const std::string cp = "env.pendulum";
        reject_unknown(c, cp, {"g", "mass", "length", "friction"});
        cfg.pendulum.g = get_as<double>(c, cp, "g", cfg.pendulum.g);
        cfg.pendulum.mass = get_as<double>(c, cp, "mass", cfg.pendulum.mass);
        cfg.pendulum.length = get_as<double>(c, cp, "length", cfg.pendulum.length);
        cfg.pendulum.friction = get_as<double>(c, cp, "friction", cfg.pendulum.friction);
        if (!(cfg.pendulum.mass > 0.0)) {
            throw ConfigError("env.pendulum.mass", "must be positive");
        }
        if (!(cfg.pendulum.length > 0.0)) {
            throw ConfigError("env.pendulum.length", "must be positive");
        }
    }
    if (j.contains("state_box")) {
        cfg.state_box = parse_box(j.at("state_box"), "env.state_box");
        for (std::size_t i = 0; i < cfg.state_box.size(); ++i) {
            if (!(cfg.state_box[i].hi > cfg.state_box[i].lo)) {
                throw ConfigError("env.state_box." + std::to_string(i), "needs lo < hi");
            }
        }
    }
    return cfg;
}

SpecSettings parse_spec(const json& j)
{
    const std::string p = "spec";
    reject_unknown(j, p, {"formula", "bounds_grid", "conjuncts"});
    SpecSettings s;
    s.formula = get_as<std::string>(j, p, "formula", "");
    if (s.formula.empty()) {
        throw ConfigError("spec.formula", "missing");
    }
    s.bounds_grid = get_as<int>(j, p, "bounds_grid", s.bounds_grid);
    if (s.bounds_grid < 2) {
        throw ConfigError("spec.bounds_grid", "must be at least 2");
    }
    if (j.contains("conjuncts")) {
        const auto& arr = j.at("conjuncts");
        if (!arr.is_array()) {
            throw ConfigError("spec.conjuncts", "expected a list");
        }
        for (std::size_t i = 0; i < arr.size(); ++i) {
            const std::string cp = "spec.conjuncts." + std::to_string(i);
            reject_unknown(arr[i], cp, {"rho_min", "rho_max", "gamma_inf", "t_star"});
            ConjunctSettings c;
            c.rho_min = get_opt<double>(arr[i], cp, "rho_min");
            c.rho_max = get_opt<double>(arr[i], cp, "rho_max");
            c.gamma_inf = get_opt<double>(arr[i], cp, "gamma_inf");
            c.t_star = get_opt<int>(arr[i], cp, "t_star");
            s.conjuncts.push_back(c);
        }
    }
    return s;
}

TrainConfig parse_train(const json& j)
{
    const std::string p = "train";
    reject_unknown(j, p,
                   {"total_steps", "gamma", "learning_rate", "optimizer", "batch_size", "replay_capacity",
                    "target_update", "eval_every", "eval_episodes", "log_every", "epsilon", "hidden",
                    "normalize_inputs", "keep_best", "seed"});
    TrainConfig c;
    c.total_steps = get_as<std::int64_t>(j, p, "total_steps", c.total_steps);
    c.gamma = get_as<double>(j, p, "gamma", c.gamma);
    c.optimizer.learning_rate = get_as<double>(j, p, "learning_rate", c.optimizer.learning_rate);
    const auto opt = get_as<std::string>(j, p, "optimizer", "adam");
    if (opt == "adam") {
        c.optimizer.kind = OptimizerKind::Adam;
    } else if (opt == "sgd") {
        c.optimizer.kind = OptimizerKind::Sgd;
    } else {
        throw ConfigError("train.optimizer", "expected adam or sgd");
    }
    c.batch_size = get_as<int>(j, p, "batch_size", c.batch_size);
    c.replay_capacity = get_as<std::size_t>(j, p, "replay_capacity", c.replay_capacity);
    c.target_update = get_as<std::int64_t>(j, p, "target_update", c.target_update);
    c.eval_every = get_as<std::int64_t>(j, p, "eval_every", c.eval_every);
    c.eval_episodes = get_as<int>(j, p, "eval_episodes", c.eval_episodes);
    c.log_every = get_as<std::int64_t>(j, p, "log_every", c.log_every);
    c.epsilon.decay_steps = c.total_steps / 2;
    if (j.contains("epsilon")) {
        const auto& e = j.at("epsilon");
        reject_unknown(e, "train.epsilon", {"start", "end", "decay_steps"});
        c.epsilon.start = get_as<double>(e, "train.epsilon", "start", c.epsilon.start);
        c.epsilon.end = get_as<double>(e, "train.epsilon", "end", c.epsilon.end);
        c.epsilon.decay_steps = get_as<std::int64_t>(e, "train.epsilon", "decay_steps", c.epsilon.decay_steps);
    }
    if (j.contains("hidden")) {
        const auto& h = j.at("hidden");
        if (!h.is_array()) {
            throw ConfigError("train.hidden", "expected a list of layer widths");
        }
        c.hidden.clear();
        for (std::size_t i = 0; i < h.size(); ++i) {
            if (!h[i].is_number_integer()) {
                throw ConfigError("train.hidden." + std::to_string(i), "expected an integer");
            }
            c.hidden.push_back(h[i].get<int>());
        }
    }
    c.normalize_inputs = get_as<bool>(j, p, "normalize_inputs", c.normalize_inputs);
    c.keep_best = get_as<bool>(j, p, "keep_best", c.keep_best);
    c.seed = get_as<std::uint64_t>(j, p, "seed", c.seed);
    try {
        validate_train_config(c);
    } catch (const ConfigError& e) {
        throw ConfigError("train." + e.key(), std::string(e.what()).substr(e.key().size() + 2));
    }
    return c;
}

/// Splits "a.b.c=value" and assigns value (JSON if it parses, else a string) at the dot path.
void apply_override(json& root, const std::string& assignment)
{
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) {
        throw ConfigError(assignment, "override must look like key.path=value");
    }
    const std::string path = assignment.substr(0, eq);
    const std::string text = assignment.substr(eq + 1);
    json value = json::parse(text, nullptr, false);
    if (value.is_discarded()) {
        value = text;
    }
    json* node = &root;
    std::size_t start = 0;
    while (true) {
        const auto dot = path.find('.', start);
        const std::string part = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
        if (part.empty()) {
            throw ConfigError(path, "empty path component");
        }
        const bool index = part.find_first_not_of("0123456789") == std::string::npos;
        if (index && node->is_array()) {
            const auto i = std::stoul(part);
            if (i >= node->size()) {
                throw ConfigError(path, "index " + part + " out of range");
            }
            node = &(*node)[i];
        } else {
            if (!node->is_object() && !node->is_null()) {
                throw ConfigError(path, "cannot descend into a non-object value");
            }
            node = &(*node)[part];
        }
        if (dot == std::string::npos) {
            break;
        }
        start = dot + 1;
    }
    *node = std::move(value);
}

} // namespace

RunConfig parse_run_config(std::string_view json_text, std::span<const std::string> overrides)
{
    json root = json::parse(json_text, nullptr, false, true);
    if (root.is_discarded()) {
        throw ConfigError("", "configuration is not valid JSON");
    }
    if (!root.is_object()) {
        throw ConfigError("", "configuration must be a JSON object");
    }
    for (const auto& o : overrides) {
        apply_override(root, o);
    }
    reject_unknown(root, "", {"env", "spec", "train", "reward_mode", "eval", "output_dir", "checkpoint", "trajectory"});
    if (!root.contains("env")) {
        throw ConfigError("env", "missing section");
    }
    if (!root.contains("spec")) {
        throw ConfigError("spec", "missing section");
    }
    RunConfig cfg;
    cfg.env = parse_env(root.at("env"));
    cfg.spec = parse_spec(root.at("spec"));
    cfg.train = parse_train(root.value("train", json::object()));
    const auto mode = get_as<std::string>(root, "", "reward_mode", "funnel");
    try {
        cfg.reward_mode = parse_reward_mode(mode);
    } catch (const DomainError& e) {
        throw ConfigError("reward_mode", e.what());
    }
    if (root.contains("eval")) {
        const auto& e = root.at("eval");
        reject_unknown(e, "eval", {"episodes", "seed"});
        cfg.eval.episodes = get_as<int>(e, "eval", "episodes", cfg.eval.episodes);
        cfg.eval.seed = get_as<std::uint64_t>(e, "eval", "seed", cfg.eval.seed);
        if (cfg.eval.episodes < 1) {
            throw ConfigError("eval.episodes", "must be at least 1");
        }
    }
    cfg.output_dir = get_as<std::string>(root, "", "output_dir", cfg.output_dir);
    cfg.checkpoint = get_as<std::string>(root, "", "checkpoint", "");
    cfg.trajectory = get_as<std::string>(root, "", "trajectory", "");
    cfg.canonical = root.dump();
    json core = {{"env", root.at("env")},
                 {"spec", root.at("spec")},
                 {"train", root.value("train", json::object())},
                 {"reward_mode", mode}};
    cfg.digest = fnv1a_hex(core.dump());
    return cfg;
}

RunConfig load_run_config(const std::string& path, std::span<const std::string> overrides)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open configuration '" + path + "'");
    }
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_run_config(buf.str(), overrides);
}

Problem build_problem(const RunConfig& cfg)
{
    Problem p;
    try {
        p.env = make_environment(cfg.env);
        p.env->reset(std::uint64_t{0});
    } catch (const DomainError& e) {
        throw ConfigError("env", e.what());
    }
    try {
        p.phi = parse_formula(cfg.spec.formula, p.env->variables());
    } catch (const ParseError& e) {
        throw ConfigError("spec.formula", e.what());
    } catch (const FragmentError& e) {
        throw ConfigError("spec.formula", e.what());
    }
    FragmentInfo info;
    try {
        info = analyze_fragment(p.phi);
    } catch (const FragmentError& e) {
        throw ConfigError("spec.formula", e.what());
    }
    if (info.fragment == FragmentClass::NonTemporal) {
        throw ConfigError("spec.formula", "needs at least one temporal operator to build a funnel");
    }
    const auto n = info.conjuncts.size();
    if (cfg.spec.conjuncts.size() > n) {
        throw ConfigError("spec.conjuncts", "has " + std::to_string(cfg.spec.conjuncts.size()) +
                                                " entries but the formula has " + std::to_string(n) + " conjuncts");
    }
    const auto box = p.env->state_box();
    std::vector<FunnelOverrides> overrides(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::string key = "spec.conjuncts." + std::to_string(i);
        RhoBounds b{};
        const ConjunctSettings c = i < cfg.spec.conjuncts.size() ? cfg.spec.conjuncts[i] : ConjunctSettings{};
        if (!c.rho_min || !c.rho_max) {
            b = estimate_rho_bounds(*info.conjuncts[i].psi, box, cfg.spec.bounds_grid);
        }
        if (c.rho_min) {
            b.rho_min = *c.rho_min;
        }
        if (c.rho_max) {
            b.rho_max = *c.rho_max;
        }
        if (!(b.rho_max > 0.0)) {
            throw ConfigError(key + ".rho_max", "must be positive (got " + format_number(b.rho_max) +
                                                    "); the conjunct body cannot be satisfied inside the state box");
        }
        if (!(b.rho_min < b.rho_max)) {
            throw ConfigError(key + ".rho_min", "must be below rho_max");
        }
        if (c.gamma_inf && !(*c.gamma_inf > 0.0 && *c.gamma_inf < b.rho_max)) {
            throw ConfigError(key + ".gamma_inf", "must lie in (0, rho_max = " + format_number(b.rho_max) + ")");
        }
        p.bounds.push_back(b);
        overrides[i] = {c.gamma_inf, c.t_star};
    }
    try {
        p.reward.schedule = build_schedule(p.phi, p.bounds, overrides, cfg.env.horizon);
    } catch (const DomainError& e) {
        throw ConfigError("spec", e.what());
    }
    p.reward.mode = cfg.reward_mode;
    return p;
}

RewardFn make_reward_fn(const Problem& p)
{
    const RewardSpec* spec = &p.reward;
    return [spec](std::span<const double> s, std::size_t, int t) { return reward(*spec, s, t); };
}

} // namespace stlfunnel
