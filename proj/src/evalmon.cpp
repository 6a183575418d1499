#include "stlfunnel/evalmon.hpp"

#include "stlfunnel/error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

namespace stlfunnel {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct ObligationInfo {
    FormulaKind kind;
    Interval window;
    const Formula* conjunct;
    std::size_t psi_index;
};

std::vector<ObligationInfo> obligations(const FunnelSchedule& schedule)
{
    std::vector<ObligationInfo> out;
    if (!schedule.phi) {
        return out;
    }
    const FragmentInfo info = analyze_fragment(schedule.phi);
    for (std::size_t i = 0; i < info.conjuncts.size(); ++i) {
        const auto& c = info.conjuncts[i];
        out.push_back({c.kind, c.window, c.formula.get(), i});
    }
    return out;
}

bool finite_state(const StateVector& s)
{
    return std::all_of(s.begin(), s.end(), [](double v) { return std::isfinite(v); });
}

std::string fmt(double v)
{
    if (std::isnan(v)) {
        return {};
    }
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

} // namespace

std::vector<StateVector> Trajectory::states() const
{
    std::vector<StateVector> out;
    out.reserve(steps.size());
    for (const auto& r : steps) {
        out.push_back(r.state);
    }
    return out;
}

std::vector<bool> satisfied_so_far(const FunnelSchedule& schedule, std::span<const StateVector> trace)
{
    const auto obls = obligations(schedule);
    const int n = static_cast<int>(trace.size());
    // first step at which each conjunct is known to be violated
    std::vector<int> violated_at(obls.size(), std::numeric_limits<int>::max());
    for (std::size_t i = 0; i < obls.size(); ++i) {
        const auto& o = obls[i];
        const Formula& psi = *schedule.psi[o.psi_index];
        switch (o.kind) {
        case FormulaKind::Always:
            for (int t = o.window.lo; t <= o.window.hi && t < n; ++t) {
                if (rho_pointwise(psi, trace[static_cast<std::size_t>(t)]) < 0.0) {
                    violated_at[i] = t;
                    break;
                }
            }
            break;
        case FormulaKind::Eventually:
            if (o.window.hi < n) {
                bool hit = false;
                for (int t = o.window.lo; t <= o.window.hi; ++t) {
                    hit = hit || rho_pointwise(psi, trace[static_cast<std::size_t>(t)]) >= 0.0;
                }
                if (!hit) {
                    violated_at[i] = o.window.hi;
                }
            }
            break;
        default:
            if (horizon(*o.conjunct) < n && rho_trace(*o.conjunct, trace, 0) < 0.0) {
                violated_at[i] = horizon(*o.conjunct);
            }
            break;
        }
    }
    const int first = violated_at.empty() ? std::numeric_limits<int>::max()
                                          : *std::min_element(violated_at.begin(), violated_at.end());
    std::vector<bool> out(trace.size());
    for (int t = 0; t < n; ++t) {
        out[static_cast<std::size_t>(t)] = t < first;
    }
    return out;
}

double obligation_robustness(const FunnelSchedule& schedule, std::span<const StateVector> trace)
{
    double out = std::numeric_limits<double>::infinity();
    for (const auto& o : obligations(schedule)) {
        if (o.window.hi >= static_cast<int>(trace.size())) {
            throw DomainError("trace of length " + std::to_string(trace.size()) + " ends before step " +
                              std::to_string(o.window.hi));
        }
        const Formula& psi = *schedule.psi[o.psi_index];
        for (int t = o.window.lo; t <= o.window.hi; ++t) {
            out = std::min(out, rho_pointwise(psi, trace[static_cast<std::size_t>(t)]));
        }
    }
    return out;
}

Trajectory annotate(const RewardSpec& spec, std::vector<StateVector> states, std::span<const std::size_t> actions)
{
    const auto& sched = spec.schedule;
    if (states.empty() || actions.size() + 1 != states.size()) {
        throw DomainError("a trajectory needs exactly one action fewer than states");
    }
    if (states.size() > static_cast<std::size_t>(sched.horizon) + 1) {
        throw DomainError("trajectory runs past the schedule horizon");
    }
    const auto flags = satisfied_so_far(sched, states);
    Trajectory traj;
    traj.meta.spec = sched.phi ? to_string(*sched.phi) : std::string{};
    traj.steps.resize(states.size());
    for (std::size_t i = 0; i < states.size(); ++i) {
        const int t = static_cast<int>(i);
        auto& rec = traj.steps[i];
        rec.t = t;
        rec.action = i < actions.size() ? static_cast<std::int64_t>(actions[i]) : -1;
        for (const auto& psi : sched.psi) {
            rec.rho_psi.push_back(rho_pointwise(*psi, states[i]));
        }
        rec.reward = reward(spec, states[i], t);
        if (sched.active_at(t).empty()) {
            rec.gamma_lower = kNaN;
            rec.margin = kNaN;
        } else {
            const FunnelCheck c = reward_sign_check(spec, states[i], t);
            const auto& seg = sched.segments[c.segment];
            rec.margin = c.margin;
            rec.gamma_lower = -gamma_eval(seg, t) + seg.params.rho_max;
        }
        rec.satisfied_so_far = flags[i];
        rec.state = std::move(states[i]);
    }
    return traj;
}

Trajectory rollout(const QFunction& q, const Environment& env, const RewardSpec& spec, std::uint64_t seed,
                   double epsilon)
{
    const int horizon = env.horizon();
    if (horizon != spec.schedule.horizon) {
        throw DomainError("environment horizon " + std::to_string(horizon) + " differs from schedule horizon " +
                          std::to_string(spec.schedule.horizon));
    }
    Rng rng(seed);
    std::vector<StateVector> states;
    std::vector<std::size_t> actions;
    states.reserve(static_cast<std::size_t>(horizon) + 1);
    states.push_back(env.reset(rng));
    for (int t = 0; t < horizon; ++t) {
        const auto qv = q.q_values(states.back(), t);
        const std::size_t a = epsilon_greedy(qv, epsilon, rng);
        StateVector next = env.step(states.back(), a);
        if (!finite_state(next)) {
            throw DivergenceError("non-finite state at step " + std::to_string(t + 1) + " of rollout with seed " +
                                  std::to_string(seed));
        }
        actions.push_back(a);
        states.push_back(std::move(next));
    }
    Trajectory traj = annotate(spec, std::move(states), actions);
    traj.meta.seed = seed;
    traj.meta.variables = env.variables();
    return traj;
}

SatisfactionResult check_satisfaction(const Formula& phi, std::span<const StateVector> trace)
{
    const int h = horizon(phi);
    if (static_cast<int>(trace.size()) <= h) {
        throw DomainError("trace of length " + std::to_string(trace.size()) + " is shorter than the formula horizon " +
                          std::to_string(h) + " requires");
    }
    SatisfactionResult out;
    out.robustness = rho_trace(phi, trace, 0);
    out.satisfied = satisfied(out.robustness);
    out.obligation_robustness = out.robustness;
    if (has_temporal(phi)) {
        // bodies only; the funnel parameters play no role here
        FunnelSchedule sched;
        sched.phi = std::shared_ptr<const Formula>(std::shared_ptr<const Formula>{}, &phi);
        const FragmentInfo info = analyze_fragment(sched.phi);
        for (const auto& c : info.conjuncts) {
            sched.psi.push_back(c.psi);
        }
        out.obligation_robustness = obligation_robustness(sched, trace);
    }
    return out;
}

SatisfactionResult check_satisfaction(const Formula& phi, const Trajectory& traj)
{
    const auto states = traj.states();
    return check_satisfaction(phi, states);
}

PolicyEvaluation evaluate_policy(const QFunction& q, const Environment& env, const RewardSpec& spec, int episodes,
                                 std::uint64_t base_seed, bool keep_trajectories)
{
    if (episodes < 1) {
        throw DomainError("evaluation needs at least one episode");
    }
    PolicyEvaluation out;
    out.summary.episodes = episodes;
    out.summary.min_robustness = std::numeric_limits<double>::infinity();
    int sat = 0;
    double sum = 0.0;
    for (int e = 0; e < episodes; ++e) {
        Trajectory traj = rollout(q, env, spec, base_seed + static_cast<std::uint64_t>(e));
        const SatisfactionResult r = check_satisfaction(*spec.schedule.phi, traj);
        sat += r.satisfied ? 1 : 0;
        sum += r.robustness;
        out.summary.min_robustness = std::min(out.summary.min_robustness, r.robustness);
        out.episodes.push_back(r);
        if (keep_trajectories) {
            out.trajectories.push_back(std::move(traj));
        }
    }
    out.summary.satisfaction_rate = static_cast<double>(sat) / episodes;
    out.summary.mean_robustness = sum / episodes;
    return out;
}

std::vector<std::string> trajectory_columns(const std::vector<std::string>& variables, std::size_t psi_count)
{
    std::vector<std::string> cols{"t"};
    cols.insert(cols.end(), variables.begin(), variables.end());
    cols.emplace_back("action");
    cols.emplace_back("reward");
    for (std::size_t i = 0; i < psi_count; ++i) {
        cols.push_back("rho_psi_" + std::to_string(i + 1));
    }
    cols.emplace_back("gamma_lower");
    cols.emplace_back("margin");
    cols.emplace_back("satisfied_so_far");
    return cols;
}

std::string trajectory_csv(const Trajectory& traj)
{
    const std::size_t psi_count = traj.steps.empty() ? 0 : traj.steps.front().rho_psi.size();
    std::vector<std::string> vars = traj.meta.variables;
    if (vars.empty() && !traj.steps.empty()) {
        for (std::size_t i = 0; i < traj.steps.front().state.size(); ++i) {
            vars.push_back("s" + std::to_string(i));
        }
    }
    std::string out;
    const auto cols = trajectory_columns(vars, psi_count);
    for (std::size_t i = 0; i < cols.size(); ++i) {
        out += (i ? "," : "") + cols[i];
    }
    out += '\n';
    for (const auto& r : traj.steps) {
        if (r.state.size() != vars.size() || r.rho_psi.size() != psi_count) {
            throw DomainError("trajectory records have inconsistent widths");
        }
        out += std::to_string(r.t);
        for (const double v : r.state) {
            out += ',' + fmt(v);
        }
        out += ',' + (r.action >= 0 ? std::to_string(r.action) : std::string{});
        out += ',' + fmt(r.reward);
        for (const double v : r.rho_psi) {
            out += ',' + fmt(v);
        }
        out += ',' + fmt(r.gamma_lower) + ',' + fmt(r.margin) + ',' + (r.satisfied_so_far ? "1" : "0") + '\n';
    }
    return out;
}

void write_text_file(const std::string& path, const std::string& text)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw IoError("cannot open '" + path + "' for writing");
    }
    out << text;
    if (!out) {
        throw IoError("failed writing '" + path + "'");
    }
}

std::string read_text_file(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open '" + path + "'");
    }
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void export_csv(const Trajectory& traj, const std::string& path) { write_text_file(path, trajectory_csv(traj)); }

namespace {

std::vector<std::string> split_fields(const std::string& line)
{
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto comma = line.find(',', start);
        out.push_back(line.substr(start, comma == std::string::npos ? std::string::npos : comma - start));
        if (comma == std::string::npos) {
            break;
        }
        start = comma + 1;
    }
    for (auto& f : out) {
        const auto b = f.find_first_not_of(" \t\r");
        const auto e = f.find_last_not_of(" \t\r");
        f = b == std::string::npos ? std::string{} : f.substr(b, e - b + 1);
    }
    return out;
}

double parse_number(const std::string& field, std::size_t line, const std::string& column)
{
    if (field.empty()) {
        return kNaN;
    }
    double v = 0.0;
    const char* end = field.data() + field.size();
    const auto res = std::from_chars(field.data(), end, v);
    if (res.ec != std::errc{} || res.ptr != end) {
        const char* lower = field.c_str();
        if (field == "nan" || field == "NaN") {
            return kNaN;
        }
        char* stop = nullptr;
        v = std::strtod(lower, &stop);
        if (stop != lower + field.size()) {
            throw IoError("line " + std::to_string(line) + ", column '" + column + "': '" + field +
                          "' is not a number");
        }
    }
    return v;
}

} // namespace

Trajectory parse_trajectory_csv(const std::string& text)
{
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) {
        throw IoError("trajectory CSV is empty");
    }
    const auto header = split_fields(line);
    if (header.empty() || header[0] != "t") {
        throw IoError("trajectory CSV must start with a 't' column");
    }
    const auto known = [](const std::string& c) {
        return c == "action" || c == "reward" || c == "gamma_lower" || c == "margin" || c == "satisfied_so_far" ||
               c.rfind("rho_psi_", 0) == 0;
    };
    Trajectory traj;
    std::size_t col = 1;
    while (col < header.size() && !known(header[col])) {
        traj.meta.variables.push_back(header[col]);
        ++col;
    }
    if (traj.meta.variables.empty()) {
        throw IoError("trajectory CSV has no state columns");
    }
    auto find = [&](const std::string& name) -> std::optional<std::size_t> {
        const auto it = std::find(header.begin(), header.end(), name);
        return it == header.end() ? std::nullopt : std::optional<std::size_t>(it - header.begin());
    };
    std::vector<std::size_t> psi_cols;
    for (std::size_t i = 1;; ++i) {
        const auto c = find("rho_psi_" + std::to_string(i));
        if (!c) {
            break;
        }
        psi_cols.push_back(*c);
    }
    const auto c_action = find("action");
    const auto c_reward = find("reward");
    const auto c_lower = find("gamma_lower");
    const auto c_margin = find("margin");
    const auto c_sat = find("satisfied_so_far");

    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line == "\r") {
            continue;
        }
        const auto f = split_fields(line);
        if (f.size() != header.size()) {
            throw IoError("line " + std::to_string(lineno) + " has " + std::to_string(f.size()) + " fields, expected " +
                          std::to_string(header.size()));
        }
        StepRecord r;
        const double t = parse_number(f[0], lineno, "t");
        if (!(t >= 0.0) || t != std::floor(t)) {
            throw IoError("line " + std::to_string(lineno) + ": step must be a non-negative integer");
        }
        r.t = static_cast<int>(t);
        if (r.t != static_cast<int>(traj.steps.size())) {
            throw IoError("line " + std::to_string(lineno) + ": steps must run 0, 1, 2, ... without gaps");
        }
        for (std::size_t v = 0; v < traj.meta.variables.size(); ++v) {
            r.state.push_back(parse_number(f[1 + v], lineno, header[1 + v]));
        }
        if (c_action) {
            const double a = parse_number(f[*c_action], lineno, "action");
            r.action = std::isnan(a) ? -1 : static_cast<std::int64_t>(a);
        }
        r.reward = c_reward ? parse_number(f[*c_reward], lineno, "reward") : kNaN;
        for (const auto c : psi_cols) {
            r.rho_psi.push_back(parse_number(f[c], lineno, header[c]));
        }
        r.gamma_lower = c_lower ? parse_number(f[*c_lower], lineno, "gamma_lower") : kNaN;
        r.margin = c_margin ? parse_number(f[*c_margin], lineno, "margin") : kNaN;
        r.satisfied_so_far = c_sat ? parse_number(f[*c_sat], lineno, "satisfied_so_far") != 0.0 : true;
        traj.steps.push_back(std::move(r));
    }
    return traj;
}

Trajectory import_csv(const std::string& path) { return parse_trajectory_csv(read_text_file(path)); }

std::string funnel_csv(const FunnelSchedule& schedule, std::size_t segment)
{
    std::string out = "t,segment,gamma_lower,rho_max\n";
    const auto& seg = schedule.segments.at(segment);
    for (int t = seg.t_first; t <= seg.t_end; ++t) {
        out += std::to_string(t) + ',' + std::to_string(segment) + ',' +
               fmt(-gamma_eval(seg, t) + seg.params.rho_max) + ',' + fmt(seg.params.rho_max) + '\n';
    }
    return out;
}

std::string funnel_csv(const FunnelSchedule& schedule)
{
    std::string out = "t,segment,gamma_lower,rho_max\n";
    for (int t = 0; t <= schedule.horizon; ++t) {
        for (const std::size_t i : schedule.active_at(t)) {
            const auto& seg = schedule.segments[i];
            out += std::to_string(t) + ',' + std::to_string(i) + ',' + fmt(-gamma_eval(seg, t) + seg.params.rho_max) +
                   ',' + fmt(seg.params.rho_max) + '\n';
        }
    }
    return out;
}

void export_funnel_csv(const FunnelSchedule& schedule, const std::string& path)
{
    write_text_file(path, funnel_csv(schedule));
}

} // namespace stlfunnel
