#include "stlfunnel/commands.hpp"

#include "stlfunnel/error.hpp"
#include "stlfunnel/log.hpp"

#include "json.hpp"

#include <cmath>
#include <filesystem>

namespace stlfunnel {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string prepare_dir(const RunConfig& cfg)
{
    std::error_code ec;
    fs::create_directories(cfg.output_dir, ec);
    if (ec) {
        throw IoError("cannot create output directory '" + cfg.output_dir + "': " + ec.message());
    }
    return cfg.output_dir;
}

std::string out_path(const std::string& dir, const std::string& name) { return (fs::path(dir) / name).string(); }

const char* kind_name(FormulaKind k)
{
    switch (k) {
    case FormulaKind::Eventually:
        return "F";
    case FormulaKind::Always:
        return "G";
    case FormulaKind::EventuallyAlways:
        return "FG";
    default:
        return "?";
    }
}

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json summary_json(const EvalSummary& s)
{
    return {{"episodes", s.episodes},
            {"satisfaction_rate", s.satisfaction_rate},
            {"min_robustness", number_or_null(s.min_robustness)},
            {"mean_robustness", number_or_null(s.mean_robustness)}};
}

EvalFn make_eval_fn(const Problem& p, const RunConfig& cfg)
{
    if (cfg.train.eval_every <= 0) {
        return {};
    }
    const Environment* env = p.env.get();
    const RewardSpec* spec = &p.reward;
    const int episodes = cfg.train.eval_episodes;
    const std::uint64_t seed = cfg.eval.seed;
    return [env, spec, episodes, seed](const QFunction& q) {
        return evaluate_policy(q, *env, *spec, episodes, seed).summary;
    };
}

void write_metadata(const Trajectory& traj, const SimulatedEnv& env, const RunConfig& cfg, const std::string& path)
{
    json axes = json::array();
    for (const auto& a : env.actions().axes()) {
        axes.push_back({{"name", a.name}, {"lo", a.lo}, {"hi", a.hi}, {"count", a.count}});
    }
    const json meta = {{"seed", traj.meta.seed},
                       {"config_digest", traj.meta.config_digest},
                       {"spec", traj.meta.spec},
                       {"environment", env.name()},
                       {"variables", env.variables()},
                       {"units", env.units()},
                       {"action_axes", axes},
                       {"tau", env.config().tau},
                       {"horizon", env.horizon()},
                       {"reward_mode", std::string(to_string(cfg.reward_mode))}};
    write_text_file(path, meta.dump(2) + "\n");
}

} // namespace

std::string schedule_json(const FunnelSchedule& schedule)
{
    json segs = json::array();
    for (std::size_t i = 0; i < schedule.segments.size(); ++i) {
        const auto& s = schedule.segments[i];
        segs.push_back({{"index", i},
                        {"conjunct", s.psi_index},
                        {"operator", kind_name(s.kind)},
                        {"psi", to_string(*schedule.psi[s.psi_index])},
                        {"window", {s.window.lo, s.window.hi}},
                        {"clock_origin", s.t_begin},
                        {"first_step", s.t_first},
                        {"last_step", s.t_end},
                        {"gamma0", s.params.gamma0},
                        {"gamma_inf", s.params.gamma_inf},
                        {"l", s.params.l},
                        {"rho_max", s.params.rho_max},
                        {"t_star", s.params.t_star},
                        {"closure_step", s.t_begin + s.params.t_star}});
    }
    const json j = {{"formula", to_string(*schedule.phi)},
                    {"fragment", std::string(to_string(schedule.fragment))},
                    {"horizon", schedule.horizon},
                    {"segments", segs}};
    return j.dump(2) + "\n";
}

FunnelResult cmd_funnel(const RunConfig& cfg)
{
    const Problem p = build_problem(cfg);
    const std::string dir = prepare_dir(cfg);
    FunnelResult r;
    r.schedule = p.reward.schedule;
    const auto sched_path = out_path(dir, "schedule.json");
    write_text_file(sched_path, schedule_json(r.schedule));
    r.files.push_back(sched_path);
    const auto csv_path = out_path(dir, "funnel.csv");
    export_funnel_csv(r.schedule, csv_path);
    r.files.push_back(csv_path);
    if (r.schedule.fragment == FragmentClass::OverlappingConjunction) {
        for (std::size_t i = 0; i < r.schedule.segments.size(); ++i) {
            const auto path = out_path(dir, "funnel_segment_" + std::to_string(i) + ".csv");
            write_text_file(path, funnel_csv(r.schedule, i));
            r.files.push_back(path);
        }
    }
    for (const auto& s : r.schedule.segments) {
        log_info("segment for conjunct " + std::to_string(s.psi_index) + ": l = " + format_number(s.params.l) +
                 ", t* = " + std::to_string(s.params.t_star));
    }
    return r;
}

TrainResult cmd_train(const RunConfig& cfg)
{
    const Problem p = build_problem(cfg);
    Trainer trainer(*p.env, make_reward_fn(p), cfg.train, make_eval_fn(p, cfg));
    if (!cfg.checkpoint.empty()) {
        const Checkpoint ck = load_checkpoint(cfg.checkpoint);
        if (!check_checkpoint(ck, p.env->actions().size(), cfg.digest)) {
            log_warn("checkpoint '" + cfg.checkpoint + "' was written under a different configuration");
        }
        try {
            apply_checkpoint(trainer, ck);
        } catch (const DomainError& e) {
            throw ConfigError("checkpoint", e.what());
        }
        log_info("resuming at step " + std::to_string(ck.progress.step));
    }
    const std::string dir = prepare_dir(cfg);
    trainer.run();

    TrainResult r;
    r.log = trainer.log();
    r.steps = trainer.progress().step;
    r.best_eval = trainer.best_eval();

    const Checkpoint ck = make_checkpoint(trainer, cfg.digest);
    const auto ck_path = out_path(dir, "checkpoint.json");
    save_checkpoint(ck, ck_path);
    r.files.push_back(ck_path);

    Checkpoint policy = ck;
    policy.online = trainer.result_network();
    policy.target = policy.online;
    const auto policy_path = out_path(dir, "policy.json");
    save_checkpoint(policy, policy_path);
    r.files.push_back(policy_path);

    const auto log_path = out_path(dir, "train_log.csv");
    write_text_file(log_path, r.log.to_csv());
    r.files.push_back(log_path);
    return r;
}

EvalResult cmd_eval(const RunConfig& cfg, std::optional<int> episodes)
{
    const int n = episodes.value_or(cfg.eval.episodes);
    if (n < 1) {
        throw ConfigError("eval.episodes", "at least one episode is needed for a summary");
    }
    const Problem p = build_problem(cfg);
    const std::string ck_path = cfg.checkpoint.empty() ? out_path(cfg.output_dir, "policy.json") : cfg.checkpoint;
    const Checkpoint ck = load_checkpoint(ck_path);
    try {
        if (!check_checkpoint(ck, p.env->actions().size(), cfg.digest)) {
            log_info("checkpoint configuration digest differs from the evaluation configuration");
        }
    } catch (const DomainError& e) {
        throw ConfigError("checkpoint", e.what());
    }
    if (ck.online.horizon() != p.env->horizon() || ck.online.state_dim() != p.env->state_dim()) {
        throw ConfigError("checkpoint", "network horizon or state dimension differs from the environment");
    }
    const std::string dir = prepare_dir(cfg);
    EvalResult r;
    r.evaluation = evaluate_policy(ck.online, *p.env, p.reward, n, cfg.eval.seed, true);

    json eps = json::array();
    for (std::size_t i = 0; i < r.evaluation.trajectories.size(); ++i) {
        auto& traj = r.evaluation.trajectories[i];
        traj.meta.config_digest = cfg.digest;
        const auto stem = "trajectory_" + std::to_string(i);
        export_csv(traj, out_path(dir, stem + ".csv"));
        write_metadata(traj, *p.env, cfg, out_path(dir, stem + ".json"));
        r.files.push_back(out_path(dir, stem + ".csv"));
        r.files.push_back(out_path(dir, stem + ".json"));
        const auto& e = r.evaluation.episodes[i];
        eps.push_back({{"seed", traj.meta.seed},
                       {"satisfied", e.satisfied},
                       {"robustness", e.robustness},
                       {"obligation_robustness", e.obligation_robustness}});
    }
    json summary = summary_json(r.evaluation.summary);
    summary["checkpoint"] = ck_path;
    summary["reward_mode"] = std::string(to_string(cfg.reward_mode));
    summary["formula"] = to_string(*p.phi);
    summary["per_episode"] = eps;
    const auto summary_path = out_path(dir, "summary.json");
    write_text_file(summary_path, summary.dump(2) + "\n");
    r.files.push_back(summary_path);
    const auto funnel_path = out_path(dir, "funnel.csv");
    export_funnel_csv(p.reward.schedule, funnel_path);
    r.files.push_back(funnel_path);
    return r;
}

MonitorResult cmd_monitor(const RunConfig& cfg)
{
    if (cfg.trajectory.empty()) {
        throw ConfigError("trajectory", "path of the trajectory CSV to monitor is required");
    }
    const Problem p = build_problem(cfg);
    const Trajectory traj = import_csv(cfg.trajectory);
    const auto& vars = p.env->variables();
    std::vector<std::size_t> column(vars.size());
    for (std::size_t i = 0; i < vars.size(); ++i) {
        const auto it = std::find(traj.meta.variables.begin(), traj.meta.variables.end(), vars[i]);
        if (it == traj.meta.variables.end()) {
            throw IoError("trajectory CSV lacks a column for state variable '" + vars[i] + "'");
        }
        column[i] = static_cast<std::size_t>(it - traj.meta.variables.begin());
    }
    std::vector<StateVector> trace;
    for (const auto& rec : traj.steps) {
        StateVector s(vars.size());
        for (std::size_t i = 0; i < vars.size(); ++i) {
            s[i] = rec.state[column[i]];
            if (std::isnan(s[i])) {
                throw IoError("trajectory CSV has an empty state value at step " + std::to_string(rec.t));
            }
        }
        trace.push_back(std::move(s));
    }
    MonitorResult r;
    r.steps = trace.size();
    r.verdict = check_satisfaction(*p.phi, trace);
    const std::string dir = prepare_dir(cfg);
    const json j = {{"trajectory", cfg.trajectory},
                    {"formula", to_string(*p.phi)},
                    {"steps", r.steps},
                    {"satisfied", r.verdict.satisfied},
                    {"robustness", r.verdict.robustness},
                    {"obligation_robustness", r.verdict.obligation_robustness}};
    const auto path = out_path(dir, "verdict.json");
    write_text_file(path, j.dump(2) + "\n");
    r.files.push_back(path);
    return r;
}

} // namespace stlfunnel
