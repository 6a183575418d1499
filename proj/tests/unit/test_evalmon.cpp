#include "doctest.h"

#include "oracles/stl_oracle.hpp"

#include "stlfunnel/error.hpp"
#include "stlfunnel/evalmon.hpp"
#include "stlfunnel/parser.hpp"

#include <array>
#include <cmath>
#include <filesystem>
#include <numbers>
#include <sstream>

using namespace stlfunnel;

namespace {

/// Q-function whose greedy action is fixed per step by a callback on (s, t).
class ScriptedQ final : public QFunction {
public:
    ScriptedQ(std::size_t actions, std::function<std::size_t(std::span<const double>, int)> pick)
        : actions_(actions), pick_(std::move(pick))
    {
    }
    std::size_t action_count() const override { return actions_; }
    std::vector<double> q_values(std::span<const double> s, int t) const override
    {
        std::vector<double> q(actions_, 0.0);
        q[pick_(s, t)] = 1.0;
        return q;
    }

private:
    std::size_t actions_;
    std::function<std::size_t(std::span<const double>, int)> pick_;
};

/// Environment with a configurable horizon whose state blows up on action 1.
class Toy final : public Environment {
public:
    explicit Toy(int horizon) : horizon_(horizon), actions_({ActionAxis{"a", 0.0, 1.0, 2}}) {}
    std::string name() const override { return "toy"; }
    const std::vector<std::string>& variables() const override { return vars_; }
    const ActionGrid& actions() const override { return actions_; }
    int horizon() const override { return horizon_; }
    StateVector reset(Rng&) const override { return {0.5}; }
    StateVector step(std::span<const double> s, std::size_t a) const override
    {
        return {a == 0 ? s[0] : std::numeric_limits<double>::infinity()};
    }
    std::vector<Range> state_box() const override { return {{0.0, 1.0}}; }

private:
    int horizon_;
    std::vector<std::string> vars_{"p"};
    ActionGrid actions_;
};

const std::vector<std::string> kX = {"x"};

std::unique_ptr<SimulatedEnv> integrator(int horizon, double tau, Range reset)
{
    auto cfg = default_env_config(EnvKind::Integrator);
    cfg.horizon = horizon;
    cfg.tau = tau;
    cfg.reset.type = ResetDistribution::Type::Uniform;
    cfg.reset.box = {reset};
    return make_environment(cfg);
}

RewardSpec spec_for(const std::string& text, const std::vector<std::string>& schema, const std::vector<Range>& box,
                    int horizon, std::vector<FunnelOverrides> over = {})
{
    const auto phi = parse_formula(text, schema);
    const auto info = analyze_fragment(phi);
    std::vector<RhoBounds> bounds;
    for (const auto& c : info.conjuncts) {
        bounds.push_back(estimate_rho_bounds(*c.psi, box, 201));
    }
    return {build_schedule(phi, bounds, over, horizon), RewardMode::Funnel};
}

// steers the integrator toward `goal` with the grid velocity closest to the remaining distance
std::size_t toward(const Environment& env, double x, double goal, double tau)
{
    std::size_t best = 0;
    double best_err = std::numeric_limits<double>::infinity();
    for (std::size_t a = 0; a < env.actions().size(); ++a) {
        const double err = std::fabs(x + tau * env.actions().decode(a)[0] - goal);
        if (err < best_err) {
            best_err = err;
            best = a;
        }
    }
    return best;
}

} // namespace

TEST_CASE("always over three steps reports its worst step")
{
    const auto phi = parse_formula("G[0,2](x >= 0)", kX);
    const std::vector<StateVector> w = {{1.0}, {-0.1}, {2.0}};
    const auto r = check_satisfaction(*phi, w);
    CHECK_FALSE(r.satisfied);
    CHECK(r.robustness == -0.1);
    CHECK(r.obligation_robustness == -0.1);
    CHECK_THROWS_AS(check_satisfaction(*phi, std::span(w).first(2)), DomainError);
}

TEST_CASE("circling inside the annulus keeps a margin to both rims")
{
    const std::vector<std::string> xy = {"x", "y"};
    const auto phi = parse_formula("G[300,2000](norm2(x - 5, y - 5) >= 2 & norm2(x - 5, y - 5) <= 5)", xy);
    std::vector<StateVector> w;
    for (int k = 0; k <= 2000; ++k) {
        const double a = 2.0 * std::numbers::pi * k / 250.0;
        w.push_back({5.0 + 3.5 * std::cos(a), 5.0 + 3.5 * std::sin(a)});
    }
    const auto r = check_satisfaction(*phi, w);
    CHECK(r.satisfied);
    CHECK(r.robustness == doctest::Approx(1.5).epsilon(1e-12));
    CHECK(r.obligation_robustness == doctest::Approx(1.5).epsilon(1e-12));
}

TEST_CASE("obligation robustness only looks inside the windows")
{
    const std::vector<Range> box = {{-10.0, 10.0}};
    const auto spec = spec_for("F[2,3](x >= 1) & G[5,6](x <= 4)", kX, box, 8);
    const std::vector<StateVector> w = {{-9}, {-9}, {0.5}, {2.0}, {-9}, {3.0}, {1.0}, {-9}, {-9}};
    // F contributes min(-0.5, 1.0) and G min(1.0, 3.0)
    CHECK(obligation_robustness(spec.schedule, w) == -0.5);
    const auto r = check_satisfaction(*spec.schedule.phi, w);
    CHECK(r.satisfied);
    CHECK(r.robustness == 1.0);
    CHECK(r.obligation_robustness == -0.5);
}

TEST_CASE("prefix satisfaction flags")
{
    const std::vector<Range> box = {{-10.0, 10.0}};
    const auto spec = spec_for("F[2,3](x >= 1) & G[5,6](x <= 4)", kX, box, 8);
    {
        const std::vector<StateVector> w = {{0}, {0}, {0}, {0}, {0}, {0}, {0}, {0}, {0}};
        const auto f = satisfied_so_far(spec.schedule, w);
        // the eventually window closes without a hit at step 3
        CHECK(f == std::vector<bool>{true, true, true, false, false, false, false, false, false});
    }
    {
        const std::vector<StateVector> w = {{0}, {0}, {2}, {0}, {0}, {0}, {5}, {0}, {0}};
        const auto f = satisfied_so_far(spec.schedule, w);
        CHECK(f == std::vector<bool>{true, true, true, true, true, true, false, false, false});
    }
}

TEST_CASE("rollouts are deterministic and complete")
{
    const auto env = integrator(200, 0.01, {0.0, 50.0});
    const auto spec = spec_for("G[0,200](abs(x - 5) <= 5 | abs(x - 45) <= 5)", kX, env->state_box(), 200,
                               {FunnelOverrides{std::nullopt, 100}});
    const ScriptedQ q(env->actions().size(), [&](std::span<const double> s, int) { return toward(*env, s[0], 45.0, 0.01); });
    const auto a = rollout(q, *env, spec, 42);
    const auto b = rollout(q, *env, spec, 42);
    REQUIRE(a.steps.size() == 201);
    CHECK(a.states() == b.states());
    CHECK(a.steps.back().action == -1);
    CHECK(a.steps.front().action >= 0);
    CHECK(a.meta.seed == 42);
    CHECK(a.meta.variables == kX);
    for (std::size_t i = 0; i < a.steps.size(); ++i) {
        CHECK(a.steps[i].t == static_cast<int>(i));
    }
    const auto wrong = integrator(150, 0.01, {0.0, 50.0});
    CHECK_THROWS_AS(rollout(q, *wrong, spec, 1), DomainError);
}

TEST_CASE("zero-step horizon gives a single state")
{
    const Toy env(0);
    RewardSpec spec;
    spec.schedule.horizon = 0;
    spec.schedule.active.assign(1, {});
    const ScriptedQ q(2, [](std::span<const double>, int) { return std::size_t{0}; });
    const auto traj = rollout(q, env, spec, 3);
    REQUIRE(traj.steps.size() == 1);
    CHECK(traj.steps[0].state == StateVector{0.5});
    CHECK(traj.steps[0].action == -1);
    CHECK(traj.steps[0].reward == 0.0);
    CHECK(std::isnan(traj.steps[0].margin));
}

TEST_CASE("diverging dynamics abort the rollout")
{
    const Toy env(5);
    RewardSpec spec;
    spec.schedule.horizon = 5;
    spec.schedule.active.assign(6, {});
    const ScriptedQ q(2, [](std::span<const double>, int t) { return std::size_t(t == 3 ? 1 : 0); });
    CHECK_THROWS_AS(rollout(q, env, spec, 3), DivergenceError);
}

TEST_CASE("recorded rewards agree with the funnel recomputed from the trace")
{
    const std::vector<std::string> planar = {"x", "y", "theta"};
    auto cfg = default_env_config(EnvKind::DiffDrive);
    cfg.state_box = {{-1.0, 6.0}, {-1.0, 6.0}, {-std::numbers::pi, std::numbers::pi}};
    const auto env = make_environment(cfg);
    const auto spec = spec_for("G[180,260](norm2(x - 2.5, y - 2.5) <= 0.5) & G[320,400](norm2(x - 3, y - 3) <= 0.5)",
                               planar, env->state_box(), 400);
    const ScriptedQ q(env->actions().size(), [](std::span<const double>, int) { return std::size_t{0}; });
    int checked = 0;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const auto traj = rollout(q, *env, spec, seed, 1.0);
        for (const auto& rec : traj.steps) {
            const auto active = spec.schedule.active_at(rec.t);
            REQUIRE(active.size() == 1);
            const auto& seg = spec.schedule.segments[active[0]];
            const auto& p = seg.params;
            const double gamma = (p.gamma0 - p.gamma_inf) * std::exp(-p.l * (rec.t - seg.t_begin)) + p.gamma_inf;
            const double rho = oracle::rho(*spec.schedule.psi[seg.psi_index], {rec.state}, 0);
            CHECK(std::fabs(rec.reward - (rho + gamma - p.rho_max)) <= 1e-12);
            CHECK(rec.margin == rec.reward);
            CHECK(rec.gamma_lower == doctest::Approx(p.rho_max - gamma).epsilon(1e-12));
            CHECK(rec.rho_psi[seg.psi_index] == doctest::Approx(rho).epsilon(1e-12));
            ++checked;
        }
    }
    CHECK(checked == 5 * 401);
}

TEST_CASE("staying inside every funnel implies satisfaction")
{
    const double tau = 0.1;
    const auto env = integrator(150, tau, {0.0, 10.0});
    const auto spec = spec_for("F[10,60](abs(x - 5) <= 1) & G[80,150](abs(x - 5) <= 2)", kX, {{0.0, 10.0}}, 150);
    const auto& sched = spec.schedule;
    int premise = 0;
    int total = 0;
    for (std::uint64_t seed = 0; seed < 40; ++seed) {
        // a tracking controller with occasional exploration, plus pure noise for some seeds
        const double eps = std::array<double, 4>{1.0, 0.0, 0.02, 0.1}[seed % 4];
        const double goal = seed % 7 == 0 ? 8.0 : 5.0;
        const ScriptedQ q(env->actions().size(), [&](std::span<const double> s, int) { return toward(*env, s[0], goal, tau); });
        const auto traj = rollout(q, *env, spec, seed, eps);
        ++total;
        bool inside = true;
        for (const auto& seg : sched.segments) {
            if (seg.kind == FormulaKind::Always) {
                for (int t = seg.window.lo; t <= seg.window.hi; ++t) {
                    inside = inside && segment_reward(sched, static_cast<std::size_t>(&seg - sched.segments.data()),
                                                      traj.steps[static_cast<std::size_t>(t)].state, t) >= 0.0;
                }
            } else {
                bool any = false;
                for (int t = seg.window.lo; t <= seg.window.hi; ++t) {
                    any = any || segment_reward(sched, static_cast<std::size_t>(&seg - sched.segments.data()),
                                                traj.steps[static_cast<std::size_t>(t)].state, t) >= 0.0;
                }
                inside = inside && any;
            }
        }
        const auto verdict = check_satisfaction(*sched.phi, traj);
        CHECK(verdict.satisfied == (verdict.robustness >= 0.0));
        CHECK(verdict.robustness == oracle::rho(*sched.phi, traj.states(), 0));
        if (inside) {
            ++premise;
            CHECK(verdict.satisfied);
        }
    }
    CHECK(premise >= 8);
    CHECK(premise < total);
}

TEST_CASE("evaluation summary aggregates the episodes")
{
    const auto env = integrator(200, 0.01, {0.0, 50.0});
    const auto spec = spec_for("G[0,200](abs(x - 5) <= 5 | abs(x - 45) <= 5)", kX, env->state_box(), 200,
                               {FunnelOverrides{std::nullopt, 100}});
    const ScriptedQ q(env->actions().size(), [&](std::span<const double> s, int) {
        return toward(*env, s[0], s[0] < 25 ? 5.0 : 45.0, 0.01);
    });
    const auto ev = evaluate_policy(q, *env, spec, 12, 100, true);
    REQUIRE(ev.episodes.size() == 12);
    REQUIRE(ev.trajectories.size() == 12);
    int sat = 0;
    double lo = std::numeric_limits<double>::infinity();
    double sum = 0.0;
    for (std::size_t i = 0; i < 12; ++i) {
        CHECK(ev.trajectories[i].meta.seed == 100 + i);
        const auto& e = ev.episodes[i];
        CHECK(e.satisfied == (e.robustness >= 0.0));
        sat += e.satisfied;
        lo = std::min(lo, e.robustness);
        sum += e.robustness;
    }
    CHECK(ev.summary.episodes == 12);
    CHECK(ev.summary.satisfaction_rate == sat / 12.0);
    CHECK(ev.summary.min_robustness == lo);
    CHECK(ev.summary.mean_robustness == doctest::Approx(sum / 12.0));
    CHECK_THROWS_AS(evaluate_policy(q, *env, spec, 0, 1), DomainError);
}

TEST_CASE("trajectory CSV layout and round trip")
{
    const std::vector<std::string> vars = {"x", "y", "theta"};
    CHECK(trajectory_columns(vars, 2) ==
          std::vector<std::string>{"t", "x", "y", "theta", "action", "reward", "rho_psi_1", "rho_psi_2", "gamma_lower",
                                   "margin", "satisfied_so_far"});

    const auto env = integrator(150, 0.1, {0.0, 10.0});
    std::vector<FunnelOverrides> over(2);
    over[1].t_star = 70;
    const auto spec = spec_for("F[10,60](abs(x - 5) <= 1) & G[50,120](abs(x - 5) <= 2)", kX, {{0.0, 10.0}}, 150, over);
    const ScriptedQ q(env->actions().size(), [&](std::span<const double> s, int) { return toward(*env, s[0], 5.0, 0.1); });
    const auto traj = rollout(q, *env, spec, 9, 0.3);
    const std::string text = trajectory_csv(traj);
    CHECK(text.rfind("t,x,action,reward,rho_psi_1,rho_psi_2,gamma_lower,margin,satisfied_so_far\n", 0) == 0);

    const auto dir = std::filesystem::temp_directory_path() / "stlfunnel_csv_test";
    std::filesystem::create_directories(dir);
    const auto path = (dir / "traj.csv").string();
    export_csv(traj, path);
    CHECK(read_text_file(path) == text);
    const auto back = import_csv(path);
    REQUIRE(back.steps.size() == traj.steps.size());
    CHECK(back.meta.variables == kX);
    bool saw_nan = false;
    for (std::size_t i = 0; i < traj.steps.size(); ++i) {
        const auto& a = traj.steps[i];
        const auto& b = back.steps[i];
        CHECK(a.t == b.t);
        CHECK(a.state == b.state);
        CHECK(a.action == b.action);
        CHECK(a.reward == b.reward);
        CHECK(a.rho_psi == b.rho_psi);
        CHECK(a.satisfied_so_far == b.satisfied_so_far);
        if (std::isnan(a.margin)) {
            saw_nan = true;
            CHECK(std::isnan(b.margin));
            CHECK(std::isnan(b.gamma_lower));
        } else {
            CHECK(a.margin == b.margin);
            CHECK(a.gamma_lower == b.gamma_lower);
        }
    }
    CHECK(saw_nan); // steps 0..9 and 121..150 have no obligation
    CHECK(trajectory_csv(back) == text);
    std::filesystem::remove_all(dir);
}

TEST_CASE("external CSV with only the mandatory columns")
{
    const auto traj = parse_trajectory_csv("t,x\n0,1.5\n1,2\n2,2.5\n");
    REQUIRE(traj.steps.size() == 3);
    CHECK(traj.steps[2].state == StateVector{2.5});
    CHECK_THROWS_AS(parse_trajectory_csv("t,x\n0,1\n2,2\n"), IoError);
    CHECK_THROWS_AS(parse_trajectory_csv("x\n1\n"), IoError);
    CHECK_THROWS_AS(parse_trajectory_csv("t,x\n0,abc\n"), IoError);
    CHECK_THROWS_AS(import_csv("/nonexistent/dir/file.csv"), IoError);
}

TEST_CASE("funnel CSV re-opens the bound at a sequential boundary")
{
    const std::vector<std::string> xy = {"x", "y"};
    const auto phi = parse_formula("F[2,4](x <= 1) & G[6,8](y >= 0)", xy);
    const std::vector<RhoBounds> bounds(2, RhoBounds{-0.5, 0.5});
    std::vector<FunnelOverrides> over(2);
    over[0].gamma_inf = over[1].gamma_inf = 0.1;
    const auto s = build_schedule(phi, bounds, over, 10);
    const std::string csv = funnel_csv(s);
    std::istringstream in(csv);
    std::string line;
    std::getline(in, line);
    CHECK(line == "t,segment,gamma_lower,rho_max");
    std::vector<std::vector<double>> rows;
    while (std::getline(in, line)) {
        std::vector<double> row;
        std::stringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) {
            row.push_back(std::stod(cell));
        }
        rows.push_back(row);
    }
    REQUIRE(rows.size() == 11);
    // closes exactly at t = 4 and re-opens at t = 5
    CHECK(rows[4][2] == doctest::Approx(0.0).epsilon(1e-12).scale(1.0));
    CHECK(rows[4][1] == 0.0);
    CHECK(rows[5][1] == 1.0);
    CHECK(rows[5][2] < rows[4][2] - 0.1);
    CHECK(rows[5][2] == doctest::Approx(0.5 - ((1.0 - 0.1) * std::exp(-s.segments[1].params.l) + 0.1)));
    CHECK(funnel_csv(s, 1).find("\n5,1,") != std::string::npos);
    CHECK(funnel_csv(s, 1).find("\n4,") == std::string::npos);
}
