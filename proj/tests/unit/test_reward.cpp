#include "doctest.h"

#include "oracles/stl_oracle.hpp"

#include "stlfunnel/error.hpp"
#include "stlfunnel/parser.hpp"
#include "stlfunnel/reward.hpp"

#include <cmath>
#include <random>

using namespace stlfunnel;

namespace {

const std::vector<std::string> kXY = {"x", "y"};

RewardSpec make_spec(const std::string& text, std::vector<RhoBounds> bounds, int horizon,
                     std::vector<FunnelOverrides> over = {}, RewardMode mode = RewardMode::Funnel)
{
    const auto phi = parse_formula(text, kXY);
    return {build_schedule(phi, bounds, over, horizon), mode};
}

std::vector<FunnelOverrides> gamma_inf_all(std::size_t n, double v)
{
    std::vector<FunnelOverrides> o(n);
    for (auto& x : o) {
        x.gamma_inf = v;
    }
    return o;
}

// reward of one segment recomputed from its parameters
double independent_segment_reward(const FunnelSchedule& s, std::size_t i, const StateVector& x, int t)
{
    const auto& seg = s.segments[i];
    const auto& p = seg.params;
    const double gamma = (p.gamma0 - p.gamma_inf) * std::exp(-p.l * (t - seg.t_begin)) + p.gamma_inf;
    return oracle::rho(*s.psi[seg.psi_index], {x}, 0) + gamma - p.rho_max;
}

} // namespace

TEST_CASE("reward inside an always funnel at its closure")
{
    // gamma0 = 1, gamma_inf = 0.1, rho_max = 0.5, closing at t = 10
    const auto spec = make_spec("G[10,20](x <= 0.5)", {{-0.5, 0.5}}, 20, gamma_inf_all(1, 0.1));
    const StateVector s = {0.2, 0.0};
    CHECK(reward(spec, s, 10) == doctest::Approx(0.3).epsilon(1e-12));
    const StateVector edge = {0.5, 0.0};
    CHECK(std::fabs(reward(spec, edge, 10)) <= 1e-15);
    CHECK_THROWS_AS(reward(spec, s, 21), DomainError);
    CHECK_THROWS_AS(reward(spec, s, -1), DomainError);
}

TEST_CASE("minimum over active segments and zero when none is active")
{
    const std::vector<RhoBounds> b(2, RhoBounds{-1.0, 1.0});
    const auto spec = make_spec("F[0,10](x <= 1) & F[0,5](y <= 1)", b, 12);
    REQUIRE(spec.schedule.fragment == FragmentClass::OverlappingConjunction);
    const StateVector s = {0.8, 1.1}; // pointwise robustness 0.2 and -0.1
    CHECK(segment_reward(spec.schedule, 0, s, 10) == doctest::Approx(0.2).epsilon(1e-12));
    CHECK(segment_reward(spec.schedule, 1, s, 5) == doctest::Approx(-0.1).epsilon(1e-12));
    CHECK(reward(spec, s, 5) == doctest::Approx(-0.1).epsilon(1e-12));
    CHECK(reward(spec, s, 10) == doctest::Approx(0.2).epsilon(1e-12));
    CHECK(reward(spec, s, 11) == 0.0);
    CHECK(reward(spec, s, 12) == 0.0);
}

TEST_CASE("position relative to the lower funnel bound")
{
    auto spec = make_spec("G[10,20](x <= 0.5)", {{-0.5, 0.5}}, 20, gamma_inf_all(1, 0.1));
    auto& p = spec.schedule.segments[0].params;

    p.gamma0 = 0.9;
    const StateVector a = {0.7, 0.0};
    auto c = reward_sign_check(spec, a, 0);
    CHECK(c.side == FunnelSide::Inside);
    CHECK(c.margin == doctest::Approx(0.2).epsilon(1e-12));

    p.gamma0 = 0.75;
    const StateVector boundary = {0.75, 0.0};
    c = reward_sign_check(spec, boundary, 0);
    CHECK(c.margin == 0.0);
    CHECK(c.side == FunnelSide::Inside);

    p.gamma0 = 0.6;
    const StateVector below = {1.5, 0.0};
    c = reward_sign_check(spec, below, 0);
    CHECK(c.side == FunnelSide::Below);
    CHECK(c.margin == doctest::Approx(-0.9).epsilon(1e-12));

    auto none = make_spec("F[0,5](x <= 1) & F[0,3](y <= 1)", std::vector<RhoBounds>(2, {-1.0, 1.0}), 8);
    CHECK_THROWS_AS(reward_sign_check(none, a, 7), DomainError);
}

TEST_CASE("reward mode names")
{
    CHECK(parse_reward_mode("funnel") == RewardMode::Funnel);
    CHECK(parse_reward_mode("no_funnel") == RewardMode::NoFunnel);
    CHECK(to_string(RewardMode::NoFunnel) == "no_funnel");
    CHECK_THROWS_AS(parse_reward_mode("shaped"), DomainError);
}

TEST_CASE("positive reward exactly when the lower bound holds strictly")
{
    std::mt19937_64 rng(31);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    int positives = 0;
    for (int i = 0; i < 2000; ++i) {
        const double rho_max = 0.1 + u(rng);
        const double rho_min = -0.2 - 3.0 * u(rng); // keeps gamma0 above rho_max
        const int a = 1 + static_cast<int>(30 * u(rng));
        const auto spec = make_spec("G[" + std::to_string(a) + "," + std::to_string(a + 20) + "](1 - abs(x) >= " +
                                        format_number(1.0 - rho_max) + ")",
                                    {{rho_min, rho_max}}, a + 20);
        const StateVector s = {-3.0 + 6.0 * u(rng), 0.0};
        const int t = static_cast<int>((a + 20) * u(rng));
        const auto& seg = spec.schedule.segments[0];
        const double rho = rho_pointwise(*spec.schedule.psi[0], s);
        const double lower = -gamma_eval(seg, t) + seg.params.rho_max;
        const double r = reward(spec, s, t);
        CHECK((r > 0.0) == (rho > lower));
        positives += r > 0.0;
    }
    CHECK(positives > 100);
    CHECK(positives < 1900);
}

TEST_CASE("reward does not increase with time for a fixed state")
{
    const std::vector<RhoBounds> b = {{-2.0, 1.0}, {-2.0, 1.0}};
    const auto spec = make_spec("F[3,30](x <= 1) & G[40,60](abs(y) <= 1)", b, 60);
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    for (int k = 0; k < 50; ++k) {
        const StateVector s = {u(rng), u(rng)};
        for (const auto& seg : spec.schedule.segments) {
            for (int t = seg.t_first + 1; t <= seg.t_end; ++t) {
                CHECK(reward(spec, s, t) <= reward(spec, s, t - 1));
            }
        }
    }
}

TEST_CASE("overlapping rewards are the minimum of independent segment rewards")
{
    std::mt19937_64 rng(64);
    std::uniform_real_distribution<double> u(-3.0, 3.0);
    for (int k = 2; k <= 5; ++k) {
        std::string text;
        std::vector<RhoBounds> b;
        for (int i = 0; i < k; ++i) {
            if (i) {
                text += " & ";
            }
            const int a = 2 * i;
            text += "F[" + std::to_string(a) + "," + std::to_string(a + 15) + "](abs(x - " + std::to_string(i) +
                    ") + abs(y) <= 1)";
            b.push_back({-5.0, 1.0});
        }
        const auto spec = make_spec(text, b, 40);
        REQUIRE(spec.schedule.fragment == FragmentClass::OverlappingConjunction);
        bool saw_all = false;
        for (int t = 0; t <= 40; ++t) {
            const StateVector s = {u(rng), u(rng)};
            double expected = 0.0;
            bool any = false;
            for (std::size_t i = 0; i < spec.schedule.segments.size(); ++i) {
                const auto& seg = spec.schedule.segments[i];
                if (seg.t_first <= t && t <= seg.t_end) {
                    const double r = independent_segment_reward(spec.schedule, i, s, t);
                    expected = any ? std::min(expected, r) : r;
                    any = true;
                }
            }
            saw_all = saw_all || spec.schedule.active_at(t).size() == static_cast<std::size_t>(k);
            CHECK(std::fabs(reward(spec, s, t) - expected) <= 1e-12);
        }
        CHECK(saw_all);
    }
}

TEST_CASE("ablation reward ignores every funnel parameter")
{
    const std::vector<RhoBounds> b = {{-2.0, 1.0}, {-2.0, 1.0}};
    auto spec = make_spec("F[3,30](x <= 1) & G[40,60](abs(y) <= 1)", b, 60, {}, RewardMode::NoFunnel);
    auto changed = spec;
    for (auto& seg : changed.schedule.segments) {
        seg.params.gamma0 *= 7.0;
        seg.params.gamma_inf *= 0.5;
        seg.params.l *= 3.0;
        seg.params.rho_max += 0.25;
    }
    std::mt19937_64 rng(6);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    for (int t = 0; t <= 60; ++t) {
        const StateVector s = {u(rng), u(rng)};
        CHECK(reward(spec, s, t) == reward(changed, s, t));
        if (!spec.schedule.active_at(t).empty()) {
            const auto idx = spec.schedule.segments[spec.schedule.active_at(t)[0]].psi_index;
            CHECK(reward(spec, s, t) == rho_pointwise(*spec.schedule.psi[idx], s));
        }
    }
}
