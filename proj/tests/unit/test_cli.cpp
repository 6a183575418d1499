#include "doctest.h"

#include "stlfunnel/commands.hpp"
#include "stlfunnel/error.hpp"

#include "json.hpp"

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sys/wait.h>

using namespace stlfunnel;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name)
{
    const auto p = fs::temp_directory_path() / ("stlfunnel_cli_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string config_path(const std::string& name) { return std::string(STLFUNNEL_SOURCE_DIR) + "/configs/" + name; }

// small integrator problem that trains in well under a second
const char* kSmall = R"json({
  "env": {"kind": "integrator", "tau": 0.1, "horizon": 30,
          "reset": {"type": "uniform", "box": [[0, 10]]}, "state_box": [[0, 10]]},
  "spec": {"formula": "F[5,20](abs(x - 5) <= 1) & G[22,30](abs(x - 5) <= 2)"},
  "train": {"total_steps": 400, "batch_size": 16, "hidden": [8], "target_update": 50,
            "eval_every": 200, "eval_episodes": 3, "log_every": 100, "seed": 4},
  "eval": {"episodes": 3, "seed": 77}
})json";

std::string expect_config_error(std::string_view text, std::vector<std::string> overrides = {})
{
    try {
        build_problem(parse_run_config(text, overrides));
    } catch (const ConfigError& e) {
        return e.key();
    }
    return "<no error>";
}

int run_cli(const std::string& args)
{
    const std::string cmd = std::string(STLFUNNEL_CLI) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

} // namespace

TEST_CASE("configuration errors name the offending key")
{
    CHECK(expect_config_error(kSmall, {"env.speed=3"}) == "env.speed");
    CHECK(expect_config_error(kSmall, {"env.tau=-1"}) == "env.tau");
    CHECK(expect_config_error(kSmall, {"env.kind=\"boat\""}) == "env.kind");
    CHECK(expect_config_error(kSmall, {"train.batch_size=0"}) == "train.batch_size");
    CHECK(expect_config_error(kSmall, {"train.hidden.0=\"wide\""}) == "train.hidden.0");
    CHECK(expect_config_error(kSmall, {"spec.formula=\"F[5,20](abs(z) <= 1)\""}) == "spec.formula");
    CHECK(expect_config_error(kSmall, {"spec.formula=\"x <= 1\""}) == "spec.formula");
    CHECK(expect_config_error(kSmall, {"spec.conjuncts=[{}, {\"gamma_inf\": 5}]"}) == "spec.conjuncts.1.gamma_inf");
    CHECK(expect_config_error(kSmall, {"spec.conjuncts=[{\"rho_max\": -1}]"}) == "spec.conjuncts.0.rho_max");
    CHECK(expect_config_error(kSmall, {"env.horizon=25"}) == "spec");
    CHECK(expect_config_error(kSmall, {"reward_mode=\"dense\""}) == "reward_mode");
    CHECK(expect_config_error(kSmall, {"eval.episodes=0"}) == "eval.episodes");
    CHECK(expect_config_error(kSmall, {"nonsense"}) == "nonsense");
    CHECK(expect_config_error(R"j({"env": 3, "spec": {"formula": "F[0,1](x <= 1)"}})j") == "env");
    CHECK(expect_config_error(R"({"env": {"kind": "integrator"}})") == "spec");
    CHECK(expect_config_error("[1, 2") == "");
    CHECK(expect_config_error(kSmall) == "<no error>");
}

TEST_CASE("overrides reach nested values and keep the digest honest")
{
    const auto a = parse_run_config(kSmall);
    const auto b = parse_run_config(kSmall, std::vector<std::string>{"train.total_steps=500", "output_dir=elsewhere"});
    CHECK(b.train.total_steps == 500);
    CHECK(b.output_dir == "elsewhere");
    CHECK(a.digest != b.digest);
    const auto c = parse_run_config(kSmall, std::vector<std::string>{"output_dir=elsewhere", "eval.seed=5"});
    CHECK(a.digest == c.digest);
    CHECK(a.train.epsilon.decay_steps == 200);
}

TEST_CASE("funnel command on the pendulum windows")
{
    const auto dir = scratch("funnel");
    const auto cfg = load_run_config(config_path("pendulum.json"),
                                     std::vector<std::string>{"output_dir=\"" + dir.string() + "\""});
    const auto r = cmd_funnel(cfg);
    REQUIRE(r.schedule.segments.size() == 3);
    const double l[] = {0.01090, 0.01453, 0.00872};
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(std::fabs(r.schedule.segments[i].params.l - l[i]) <= 1e-5);
    }
    CHECK(fs::exists(dir / "schedule.json"));
    CHECK(fs::exists(dir / "funnel.csv"));
    CHECK_FALSE(fs::exists(dir / "funnel_segment_0.csv"));
    const auto j = nlohmann::json::parse(read_text_file((dir / "schedule.json").string()));
    CHECK(j["segments"].size() == 3);
    CHECK(j["fragment"] == "sequential_conjunction");

    auto bad = cfg;
    bad.spec.conjuncts[0].gamma_inf = 0.05;
    CHECK_THROWS_AS(cmd_funnel(bad), ConfigError);
    fs::remove_all(dir);
}

TEST_CASE("funnel command writes one file per overlapping segment")
{
    const auto dir = scratch("overlap");
    const auto cfg = load_run_config(config_path("diffdrive_overlap.json"),
                                     std::vector<std::string>{"output_dir=\"" + dir.string() + "\""});
    const auto r = cmd_funnel(cfg);
    CHECK(r.schedule.fragment == FragmentClass::OverlappingConjunction);
    for (int i = 0; i < 3; ++i) {
        CHECK(fs::exists(dir / ("funnel_segment_" + std::to_string(i) + ".csv")));
    }
    fs::remove_all(dir);
}

TEST_CASE("train, resume, evaluate and monitor")
{
    const auto dir = scratch("pipeline");
    const std::string out = "output_dir=\"" + dir.string() + "\"";
    auto cfg = parse_run_config(kSmall, std::vector<std::string>{out});
    const auto first = cmd_train(cfg);
    CHECK(first.steps == 400);
    CHECK(first.log.rows.back().step == 400);
    const std::string log_a = read_text_file((dir / "train_log.csv").string());

    // repeating with the same seed reproduces the log byte for byte
    const auto again_dir = scratch("pipeline_again");
    cmd_train(parse_run_config(kSmall, std::vector<std::string>{"output_dir=\"" + again_dir.string() + "\""}));
    CHECK(read_text_file((again_dir / "train_log.csv").string()) == log_a);
    CHECK(read_text_file((again_dir / "checkpoint.json").string()) == read_text_file((dir / "checkpoint.json").string()));
    fs::remove_all(again_dir);

    // resume continues the step count
    const auto resume_dir = scratch("pipeline_resume");
    const auto resumed = cmd_train(parse_run_config(
        kSmall, std::vector<std::string>{"output_dir=\"" + resume_dir.string() + "\"", "train.total_steps=600",
                                         "checkpoint=\"" + (dir / "checkpoint.json").string() + "\""}));
    CHECK(resumed.steps == 600);
    REQUIRE_FALSE(resumed.log.rows.empty());
    // the loaded network is evaluated again at step 400 before training continues
    CHECK(resumed.log.rows.front().step == 400);
    CHECK(resumed.log.rows.back().step == 600);
    fs::remove_all(resume_dir);

    const auto ev = cmd_eval(cfg);
    CHECK(ev.evaluation.summary.episodes == 3);
    CHECK(fs::exists(dir / "summary.json"));
    CHECK(fs::exists(dir / "trajectory_2.csv"));
    const auto meta = nlohmann::json::parse(read_text_file((dir / "trajectory_0.json").string()));
    CHECK(meta["seed"] == 77);
    CHECK(meta["variables"] == nlohmann::json::array({"x"}));
    const auto summary = nlohmann::json::parse(read_text_file((dir / "summary.json").string()));
    CHECK(summary["per_episode"].size() == 3);
    CHECK_THROWS_AS(cmd_eval(cfg, 0), ConfigError);

    // re-monitoring an exported trajectory gives the same verdict
    for (int i = 0; i < 3; ++i) {
        auto mon = cfg;
        mon.trajectory = (dir / ("trajectory_" + std::to_string(i) + ".csv")).string();
        const auto v = cmd_monitor(mon);
        const auto& e = ev.evaluation.episodes[static_cast<std::size_t>(i)];
        CHECK(v.verdict.satisfied == e.satisfied);
        CHECK(v.verdict.robustness == e.robustness);
        CHECK(v.steps == 31);
    }

    // an external file with only t and the state column
    std::string text = "t,x\n";
    for (int t = 0; t <= 30; ++t) {
        text += std::to_string(t) + "," + (t < 5 ? "0" : "5") + "\n";
    }
    write_text_file((dir / "external.csv").string(), text);
    auto mon = cfg;
    mon.trajectory = (dir / "external.csv").string();
    const auto v = cmd_monitor(mon);
    CHECK(v.verdict.satisfied);
    CHECK(v.verdict.robustness == 1.0);

    // too short for the formula
    write_text_file((dir / "short.csv").string(), "t,x\n0,5\n1,5\n");
    mon.trajectory = (dir / "short.csv").string();
    CHECK_THROWS_AS(cmd_monitor(mon), DomainError);

    auto wrong = cfg;
    wrong.checkpoint = (dir / "missing.json").string();
    CHECK_THROWS_AS(cmd_eval(wrong), IoError);
    fs::remove_all(dir);
}

TEST_CASE("exit codes of the command-line tool")
{
    const auto dir = scratch("exit");
    const auto cfg_path = (dir / "small.json").string();
    write_text_file(cfg_path, kSmall);
    const std::string common = "--config " + cfg_path + " --out " + (dir / "out").string();
    CHECK(run_cli("funnel " + common) == 0);
    CHECK(run_cli("funnel " + common + " --set train.batch_size=0") == 2);
    CHECK(run_cli("funnel " + common + " --set 'spec.formula=\"F[0,5](q<=1)\"'") == 2);
    CHECK(run_cli("eval " + common + " --checkpoint " + (dir / "nope.json").string()) != 0);
    CHECK(run_cli("eval " + common) == 4);
    CHECK(run_cli("train " + common + " --seed 9 --set train.total_steps=50") == 0);
    CHECK(fs::exists(dir / "out" / "policy.json"));
    CHECK(run_cli("eval " + common + " --seed 9 --episodes 2") == 0);
    CHECK(run_cli("monitor " + common + " --trajectory " + (dir / "out" / "trajectory_0.csv").string()) == 0);
    CHECK(fs::exists(dir / "out" / "verdict.json"));
    CHECK(run_cli("bogus") != 0);
    fs::remove_all(dir);
}
