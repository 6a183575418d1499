#include "stlfunnel/commands.hpp"
#include "stlfunnel/error.hpp"
#include "stlfunnel/log.hpp"

#include "CLI11.hpp"

#include <cstdio>
#include <optional>
#include <string>
#include <vector>

namespace {

struct CommonOptions {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out;
    std::vector<std::string> set;
};

void add_common(CLI::App* cmd, CommonOptions& o)
{
    cmd->add_option("--config", o.config, "Run configuration (JSON)")->required()->check(CLI::ExistingFile);
    cmd->add_option("--seed", o.seed, "Seed for training and evaluation");
    cmd->add_option("--out", o.out, "Output directory");
    cmd->add_option("--set", o.set, "Override a configuration entry, e.g. train.total_steps=5000");
}

std::string json_string(const std::string& s)
{
    std::string out = "\"";
    for (const char c : s) {
        if (c == '"' || c == '\\') {
            out += '\\';
        }
        out += c;
    }
    return out + "\"";
}

stlfunnel::RunConfig load(const CommonOptions& o, std::vector<std::string> extra = {})
{
    std::vector<std::string> overrides = o.set;
    if (o.seed) {
        overrides.push_back("train.seed=" + std::to_string(*o.seed));
        overrides.push_back("eval.seed=" + std::to_string(*o.seed + 1000));
    }
    if (!o.out.empty()) {
        overrides.push_back("output_dir=" + json_string(o.out));
    }
    overrides.insert(overrides.end(), extra.begin(), extra.end());
    return stlfunnel::load_run_config(o.config, overrides);
}

void print_files(const std::vector<std::string>& files)
{
    for (const auto& f : files) {
        std::printf("wrote %s\n", f.c_str());
    }
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Funnel-shaped rewards for signal temporal logic tasks"};
    app.require_subcommand(1);

    CommonOptions funnel_opts;
    auto* funnel = app.add_subcommand("funnel", "Synthesize the funnel schedule of the configured formula");
    add_common(funnel, funnel_opts);

    CommonOptions train_opts;
    std::string resume;
    auto* train = app.add_subcommand("train", "Train a time-aware Q-network");
    add_common(train, train_opts);
    train->add_option("--resume", resume, "Checkpoint to continue from")->check(CLI::ExistingFile);

    CommonOptions eval_opts;
    std::string eval_ck;
    std::optional<int> episodes;
    auto* eval = app.add_subcommand("eval", "Greedy evaluation of a trained policy");
    add_common(eval, eval_opts);
    eval->add_option("--checkpoint", eval_ck, "Policy checkpoint (default <out>/policy.json)");
    eval->add_option("--episodes", episodes, "Number of evaluation episodes");

    CommonOptions monitor_opts;
    std::string trajectory;
    auto* monitor = app.add_subcommand("monitor", "Check a trajectory CSV against the configured formula");
    add_common(monitor, monitor_opts);
    monitor->add_option("--trajectory", trajectory, "Trajectory CSV");

    CLI11_PARSE(app, argc, argv);

    using namespace stlfunnel;
    try {
        if (funnel->parsed()) {
            const auto r = cmd_funnel(load(funnel_opts));
            for (const auto& s : r.schedule.segments) {
                std::printf("segment %zu: steps [%d, %d], l = %.6g, t* = %d, rho_max = %.6g\n", s.psi_index,
                            s.t_first, s.t_end, s.params.l, s.params.t_star, s.params.rho_max);
            }
            print_files(r.files);
        } else if (train->parsed()) {
            std::vector<std::string> extra;
            if (!resume.empty()) {
                extra.push_back("checkpoint=" + json_string(resume));
            }
            const auto r = cmd_train(load(train_opts, extra));
            std::printf("trained %lld steps\n", static_cast<long long>(r.steps));
            if (r.best_eval) {
                std::printf("best evaluation: satisfaction %.3f, min robustness %.6g\n",
                            r.best_eval->satisfaction_rate, r.best_eval->min_robustness);
            }
            print_files(r.files);
        } else if (eval->parsed()) {
            std::vector<std::string> extra;
            if (!eval_ck.empty()) {
                extra.push_back("checkpoint=" + json_string(eval_ck));
            }
            const auto r = cmd_eval(load(eval_opts, extra), episodes);
            const auto& s = r.evaluation.summary;
            std::printf("episodes %d, satisfaction rate %.3f, min robustness %.6g, mean robustness %.6g\n",
                        s.episodes, s.satisfaction_rate, s.min_robustness, s.mean_robustness);
            print_files(r.files);
        } else if (monitor->parsed()) {
            std::vector<std::string> extra;
            if (!trajectory.empty()) {
                extra.push_back("trajectory=" + json_string(trajectory));
            }
            const auto r = cmd_monitor(load(monitor_opts, extra));
            std::printf("%s (robustness %.17g over %zu steps)\n", r.verdict.satisfied ? "satisfied" : "violated",
                        r.verdict.robustness, r.steps);
            print_files(r.files);
        }
    } catch (const ConfigError& e) {
        log_message(LogLevel::Error, std::string("configuration: ") + e.what());
        return 2;
    } catch (const ParseError& e) {
        log_message(LogLevel::Error, std::string("formula: ") + e.what());
        return 2;
    } catch (const FragmentError& e) {
        log_message(LogLevel::Error, e.what());
        return 2;
    } catch (const DomainError& e) {
        log_message(LogLevel::Error, e.what());
        return 2;
    } catch (const DivergenceError& e) {
        log_message(LogLevel::Error, std::string("divergence: ") + e.what());
        return 3;
    } catch (const IoError& e) {
        log_message(LogLevel::Error, std::string("i/o: ") + e.what());
        return 4;
    } catch (const std::exception& e) {
        log_message(LogLevel::Error, e.what());
        return 1;
    }
    return 0;
}
