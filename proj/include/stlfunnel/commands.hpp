#pragma once

#include "stlfunnel/evalmon.hpp"
#include "stlfunnel/run_config.hpp"

#include <optional>
#include <string>
#include <vector>

namespace stlfunnel {

/// Output files are written below cfg.output_dir, which is created when missing.

struct FunnelResult {
    FunnelSchedule schedule;
    std::vector<std::string> files;
};

/// schedule.json and funnel.csv; overlapping conjunctions also get funnel_segment_<i>.csv.
FunnelResult cmd_funnel(const RunConfig& cfg);

/// JSON description of a schedule (segments, funnel parameters, windows).
std::string schedule_json(const FunnelSchedule& schedule);

struct TrainResult {
    TrainLog log;
    std::int64_t steps = 0;
    std::optional<EvalSummary> best_eval;
    std::vector<std::string> files;
};

/// Trains per cfg.train; writes checkpoint.json (resumable state), policy.json (the
/// selected parameters) and train_log.csv. When cfg.checkpoint is set, training
/// resumes from it and continues the step count.
TrainResult cmd_train(const RunConfig& cfg);

struct EvalResult {
    PolicyEvaluation evaluation;
    std::vector<std::string> files;
};

/// Greedy evaluation of cfg.checkpoint (default <output_dir>/policy.json) under the
/// configured formula: summary.json, funnel.csv, and per episode a trajectory CSV
/// with a metadata sidecar.
EvalResult cmd_eval(const RunConfig& cfg, std::optional<int> episodes = std::nullopt);

struct MonitorResult {
    SatisfactionResult verdict;
    std::size_t steps = 0;
    std::vector<std::string> files;
};

/// Offline check of the trajectory CSV at cfg.trajectory; writes verdict.json.
/// State columns are matched to the environment variables by name.
MonitorResult cmd_monitor(const RunConfig& cfg);

} // namespace stlfunnel
