#pragma once

#include "stlfunnel/env.hpp"
#include "stlfunnel/mlp.hpp"

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace stlfunnel {

struct Transition {
    StateVector s;
    std::size_t a = 0;
    double r = 0.0;
    StateVector s_next;
    int t = 0;
    bool terminal = false;
};

/// Throws DomainError unless 0 <= t < horizon and terminal == (t + 1 == horizon).
void validate_transition(const Transition& tr, int horizon);

/// Fixed-capacity ring buffer; the oldest transition is overwritten first.
class ReplayBuffer {
public:
    explicit ReplayBuffer(std::size_t capacity);

    void push(Transition tr);
    std::size_t size() const { return data_.size(); }
    std::size_t capacity() const { return capacity_; }
    bool empty() const { return data_.empty(); }
    void clear();

    /// Storage slot i in [0, size()).
    const Transition& at(std::size_t i) const;
    /// Transition in insertion order, 0 being the oldest still stored.
    const Transition& oldest(std::size_t i) const;

    /// `count` slot indices drawn uniformly with replacement.
    std::vector<std::size_t> sample_indices(std::size_t count, Rng& rng) const;
    std::vector<Transition> sample(std::size_t count, Rng& rng) const;

private:
    std::size_t capacity_;
    std::size_t next_ = 0;
    std::vector<Transition> data_;
};

/// Time-aware action-value function Q(s, ., t).
class QFunction {
public:
    virtual ~QFunction() = default;
    virtual std::size_t action_count() const = 0;
    virtual std::vector<double> q_values(std::span<const double> s, int t) const = 0;
    /// One column per (state, step) pair.
    virtual Eigen::MatrixXd q_batch(std::span<const StateVector> s, std::span<const int> t) const;
};

/// Multilayer perceptron over (normalized state, t / horizon).
class QNetwork final : public QFunction {
public:
    QNetwork() = default;
    /// Zero-initialized when seed is empty, He-uniform otherwise.
    QNetwork(std::size_t state_dim, std::size_t action_count, int horizon, const std::vector<int>& hidden,
             std::optional<std::uint64_t> seed = std::nullopt);

    std::size_t state_dim() const { return state_dim_; }
    std::size_t action_count() const override { return static_cast<std::size_t>(mlp_.output_size()); }
    int horizon() const { return horizon_; }

    /// Each state component is mapped to (s_i - offset_i) * scale_i before entering the network.
    void set_input_transform(std::vector<double> offset, std::vector<double> scale);
    /// Transform sending each range onto [-1, 1].
    void normalize_to(std::span<const Range> box);
    const std::vector<double>& input_offset() const { return offset_; }
    const std::vector<double>& input_scale() const { return scale_; }

    Mlp& mlp() { return mlp_; }
    const Mlp& mlp() const { return mlp_; }

    /// Network input column for (s, t). Throws DomainError on a dimension mismatch or t outside [0, horizon].
    Eigen::VectorXd encode(std::span<const double> s, int t) const;
    Eigen::MatrixXd encode_batch(std::span<const StateVector> s, std::span<const int> t) const;

    std::vector<double> q_values(std::span<const double> s, int t) const override;
    Eigen::MatrixXd q_batch(std::span<const StateVector> s, std::span<const int> t) const override;

private:
    std::size_t state_dim_ = 0;
    int horizon_ = 1;
    std::vector<double> offset_;
    std::vector<double> scale_;
    Mlp mlp_;
};

/// Q-vector for (s, t); the time feature is t / horizon.
std::vector<double> q_forward(const QNetwork& net, std::span<const double> s, int t);

/// Lowest index among the maximal entries. Throws DomainError on an empty vector.
std::size_t greedy_action(std::span<const double> q);

/// Uniform action with probability epsilon, greedy otherwise, so the greedy action has
/// total probability 1 - epsilon + epsilon / |A|.
std::size_t epsilon_greedy(std::span<const double> q, double epsilon, Rng& rng);

/// Linear decay from `start` to `end` over `decay_steps`, constant afterwards.
struct EpsilonSchedule {
    double start = 1.0;
    double end = 0.05;
    std::int64_t decay_steps = 0;

    double at(std::int64_t step) const;
};

/// y_i = r_i + gamma * max_a Q_target(s'_i, a, t_i + 1), or r_i on terminal records.
std::vector<double> td_target(std::span<const Transition> batch, const QFunction& target, double gamma, int horizon);

/// One optimizer update on (1/M) sum_i (y_i - Q(s_i, a_i, t_i))^2. Returns the loss before the update.
/// Throws DivergenceError, naming a digest of the batch, when the loss is not finite.
double grad_step(QNetwork& net, std::span<const Transition> batch, std::span<const double> targets, Optimizer& opt);

/// Loss gradient of grad_step without applying it; exposed for gradient checks.
LayerStack td_loss_gradient(const QNetwork& net, std::span<const Transition> batch, std::span<const double> targets,
                            double* loss = nullptr);
double td_loss(const QNetwork& net, std::span<const Transition> batch, std::span<const double> targets);

/// Online/target pair plus the update rule used by the trainer.
class QLearner {
public:
    virtual ~QLearner() = default;
    virtual const QFunction& online() const = 0;
    virtual const QFunction& target() const = 0;
    virtual void sync_target() = 0;
    /// Regresses online Q(s_i, a_i, t_i) towards targets; returns the loss before the update.
    virtual double fit(std::span<const Transition> batch, std::span<const double> targets) = 0;
};

class NetworkLearner final : public QLearner {
public:
    NetworkLearner(QNetwork net, OptimizerConfig opt);

    const QFunction& online() const override { return online_; }
    const QFunction& target() const override { return target_; }
    void sync_target() override { target_ = online_; }
    double fit(std::span<const Transition> batch, std::span<const double> targets) override;

    QNetwork& network() { return online_; }
    const QNetwork& network() const { return online_; }
    QNetwork& target_network() { return target_; }
    const QNetwork& target_network() const { return target_; }
    Optimizer& optimizer() { return opt_; }
    const Optimizer& optimizer() const { return opt_; }

private:
    QNetwork online_;
    QNetwork target_;
    Optimizer opt_;
};

/// Lookup table over (integer state index s[0], t, action); for exact checks on tiny MDPs.
class TableQ final : public QFunction {
public:
    TableQ(std::size_t states, std::size_t actions, int horizon);

    std::size_t action_count() const override { return actions_; }
    std::vector<double> q_values(std::span<const double> s, int t) const override;

    double& at(std::size_t s, int t, std::size_t a);
    double at(std::size_t s, int t, std::size_t a) const;

private:
    std::size_t index(std::span<const double> s, int t) const;

    std::size_t states_;
    std::size_t actions_;
    int horizon_;
    std::vector<double> table_;
};

/// Tabular learner: Q <- Q + rate * (y - Q) for each sample in order.
class TableLearner final : public QLearner {
public:
    TableLearner(TableQ table, double rate);

    const QFunction& online() const override { return online_; }
    const QFunction& target() const override { return target_; }
    void sync_target() override { target_ = online_; }
    double fit(std::span<const Transition> batch, std::span<const double> targets) override;

    const TableQ& table() const { return online_; }

private:
    TableQ online_;
    TableQ target_;
    double rate_;
};

struct TrainConfig {
    std::int64_t total_steps = 100000;
    double gamma = 0.99;
    OptimizerConfig optimizer;
    int batch_size = 64;
    std::size_t replay_capacity = 100000;
    std::int64_t target_update = 1000;
    std::int64_t eval_every = 10000; // 0 disables periodic evaluation
    int eval_episodes = 20;
    std::int64_t log_every = 1000;
    EpsilonSchedule epsilon{1.0, 0.05, 50000};
    std::vector<int> hidden{128, 128};
    bool normalize_inputs = true;
    /// Return the parameters with the best periodic evaluation instead of the last ones.
    bool keep_best = false;
    std::uint64_t seed = 0;
};

/// Throws ConfigError naming the offending key (relative to the training section).
void validate_train_config(const TrainConfig& cfg);

/// Reward r(s_t, a_t, t) collected after taking a_t in s_t.
using RewardFn = std::function<double(std::span<const double> s, std::size_t a, int t)>;

struct EvalSummary {
    int episodes = 0;
    double satisfaction_rate = 0.0;
    double min_robustness = 0.0;
    double mean_robustness = 0.0;
};

/// Greedy evaluation of the current online function.
using EvalFn = std::function<EvalSummary(const QFunction& q)>;

struct TrainLogRow {
    std::int64_t step = 0;
    std::int64_t episode = 0;
    double epsilon = 0.0;
    double loss = 0.0;               // mean loss since the previous row, NaN when no update ran
    double eval_satisfaction_rate = 0.0; // NaN when no evaluation ran at this step
    double eval_min_robustness = 0.0;
};

struct TrainLog {
    std::vector<TrainLogRow> rows;

    /// Columns: step, episode, epsilon, loss, eval_satisfaction_rate, eval_min_robustness.
    std::string to_csv() const;
};

/// Resumable trainer state besides the parameters.
struct TrainProgress {
    std::int64_t step = 0;
    std::int64_t episode = 0;
    std::string rng_state; // textual mt19937_64 state, empty for a fresh seed
};

/// Time-aware deep Q-learning: epsilon-greedy on Q(s, ., t), replay, one minibatch update
/// per environment step once the buffer holds a minibatch, periodic target sync and
/// greedy evaluation, episode reset at the horizon.
class Trainer {
public:
    /// Builds a NetworkLearner from `cfg` (He-uniform init from the seed, optional input normalization).
    Trainer(const Environment& env, RewardFn reward, TrainConfig cfg, EvalFn eval = {});
    /// Runs the same loop with a caller-supplied learner.
    Trainer(const Environment& env, RewardFn reward, TrainConfig cfg, std::unique_ptr<QLearner> learner,
            EvalFn eval = {});

    /// Trains until cfg.total_steps steps have been taken overall.
    void run();

    const TrainConfig& config() const { return cfg_; }
    const TrainLog& log() const { return log_; }
    TrainProgress progress() const;
    /// Continue from a previous run; the replay buffer starts empty.
    void restore_progress(const TrainProgress& p);

    QLearner& learner() { return *learner_; }
    /// Non-null when the learner is a NetworkLearner.
    NetworkLearner* network_learner() { return net_learner_; }
    const NetworkLearner* network_learner() const { return net_learner_; }

    /// Parameters selected by keep_best, or the final ones.
    const QNetwork& result_network() const;
    std::optional<EvalSummary> best_eval() const { return best_eval_; }

private:
    void evaluate_and_log(std::int64_t step, double eps, double loss);

    const Environment& env_;
    RewardFn reward_;
    TrainConfig cfg_;
    EvalFn eval_;
    std::unique_ptr<QLearner> learner_;
    NetworkLearner* net_learner_ = nullptr;
    ReplayBuffer buffer_;
    Rng rng_;
    TrainProgress progress_;
    TrainLog log_;
    std::optional<EvalSummary> best_eval_;
    std::optional<QNetwork> best_net_;
};

struct Checkpoint {
    static constexpr int kVersion = 1;

    std::string config_digest;
    TrainProgress progress;
    QNetwork online;
    QNetwork target;
    OptimizerConfig optimizer;
    std::int64_t optimizer_steps = 0;
    LayerStack first_moment;
    LayerStack second_moment;
};

Checkpoint make_checkpoint(const Trainer& trainer, std::string config_digest);
/// Loads parameters and optimizer state into the trainer; throws DomainError on shape mismatch.
void apply_checkpoint(Trainer& trainer, const Checkpoint& ck);

/// Versioned JSON; doubles are written in shortest round-trip form.
void save_checkpoint(const Checkpoint& ck, const std::string& path);
/// Throws IoError for an unreadable, corrupt or wrong-version file.
Checkpoint load_checkpoint(const std::string& path);

/// Rejects a checkpoint whose action count differs (DomainError); returns false when the
/// config digest differs, which callers report as a warning.
bool check_checkpoint(const Checkpoint& ck, std::size_t action_count, const std::string& config_digest);

} // namespace stlfunnel
