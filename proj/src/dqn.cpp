#include "stlfunnel/dqn.hpp"

#include "stlfunnel/error.hpp"
#include "stlfunnel/log.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <limits>
#include <sstream>

namespace stlfunnel {

void validate_transition(const Transition& tr, int horizon)
{
    if (tr.t < 0 || tr.t >= horizon) {
        throw DomainError("transition step " + std::to_string(tr.t) + " outside [0, " + std::to_string(horizon) + ")");
    }
    if (tr.terminal != (tr.t + 1 == horizon)) {
        throw DomainError("transition at step " + std::to_string(tr.t) + " has an inconsistent terminal flag");
    }
}

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity)
{
    if (capacity_ == 0) {
        throw DomainError("replay capacity must be positive");
    }
    data_.reserve(std::min<std::size_t>(capacity_, 1 << 16));
}

void ReplayBuffer::push(Transition tr)
{
    if (data_.size() < capacity_) {
        data_.push_back(std::move(tr));
    } else {
        data_[next_] = std::move(tr);
    }
    next_ = (next_ + 1) % capacity_;
}

void ReplayBuffer::clear()
{
    data_.clear();
    next_ = 0;
}

const Transition& ReplayBuffer::at(std::size_t i) const
{
    if (i >= data_.size()) {
        throw DomainError("replay index out of range");
    }
    return data_[i];
}

const Transition& ReplayBuffer::oldest(std::size_t i) const
{
    if (i >= data_.size()) {
        throw DomainError("replay index out of range");
    }
    const std::size_t start = data_.size() < capacity_ ? 0 : next_;
    return data_[(start + i) % data_.size()];
}

std::vector<std::size_t> ReplayBuffer::sample_indices(std::size_t count, Rng& rng) const
{
    if (data_.empty()) {
        throw DomainError("cannot sample from an empty replay buffer");
    }
    std::uniform_int_distribution<std::size_t> pick(0, data_.size() - 1);
    std::vector<std::size_t> out(count);
    for (auto& i : out) {
        i = pick(rng);
    }
    return out;
}

std::vector<Transition> ReplayBuffer::sample(std::size_t count, Rng& rng) const
{
    std::vector<Transition> out;
    out.reserve(count);
    for (const std::size_t i : sample_indices(count, rng)) {
        out.push_back(data_[i]);
    }
    return out;
}

Eigen::MatrixXd QFunction::q_batch(std::span<const StateVector> s, std::span<const int> t) const
{
    if (s.size() != t.size()) {
        throw DomainError("state and step batches differ in length");
    }
    Eigen::MatrixXd out(static_cast<Eigen::Index>(action_count()), static_cast<Eigen::Index>(s.size()));
    for (std::size_t j = 0; j < s.size(); ++j) {
        const auto q = q_values(s[j], t[j]);
        out.col(static_cast<Eigen::Index>(j)) = Eigen::Map<const Eigen::VectorXd>(q.data(), static_cast<Eigen::Index>(q.size()));
    }
    return out;
}

namespace {

std::vector<int> layer_sizes(std::size_t state_dim, std::size_t action_count, const std::vector<int>& hidden)
{
    std::vector<int> sizes;
    sizes.push_back(static_cast<int>(state_dim) + 1);
    sizes.insert(sizes.end(), hidden.begin(), hidden.end());
    sizes.push_back(static_cast<int>(action_count));
    return sizes;
}

} // namespace

QNetwork::QNetwork(std::size_t state_dim, std::size_t action_count, int horizon, const std::vector<int>& hidden,
                   std::optional<std::uint64_t> seed)
    : state_dim_(state_dim), horizon_(horizon), offset_(state_dim, 0.0), scale_(state_dim, 1.0)
{
    if (horizon < 1) {
        throw DomainError("network horizon must be at least 1");
    }
    if (action_count == 0) {
        throw DomainError("network needs at least one action");
    }
    const auto sizes = layer_sizes(state_dim, action_count, hidden);
    mlp_ = seed ? Mlp::he_uniform(sizes, *seed) : Mlp(sizes);
}

void QNetwork::set_input_transform(std::vector<double> offset, std::vector<double> scale)
{
    if (offset.size() != state_dim_ || scale.size() != state_dim_) {
        throw DomainError("input transform has the wrong dimension");
    }
    for (std::size_t i = 0; i < state_dim_; ++i) {
        if (!std::isfinite(offset[i]) || !std::isfinite(scale[i]) || scale[i] == 0.0) {
            throw DomainError("input transform must be finite with nonzero scale");
        }
    }
    offset_ = std::move(offset);
    scale_ = std::move(scale);
}

void QNetwork::normalize_to(std::span<const Range> box)
{
    if (box.size() != state_dim_) {
        throw DomainError("normalization box has the wrong dimension");
    }
    std::vector<double> offset(state_dim_);
    std::vector<double> scale(state_dim_);
    for (std::size_t i = 0; i < state_dim_; ++i) {
        const double w = box[i].hi - box[i].lo;
        if (!(w > 0.0)) {
            throw DomainError("normalization range must have positive width");
        }
        offset[i] = 0.5 * (box[i].lo + box[i].hi);
        scale[i] = 2.0 / w;
    }
    set_input_transform(std::move(offset), std::move(scale));
}

Eigen::VectorXd QNetwork::encode(std::span<const double> s, int t) const
{
    if (s.size() != state_dim_) {
        throw DomainError("Q-network expects a state of dimension " + std::to_string(state_dim_) + ", got " +
                          std::to_string(s.size()));
    }
    if (t < 0 || t > horizon_) {
        throw DomainError("step " + std::to_string(t) + " outside [0, " + std::to_string(horizon_) + "]");
    }
    Eigen::VectorXd x(static_cast<Eigen::Index>(state_dim_ + 1));
    for (std::size_t i = 0; i < state_dim_; ++i) {
        x(static_cast<Eigen::Index>(i)) = (s[i] - offset_[i]) * scale_[i];
    }
    x(static_cast<Eigen::Index>(state_dim_)) = static_cast<double>(t) / static_cast<double>(horizon_);
    return x;
}

Eigen::MatrixXd QNetwork::encode_batch(std::span<const StateVector> s, std::span<const int> t) const
{
    if (s.size() != t.size()) {
        throw DomainError("state and step batches differ in length");
    }
    Eigen::MatrixXd x(static_cast<Eigen::Index>(state_dim_ + 1), static_cast<Eigen::Index>(s.size()));
    for (std::size_t j = 0; j < s.size(); ++j) {
        x.col(static_cast<Eigen::Index>(j)) = encode(s[j], t[j]);
    }
    return x;
}

std::vector<double> QNetwork::q_values(std::span<const double> s, int t) const
{
    const Eigen::MatrixXd q = mlp_.forward(encode(s, t));
    return {q.data(), q.data() + q.size()};
}

Eigen::MatrixXd QNetwork::q_batch(std::span<const StateVector> s, std::span<const int> t) const
{
    return mlp_.forward(encode_batch(s, t));
}

std::vector<double> q_forward(const QNetwork& net, std::span<const double> s, int t) { return net.q_values(s, t); }

std::size_t greedy_action(std::span<const double> q)
{
    if (q.empty()) {
        throw DomainError("empty Q-vector");
    }
    std::size_t best = 0;
    for (std::size_t i = 1; i < q.size(); ++i) {
        if (q[i] > q[best]) {
            best = i;
        }
    }
    return best;
}

std::size_t epsilon_greedy(std::span<const double> q, double epsilon, Rng& rng)
{
    if (q.empty()) {
        throw DomainError("empty Q-vector");
    }
    if (!(epsilon >= 0.0 && epsilon <= 1.0)) {
        throw DomainError("epsilon must lie in [0, 1]");
    }
    std::uniform_real_distribution<double> coin(0.0, 1.0);
    if (epsilon > 0.0 && coin(rng) < epsilon) {
        std::uniform_int_distribution<std::size_t> pick(0, q.size() - 1);
        return pick(rng);
    }
    return greedy_action(q);
}

double EpsilonSchedule::at(std::int64_t step) const
{
    if (step >= decay_steps) {
        return end;
    }
    if (step <= 0) {
        return start;
    }
    const double frac = static_cast<double>(step) / static_cast<double>(decay_steps);
    return start + (end - start) * frac;
}

std::vector<double> td_target(std::span<const Transition> batch, const QFunction& target, double gamma, int horizon)
{
    if (batch.empty()) {
        throw DomainError("empty minibatch");
    }
    std::vector<StateVector> next;
    std::vector<int> steps;
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < batch.size(); ++i) {
        const auto& tr = batch[i];
        validate_transition(tr, horizon);
        if (tr.terminal) {
            continue;
        }
        next.push_back(tr.s_next);
        steps.push_back(tr.t + 1);
        rows.push_back(i);
    }
    std::vector<double> y(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) {
        y[i] = batch[i].r;
    }
    if (!rows.empty()) {
        const Eigen::MatrixXd q = target.q_batch(next, steps);
        for (std::size_t j = 0; j < rows.size(); ++j) {
            y[rows[j]] += gamma * q.col(static_cast<Eigen::Index>(j)).maxCoeff();
        }
    }
    return y;
}

namespace {

std::string batch_digest(std::span<const Transition> batch)
{
    std::string bytes;
    auto put = [&](const void* p, std::size_t n) { bytes.append(static_cast<const char*>(p), n); };
    for (const auto& tr : batch) {
        put(tr.s.data(), tr.s.size() * sizeof(double));
        put(&tr.a, sizeof tr.a);
        put(&tr.r, sizeof tr.r);
        put(tr.s_next.data(), tr.s_next.size() * sizeof(double));
        put(&tr.t, sizeof tr.t);
    }
    return fnv1a_hex(bytes);
}

void check_batch(const QNetwork& net, std::span<const Transition> batch, std::span<const double> targets)
{
    if (batch.empty()) {
        throw DomainError("empty minibatch");
    }
    if (batch.size() != targets.size()) {
        throw DomainError("minibatch and targets differ in length");
    }
    for (const auto& tr : batch) {
        if (tr.a >= net.action_count()) {
            throw DomainError("action index " + std::to_string(tr.a) + " out of range");
        }
    }
}

Eigen::MatrixXd encode_states(const QNetwork& net, std::span<const Transition> batch)
{
    Eigen::MatrixXd x(static_cast<Eigen::Index>(net.state_dim() + 1), static_cast<Eigen::Index>(batch.size()));
    for (std::size_t j = 0; j < batch.size(); ++j) {
        x.col(static_cast<Eigen::Index>(j)) = net.encode(batch[j].s, batch[j].t);
    }
    return x;
}

} // namespace

LayerStack td_loss_gradient(const QNetwork& net, std::span<const Transition> batch, std::span<const double> targets,
                            double* loss)
{
    check_batch(net, batch, targets);
    Mlp::Tape tape;
    const Eigen::MatrixXd q = net.mlp().forward(encode_states(net, batch), tape);
    const double m = static_cast<double>(batch.size());
    Eigen::MatrixXd dq = Eigen::MatrixXd::Zero(q.rows(), q.cols());
    double total = 0.0;
    for (std::size_t j = 0; j < batch.size(); ++j) {
        const auto a = static_cast<Eigen::Index>(batch[j].a);
        const auto c = static_cast<Eigen::Index>(j);
        const double err = q(a, c) - targets[j];
        total += err * err;
        dq(a, c) = 2.0 * err / m;
    }
    if (loss != nullptr) {
        *loss = total / m;
    }
    return net.mlp().backward(tape, dq);
}

double td_loss(const QNetwork& net, std::span<const Transition> batch, std::span<const double> targets)
{
    check_batch(net, batch, targets);
    const Eigen::MatrixXd q = net.mlp().forward(encode_states(net, batch));
    double total = 0.0;
    for (std::size_t j = 0; j < batch.size(); ++j) {
        const double err = q(static_cast<Eigen::Index>(batch[j].a), static_cast<Eigen::Index>(j)) - targets[j];
        total += err * err;
    }
    return total / static_cast<double>(batch.size());
}

double grad_step(QNetwork& net, std::span<const Transition> batch, std::span<const double> targets, Optimizer& opt)
{
    double loss = 0.0;
    const LayerStack grads = td_loss_gradient(net, batch, targets, &loss);
    if (!std::isfinite(loss)) {
        throw DivergenceError("non-finite TD loss on minibatch " + batch_digest(batch));
    }
    opt.apply(net.mlp(), grads);
    return loss;
}

NetworkLearner::NetworkLearner(QNetwork net, OptimizerConfig opt)
    : online_(std::move(net)), target_(online_), opt_(opt, online_.mlp())
{
}

double NetworkLearner::fit(std::span<const Transition> batch, std::span<const double> targets)
{
    return grad_step(online_, batch, targets, opt_);
}

TableQ::TableQ(std::size_t states, std::size_t actions, int horizon)
    : states_(states), actions_(actions), horizon_(horizon),
      table_(states * actions * static_cast<std::size_t>(horizon + 1), 0.0)
{
    if (states == 0 || actions == 0 || horizon < 1) {
        throw DomainError("table needs states, actions and a positive horizon");
    }
}

std::size_t TableQ::index(std::span<const double> s, int t) const
{
    if (s.size() != 1 || s[0] < 0.0 || s[0] != std::floor(s[0]) || s[0] >= static_cast<double>(states_)) {
        throw DomainError("table state must be a single integer index");
    }
    if (t < 0 || t > horizon_) {
        throw DomainError("step outside the table horizon");
    }
    return (static_cast<std::size_t>(s[0]) * static_cast<std::size_t>(horizon_ + 1) + static_cast<std::size_t>(t)) *
           actions_;
}

std::vector<double> TableQ::q_values(std::span<const double> s, int t) const
{
    const std::size_t k = index(s, t);
    return {table_.begin() + static_cast<std::ptrdiff_t>(k), table_.begin() + static_cast<std::ptrdiff_t>(k + actions_)};
}

double& TableQ::at(std::size_t s, int t, std::size_t a)
{
    const double sv = static_cast<double>(s);
    return table_.at(index({&sv, 1}, t) + a);
}

double TableQ::at(std::size_t s, int t, std::size_t a) const
{
    const double sv = static_cast<double>(s);
    return table_.at(index({&sv, 1}, t) + a);
}

TableLearner::TableLearner(TableQ table, double rate) : online_(std::move(table)), target_(online_), rate_(rate)
{
    if (!(rate > 0.0 && rate <= 1.0)) {
        throw DomainError("table learning rate must lie in (0, 1]");
    }
}

double TableLearner::fit(std::span<const Transition> batch, std::span<const double> targets)
{
    if (batch.size() != targets.size() || batch.empty()) {
        throw DomainError("minibatch and targets differ in length");
    }
    double total = 0.0;
    for (std::size_t i = 0; i < batch.size(); ++i) {
        double& q = online_.at(static_cast<std::size_t>(batch[i].s.at(0)), batch[i].t, batch[i].a);
        const double err = targets[i] - q;
        total += err * err;
        q += rate_ * err;
    }
    return total / static_cast<double>(batch.size());
}

void validate_train_config(const TrainConfig& cfg)
{
    auto fail = [](const char* key, const std::string& msg) { throw ConfigError(key, msg); };
    if (cfg.total_steps < 0) {
        fail("total_steps", "must be non-negative");
    }
    if (!(cfg.gamma > 0.0 && cfg.gamma < 1.0)) {
        fail("gamma", "discount must lie in (0, 1)");
    }
    if (!(cfg.optimizer.learning_rate > 0.0) || !std::isfinite(cfg.optimizer.learning_rate)) {
        fail("learning_rate", "must be positive");
    }
    if (cfg.batch_size < 1) {
        fail("batch_size", "must be positive");
    }
    if (cfg.replay_capacity < 1) {
        fail("replay_capacity", "must be positive");
    }
    if (cfg.target_update < 1) {
        fail("target_update", "must be positive");
    }
    if (cfg.eval_every < 0) {
        fail("eval_every", "must be non-negative");
    }
    if (cfg.eval_episodes < 1) {
        fail("eval_episodes", "must be positive");
    }
    if (cfg.log_every < 1) {
        fail("log_every", "must be positive");
    }
    const auto& e = cfg.epsilon;
    if (!(e.start >= 0.0 && e.start <= 1.0)) {
        fail("epsilon.start", "must lie in [0, 1]");
    }
    if (!(e.end >= 0.0 && e.end <= 1.0)) {
        fail("epsilon.end", "must lie in [0, 1]");
    }
    if (e.decay_steps < 0) {
        fail("epsilon.decay_steps", "must be non-negative");
    }
    if (cfg.hidden.empty()) {
        fail("hidden", "needs at least one hidden layer");
    }
    for (const int h : cfg.hidden) {
        if (h < 1) {
            fail("hidden", "layer widths must be positive");
        }
    }
}

std::string TrainLog::to_csv() const
{
    std::string out = "step,episode,epsilon,loss,eval_satisfaction_rate,eval_min_robustness\n";
    char buf[256];
    auto num = [&](double v) -> std::string {
        if (std::isnan(v)) {
            return "";
        }
        std::snprintf(buf, sizeof buf, "%.17g", v);
        return buf;
    };
    for (const auto& r : rows) {
        out += std::to_string(r.step) + ',' + std::to_string(r.episode) + ',' + num(r.epsilon) + ',' + num(r.loss) +
               ',' + num(r.eval_satisfaction_rate) + ',' + num(r.eval_min_robustness) + '\n';
    }
    return out;
}

namespace {

std::unique_ptr<QLearner> default_learner(const Environment& env, const TrainConfig& cfg)
{
    validate_train_config(cfg);
    QNetwork net(env.state_dim(), env.actions().size(), env.horizon(), cfg.hidden, cfg.seed);
    if (cfg.normalize_inputs) {
        net.normalize_to(env.state_box());
    }
    return std::make_unique<NetworkLearner>(std::move(net), cfg.optimizer);
}

bool better(const EvalSummary& a, const EvalSummary& b)
{
    if (a.satisfaction_rate != b.satisfaction_rate) {
        return a.satisfaction_rate > b.satisfaction_rate;
    }
    return a.min_robustness > b.min_robustness;
}

} // namespace

Trainer::Trainer(const Environment& env, RewardFn reward, TrainConfig cfg, EvalFn eval)
    : Trainer(env, std::move(reward), cfg, default_learner(env, cfg), std::move(eval))
{
}

Trainer::Trainer(const Environment& env, RewardFn reward, TrainConfig cfg, std::unique_ptr<QLearner> learner,
                 EvalFn eval)
    : env_(env), reward_(std::move(reward)), cfg_(std::move(cfg)), eval_(std::move(eval)),
      learner_(std::move(learner)), buffer_(cfg_.replay_capacity), rng_(cfg_.seed)
{
    validate_train_config(cfg_);
    if (!learner_) {
        throw DomainError("trainer needs a learner");
    }
    if (!reward_) {
        throw DomainError("trainer needs a reward function");
    }
    if (learner_->online().action_count() != env_.actions().size()) {
        throw ConfigError("hidden", "learner action count does not match the environment");
    }
    net_learner_ = dynamic_cast<NetworkLearner*>(learner_.get());
    if (net_learner_ != nullptr && net_learner_->network().horizon() != env_.horizon()) {
        throw ConfigError("horizon", "network horizon does not match the environment");
    }
}

TrainProgress Trainer::progress() const
{
    TrainProgress p = progress_;
    std::ostringstream os;
    os << rng_;
    p.rng_state = os.str();
    return p;
}

void Trainer::restore_progress(const TrainProgress& p)
{
    progress_ = p;
    if (!p.rng_state.empty()) {
        std::istringstream is(p.rng_state);
        is >> rng_;
        if (!is) {
            throw DomainError("corrupt random generator state");
        }
    }
    buffer_.clear();
}

const QNetwork& Trainer::result_network() const
{
    if (best_net_) {
        return *best_net_;
    }
    if (net_learner_ == nullptr) {
        throw DomainError("trainer does not hold a network learner");
    }
    return net_learner_->network();
}

void Trainer::evaluate_and_log(std::int64_t step, double eps, double loss)
{
    TrainLogRow row{step, progress_.episode, eps, loss, std::numeric_limits<double>::quiet_NaN(),
                    std::numeric_limits<double>::quiet_NaN()};
    if (eval_) {
        const EvalSummary s = eval_(learner_->online());
        row.eval_satisfaction_rate = s.satisfaction_rate;
        row.eval_min_robustness = s.min_robustness;
        log_info("step " + std::to_string(step) + ": eval satisfaction " + std::to_string(s.satisfaction_rate) +
                 ", min robustness " + std::to_string(s.min_robustness));
        if (cfg_.keep_best && net_learner_ != nullptr && (!best_eval_ || better(s, *best_eval_))) {
            best_eval_ = s;
            best_net_ = net_learner_->network();
        }
    }
    log_.rows.push_back(row);
}

void Trainer::run()
{
    const int horizon = env_.horizon();
    const auto m = static_cast<std::size_t>(cfg_.batch_size);
    const double nan = std::numeric_limits<double>::quiet_NaN();
    auto& k = progress_.step;

    StateVector s = env_.reset(rng_);
    int t = 0;
    double loss_sum = 0.0;
    std::int64_t loss_count = 0;
    auto take_loss = [&] {
        const double v = loss_count > 0 ? loss_sum / static_cast<double>(loss_count) : nan;
        loss_sum = 0.0;
        loss_count = 0;
        return v;
    };

    while (k < cfg_.total_steps) {
        const double eps = cfg_.epsilon.at(k);
        const auto q = learner_->online().q_values(s, t);
        const std::size_t a = epsilon_greedy(q, eps, rng_);
        StateVector s_next = env_.step(s, a);
        const double r = reward_(s, a, t);
        if (!std::isfinite(r) || !std::all_of(s_next.begin(), s_next.end(), [](double v) { return std::isfinite(v); })) {
            throw DivergenceError("non-finite state or reward at training step " + std::to_string(k) +
                                  " (episode step " + std::to_string(t) + ")");
        }
        const bool terminal = t + 1 == horizon;
        buffer_.push({s, a, r, s_next, t, terminal});

        if (cfg_.eval_every > 0 && k % cfg_.eval_every == 0) {
            evaluate_and_log(k, eps, take_loss());
        }

        if (buffer_.size() >= m) {
            const auto batch = buffer_.sample(m, rng_);
            const auto y = td_target(batch, learner_->target(), cfg_.gamma, horizon);
            loss_sum += learner_->fit(batch, y);
            ++loss_count;
        }
        if (k % cfg_.target_update == 0) {
            learner_->sync_target();
        }
        ++k;
        if (terminal) {
            ++progress_.episode;
        }
        if (k % cfg_.log_every == 0 && !(cfg_.eval_every > 0 && k % cfg_.eval_every == 0)) {
            log_.rows.push_back({k, progress_.episode, eps, take_loss(), nan, nan});
        }

        if (terminal) {
            s = env_.reset(rng_);
            t = 0;
        } else {
            s = std::move(s_next);
            ++t;
        }
    }
    if (cfg_.eval_every > 0 && k > 0 && k % cfg_.eval_every == 0) {
        evaluate_and_log(k, cfg_.epsilon.at(k), take_loss());
    }
    if (net_learner_ != nullptr && !net_learner_->network().mlp().finite()) {
        throw DivergenceError("network parameters became non-finite");
    }
}

} // namespace stlfunnel
