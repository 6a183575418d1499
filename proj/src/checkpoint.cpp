#include "stlfunnel/dqn.hpp"
#include "stlfunnel/error.hpp"

#include "json.hpp"

#include <fstream>
#include <sstream>

namespace stlfunnel {

using nlohmann::json;

namespace {

json matrix_to_json(const Eigen::MatrixXd& m)
{
    json rows = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            row.push_back(m(i, j));
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

Eigen::MatrixXd matrix_from_json(const json& j, Eigen::Index rows, Eigen::Index cols)
{
    if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != rows) {
        throw IoError("checkpoint matrix has the wrong number of rows");
    }
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        const json& row = j[static_cast<std::size_t>(i)];
        if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) {
            throw IoError("checkpoint matrix has the wrong number of columns");
        }
        for (Eigen::Index c = 0; c < cols; ++c) {
            m(i, c) = row[static_cast<std::size_t>(c)].get<double>();
        }
    }
    return m;
}

json stack_to_json(const LayerStack& stack)
{
    json out = json::array();
    for (const auto& l : stack) {
        out.push_back({{"weights", matrix_to_json(l.weights)}, {"bias", matrix_to_json(l.bias)}});
    }
    return out;
}

LayerStack stack_from_json(const json& j, const std::vector<int>& sizes)
{
    if (!j.is_array() || j.size() + 1 != sizes.size()) {
        throw IoError("checkpoint layer count does not match the recorded shape");
    }
    LayerStack out;
    for (std::size_t i = 0; i < j.size(); ++i) {
        DenseLayer l;
        l.weights = matrix_from_json(j[i].at("weights"), sizes[i + 1], sizes[i]);
        l.bias = matrix_from_json(j[i].at("bias"), sizes[i + 1], 1);
        out.push_back(std::move(l));
    }
    return out;
}

json network_to_json(const QNetwork& net)
{
    return {{"state_dim", net.state_dim()},
            {"horizon", net.horizon()},
            {"sizes", net.mlp().sizes()},
            {"input_offset", net.input_offset()},
            {"input_scale", net.input_scale()},
            {"layers", stack_to_json(net.mlp().layers())}};
}

QNetwork network_from_json(const json& j)
{
    const auto sizes = j.at("sizes").get<std::vector<int>>();
    const auto state_dim = j.at("state_dim").get<std::size_t>();
    if (sizes.size() < 2 || sizes.front() != static_cast<int>(state_dim) + 1) {
        throw IoError("checkpoint network shape is inconsistent");
    }
    std::vector<int> hidden(sizes.begin() + 1, sizes.end() - 1);
    QNetwork net(state_dim, static_cast<std::size_t>(sizes.back()), j.at("horizon").get<int>(), hidden);
    net.set_input_transform(j.at("input_offset").get<std::vector<double>>(), j.at("input_scale").get<std::vector<double>>());
    net.mlp().layers() = stack_from_json(j.at("layers"), sizes);
    return net;
}

} // namespace

Checkpoint make_checkpoint(const Trainer& trainer, std::string config_digest)
{
    const NetworkLearner* nl = trainer.network_learner();
    if (nl == nullptr) {
        throw DomainError("only network learners can be checkpointed");
    }
    Checkpoint ck;
    ck.config_digest = std::move(config_digest);
    ck.progress = trainer.progress();
    ck.online = nl->network();
    ck.target = nl->target_network();
    ck.optimizer = nl->optimizer().config();
    ck.optimizer_steps = nl->optimizer().steps();
    ck.first_moment = nl->optimizer().first_moment();
    ck.second_moment = nl->optimizer().second_moment();
    return ck;
}

void apply_checkpoint(Trainer& trainer, const Checkpoint& ck)
{
    NetworkLearner* nl = trainer.network_learner();
    if (nl == nullptr) {
        throw DomainError("only network learners can be restored");
    }
    if (ck.online.mlp().sizes() != nl->network().mlp().sizes()) {
        throw DomainError("checkpoint network shape differs from the configured one");
    }
    nl->network() = ck.online;
    nl->target_network() = ck.target;
    nl->optimizer().restore(ck.optimizer_steps, ck.first_moment, ck.second_moment);
    trainer.restore_progress(ck.progress);
}

void save_checkpoint(const Checkpoint& ck, const std::string& path)
{
    json j;
    j["format"] = "stlfunnel-checkpoint";
    j["version"] = Checkpoint::kVersion;
    j["config_digest"] = ck.config_digest;
    j["progress"] = {{"step", ck.progress.step}, {"episode", ck.progress.episode}, {"rng_state", ck.progress.rng_state}};
    j["online"] = network_to_json(ck.online);
    j["target"] = network_to_json(ck.target);
    j["optimizer"] = {{"kind", ck.optimizer.kind == OptimizerKind::Adam ? "adam" : "sgd"},
                      {"learning_rate", ck.optimizer.learning_rate},
                      {"beta1", ck.optimizer.beta1},
                      {"beta2", ck.optimizer.beta2},
                      {"epsilon", ck.optimizer.epsilon},
                      {"steps", ck.optimizer_steps},
                      {"first_moment", stack_to_json(ck.first_moment)},
                      {"second_moment", stack_to_json(ck.second_moment)}};
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw IoError("cannot open '" + path + "' for writing");
    }
    out << j.dump() << '\n';
    if (!out) {
        throw IoError("failed writing '" + path + "'");
    }
}

Checkpoint load_checkpoint(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open checkpoint '" + path + "'");
    }
    std::stringstream buf;
    buf << in.rdbuf();
    try {
        const json j = json::parse(buf.str());
        if (j.value("format", "") != "stlfunnel-checkpoint") {
            throw IoError("'" + path + "' is not a checkpoint file");
        }
        const int version = j.at("version").get<int>();
        if (version != Checkpoint::kVersion) {
            throw IoError("checkpoint '" + path + "' has version " + std::to_string(version) + ", expected " +
                          std::to_string(Checkpoint::kVersion));
        }
        Checkpoint ck;
        ck.config_digest = j.at("config_digest").get<std::string>();
        const json& p = j.at("progress");
        ck.progress.step = p.at("step").get<std::int64_t>();
        ck.progress.episode = p.at("episode").get<std::int64_t>();
        ck.progress.rng_state = p.at("rng_state").get<std::string>();
        ck.online = network_from_json(j.at("online"));
        ck.target = network_from_json(j.at("target"));
        if (ck.online.mlp().sizes() != ck.target.mlp().sizes()) {
            throw IoError("online and target networks differ in shape");
        }
        const json& o = j.at("optimizer");
        const auto kind = o.at("kind").get<std::string>();
        if (kind != "adam" && kind != "sgd") {
            throw IoError("unknown optimizer '" + kind + "' in checkpoint");
        }
        ck.optimizer.kind = kind == "adam" ? OptimizerKind::Adam : OptimizerKind::Sgd;
        ck.optimizer.learning_rate = o.at("learning_rate").get<double>();
        ck.optimizer.beta1 = o.at("beta1").get<double>();
        ck.optimizer.beta2 = o.at("beta2").get<double>();
        ck.optimizer.epsilon = o.at("epsilon").get<double>();
        ck.optimizer_steps = o.at("steps").get<std::int64_t>();
        ck.first_moment = stack_from_json(o.at("first_moment"), ck.online.mlp().sizes());
        ck.second_moment = stack_from_json(o.at("second_moment"), ck.online.mlp().sizes());
        return ck;
    } catch (const json::exception& e) {
        throw IoError("corrupt checkpoint '" + path + "': " + e.what());
    } catch (const DomainError& e) {
        throw IoError("corrupt checkpoint '" + path + "': " + e.what());
    }
}

bool check_checkpoint(const Checkpoint& ck, std::size_t action_count, const std::string& config_digest)
{
    if (ck.online.action_count() != action_count) {
        throw DomainError("checkpoint has " + std::to_string(ck.online.action_count()) + " actions, environment has " +
                          std::to_string(action_count));
    }
    return ck.config_digest == config_digest;
}

} // namespace stlfunnel
