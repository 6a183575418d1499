#include "stlfunnel/env.hpp"

#include "stlfunnel/error.hpp"

#include <cmath>
#include <numbers>

namespace stlfunnel {

double ActionAxis::value(int i) const
{
    if (count == 1) {
        return lo;
    }
    // integer endpoints stay exact, e.g. the zero torque of {-3, ..., 3}
    const double n = static_cast<double>(count - 1);
    return (lo * (n - i) + hi * i) / n;
}

ActionGrid::ActionGrid(std::vector<ActionAxis> axes) : axes_(std::move(axes)), size_(1)
{
    if (axes_.empty()) {
        throw DomainError("action grid needs at least one axis");
    }
    for (const auto& a : axes_) {
        if (a.count < 1 || (a.count == 1 && a.lo != a.hi) || a.lo > a.hi) {
            throw DomainError("invalid action axis '" + a.name + "'");
        }
        size_ *= static_cast<std::size_t>(a.count);
    }
}

std::vector<int> ActionGrid::unflatten(std::size_t index) const
{
    if (index >= size_) {
        throw DomainError("action index " + std::to_string(index) + " out of range [0, " + std::to_string(size_) + ")");
    }
    std::vector<int> tuple(axes_.size());
    for (std::size_t k = axes_.size(); k-- > 0;) {
        const auto n = static_cast<std::size_t>(axes_[k].count);
        tuple[k] = static_cast<int>(index % n);
        index /= n;
    }
    return tuple;
}

std::size_t ActionGrid::flatten(std::span<const int> tuple) const
{
    if (tuple.size() != axes_.size()) {
        throw DomainError("action tuple has wrong arity");
    }
    std::size_t index = 0;
    for (std::size_t k = 0; k < axes_.size(); ++k) {
        if (tuple[k] < 0 || tuple[k] >= axes_[k].count) {
            throw DomainError("action component out of range on axis '" + axes_[k].name + "'");
        }
        index = index * static_cast<std::size_t>(axes_[k].count) + static_cast<std::size_t>(tuple[k]);
    }
    return index;
}

std::vector<double> ActionGrid::decode(std::size_t index) const
{
    const auto tuple = unflatten(index);
    std::vector<double> out(tuple.size());
    for (std::size_t k = 0; k < tuple.size(); ++k) {
        out[k] = axes_[k].value(tuple[k]);
    }
    return out;
}

std::string_view to_string(EnvKind k)
{
    switch (k) {
    case EnvKind::Pendulum:
        return "pendulum";
    case EnvKind::DiffDrive:
        return "diffdrive";
    case EnvKind::Integrator:
        return "integrator";
    }
    return "unknown";
}

EnvKind parse_env_kind(std::string_view s)
{
    if (s == "pendulum") {
        return EnvKind::Pendulum;
    }
    if (s == "diffdrive") {
        return EnvKind::DiffDrive;
    }
    if (s == "integrator") {
        return EnvKind::Integrator;
    }
    throw DomainError("unknown environment kind '" + std::string(s) + "'");
}

EnvConfig default_env_config(EnvKind kind)
{
    EnvConfig cfg;
    cfg.kind = kind;
    cfg.tau = 0.01;
    switch (kind) {
    case EnvKind::Pendulum:
        cfg.horizon = 2000;
        cfg.reset.point = {std::numbers::pi, 0.0};
        break;
    case EnvKind::DiffDrive:
        cfg.horizon = 400;
        cfg.reset.point = {0.0, 0.0, 0.0};
        break;
    case EnvKind::Integrator:
        cfg.horizon = 200;
        cfg.reset.point = {0.0};
        break;
    }
    return cfg;
}

StateVector Environment::reset(std::uint64_t seed) const
{
    Rng rng(seed);
    return reset(rng);
}

SimulatedEnv::SimulatedEnv(EnvConfig cfg) : cfg_(std::move(cfg))
{
    if (!(cfg_.tau > 0.0)) {
        throw DomainError("sampling time tau must be positive");
    }
    if (cfg_.horizon < 1) {
        throw DomainError("horizon must be at least 1");
    }
}

StateVector SimulatedEnv::reset(Rng& rng) const
{
    const auto& r = cfg_.reset;
    if (r.type == ResetDistribution::Type::Fixed) {
        if (r.point.size() != variables_.size()) {
            throw DomainError("reset point has " + std::to_string(r.point.size()) + " components, expected " +
                              std::to_string(variables_.size()));
        }
        return r.point;
    }
    if (r.box.size() != variables_.size()) {
        throw DomainError("reset box has " + std::to_string(r.box.size()) + " ranges, expected " +
                          std::to_string(variables_.size()));
    }
    StateVector s(r.box.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
        std::uniform_real_distribution<double> u(r.box[i].lo, r.box[i].hi);
        s[i] = r.box[i].lo == r.box[i].hi ? r.box[i].lo : u(rng);
    }
    return s;
}

void SimulatedEnv::validate() const
{
    const auto& r = cfg_.reset;
    const std::size_t got = r.type == ResetDistribution::Type::Fixed ? r.point.size() : r.box.size();
    if (got != variables_.size()) {
        throw DomainError(std::string("reset ") + (r.type == ResetDistribution::Type::Fixed ? "point" : "box") +
                          " has " + std::to_string(got) + " entries, expected " + std::to_string(variables_.size()));
    }
    if (r.type == ResetDistribution::Type::Uniform) {
        for (const auto& b : r.box) {
            if (!(b.lo <= b.hi)) {
                throw DomainError("reset box range has lo > hi");
            }
        }
    }
    (void)state_box();
}

std::vector<Range> SimulatedEnv::state_box() const
{
    if (cfg_.state_box.empty()) {
        return nominal_box();
    }
    if (cfg_.state_box.size() != variables_.size()) {
        throw DomainError("state box has " + std::to_string(cfg_.state_box.size()) + " ranges, expected " +
                          std::to_string(variables_.size()));
    }
    return cfg_.state_box;
}

void SimulatedEnv::check_step(std::span<const double> s, std::size_t action) const
{
    if (s.size() != variables_.size()) {
        throw DomainError("state has " + std::to_string(s.size()) + " components, expected " +
                          std::to_string(variables_.size()));
    }
    if (action >= actions_.size()) {
        throw DomainError("action index " + std::to_string(action) + " out of range [0, " +
                          std::to_string(actions_.size()) + ")");
    }
}

Pendulum::Pendulum(EnvConfig cfg) : SimulatedEnv(std::move(cfg))
{
    variables_ = {"theta", "omega"};
    units_ = {"rad", "rad/s"};
    actions_ = ActionGrid({{"torque", -3.0, 3.0, 61}});
}

StateVector Pendulum::step(std::span<const double> s, std::size_t action) const
{
    check_step(s, action);
    const auto& c = cfg_.pendulum;
    const double a = actions_.axes()[0].value(static_cast<int>(action));
    const double inertia = c.mass * c.length * c.length;
    const double theta = s[0];
    const double omega = s[1];
    const double tau = cfg_.tau;
    return {theta + tau * omega,
            omega + tau * ((c.g / c.length) * std::sin(theta) - (c.friction / inertia) * omega + a / inertia)};
}

std::vector<Range> Pendulum::nominal_box() const
{
    return {{-std::numbers::pi, std::numbers::pi}, {-std::numbers::pi, std::numbers::pi}};
}

DiffDrive::DiffDrive(EnvConfig cfg) : SimulatedEnv(std::move(cfg))
{
    variables_ = {"x", "y", "theta"};
    units_ = {"m", "m", "rad"};
    actions_ = ActionGrid({{"v", -5.0, 5.0, 21}, {"omega", -3.0, 3.0, 13}});
}

StateVector DiffDrive::step(std::span<const double> s, std::size_t action) const
{
    check_step(s, action);
    const auto tuple = actions_.unflatten(action);
    const double v = actions_.axes()[0].value(tuple[0]);
    const double w = actions_.axes()[1].value(tuple[1]);
    const double tau = cfg_.tau;
    return {s[0] + tau * v * std::cos(s[2]), s[1] + tau * v * std::sin(s[2]), s[2] + tau * w};
}

std::vector<Range> DiffDrive::nominal_box() const
{
    return {{-5.0, 5.0}, {-5.0, 5.0}, {-std::numbers::pi, std::numbers::pi}};
}

Integrator::Integrator(EnvConfig cfg) : SimulatedEnv(std::move(cfg))
{
    variables_ = {"x"};
    units_ = {"m"};
    actions_ = ActionGrid({{"v", -3.0, 3.0, 13}});
}

StateVector Integrator::step(std::span<const double> s, std::size_t action) const
{
    check_step(s, action);
    return {s[0] + cfg_.tau * actions_.axes()[0].value(static_cast<int>(action))};
}

std::vector<Range> Integrator::nominal_box() const { return {{0.0, 50.0}}; }

std::unique_ptr<SimulatedEnv> make_environment(const EnvConfig& cfg)
{
    std::unique_ptr<SimulatedEnv> env;
    switch (cfg.kind) {
    case EnvKind::Pendulum:
        env = std::make_unique<Pendulum>(cfg);
        break;
    case EnvKind::DiffDrive:
        env = std::make_unique<DiffDrive>(cfg);
        break;
    case EnvKind::Integrator:
        env = std::make_unique<Integrator>(cfg);
        break;
    default:
        throw DomainError("unknown environment kind");
    }
    env->validate();
    return env;
}

} // namespace stlfunnel
