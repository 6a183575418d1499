#pragma once

#include "stlfunnel/robustness.hpp"

#include <cstdint>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace stlfunnel {

using Rng = std::mt19937_64;

/// Evenly spaced values lo, ..., hi (count >= 2, or count == 1 with lo == hi).
struct ActionAxis {
    std::string name;
    double lo = 0.0;
    double hi = 0.0;
    int count = 1;

    double value(int i) const;
};

/// Cartesian product of action axes, flattened row-major (last axis fastest).
class ActionGrid {
public:
    ActionGrid() = default;
    explicit ActionGrid(std::vector<ActionAxis> axes);

    std::size_t size() const { return size_; }
    std::span<const ActionAxis> axes() const { return axes_; }

    std::vector<int> unflatten(std::size_t index) const;
    std::size_t flatten(std::span<const int> tuple) const;
    /// Physical action values for a flat index. Throws DomainError on a bad index.
    std::vector<double> decode(std::size_t index) const;

private:
    std::vector<ActionAxis> axes_;
    std::size_t size_ = 0;
};

enum class EnvKind { Pendulum, DiffDrive, Integrator };

std::string_view to_string(EnvKind k);
EnvKind parse_env_kind(std::string_view s);

struct ResetDistribution {
    enum class Type { Fixed, Uniform };
    Type type = Type::Fixed;
    StateVector point;      // Fixed
    std::vector<Range> box; // Uniform, one range per state variable
};

struct PendulumConstants {
    double g = 9.8;
    double mass = 0.15;
    double length = 0.5;
    double friction = 0.05;
};

struct EnvConfig {
    EnvKind kind = EnvKind::Integrator;
    double tau = 0.01;
    int horizon = 200;
    ResetDistribution reset;
    PendulumConstants pendulum;
    /// Replaces the nominal state box when non-empty.
    std::vector<Range> state_box;
};

/// Default configuration per kind: pendulum hanging down at (pi, 0), diff-drive at the
/// origin facing +x, integrator at x = 0.
EnvConfig default_env_config(EnvKind kind);

/// Deterministic discrete-time simulator with a finite action grid.
class Environment {
public:
    virtual ~Environment() = default;

    virtual std::string name() const = 0;
    virtual const std::vector<std::string>& variables() const = 0;
    virtual const ActionGrid& actions() const = 0;
    virtual int horizon() const = 0;
    virtual StateVector reset(Rng& rng) const = 0;
    /// Throws DomainError for an invalid action index or state dimension.
    virtual StateVector step(std::span<const double> s, std::size_t action) const = 0;

    /// Nominal per-variable ranges used for robustness bounds and input scaling.
    virtual std::vector<Range> state_box() const = 0;

    std::size_t state_dim() const { return variables().size(); }
    StateVector reset(std::uint64_t seed) const;
};

/// Shared implementation for the three simulated systems.
class SimulatedEnv : public Environment {
public:
    explicit SimulatedEnv(EnvConfig cfg);

    const EnvConfig& config() const { return cfg_; }
    const std::vector<std::string>& variables() const override { return variables_; }
    const std::vector<std::string>& units() const { return units_; }
    const ActionGrid& actions() const override { return actions_; }
    int horizon() const override { return cfg_.horizon; }
    StateVector reset(Rng& rng) const override;
    using Environment::reset;
    /// The configured box when one is set, the nominal box otherwise.
    std::vector<Range> state_box() const final;
    virtual std::vector<Range> nominal_box() const = 0;
    /// Throws DomainError when the reset distribution or state box does not match the state dimension.
    void validate() const;

protected:
    void check_step(std::span<const double> s, std::size_t action) const;

    EnvConfig cfg_;
    std::vector<std::string> variables_;
    std::vector<std::string> units_;
    ActionGrid actions_;
};

/// theta' = theta + tau*omega; omega' = omega + tau*((g/l) sin(theta) - mu/(m l^2) omega + a/(m l^2)).
/// theta = 0 is upright. Torque a in {-3, -2.9, ..., 3}.
class Pendulum final : public SimulatedEnv {
public:
    explicit Pendulum(EnvConfig cfg);
    std::string name() const override { return "pendulum"; }
    StateVector step(std::span<const double> s, std::size_t action) const override;
    std::vector<Range> nominal_box() const override;
};

/// x' = x + tau v cos(theta); y' = y + tau v sin(theta); theta' = theta + tau omega.
/// v in {-5, -4.5, ..., 5}, omega in {-3, -2.5, ..., 3}; heading is not wrapped.
class DiffDrive final : public SimulatedEnv {
public:
    explicit DiffDrive(EnvConfig cfg);
    std::string name() const override { return "diffdrive"; }
    StateVector step(std::span<const double> s, std::size_t action) const override;
    std::vector<Range> nominal_box() const override;
};

/// x' = x + tau v, v in {-3, -2.5, ..., 3}.
class Integrator final : public SimulatedEnv {
public:
    explicit Integrator(EnvConfig cfg);
    std::string name() const override { return "integrator"; }
    StateVector step(std::span<const double> s, std::size_t action) const override;
    std::vector<Range> nominal_box() const override;
};

std::unique_ptr<SimulatedEnv> make_environment(const EnvConfig& cfg);

} // namespace stlfunnel
