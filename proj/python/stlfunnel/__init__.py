"""Funnel-shaped rewards for signal temporal logic tasks and a time-aware DQN trainer.

The heavy lifting happens in the compiled ``_stlfunnel`` extension; this package
re-exports it under shorter names.
"""

from ._stlfunnel import (
    ConfigError,
    DivergenceError,
    DomainError,
    Environment,
    Error,
    Formula,
    FragmentError,
    IoError,
    ParseError,
    Schedule,
    build_schedule,
    check,
    evaluate,
    funnel_rate,
    gamma_value,
    monitor,
    parse_formula,
    robustness,
    robustness_signal,
    run_funnel,
    train,
)

__all__ = [
    "ConfigError",
    "DivergenceError",
    "DomainError",
    "Environment",
    "Error",
    "Formula",
    "FragmentError",
    "IoError",
    "ParseError",
    "Schedule",
    "build_schedule",
    "check",
    "evaluate",
    "funnel_rate",
    "gamma_value",
    "monitor",
    "parse_formula",
    "robustness",
    "robustness_signal",
    "run_funnel",
    "train",
]
