"""Configuration-driven runs, sweeps, fits and exports."""

from .benchmarks import example_config, lc_sweep
from .config import ConfigError, RunConfig, SweepSpec, load_config
from .fit import ExponentialFit, FitError, fit_exponential
from .io import read_csv, write_csv, write_vtu
from .runner import Problem, mirror_metric, run, sweep

__all__ = [
    "ConfigError",
    "ExponentialFit",
    "FitError",
    "Problem",
    "RunConfig",
    "SweepSpec",
    "example_config",
    "fit_exponential",
    "lc_sweep",
    "load_config",
    "mirror_metric",
    "read_csv",
    "run",
    "sweep",
    "write_csv",
    "write_vtu",
]
