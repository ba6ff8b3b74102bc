"""Bayesian principal-stratification analysis of cluster-randomized trials.

Survivor average causal effects (individual- and cluster-weighted) for
multivariate outcomes truncated by death, fitted by Gibbs sampling.
"""

from __future__ import annotations

import io
import json
from typing import Any, Mapping, Sequence

import numpy as np

from . import _core
from ._core import ConfigError, DataError, NumericalError

__version__ = _core.__version__

__all__ = [
    "ConfigError",
    "DataError",
    "NumericalError",
    "FitResult",
    "compute_iccs",
    "fit",
    "geweke",
    "ground_truth",
    "presets",
    "replicate",
    "run_cli",
    "scenario",
    "simulate",
]


def _scenario_text(spec: str | Mapping[str, Any]) -> str:
    return spec if isinstance(spec, str) else json.dumps(dict(spec))


def presets() -> list[str]:
    """Names of the built-in simulation scenarios."""
    return list(_core.preset_names())


def scenario(spec: str | Mapping[str, Any]) -> dict[str, Any]:
    """Resolve a preset name, JSON path or scenario dict to a full scenario dict."""
    return json.loads(_core.scenario_json(_scenario_text(spec)))


def simulate(spec: str | Mapping[str, Any] = "I", seed: int = 1, nmar_violation: bool = False) -> str:
    """Generate one synthetic trial and return it as dataset CSV text."""
    return _core.simulate_csv(_scenario_text(spec), seed, nmar_violation)


def ground_truth(spec: str | Mapping[str, Any] = "I", seed: int = 1, min_individuals: int = 2_000_000) -> dict:
    """Population estimands of a scenario, from a large simulated population."""
    return json.loads(_core.truth_json(_scenario_text(spec), seed, min_individuals))


class FitResult:
    """Kept draws of one chain, one column per scalar quantity."""

    def __init__(self, raw: dict):
        self.columns: list[str] = list(raw["columns"])
        self.draws: np.ndarray = np.asarray(raw["draws"])
        self.config: dict = json.loads(raw["config"])
        self.wall_seconds: float = raw["wall_seconds"]
        self._summary_csv: str = raw["summary_csv"]

    def __getitem__(self, name: str) -> np.ndarray:
        return self.draws[:, self.columns.index(name)]

    def __len__(self) -> int:
        return self.draws.shape[0]

    def summary(self) -> dict[str, dict[str, float]]:
        """Posterior mean, median and central 95% interval per quantity."""
        lines = self._summary_csv.strip().splitlines()
        keys = lines[0].split(",")[1:]
        return {
            parts[0]: dict(zip(keys, map(float, parts[1:])))
            for parts in (line.split(",") for line in lines[1:])
        }


def fit(data: str, config: Mapping[str, Any] | None = None, **settings: Any) -> FitResult:
    """Run the sampler on dataset CSV text (or a path to a CSV file).

    ``config`` and keyword settings use the JSON config keys, e.g.
    ``iterations``, ``burn_in``, ``seed``, ``strata_columns``.
    """
    cfg = dict(config or {})
    cfg.update(settings)
    if "\n" not in data:
        with io.open(data, encoding="utf-8") as fh:
            data = fh.read()
    return FitResult(_core.fit(data, json.dumps(cfg)))


def replicate(
    spec: str | Mapping[str, Any] = "I",
    reps: int = 20,
    seed: int = 1,
    jobs: int = 1,
    truth_individuals: int = 2_000_000,
    **settings: Any,
) -> list[dict[str, Any]]:
    """Simulation study: bias, coverage and Monte Carlo error per estimand."""
    text = _core.replicate_csv(_scenario_text(spec), json.dumps(settings), reps, seed, jobs, truth_individuals)
    lines = text.strip().splitlines()
    keys = lines[0].split(",")
    rows = []
    for line in lines[1:]:
        row: dict[str, Any] = {}
        for key, value in zip(keys, line.split(",")):
            if key == "parameter":
                row[key] = value
            elif key == "completed":
                row[key] = int(value)
            else:
                row[key] = float(value) if value else None
        rows.append(row)
    return rows


def compute_iccs(sigma_eta: Sequence[Sequence[float]], sigma_e: Sequence[Sequence[float]]) -> dict[str, float]:
    """Intracluster correlations implied by the two covariance blocks."""
    return _core.compute_iccs(np.asarray(sigma_eta, dtype=float), np.asarray(sigma_e, dtype=float))


def geweke(series: Sequence[float]) -> tuple[float, float]:
    """Geweke z-score and two-sided p-value (first 10% vs last 50%)."""
    return _core.geweke(list(map(float, series)))


def run_cli(args: Sequence[str]) -> tuple[int, str, str]:
    """Run a command-line subcommand in-process: (exit code, stdout, stderr)."""
    return _core.run_cli(list(args))
