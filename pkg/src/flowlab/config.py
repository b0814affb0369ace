"""Experiment configuration: a single JSON document, bit-exact round trips.

Every experiment is reproducible from its config alone; outputs embed the
resolved config as their first structured record.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field as dc_field, replace

import numpy as np

from .gaussian import ExpectationScheme

__all__ = ["ExperimentConfig", "jsonable"]


def jsonable(obj):
    """Recursively convert numpy scalars/arrays so json.dumps accepts them."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, float) and obj != obj:  # NaN is not valid JSON
        return None
    return obj


@dataclass
class ExperimentConfig:
    experiment: str
    field: str = "zero"
    field_params: dict = dc_field(default_factory=dict)
    interval: list = dc_field(default_factory=lambda: [0.0, 0.5])
    scheme: dict = dc_field(default_factory=lambda: {"kind": "gauss-hermite", "level": 40})
    tol: float = 1e-6
    seed: int = 20260809
    n_particles: int = 1000
    output: str = "flowlab-out"
    extras: dict = dc_field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(jsonable(asdict(self)), sort_keys=True, indent=2) + "\n"

    @staticmethod
    def from_json(text: str) -> "ExperimentConfig":
        data = json.loads(text)
        known = {f for f in ExperimentConfig.__dataclass_fields__}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return ExperimentConfig(**data)

    @staticmethod
    def from_file(path: str) -> "ExperimentConfig":
        with open(path, "r", encoding="utf-8") as f:
            return ExperimentConfig.from_json(f.read())

    def to_file(self, path: str) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            f.write(self.to_json())

    def with_overrides(self, **kwargs) -> "ExperimentConfig":
        clean = {k: v for k, v in kwargs.items() if v is not None}
        return replace(self, **clean)

    def scheme_object(self) -> ExpectationScheme:
        d = dict(self.scheme)
        kind = d.get("kind", "gauss-hermite")
        if kind == "gauss-hermite":
            return ExpectationScheme.gauss_hermite(int(d.get("level", 40)))
        return ExpectationScheme.monte_carlo(
            int(d.get("n_samples", 100_000)), int(d.get("seed", self.seed))
        )
