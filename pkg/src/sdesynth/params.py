"""Run parameters shared by synthesis, learning and the command line."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, fields, replace
from typing import Any, Mapping

__all__ = ["Params", "ParamsError", "load_params"]


class ParamsError(ValueError):
    pass


@dataclass(frozen=True)
class Params:
    K: int = 1
    gamma: float = 0.9999
    gamma_acc: float = 0.9
    r_n: float = -1.0
    tol: float = 1e-10
    max_sweeps: int = 1_000_000
    # Stage 1
    alpha: float = 0.1
    episodes_stage1: int = 4000
    T_epi: int = 5000
    stability_window: int = 500
    # Stage 2
    alpha_a: float = 10.0
    alpha_b: float = 10.0
    epsilon: float = 0.3
    episodes_stage2: int = 200_000
    max_steps_stage2: int = 1000
    seed: int = 0

    def __post_init__(self):
        problems = []
        if not (isinstance(self.K, int) and self.K >= 0):
            problems.append("K must be a non-negative integer")
        if not (0.0 < self.gamma_acc < self.gamma < 1.0):
            problems.append("need 0 < gamma_acc < gamma < 1")
        if not (self.r_n < 0 and math.isfinite(self.r_n)):
            problems.append("r_n must be negative")
        if not self.tol > 0:
            problems.append("tol must be positive")
        if not (0.0 < self.alpha <= 1.0):
            problems.append("alpha must lie in (0, 1]")
        if not (self.alpha_a > 0 and self.alpha_b > 0):
            problems.append("alpha_a and alpha_b must be positive")
        if not (0.0 < self.epsilon <= 1.0):
            problems.append("epsilon must lie in (0, 1]")
        for name in ("max_sweeps", "episodes_stage1", "T_epi", "episodes_stage2", "max_steps_stage2"):
            if getattr(self, name) < 1:
                problems.append(f"{name} must be positive")
        if self.stability_window < 0:
            problems.append("stability_window must be >= 0 (0 disables early stopping)")
        if problems:
            raise ParamsError("; ".join(problems))

    @property
    def unsafe_reward(self) -> float:
        return (1.0 - self.gamma_acc) * self.r_n

    def updated(self, **changes: Any) -> "Params":
        return replace(self, **changes)

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "Params":
        known = {f.name: f for f in fields(cls)}
        unknown = set(data) - set(known)
        if unknown:
            raise ParamsError(f"unknown parameters {sorted(unknown)}")
        kwargs = {}
        for k, v in data.items():
            typ = type(getattr(cls(), k))
            if typ is int:
                if isinstance(v, float) and v.is_integer():
                    v = int(v)
                if not isinstance(v, int) or isinstance(v, bool):
                    raise ParamsError(f"parameter {k} must be an integer")
            else:
                v = float(v)
            kwargs[k] = v
        return cls(**kwargs)


def load_params(path) -> Params:
    with open(path, encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParamsError(f"invalid JSON: {exc}") from None
    if not isinstance(data, dict):
        raise ParamsError("parameters must be a JSON object")
    return Params.from_dict(data)
