# Module for phase-space points of time-dependent mechanics:
# - TangentState: (t, q, v), a point of R x TQ
# - CotangentState: (t, q, p), a point of R x T*Q
# - StateDerivative: components of an evolution vector field at a point

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from mechanics.errors import DimensionMismatchError, NonFiniteStateError


def _as_vector(name: str, value) -> np.ndarray:
    arr = np.array(value, dtype=float).reshape(-1)
    arr.setflags(write=False)
    if arr.size < 1:
        raise DimensionMismatchError(f"{name} must have at least one entry")
    if not np.all(np.isfinite(arr)):
        raise NonFiniteStateError(f"{name} has non-finite entries: {arr}")
    return arr


def _check_pair(q: np.ndarray, w: np.ndarray, label: str):
    if q.size != w.size:
        raise DimensionMismatchError(f"q has length {q.size} but {label} has length {w.size}")


@dataclass(frozen=True)
class TangentState:
    """Time, configuration and velocity."""

    t: float
    q: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "t", float(self.t))
        if not np.isfinite(self.t):
            raise NonFiniteStateError(f"t is not finite: {self.t}")
        object.__setattr__(self, "q", _as_vector("q", self.q))
        object.__setattr__(self, "v", _as_vector("v", self.v))
        _check_pair(self.q, self.v, "v")

    @property
    def n(self) -> int:
        return self.q.size

    def to_array(self) -> np.ndarray:
        return np.concatenate([self.q, self.v])

    @classmethod
    def from_array(cls, t: float, y: np.ndarray) -> TangentState:
        n = y.size // 2
        return cls(t, y[:n], y[n:])


@dataclass(frozen=True)
class CotangentState:
    """Time, configuration and momenta."""

    t: float
    q: np.ndarray
    p: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "t", float(self.t))
        if not np.isfinite(self.t):
            raise NonFiniteStateError(f"t is not finite: {self.t}")
        object.__setattr__(self, "q", _as_vector("q", self.q))
        object.__setattr__(self, "p", _as_vector("p", self.p))
        _check_pair(self.q, self.p, "p")

    @property
    def n(self) -> int:
        return self.q.size

    def to_array(self) -> np.ndarray:
        return np.concatenate([self.q, self.p])

    @classmethod
    def from_array(cls, t: float, y: np.ndarray) -> CotangentState:
        n = y.size // 2
        return cls(t, y[:n], y[n:])


@dataclass(frozen=True)
class StateDerivative:
    """Components (dq, dv or dp, dt) of an evolution vector field."""

    dq: np.ndarray
    dv_or_dp: np.ndarray
    dt: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "dq", _as_vector("dq", self.dq))
        object.__setattr__(self, "dv_or_dp", _as_vector("dv_or_dp", self.dv_or_dp))
        _check_pair(self.dq, self.dv_or_dp, "dv_or_dp")

    def to_array(self) -> np.ndarray:
        return np.concatenate([self.dq, self.dv_or_dp])
