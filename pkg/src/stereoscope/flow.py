"""Rectified-flow numerics on small vectors.

Velocity fields are plain callables ``(z, t) -> v`` grouped by a format tag,
so the straight-line path, flow-matching loss, Euler sampler, single-step
feed-forward prediction and the cycle objective can be checked against closed
forms without any learned network.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Mapping, Optional

import numpy as np

from .errors import DimMismatch, InputError, NegativeTerm, StepOverflow

PARALLEL = "s_parallel"
CONVERGED = "s_converged"
T0 = 0.001
CYCLE_WEIGHT = 0.5

Evaluator = Callable[[np.ndarray, float], np.ndarray]


def _vec(z) -> np.ndarray:
    arr = np.asarray(z, dtype=np.float64)
    if arr.ndim != 1:
        raise DimMismatch(f"expected a vector, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InputError("state must be finite")
    return arr


def _same_dim(*arrays: np.ndarray) -> None:
    dims = {a.shape for a in arrays}
    if len(dims) != 1:
        raise DimMismatch(f"dimension mismatch: {sorted(dims)}")


@dataclass(frozen=True)
class FlowState:
    z: np.ndarray
    t: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.t <= 1.0:
            raise InputError(f"t={self.t} outside [0, 1]")


class VelocityField:
    """Tag-selected velocity evaluators.

    ``VelocityField({PARALLEL: f, CONVERGED: g})`` routes on the tag;
    ``VelocityField.uniform(f)`` ignores it.
    """

    def __init__(self, branches: Mapping[str, Evaluator] | Evaluator):
        if callable(branches):
            self._default: Optional[Evaluator] = branches
            self._branches: dict[str, Evaluator] = {}
        else:
            self._default = None
            self._branches = dict(branches)
            if not self._branches:
                raise InputError("velocity field needs at least one branch")

    @classmethod
    def uniform(cls, fn: Evaluator) -> "VelocityField":
        return cls(fn)

    @classmethod
    def affine(cls, maps: Mapping[str, tuple[np.ndarray, np.ndarray]]) -> "VelocityField":
        """``v(z) = A z + b`` per tag, independent of ``t``."""
        frozen = {k: (np.asarray(a, dtype=np.float64), np.asarray(b, dtype=np.float64)) for k, (a, b) in maps.items()}
        return cls({k: (lambda z, t, a=a, b=b: a @ z + b) for k, (a, b) in frozen.items()})

    @property
    def tags(self) -> tuple[str, ...]:
        return tuple(self._branches)

    def __call__(self, z, t: float, tag: str = PARALLEL) -> np.ndarray:
        z = _vec(z)
        if self._default is not None:
            fn = self._default
        else:
            try:
                fn = self._branches[tag]
            except KeyError:
                raise InputError(f"no velocity branch for tag {tag!r}") from None
        v = np.asarray(fn(z, float(t)), dtype=np.float64)
        if v.shape != z.shape:
            raise DimMismatch(f"field returned shape {v.shape} for state {z.shape}")
        return v


def lerp_path(z0, z1, t: float) -> FlowState:
    z0, z1 = _vec(z0), _vec(z1)
    _same_dim(z0, z1)
    if not 0.0 <= t <= 1.0:
        raise InputError(f"t={t} outside [0, 1]")
    if t == 0.0:
        return FlowState(z0.copy(), 0.0)
    if t == 1.0:
        return FlowState(z1.copy(), 1.0)
    return FlowState((1.0 - t) * z0 + t * z1, float(t))


def stratified_times(n: int, seed: Optional[int] = None) -> np.ndarray:
    """One time per equal-width stratum of [0, 1]; midpoints when ``seed`` is None."""
    if n < 1:
        raise InputError("need at least one sample")
    edges = np.arange(n, dtype=np.float64)
    if seed is None:
        return (edges + 0.5) / n
    return (edges + np.random.default_rng(seed).random(n)) / n


def flow_match_loss(field: VelocityField, z0, z1, t_samples, tag: str = PARALLEL) -> float:
    """Mean over ``t_samples`` of ``|v(z_t, t) - (z1 - z0)|^2``."""
    z0, z1 = _vec(z0), _vec(z1)
    _same_dim(z0, z1)
    ts = np.atleast_1d(np.asarray(t_samples, dtype=np.float64))
    if ts.size == 0:
        raise InputError("need at least one time sample")
    target = z1 - z0
    terms = []
    for t in ts:
        state = lerp_path(z0, z1, float(t))
        r = field(state.z, state.t, tag) - target
        terms.append(math.fsum(r * r))
    return math.fsum(terms) / len(terms)


def euler_integrate(
    field: VelocityField,
    z1,
    steps: int,
    eta: float,
    tag: str = PARALLEL,
    trace: Optional[list] = None,
) -> np.ndarray:
    """Integrate from t=1 down to t=0 with ``z <- z - eta * v(z, t)``."""
    z = _vec(z1).copy()
    if steps < 1:
        raise InputError("need at least one step")
    if not 0.0 < eta <= 1.0:
        raise InputError(f"step size {eta} outside (0, 1]")
    span = steps * eta
    if span > 1.0 + 1e-9:
        raise StepOverflow(f"{steps} steps of {eta} run past t=0")
    if span < 1.0 - 1e-9:
        raise InputError(f"{steps} steps of {eta} stop at t={1.0 - span:.6g}, not 0")
    for k in range(steps):
        t = max(0.0, 1.0 - k * eta)
        z = z - eta * field(z, t, tag)
        if trace is not None:
            trace.append(FlowState(z.copy(), max(0.0, 1.0 - (k + 1) * eta)))
    return z


def feed_forward_predict(field: VelocityField, z_input, t0: float = T0, tag: str = PARALLEL) -> np.ndarray:
    """Single evaluation of the field at the fixed near-zero time ``t0``."""
    return field(_vec(z_input), t0, tag)


@dataclass(frozen=True)
class CycleTerms:
    recon: float
    cycle: float
    total: float
    lam: float

    def to_dict(self) -> dict:
        return {"recon": self.recon, "cycle": self.cycle, "total": self.total, "lambda": self.lam}


def _sq(v: np.ndarray) -> float:
    return math.fsum(v * v)


def cycle_objective(
    fwd: VelocityField,
    bwd: VelocityField,
    z_l,
    z_r,
    lam: float = CYCLE_WEIGHT,
    tag: str = PARALLEL,
    t0: float = T0,
    reverse_cycle: bool = False,
) -> CycleTerms:
    """Reconstruction of both views plus the left-right-left cycle.

    ``reverse_cycle`` adds the right-left-right loop to the cycle term; off
    by default.
    """
    if lam < 0:
        raise NegativeTerm("lambda must be non-negative")
    z_l, z_r = _vec(z_l), _vec(z_r)
    _same_dim(z_l, z_r)
    zr_hat = fwd(z_l, t0, tag)
    zl_hat = bwd(z_r, t0, tag)
    recon = _sq(zr_hat - z_r) + _sq(zl_hat - z_l)
    cycle = _sq(z_l - bwd(zr_hat, t0, tag))
    if reverse_cycle:
        cycle += _sq(z_r - fwd(zl_hat, t0, tag))
    return CycleTerms(recon=recon, cycle=cycle, total=recon + lam * cycle, lam=lam)
