"""Targets with fast and slow variables.

A target splits its state into slow coordinates, whose change forces an
expensive recomputation, and fast coordinates, whose change can be
evaluated cheaply against results cached from the last slow computation.
Log densities are unnormalized; ``-inf`` means zero density.
"""

import copy
import itertools
import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np


class TargetDegenerate(RuntimeError):
    """The slow coordinates are invalid beyond merely having zero density."""


class DimensionMismatch(ValueError):
    pass


def _vec(x):
    a = np.array(x, dtype=np.float64).reshape(-1)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class FastSlowPoint:
    slow: np.ndarray
    fast: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "slow", _vec(self.slow))
        object.__setattr__(self, "fast", _vec(self.fast))

    def joined(self) -> np.ndarray:
        return np.concatenate([self.slow, self.fast])

    @classmethod
    def split(cls, x, d_slow: int) -> "FastSlowPoint":
        x = np.asarray(x, dtype=np.float64)
        return cls(x[:d_slow], x[d_slow:])


@dataclass(frozen=True)
class SlowContext:
    """Immutable snapshot of a slow computation.

    ``payload`` is whatever the target caches; ``None`` marks slow values
    at which the density is zero for every fast value.
    """

    slow: np.ndarray
    payload: Any
    id: int


@dataclass
class EvalCounters:
    slow_evals: int = 0
    fast_evals: int = 0
    # flop-model tallies, filled by targets that report a cost model
    slow_flops: int = 0
    fast_flops: int = 0
    # eigenvalues clamped to zero by eigen-path targets
    eig_clamps: int = 0

    def snapshot(self) -> "EvalCounters":
        return copy.copy(self)


class FastSlowTarget:
    """Base class for fast/slow targets.

    Subclasses set ``d_slow``/``d_fast`` and implement ``_slow`` (slow
    coordinates to payload) and ``_fast`` (payload and an ``(m, d_fast)``
    array of fast coordinates to ``m`` log densities).  A target instance
    owns its counters, so each chain should get its own via :meth:`fresh`.
    """

    d_slow: int = 0
    d_fast: int = 0
    slow_names: tuple = ()
    fast_names: tuple = ()

    def __init__(self):
        self.counters = EvalCounters()
        self._ids = itertools.count()

    def fresh(self):
        """Shallow copy sharing data but with zeroed counters."""
        other = copy.copy(self)
        other.counters = EvalCounters()
        other._ids = itertools.count()
        return other

    # hooks
    def _slow(self, slow: np.ndarray):
        raise NotImplementedError

    def _fast(self, payload, fast: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def slow_cost(self) -> int:
        return 0

    def fast_cost(self) -> int:
        return 0

    def trace_values(self, point: FastSlowPoint):
        """``(mean_log_nu, log_eta, log_sigma)`` for trace records."""
        return (math.nan, math.nan, math.nan)

    # public operations
    def slow_phase(self, slow) -> SlowContext:
        slow = _vec(slow)
        if slow.shape[0] != self.d_slow:
            raise DimensionMismatch(f"expected {self.d_slow} slow coordinates, got {slow.shape[0]}")
        self.counters.slow_evals += 1
        self.counters.slow_flops += self.slow_cost()
        if not np.isfinite(slow).all():
            payload = None
        else:
            payload = self._slow(slow)
        return SlowContext(slow, payload, next(self._ids))

    def fast_phase_many(self, ctx: SlowContext, fasts) -> np.ndarray:
        """Log densities for each row of ``fasts`` at the slow values of ``ctx``."""
        fasts = np.asarray(fasts, dtype=np.float64)
        if fasts.ndim != 2 or fasts.shape[1] != self.d_fast:
            raise DimensionMismatch(f"expected shape (m, {self.d_fast}), got {fasts.shape}")
        m = fasts.shape[0]
        self.counters.fast_evals += m
        self.counters.fast_flops += m * self.fast_cost()
        if ctx.payload is None:
            return np.full(m, -np.inf)
        finite = np.isfinite(fasts).all(axis=1)
        if not finite.all():
            fasts = np.where(finite[:, None], fasts, 0.0)
        out = np.asarray(self._fast(ctx.payload, fasts), dtype=np.float64)
        bad = ~finite | np.isnan(out)
        if bad.any():
            out = np.where(bad, -np.inf, out)
        return out

    def fast_phase(self, ctx: SlowContext, fast) -> float:
        fast = np.asarray(fast, dtype=np.float64).reshape(1, -1)
        return float(self.fast_phase_many(ctx, fast)[0])

    def full_log_density(self, point: FastSlowPoint) -> float:
        """Uncached evaluation: one slow phase followed by one fast phase."""
        return self.fast_phase(self.slow_phase(point.slow), point.fast)


class SeparableGaussian(FastSlowTarget):
    """``log pi(x1, x2) = -|x1|^2/2 - |x2|^2/2``; the peak value is 0."""

    def __init__(self, d_slow=1, d_fast=1):
        super().__init__()
        self.d_slow = d_slow
        self.d_fast = d_fast

    def _slow(self, slow):
        return -0.5 * float(slow @ slow)

    def _fast(self, payload, fast):
        return payload - 0.5 * np.sum(fast * fast, axis=1)


class TableTarget(FastSlowTarget):
    """Discrete target on an integer lattice given by a table of log values.

    The first ``d_slow`` table axes are slow coordinates, the rest fast.
    Points off the lattice or outside the table have zero density, unless
    ``periodic`` is set, in which case coordinates wrap around.
    """

    def __init__(self, logp, d_slow: int, periodic: bool = False):
        super().__init__()
        self.logp = np.array(logp, dtype=np.float64)
        self.logp.flags.writeable = False
        self.d_slow = d_slow
        self.d_fast = self.logp.ndim - d_slow
        self.periodic = periodic

    def _index(self, x, shape):
        idx = np.rint(x)
        ok = idx == x
        idx = idx.astype(np.int64)
        if self.periodic:
            idx = idx % np.asarray(shape, dtype=np.int64)
        else:
            ok &= (idx >= 0) & (idx < np.asarray(shape))
        return idx, ok

    def _slow(self, slow):
        idx, ok = self._index(slow, self.logp.shape[: self.d_slow])
        if not ok.all():
            return None
        return self.logp[tuple(idx)]

    def _fast(self, payload, fast):
        idx, ok = self._index(fast, payload.shape)
        ok = ok.all(axis=1)
        idx = np.where(ok[:, None], idx, 0)
        vals = payload[tuple(idx.T)]
        return np.where(ok, vals, -np.inf)

    def state_index(self, point: FastSlowPoint) -> int:
        """Flat table index of a lattice point (wrapped if periodic)."""
        x = point.joined()
        idx, ok = self._index(x, self.logp.shape)
        if not ok.all():
            raise ValueError(f"{x} is not a state of this table")
        return int(np.ravel_multi_index(tuple(idx), self.logp.shape))

    def point_at(self, flat: int) -> FastSlowPoint:
        x = np.array(np.unravel_index(flat, self.logp.shape), dtype=np.float64)
        return FastSlowPoint.split(x, self.d_slow)

    def pmf(self) -> np.ndarray:
        """Normalized probabilities over the flattened table."""
        w = np.exp(self.logp - self.logp.max()).reshape(-1)
        return w / w.sum()
