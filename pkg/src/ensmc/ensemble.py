"""Ensemble MCMC for fast/slow targets.

A single state is mapped up to an ensemble of ``K`` members sharing the
slow coordinates, the ensemble is updated with Metropolis moves that leave
the ensemble density invariant, and a single member is selected to map
back down.  The fast coordinates of the members are generated by one of
four base measures:

``IndependentMeasure``
    members drawn i.i.d. from a fixed distribution; selection weights are
    corrected by that distribution's density.
``ExchangeableMeasure``
    members i.i.d. around a latent centre with a flat (improper) prior.
``GridMeasure``
    a rectangular lattice (a constellation) shifted to pass through the
    current point.
``ChainMeasure``
    a random walk run forwards and backwards from the current point, with
    a flat (improper) level.

For the last three the marginal corrections are all equal and are stored
as zeros, so selection is proportional to the target density alone.
"""

import itertools
import math
from dataclasses import dataclass, replace
from functools import cached_property

import numba
import numpy as np

from .dists import as_step
from .fastslow import FastSlowPoint, FastSlowTarget, SlowContext


class UnsupportedMeasure(ValueError):
    pass


class AllZeroDensity(RuntimeError):
    pass


@numba.njit(cache=True)
def _logsumexp_diff(a, b):
    """``log(sum(exp(a - b)))`` for 1-d arrays."""
    top = -math.inf
    for i in range(a.shape[0]):
        v = a[i] - b[i]
        if v > top:
            top = v
    if top == -math.inf:
        return -math.inf
    s = 0.0
    for i in range(a.shape[0]):
        s += math.exp(a[i] - b[i] - top)
    return top + math.log(s)


def logsumexp(a) -> float:
    a = np.ascontiguousarray(a, dtype=np.float64).reshape(-1)
    return _logsumexp_diff(a, np.zeros_like(a))


class EnsembleMeasure:
    variant = ""
    shift_invariant = True

    def __init__(self, K: int):
        if K < 2:
            raise ValueError("an ensemble needs K >= 2 members")
        self.K = int(K)

    def grow(self, fast, k, rng):
        """Members (``K x d_fast``) with member ``k`` equal to ``fast``, and log corrections."""
        raise NotImplementedError


class IndependentMeasure(EnsembleMeasure):
    """Members other than the current one drawn independently from ``dist``.

    ``dist`` needs ``logpdf(x)`` over rows and ``sample(rng, m)``.
    """

    variant = "independent"
    shift_invariant = False

    def __init__(self, dist, K: int):
        super().__init__(K)
        self.dist = dist

    def grow(self, fast, k, rng):
        others = self.dist.sample(rng, self.K - 1)
        members = np.insert(others, k, fast, axis=0)
        members[k] = fast
        logmarg = np.asarray(self.dist.logpdf(members), dtype=np.float64)
        if logmarg[k] == -np.inf:
            raise ValueError("current point lies outside the support of the independent distribution")
        return members, logmarg


class ExchangeableMeasure(EnsembleMeasure):
    """Members ``~ N(theta, spread^2)`` per coordinate given an improper flat ``theta``.

    Given the current member the centre has the proper conditional
    ``theta ~ N(fast, spread^2)``.  ``spread`` may also be a step object
    (e.g. a lattice step for exact enumeration).
    """

    variant = "exchangeable"

    def __init__(self, spread, K: int, dim: int = None):
        super().__init__(K)
        if dim is None:
            dim = getattr(spread, "dim", None) or np.atleast_1d(spread).shape[0]
        self.step = as_step(spread, dim)

    def grow(self, fast, k, rng):
        theta = fast + self.step.draw(rng)
        others = theta + self.step.draw(rng, self.K - 1)
        members = np.insert(others, k, fast, axis=0)
        members[k] = fast
        return members, np.zeros(self.K)


class ChainMeasure(EnsembleMeasure):
    """Random-walk chain of members with an improper flat level.

    From position ``k`` the chain is simulated forwards to ``K-1`` and
    backwards to ``0`` with independent steps.
    """

    variant = "chain"

    def __init__(self, step, K: int, dim: int = None):
        super().__init__(K)
        if dim is None:
            dim = getattr(step, "dim", None) or np.atleast_1d(step).shape[0]
        self.step = as_step(step, dim)

    def grow(self, fast, k, rng):
        members = np.empty((self.K, fast.shape[0]))
        members[k] = fast
        for j in range(k + 1, self.K):
            members[j] = members[j - 1] + self.step.draw(rng)
        for j in range(k - 1, -1, -1):
            members[j] = members[j + 1] + self.step.draw(rng)
        return members, np.zeros(self.K)


class GridMeasure(EnsembleMeasure):
    """Rectangular grid of ``prod(counts)`` points with the given spacings.

    With ``jitter=(lo, hi)`` every map-up rescales the spacing in each
    dimension by an independent uniform factor on ``[lo, hi]``.
    """

    variant = "grid"

    def __init__(self, counts, spacings, jitter=None):
        self.counts = tuple(int(c) for c in np.atleast_1d(counts))
        self.spacings = np.atleast_1d(np.asarray(spacings, dtype=np.float64))
        if len(self.counts) != self.spacings.shape[0]:
            raise ValueError("need one spacing per grid dimension")
        if np.any(self.spacings <= 0):
            raise ValueError("grid spacings must be positive")
        super().__init__(int(np.prod(self.counts)))
        self.jitter = jitter
        self.lattice = np.array(list(itertools.product(*(range(c) for c in self.counts))), dtype=np.float64)

    def spacing_draw(self, rng):
        if self.jitter is None:
            return self.spacings
        lo, hi = self.jitter
        return self.spacings * (lo + (hi - lo) * rng.uniform(len(self.counts)))

    def grow(self, fast, k, rng):
        d = self.spacing_draw(rng)
        members = fast + (self.lattice - self.lattice[k]) * d
        members[k] = fast
        return members, np.zeros(self.K)


@dataclass(frozen=True)
class Ensemble:
    slow: np.ndarray
    fast_members: np.ndarray
    member_logdens: np.ndarray
    member_logmarg: np.ndarray
    ctx: SlowContext
    measure: EnsembleMeasure

    @property
    def K(self) -> int:
        return self.fast_members.shape[0]

    @cached_property
    def log_density(self) -> float:
        return _logsumexp_diff(self.member_logdens, self.member_logmarg) - math.log(self.K)


@dataclass(frozen=True)
class MapDownChoice:
    index: int
    logweights: np.ndarray


def map_up(measure: EnsembleMeasure, target: FastSlowTarget, p: FastSlowPoint, rng, ctx: SlowContext = None) -> Ensemble:
    """Grow an ensemble around ``p``.

    The position of ``p`` in the ensemble is uniform on ``0..K-1``.  A
    context already computed for ``p.slow`` can be passed to avoid a
    repeated slow phase.
    """
    if ctx is None or not np.array_equal(ctx.slow, p.slow):
        ctx = target.slow_phase(p.slow)
    k = rng.integers(measure.K)
    members, logmarg = measure.grow(np.array(p.fast), k, rng)
    logdens = target.fast_phase_many(ctx, members)
    return Ensemble(p.slow, members, logdens, logmarg, ctx, measure)


def ensemble_log_density(e: Ensemble) -> float:
    """Log ensemble density relative to the base measure, up to a constant.

    ``logsumexp(logdens - logmarg) - log K``; constant factors that cancel
    in Metropolis ratios are left out.
    """
    return e.log_density


def map_down(e: Ensemble, rng):
    """Select one member with probability proportional to ``pi / xi_k``."""
    lw = e.member_logdens - e.member_logmarg
    if not np.any(lw > -np.inf):
        raise AllZeroDensity("every ensemble member has zero density")
    idx = rng.categorical(lw)
    return FastSlowPoint(e.slow, e.fast_members[idx]), MapDownChoice(idx, lw)


def _slow_offset(step, d_slow, coord, rng):
    if d_slow == 0:
        return np.zeros(0)
    if coord is None:
        return np.asarray(step.draw(rng), dtype=np.float64).reshape(d_slow)
    off = np.zeros(d_slow)
    off[coord] = step.draw(rng)[0]
    return off


def _propose(e, target, slow, members, rng):
    ctx = target.slow_phase(slow)
    logdens = target.fast_phase_many(ctx, members)
    proposed = _logsumexp_diff(logdens, e.member_logmarg) - math.log(e.K)
    if rng.accept(proposed - e.log_density):
        return replace(e, slow=ctx.slow, fast_members=members, member_logdens=logdens, ctx=ctx), True
    return e, False


def update_slow_fixed_fast(e: Ensemble, target: FastSlowTarget, step, rng, coord: int = None):
    """Metropolis update of the slow coordinates with fast members held fixed.

    ``step`` is a ``d_slow``-dimensional step (or sds), or a 1-dimensional
    step when ``coord`` selects a single slow coordinate.  Returns the new
    ensemble and whether the proposal was accepted.
    """
    d_slow = e.slow.shape[0]
    step = as_step(step, d_slow if coord is None else 1)
    off = _slow_offset(step, d_slow, coord, rng)
    return _propose(e, target, e.slow + off, e.fast_members, rng)


def update_slow_shifted_fast(e: Ensemble, target: FastSlowTarget, slow_step, fast_shift, rng, coord: int = None):
    """As :func:`update_slow_fixed_fast`, also shifting every fast member by one common offset."""
    if not e.measure.shift_invariant:
        raise UnsupportedMeasure(f"shifted proposals need a shift-invariant measure, not {e.measure.variant!r}")
    d_slow = e.slow.shape[0]
    slow_step = as_step(slow_step, d_slow if coord is None else 1)
    fast_shift = as_step(fast_shift, e.fast_members.shape[1])
    off = _slow_offset(slow_step, d_slow, coord, rng)
    shift = np.asarray(fast_shift.draw(rng), dtype=np.float64)
    return _propose(e, target, e.slow + off, e.fast_members + shift, rng)


def ensemble_sweep(e: Ensemble, target: FastSlowTarget, slow_steps, rng, fast_shift=None):
    """One single-coordinate update per slow coordinate, in order.

    ``slow_steps`` holds one 1-dimensional step (or sd) per slow
    coordinate.  Returns the final ensemble and the acceptance flags.
    """
    d_slow = e.slow.shape[0]
    if d_slow == 0:
        return e, np.zeros(0, dtype=bool)
    if np.ndim(slow_steps) == 0 and not hasattr(slow_steps, "__len__"):
        slow_steps = [slow_steps] * d_slow
    slow_steps = [as_step(s, 1) for s in slow_steps]
    if fast_shift is not None:
        fast_shift = as_step(fast_shift, e.fast_members.shape[1])
    flags = np.zeros(d_slow, dtype=bool)
    for i in range(d_slow):
        if fast_shift is None:
            e, flags[i] = update_slow_fixed_fast(e, target, slow_steps[i], rng, coord=i)
        else:
            e, flags[i] = update_slow_shifted_fast(e, target, slow_steps[i], fast_shift, rng, coord=i)
    return e, flags
