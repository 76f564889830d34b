"""Metropolis kernels and the budgeted chain driver.

Kernels operate on a :class:`ChainState`, which carries the cached slow
context and log density of the current point so that fast-only updates
never repeat a slow computation.  Chains are run until a budget of slow
evaluations is spent, the currency in which the different methods are
compared.
"""

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .dists import as_coordinate_steps, as_step
from .ensemble import EnsembleMeasure, ensemble_sweep, map_down, map_up
from .fastslow import EvalCounters, FastSlowPoint, FastSlowTarget, SlowContext

JOINT_RWM = "joint-rwm"
SINGLE_RWM = "single-rwm"
EXTRA_FAST = "extra-fast"
RANDOM_GRID = "random-grid"
ENSEMBLE = "ensemble"
KINDS = (JOINT_RWM, SINGLE_RWM, EXTRA_FAST, RANDOM_GRID, ENSEMBLE)


class InitDegenerate(ValueError):
    """The initial point has zero density."""


class BudgetUnreachable(RuntimeError):
    pass


@dataclass
class ChainState:
    point: FastSlowPoint
    ctx: SlowContext
    logp: float


def init_state(target: FastSlowTarget, point: FastSlowPoint) -> ChainState:
    ctx = target.slow_phase(point.slow)
    logp = target.fast_phase(ctx, point.fast)
    if logp == -math.inf:
        raise InitDegenerate(f"initial point has zero density: {point}")
    return ChainState(FastSlowPoint(ctx.slow, point.fast), ctx, logp)


class AcceptStats:
    """Acceptance tallies per named update and per group (``slow``/``fast``)."""

    def __init__(self):
        self.attempts = {}
        self.accepts = {}
        self.group_attempts = {"slow": 0, "fast": 0}
        self.group_accepts = {"slow": 0, "fast": 0}

    def record(self, name, group, accepted):
        self.attempts[name] = self.attempts.get(name, 0) + 1
        self.accepts[name] = self.accepts.get(name, 0) + bool(accepted)
        self.group_attempts[group] += 1
        self.group_accepts[group] += bool(accepted)

    def group_rate(self, group) -> float:
        n = self.group_attempts[group]
        return self.group_accepts[group] / n if n else math.nan

    def rejection_rates(self) -> dict:
        return {k: 1.0 - self.accepts[k] / n for k, n in self.attempts.items()}


def _metropolis(target, state, slow, fast, rng, ctx=None):
    if ctx is None:
        ctx = target.slow_phase(slow)
    logp = target.fast_phase(ctx, fast)
    if rng.accept(logp - state.logp):
        return ChainState(FastSlowPoint(ctx.slow, fast), ctx, logp), True
    return state, False


def joint_rwm_step(target: FastSlowTarget, state: ChainState, step, rng):
    """Random-walk Metropolis proposal moving every coordinate at once.

    ``step`` is a common sd, per-coordinate sds, or a step object over the
    joined ``(slow, fast)`` vector.  Costs one slow evaluation.
    """
    step = as_step(step, target.d_slow + target.d_fast)
    x = state.point.joined() + step.draw(rng)
    return _metropolis(target, state, x[: target.d_slow], x[target.d_slow :], rng)


def single_var_sweep(target: FastSlowTarget, state: ChainState, steps, rng, stats=None, names=None):
    """One Metropolis update per coordinate, slow coordinates first.

    Slow updates cost one slow evaluation each; fast updates reuse the
    current context.  Returns the new state and the acceptance flags.
    """
    d_slow, d_fast = target.d_slow, target.d_fast
    steps = as_coordinate_steps(steps, d_slow + d_fast)
    flags = np.zeros(d_slow + d_fast, dtype=bool)
    for i in range(d_slow):
        slow = np.array(state.point.slow)
        slow[i] += steps[i].draw(rng)[0]
        state, flags[i] = _metropolis(target, state, slow, state.point.fast, rng)
    for j in range(d_fast):
        fast = np.array(state.point.fast)
        fast[j] += steps[d_slow + j].draw(rng)[0]
        state, flags[d_slow + j] = _metropolis(target, state, state.point.slow, fast, rng, ctx=state.ctx)
    if stats is not None:
        names = names or _names(target)
        for i, f in enumerate(flags):
            stats.record(names[i], "slow" if i < d_slow else "fast", f)
    return state, flags


def extra_fast_updates(target: FastSlowTarget, state: ChainState, steps, count: int, rng, stats=None, names=None):
    """``count`` single-coordinate updates cycling over the fast coordinates.

    No slow evaluations are done.
    """
    d_slow, d_fast = target.d_slow, target.d_fast
    if count and d_fast == 0:
        raise ValueError("target has no fast coordinates")
    steps = as_coordinate_steps(steps, d_fast)
    flags = np.zeros(count, dtype=bool)
    for c in range(count):
        j = c % d_fast
        fast = np.array(state.point.fast)
        fast[j] += steps[j].draw(rng)[0]
        state, flags[c] = _metropolis(target, state, state.point.slow, fast, rng, ctx=state.ctx)
        if stats is not None:
            stats.record((names or _names(target))[d_slow + j], "fast", flags[c])
    return state, flags


def random_grid_metropolis(target: FastSlowTarget, state: ChainState, fast_step, drag_count: int, slow_step, rng, stats=None):
    """Random-grid Metropolis.

    Draws one slow displacement ``delta`` and performs ``drag_count``
    Metropolis updates proposing ``(x1 + i*delta +- delta, x2')``.  Slow
    contexts are cached per grid index, so revisiting a slow value costs no
    slow evaluation.
    """
    d_slow, d_fast = target.d_slow, target.d_fast
    slow_step = as_step(slow_step, d_slow)
    fast_step = as_step(fast_step, d_fast) if d_fast else None
    origin = np.array(state.point.slow)
    delta = np.asarray(slow_step.draw(rng), dtype=np.float64)
    cache = {0: state.ctx}
    pos = 0
    flags = np.zeros(drag_count, dtype=bool)
    for c in range(drag_count):
        cand = pos + (1 if rng.integers(2) else -1)
        ctx = cache.get(cand)
        if ctx is None:
            ctx = cache[cand] = target.slow_phase(origin + cand * delta)
        fast = np.array(state.point.fast)
        if fast_step is not None:
            fast = fast + fast_step.draw(rng)
        state, flags[c] = _metropolis(target, state, ctx.slow, fast, rng, ctx=ctx)
        if flags[c]:
            pos = cand
        if stats is not None:
            stats.record("grid", "slow", flags[c])
    return state, flags


def _names(target):
    names = tuple(target.slow_names) + tuple(target.fast_names)
    if len(names) != target.d_slow + target.d_fast:
        names = tuple(f"x{i}" for i in range(target.d_slow + target.d_fast))
    return names


@dataclass
class KernelConfig:
    """What one chain iteration does.

    ``s`` is the joint proposal sd; ``slow_sds``/``fast_sds`` hold one sd
    (or 1-d step) per coordinate.  ``measure`` is required for the
    ensemble kind; ``fast_shift`` switches its slow updates from
    fixed-fast to shifted-fast proposals; ``hold_sweeps`` is the number of
    ensemble sweeps between regenerations.
    """

    kind: str
    s: object = 0.25
    slow_sds: object = None
    fast_sds: object = None
    extra_fast_count: int = 0
    grid_drag_count: int = 10
    slow_step_sd: object = 0.5
    measure: EnsembleMeasure = None
    fast_shift: object = None
    hold_sweeps: int = 1

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown kernel kind {self.kind!r}")
        if self.extra_fast_count < 0 or self.grid_drag_count < 0 or self.hold_sweeps < 1:
            raise ValueError("counts must be non-negative and hold_sweeps positive")
        if self.kind == ENSEMBLE and self.measure is None:
            raise ValueError("the ensemble kernel needs a measure")


class Kernel:
    """A configured transition ``state -> state`` for one target."""

    def __init__(self, config: KernelConfig, target: FastSlowTarget):
        self.config = config
        self.target = target
        d_slow, d_fast = target.d_slow, target.d_fast
        self.names = _names(target)
        kind = config.kind
        if kind == JOINT_RWM:
            self.joint = as_step(config.s, d_slow + d_fast)
            self.max_slow_per_iter = 1
        if kind in (SINGLE_RWM, EXTRA_FAST, ENSEMBLE):
            self.slow_steps = as_coordinate_steps(config.slow_sds, d_slow) if d_slow else []
            self.max_slow_per_iter = d_slow
        if kind in (SINGLE_RWM, EXTRA_FAST):
            self.fast_steps = as_coordinate_steps(config.fast_sds, d_fast) if d_fast else []
        if kind == RANDOM_GRID:
            self.slow_step = as_step(config.slow_step_sd, d_slow)
            self.fast_step = as_step(config.fast_sds, d_fast) if d_fast else None
            self.max_slow_per_iter = config.grid_drag_count
        if kind == ENSEMBLE:
            self.max_slow_per_iter = d_slow * config.hold_sweeps
            self.fast_shift = None if config.fast_shift is None else as_step(config.fast_shift, d_fast)

    def __call__(self, state: ChainState, rng, stats: AcceptStats = None) -> ChainState:
        cfg, target = self.config, self.target
        if cfg.kind == JOINT_RWM:
            state, acc = joint_rwm_step(target, state, self.joint, rng)
            if stats is not None:
                stats.record("joint", "slow", acc)
            return state
        if cfg.kind in (SINGLE_RWM, EXTRA_FAST):
            state, _ = single_var_sweep(target, state, self.slow_steps + self.fast_steps, rng, stats, self.names)
            if cfg.kind == EXTRA_FAST and cfg.extra_fast_count:
                state, _ = extra_fast_updates(target, state, self.fast_steps, cfg.extra_fast_count, rng, stats, self.names)
            return state
        if cfg.kind == RANDOM_GRID:
            state, _ = random_grid_metropolis(target, state, self.fast_step, cfg.grid_drag_count, self.slow_step, rng, stats)
            return state
        return self.ensemble_cycle(state, rng, stats)

    def ensemble_cycle(self, state, rng, stats=None):
        """Map up, ``hold_sweeps`` sweeps over the slow coordinates, map down."""
        e = map_up(self.config.measure, self.target, state.point, rng, ctx=state.ctx)
        for _ in range(self.config.hold_sweeps):
            e, flags = ensemble_sweep(e, self.target, self.slow_steps, rng, fast_shift=self.fast_shift)
            if stats is not None:
                for i, f in enumerate(flags):
                    stats.record(self.names[i], "slow", f)
        point, choice = map_down(e, rng)
        return ChainState(point, e.ctx, float(e.member_logdens[choice.index]))


@dataclass
class TraceRecord:
    iter: int
    slow_evals: int
    fast_evals: int
    log_post: float
    mean_log_nu: float
    log_eta: float
    log_sigma: float
    acc_slow: float
    acc_fast: float

    FIELDS = ("iter", "slow_evals", "fast_evals", "log_post", "mean_log_nu",
              "log_eta", "log_sigma", "acc_slow", "acc_fast")


@dataclass
class ChainRun:
    trace: list
    state: ChainState
    stats: AcceptStats
    counters: EvalCounters
    iterations: int
    wall_time: float
    points: list = field(default_factory=list)


def run_chain(target: FastSlowTarget, kernel, init: FastSlowPoint, budget: int, rng,
              thin: int = None, records: int = None, keep_points: bool = False,
              stall_limit: int = 10000) -> ChainRun:
    """Run ``kernel`` until ``budget`` slow evaluations have been spent.

    The evaluation of the initial point is not charged to the budget; the
    counters in the trace are relative to the start of the run.  Records
    are taken every ``thin`` iterations, or, with ``records``, each time
    the slow-evaluation count passes one of ``records`` equally spaced
    marks ending at ``budget``.  The final iteration is always recorded.
    The default is one record per iteration.
    """
    if budget < 1:
        raise ValueError("budget must be at least 1")
    if isinstance(kernel, KernelConfig):
        kernel = Kernel(kernel, target)
    t0 = time.perf_counter()
    state = init_state(target, init)
    base = target.counters.snapshot()
    stats = AcceptStats()
    trace, points = [], []
    if records is not None:
        if records < 1:
            raise ValueError("records must be positive")
        marks = [-(-j * budget // records) for j in range(1, records + 1)]
    else:
        thin = thin or 1
    next_mark = 0
    it = 0
    stalled = 0
    used = 0
    while used < budget:
        state = kernel(state, rng, stats)
        it += 1
        now = target.counters.slow_evals - base.slow_evals
        stalled = 0 if now > used else stalled + 1
        if stalled >= stall_limit:
            raise BudgetUnreachable(f"no slow evaluations in {stall_limit} iterations")
        used = now
        if records is not None:
            take = False
            while next_mark < len(marks) and used >= marks[next_mark]:
                next_mark += 1
                take = True
        else:
            take = it % thin == 0
        if take:
            trace.append(_record(target, state, it, base, stats))
            if keep_points:
                points.append(state.point)
    if not trace or trace[-1].iter != it:
        trace.append(_record(target, state, it, base, stats))
        if keep_points:
            points.append(state.point)
    counters = EvalCounters(
        target.counters.slow_evals - base.slow_evals,
        target.counters.fast_evals - base.fast_evals,
        target.counters.slow_flops - base.slow_flops,
        target.counters.fast_flops - base.fast_flops,
        target.counters.eig_clamps - base.eig_clamps,
    )
    return ChainRun(trace, state, stats, counters, it, time.perf_counter() - t0, points)


def _record(target, state, it, base, stats):
    mean_log_nu, log_eta, log_sigma = target.trace_values(state.point)
    return TraceRecord(
        it,
        target.counters.slow_evals - base.slow_evals,
        target.counters.fast_evals - base.fast_evals,
        state.logp,
        float(mean_log_nu),
        float(log_eta),
        float(log_sigma),
        stats.group_rate("slow"),
        stats.group_rate("fast"),
    )
