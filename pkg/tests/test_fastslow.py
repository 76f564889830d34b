import math

import numpy as np
import pytest

from ensmc.fastslow import DimensionMismatch, FastSlowPoint, SeparableGaussian, TableTarget


def test_point_vectors_are_frozen():
    p = FastSlowPoint([1, 2], [3])
    assert p.slow.dtype == np.float64
    with pytest.raises(ValueError):
        p.slow[0] = 5
    assert p.joined().tolist() == [1, 2, 3]
    q = FastSlowPoint.split([1, 2, 3], 2)
    assert q.slow.tolist() == [1, 2] and q.fast.tolist() == [3]


def test_separable_context_and_mode():
    t = SeparableGaussian()
    ctx = t.slow_phase([0.0])
    assert ctx.payload == 0.0
    assert t.fast_phase(ctx, [0.0]) == 0.0
    assert t.full_log_density(FastSlowPoint([1.0], [1.0])) == -1.0


def test_slow_phase_deterministic():
    t = SeparableGaussian()
    assert t.slow_phase([0.7]).payload == t.slow_phase([0.7]).payload


def test_counters():
    t = SeparableGaussian()
    ctx = t.slow_phase([0.1])
    t.fast_phase(ctx, [0.2])
    t.fast_phase_many(ctx, np.zeros((5, 1)))
    assert (t.counters.slow_evals, t.counters.fast_evals) == (1, 6)
    t.full_log_density(FastSlowPoint([0.0], [0.0]))
    assert (t.counters.slow_evals, t.counters.fast_evals) == (2, 7)


def test_fresh_has_own_counters():
    t = SeparableGaussian()
    t.slow_phase([0.0])
    u = t.fresh()
    assert u.counters.slow_evals == 0 and t.counters.slow_evals == 1


def test_context_ids_monotone():
    t = SeparableGaussian()
    ids = [t.slow_phase([0.0]).id for _ in range(4)]
    assert ids == sorted(ids) and len(set(ids)) == 4


def test_infinite_fast_gives_minus_inf():
    t = SeparableGaussian()
    ctx = t.slow_phase([0.0])
    assert t.fast_phase(ctx, [math.inf]) == -math.inf
    assert t.fast_phase(ctx, [math.nan]) == -math.inf


def test_infinite_slow_gives_zero_density_context():
    t = SeparableGaussian()
    ctx = t.slow_phase([math.inf])
    assert ctx.payload is None
    assert t.fast_phase(ctx, [0.0]) == -math.inf


def test_dimension_checks():
    t = SeparableGaussian(2, 1)
    with pytest.raises(DimensionMismatch):
        t.slow_phase([0.0])
    ctx = t.slow_phase([0.0, 0.0])
    with pytest.raises(DimensionMismatch):
        t.fast_phase(ctx, [0.0, 1.0])


def test_cache_coherence_separable(nprng):
    t = SeparableGaussian(2, 3)
    for _ in range(100):
        s, f = nprng.normal(size=2), nprng.normal(size=3)
        assert abs(t.fast_phase(t.slow_phase(s), f) - t.full_log_density(FastSlowPoint(s, f))) < 1e-10


def test_table_target_lookup_and_support():
    logp = np.log(np.arange(1, 7, dtype=float)).reshape(2, 3)
    t = TableTarget(logp, 1)
    assert t.full_log_density(FastSlowPoint([1], [2])) == logp[1, 2]
    assert t.full_log_density(FastSlowPoint([2], [0])) == -math.inf
    assert t.full_log_density(FastSlowPoint([0], [0.5])) == -math.inf
    assert t.full_log_density(FastSlowPoint([0], [-1])) == -math.inf
    np.testing.assert_allclose(t.pmf(), np.arange(1, 7) / 21)
    assert t.state_index(t.point_at(4)) == 4


def test_table_target_periodic():
    t = TableTarget(np.log([1.0, 2.0, 3.0]), 0, periodic=True)
    assert t.full_log_density(FastSlowPoint([], [4])) == math.log(2.0)
    assert t.state_index(FastSlowPoint([], [-1])) == 2
