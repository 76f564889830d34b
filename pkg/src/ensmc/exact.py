"""Exact enumeration of kernel outcomes on discrete toy problems.

A kernel whose randomness comes only from ``integers``, ``categorical``
and ``accept`` has finitely many execution paths.  :class:`EnumeratingRng`
replays a scripted prefix of choices and takes the first possible choice
after it, recording the alternatives; :func:`enumerate_outcomes` walks all
paths depth-first and returns each result with its probability.
"""

import math

import numpy as np


class NotEnumerable(RuntimeError):
    pass


class EnumeratingRng:
    def __init__(self, prefix=()):
        self.prefix = list(prefix)
        self.choices = []
        self.options = []
        self.prob = 1.0

    def _branch(self, probs):
        depth = len(self.choices)
        live = [i for i, q in enumerate(probs) if q > 0]
        if depth < len(self.prefix):
            c = self.prefix[depth]
        else:
            c = live[0]
        self.choices.append(c)
        self.options.append(live)
        self.prob *= probs[c]
        return c

    def integers(self, n):
        return self._branch([1.0 / n] * n)

    def categorical(self, logweights):
        lw = np.asarray(logweights, dtype=np.float64)
        if not np.any(lw > -np.inf):
            raise ValueError("no finite weights")
        w = np.exp(lw - lw.max())
        return self._branch((w / w.sum()).tolist())

    def accept(self, log_ratio):
        if math.isnan(log_ratio):
            return False
        p = 1.0 if log_ratio >= 0 else math.exp(log_ratio)
        if p >= 1.0:
            return True
        if p == 0.0:
            return False
        return self._branch([p, 1.0 - p]) == 0

    def uniform(self, size=None):
        raise NotEnumerable("continuous draw (uniform) during enumeration")

    def normal(self, size=None):
        raise NotEnumerable("continuous draw (normal) during enumeration")


def enumerate_outcomes(fn, max_paths=1_000_000):
    """All ``(fn(rng), probability)`` pairs over the execution paths of ``fn``."""
    out = []
    stack = [[]]
    while stack:
        prefix = stack.pop()
        rng = EnumeratingRng(prefix)
        result = fn(rng)
        out.append((result, rng.prob))
        if len(out) > max_paths:
            raise NotEnumerable(f"more than {max_paths} execution paths")
        for depth in range(len(prefix), len(rng.choices)):
            for alt in rng.options[depth][1:]:
                stack.append(rng.choices[:depth] + [alt])
    return out


def transition_matrix(step_fn, states, index_of):
    """Matrix ``P[i, j]`` of moving from ``states[i]`` to the state with index ``j``."""
    n = len(states)
    P = np.zeros((n, n))
    for i, s in enumerate(states):
        for result, prob in enumerate_outcomes(lambda rng: step_fn(s, rng)):
            P[i, index_of(result)] += prob
    return P
