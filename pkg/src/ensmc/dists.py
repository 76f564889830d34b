"""Proposal steps and simple distributions.

Kernels and ensemble measures draw all their randomness through these
objects and the primitive methods of the random stream, so the same code
runs with Gaussian steps on continuous targets and with lattice steps on
discrete toys, where transition matrices can be enumerated exactly.
"""

import numpy as np


class GaussianStep:
    """Zero-mean Gaussian offsets with per-coordinate standard deviations."""

    def __init__(self, sd):
        self.sd = np.atleast_1d(np.asarray(sd, dtype=np.float64))
        if np.any(self.sd < 0):
            raise ValueError("standard deviations must be non-negative")

    @property
    def dim(self) -> int:
        return self.sd.shape[0]

    def draw(self, rng, m=None):
        if m is None:
            return self.sd * rng.normal(self.dim)
        return self.sd * rng.normal((m, self.dim))

    def __repr__(self):
        return f"GaussianStep({self.sd.tolist()})"


class LatticeStep:
    """Offsets drawn uniformly from a symmetric set of values, per coordinate."""

    def __init__(self, values, dim=1):
        self.values = np.asarray(values, dtype=np.float64)
        if not np.array_equal(np.sort(self.values), np.sort(-self.values)):
            raise ValueError("lattice step values must be symmetric about zero")
        self._dim = dim

    @property
    def dim(self) -> int:
        return self._dim

    def _one(self, rng):
        return np.array([self.values[rng.integers(self.values.size)] for _ in range(self._dim)])

    def draw(self, rng, m=None):
        if m is None:
            return self._one(rng)
        return np.array([self._one(rng) for _ in range(m)]).reshape(m, self._dim)

    def __repr__(self):
        return f"LatticeStep({self.values.tolist()}, dim={self._dim})"


def as_step(spec, dim):
    """Coerce a float / sequence of sds / step object into a ``dim``-dimensional step."""
    if hasattr(spec, "draw"):
        if spec.dim != dim:
            raise ValueError(f"step has dimension {spec.dim}, expected {dim}")
        return spec
    sd = np.asarray(spec, dtype=np.float64)
    if sd.ndim == 0:
        sd = np.full(dim, float(sd))
    if sd.shape != (dim,):
        raise ValueError(f"expected {dim} standard deviations, got {sd.shape}")
    return GaussianStep(sd)


def as_coordinate_steps(spec, dim):
    """One 1-dimensional step per coordinate."""
    if hasattr(spec, "draw"):
        if spec.dim != 1:
            raise ValueError("coordinate-wise updates need a 1-dimensional step")
        return [spec] * dim
    if isinstance(spec, (list, tuple)) and spec and hasattr(spec[0], "draw"):
        if len(spec) != dim:
            raise ValueError(f"expected {dim} steps, got {len(spec)}")
        return list(spec)
    sd = np.asarray(spec, dtype=np.float64)
    if sd.ndim == 0:
        sd = np.full(dim, float(sd))
    if sd.shape != (dim,):
        raise ValueError(f"expected {dim} standard deviations, got {sd.shape}")
    return [GaussianStep([s]) for s in sd]


class DiagGaussian:
    """Independent Gaussians; used as the independent ensemble distribution."""

    def __init__(self, mean, sd):
        self.mean = np.atleast_1d(np.asarray(mean, dtype=np.float64))
        self.sd = np.atleast_1d(np.asarray(sd, dtype=np.float64))
        if self.mean.shape != self.sd.shape or np.any(self.sd <= 0):
            raise ValueError("mean and sd must match in shape and sd must be positive")
        self._lognorm = -np.sum(np.log(self.sd)) - 0.5 * self.dim * np.log(2 * np.pi)

    @property
    def dim(self) -> int:
        return self.mean.shape[0]

    def logpdf(self, x):
        z = (np.asarray(x) - self.mean) / self.sd
        return self._lognorm - 0.5 * np.sum(z * z, axis=-1)

    def sample(self, rng, m):
        return self.mean + self.sd * rng.normal((m, self.dim))


class DiscretePmf:
    """Probability mass function on a finite set of scalar values."""

    def __init__(self, values, probs):
        self.values = np.asarray(values, dtype=np.float64)
        p = np.asarray(probs, dtype=np.float64)
        if p.shape != self.values.shape or np.any(p <= 0):
            raise ValueError("probabilities must be positive and match the values")
        self.logp = np.log(p / p.sum())
        self._lookup = dict(zip(self.values.tolist(), self.logp.tolist()))

    dim = 1

    def logpdf(self, x):
        x = np.asarray(x, dtype=np.float64).reshape(-1)
        return np.array([self._lookup.get(v, -np.inf) for v in x.tolist()])

    def sample(self, rng, m):
        return np.array([self.values[rng.categorical(self.logp)] for _ in range(m)]).reshape(m, 1)
