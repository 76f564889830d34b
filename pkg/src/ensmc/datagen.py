"""Synthetic regression data with correlated covariates.

Covariates are standard normal with the structure::

    z1 = w1
    z2 = 0.25 z1 + w2 sqrt(1 - 0.25^2),   z3 = 0.25 z2 + ...
    z4..z6 = 0.99 z1..z3 + ...,           z7..z9 = 0.9 z1..z3 + ...
    z10.. independent

and the response is ``f(z1, z2, z3)`` plus Gaussian noise.
"""

import math
from dataclasses import dataclass

import numpy as np

from .gpmodel import write_dataset


class UnsupportedP(ValueError):
    pass


# column -> (parent column, coefficient), 0-based
_PARENTS = {1: (0, 0.25), 2: (1, 0.25), 3: (0, 0.99), 4: (1, 0.99), 5: (2, 0.99),
            6: (0, 0.9), 7: (1, 0.9), 8: (2, 0.9)}

# stream id for data generation, kept apart from chain streams
DATA_STREAM = 0xDA7A

PAPER_N = 100
PAPER_P = 12
PAPER_NOISE_SD = 0.4


@dataclass(frozen=True)
class DataGenSpec:
    n: int = PAPER_N
    p: int = PAPER_P
    noise_sd: float = PAPER_NOISE_SD
    seed: int = 1

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be at least 1")
        if self.p < 3:
            raise UnsupportedP("the regression function needs at least 3 covariates")
        if not self.noise_sd > 0:
            raise ValueError("noise_sd must be positive")

    @classmethod
    def paper(cls, seed: int = 1, p: int = PAPER_P):
        if p != PAPER_P:
            raise UnsupportedP(f"the preset has p = {PAPER_P}")
        return cls(PAPER_N, PAPER_P, PAPER_NOISE_SD, seed)


def correlate(W) -> np.ndarray:
    """Apply the covariate structure to independent standard normals ``W`` (n x p)."""
    W = np.asarray(W, dtype=np.float64)
    Z = W.copy()
    for h in range(1, min(W.shape[1], 9)):
        parent, c = _PARENTS[h]
        Z[:, h] = c * Z[:, parent] + W[:, h] * math.sqrt(1.0 - c * c)
    return Z


def population_corr(p: int) -> np.ndarray:
    """Population correlation matrix of the covariates."""
    B = np.eye(p)
    for h in range(1, min(p, 9)):
        parent, c = _PARENTS[h]
        B[h] = c * B[parent]
        B[h, h] = math.sqrt(1.0 - c * c)
    return B @ B.T


def gen_covariates(spec: DataGenSpec, rng) -> np.ndarray:
    return correlate(rng.normal((spec.n, spec.p)))


def regression_function(Z) -> np.ndarray:
    Z = np.atleast_2d(np.asarray(Z, dtype=np.float64))
    z1, z2, z3 = Z[:, 0], Z[:, 1], Z[:, 2]
    return 0.7 * z1**2 + 0.8 * np.sin(0.3 + (4.5 + 0.5 * z1) * z2) + 0.85 * np.cos(0.1 + 5 * z3 + 0.1 * z2**2)


def gen_responses(spec: DataGenSpec, Z, rng) -> np.ndarray:
    Z = np.asarray(Z, dtype=np.float64)
    if Z.ndim != 2 or Z.shape[1] < 3:
        raise UnsupportedP("responses need at least 3 covariate columns")
    return regression_function(Z) + spec.noise_sd * rng.normal(Z.shape[0])


def generate(spec: DataGenSpec, rng=None):
    """Covariates then responses, from stream ``DATA_STREAM`` of ``spec.seed``."""
    if rng is None:
        from .rng import RngStream

        rng = RngStream(spec.seed, DATA_STREAM)
    Z = gen_covariates(spec, rng)
    return Z, gen_responses(spec, Z, rng)


def write_generated(path, spec: DataGenSpec):
    Z, y = generate(spec)
    write_dataset(path, Z, y)
    return Z, y
