"""Dense symmetric linear algebra for the GP likelihood paths.

Cholesky factorization without pivoting, forward substitution,
log-determinants, quadratic forms, and a cyclic Jacobi eigensolver.
Matrices are dense row-major float64 arrays; the inner loops are compiled
with numba.
"""

from dataclasses import dataclass

import numba
import numpy as np

JACOBI_TOL = 1e-12
JACOBI_MAX_SWEEPS = 50


class NotPositiveDefinite(ArithmeticError):
    """A Cholesky pivot was not strictly positive."""


class NoConvergence(ArithmeticError):
    """The Jacobi eigensolver hit its sweep limit."""


class DimensionMismatch(ValueError):
    pass


def _frozen(a):
    a = np.array(a, dtype=np.float64)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class SymMatrix:
    """Symmetric matrix.  The lower triangle is mirrored on construction."""

    entries: np.ndarray

    def __post_init__(self):
        a = np.array(self.entries, dtype=np.float64)
        if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
            raise DimensionMismatch(f"expected a square matrix, got shape {a.shape}")
        lower = np.tril(a)
        a = lower + np.tril(a, -1).T
        a.flags.writeable = False
        object.__setattr__(self, "entries", a)

    @property
    def n(self) -> int:
        return self.entries.shape[0]


@dataclass(frozen=True)
class CholFactor:
    lower: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "lower", _frozen(self.lower))

    @property
    def n(self) -> int:
        return self.lower.shape[0]


@dataclass(frozen=True)
class EigenDecomp:
    values: np.ndarray
    vectors: np.ndarray
    sweeps: int = 0

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen(self.values))
        object.__setattr__(self, "vectors", _frozen(self.vectors))

    @property
    def n(self) -> int:
        return self.values.shape[0]


@numba.njit(cache=True)
def _chol_kernel(a):
    n = a.shape[0]
    lo = np.zeros_like(a)
    for j in range(n):
        s = a[j, j]
        for k in range(j):
            s -= lo[j, k] * lo[j, k]
        if not s > 0.0:
            return lo, j
        d = np.sqrt(s)
        lo[j, j] = d
        for i in range(j + 1, n):
            t = a[i, j]
            for k in range(j):
                t -= lo[i, k] * lo[j, k]
            lo[i, j] = t / d
    return lo, -1


@numba.njit(cache=True)
def _forward_kernel(lo, y):
    n = lo.shape[0]
    u = np.empty(n)
    for i in range(n):
        t = y[i]
        for k in range(i):
            t -= lo[i, k] * u[k]
        u[i] = t / lo[i, i]
    return u


@numba.njit(cache=True)
def _jacobi_kernel(a, tol, max_sweeps):
    n = a.shape[0]
    a = a.copy()
    v = np.eye(n)
    total = 0.0
    for i in range(n):
        for j in range(n):
            total += a[i, j] * a[i, j]
    thresh = tol * np.sqrt(total)
    for sweep in range(max_sweeps + 1):
        off = 0.0
        for i in range(n):
            for j in range(i + 1, n):
                off += 2.0 * a[i, j] * a[i, j]
        if np.sqrt(off) < thresh or off == 0.0:
            return a, v, sweep, True
        if sweep == max_sweeps:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = 1.0 / (abs(theta) + np.sqrt(theta * theta + 1.0))
                if theta < 0.0:
                    t = -t
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                for k in range(n):
                    akp = a[k, p]
                    akq = a[k, q]
                    a[k, p] = c * akp - s * akq
                    a[k, q] = s * akp + c * akq
                for k in range(n):
                    apk = a[p, k]
                    aqk = a[q, k]
                    a[p, k] = c * apk - s * aqk
                    a[q, k] = s * apk + c * aqk
                a[p, q] = 0.0
                a[q, p] = 0.0
                for k in range(n):
                    vkp = v[k, p]
                    vkq = v[k, q]
                    v[k, p] = c * vkp - s * vkq
                    v[k, q] = s * vkp + c * vkq
    return a, v, max_sweeps, False


def _entries(m):
    return m.entries if isinstance(m, SymMatrix) else np.ascontiguousarray(m, dtype=np.float64)


def cholesky(m) -> CholFactor:
    """Lower Cholesky factor of a symmetric matrix.

    Raises :class:`NotPositiveDefinite` as soon as a pivot is ``<= 0``
    (or NaN); no NaNs are ever returned.
    """
    a = _entries(m)
    lo, bad = _chol_kernel(a)
    if bad >= 0:
        raise NotPositiveDefinite(f"non-positive pivot at row {bad}")
    return CholFactor(lo)


def chol_logdet(f: CholFactor) -> float:
    """log det of the factored matrix, ``2 * sum(log(diag(L)))``."""
    return 2.0 * float(np.sum(np.log(np.diag(f.lower))))


def forward_solve(f: CholFactor, y) -> np.ndarray:
    """Solve ``L u = y`` by forward substitution."""
    y = np.ascontiguousarray(y, dtype=np.float64)
    if y.ndim != 1 or y.shape[0] != f.n:
        raise DimensionMismatch(f"vector of length {y.shape} against factor of size {f.n}")
    return _forward_kernel(f.lower, y)


def chol_quadform(f: CholFactor, y) -> float:
    """``y' A^{-1} y`` for the factored matrix ``A``."""
    u = forward_solve(f, y)
    return float(u @ u)


def sym_eigen(m, tol=JACOBI_TOL, max_sweeps=JACOBI_MAX_SWEEPS) -> EigenDecomp:
    """Eigendecomposition by cyclic Jacobi rotations.

    Converged when the off-diagonal Frobenius norm falls below
    ``tol * ||m||_F``.  Eigenvalues are returned in ascending order with the
    eigenvectors as matching columns.
    """
    a = _entries(m)
    d, v, sweeps, ok = _jacobi_kernel(a, tol, max_sweeps)
    if not ok:
        raise NoConvergence(f"Jacobi did not converge in {max_sweeps} sweeps")
    vals = np.diag(d).copy()
    order = np.argsort(vals, kind="stable")
    return EigenDecomp(vals[order], v[:, order], sweeps)
