"""Gaussian process regression posterior as a fast/slow target.

The covariance of the responses is::

    Cov(y_i, y_j) = eta^2 * (a^2 + exp(-sum_h (nu_h (z_ih - z_jh))^2) + r^2 delta_ij)
                    + sigma^2 delta_ij

All parameters are sampled on the log scale.  Writing ``Upsilon'`` for the
eta-free part including the jitter ``r^2``, two factorizations make some
parameters cheap to change:

* Cholesky path: ``Sigma = eta^2 (Upsilon' + psi^2 I)`` with
  ``psi = sigma / eta``.  Slow: ``log nu_1..p, log psi``; fast: ``log eta``.
* Eigen path: ``Sigma = eta^2 Upsilon' + sigma^2 I``.  Slow: ``log nu``;
  fast: ``log eta, log sigma``.

The change of variables ``(log eta, log sigma) -> (log eta, log psi)`` has
unit Jacobian, so both paths carry the same posterior density.  Log
likelihoods omit the ``-n/2 log(2 pi)`` term; priors are normalized.
"""

import csv
import math
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg
from scipy.spatial.distance import pdist, squareform

from . import numlin
from .fastslow import FastSlowPoint, FastSlowTarget


class NonPositiveVariance(ArithmeticError):
    pass


@dataclass(frozen=True)
class GpModelSpec:
    """Fixed model constants and priors.

    Priors are Gaussian on ``log sigma`` and ``log eta`` (mean, sd), and
    multivariate Gaussian on ``log nu`` with common mean and sd and equal
    pairwise correlation (mean, sd, corr).
    """

    a: float = 1.0
    r: float = 0.01
    prior_log_sigma: tuple = (math.log(0.5), 1.5)
    prior_log_eta: tuple = (0.0, 1.5)
    prior_log_nu: tuple = (math.log(0.5), 1.8, 0.69)

    def __post_init__(self):
        if self.a < 0 or self.r <= 0:
            raise ValueError("need a >= 0 and r > 0")
        if self.prior_log_sigma[1] <= 0 or self.prior_log_eta[1] <= 0 or self.prior_log_nu[1] <= 0:
            raise ValueError("prior standard deviations must be positive")
        if not 0 <= self.prior_log_nu[2] < 1:
            raise ValueError("prior correlation must lie in [0, 1)")


@dataclass(frozen=True)
class GpDataset:
    Z: np.ndarray
    y: np.ndarray
    y_offset: float = 0.0

    def __post_init__(self):
        Z = np.array(self.Z, dtype=np.float64)
        y = np.array(self.y, dtype=np.float64).reshape(-1)
        if Z.ndim != 2 or Z.shape[0] != y.shape[0] or y.shape[0] < 1:
            raise ValueError(f"covariates {Z.shape} do not match responses {y.shape}")
        if not np.all(np.isfinite(y)) or not np.all(np.isfinite(Z)):
            raise ValueError("dataset contains non-finite values")
        Z.flags.writeable = False
        y.flags.writeable = False
        object.__setattr__(self, "Z", Z)
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return self.Z.shape[0]

    @property
    def p(self) -> int:
        return self.Z.shape[1]

    def centered(self) -> "GpDataset":
        """Responses shifted to sample mean zero; the shift is kept in ``y_offset``."""
        m = float(np.mean(self.y))
        return GpDataset(self.Z, self.y - m, self.y_offset + m)


def read_dataset(path, center: bool = True) -> GpDataset:
    """Load a ``z1..zp,y`` CSV file."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    p = len(header) - 1
    if p < 1 or header != [f"z{h}" for h in range(1, p + 1)] + ["y"]:
        raise ValueError(f"{path}: header must be z1..zp,y, got {header}")
    data = np.array([[float(v) for v in row] for row in rows[1:] if row], dtype=np.float64)
    if data.ndim != 2 or data.shape[1] != p + 1:
        raise ValueError(f"{path}: ragged rows")
    ds = GpDataset(data[:, :p], data[:, p])
    return ds.centered() if center else ds


def write_dataset(path, Z, y):
    Z = np.asarray(Z)
    with open(path, "w", newline="") as fh:
        fh.write(",".join([f"z{h}" for h in range(1, Z.shape[1] + 1)] + ["y"]) + "\n")
        for zi, yi in zip(Z, y):
            fh.write(",".join(repr(float(v)) for v in (*zi, yi)) + "\n")


@dataclass(frozen=True)
class GpHyperParams:
    log_eta: float
    log_sigma: float
    log_nu: np.ndarray

    def __post_init__(self):
        nu = np.array(self.log_nu, dtype=np.float64).reshape(-1)
        nu.flags.writeable = False
        object.__setattr__(self, "log_nu", nu)

    @property
    def log_psi(self) -> float:
        return self.log_sigma - self.log_eta

    @classmethod
    def from_psi(cls, log_eta, log_psi, log_nu):
        return cls(log_eta, log_psi + log_eta, log_nu)


@dataclass(frozen=True)
class GpSlowPayloadChol:
    logdet_base: float
    quad_base: float


@dataclass(frozen=True)
class GpSlowPayloadEig:
    lambdas: np.ndarray
    u: np.ndarray
    clamped: int = 0


def build_upsilon(spec: GpModelSpec, data: GpDataset, log_nu) -> np.ndarray:
    """``Upsilon' = Upsilon + r^2 I``; the diagonal is exactly ``a^2 + 1 + r^2``."""
    nu = np.exp(np.asarray(log_nu, dtype=np.float64))
    a2 = spec.a * spec.a
    if data.n == 1:
        return np.array([[a2 + 1.0 + spec.r**2]])
    d2 = pdist(data.Z * nu, "sqeuclidean")
    ups = squareform(np.exp(-d2))
    ups += a2
    np.fill_diagonal(ups, a2 + 1.0 + spec.r**2)
    return ups


def _log_normal(x, mean, sd):
    z = (x - mean) / sd
    return -0.5 * z * z - math.log(sd) - 0.5 * math.log(2 * math.pi)


def log_prior_nu(spec: GpModelSpec, log_nu) -> float:
    """Equicorrelated Gaussian log density, via the analytic inverse of ``(1-c)I + c 11'``."""
    mean, sd, c = spec.prior_log_nu
    d = (np.asarray(log_nu, dtype=np.float64) - mean) / sd
    p = d.shape[0]
    lam = 1.0 + (p - 1) * c
    quad = (float(d @ d) - c / lam * float(d.sum()) ** 2) / (1.0 - c)
    logdet = 2 * p * math.log(sd) + (p - 1) * math.log(1.0 - c) + math.log(lam)
    return -0.5 * quad - 0.5 * logdet - 0.5 * p * math.log(2 * math.pi)


def log_prior(spec: GpModelSpec, params: GpHyperParams) -> float:
    return (
        _log_normal(params.log_sigma, *spec.prior_log_sigma)
        + _log_normal(params.log_eta, *spec.prior_log_eta)
        + log_prior_nu(spec, params.log_nu)
    )


def gp_loglik_chol(payload: GpSlowPayloadChol, n: int, log_eta):
    """Log likelihood from cached Cholesky quantities, for any ``log eta`` (scalar or array)."""
    log_eta = np.asarray(log_eta, dtype=np.float64)
    out = -n * log_eta - 0.5 * payload.logdet_base - 0.5 * payload.quad_base * np.exp(-2.0 * log_eta)
    return float(out) if out.ndim == 0 else out


def gp_loglik_eig(payload: GpSlowPayloadEig, log_eta, log_sigma):
    """Log likelihood from cached eigenvalues and projections.

    Vectorized over matching arrays of ``log eta``/``log sigma``.  Rows in
    which some variance ``eta^2 lambda_i + sigma^2`` is not positive get
    ``-inf``; if no variance at all is positive, raises
    :class:`NonPositiveVariance`.
    """
    le = np.asarray(log_eta, dtype=np.float64)
    ls = np.asarray(log_sigma, dtype=np.float64)
    scalar = le.ndim == 0 and ls.ndim == 0
    le, ls = np.broadcast_arrays(np.atleast_1d(le), np.atleast_1d(ls))
    v = np.exp(2.0 * le)[:, None] * payload.lambdas + np.exp(2.0 * ls)[:, None]
    ok = v > 0
    if not ok.any():
        raise NonPositiveVariance("every variance is non-positive")
    rows_ok = ok.all(axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = -0.5 * np.sum(np.log(v), axis=1) - 0.5 * np.sum(payload.u**2 / v, axis=1)
    out = np.where(rows_ok, out, -np.inf)
    return float(out[0]) if scalar else out


def eig_payload(upsilon, y, eigensolver: str = "lapack") -> GpSlowPayloadEig:
    """Eigenvalues of ``Upsilon'`` and projections of ``y`` onto its eigenvectors.

    Negative eigenvalues (round-off on a nearly singular matrix) are
    clamped to zero and counted.
    """
    if eigensolver == "jacobi":
        dec = numlin.sym_eigen(upsilon)
        lam, vec = np.array(dec.values), dec.vectors
    elif eigensolver == "lapack":
        lam, vec = scipy.linalg.eigh(upsilon, driver="evd", check_finite=False)
    else:
        raise ValueError(f"unknown eigensolver {eigensolver!r}")
    neg = lam < 0
    clamped = int(neg.sum())
    if clamped:
        if np.any(lam < -1e-10 * lam.max()):
            warnings.warn("eigenvalue clamp applied to a substantially negative eigenvalue")
        lam = np.where(neg, 0.0, lam)
    return GpSlowPayloadEig(lam, vec.T @ y, clamped)


def gp_predict(spec: GpModelSpec, data: GpDataset, params: GpHyperParams, z_star, diagnostics: dict = None):
    """Predictive mean and variance of a new response at ``z_star``.

    Uses ``Sigma = eta^2 Upsilon' + sigma^2 I`` and
    ``v = C(z*, z*) + sigma^2``.  A negative variance from round-off is
    clamped to 0 and counted in ``diagnostics['clamped']``.
    """
    z_star = np.asarray(z_star, dtype=np.float64).reshape(-1)
    if z_star.shape[0] != data.p:
        raise numlin.DimensionMismatch(f"z_star has length {z_star.shape[0]}, expected {data.p}")
    eta2 = math.exp(2 * params.log_eta)
    sig2 = math.exp(2 * params.log_sigma)
    nu = np.exp(params.log_nu)
    a2 = spec.a * spec.a
    sigma = eta2 * build_upsilon(spec, data, params.log_nu) + sig2 * np.eye(data.n)
    f = numlin.cholesky(sigma)
    diff = (data.Z - z_star) * nu
    k = eta2 * (a2 + np.exp(-np.sum(diff * diff, axis=1)))
    v = eta2 * (a2 + 1.0) + sig2
    u = numlin.forward_solve(f, data.y)
    w = numlin.forward_solve(f, k)
    mean = float(w @ u)
    var = v - float(w @ w)
    if var < 0:
        var = 0.0
        if diagnostics is not None:
            diagnostics["clamped"] = diagnostics.get("clamped", 0) + 1
    return mean, var


class _GpTarget(FastSlowTarget):
    def __init__(self, spec: GpModelSpec, data: GpDataset):
        super().__init__()
        self.spec = spec
        self.data = data
        self.p = data.p
        self.n = data.n

    def upsilon_flops(self) -> int:
        n, p = self.n, self.p
        return n * (n - 1) // 2 * (3 * p + 1) + n * n

    def init_point(self) -> FastSlowPoint:
        """Prior means (the log of each prior median)."""
        return self.point_from_params(
            GpHyperParams(self.spec.prior_log_eta[0], self.spec.prior_log_sigma[0],
                          np.full(self.p, self.spec.prior_log_nu[0]))
        )

    def log_posterior(self, params: GpHyperParams) -> float:
        return self.full_log_density(self.point_from_params(params))

    def trace_values(self, point):
        prm = self.to_params(point)
        nu = prm.log_nu
        top = nu.max()
        mean_log_nu = top + math.log(float(np.mean(np.exp(nu - top))))
        return mean_log_nu, prm.log_eta, prm.log_sigma


class GpCholTarget(_GpTarget):
    """Cholesky factorization; slow ``(log nu_1..p, log psi)``, fast ``(log eta,)``."""

    def __init__(self, spec, data):
        super().__init__(spec, data)
        self.d_slow = self.p + 1
        self.d_fast = 1
        self.slow_names = tuple(f"log_nu{h}" for h in range(1, self.p + 1)) + ("log_psi",)
        self.fast_names = ("log_eta",)

    def slow_cost(self):
        n = self.n
        return self.upsilon_flops() + n * n * n // 3 + n * n

    def fast_cost(self):
        return 20

    def to_params(self, point):
        return GpHyperParams.from_psi(point.fast[0], point.slow[-1], point.slow[:-1])

    def point_from_params(self, params):
        return FastSlowPoint(np.append(params.log_nu, params.log_psi), [params.log_eta])

    def _slow(self, slow):
        log_nu, log_psi = slow[:-1], slow[-1]
        a = build_upsilon(self.spec, self.data, log_nu)
        a[np.diag_indices_from(a)] += math.exp(2.0 * log_psi)
        try:
            f = numlin.cholesky(a)
        except numlin.NotPositiveDefinite:
            return None
        lik = GpSlowPayloadChol(numlin.chol_logdet(f), numlin.chol_quadform(f, self.data.y))
        return lik, float(log_psi), log_prior_nu(self.spec, log_nu)

    def _fast(self, payload, fast):
        lik, log_psi, prior_nu = payload
        le = fast[:, 0]
        ms, ss = self.spec.prior_log_sigma
        me, se = self.spec.prior_log_eta
        zs = (log_psi + le - ms) / ss
        ze = (le - me) / se
        const = prior_nu - math.log(ss * se) - math.log(2 * math.pi)
        return const - 0.5 * (zs * zs + ze * ze) + gp_loglik_chol(lik, self.n, le)


class GpEigTarget(_GpTarget):
    """Eigendecomposition; slow ``(log nu_1..p)``, fast ``(log eta, log sigma)``."""

    def __init__(self, spec, data, eigensolver: str = "lapack"):
        super().__init__(spec, data)
        self.d_slow = self.p
        self.d_fast = 2
        self.slow_names = tuple(f"log_nu{h}" for h in range(1, self.p + 1))
        self.fast_names = ("log_eta", "log_sigma")
        self.eigensolver = eigensolver

    def slow_cost(self):
        # eigenvectors cost about fifteen Cholesky factorizations
        n = self.n
        return self.upsilon_flops() + 5 * n * n * n + n * n

    def fast_cost(self):
        return 6 * self.n + 20

    def to_params(self, point):
        return GpHyperParams(point.fast[0], point.fast[1], point.slow)

    def point_from_params(self, params):
        return FastSlowPoint(params.log_nu, [params.log_eta, params.log_sigma])

    def _slow(self, slow):
        ups = build_upsilon(self.spec, self.data, slow)
        pay = eig_payload(ups, self.data.y, self.eigensolver)
        self.counters.eig_clamps += pay.clamped
        return pay, log_prior_nu(self.spec, slow)

    def _fast(self, payload, fast):
        lik, prior_nu = payload
        le, ls = fast[:, 0], fast[:, 1]
        ms, ss = self.spec.prior_log_sigma
        me, se = self.spec.prior_log_eta
        zs = (ls - ms) / ss
        ze = (le - me) / se
        const = prior_nu - math.log(ss * se) - math.log(2 * math.pi)
        try:
            ll = gp_loglik_eig(lik, le, ls)
        except NonPositiveVariance:
            return np.full(fast.shape[0], -np.inf)
        return const - 0.5 * (zs * zs + ze * ze) + ll


class GpDirectTarget(_GpTarget):
    """Plain Cholesky of ``Sigma``; every parameter slow: ``(log nu, log eta, log sigma)``.

    The reference parameterization for proposals that move all parameters
    at once.
    """

    def __init__(self, spec, data):
        super().__init__(spec, data)
        self.d_slow = self.p + 2
        self.d_fast = 0
        self.slow_names = tuple(f"log_nu{h}" for h in range(1, self.p + 1)) + ("log_eta", "log_sigma")

    def slow_cost(self):
        n = self.n
        return self.upsilon_flops() + n * n * n // 3 + n * n

    def to_params(self, point):
        return GpHyperParams(point.slow[-2], point.slow[-1], point.slow[:-2])

    def point_from_params(self, params):
        return FastSlowPoint(np.append(params.log_nu, [params.log_eta, params.log_sigma]), [])

    def _slow(self, slow):
        prm = self.to_params(FastSlowPoint(slow, []))
        sig = math.exp(2.0 * prm.log_eta) * build_upsilon(self.spec, self.data, prm.log_nu)
        sig[np.diag_indices_from(sig)] += math.exp(2.0 * prm.log_sigma)
        try:
            f = numlin.cholesky(sig)
        except numlin.NotPositiveDefinite:
            return None
        ll = -0.5 * numlin.chol_logdet(f) - 0.5 * numlin.chol_quadform(f, self.data.y)
        return ll + log_prior(self.spec, prm)

    def _fast(self, payload, fast):
        return np.full(fast.shape[0], payload)
