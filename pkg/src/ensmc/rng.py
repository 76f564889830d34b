"""Reproducible random streams.

Every chain draws from its own :class:`RngStream`, a Philox4x64-10
counter-based generator keyed by ``(seed, stream)``.  Only the raw 64-bit
words of the bit generator are used; uniforms, normals and categorical
draws are derived here so the sequence does not depend on the version of
numpy's ``Generator`` methods.

Known-answer vector (Random123 ``kat_vectors``, philox4x64-10, zero key,
zero counter)::

    16554d9eca36314c db20fe9d672d0fdc d7e772cee186176b 7e68b68aec7ba23b

numpy's Philox increments the counter before each block, so a stream
started at counter ``2**256 - 1`` reproduces that vector (see
:func:`philox_block`).
"""

import math

import numpy as np

ALGORITHM = "philox4x64-10"

_MASK64 = (1 << 64) - 1
_TWO_M53 = 2.0**-53

# Wichura (1988), algorithm AS 241, PPND16.
_A = (3.3871328727963666080e0, 1.3314166789178437745e2, 1.9715909503065514427e3,
      1.3731693765509461125e4, 4.5921953931549871457e4, 6.7265770927008700853e4,
      3.3430575583588128105e4, 2.5090809287301226727e3)
_B = (1.0, 4.2313330701600911252e1, 6.8718700749205790830e2, 5.3941960214247511077e3,
      2.1213794301586595867e4, 3.9307895800092710610e4, 2.8729085735721942674e4,
      5.2264952788528545610e3)
_C = (1.42343711074968357734e0, 4.63033784615654529590e0, 5.76949722146069140550e0,
      3.64784832476320460504e0, 1.27045825245236838258e0, 2.41780725177450611770e-1,
      2.27238449892691845833e-2, 7.74545014278341407640e-4)
_D = (1.0, 2.05319162663775882187e0, 1.67638483018380384940e0, 6.89767334985100004550e-1,
      1.48103976427480074590e-1, 1.51986665636164571966e-2, 5.47593808499534494600e-4,
      1.05075007164441684324e-9)
_E = (6.65790464350110377720e0, 5.46378491116411436990e0, 1.78482653991729133580e0,
      2.96560571828504891230e-1, 2.65321895265761230930e-2, 1.24266094738807843860e-3,
      2.71155556874348757815e-5, 2.01033439929228813265e-7)
_F = (1.0, 5.99832206555887937690e-1, 1.36929880922735805310e-1, 1.48753612908506148525e-2,
      7.86869131145613259100e-4, 1.84631831751005468180e-5, 1.42151175831644588870e-7,
      2.04426310338993978564e-15)


def _horner(coefs, r):
    out = coefs[-1]
    for c in coefs[-2::-1]:
        out = out * r + c
    return out


def norm_ppf(u):
    """Standard normal quantile function (AS 241), vectorized.

    Accurate to about 1e-16 relative; ``u`` must lie strictly in (0, 1).
    """
    u = np.asarray(u, dtype=np.float64)
    q = u - 0.5
    out = np.empty_like(q)

    central = np.abs(q) <= 0.425
    if np.any(central):
        qc = q[central]
        r = 0.180625 - qc * qc
        out[central] = qc * _horner(_A, r) / _horner(_B, r)

    tail = ~central
    if np.any(tail):
        qt = q[tail]
        r = np.where(qt < 0, u[tail], 1.0 - u[tail])
        r = np.sqrt(-np.log(r))
        near = r <= 5.0
        x = np.empty_like(r)
        rn = r[near] - 1.6
        x[near] = _horner(_C, rn) / _horner(_D, rn)
        rf = r[~near] - 5.0
        x[~near] = _horner(_E, rf) / _horner(_F, rf)
        out[tail] = np.where(qt < 0, -x, x)
    return out


def philox_block(key=(0, 0), counter=(0, 0, 0, 0)):
    """Return the four output words of one Philox4x64-10 block.

    Used to check the bit generator against published known-answer vectors.
    """
    c = sum(int(w) << (64 * i) for i, w in enumerate(counter))
    c = (c - 1) % (1 << 256)
    words = np.array([(c >> (64 * i)) & _MASK64 for i in range(4)], dtype=np.uint64)
    bg = np.random.Philox(key=np.array(key, dtype=np.uint64), counter=words)
    return [int(w) for w in bg.random_raw(4)]


class RngStream:
    """One reproducible stream of random draws.

    Parameters
    ----------
    seed : int
        64-bit seed, the first key word.
    stream : int
        64-bit stream id, the second key word.  Streams with the same seed
        and different ids are independent.
    """

    algorithm = ALGORITHM

    def __init__(self, seed: int, stream: int = 0):
        if not (0 <= seed <= _MASK64 and 0 <= stream <= _MASK64):
            raise ValueError("seed and stream must be 64-bit unsigned integers")
        self.seed = int(seed)
        self.stream = int(stream)
        self._bg = np.random.Philox(key=np.array([self.seed, self.stream], dtype=np.uint64))

    def __repr__(self):
        return f"RngStream(seed={self.seed}, stream={self.stream})"

    def spawn(self, stream: int) -> "RngStream":
        return RngStream(self.seed, stream)

    def raw(self, size=None):
        return self._bg.random_raw(size)

    def uniform(self, size=None):
        """Uniform draws on the open interval (0, 1), 53 bits each."""
        if size is None:
            return ((int(self._bg.random_raw()) >> 11) + 0.5) * _TWO_M53
        words = self._bg.random_raw(size)
        return ((words >> np.uint64(11)).astype(np.float64) + 0.5) * _TWO_M53

    def normal(self, size=None):
        """Standard normal draws by inversion, one uniform per variate."""
        if size is None:
            return float(norm_ppf(self.uniform())[()])
        return norm_ppf(self.uniform(size))

    def integers(self, n: int) -> int:
        """Uniform integer on ``0 .. n-1``."""
        if n < 1:
            raise ValueError("n must be positive")
        return min(int(self.uniform() * n), n - 1)

    def categorical(self, logweights) -> int:
        """Index drawn with probability proportional to ``exp(logweights)``.

        Inverse CDF over the cumulative weights with a single uniform.
        """
        lw = np.asarray(logweights, dtype=np.float64)
        top = lw.max()
        if not np.isfinite(top):
            raise ValueError("no finite log weight")
        cdf = np.cumsum(np.exp(lw - top))
        idx = int(np.searchsorted(cdf, self.uniform() * cdf[-1], side="right"))
        return min(idx, lw.size - 1)

    def accept(self, log_ratio: float) -> bool:
        """Metropolis decision: true with probability ``min(1, exp(log_ratio))``."""
        u = self.uniform()
        if math.isnan(log_ratio):
            return False
        return math.log(u) < log_ratio
