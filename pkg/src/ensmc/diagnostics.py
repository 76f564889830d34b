"""Chain diagnostics: mode switches and effective sample size."""

import math

import numpy as np


def mode_switch_count(values, threshold: float) -> int:
    """Crossings of ``threshold`` between consecutive values (``>=`` counts as above)."""
    v = np.asarray(values, dtype=np.float64)
    above = v >= threshold
    return int(np.count_nonzero(above[1:] != above[:-1]))


def autocorrelation(x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    n = x.shape[0]
    d = x - x.mean()
    size = 1 << (2 * n - 1).bit_length()
    f = np.fft.rfft(d, size)
    acov = np.fft.irfft(f * np.conj(f), size)[:n]
    if acov[0] <= 0:
        return np.zeros(n)
    return acov / acov[0]


def ess(series) -> float:
    """Effective sample size by Geyer's initial positive sequence.

    Autocorrelations are summed in adjacent pairs until the first pair with
    a non-positive sum.  The result is clamped to ``[1, N]``; a constant
    series gives 1.
    """
    x = np.asarray(series, dtype=np.float64)
    n = x.shape[0]
    if n < 10:
        raise ValueError("ess needs at least 10 values")
    if not np.all(np.isfinite(x)):
        raise ValueError("ess needs finite values")
    if np.ptp(x) == 0:
        return 1.0
    rho = autocorrelation(x)
    tau = -1.0
    for m in range(n // 2):
        pair = rho[2 * m] + rho[2 * m + 1]
        if pair <= 0:
            break
        tau += 2.0 * pair
    return float(min(max(n / tau, 1.0), n)) if tau > 0 else float(n)
