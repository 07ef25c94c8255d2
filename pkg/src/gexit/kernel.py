"""GEXIT kernels for the binary-input AWGN channel and BICM mixtures."""

from __future__ import annotations

import math

import numpy as np
from numpy.polynomial import polynomial as P
from scipy.special import logsumexp

from .channel import LDensityMixture, sigma_from_entropy
from .core import NumericalError

# Below this LLR mean the channel density is treated as a point mass at 0.
_MU_EPS = 1e-10


def _log_sigmoid_neg(x):
    """log(1 / (1 + e^x))."""
    return -np.logaddexp(0.0, x)


def kernel_from_mean(mu: float, z):
    """BAWGN GEXIT kernel for channel L-density N(mu, 2 mu).

    l(z) = E[1/(1+e^{W+z})] / E[1/(1+e^W)], W ~ N(mu, 2 mu). Both integrals
    are summed on a common uniform grid in the log domain, so the ratio is
    exactly 1 at z = 0 and never underflows.
    """
    z = np.asarray(z, dtype=float)
    if not math.isfinite(mu) or mu < 0:
        raise ValueError(f"channel LLR mean must be finite and >= 0, got {mu}")
    if np.any(np.isnan(z)):
        raise NumericalError("NaN kernel argument")
    if mu < _MU_EPS:
        out = np.exp(_log_sigmoid_neg(z) + math.log(2.0))
        return out if out.ndim else float(out)
    std = math.sqrt(2.0 * mu)
    step = min(std, 1.0) / 4.0
    half = 13.0 * std
    n = int(math.ceil(half / step))
    w = mu + step * np.arange(-n, n + 1)
    logpdf = -((w - mu) ** 2) / (2.0 * std * std)
    den = logsumexp(logpdf + _log_sigmoid_neg(w))
    num = logsumexp(logpdf + _log_sigmoid_neg(w + z[..., None]), axis=-1)
    out = np.exp(num - den)
    if not np.all(np.isfinite(out)):
        raise NumericalError("kernel evaluation overflowed")
    return out if out.ndim else float(out)


def bawgn_mean(h: float) -> float:
    """Channel LLR mean 2/sigma^2 of BAWGN with entropy h."""
    if h >= 1.0:
        return 0.0
    sigma = sigma_from_entropy(h)
    return 2.0 / sigma**2


def bawgn_kernel_exact(h: float, z):
    if not 0.0 < h < 1.0:
        raise ValueError("entropy must lie in (0, 1)")
    return kernel_from_mean(bawgn_mean(h), z)


# Fit coefficients of the piecewise surrogate, constant term first.
_FAST_COEFFS = {
    "L": [-38, 467, -5817, 44333, -207094, 614716, -1181473, 1463798, -1127499, 490818, -92218],
    "M": [1, 136, -1837, 14322, -68054, 205453, -401852, 506819, -397298, 175895, -33578],
    "A0": [0, -0.33, 1.19, -22.38, 146.66, -538.70, 1195.44, -1634.10, 1344.72, -610.96, 117.76],
    "A1": [0, 0.01, 3.18, -22.90, 98.69, -262.89, 453.43, -512.31, 369.42, -155.08, 28.89],
    "A2": [0, -0.11, 0.88, -6.78, 31.50, -93.03, 175.60, -210.31, 154.13, -62.92, 10.94],
    "A3": [0, 0.01, -0.04, 0.29, -1.11, 2.44, -2.78, 0.85, 1.47, -1.58, 0.47],
}


def fast_f(h: float, z):
    """Piecewise-exponential surrogate of E[1/(1+e^{W+z})], clamped to [0, 1]."""
    z = np.asarray(z, dtype=float)
    c = {k: P.polyval(h, v) for k, v in _FAST_COEFFS.items()}
    expo = ((c["A3"] * z + c["A2"]) * z + c["A1"]) * z + c["A0"]
    mid = 1.0 - np.exp(np.minimum(expo, 700.0))
    out = np.where(z <= c["L"], 1.0, np.where(z >= c["M"], 0.0, mid))
    return np.clip(out, 0.0, 1.0)


def bawgn_kernel_fast(h: float, z):
    if not 0.0 < h < 1.0:
        raise ValueError("entropy must lie in (0, 1)")
    f0 = float(fast_f(h, 0.0))
    if f0 <= 0.0:
        raise NumericalError(f"surrogate vanishes at z=0 for h={h}")
    out = fast_f(h, z) / f0
    return out if out.ndim else float(out)


def bicm_kernel(mix: LDensityMixture, z, fast: bool = False):
    """Mixture kernel: sum_j d_j l_{BAWGN(h_j)}(z)."""
    z = np.asarray(z, dtype=float)
    total = np.zeros_like(z)
    wsum = 0.0
    if fast:
        hs = mix.component_entropies()
        for w, h in zip(mix.weights, hs):
            h = min(max(h, 1e-9), 1 - 1e-9)
            total = total + w * bawgn_kernel_fast(h, z)
            wsum += w
    else:
        for w, mu in zip(mix.weights, mix.means):
            total = total + w * kernel_from_mean(mu, z)
            wsum += w
    # same summation order as total, so the value at z = 0 is exactly 1
    total = total / wsum
    return total if total.ndim else float(total)


def kernel_gap(hs=None, zs=None) -> float:
    """Sup-norm distance between the surrogate and the exact kernel."""
    hs = np.round(np.arange(0.1, 0.95, 0.1), 10) if hs is None else hs
    zs = np.linspace(-30, 30, 601) if zs is None else zs
    return float(max(np.max(np.abs(bawgn_kernel_fast(h, zs) - bawgn_kernel_exact(h, zs))) for h in hs))
