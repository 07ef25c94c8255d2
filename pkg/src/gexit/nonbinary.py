"""GEXIT of a non-binary complex-input AWGN channel with a priori symbol knowledge.

g = A / B where, for each true symbol xi,

    R1(y, phi, xi) = (|y - xi|^2 - D s^2) log2 sum_xi' (phi_xi' / phi_xi) exp((|y - xi|^2 - |y - xi'|^2) / (2 s^2))

is averaged over the noise by a tensor Gauss-Hermite rule (R2), then over the
a priori vectors phi by Monte Carlo (A), or evaluated at uniform phi (B).
``s`` is the per-dimension noise standard deviation and D the number of real
noise dimensions.
"""

from __future__ import annotations

from dataclasses import dataclass
import math

import numpy as np
from scipy.special import logsumexp

from .channel import Constellation
from .core import DEFAULT_DEGREE, LN2, NumericalError, QuadratureRule, hermite_rule, j_inverse_clipped


@dataclass(frozen=True)
class PhiSample:
    phi: np.ndarray
    symbol: int

    def __post_init__(self):
        p = np.asarray(self.phi, dtype=float)
        if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-9:
            raise ValueError("phi must be a probability vector")


def _per_dim_std(constellation: Constellation, sigma: float) -> float:
    return sigma if constellation.real else sigma / math.sqrt(2.0)


def _nodes(constellation: Constellation, s: float, rule: QuadratureRule):
    """Noise offsets, normalized weights and the |o|^2 - D s^2 factor."""
    k, w = rule.nodes, rule.weights
    if constellation.real:
        off = math.sqrt(2.0) * s * k.astype(complex)
        wt = w / math.sqrt(math.pi)
        dims = 1
    else:
        off = (math.sqrt(2.0) * s * (k[:, None] + 1j * k[None, :])).ravel()
        wt = (w[:, None] * w[None, :]).ravel() / math.pi
        dims = 2
    return off, wt, np.abs(off) ** 2 - dims * s * s


def log_phi(constellation: Constellation, prior_llrs: np.ndarray) -> np.ndarray:
    """log P(X = xi_l) from per-bit a priori LLRs (N, m) -> (N, |X|)."""
    sb = 1.0 - 2.0 * constellation.labels.astype(float)  # (|X|, m)
    return -np.sum(np.logaddexp(0.0, -prior_llrs[:, None, :] * sb[None, :, :]), axis=2)


def _r2(constellation: Constellation, t: int, lphi: np.ndarray, s: float, off, wt, fac) -> np.ndarray:
    """R2(phi_i, xi_t, sigma) for every row of ``lphi``."""
    y = constellation.symbols[t] + off
    q = -np.abs(y[None, :] - constellation.symbols[:, None]) ** 2 / (2.0 * s * s)  # (|X|, nodes)
    qmax = q.max(axis=0)
    lmax = lphi.max(axis=1)
    with np.errstate(divide="ignore"):
        lse = np.log(np.exp(lphi - lmax[:, None]) @ np.exp(q - qmax[None, :]))
    bad = ~np.isfinite(lse).all(axis=1)
    if np.any(bad):
        lse[bad] = logsumexp(lphi[bad][:, :, None] + q[None, :, :], axis=1) - qmax[None, :] - lmax[bad][:, None]
    log_ratio = lse + lmax[:, None] + qmax[None, :] - lphi[:, t][:, None] - q[t][None, :]
    return (log_ratio * (fac * wt)[None, :]).sum(axis=1) / LN2


def gexit_b(constellation: Constellation, sigma: float, rule: QuadratureRule | int = DEFAULT_DEGREE) -> float:
    rule = hermite_rule(rule) if isinstance(rule, int) else rule
    s = _per_dim_std(constellation, sigma)
    off, wt, fac = _nodes(constellation, s, rule)
    uniform = np.full((1, constellation.size), -math.log(constellation.size))
    return float(sum(_r2(constellation, t, uniform, s, off, wt, fac)[0] for t in range(constellation.size)))


def gexit_nonbinary_point(constellation: Constellation, sigma: float, i_ad: float,
                          rule: QuadratureRule | int = DEFAULT_DEGREE, n_mc: int = 10_000, seed: int = 0) -> float:
    """A(h) / B(h) at noise level ``sigma`` and detector a priori MI ``i_ad``."""
    if not 0.0 <= i_ad <= 1.0:
        raise ValueError("a priori MI must lie in [0, 1]")
    rule = hermite_rule(rule) if isinstance(rule, int) else rule
    s = _per_dim_std(constellation, sigma)
    off, wt, fac = _nodes(constellation, s, rule)
    b = gexit_b(constellation, sigma, rule)
    if b == 0.0 or not math.isfinite(b):
        raise NumericalError(f"degenerate normalization B={b} at sigma={sigma}")
    sd = float(j_inverse_clipped(i_ad))
    while True:
        rng = np.random.default_rng(seed)
        idx = rng.integers(0, constellation.size, n_mc)
        if np.all(np.bincount(idx, minlength=constellation.size) > 0):
            break
        n_mc *= 2
    signs = 1.0 - 2.0 * constellation.labels[idx].astype(float)
    llr = signs * (0.5 * sd * sd + sd * rng.standard_normal(signs.shape))
    lphi = log_phi(constellation, llr)
    a = 0.0
    for t in range(constellation.size):
        a += float(np.mean(_r2(constellation, t, lphi[idx == t], s, off, wt, fac)))
    g = a / b
    if not math.isfinite(g):
        raise NumericalError("non-finite GEXIT value")
    return g


def gexit_binary_reference(sigma: float, i_ad: float, rule: QuadratureRule | int = DEFAULT_DEGREE) -> float:
    """The same quantity for real BPSK through the binary AWGN kernel."""
    from .core import gaussian_expectation
    from .kernel import kernel_from_mean

    m = 0.5 * float(j_inverse_clipped(i_ad)) ** 2
    return float(gaussian_expectation(m, 2.0 * m, lambda z: kernel_from_mean(2.0 / sigma**2, z), rule))
