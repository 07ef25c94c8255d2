"""Numerical substrate: J-function, Gauss-Hermite rules, Gaussian expectations
and mutual-information estimation from LLR samples."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
import math

import numpy as np

LN2 = math.log(2.0)

# J^{-1} search interval; a std-dev above this is treated as perfect MI.
S_MAX = 60.0
J_DEGREE = 40
DEFAULT_DEGREE = 20


class NumericalError(ArithmeticError):
    """Raised when a quadrature or kernel evaluation produces non-finite values."""


@dataclass(frozen=True)
class ConsistentGaussian:
    """Symmetric L-density N(mean, 2*mean)."""

    mean: float

    def __post_init__(self):
        if not (self.mean >= 0.0) or not math.isfinite(self.mean):
            raise ValueError(f"consistent Gaussian needs a finite mean >= 0, got {self.mean}")

    @property
    def variance(self) -> float:
        return 2.0 * self.mean

    @property
    def std(self) -> float:
        return math.sqrt(2.0 * self.mean)

    @classmethod
    def from_mi(cls, mi: float) -> "ConsistentGaussian":
        s = j_inverse(mi) if mi < 1.0 else S_MAX
        return cls(0.5 * s * s)

    def mi(self) -> float:
        return float(j_function(self.std))

    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        """LLR samples conditioned on the all-zero (+1) transmitted bit."""
        return self.mean + self.std * rng.standard_normal(size)


@dataclass(frozen=True)
class QuadratureRule:
    degree: int
    nodes: np.ndarray
    weights: np.ndarray


def _log_abs_hermite(n: int, x: np.ndarray) -> np.ndarray:
    """log|H_n(x)| for the physicists' Hermite polynomial, via a scaled recurrence."""
    x = np.asarray(x, dtype=float)
    if n == 0:
        return np.zeros_like(x)
    # H_{k+1} = 2x H_k - 2k H_{k-1}; rescale after each step to avoid overflow.
    h_prev = np.ones_like(x)
    h_cur = 2.0 * x
    log_scale = np.zeros_like(x)
    for k in range(1, n):
        h_next = 2.0 * x * h_cur - 2.0 * k * h_prev
        scale = np.maximum(np.abs(h_next), 1e-300)
        h_prev = h_cur / scale
        h_cur = h_next / scale
        log_scale += np.log(scale)
    return log_scale + np.log(np.abs(h_cur))


@lru_cache(maxsize=None)
def hermite_rule(d: int) -> QuadratureRule:
    """Gauss-Hermite rule for weight exp(-x^2).

    Nodes are the roots of H_d; weights follow
    w_i = 2^(d-1) d! sqrt(pi) / (d^2 H_{d-1}(k_i)^2).
    """
    if not isinstance(d, (int, np.integer)) or not 1 <= d <= 100:
        raise ValueError(f"quadrature degree must be an integer in [1, 100], got {d!r}")
    d = int(d)
    nodes, _ = np.polynomial.hermite.hermgauss(d)
    nodes = 0.5 * (nodes - nodes[::-1])  # exact symmetry
    log_w = (
        (d - 1) * LN2
        + math.lgamma(d + 1)
        + 0.5 * math.log(math.pi)
        - 2.0 * math.log(d)
        - 2.0 * _log_abs_hermite(d - 1, nodes)
    )
    weights = np.exp(log_w)
    weights = 0.5 * (weights + weights[::-1])
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return QuadratureRule(d, nodes, weights)


def gaussian_expectation(mean, var, f, rule: QuadratureRule | int = DEFAULT_DEGREE):
    """E[f(Z)] for Z ~ N(mean, var) by Gauss-Hermite quadrature.

    ``mean`` and ``var`` may be arrays; ``f`` must accept an array of nodes
    shaped ``mean.shape + (d,)``.
    """
    if not isinstance(rule, QuadratureRule):
        rule = hermite_rule(rule)
    mean = np.asarray(mean, dtype=float)
    var = np.asarray(var, dtype=float)
    if not (np.all(np.isfinite(mean)) and np.all(np.isfinite(var))) or np.any(var < 0):
        raise ValueError("mean and variance must be finite with var >= 0")
    z = np.sqrt(2.0 * var)[..., None] * rule.nodes + mean[..., None]
    vals = np.asarray(f(z), dtype=float)
    if not np.all(np.isfinite(vals)):
        raise NumericalError("integrand is not finite at a quadrature node")
    return (vals @ rule.weights) / math.sqrt(math.pi)


def _softplus_neg(x):
    """log(1 + exp(-x)), overflow-safe."""
    return np.logaddexp(0.0, -x)


def j_function(s):
    """Mutual information of a consistent Gaussian L-density with std-dev ``s``.

    J(s) = 1 - E[log2(1 + e^{-L})], L ~ N(s^2/2, s^2).
    """
    s = np.asarray(s, dtype=float)
    if np.any(s < 0) or np.any(np.isnan(s)):
        raise ValueError("J-function argument must be >= 0")
    sc = np.minimum(s, 2.0 * S_MAX)
    rule = hermite_rule(J_DEGREE)
    z = sc[..., None] * math.sqrt(2.0) * rule.nodes + (0.5 * sc * sc)[..., None]
    ent = (_softplus_neg(z) @ rule.weights) / (math.sqrt(math.pi) * LN2)
    out = np.clip(1.0 - ent, 0.0, 1.0)
    # 1 - ent cancels for tiny s; use the series J(s) = s^2 (1 - s^2/8) / (8 ln 2) + O(s^6)
    small = s < 1e-3
    out = np.where(small, s * s * (1.0 - s * s / 8.0) / (8.0 * LN2), out)
    return out if out.ndim else float(out)


def _j_inverse_scalar(mi: float, tol: float) -> float:
    lo, hi = 0.0, S_MAX
    if mi >= j_function(hi):
        return hi
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if j_function(mid) < mi:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def j_inverse(mi, tol: float = 1e-10):
    """Std-dev s with J(s) = mi, by bisection on [0, 60].

    ``mi == 1`` has no finite preimage and is rejected; callers treat perfect
    MI separately.
    """
    arr = np.asarray(mi, dtype=float)
    if np.any(np.isnan(arr)) or np.any(arr < 0.0) or np.any(arr > 1.0):
        raise ValueError("J^{-1} argument must lie in [0, 1)")
    if np.any(arr >= 1.0):
        raise ValueError("J^{-1}(1) is unbounded; special-case perfect MI")
    if arr.ndim == 0:
        return 0.0 if arr == 0 else _j_inverse_scalar(float(arr), tol)
    return _j_inverse_vec(arr, tol)


def _j_inverse_vec(arr: np.ndarray, tol: float) -> np.ndarray:
    lo = np.zeros_like(arr)
    hi = np.full_like(arr, S_MAX)
    n_iter = int(math.ceil(math.log2(S_MAX / tol)))
    for _ in range(n_iter):
        mid = 0.5 * (lo + hi)
        below = j_function(mid) < arr
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    out = 0.5 * (lo + hi)
    return np.where(arr == 0, 0.0, out)


def j_inverse_clipped(mi):
    """J^{-1} that maps MI values at or above J(60) to the cap instead of raising."""
    arr = np.clip(np.asarray(mi, dtype=float), 0.0, 1.0)
    cap = j_function(S_MAX)
    out = np.full_like(arr, S_MAX)
    inner = arr < cap
    if np.any(inner):
        out[inner] = j_inverse(arr[inner]) if arr.ndim else j_inverse(float(arr))
    return out if out.ndim else float(out)


def mi_from_llr_samples(llrs, signs) -> float:
    """Monte-Carlo MI between bits and their LLRs.

    ``signs`` holds +1 for bit 0 and -1 for bit 1 (LLR = log P(0)/P(1)).
    """
    llrs = np.asarray(llrs, dtype=float).ravel()
    signs = np.asarray(signs, dtype=float).ravel()
    if llrs.size == 0:
        raise ValueError("need at least one LLR sample")
    if llrs.shape != signs.shape:
        raise ValueError("llrs and signs must have equal length")
    if np.any(np.isnan(llrs)):
        raise NumericalError("NaN LLR sample")
    ent = np.mean(_softplus_neg(signs * llrs)) / LN2
    return float(min(1.0, max(0.0, 1.0 - ent)))
