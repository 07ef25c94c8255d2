"""Entropy-parameterized channels: BAWGN, Gray BICM mixtures and the
complex-input AWGN channel with an arbitrary labelled constellation."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
import math
from pathlib import Path

import numpy as np
from scipy.special import logsumexp

from .core import (
    LN2,
    ConsistentGaussian,
    NumericalError,
    hermite_rule,
    j_function,
    j_inverse_clipped,
    mi_from_llr_samples,
)


class MixtureFitError(ValueError):
    """The consistent-Gaussian mixture does not describe the demapper output."""


# ---------------------------------------------------------------- constellations


@dataclass(frozen=True)
class Constellation:
    """Labelled signal set with unit average energy.

    ``symbols[l]`` carries the label whose bits are ``labels[l]`` (MSB first).
    ``real`` marks a one-dimensional constellation sent over a real AWGN channel.
    """

    name: str
    symbols: np.ndarray
    labels: np.ndarray
    mapping: str = "explicit"
    real: bool = False

    def __post_init__(self):
        syms = np.asarray(self.symbols, dtype=complex)
        labels = np.asarray(self.labels, dtype=np.int8)
        n = syms.size
        m = int(round(math.log2(n))) if n > 0 else 0
        if n < 2 or 2**m != n:
            raise ValueError(f"constellation size must be a power of two >= 2, got {n}")
        if labels.shape != (n, m):
            raise ValueError("labels must be an (|X|, m) bit array")
        codes = labels.astype(int) @ (1 << np.arange(m - 1, -1, -1))
        if np.unique(codes).size != n:
            raise ValueError("label mapping is not a bijection")
        energy = np.mean(np.abs(syms) ** 2)
        if abs(energy - 1.0) > 1e-12:
            raise ValueError(f"constellation energy is {energy}, expected 1")
        if self.real and np.any(np.abs(syms.imag) > 0):
            raise ValueError("real constellation has imaginary components")
        syms.setflags(write=False)
        labels.setflags(write=False)
        object.__setattr__(self, "symbols", syms)
        object.__setattr__(self, "labels", labels)

    @property
    def size(self) -> int:
        return self.symbols.size

    @property
    def m(self) -> int:
        return self.labels.shape[1]

    @property
    def noise_dims(self) -> int:
        return 1 if self.real else 2

    def is_gray(self) -> bool:
        """Nearest neighbours differ in exactly one label bit."""
        d = np.abs(self.symbols[:, None] - self.symbols[None, :])
        np.fill_diagonal(d, np.inf)
        dmin = d.min()
        for i, j in zip(*np.nonzero(d < dmin * (1 + 1e-9))):
            if np.sum(self.labels[i] != self.labels[j]) != 1:
                return False
        return True


def _bits(value: int, m: int) -> list[int]:
    return [(value >> (m - 1 - k)) & 1 for k in range(m)]


def _gray(n: int) -> int:
    return n ^ (n >> 1)


def _pam_levels(q: int) -> np.ndarray:
    return np.arange(-(q - 1), q, 2, dtype=float)


def _square_qam(name: str, m: int, per_dim_label) -> Constellation:
    q = 2 ** (m // 2)
    lev = _pam_levels(q)
    scale = math.sqrt(2.0 * np.mean(lev**2))
    symbols, labels = [], []
    for iq in range(q):
        for ii in range(q):
            symbols.append(complex(lev[ii], lev[iq]) / scale)
            labels.append(_bits(per_dim_label(ii), m // 2) + _bits(per_dim_label(iq), m // 2))
    mapping = "gray" if per_dim_label is _gray else "natural"
    return Constellation(name, np.array(symbols), np.array(labels), mapping)


def _qam16_set_partition() -> Constellation:
    """16-QAM with Ungerboeck set-partition labels (LSB splits first)."""
    lev = _pam_levels(4)
    scale = math.sqrt(2.0 * np.mean(lev**2))
    symbols, labels = [], []
    for y in range(4):
        for x in range(4):
            b0 = (x + y) % 2
            a, c = x // 2, y // 2
            b1 = x % 2
            b2 = (a + c) % 2
            b3 = a
            symbols.append(complex(lev[x], lev[y]) / scale)
            labels.append([b3, b2, b1, b0])
    return Constellation("16qam-sp", np.array(symbols), np.array(labels), "set-partition")


@lru_cache(maxsize=None)
def builtin_constellation(name: str) -> Constellation:
    key = name.lower().replace("_", "-")
    if key == "bpsk":
        return Constellation("bpsk", np.array([1.0, -1.0]), np.array([[0], [1]]), "gray", real=True)
    if key in ("qpsk", "qpsk-gray", "4qam-gray"):
        return _square_qam("qpsk-gray", 2, _gray)
    if key in ("16qam-gray", "16qam"):
        return _square_qam("16qam-gray", 4, _gray)
    if key in ("16qam-sp", "16qam-set-partition"):
        return _qam16_set_partition()
    if key in ("64qam-gray", "64qam"):
        return _square_qam("64qam-gray", 6, _gray)
    if key in ("64qam-natural", "64qam-nat"):
        return _square_qam("64qam-natural", 6, lambda n: n)
    raise KeyError(f"unknown constellation {name!r}")


BUILTIN_CONSTELLATIONS = ("bpsk", "qpsk-gray", "16qam-gray", "16qam-sp", "64qam-gray", "64qam-natural")


def load_constellation(path, name: str | None = None) -> Constellation:
    """Read ``label_bits re im`` lines; energy is normalized to one."""
    rows = []
    for line in Path(path).read_text().splitlines():
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 3 or set(parts[0]) - {"0", "1"}:
            raise ValueError(f"bad constellation line: {line!r}")
        rows.append(([int(c) for c in parts[0]], complex(float(parts[1]), float(parts[2]))))
    if not rows:
        raise ValueError(f"no symbols in {path}")
    if len({len(r[0]) for r in rows}) != 1:
        raise ValueError("labels have unequal lengths")
    labels = np.array([r[0] for r in rows])
    symbols = np.array([r[1] for r in rows])
    symbols = symbols / math.sqrt(np.mean(np.abs(symbols) ** 2))
    real = bool(np.all(symbols.imag == 0))
    return Constellation(name or Path(path).stem, symbols, labels, "explicit", real=real)


def get_constellation(spec: str) -> Constellation:
    try:
        return builtin_constellation(spec)
    except KeyError:
        if Path(spec).is_file():
            return load_constellation(spec)
        raise


# ---------------------------------------------------------------- SNR conventions


def es_n0_db(sigma, constellation: Constellation | None = None):
    """Es/N0 in dB; real channels use 1/(2 sigma^2), complex ones 1/sigma^2."""
    sigma = np.asarray(sigma, dtype=float)
    if np.any(sigma <= 0):
        raise ValueError("sigma must be positive")
    real = constellation is None or constellation.real
    ratio = 1.0 / (2.0 * sigma**2) if real else 1.0 / sigma**2
    out = 10.0 * np.log10(ratio)
    return out if out.ndim else float(out)


def sigma_from_es_n0_db(db, constellation: Constellation | None = None):
    ratio = 10.0 ** (np.asarray(db, dtype=float) / 10.0)
    real = constellation is None or constellation.real
    out = np.sqrt(1.0 / (2.0 * ratio)) if real else np.sqrt(1.0 / ratio)
    return out if out.ndim else float(out)


# ---------------------------------------------------------------- BAWGN


def bawgn_entropy(sigma):
    sigma = np.asarray(sigma, dtype=float)
    if np.any(sigma <= 0):
        raise ValueError("sigma must be positive")
    out = 1.0 - j_function(2.0 / sigma)
    return out if np.ndim(out) else float(out)


def invert_monotone(fn, target: float, lo: float = 1e-3, hi: float = 1e3, tol: float = 1e-12) -> float:
    """Bisection in log-sigma for an increasing function of sigma."""
    a, b = math.log(lo), math.log(hi)
    if not fn(lo) <= target <= fn(hi):
        raise ValueError(f"target {target} outside reachable range")
    while b - a > tol:
        mid = 0.5 * (a + b)
        if fn(math.exp(mid)) < target:
            a = mid
        else:
            b = mid
    return math.exp(0.5 * (a + b))


def sigma_from_entropy(h: float, family: str = "bawgn") -> float:
    if family != "bawgn":
        raise ValueError(f"unsupported family {family!r}")
    if not 0.0 < h < 1.0:
        raise ValueError("BAWGN entropy must lie in (0, 1)")
    return invert_monotone(bawgn_entropy, h, lo=0.02, hi=2e3)


@dataclass(frozen=True)
class ChannelPoint:
    sigma: float
    h: float
    es_n0_db: float


# ---------------------------------------------------------------- mixtures


@dataclass(frozen=True)
class LDensityMixture:
    weights: tuple
    means: tuple

    def __post_init__(self):
        w = tuple(float(x) for x in self.weights)
        mu = tuple(float(x) for x in self.means)
        if len(w) != len(mu) or not w:
            raise ValueError("mixture needs matching, nonempty weights and means")
        if any(x <= 0 for x in w) or abs(sum(w) - 1.0) > 1e-9:
            raise ValueError("mixture weights must be positive and sum to 1")
        if any(not (x >= 0) or not math.isfinite(x) for x in mu):
            raise ValueError("component means must be finite and >= 0")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "means", mu)

    @classmethod
    def single(cls, mean: float) -> "LDensityMixture":
        return cls((1.0,), (mean,))

    @property
    def components(self) -> list[tuple[float, ConsistentGaussian]]:
        return [(w, ConsistentGaussian(m)) for w, m in zip(self.weights, self.means)]

    def component_entropies(self) -> np.ndarray:
        return 1.0 - np.asarray(j_function(np.sqrt(2.0 * np.asarray(self.means))))


def mixture_entropy(mix: LDensityMixture) -> float:
    return float(np.dot(mix.weights, mix.component_entropies()))


# ---------------------------------------------------------------- demapping


def _noise_scale(constellation: Constellation, sigma: float) -> float:
    """Per-dimension noise standard deviation."""
    return sigma if constellation.real else sigma / math.sqrt(2.0)


def symbol_metrics(constellation: Constellation, y: np.ndarray, sigma: float) -> np.ndarray:
    """log p(y|xi) up to a constant, shape y.shape + (|X|,)."""
    var = _noise_scale(constellation, sigma) ** 2
    d2 = np.abs(y[..., None] - constellation.symbols) ** 2
    return -d2 / (2.0 * var)


def bit_llrs(constellation: Constellation, metrics: np.ndarray, prior_llrs=None) -> np.ndarray:
    """Extrinsic bit LLRs log P(b=0)/P(b=1) from symbol metrics.

    ``prior_llrs`` (shape (..., m)) contributes to every bit except the target.
    """
    labels = constellation.labels.astype(float)
    if prior_llrs is not None:
        # log prior of each symbol from the bits' LLRs, up to a per-row constant
        lp = -(prior_llrs[..., None, :] * labels)  # (..., |X|, m)
        total = metrics + lp.sum(axis=-1)
    out = np.empty(metrics.shape[:-1] + (constellation.m,))
    for k in range(constellation.m):
        zero = constellation.labels[:, k] == 0
        if prior_llrs is None:
            t = metrics
        else:
            t = total - lp[..., k]
        out[..., k] = logsumexp(t[..., zero], axis=-1) - logsumexp(t[..., ~zero], axis=-1)
    return out


def simulate_channel(constellation: Constellation, sigma: float, n: int, rng: np.random.Generator):
    """Uniform symbol indices and their noisy observations."""
    idx = rng.integers(0, constellation.size, n)
    s = _noise_scale(constellation, sigma)
    noise = s * rng.standard_normal(n)
    if not constellation.real:
        noise = noise + 1j * s * rng.standard_normal(n)
    return idx, constellation.symbols[idx] + noise


def _bit_signs(constellation: Constellation, idx: np.ndarray) -> np.ndarray:
    return 1.0 - 2.0 * constellation.labels[idx].astype(float)


def _noise_nodes(constellation: Constellation, sigma: float, degree: int):
    """Quadrature nodes and weights of the additive noise (weights sum to 1)."""
    rule = hermite_rule(degree)
    s = _noise_scale(constellation, sigma)
    k = math.sqrt(2.0) * s * rule.nodes
    w = rule.weights / math.sqrt(math.pi)
    if constellation.real:
        return k.astype(complex), w
    n = (k[:, None] + 1j * k[None, :]).ravel()
    return n, np.outer(w, w).ravel()


def _separable_parts(constellation: Constellation):
    """Split a product constellation into per-dimension PAM label sets.

    Returns ``[(levels, labels, positions), ...]`` for the real and imaginary
    dimensions, or None when the labelling does not factor.
    """
    if constellation.real:
        return None
    parts = []
    for coord in (constellation.symbols.real, constellation.symbols.imag):
        vals, inv = np.unique(np.round(coord, 12), return_inverse=True)
        pos = [k for k in range(constellation.m)
               if all(np.unique(constellation.labels[inv == v, k]).size == 1 for v in range(vals.size))]
        if 2 ** len(pos) != vals.size:
            return None
        lab = np.array([constellation.labels[np.argmax(inv == v)][pos] for v in range(vals.size)])
        if np.unique(lab @ (1 << np.arange(len(pos))[::-1])).size != vals.size:
            return None
        parts.append((vals, lab, pos))
    if vals.size * parts[0][0].size != constellation.size or set(parts[0][2]) & set(parts[1][2]):
        return None
    return parts


def _bit_mi_1d(levels, labels, s: float, degree: int) -> np.ndarray:
    rule = hermite_rule(degree)
    y = levels[:, None] + math.sqrt(2.0) * s * rule.nodes[None, :]
    met = -((y[..., None] - levels) ** 2) / (2.0 * s * s)
    signs = 1.0 - 2.0 * labels.astype(float)
    out = np.empty(labels.shape[1])
    for k in range(labels.shape[1]):
        zero = labels[:, k] == 0
        llr = logsumexp(met[..., zero], axis=-1) - logsumexp(met[..., ~zero], axis=-1)
        ent = np.logaddexp(0.0, -signs[:, k][:, None] * llr) / LN2
        out[k] = 1.0 - float(np.mean(ent @ rule.weights)) / math.sqrt(math.pi)
    return out


def bit_mutual_informations(constellation: Constellation, sigma: float, degree: int = 40) -> np.ndarray:
    """Per-position bit MI with zero a priori, by Gauss-Hermite over the noise."""
    s = _noise_scale(constellation, sigma)
    if constellation.real:
        return _bit_mi_1d(constellation.symbols.real, constellation.labels, s, degree)
    parts = _separable_parts(constellation)
    if parts is not None:
        out = np.empty(constellation.m)
        for levels, labels, pos in parts:
            out[pos] = _bit_mi_1d(levels, labels, s, degree)
        return out
    noise, w = _noise_nodes(constellation, sigma, degree)
    y = constellation.symbols[:, None] + noise[None, :]
    llr = bit_llrs(constellation, symbol_metrics(constellation, y, sigma))
    signs = 1.0 - 2.0 * constellation.labels.astype(float)
    ent = np.logaddexp(0.0, -signs[:, None, :] * llr) / LN2  # (|X|, nodes, m)
    return 1.0 - np.einsum("snk,n->k", ent, w) / constellation.size


def nonbinary_entropy(constellation: Constellation, sigma: float, degree: int = 20, check: bool = True) -> float:
    """H(X|Y) in bits for uniform inputs: m - I(X;Y)."""
    if sigma <= 0:
        raise ValueError("sigma must be positive")

    def at(d):
        noise, w = _noise_nodes(constellation, sigma, d)
        y = constellation.symbols[:, None] + noise[None, :]
        met = symbol_metrics(constellation, y, sigma)  # (|X|, nodes, |X|)
        own = np.take_along_axis(met, np.arange(constellation.size)[:, None, None], axis=-1)[..., 0]
        val = (logsumexp(met, axis=-1) - own) / LN2
        return float(np.einsum("sn,n->", val, w) / constellation.size)

    h = at(degree)
    if check:
        h2 = at(min(2 * degree, 100))
        if abs(h2 - h) > 1e-4:
            raise NumericalError(f"entropy quadrature not converged at sigma={sigma}: {h} vs {h2}")
        h = h2
    return min(float(constellation.m), max(0.0, h))


def _position_classes(constellation: Constellation, sigma: float, tol: float = 1e-6) -> list[list[int]]:
    mi = bit_mutual_informations(constellation, sigma)
    classes: list[list[int]] = []
    for k in np.argsort(-mi, kind="stable"):
        for cls in classes:
            if abs(mi[cls[0]] - mi[k]) < tol:
                cls.append(int(k))
                break
        else:
            classes.append([int(k)])
    return classes


def fit_bicm_mixture(
    constellation: Constellation,
    sigma: float,
    n_samples: int = 200_000,
    n_components: int | None = None,
    seed: int = 0,
    max_residual: float = 5e-3,
) -> LDensityMixture:
    """Consistent-Gaussian mixture for the Gray BICM bit channel.

    Each reliability class of bit positions becomes one component whose mean
    reproduces the class's empirical MI on one half of the samples. The fit is
    rejected when its entropy misses the empirical MI of the held-out half by
    more than ``max_residual`` or when the mapping is not Gray.
    """
    if not constellation.is_gray():
        raise MixtureFitError(f"{constellation.name} is not Gray-labelled")
    classes = _position_classes(constellation, sigma)
    if n_components is not None and n_components < len(classes):
        raise ValueError(f"{len(classes)} reliability classes need at least that many components")
    rng = np.random.default_rng(seed)
    n_sym = max(2, n_samples // constellation.m)
    idx, y = simulate_channel(constellation, sigma, n_sym, rng)
    llr = bit_llrs(constellation, symbol_metrics(constellation, y, sigma))
    folded = llr * _bit_signs(constellation, idx)
    fit, held = folded[: n_sym // 2], folded[n_sym // 2:]
    weights, means = [], []
    for cls in classes:
        samples = fit[:, cls].ravel()
        s = float(j_inverse_clipped(mi_from_llr_samples(samples, np.ones_like(samples))))
        weights.append(len(cls) / constellation.m)
        means.append(0.5 * s * s)
    mix = LDensityMixture(tuple(weights), tuple(means))
    empirical = mi_from_llr_samples(held, np.ones_like(held))
    if abs((1.0 - mixture_entropy(mix)) - empirical) > max_residual:
        raise MixtureFitError("mixture entropy does not match the held-out demapper MI")
    return LDensityMixture(tuple(weights), tuple(means))


# ---------------------------------------------------------------- channel families


@dataclass
class BicmFamily:
    """Gray BICM bit channel parameterized by its entropy h in [0, 1].

    Per-position MI is tabulated on a log-sigma grid by quadrature; each
    reliability class becomes one mixture component with MI-matched mean.
    """

    constellation: Constellation
    n_grid: int = 400
    sigma_range: tuple = (0.02, 50.0)
    _log_sigma: np.ndarray = field(init=False, repr=False)
    _class_mi: np.ndarray = field(init=False, repr=False)
    _h: np.ndarray = field(init=False, repr=False)
    _weights: tuple = field(init=False, repr=False)

    def __post_init__(self):
        c = self.constellation
        if not c.is_gray():
            raise MixtureFitError(f"{c.name} is not Gray-labelled")
        classes = _position_classes(c, 0.5)
        self._weights = tuple(len(cls) / c.m for cls in classes)
        self._log_sigma = np.linspace(math.log(self.sigma_range[0]), math.log(self.sigma_range[1]), self.n_grid)
        mi = np.array([bit_mutual_informations(c, math.exp(ls)) for ls in self._log_sigma])
        self._class_mi = np.stack([mi[:, cls].mean(axis=1) for cls in classes], axis=1)
        self._class_mi = np.minimum.accumulate(self._class_mi, axis=0)
        self._h = 1.0 - self._class_mi @ np.asarray(self._weights)

    @property
    def m(self) -> int:
        return 1

    @property
    def h_max(self) -> float:
        return 1.0

    def sigma(self, h: float) -> float:
        if not 0.0 < h < 1.0:
            raise ValueError("BICM entropy must lie in (0, 1)")
        if h <= self._h[0] or h >= self._h[-1]:
            raise ValueError(f"entropy {h} outside tabulated range")
        i = int(np.searchsorted(self._h, h))
        # the table brackets the root; refine on the exact quadrature entropy
        lo, hi = self._log_sigma[i - 1], self._log_sigma[i]
        c = self.constellation
        while hi - lo > 1e-10:
            mid = 0.5 * (lo + hi)
            if 1.0 - float(np.mean(bit_mutual_informations(c, math.exp(mid)))) < h:
                lo = mid
            else:
                hi = mid
        return float(math.exp(0.5 * (lo + hi)))

    def mixture(self, h: float) -> LDensityMixture:
        if h >= self._h[-1]:
            return LDensityMixture(self._weights, (0.0,) * len(self._weights))
        if not 0.0 < h < 1.0 or h <= self._h[0]:
            raise ValueError(f"entropy {h} outside tabulated range")
        ls = float(np.interp(h, self._h, self._log_sigma))
        mi = [np.interp(ls, self._log_sigma, self._class_mi[:, j]) for j in range(len(self._weights))]
        s = np.asarray(j_inverse_clipped(np.asarray(mi)))
        # rescale so the mixture entropy equals h exactly
        mix = LDensityMixture(self._weights, tuple(0.5 * s * s))
        return _match_entropy(mix, h)

    def es_n0_db(self, h: float) -> float:
        return es_n0_db(self.sigma(h), self.constellation)


def _match_entropy(mix: LDensityMixture, h: float) -> LDensityMixture:
    """Scale all component means by a common factor so the entropy hits ``h``."""
    err = mixture_entropy(mix) - h
    if abs(err) < 1e-12 or len(mix.means) == 1:
        if len(mix.means) == 1:
            s = float(j_inverse_clipped(1.0 - h))
            return LDensityMixture.single(0.5 * s * s)
        return mix
    lo, hi = 0.0, 4.0
    means = np.asarray(mix.means)
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if mixture_entropy(LDensityMixture(mix.weights, tuple(means * mid))) > h:
            lo = mid
        else:
            hi = mid
    return LDensityMixture(mix.weights, tuple(means * 0.5 * (lo + hi)))


@dataclass
class BawgnFamily:
    """Binary-input AWGN (BPSK) parameterized by entropy."""

    constellation: Constellation = field(default_factory=lambda: builtin_constellation("bpsk"))

    @property
    def m(self) -> int:
        return 1

    @property
    def h_max(self) -> float:
        return 1.0

    def sigma(self, h: float) -> float:
        return sigma_from_entropy(h)

    def mixture(self, h: float) -> LDensityMixture:
        if h >= 1.0:
            return LDensityMixture.single(0.0)
        s = float(j_inverse_clipped(1.0 - h))
        return LDensityMixture.single(0.5 * s * s)

    def es_n0_db(self, h: float) -> float:
        return es_n0_db(self.sigma(h), self.constellation)


@dataclass
class ComplexFamily:
    """Complex-input AWGN with entropy H(X|Y) in [0, m]."""

    constellation: Constellation
    degree: int = 20

    @property
    def m(self) -> int:
        return self.constellation.m

    @property
    def h_max(self) -> float:
        return float(self.constellation.m)

    def entropy(self, sigma: float) -> float:
        return nonbinary_entropy(self.constellation, sigma, self.degree, check=False)

    @lru_cache(maxsize=4096)
    def sigma(self, h: float) -> float:
        if not 0.0 < h < self.h_max:
            raise ValueError(f"entropy must lie in (0, {self.h_max})")
        return invert_monotone(self.entropy, h, lo=0.01, hi=1e3, tol=1e-10)

    def es_n0_db(self, h: float) -> float:
        return es_n0_db(self.sigma(h), self.constellation)

    def __hash__(self):
        return hash((self.constellation.name, self.degree))


def channel_family(constellation: Constellation, binary: bool = True):
    """BICM view for Gray mappings, complex-input view otherwise."""
    if constellation.m == 1:
        return BawgnFamily(constellation)
    if binary:
        return BicmFamily(constellation)
    return ComplexFamily(constellation)
