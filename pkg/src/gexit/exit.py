"""Scalar MI transfer functions of the constituent decoders."""

from __future__ import annotations

from dataclasses import dataclass, field
import math

import numpy as np
from scipy.interpolate import PchipInterpolator, RegularGridInterpolator
from scipy.optimize import isotonic_regression

from .channel import Constellation, LDensityMixture, bit_llrs, symbol_metrics
from .core import j_function, j_inverse_clipped, mi_from_llr_samples
from .trellis import ConvCode, bcjr

# ---------------------------------------------------------------- ensembles


@dataclass(frozen=True)
class DegreeDistribution:
    """Edge-perspective degree distributions; node perspectives are derived."""

    lam: dict
    rho: dict

    def __post_init__(self):
        for name, d in (("lambda", self.lam), ("rho", self.rho)):
            vals = np.array(list(d.values()), dtype=float)
            if np.any(vals < 0) or abs(vals.sum() - 1.0) > 1e-9:
                raise ValueError(f"{name} coefficients must be nonnegative and sum to 1")
        if any(int(i) < 2 for i, v in self.lam.items() if v > 0):
            raise ValueError("variable-node degrees must be at least 2")
        object.__setattr__(self, "lam", {int(k): float(v) for k, v in self.lam.items() if v > 0})
        object.__setattr__(self, "rho", {int(k): float(v) for k, v in self.rho.items() if v > 0})

    @classmethod
    def regular(cls, dv: int, dc: int) -> "DegreeDistribution":
        return cls({dv: 1.0}, {dc: 1.0})

    @staticmethod
    def _node(edge: dict) -> dict:
        tot = sum(v / k for k, v in edge.items())
        return {k: (v / k) / tot for k, v in edge.items()}

    @property
    def Lambda(self) -> dict:
        return self._node(self.lam)

    @property
    def P(self) -> dict:
        return self._node(self.rho)

    @property
    def design_rate(self) -> float:
        return 1.0 - sum(v / k for k, v in self.rho.items()) / sum(v / k for k, v in self.lam.items())


def cn_exit_irregular(dd: DegreeDistribution, i_ev):
    """Gamma^C under the Gaussian approximation (duality form)."""
    x = np.clip(np.asarray(i_ev, dtype=float), 0.0, 1.0)
    s = np.asarray(j_inverse_clipped(1.0 - x))
    out = sum(r * (1.0 - np.asarray(j_function(math.sqrt(j - 1) * s))) for j, r in dd.rho.items())
    out = np.where(x >= 1.0, 1.0, out)
    return out if np.ndim(out) else float(out)


def vn_exit_irregular(dd: DegreeDistribution, mix: LDensityMixture, i_ec):
    """Gamma^V(I_Ec, h) = sum_i lambda_i sum_j d_j J(sqrt((i-1) J^-1(I_Ec)^2 + 2 l_j))."""
    x = np.clip(np.asarray(i_ec, dtype=float), 0.0, 1.0)
    s2 = np.asarray(j_inverse_clipped(x)) ** 2
    out = 0.0
    for i, lam in dd.lam.items():
        for d, l in zip(mix.weights, mix.means):
            out = out + lam * d * np.asarray(j_function(np.sqrt((i - 1) * s2 + 2.0 * l)))
    out = np.where(x >= 1.0, 1.0, out)
    return out if np.ndim(out) else float(out)


def vn_channel_extrinsic(dd: DegreeDistribution, i_ec):
    """MI of the sum of all incoming CN messages at a node (node-degree mixture)."""
    x = np.clip(np.asarray(i_ec, dtype=float), 0.0, 1.0)
    s2 = np.asarray(j_inverse_clipped(x)) ** 2
    out = sum(w * np.asarray(j_function(np.sqrt(i * s2))) for i, w in dd.Lambda.items())
    out = np.where(x >= 1.0, 1.0, out)
    return out if np.ndim(out) else float(out)


# ---------------------------------------------------------------- block codes


def _gf2_rank(m: np.ndarray) -> int:
    a = np.array(m, dtype=np.int8) % 2
    rank = 0
    for col in range(a.shape[1]):
        piv = np.nonzero(a[rank:, col])[0]
        if piv.size == 0:
            continue
        p = rank + piv[0]
        a[[rank, p]] = a[[p, rank]]
        for r in range(a.shape[0]):
            if r != rank and a[r, col]:
                a[r] ^= a[rank]
        rank += 1
        if rank == a.shape[0]:
            break
    return rank


@dataclass(frozen=True)
class ComponentCode:
    """Binary linear block code given by a full-rank generator matrix."""

    kind: str
    generator: np.ndarray

    def __post_init__(self):
        g = np.asarray(self.generator, dtype=np.int8) % 2
        if g.ndim != 2 or _gf2_rank(g) != g.shape[0]:
            raise ValueError("generator matrix must have full row rank")
        g.setflags(write=False)
        object.__setattr__(self, "generator", g)

    @property
    def n(self) -> int:
        return self.generator.shape[1]

    @property
    def k(self) -> int:
        return self.generator.shape[0]

    @classmethod
    def repetition(cls, n: int) -> "ComponentCode":
        return cls("repetition", np.ones((1, n), dtype=np.int8))

    @classmethod
    def spc(cls, n: int) -> "ComponentCode":
        return cls("single-parity-check", np.hstack([np.eye(n - 1, dtype=np.int8), np.ones((n - 1, 1), dtype=np.int8)]))

    @classmethod
    def hamming_15_11(cls) -> "ComponentCode":
        cols = [c for c in range(1, 16) if c & (c - 1)]  # non-unit columns
        par = np.array([[(c >> b) & 1 for b in range(4)] for c in cols], dtype=np.int8)
        return cls("hamming-15-11", np.hstack([np.eye(11, dtype=np.int8), par]))

    @classmethod
    def from_matrix(cls, rows) -> "ComponentCode":
        return cls("generator-matrix", np.array(rows, dtype=np.int8))

    def codebook(self) -> tuple[np.ndarray, np.ndarray]:
        if self.k > 20:
            raise ValueError("codebook too large for exact APP decoding")
        msgs = ((np.arange(2**self.k)[:, None] >> np.arange(self.k - 1, -1, -1)) & 1).astype(np.int8)
        return msgs, (msgs.astype(np.int64) @ self.generator % 2).astype(np.int8)


def apriori_llrs(mi, signs: np.ndarray, normals: np.ndarray) -> np.ndarray:
    """Consistent-Gaussian a priori LLRs from shared standard normals."""
    s = float(j_inverse_clipped(min(max(float(mi), 0.0), 1.0)))
    return signs * (0.5 * s * s + s * normals)


def mixture_llrs(mix: LDensityMixture, signs: np.ndarray, normals: np.ndarray, uniforms: np.ndarray) -> np.ndarray:
    """Channel LLRs from a consistent-Gaussian mixture, component chosen by ``uniforms``."""
    edges = np.cumsum(mix.weights)[:-1]
    comp = np.searchsorted(edges, uniforms, side="right")
    mu = np.asarray(mix.means)[comp]
    return signs * (mu + np.sqrt(2.0 * mu) * normals)


def _app_extrinsic(metric: np.ndarray, bits: np.ndarray, intrinsic: np.ndarray) -> np.ndarray:
    """Per-position APP LLR minus intrinsic, for codeword metrics (N, |C|)."""
    m = metric.max(axis=1, keepdims=True)
    p = np.exp(metric - m)
    out = np.empty((metric.shape[0], bits.shape[1]))
    # perfect priors drive one side to exactly zero; the infinite LLR is intended
    with np.errstate(divide="ignore"):
        for k in range(bits.shape[1]):
            zero = bits[:, k] == 0
            out[:, k] = np.log(p[:, zero].sum(1)) - np.log(p[:, ~zero].sum(1))
    return out - intrinsic


def block_code_exit_mc(code: ComponentCode, role: str, i_in: float, channel: LDensityMixture | None = None,
                       n_words: int | None = None, seed: int = 0, n_bits: int = 200_000,
                       return_channel_mi: bool = False):
    """Monte-Carlo EXIT of an APP-decoded block code.

    CN role: a priori on all n code bits, extrinsic on each. VN role: the k
    message bits see the channel, the n code bits carry a priori messages,
    and extrinsic MI is measured on the code bits. With ``return_channel_mi``
    the VN role also returns the MI of the extrinsic on the message bits,
    i.e. the APP given everything except the bit's own channel observation.
    """
    if role not in ("CN", "VN"):
        raise ValueError("role must be 'CN' or 'VN'")
    if role == "VN" and channel is None:
        channel = LDensityMixture.single(0.0)
    msgs, words = code.codebook()
    n_words = n_words or max(1, n_bits // code.n)
    rng = np.random.default_rng(seed)
    pick = rng.integers(0, words.shape[0], n_words)
    c = words[pick]
    sc = 1.0 - 2.0 * c
    la = apriori_llrs(i_in, sc, rng.standard_normal(c.shape))
    csign = 1.0 - 2.0 * words.astype(float)
    lch = None
    if role == "VN":
        u = msgs[pick]
        su = 1.0 - 2.0 * u
        lch = mixture_llrs(channel, su, rng.standard_normal(u.shape), rng.random(u.shape))
        usign = 1.0 - 2.0 * msgs.astype(float)
    if return_channel_mi and role != "VN":
        raise ValueError("channel MI is defined for the VN role only")
    # chunk over words so the (words x codebook) metric stays small
    step = max(1, 4_000_000 // words.shape[0])
    ext = np.empty(c.shape)
    ext_u = np.empty(u.shape) if return_channel_mi else None
    for a in range(0, n_words, step):
        rows = slice(a, a + step)
        metric = 0.5 * la[rows] @ csign.T
        if role == "VN":
            metric = metric + 0.5 * lch[rows] @ usign.T
        ext[rows] = _app_extrinsic(metric, words, la[rows])
        if return_channel_mi:
            ext_u[rows] = _app_extrinsic(metric, msgs, lch[rows])
    mi = mi_from_llr_samples(ext, sc)
    if not return_channel_mi:
        return mi
    return mi, mi_from_llr_samples(ext_u, su)


# ---------------------------------------------------------------- convolutional codes


@dataclass
class _BcjrSamples:
    """Common random numbers for one BCJR EXIT experiment."""

    code: ConvCode
    block_len: int
    n_blocks: int
    seed: int
    inputs: np.ndarray = field(init=False)
    outputs: np.ndarray = field(init=False)
    n_in: np.ndarray = field(init=False)
    n_out: np.ndarray = field(init=False)
    u_out: np.ndarray = field(init=False)

    def __post_init__(self):
        rng = np.random.default_rng(self.seed)
        u = rng.integers(0, 2, (self.n_blocks, self.block_len)).astype(np.int8)
        self.outputs = np.transpose(self.code.encode(u), (1, 0, 2))  # (T', B, n)
        self.inputs = self.code.inputs_with_tail(u).T  # (T', B)
        T = self.outputs.shape[0]
        self.n_in = rng.standard_normal((T, self.n_blocks))
        self.n_out = rng.standard_normal(self.outputs.shape)
        self.u_out = rng.random(self.outputs.shape)


def bcjr_exit_batch(code: ConvCode, points, block_len: int = 10_000, n_blocks: int = 20, seed: int = 0,
                    role: str = "inner", rows_per_chunk: int = 400, with_outputs: bool = False):
    """EXIT values for many operating points sharing the same random numbers.

    ``points`` is a list of ``(channel, i_a)``: for the inner role ``channel``
    is the L-density mixture on the code outputs and ``i_a`` the a priori MI
    on the inputs; the result is the extrinsic MI on the inputs. For the
    outer role ``channel`` is ignored, ``i_a`` is the a priori MI on the
    outputs and the extrinsic MI on all outputs is returned. With
    ``with_outputs`` the inner role returns rows ``[I_in, I_out_0, ..., I_out_{n-1}]``
    holding the extrinsic MI on the inputs and on each output stream.
    """
    if role not in ("inner", "outer"):
        raise ValueError("role must be 'inner' or 'outer'")
    smp = _BcjrSamples(code, block_len, n_blocks, seed)
    tr = code.trellis()
    T = smp.outputs.shape[0]
    s_out = 1.0 - 2.0 * smp.outputs
    s_in = 1.0 - 2.0 * smp.inputs
    info = slice(0, block_len)
    per_chunk = max(1, rows_per_chunk // n_blocks)
    both = with_outputs and role == "inner"
    results = np.empty((len(points), 1 + code.n_out)) if both else np.empty(len(points))
    for start in range(0, len(points), per_chunk):
        chunk = points[start:start + per_chunk]
        l_out = np.empty((T, n_blocks * len(chunk), code.n_out))
        l_in = np.empty((T, n_blocks * len(chunk))) if role == "inner" else None
        for i, (mix, ia) in enumerate(chunk):
            cols = slice(i * n_blocks, (i + 1) * n_blocks)
            if role == "inner":
                l_out[:, cols] = mixture_llrs(mix, s_out, smp.n_out, smp.u_out)
                l_in[:, cols] = apriori_llrs(ia, s_in, smp.n_in)
            else:
                l_out[:, cols] = apriori_llrs(ia, s_out, smp.n_out)
        if both:
            ext, ext_o = bcjr(tr, l_out, l_in, terminated=code.terminate, want_out=True)
        elif role == "inner":
            ext = bcjr(tr, l_out, l_in, terminated=code.terminate)
        else:
            _, ext = bcjr(tr, l_out, None, terminated=code.terminate, want_out=True)
        for i in range(len(chunk)):
            cols = slice(i * n_blocks, (i + 1) * n_blocks)
            if both:
                results[start + i, 0] = mi_from_llr_samples(ext[info, cols], s_in[info])
                for k in range(code.n_out):
                    results[start + i, 1 + k] = mi_from_llr_samples(ext_o[info, cols, k], s_out[info, :, k])
            elif role == "inner":
                results[start + i] = mi_from_llr_samples(ext[info, cols], s_in[info])
            else:
                results[start + i] = mi_from_llr_samples(ext[info, cols], s_out[info])
    return results


def bcjr_exit(code: ConvCode, channel: LDensityMixture | None, i_a: float, block_len: int = 10_000,
              n_blocks: int = 20, seed: int = 0, role: str | None = None) -> float:
    """Single-point BCJR EXIT; the role defaults to inner when a channel is given."""
    role = role or ("inner" if channel is not None else "outer")
    if role == "inner" and channel is None:
        channel = LDensityMixture.single(0.0)
    return float(bcjr_exit_batch(code, [(channel, i_a)], block_len, n_blocks, seed, role)[0])


def bcjr_exit_two_prior(code: ConvCode, points, block_len: int = 10_000, n_blocks: int = 20, seed: int = 0,
                        rows_per_chunk: int = 400) -> np.ndarray:
    """Inner code fed by a detector: a priori MI on inputs and on outputs.

    ``points`` holds ``(i_au, i_ac)`` pairs; returns an array (len, 2) of the
    extrinsic MI on the inputs and on the outputs.
    """
    smp = _BcjrSamples(code, block_len, n_blocks, seed)
    tr = code.trellis()
    T = smp.outputs.shape[0]
    s_out = 1.0 - 2.0 * smp.outputs
    s_in = 1.0 - 2.0 * smp.inputs
    info = slice(0, block_len)
    per_chunk = max(1, rows_per_chunk // n_blocks)
    results = np.empty((len(points), 2))
    for start in range(0, len(points), per_chunk):
        chunk = points[start:start + per_chunk]
        l_out = np.empty((T, n_blocks * len(chunk), code.n_out))
        l_in = np.empty((T, n_blocks * len(chunk)))
        for i, (iau, iac) in enumerate(chunk):
            cols = slice(i * n_blocks, (i + 1) * n_blocks)
            l_out[:, cols] = apriori_llrs(iac, s_out, smp.n_out)
            l_in[:, cols] = apriori_llrs(iau, s_in, smp.n_in)
        ext_in, ext_out = bcjr(tr, l_out, l_in, terminated=code.terminate, want_out=True)
        for i in range(len(chunk)):
            cols = slice(i * n_blocks, (i + 1) * n_blocks)
            results[start + i, 0] = mi_from_llr_samples(ext_in[info, cols], s_in[info])
            results[start + i, 1] = mi_from_llr_samples(ext_out[info, cols], s_out[info])
    return results


# ---------------------------------------------------------------- detector


def detector_exit(constellation: Constellation, sigma: float, i_ad: float, n_symbols: int = 50_000,
                  seed: int = 0) -> float:
    """Extrinsic MI of the bit-wise APP demapper with Gaussian a priori."""
    return float(detector_exit_batch(constellation, [(sigma, i_ad)], n_symbols, seed)[0])


def detector_exit_batch(constellation: Constellation, points, n_symbols: int = 50_000, seed: int = 0) -> np.ndarray:
    """Detector EXIT for many (sigma, i_ad) with common random numbers."""
    rng = np.random.default_rng(seed)
    idx = rng.integers(0, constellation.size, n_symbols)
    dims = constellation.noise_dims
    z = rng.standard_normal((n_symbols, dims))
    na = rng.standard_normal((n_symbols, constellation.m))
    signs = 1.0 - 2.0 * constellation.labels[idx].astype(float)
    out = np.empty(len(points))
    for p, (sigma, i_ad) in enumerate(points):
        s = sigma if constellation.real else sigma / math.sqrt(2.0)
        noise = s * z[:, 0] + (1j * s * z[:, 1] if dims == 2 else 0.0)
        y = constellation.symbols[idx] + noise
        prior = apriori_llrs(i_ad, signs, na)
        ext = bit_llrs(constellation, symbol_metrics(constellation, y, sigma), prior)
        out[p] = mi_from_llr_samples(ext, signs)
    return out


# ---------------------------------------------------------------- tabulated curves


def monotone_smooth(y, increasing: bool = True) -> np.ndarray:
    """Isotonic regression clipped to [0, 1]."""
    y = np.clip(np.asarray(y, dtype=float), 0.0, 1.0)
    return np.clip(isotonic_regression(y, increasing=increasing).x, 0.0, 1.0)


class ExitCurve:
    """Tabulated transfer function with monotone piecewise-cubic interpolation."""

    def __init__(self, x, y, smooth: bool = True):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if x.ndim != 1 or x.size < 2 or np.any(np.diff(x) <= 0):
            raise ValueError("input grid must be strictly increasing")
        if x[0] < 0 or x[-1] > 1:
            raise ValueError("input grid must lie in [0, 1]")
        self.x = x
        self.y = monotone_smooth(y) if smooth else np.clip(y, 0.0, 1.0)
        self._f = PchipInterpolator(self.x, self.y, extrapolate=True)

    def __call__(self, v):
        out = np.clip(self._f(np.clip(v, self.x[0], self.x[-1])), 0.0, 1.0)
        return out if np.ndim(out) else float(out)

    def to_rows(self):
        return list(zip(self.x.tolist(), self.y.tolist()))


class ExitSurface:
    """Two-argument transfer function on a rectangular grid.

    Values are made monotone along each axis (direction given by ``signs``)
    before monotone cubic interpolation.
    """

    def __init__(self, a, b, values, signs=(1, 1), smooth: bool = True):
        self.a = np.asarray(a, dtype=float)
        self.b = np.asarray(b, dtype=float)
        v = np.clip(np.asarray(values, dtype=float), 0.0, 1.0)
        if v.shape != (self.a.size, self.b.size):
            raise ValueError("value table shape does not match the grid")
        if smooth:
            for _ in range(3):
                v = np.array([monotone_smooth(row, signs[1] > 0) for row in v])
                v = np.array([monotone_smooth(col, signs[0] > 0) for col in v.T]).T
        self.values = v
        self.signs = signs
        self._f = RegularGridInterpolator((self.a, self.b), v, method="pchip")

    def __call__(self, a, b):
        a = np.clip(np.asarray(a, dtype=float), self.a[0], self.a[-1])
        b = np.clip(np.asarray(b, dtype=float), self.b[0], self.b[-1])
        a, b = np.broadcast_arrays(a, b)
        out = np.clip(self._f(np.stack([a.ravel(), b.ravel()], axis=-1)), 0.0, 1.0).reshape(a.shape)
        return out if out.ndim else float(out)


def mi_grid(n: int = 101) -> np.ndarray:
    return np.linspace(0.0, 1.0, n)


def tabulate(fn, grid=None, smooth: bool = True) -> ExitCurve:
    """Sample ``fn`` (scalar or vectorized) on an MI grid and wrap it."""
    grid = mi_grid() if grid is None else np.asarray(grid, dtype=float)
    try:
        ys = np.asarray(fn(grid), dtype=float)
        if ys.shape != grid.shape:
            raise ValueError
    except (TypeError, ValueError):
        ys = np.array([fn(float(g)) for g in grid])
    return ExitCurve(grid, ys, smooth=smooth)


__all__ = [
    "DegreeDistribution", "ComponentCode", "ConvCode", "ExitCurve", "ExitSurface",
    "cn_exit_irregular", "vn_exit_irregular", "vn_channel_extrinsic", "block_code_exit_mc",
    "bcjr_exit", "bcjr_exit_batch", "bcjr_exit_two_prior", "detector_exit", "detector_exit_batch",
    "tabulate", "mi_grid", "monotone_smooth", "apriori_llrs", "mixture_llrs",
]
