"""Concrete coded-modulation systems: transfer-function tables, DE maps and GEXIT values.

Every system exposes the same surface used by chart assembly and threshold
extraction: ``make(h)`` returns the FP residual x -> F(h, x) at one entropy,
``gexit(h, xs)`` the EBP-GEXIT value at fixed points, and ``rate`` / ``m``
for the area normalization.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
import math

import numpy as np
from scipy.interpolate import PchipInterpolator

from .cache import TableCache
from .channel import BawgnFamily, BicmFamily, ComplexFamily, Constellation
from .core import DEFAULT_DEGREE, gaussian_expectation, j_function, j_inverse_clipped
from .exit import (
    ComponentCode,
    ExitCurve,
    ExitSurface,
    bcjr_exit_batch,
    bcjr_exit_two_prior,
    block_code_exit_mc,
    detector_exit_batch,
    mi_grid,
)
from .fixed_point import DX, x_grid
from .kernel import bicm_kernel
from .nonbinary import gexit_nonbinary_point
from .trellis import ConvCode


@dataclass
class Settings:
    """Numerical knobs shared by all systems."""

    degree: int = DEFAULT_DEGREE
    fast_kernel: bool = False
    seed: int = 0
    block_len: int = 10_000
    n_blocks: int = 20
    n_bits: int = 200_000
    n_symbols: int = 50_000
    n_mc: int = 10_000
    exit_points: int = 101
    surface_points: int = 51
    detector_h_points: int = 41
    detector_mi_points: int = 26
    dx: float = DX
    cache: TableCache = field(default_factory=TableCache)
    pool: object = None

    def provenance(self) -> dict:
        return {k: v for k, v in self.__dict__.items() if k not in ("cache", "pool", "dx", "fast_kernel")}

    def map(self, fn, items):
        items = list(items)
        return list(self.pool.map(fn, items)) if self.pool is not None else [fn(i) for i in items]


def _chunks(seq, n):
    return [seq[i:i + n] for i in range(0, len(seq), n)]


def _code_id(code) -> dict:
    if isinstance(code, ConvCode):
        return {"feedback": code.feedback, "feedforward": list(code.feedforward), "systematic": code.systematic,
                "terminate": code.terminate}
    return {"kind": code.kind, "generator": np.asarray(code.generator).tolist()}


def _entropy_grid(h_max: float, n: int) -> np.ndarray:
    hs = np.linspace(0.0, h_max, n)
    hs[0] = 2e-3 * h_max
    return hs


def _mean_from_mi(mi):
    s = np.asarray(j_inverse_clipped(np.clip(mi, 0.0, 1.0)))
    return 0.5 * s * s


class System:
    """Common driver logic; subclasses provide tables and maps."""

    name: str = ""
    rate: float
    family: object
    settings: Settings

    @property
    def m(self) -> int:
        return self.family.m

    @property
    def h_max(self) -> float:
        return self.family.h_max

    def es_n0_db(self, h: float) -> float:
        return float(self.family.es_n0_db(h))

    def prepare(self) -> "System":
        return self

    def make(self, h: float):
        raise NotImplementedError

    def gexit(self, h: float, xs) -> np.ndarray:
        raise NotImplementedError

    def step(self, h: float, x):
        x = np.asarray(x, dtype=float)
        return x + self.make(h)(x)

    def converges(self, h: float, max_iters: int = 5000, target: float | None = None) -> bool:
        """Forward DE from x = 0 reaches the high-MI end."""
        target = 1.0 - 2 * self.settings.dx if target is None else target
        fn = self.make(h)
        x = np.zeros(1)
        for _ in range(max_iters):
            nxt = np.minimum(x + fn(x), 1.0)
            if nxt[0] >= target:
                return True
            if abs(nxt[0] - x[0]) < 1e-12:
                return False
            x = nxt
        return False

    def _kernel_expectation(self, mix, means) -> np.ndarray:
        means = np.atleast_1d(np.asarray(means, dtype=float))
        fast = self.settings.fast_kernel
        return np.asarray(gaussian_expectation(means, 2.0 * means, lambda z: bicm_kernel(mix, z, fast=fast),
                                               self.settings.degree))


# ---------------------------------------------------------------- LDPC family over BICM


@dataclass(frozen=True)
class NodeType:
    """A (possibly generalized) node: component code and node fraction."""

    code: ComponentCode
    fraction: float


class LdpcSystem(System):
    """LDPC / GLDPC / DGLDPC ensemble over a binary (BAWGN or Gray BICM) channel.

    A variable node of type (n, k) carries k channel bits and n edges;
    repetition VNs and SPC checks use the closed-form Gaussian EXIT rules,
    all other component codes Monte-Carlo APP tables.
    """

    def __init__(self, family, vn_types: list[NodeType], cn_types: list[NodeType], settings: Settings | None = None,
                 name: str = ""):
        self.family = family
        self.vn_types = list(vn_types)
        self.cn_types = list(cn_types)
        self.settings = settings or Settings()
        self.name = name
        for kind, types in (("variable", self.vn_types), ("check", self.cn_types)):
            if abs(sum(t.fraction for t in types) - 1.0) > 1e-9:
                raise ValueError(f"{kind}-node fractions must sum to 1")
        for t in self.vn_types:
            if t.code.kind == "repetition" and t.code.n < 2:
                raise ValueError("variable-node degrees must be at least 2")
        self._vn_tables = {}
        self._cn_tables = {}

    # structure
    @property
    def edges_per_vn(self) -> float:
        return sum(t.fraction * t.code.n for t in self.vn_types)

    @property
    def channel_bits_per_vn(self) -> float:
        return sum(t.fraction * t.code.k for t in self.vn_types)

    @property
    def rate(self) -> float:
        # check-node fractions are node-perspective: edges per check averages n over types
        edges_per_cn = sum(t.fraction * t.code.n for t in self.cn_types)
        constraints_per_cn = sum(t.fraction * (t.code.n - t.code.k) for t in self.cn_types)
        n_checks = self.edges_per_vn / edges_per_cn
        return 1.0 - n_checks * constraints_per_cn / self.channel_bits_per_vn

    def _edge_weights(self, types):
        e = np.array([t.fraction * t.code.n for t in types])
        return e / e.sum()

    # tables
    def prepare(self) -> "LdpcSystem":
        st = self.settings
        grid = mi_grid(st.exit_points)
        for i, t in enumerate(self.cn_types):
            if t.code.kind != "single-parity-check" and i not in self._cn_tables:
                prov = {"role": "CN", "code": _code_id(t.code), **st.provenance()}
                vals = st.cache.get_or_compute(
                    "cn", prov, ["I_in", "I_out"],
                    lambda c=t.code: np.column_stack([grid, st.map(
                        lambda v: block_code_exit_mc(c, "CN", float(v), n_bits=st.n_bits, seed=st.seed), grid)]))
                self._cn_tables[i] = ExitCurve(vals[:, 0], vals[:, 1])
        hs = _entropy_grid(self.h_max, st.surface_points)
        xs = mi_grid(st.surface_points)
        for i, t in enumerate(self.vn_types):
            if t.code.kind == "repetition" or i in self._vn_tables:
                continue
            prov = {"role": "VN", "code": _code_id(t.code), "channel": self._channel_id(), **st.provenance()}
            pts = [(h, x) for h in hs for x in xs]

            def run(p, c=t.code):
                return block_code_exit_mc(c, "VN", float(p[1]), self.family.mixture(float(p[0])),
                                          n_bits=st.n_bits, seed=st.seed, return_channel_mi=True)

            vals = st.cache.get_or_compute(
                "vn", prov, ["h", "I_in", "I_out", "I_channel"],
                lambda: np.column_stack([np.array(pts), np.array(st.map(run, pts))]))
            out = vals[:, 2].reshape(hs.size, xs.size)
            chan = vals[:, 3].reshape(hs.size, xs.size)
            self._vn_tables[i] = (ExitSurface(hs, xs, out, signs=(-1, 1)),
                                       ExitSurface(hs, xs, chan, signs=(-1, 1)))
        return self

    def _channel_id(self) -> dict:
        return {"family": type(self.family).__name__, "constellation": self.family.constellation.name}

    @lru_cache(maxsize=8192)
    def mixture(self, h: float):
        return self.family.mixture(h)

    def cn_curve(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        s = np.asarray(j_inverse_clipped(1.0 - np.clip(x, 0.0, 1.0)))
        for i, (w, t) in enumerate(zip(self._edge_weights(self.cn_types), self.cn_types)):
            if t.code.kind == "single-parity-check":
                val = 1.0 - np.asarray(j_function(math.sqrt(t.code.n - 1) * s))
            else:
                val = np.asarray(self._cn_tables[i](x))
            out = out + w * val
        return np.where(x >= 1.0, 1.0, out)

    def vn_curve(self, i_ec, h: float):
        i_ec = np.asarray(i_ec, dtype=float)
        mix = self.mixture(h)
        s2 = np.asarray(j_inverse_clipped(np.clip(i_ec, 0.0, 1.0))) ** 2
        out = np.zeros_like(i_ec)
        for i, (w, t) in enumerate(zip(self._edge_weights(self.vn_types), self.vn_types)):
            if t.code.kind == "repetition":
                val = sum(d * np.asarray(j_function(np.sqrt((t.code.n - 1) * s2 + 2.0 * l)))
                          for d, l in zip(mix.weights, mix.means))
            else:
                val = np.asarray(self._vn_tables[i][0](h, i_ec))
            out = out + w * val
        return np.where(i_ec >= 1.0, 1.0, out)

    def make(self, h: float):
        return lambda x: self.vn_curve(self.cn_curve(x), h) - np.asarray(x, dtype=float)

    def gexit(self, h: float, xs) -> np.ndarray:
        xs = np.atleast_1d(np.asarray(xs, dtype=float))
        mix = self.mixture(h)
        i_ec = self.cn_curve(xs)
        m_b = _mean_from_mi(i_ec)
        w = np.array([t.fraction * t.code.k for t in self.vn_types])
        w = w / w.sum()
        g = np.zeros_like(xs)
        for i, (wt, t) in enumerate(zip(w, self.vn_types)):
            if t.code.kind == "repetition":
                means = t.code.n * m_b
            else:
                means = _mean_from_mi(self._vn_tables[i][1](h, i_ec))
            g = g + wt * self._kernel_expectation(mix, means)
        return g


# ---------------------------------------------------------------- SC-TC over BICM


class ScTcSystem(System):
    """Serially concatenated turbo code; the inner code sees the binary channel.

    The FP runs on the a priori MI of the inner inputs. The GEXIT value is the
    channel kernel averaged against the inner extrinsic density of each
    transmitted (inner output) stream, each projected on a consistent Gaussian.
    """

    def __init__(self, family, outer: ConvCode, inner: ConvCode, settings: Settings | None = None, name: str = ""):
        self.family = family
        self.outer = outer
        self.inner = inner
        self.settings = settings or Settings()
        self.name = name
        self._outer_curve = None
        self._inner_in = None
        self._inner_out = None

    @property
    def rate(self) -> float:
        return self.outer.rate * self.inner.rate

    def _channel_id(self) -> dict:
        return {"family": type(self.family).__name__, "constellation": self.family.constellation.name}

    def _bcjr_kw(self):
        st = self.settings
        return {"block_len": st.block_len, "n_blocks": st.n_blocks, "seed": st.seed}

    def prepare(self) -> "ScTcSystem":
        st = self.settings
        self._outer_curve = outer_curve(self.outer, st)
        hs = _entropy_grid(self.h_max, st.surface_points)
        xs = mi_grid(st.surface_points)
        n = self.inner.n_out
        prov = {"role": "inner", "code": _code_id(self.inner), "channel": self._channel_id(), **st.provenance()}
        cols = ["h", "I_in", "I_ext_in"] + [f"I_ext_out{k}" for k in range(n)]

        def compute():
            pts = [(self.family.mixture(float(h)), float(x)) for h in hs for x in xs]
            parts = st.map(lambda c: bcjr_exit_batch(self.inner, c, role="inner", with_outputs=True,
                                                     **self._bcjr_kw()), _chunks(pts, 20))
            hx = np.array([(h, x) for h in hs for x in xs])
            return np.column_stack([hx, np.vstack(parts)])

        vals = st.cache.get_or_compute("inner", prov, cols, compute)
        shape = (hs.size, xs.size)
        self._inner_in = ExitSurface(hs, xs, vals[:, 2].reshape(shape), signs=(-1, 1))
        self._inner_out = [ExitSurface(hs, xs, vals[:, 3 + k].reshape(shape), signs=(-1, 1)) for k in range(n)]
        return self

    @lru_cache(maxsize=8192)
    def mixture(self, h: float):
        return self.family.mixture(h)

    def inner_curve(self, h: float, x):
        return self._inner_in(h, x)

    def outer_curve(self, x):
        return self._outer_curve(x)

    def make(self, h: float):
        return lambda x: self._outer_curve(self._inner_in(h, x)) - np.asarray(x, dtype=float)

    def gexit(self, h: float, xs) -> np.ndarray:
        xs = np.atleast_1d(np.asarray(xs, dtype=float))
        mix = self.mixture(h)
        g = np.zeros_like(xs)
        for surf in self._inner_out:
            g = g + self._kernel_expectation(mix, _mean_from_mi(surf(h, xs)))
        return g / len(self._inner_out)


def outer_curve(code: ConvCode, st: Settings) -> ExitCurve:
    grid = mi_grid(st.exit_points)
    prov = {"role": "outer", "code": _code_id(code), **st.provenance()}

    def compute():
        parts = st.map(lambda c: bcjr_exit_batch(code, [(None, float(x)) for x in c], role="outer",
                                                 block_len=st.block_len, n_blocks=st.n_blocks, seed=st.seed),
                       _chunks(list(grid), 20))
        return np.column_stack([grid, np.concatenate(parts)])

    vals = st.cache.get_or_compute("outer", prov, ["I_in", "I_out"], compute)
    return ExitCurve(vals[:, 0], vals[:, 1])


# ---------------------------------------------------------------- non-Gray: detector in the loop


class _DetectorMixin:
    family: ComplexFamily
    settings: Settings

    def _detector_table(self):
        st = self.settings
        c = self.family.constellation
        hs = _entropy_grid(self.h_max, st.detector_h_points)
        hs[-1] = self.h_max
        ia = mi_grid(st.detector_mi_points)
        prov = {"role": "detector", "constellation": c.name, "symbols": c.symbols.tolist(),
                "labels": c.labels.tolist(), "h": hs.tolist(), **st.provenance()}

        def compute():
            sig = [self.sigma(float(h)) for h in hs]
            rows = st.map(lambda s: detector_exit_batch(c, [(s, float(a)) for a in ia], st.n_symbols, st.seed), sig)
            hx = np.array([(h, a) for h in hs for a in ia])
            return np.column_stack([hx, np.concatenate(rows)])

        vals = st.cache.get_or_compute("detector", prov, ["h", "I_Ad", "I_Ed"], compute)
        self._det = ExitSurface(hs, ia, vals[:, 2].reshape(hs.size, ia.size), signs=(-1, 1))

    def sigma(self, h: float) -> float:
        # the useless-channel end is represented by a very large noise level
        top = self.h_max * (1.0 - 1e-4)
        return self.family.sigma(min(max(h, 1e-6), top))

    def det_curve(self, h: float, i_ad):
        return self._det(h, i_ad)

    def gexit_at(self, h: float, i_ad) -> np.ndarray:
        st = self.settings
        sig = self.sigma(h)
        return np.array([gexit_nonbinary_point(self.family.constellation, sig, float(a), st.degree, st.n_mc, st.seed)
                         for a in np.atleast_1d(i_ad)])


class DetectorLdpcSystem(_DetectorMixin, System):
    """Regular/irregular LDPC code with an APP detector for an arbitrary mapping."""

    def __init__(self, constellation: Constellation, lam: dict, rho: dict, settings: Settings | None = None,
                 name: str = ""):
        from .exit import DegreeDistribution

        self.family = ComplexFamily(constellation)
        self.dd = DegreeDistribution(lam, rho)
        self.settings = settings or Settings()
        self.name = name

    @property
    def rate(self) -> float:
        return self.dd.design_rate

    def prepare(self) -> "DetectorLdpcSystem":
        self._detector_table()
        return self

    def cn_curve(self, x):
        from .exit import cn_exit_irregular

        return np.asarray(cn_exit_irregular(self.dd, x))

    def vn_curve(self, i_ec, i_ed):
        sc2 = np.asarray(j_inverse_clipped(np.clip(i_ec, 0.0, 1.0))) ** 2
        sd2 = np.asarray(j_inverse_clipped(np.clip(i_ed, 0.0, 1.0))) ** 2
        out = sum(lam * np.asarray(j_function(np.sqrt((i - 1) * sc2 + sd2))) for i, lam in self.dd.lam.items())
        return np.where(np.asarray(i_ec) >= 1.0, 1.0, out)

    def vn_det_curve(self, i_ec):
        """Gamma'^V: all incoming check messages at a node, without the detector's own."""
        s2 = np.asarray(j_inverse_clipped(np.clip(i_ec, 0.0, 1.0))) ** 2
        out = sum(w * np.asarray(j_function(np.sqrt(i * s2))) for i, w in self.dd.Lambda.items())
        return np.where(np.asarray(i_ec) >= 1.0, 1.0, out)

    def make(self, h: float):
        def residual(x):
            c = self.cn_curve(x)
            return self.vn_curve(c, self.det_curve(h, self.vn_det_curve(c))) - np.asarray(x, dtype=float)
        return residual

    def gexit(self, h: float, xs) -> np.ndarray:
        return self.gexit_at(h, self.vn_det_curve(self.cn_curve(np.atleast_1d(xs))))


class DetectorScTcSystem(_DetectorMixin, System):
    """SC-TC whose inner code output is mapped by an arbitrary labelling.

    For a fixed outer-to-inner MI x the inner decoder and the detector are
    iterated to their joint fixed point (starting from a detector without
    a priori knowledge); the combined inner+detector unit then feeds the outer
    code. The FP coordinate stays the a priori MI on the inner inputs.
    """

    def __init__(self, constellation: Constellation, outer: ConvCode, inner: ConvCode,
                 settings: Settings | None = None, name: str = ""):
        self.family = ComplexFamily(constellation)
        self.outer = outer
        self.inner = inner
        self.settings = settings or Settings()
        self.name = name

    @property
    def rate(self) -> float:
        return self.outer.rate * self.inner.rate

    def prepare(self) -> "DetectorScTcSystem":
        st = self.settings
        self._outer_curve = outer_curve(self.outer, st)
        self._detector_table()
        a = mi_grid(st.surface_points)
        prov = {"role": "inner-two-prior", "code": _code_id(self.inner), **st.provenance()}

        def compute():
            pts = [(float(u), float(c)) for u in a for c in a]
            parts = st.map(lambda ch: bcjr_exit_two_prior(self.inner, ch, block_len=st.block_len,
                                                          n_blocks=st.n_blocks, seed=st.seed), _chunks(pts, 20))
            return np.column_stack([np.array(pts), np.vstack(parts)])

        vals = st.cache.get_or_compute("inner2", prov, ["I_Au", "I_Ac", "I_Eu", "I_Ec"], compute)
        shape = (a.size, a.size)
        self._tu = ExitSurface(a, a, vals[:, 2].reshape(shape), signs=(1, 1))
        self._tc = ExitSurface(a, a, vals[:, 3].reshape(shape), signs=(1, 1))
        return self

    def inner_detector(self, h: float, x, max_iters: int = 500, tol: float = 1e-10):
        """Joint inner/detector FP for each x: returns (I_Eu, I_Ad)."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        d = np.asarray(self._det(h, np.zeros_like(x)))
        for _ in range(max_iters):
            c = self._tc(x, d)
            nd = np.asarray(self._det(h, c))
            done = np.max(np.abs(nd - d)) < tol
            d = nd
            if done:
                break
        return np.asarray(self._tu(x, d)), np.asarray(self._tc(x, d))

    def make(self, h: float):
        xs = x_grid(self.settings.dx)
        u, _ = self.inner_detector(h, xs)
        f = PchipInterpolator(xs, np.asarray(self._outer_curve(u)) - xs)
        return lambda x: f(np.clip(x, 0.0, 1.0))

    def gexit(self, h: float, xs) -> np.ndarray:
        _, i_ad = self.inner_detector(h, xs)
        return self.gexit_at(h, i_ad)


def binary_family(constellation: Constellation):
    if constellation.m == 1:
        return BawgnFamily(constellation)
    return BicmFamily(constellation)
