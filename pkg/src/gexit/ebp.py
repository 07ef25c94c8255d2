"""EBP-GEXIT charts: evaluation at fixed points, assembly and threshold extraction."""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
import csv
import io

import numpy as np

from .channel import LDensityMixture
from .core import DEFAULT_DEGREE, gaussian_expectation, j_inverse_clipped
from .exit import DegreeDistribution, cn_exit_irregular
from .fixed_point import DH_COARSE, DH_FINE, FixedPoint, scan, x_grid
from .kernel import bicm_kernel
from .maxwell import ThresholdReport, area_upper_bound, bp_threshold_de, map_threshold, signed_area


def _kernel_mean(mix: LDensityMixture, mean: float, rule, fast: bool) -> float:
    return float(gaussian_expectation(mean, 2.0 * mean, lambda z: bicm_kernel(mix, z, fast=fast), rule))


def ebp_point_ldpc(dd: DegreeDistribution, mix: LDensityMixture, x: float, rule=DEFAULT_DEGREE,
                   fast: bool = False) -> float:
    """g = sum_j Lambda_j E_{N(j m_b, 2 j m_b)}[l(z)] with m_b from Gamma^C(x)."""
    s = float(j_inverse_clipped(cn_exit_irregular(dd, x)))
    m_b = 0.5 * s * s
    return sum(w * _kernel_mean(mix, j * m_b, rule, fast) for j, w in dd.Lambda.items())


def ebp_point_sctc(extrinsic_mis, mix: LDensityMixture, rule=DEFAULT_DEGREE, fast: bool = False) -> float:
    """Kernel averaged over the Gaussian projections of the inner extrinsic MI of each transmitted stream."""
    mis = np.atleast_1d(np.asarray(extrinsic_mis, dtype=float))
    means = 0.5 * np.asarray(j_inverse_clipped(np.clip(mis, 0.0, 1.0))) ** 2
    return float(np.mean([_kernel_mean(mix, float(m), rule, fast) for m in means]))


@dataclass
class EbpChart:
    """Points (h, g, x) ordered along the EBP curve."""

    h: np.ndarray
    g: np.ndarray
    x: np.ndarray
    branch: list
    meta: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return int(self.h.size)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["h", "g", "x", "branch"])
        for h, g, x, b in zip(self.h, self.g, self.x, self.branch):
            w.writerow([f"{h:.10g}", f"{g:.10g}", f"{x:.10g}", b])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, meta: dict | None = None) -> "EbpChart":
        rows = list(csv.DictReader(io.StringIO(text)))
        return cls(np.array([float(r["h"]) for r in rows]), np.array([float(r["g"]) for r in rows]),
                   np.array([float(r["x"]) for r in rows]), [r["branch"] for r in rows], meta or {})


def _curve_order(points):
    # x parameterizes the curve; ties at the saturated ends are broken by h
    return sorted(points, key=lambda p: (p[2], -p[0] if p[2] < 0.5 else p[0]))


def assemble_chart(system, dh: float = DH_COARSE, dh_fine: float = DH_FINE, h_lo: float | None = None,
                   pool=None, meta: dict | None = None) -> EbpChart:
    """Scan the complete FP family of ``system`` and evaluate g at every non-trivial FP."""
    st = system.settings
    xs = x_grid(st.dx)
    x_trivial = 1.0 - 2 * st.dx
    h_hi = system.h_max
    h_lo = dh * system.h_max if h_lo is None else h_lo
    fps = scan(system.make, h_lo, h_hi, dh=dh * system.h_max, dh_fine=dh_fine * system.h_max, xs=xs,
               x_trivial=x_trivial, pool=pool)
    by_h: dict[float, list[FixedPoint]] = defaultdict(list)
    for p in fps:
        if p.x < x_trivial:
            by_h[p.h].append(p)
    hs = sorted(by_h)
    mapper = pool.map if pool is not None else map
    gs = list(mapper(lambda h: system.gexit(h, np.array([p.x for p in by_h[h]])), hs))
    pts = [(h, float(g), p.x, p.stability) for h, gv in zip(hs, gs) for p, g in zip(by_h[h], gv)]
    if not any(abs(p[0] - h_hi) < 1e-12 and p[2] == 0.0 for p in pts):
        pts.append((h_hi, 1.0, 0.0, "anchor"))
    pts = _curve_order(pts)
    info = {"system": system.name, "rate": system.rate, "m": system.m, "h_max": system.h_max,
            "fast_kernel": st.fast_kernel, "seed": st.seed, **(meta or {})}
    return EbpChart(np.array([p[0] for p in pts]), np.array([p[1] for p in pts]),
                    np.array([p[2] for p in pts]), [p[3] for p in pts], info)


def chart_thresholds(system, chart: EbpChart, bp_tol: float = 1e-4) -> ThresholdReport:
    """MAP (Maxwell), area upper bound and DE BP threshold, in h and Es/N0."""
    h_map = map_threshold(chart.h, chart.g)
    h_ub = area_upper_bound(chart.h, chart.g, system.rate, system.m)
    h_bp = bp_threshold_de(system.converges, 0.02 * system.h_max, system.h_max * (1 - 1e-6), bp_tol)
    rep = ThresholdReport(h_map, h_ub, h_bp, area=signed_area(chart.h, chart.g) / system.m, rate=system.rate)
    rep.es_n0_db_map = system.es_n0_db(h_map)
    rep.es_n0_db_ub = system.es_n0_db(h_ub)
    rep.es_n0_db_bp = system.es_n0_db(h_bp)
    return rep
