"""Threshold extraction from EBP-GEXIT charts: Maxwell construction,
area-theorem upper bound and BP threshold."""

from __future__ import annotations

from dataclasses import asdict, dataclass
import json

import numpy as np


class ChartError(ValueError):
    """The chart cannot support the requested construction."""


def _oriented(h, g):
    """Curve arrays starting at the max-entropy, g = 1 end."""
    h = np.asarray(h, dtype=float)
    g = np.asarray(g, dtype=float)
    if h.size < 2:
        raise ChartError("chart needs at least two points")
    if h.shape != g.shape:
        raise ChartError("h and g must have equal length")
    if (g[-1], h[-1]) > (g[0], h[0]):
        h, g = h[::-1], g[::-1]
    return h, g


def signed_area(h, g) -> float:
    """Trapezoidal area g dh along the curve, oriented so a C-shaped chart is positive.

    Starting at the upper-right end the upper branch is traversed leftwards
    (dh < 0) and the lower branch rightwards; the negated sum is the area
    between the two branches plus the area under the lower one.
    """
    h, g = _oriented(h, g)
    return float(-np.sum(0.5 * (g[1:] + g[:-1]) * np.diff(h)))


def upper_envelope(h, g, grid):
    """max over curve segments of the linearly interpolated g at each grid h; 0 where uncovered.

    ``grid`` must be sorted ascending.
    """
    h = np.asarray(h, dtype=float)
    g = np.asarray(g, dtype=float)
    grid = np.asarray(grid, dtype=float)
    out = np.zeros_like(grid)
    h0, h1, g0, g1 = h[:-1], h[1:], g[:-1], g[1:]
    lo, hi = np.minimum(h0, h1), np.maximum(h0, h1)
    i0 = np.searchsorted(grid, lo, side="left")
    i1 = np.searchsorted(grid, hi, side="right")
    counts = np.maximum(i1 - i0, 0)
    seg = np.repeat(np.arange(h0.size), counts)
    if seg.size:
        # grid index of each (segment, covered point) pair
        idx = np.arange(seg.size) - np.repeat(np.cumsum(counts) - counts, counts) + np.repeat(i0, counts)
        flat = hi[seg] == lo[seg]
        t = np.where(flat, 0.0, (grid[idx] - h0[seg]) / np.where(flat, 1.0, h1[seg] - h0[seg]))
        val = np.where(flat, np.maximum(g0[seg], g1[seg]), g0[seg] + t * (g1[seg] - g0[seg]))
        np.maximum.at(out, idx, val)
    return out


def fold_h(h, g) -> float:
    """Leftmost entropy reached by the curve."""
    return float(np.min(h))


def has_fold(h, g) -> bool:
    h, g = _oriented(h, g)
    i = int(np.argmin(h))
    return 0 < i < h.size - 1 and h[-1] > h[i] + 1e-12


def _envelope_tail(h, g, n_grid: int = 20001):
    # the channel range ends at the anchor; unstable branches may run past it
    h, g = _oriented(h, g)
    lo, hi = float(np.min(h)), float(h[0])
    grid = np.linspace(lo, hi, n_grid)
    env = upper_envelope(h, g, grid)
    # tail[i] = integral of the envelope from grid[i] to hi
    seg = 0.5 * (env[1:] + env[:-1]) * np.diff(grid)
    tail = np.concatenate([np.cumsum(seg[::-1])[::-1], [0.0]])
    return grid, tail


def _solve_tail(grid, tail, target: float) -> float:
    """h with integral_{h}^{max} g_up dh = target (tail is non-increasing)."""
    if target <= 0:
        return float(grid[-1])
    if target > tail[0]:
        raise ChartError("envelope area is smaller than the target")
    # np.interp needs increasing abscissae
    return float(np.interp(target, tail[::-1], grid[::-1]))


def area_upper_bound(h, g, rate: float, m: float = 1.0) -> float:
    """h_UB with (1/m) integral_{h_UB}^{h_max} g_up dh = rate."""
    if not 0 < rate <= 1:
        raise ValueError("rate must lie in (0, 1]")
    grid, tail = _envelope_tail(h, g)
    try:
        return _solve_tail(grid, tail, m * rate)
    except ChartError:
        raise ChartError("chart incomplete: envelope integral is below the rate") from None


def _runs(h) -> list[tuple[int, int]]:
    """Maximal index ranges over which h moves in one direction (flat steps join the current run)."""
    d = np.sign(np.diff(h))
    runs, start, cur = [], 0, 0
    for i, v in enumerate(d):
        if v == 0 or cur == 0 or v == cur:
            cur = cur or v
            continue
        runs.append((start, i))
        start, cur = i, v
    runs.append((start, h.size - 1))
    return runs


def lower_branch(h, g):
    """Trailing stable branch left of the last fold, or None.

    EBP charts normally end on the unstable branch moving towards larger h,
    with the trivial zero-g fixed point below it. A curve whose last run moves
    back towards smaller h instead carries a stable lower branch of its own;
    it must reach the low-entropy end, which rules out jitter in noisy charts.
    """
    h, g = _oriented(h, g)
    runs = _runs(h)
    if len(runs) < 3:
        return None
    a, b = runs[-1]
    if h[b] >= h[a] or h[b] > np.min(h) + 1e-12:
        return None
    return h[a:b + 1][::-1], g[a:b + 1][::-1]


def map_threshold(h, g) -> float:
    """Maxwell construction: the vertical line that balances the EBP areas.

    The MAP curve follows the upper branch right of h* and, left of h*, the
    stable lower branch (the trivial zero-g branch when the chart has none).
    Its area equals the signed EBP area. Without a fold, the value is where
    the single branch leaves zero.
    """
    h_arr, g_arr = _oriented(h, g)
    if not has_fold(h_arr, g_arr) and lower_branch(h_arr, g_arr) is None:
        return departure_h(h_arr, g_arr)
    area = signed_area(h_arr, g_arr)
    grid, tail = _envelope_tail(h_arr, g_arr)
    low = lower_branch(h_arr, g_arr)
    if low is not None:
        lh, lg = low
        g_low = np.where((grid >= lh[0]) & (grid <= lh[-1]), np.interp(grid, lh, lg), 0.0)
        head = np.concatenate([[0.0], np.cumsum(0.5 * (g_low[1:] + g_low[:-1]) * np.diff(grid))])
        # tail + head is non-increasing in h*: its slope is g_low - g_up
        total = tail + head
        if area >= total[0]:
            return float(grid[0])
        if area <= total[-1]:
            return float(grid[-1])
        return float(np.interp(area, total[::-1], grid[::-1]))
    if area >= tail[0]:
        return float(grid[0])
    return _solve_tail(grid, tail, area)


def departure_h(h, g, eps: float = 1e-3) -> float:
    h = np.asarray(h, dtype=float)
    g = np.asarray(g, dtype=float)
    live = g > eps
    return float(np.min(h[live])) if np.any(live) else float(np.max(h))


def bp_threshold_from_chart(h, g) -> float:
    """Fold of the curve, or the departure point of a fold-free chart."""
    h_arr, g_arr = _oriented(h, g)
    if not has_fold(h_arr, g_arr):
        return departure_h(h_arr, g_arr)
    return fold_h(h_arr, g_arr)


def bp_threshold_de(converges, lo: float, hi: float, tol: float = 1e-4) -> float:
    """Largest h in [lo, hi] for which ``converges(h)`` holds, by bisection."""
    if not converges(lo):
        raise ChartError("decoder does not converge at the lower end of the bracket")
    if converges(hi):
        return hi
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if converges(mid):
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


@dataclass
class ThresholdReport:
    h_map: float
    h_ub: float
    h_bp: float
    es_n0_db_map: float | None = None
    es_n0_db_ub: float | None = None
    es_n0_db_bp: float | None = None
    area: float | None = None
    rate: float | None = None

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)


def threshold_report(h, g, rate: float, m: float = 1.0, es_n0=None, bp: float | None = None) -> ThresholdReport:
    h_map = map_threshold(h, g)
    h_ub = area_upper_bound(h, g, rate, m)
    h_bp = bp_threshold_from_chart(h, g) if bp is None else bp
    rep = ThresholdReport(h_map, h_ub, h_bp, area=signed_area(h, g) / m, rate=rate)
    if es_n0 is not None:
        rep.es_n0_db_map = es_n0(h_map)
        rep.es_n0_db_ub = es_n0(h_ub)
        rep.es_n0_db_bp = es_n0(h_bp)
    return rep
