"""Grid-scan discovery of the complete fixed-point family of a DE map."""

from __future__ import annotations

from dataclasses import dataclass
import csv
import io

import numpy as np

FP_TOL = 1e-7
DX = 1e-3
DH_COARSE = 1e-2
DH_FINE = 1e-3


class DegenerateMapError(ValueError):
    """The residual vanishes on the whole scan grid."""


@dataclass(frozen=True)
class FixedPoint:
    h: float
    x: float
    residual: float
    stability: str  # stable | unstable | fold


def x_grid(dx: float = DX) -> np.ndarray:
    return np.linspace(0.0, 1.0, int(round(1.0 / dx)) + 1)


def _slope(fn, x, dx):
    lo = np.clip(x - dx, 0.0, 1.0)
    hi = np.clip(x + dx, 0.0, 1.0)
    return (fn(hi) - fn(lo)) / np.maximum(hi - lo, 1e-300)


def _tag(slope: float) -> str:
    return "stable" if slope < 0 else "unstable"


def scan_h(fn, h: float, xs=None, tol: float = FP_TOL) -> list[FixedPoint]:
    """All fixed points of ``x -> x + fn(x)`` on [0, 1]; ``h`` only labels the result.

    ``fn`` is the residual at one entropy, vectorized in x. Sign-change brackets
    (including those around grid points with |F| <= tol) are bisected; runs of
    grid points with |F| <= tol at the ends of [0, 1] or where F keeps its sign
    become fixed points, the latter tagged ``fold``.
    """
    xs = x_grid() if xs is None else np.asarray(xs, dtype=float)
    f = np.asarray(fn(xs), dtype=float)
    if not np.all(np.isfinite(f)):
        raise ValueError(f"non-finite residual at h={h}")
    zero = np.abs(f) <= tol
    if np.all(zero):
        raise DegenerateMapError(f"residual vanishes on the whole grid at h={h}")
    sgn = np.where(zero, 0, np.sign(f)).astype(int)
    out: list[FixedPoint] = []
    brackets = []  # (lo, hi, F(lo)) with a strict sign change

    # runs of grid points that are already fixed points
    i, n = 0, xs.size
    while i < n:
        if sgn[i] != 0:
            i += 1
            continue
        j = i
        while j + 1 < n and sgn[j + 1] == 0:
            j += 1
        k = (i + j) // 2
        left = sgn[i - 1] if i > 0 else 0
        right = sgn[j + 1] if j + 1 < n else 0
        if left and right and left != right:
            # a transversal root that merely lies close to the grid: bisect it
            brackets.append((xs[i - 1], xs[j + 1], f[i - 1]))
            i = j + 1
            continue
        if left and right:
            tag = "fold"
        elif left or right:
            tag = "stable" if (left > 0 or right < 0) else "unstable"
        else:
            tag = _tag(float(_slope(fn, np.array([xs[k]]), xs[1] - xs[0])[0]))
        out.append(FixedPoint(float(h), float(xs[k]), float(f[k]), tag))
        i = j + 1

    # strict sign changes, bisected together
    idx = np.nonzero(sgn[:-1] * sgn[1:] < 0)[0]
    brackets += [(xs[k], xs[k + 1], f[k]) for k in idx]
    if brackets:
        lo, hi, flo = (np.array(v, dtype=float) for v in zip(*brackets))
        while np.max(hi - lo) > tol * 1e-2:
            mid = 0.5 * (lo + hi)
            fm = np.asarray(fn(mid), dtype=float)
            left = np.sign(fm) == np.sign(flo)
            lo = np.where(left, mid, lo)
            flo = np.where(left, fm, flo)
            hi = np.where(left, hi, mid)
        root = 0.5 * (lo + hi)
        res = np.asarray(fn(root), dtype=float)
        for x, r, s in zip(root, res, flo):
            # F goes from s to -s across the root: positive to negative is attracting
            out.append(FixedPoint(float(h), float(x), float(r), "stable" if s > 0 else "unstable"))
    out.sort(key=lambda p: p.x)
    return out


def _count(points: list[FixedPoint], x_trivial: float) -> int:
    return sum(p.x < x_trivial for p in points)


def scan(make, h_lo: float, h_hi: float, dh: float = DH_COARSE, dh_fine: float = DH_FINE, xs=None,
         tol: float = FP_TOL, x_trivial: float = 1.0 - 2 * DX, pool=None) -> list[FixedPoint]:
    """Scan a coarse h grid, then refine to ``dh_fine`` wherever the FP count changes.

    ``make(h)`` returns the residual x -> F(h, x) at one entropy.
    """
    def one(h):
        return scan_h(make(h), h, xs, tol)

    n = max(1, int(round((h_hi - h_lo) / dh)))
    hs = np.linspace(h_lo, h_hi, n + 1)
    mapper = pool.map if pool is not None else map
    per_h = dict(zip(hs.tolist(), mapper(one, hs.tolist())))
    extra = []
    for a, b in zip(hs[:-1], hs[1:]):
        if _count(per_h[a], x_trivial) != _count(per_h[b], x_trivial):
            m = max(2, int(round((b - a) / dh_fine)))
            extra.extend(np.linspace(a, b, m + 1)[1:-1].tolist())
    per_h.update(zip(extra, mapper(one, extra)))
    return [p for h in sorted(per_h) for p in per_h[h]]


def fp_scan_ldpc(cn_curve, vn_curve, h_lo: float, h_hi: float, **kw) -> list[FixedPoint]:
    """F(x) = Gamma^V(Gamma^C(x), h) - x with ``vn_curve(i_ec, h)``."""
    return scan(lambda h: lambda x: vn_curve(cn_curve(x), h) - x, h_lo, h_hi, **kw)


def fp_scan_sctc(inner, outer, h_lo: float, h_hi: float, **kw) -> list[FixedPoint]:
    """F(x) = Gamma^O(Gamma^I(h, x)) - x."""
    return scan(lambda h: lambda x: outer(inner(h, x)) - x, h_lo, h_hi, **kw)


def fp_scan_detector_coupled(vn_curve, cn_curve, vn_det_curve, det_curve, h_lo: float, h_hi: float,
                             **kw) -> list[FixedPoint]:
    """F(x) = Gamma^V(Gamma^C(x), Gamma^D(Gamma'^V(Gamma^C(x)), h)) - x.

    ``vn_curve(i_ec, i_ed)``, ``det_curve(h, i_ad)``.
    """

    def make(h):
        def residual(x):
            c = cn_curve(x)
            return vn_curve(c, det_curve(h, vn_det_curve(c))) - x
        return residual

    return scan(make, h_lo, h_hi, **kw)


def iterate_de(step, h: float, x0: float, max_iters: int = 5000, tol: float = 1e-10) -> float:
    """Forward iteration of ``x -> step(h, x)`` until it stalls."""
    x = float(x0)
    for _ in range(max_iters):
        nxt = float(step(h, np.array([x]))[0])
        if abs(nxt - x) < tol:
            return nxt
        x = nxt
    return x


def fixed_points_csv(points: list[FixedPoint]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["h", "x", "residual", "stability"])
    for p in points:
        w.writerow([f"{p.h:.10g}", f"{p.x:.10g}", f"{p.residual:.3e}", p.stability])
    return buf.getvalue()
