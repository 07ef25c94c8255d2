"""EXIT density evolution of terminated spatially-coupled SC-TC chains."""

from __future__ import annotations

from dataclasses import dataclass, field
import csv
import io

import numpy as np

from .core import j_function, j_inverse_clipped


@dataclass(frozen=True)
class CouplingConfig:
    """Coupling vector b (fractions passed from copy t to t+i), chain length L."""

    b: tuple = (0.5, 0.5)
    L: int = 50
    max_iters: int = 20_000
    tol: float = 1e-4
    stall_iters: int = 100
    stall_eps: float = 1e-9

    def __post_init__(self):
        b = tuple(float(v) for v in self.b)
        object.__setattr__(self, "b", b)
        if not b or any(v < 0 or v > 1 for v in b) or abs(sum(b) - 1.0) > 1e-12:
            raise ValueError("coupling fractions must lie in [0, 1] and sum to 1")
        if self.L < 1:
            raise ValueError("coupling length must be positive")

    @property
    def m_s(self) -> int:
        return len(self.b) - 1

    @classmethod
    def paper_scale(cls, b=(0.5, 0.5)) -> "CouplingConfig":
        return cls(b=b, L=200, max_iters=100_000)


def coupled_rate(rate: float, m_s: int, L: int) -> float:
    """R_L = R - m_s / (L + m_s) R."""
    return rate - m_s / (L + m_s) * rate


@dataclass
class CoupledState:
    inner_a: np.ndarray
    inner_e: np.ndarray
    outer_a: np.ndarray
    outer_e: np.ndarray
    iterations: int = 0
    history: list = field(default_factory=list)

    @property
    def outer_app(self) -> np.ndarray:
        """A posteriori MI of the outer coded bits: a priori and extrinsic combined."""
        sa = np.asarray(j_inverse_clipped(self.outer_a))
        se = np.asarray(j_inverse_clipped(self.outer_e))
        return np.asarray(j_function(np.sqrt(sa * sa + se * se)))


def coupled_de_run(inner, outer, cfg: CouplingConfig, record_every: int = 0) -> tuple[bool, CoupledState]:
    """Run the coupled EXIT recursion at one channel.

    ``inner(x)`` and ``outer(x)`` are vectorized transfer functions at the
    channel of interest. Outer stage i feeds inner stages i..i+m_s; positions
    outside the chain are padded with known bits (MI 1).
    """
    b = np.asarray(cfg.b)
    ms, L = cfg.m_s, cfg.L
    n_in = L + ms
    st = CoupledState(np.zeros(n_in), np.zeros(n_in), np.zeros(L), np.zeros(L))
    padded = np.ones(L + 2 * ms)
    # J(sqrt(sa^2 + se^2)) >= 1 - tol needs max(sa, se) >= s*/sqrt(2): skip the exact check below that
    gate = float(j_function(float(j_inverse_clipped(1.0 - cfg.tol)) / np.sqrt(2.0)))
    still = 0
    for it in range(1, cfg.max_iters + 1):
        padded[ms:ms + L] = st.outer_e
        # inner stage j collects from outer stages j-k, k = 0..m_s
        st.inner_a = sum(b[k] * padded[ms - k:ms - k + n_in] for k in range(ms + 1))
        st.inner_e = np.asarray(inner(st.inner_a), dtype=float)
        st.outer_a = sum(b[k] * st.inner_e[k:k + L] for k in range(ms + 1))
        new_e = np.asarray(outer(st.outer_a), dtype=float)
        delta = float(np.max(np.abs(new_e - st.outer_e)))
        st.outer_e = new_e
        st.iterations = it
        if record_every and (it == 1 or it % record_every == 0):
            st.history.append((it, st.outer_app.copy()))
        if (float(np.min(np.maximum(st.outer_a, st.outer_e))) >= gate
                and float(np.min(st.outer_app)) >= 1.0 - cfg.tol):
            return True, st
        still = still + 1 if delta < cfg.stall_eps else 0
        if still >= cfg.stall_iters:
            return False, st
    return False, st


def wave_csv(state: CoupledState) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["iter", "stage", "I_ap"])
    for it, app in state.history:
        for i, v in enumerate(app):
            w.writerow([it, i + 1, f"{v:.10g}"])
    return buf.getvalue()


def _frozen_inner(system, h: float, n: int = 2001):
    xs = np.linspace(0.0, 1.0, n)
    ys = np.asarray(system.inner_curve(h, xs))
    return lambda x: np.interp(x, xs, ys)


def coupled_converges(system, h: float, cfg: CouplingConfig) -> bool:
    ok, _ = coupled_de_run(_frozen_inner(system, h), system.outer_curve, cfg)
    return ok


def coupled_bp_threshold(system, cfg: CouplingConfig, lo: float, hi: float, tol: float = 1e-3) -> float:
    """Largest channel entropy in [lo, hi] at which the coupled chain decodes."""
    if not coupled_converges(system, lo, cfg):
        raise ValueError(f"coupled chain does not decode at the lower bracket h={lo}")
    if coupled_converges(system, hi, cfg):
        return hi
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if coupled_converges(system, mid, cfg):
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)
