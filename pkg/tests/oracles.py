"""Independent reference computations used to derive frozen test values.

Nothing here imports the package under test: every quantity is computed from
its defining integral with adaptive quadrature or root finding.
Run ``python3 tests/oracles.py`` to print the values frozen in the tests.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import integrate, optimize


def gauss_pdf(x, mean, var):
    return math.exp(-((x - mean) ** 2) / (2 * var)) / math.sqrt(2 * math.pi * var)


def softplus_neg(x):
    return math.log1p(math.exp(-x)) if x > -30 else -x + math.log1p(math.exp(x))


def j_oracle(s: float) -> float:
    """1 - E[log2(1 + e^-L)], L ~ N(s^2/2, s^2), by adaptive quadrature."""
    if s == 0:
        return 0.0
    mu, var = 0.5 * s * s, s * s
    sd = math.sqrt(var)
    val, _ = integrate.quad(lambda x: gauss_pdf(x, mu, var) * softplus_neg(x), mu - 40 * sd, mu + 40 * sd,
                            epsabs=1e-14, epsrel=1e-13, limit=400, points=[0.0] if abs(mu) < 40 * sd else None)
    return 1.0 - val / math.log(2)


def j_inverse_oracle(mi: float) -> float:
    return optimize.brentq(lambda s: j_oracle(s) - mi, 1e-9, 80.0, xtol=1e-13)


def expectation_oracle(f, mean: float, var: float) -> float:
    sd = math.sqrt(var)
    val, _ = integrate.quad(lambda x: gauss_pdf(x, mean, var) * f(x), mean - 40 * sd, mean + 40 * sd,
                            epsabs=1e-14, epsrel=1e-13, limit=400)
    return val


def kernel_oracle(mu: float, z: float) -> float:
    """E[1/(1+e^{W+z})] / E[1/(1+e^W)], W ~ N(mu, 2 mu)."""
    def sig(x):
        return 1.0 / (1.0 + math.exp(x)) if x < 700 else 0.0

    num = expectation_oracle(lambda w: sig(w + z), mu, 2 * mu)
    den = expectation_oracle(sig, mu, 2 * mu)
    return num / den


def bawgn_entropy_oracle(sigma: float) -> float:
    return 1.0 - j_oracle(2.0 / sigma)


def pam_entropy_oracle(levels, s: float) -> float:
    """H(X|Y) in bits for equiprobable real levels in N(0, s^2) noise."""
    levels = np.asarray(levels, dtype=float)

    def cond(x0):
        def f(n):
            y = x0 + n
            d = -((y - levels) ** 2 - n * n) / (2 * s * s)
            mx = d.max()
            return (mx + math.log(np.exp(d - mx).sum())) / math.log(2)

        val, _ = integrate.quad(lambda n: gauss_pdf(n, 0.0, s * s) * f(n), -40 * s, 40 * s, epsabs=1e-13,
                                limit=400)
        return val

    return float(np.mean([cond(x) for x in levels]))


def qam16_entropy_oracle(sigma: float) -> float:
    """Square 16-QAM (unit energy) with complex noise of total variance sigma^2."""
    lev = np.array([-3.0, -1.0, 1.0, 3.0]) / math.sqrt(10.0)
    return 2.0 * pam_entropy_oracle(lev, sigma / math.sqrt(2.0))


def qam16_gray_bit_mi_mc(sigma: float, n: int = 400_000, seed: int = 11) -> float:
    """Average bit MI of 16-QAM Gray with an exact max-free APP demapper, by simulation."""
    rng = np.random.default_rng(seed)
    lev = np.array([-3.0, -1.0, 1.0, 3.0]) / math.sqrt(10.0)
    gray = np.array([[0, 0], [0, 1], [1, 1], [1, 0]])  # per-dimension Gray labels
    idx = rng.integers(0, 4, n)
    y = lev[idx] + sigma / math.sqrt(2.0) * rng.standard_normal(n)
    like = np.exp(-((y[:, None] - lev[None, :]) ** 2) / sigma**2)  # per-dim var sigma^2/2
    mi = 0.0
    for k in range(2):
        p0 = like[:, gray[:, k] == 0].sum(1)
        p1 = like[:, gray[:, k] == 1].sum(1)
        llr = np.log(p0) - np.log(p1)
        s = 1.0 - 2.0 * gray[idx, k]
        mi += 1.0 - np.mean(np.logaddexp(0.0, -s * llr)) / math.log(2)
    return mi / 2  # both dimensions are identical in distribution


def cn_exit_oracle(dc: int, x: float) -> float:
    return 1.0 - j_oracle(math.sqrt(dc - 1) * j_inverse_oracle(1.0 - x))


def vn_exit_oracle(dv: int, x: float, sigma: float) -> float:
    s = j_inverse_oracle(x)
    return j_oracle(math.sqrt((dv - 1) * s * s + 4.0 / sigma**2))


def de_attractors_36(sigma: float, iters: int = 20000):
    """Forward DE of the (3,6) BPSK map from x = 0 and x = 1^-; returns both limits."""
    def step(x):
        c = cn_exit_oracle(6, x) if x < 1 else 1.0
        return vn_exit_oracle(3, min(c, 1 - 1e-12), sigma) if c > 0 else j_oracle(2.0 / sigma)

    out = []
    for x in (0.0, 1.0 - 1e-9):
        for _ in range(iters):
            nx = step(x)
            if abs(nx - x) < 1e-12:
                break
            x = nx
        out.append(x)
    return out


def bec_ebp(dv: int, dc: int, x):
    """EBP curve of the regular (dv, dc) ensemble on the BEC, parameterized by the VN-to-CN erasure rate x."""
    x = np.asarray(x, dtype=float)
    y = 1.0 - (1.0 - x) ** (dc - 1)
    return x / y ** (dv - 1), y ** dv


def bec_map_threshold(dv: int, dc: int) -> float:
    """eps with integral of the stable EBP branch from eps to 1 equal to the design rate."""
    rate = 1.0 - dv / dc

    def deps(t, d=1e-7):
        return (bec_ebp(dv, dc, t + d)[0] - bec_ebp(dv, dc, t - d)[0]) / (2 * d)

    fold = optimize.minimize_scalar(lambda t: bec_ebp(dv, dc, t)[0], bounds=(1e-3, 1.0), method="bounded",
                                    options={"xatol": 1e-12}).x

    def area(x0):
        val, _ = integrate.quad(lambda t: bec_ebp(dv, dc, t)[1] * deps(t), x0, 1.0 - 1e-7, epsabs=1e-13, limit=200)
        return val - rate

    return float(bec_ebp(dv, dc, optimize.brentq(area, fold, 1.0 - 1e-6, xtol=1e-13))[0])


if __name__ == "__main__":
    print("J(1.6366) =", repr(j_oracle(1.6366)))
    print("J^-1(0.5) =", repr(j_inverse_oracle(0.5)))
    print("E[log2(1+e^-z)], N(2,4) =", repr(expectation_oracle(lambda z: softplus_neg(z) / math.log(2), 2.0, 4.0)))
    print("bawgn_entropy(0.9787) =", repr(bawgn_entropy_oracle(0.9787)))
    mu = 2.0 / optimize.brentq(lambda s: bawgn_entropy_oracle(s) - 0.5, 0.1, 10) ** 2
    print("kernel(h=0.5, z=-5) =", repr(kernel_oracle(mu, -5.0)), "mu", mu)
    print("kernel(mu=2, z=-3) =", repr(kernel_oracle(2.0, -3.0)), " (mu=8)", repr(kernel_oracle(8.0, -3.0)))
    print("16QAM entropy at 3.2393 dB =", repr(qam16_entropy_oracle(10 ** (-3.2393 / 20))))
    print("16QAM Gray bit MI at sigma=0.5 (MC) =", repr(qam16_gray_bit_mi_mc(0.5)))
    print("CN (3,6) at 0.7 =", repr(cn_exit_oracle(6, 0.7)))
    print("VN (3,6) at 0.5, sigma=1 =", repr(vn_exit_oracle(3, 0.5, 1.0)))
    print("BEC (3,6) MAP threshold =", repr(bec_map_threshold(3, 6)))
