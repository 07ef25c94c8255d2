import csv
import io

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gexit.channel import LDensityMixture, get_constellation, sigma_from_entropy
from gexit.exit import ComponentCode, DegreeDistribution, cn_exit_irregular, vn_exit_irregular
from gexit.fixed_point import (
    DegenerateMapError,
    FixedPoint,
    fixed_points_csv,
    fp_scan_detector_coupled,
    fp_scan_ldpc,
    fp_scan_sctc,
    iterate_de,
    scan,
    scan_h,
)
from gexit.systems import DetectorLdpcSystem, LdpcSystem, NodeType, Settings, binary_family

from oracles import de_attractors_36

TRIVIAL = 1.0 - 2e-3
DD36 = DegreeDistribution.regular(3, 6)


@pytest.fixture(scope="module")
def ldpc36():
    fam = binary_family(get_constellation("bpsk"))
    return LdpcSystem(fam, [NodeType(ComponentCode.repetition(3), 1.0)], [NodeType(ComponentCode.spc(6), 1.0)],
                      Settings()).prepare()


def _nontrivial(points):
    return [p for p in points if p.x < TRIVIAL]


def _by_h(points):
    out = {}
    for p in points:
        out.setdefault(p.h, []).append(p)
    return out


def _toy_inner(h, x):
    return 1.0 - h * (1.0 - np.asarray(x)) ** 2


def _toy_outer(y):
    return np.asarray(y) ** 5


class TestScanBasics:
    def test_identity_map_is_degenerate(self):
        with pytest.raises(DegenerateMapError):
            scan_h(lambda x: np.zeros_like(x), 0.3)

    def test_linear_root(self):
        fps = scan_h(lambda x: 0.37 - x, 0.1)
        assert len(fps) == 1
        assert fps[0].x == pytest.approx(0.37, abs=1e-7)
        assert fps[0].stability == "stable"

    def test_unstable_root(self):
        fps = scan_h(lambda x: x - 0.6131, 0.1)
        assert [p.stability for p in fps] == ["unstable"]

    def test_tangency_reports_single_fold(self):
        # double root at a grid point
        fps = scan_h(lambda x: (x - 0.5) ** 2, 0.1)
        assert len(fps) == 1 and fps[0].stability == "fold" and fps[0].x == pytest.approx(0.5)

    def test_endpoint_fixed_points(self):
        fps = scan_h(lambda x: 1.0 - x, 0.0)
        assert [(p.x, p.stability) for p in fps] == [(1.0, "stable")]
        fps = scan_h(lambda x: -0.5 * x, 0.0)
        assert fps[0].x == 0.0

    def test_rejects_non_finite(self):
        with pytest.raises(ValueError):
            scan_h(lambda x: np.full_like(x, np.nan), 0.2)

    @settings(max_examples=30)
    @given(st.lists(st.floats(0.01, 0.99), min_size=1, max_size=3, unique=True))
    def test_polynomial_roots(self, roots):
        roots = sorted(roots)
        if min(np.diff(roots), default=1.0) < 5e-3:
            return
        def f(x):
            return -np.prod([np.asarray(x) - r for r in roots], axis=0)

        fps = scan_h(f, 0.0)
        assert [p.x for p in fps] == pytest.approx(roots, abs=1e-7)
        assert all(abs(p.residual) <= 1e-7 for p in fps)
        # stable and unstable alternate, the last (rightmost) root attracting
        assert fps[-1].stability == "stable"


class TestLdpcBpsk:
    def test_perfect_channel(self, ldpc36):
        fps = scan_h(ldpc36.make(1e-6), 1e-6)
        assert [round(p.x, 12) for p in fps] == [1.0]

    def test_count_transition(self, ldpc36):
        pts = fp_scan_ldpc(ldpc36.cn_curve, ldpc36.vn_curve, 0.3, 0.6)
        counts = {h: len(_nontrivial(v)) for h, v in _by_h(pts).items()}
        seq = [counts[h] for h in sorted(counts)]
        assert seq[0] == 0 and seq[-1] == 2
        # a single transition, straight from 0 to 2 non-trivial points
        changes = [(a, b) for a, b in zip(seq, seq[1:]) if a != b]
        assert changes == [(0, 2)]

    def test_fold_refined(self, ldpc36):
        pts = fp_scan_ldpc(ldpc36.cn_curve, ldpc36.vn_curve, 0.3, 0.6)
        by_h = _by_h(pts)
        hs = sorted(by_h)
        last_zero = max(h for h in hs if not _nontrivial(by_h[h]))
        first_two = min(h for h in hs if len(_nontrivial(by_h[h])) == 2)
        assert 0 < first_two - last_zero <= 1e-3 + 1e-12

    @pytest.mark.parametrize("h", [0.44, 0.46, 0.55])
    def test_stable_points_match_de_oracle(self, ldpc36, h):
        fps = scan_h(ldpc36.make(h), h)
        stable = sorted(p.x for p in fps if p.stability == "stable")
        oracle = sorted(de_attractors_36(sigma_from_entropy(h), iters=4000))
        # the package J (degree-40 Gauss-Hermite) is within about 1.3e-5 of adaptive quadrature
        assert stable == pytest.approx(oracle, abs=1e-4)

    def test_below_threshold_only_trivial(self, ldpc36):
        h = 0.4
        fps = scan_h(ldpc36.make(h), h)
        assert [p.x for p in fps] == pytest.approx([1.0])
        assert iterate_de(ldpc36.step, h, 0.0) > TRIVIAL

    @pytest.mark.parametrize("h", [0.44, 0.5, 0.7])
    def test_residual_with_direct_curves(self, ldpc36, h):
        mix = LDensityMixture.single(2.0 / sigma_from_entropy(h) ** 2)
        for p in scan_h(ldpc36.make(h), h):
            direct = vn_exit_irregular(DD36, mix, cn_exit_irregular(DD36, p.x)) - p.x
            assert abs(direct) <= 1e-6
            assert 0.0 <= p.x <= 1.0

    def test_deterministic_with_pool(self, ldpc36):
        from concurrent.futures import ThreadPoolExecutor

        a = scan(ldpc36.make, 0.4, 0.5, dh=0.02)
        with ThreadPoolExecutor(2) as pool:
            b = scan(ldpc36.make, 0.4, 0.5, dh=0.02, pool=pool)
        assert a == b


class TestToyScTc:
    def test_perfect_channel(self):
        fps = fp_scan_sctc(_toy_inner, _toy_outer, 0.0, 0.0)
        assert [p.x for p in fps] == [1.0]

    def test_absorbing_one(self):
        for h in (0.2, 0.5, 0.9):
            assert _toy_outer(_toy_inner(h, 1.0)) == 1.0
            assert any(p.x == 1.0 for p in scan_h(lambda x: _toy_outer(_toy_inner(h, x)) - x, h))

    def test_bistable_region_matches_iteration(self):
        pts = fp_scan_sctc(_toy_inner, _toy_outer, 0.2, 0.8, dh=0.05)
        for h, fps in _by_h(pts).items():
            stable = sorted(p.x for p in fps if p.stability == "stable")
            from_zero = iterate_de(lambda hh, x: _toy_outer(_toy_inner(hh, x)), h, 0.0, max_iters=200_000,
                                   tol=1e-13)
            assert min(abs(s - from_zero) for s in stable) < 1e-5
        counts = [len(_nontrivial(v)) for _, v in sorted(_by_h(pts).items())]
        assert counts[0] == 0 and max(counts) == 2


class TestDetectorCoupled:
    @pytest.fixture(scope="class")
    @classmethod
    def system(cls, tmp_path_factory):
        from gexit.cache import TableCache

        st = Settings(n_symbols=4000, detector_h_points=9, detector_mi_points=6,
                      cache=TableCache(tmp_path_factory.mktemp("cache")))
        return DetectorLdpcSystem(get_constellation("16qam-sp"), {3: 1.0}, {6: 1.0}, st).prepare()

    def test_scan_matches_flooding_iteration(self, system):
        pts = fp_scan_detector_coupled(system.vn_curve, system.cn_curve, system.vn_det_curve, system.det_curve,
                                       1.6, 2.4, dh=0.2, dh_fine=0.05)
        for h, fps in _by_h(pts).items():
            # message-level updates with the detector one iteration behind
            i_ev, i_ed = 0.0, float(system.det_curve(h, 0.0))
            for _ in range(20_000):
                i_ec = float(system.cn_curve(i_ev))
                new_ev = float(system.vn_curve(i_ec, i_ed))
                i_ed = float(system.det_curve(h, system.vn_det_curve(i_ec)))
                if abs(new_ev - i_ev) < 1e-12:
                    break
                i_ev = new_ev
            stable = [p.x for p in fps if p.stability == "stable"]
            assert min(abs(s - i_ev) for s in stable) < 1e-4

    def test_perfect_channel(self, system):
        fps = scan_h(system.make(0.0), 0.0)
        assert max(p.x for p in fps) == pytest.approx(1.0)


class TestCsv:
    def test_header_and_rows(self):
        pts = [FixedPoint(0.5, 0.25, 1e-9, "stable"), FixedPoint(0.5, 0.75, -2e-9, "unstable")]
        rows = list(csv.reader(io.StringIO(fixed_points_csv(pts))))
        assert rows[0] == ["h", "x", "residual", "stability"]
        assert rows[1] == ["0.5", "0.25", "1.000e-09", "stable"]
        assert len(rows) == 3
