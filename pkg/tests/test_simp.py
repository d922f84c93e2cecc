import math

import numpy as np
import pytest

import topogen as tg
from topogen import simp
from topogen.errors import BisectionFailure


def _cantilever(nelx, nely, vf=0.5, angle=math.pi / 2):
    domain = tg.DesignDomain(nelx=nelx, nely=nely)
    catalog = tg.enumerate_bc_scenarios()
    node = domain.node_id(nely // 2, nelx)
    return domain, tg.ProblemSpec(vf, catalog[0], node, angle)


class TestSensitivity:
    def test_zero_displacement_zero_gradient(self):
        domain = tg.DesignDomain(nelx=6, nely=3)
        dc = simp.sensitivity(np.full((3, 6), 0.5), np.zeros(domain.num_dofs),
                              domain, 2.0)
        assert np.all(dc == 0.0)

    def test_gradient_is_nonpositive(self):
        domain, spec = _cantilever(8, 4)
        y = np.full((4, 8), 0.5)
        u = tg.assemble_and_solve(y, spec, domain, 3.0)
        assert simp.sensitivity(y, u, domain, 3.0).max() <= 0.0

    def test_matches_finite_differences(self):
        domain, spec = _cantilever(4, 2)
        rng = np.random.default_rng(5)
        y = rng.uniform(0.3, 0.9, size=(2, 4))
        penal = 2.0
        u = tg.assemble_and_solve(y, spec, domain, penal)
        dc = simp.sensitivity(y, u, domain, penal)
        h = 1e-6
        for r in range(2):
            for c in range(4):
                yp, ym = y.copy(), y.copy()
                yp[r, c] += h
                ym[r, c] -= h
                cp = tg.compliance(yp, tg.assemble_and_solve(yp, spec, domain, penal),
                                   domain, penal)
                cm = tg.compliance(ym, tg.assemble_and_solve(ym, spec, domain, penal),
                                   domain, penal)
                fd = (cp - cm) / (2 * h)
                assert dc[r, c] == pytest.approx(fd, rel=1e-4)


class TestFilter:
    def test_constant_passes_through(self):
        dc = np.full((5, 7), -3.2)
        y = np.full((5, 7), 0.4)
        out = simp.filter_sensitivity(dc, y, rmin=1.5)
        assert np.allclose(out, dc, rtol=1e-14)

    def test_radius_at_most_one_is_identity(self):
        rng = np.random.default_rng(2)
        dc = -rng.uniform(0.1, 2.0, size=(4, 6))
        y = rng.uniform(0.1, 1.0, size=(4, 6))
        out = simp.filter_sensitivity(dc, y, rmin=1.0)
        assert np.allclose(out, dc, rtol=1e-14)

    def test_spike_spreads_per_formula(self):
        # independent dense evaluation of the weighted average on a 3x3 grid
        rmin = 1.5
        dc = np.zeros((3, 3))
        dc[1, 1] = -1.0
        y = np.full((3, 3), 0.5)
        expected = np.zeros((3, 3))
        for r in range(3):
            for c in range(3):
                num = den = 0.0
                for rr in range(3):
                    for cc in range(3):
                        w = max(0.0, rmin - math.hypot(r - rr, c - cc))
                        num += w * y[rr, cc] * dc[rr, cc]
                        den += w
                expected[r, c] = num / (y[r, c] * den)
        out = simp.filter_sensitivity(dc, y, rmin)
        assert np.allclose(out, expected, rtol=1e-13)
        # the spike leaks onto diagonal neighbours too (dist sqrt(2) < 1.5)
        assert out[0, 0] < 0.0


class TestOcUpdate:
    def test_volume_and_move_contracts(self):
        rng = np.random.default_rng(9)
        config = tg.SimpConfig()
        for _ in range(20):
            y = rng.uniform(0.05, 0.95, size=(6, 9))
            dc = -rng.uniform(0.01, 5.0, size=(6, 9))
            # the move limit caps how far one update can shift the mean
            vf = float(np.clip(y.mean() + rng.uniform(-0.1, 0.1), 0.05, 0.95))
            y_new = simp.oc_update(y, dc, vf, config)
            assert abs(y_new.mean() - vf) <= config.vf_bisect_tol
            assert np.abs(y_new - y).max() <= config.move_limit + 1e-15
            assert y_new.min() >= 0.0 and y_new.max() <= 1.0

    def test_uniform_inputs_are_a_fixed_point(self):
        config = tg.SimpConfig()
        y = np.full((5, 8), 0.4)
        dc = np.full((5, 8), -2.0)
        y_new = simp.oc_update(y, dc, 0.4, config)
        assert np.abs(y_new - y).max() <= 1e-3

    def test_zero_gradient_raises(self):
        with pytest.raises(BisectionFailure):
            simp.oc_update(np.full((3, 3), 0.4), np.zeros((3, 3)), 0.4, tg.SimpConfig())

    def test_positive_gradient_rejected(self):
        with pytest.raises(ValueError):
            simp.oc_update(np.full((3, 3), 0.4), np.ones((3, 3)), 0.4, tg.SimpConfig())


class TestOptimize:
    def test_cantilever_contracts(self):
        domain, spec = _cantilever(30, 10)
        config = tg.SimpConfig(penal=3.0)
        y, trace = tg.optimize(spec, domain, config)
        assert y.shape == (10, 30)
        assert y.min() >= 0.0 and y.max() <= 1.0
        assert abs(y.mean() - 0.5) <= 1e-3
        assert all(abs(v - 0.5) <= 1e-3 for v in trace.volume_fractions)
        assert trace.final_compliance <= trace.compliances[0]
        assert trace.iterations == len(trace.compliances)

    def test_symmetric_problem_gives_symmetric_structure(self):
        # left clamp with a horizontal pull at the right-edge midline is
        # mirror-symmetric about the midline, so the design must be too
        domain, spec = _cantilever(24, 8, angle=0.0)
        y, _ = tg.optimize(spec, domain, tg.SimpConfig(penal=3.0, max_iters=60))
        assert np.abs(y - np.flipud(y)).max() < 1e-6

    def test_determinism(self):
        domain, spec = _cantilever(16, 8, vf=0.4)
        config = tg.SimpConfig(max_iters=25)
        y1, t1 = tg.optimize(spec, domain, config)
        y2, t2 = tg.optimize(spec, domain, config)
        assert y1.tobytes() == y2.tobytes()
        assert t1.compliances == t2.compliances

    def test_trace_export(self, tmp_path):
        domain, spec = _cantilever(12, 6)
        _, trace = tg.optimize(spec, domain, tg.SimpConfig(max_iters=5))
        path = tmp_path / "trace.tsv"
        trace.export_text(path)
        lines = path.read_text().strip().splitlines()
        assert lines[0].split("\t") == ["iteration", "compliance",
                                        "volume_fraction", "max_change"]
        assert len(lines) == trace.iterations + 1
