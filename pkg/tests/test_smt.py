"""Solver client: verdicts, batching, interval pruning, failure modes."""

import random

import pytest

from probfp import smt
from probfp.intervals import Interval
from probfp.traces import leaf_trace, op_trace, range_fact

pytestmark = pytest.mark.skipif(not smt.solver_available(),
                                reason="no SMT backend configured")


@pytest.fixture(scope="module")
def client():
    with smt.SolverClient() as c:
        yield c


class TestVerdicts:
    def test_trivial_sat(self, client):
        assert client.check_sat(["x"], ["(> x 0.0)"]) is smt.Result.SAT

    def test_trivial_unsat(self, client):
        res = client.check_sat(["x"], ["(> x 0.0)", "(< x 0.0)"])
        assert res is smt.Result.UNSAT

    def test_no_facts_is_sat(self, client):
        assert client.check_sat([], []) is smt.Result.SAT

    def test_nonlinear(self, client):
        decls = ["x", "y"]
        base = [range_fact("x", 2.0, 3.0), "(= (* x y) 1.0)"]
        assert client.check_sat(decls, base + [range_fact("y", 0.3, 0.4)]) is smt.Result.SAT
        assert client.check_sat(decls, base + [range_fact("y", 0.1, 0.2)]) is smt.Result.UNSAT

    def test_division_trace_excludes_zero_denominator(self, client):
        tx = leaf_trace(-1.0, 1.0, name="x0")
        ty = leaf_trace(0.0, 0.0, name="y0")
        tz = op_trace("/", tx, ty, result="z0")
        res = client.check_sat(tz.vars, tz.facts)
        assert res is smt.Result.UNSAT

    def test_stats_move(self, client):
        before = client.stats["queries"]
        client.check_sat(["a"], ["(= a 1.0)"])
        assert client.stats["queries"] == before + 1


class TestBatching:
    def test_random_interval_overlap(self, client):
        rng = random.Random(20240814)
        groups = []
        expected = []
        for _ in range(100):
            a1 = rng.randint(-16, 16) / 4.0
            b1 = a1 + rng.randint(0, 12) / 4.0
            a2 = rng.randint(-16, 16) / 4.0
            b2 = a2 + rng.randint(0, 12) / 4.0
            groups.append((["x"], [range_fact("x", a1, b1), range_fact("x", a2, b2)]))
            expected.append(max(a1, a2) <= min(b1, b2))
        results = client.check_sat_many(groups)
        got = [r is smt.Result.SAT for r in results]
        assert got == expected


class TestPruning:
    def test_prunes_to_linear_image(self, client):
        facts = [range_fact("x", 0.0, 10.0), "(= y x)", range_fact("y", 3.0, 4.0)]
        out = client.prune_interval(["x", "y"], facts, "x", Interval(0.0, 10.0),
                                    rel_tol=2.0 ** -12)
        assert out.lo <= 3.0 and out.hi >= 4.0
        assert out.lo >= 3.0 - 10.0 * 2.0 ** -11
        assert out.hi <= 4.0 + 10.0 * 2.0 ** -11

    def test_probe_fast_path_keeps_full_box(self, client):
        before = client.stats["queries"]
        facts = [range_fact("x", 0.0, 1.0)]
        out = client.prune_interval(["x"], facts, "x", Interval(0.0, 1.0))
        assert out == Interval(0.0, 1.0)
        assert client.stats["queries"] - before == 2

    def test_soundness_on_affine_constraints(self, client):
        rng = random.Random(7)
        for _ in range(6):
            xl = rng.randint(-8, 0) / 2.0
            xh = xl + rng.randint(2, 12) / 2.0
            yl = rng.randint(-6, 2) / 2.0
            yh = yl + rng.randint(1, 8) / 2.0
            facts = [range_fact("x", xl, xh), "(= y (+ (* 2.0 x) 1.0))",
                     range_fact("y", yl, yh)]
            feas_lo = max(xl, (yl - 1.0) / 2.0)
            feas_hi = min(xh, (yh - 1.0) / 2.0)
            out = client.prune_interval(["x", "y"], facts, "x", Interval(xl, xh),
                                        rel_tol=2.0 ** -12)
            if feas_lo <= feas_hi:
                assert out.lo <= feas_lo + 1e-12
                assert out.hi >= feas_hi - 1e-12
                slack = (xh - xl) * 2.0 ** -11
                assert out.lo >= feas_lo - slack
                assert out.hi <= feas_hi + slack

    def test_degenerate_box_untouched(self, client):
        out = client.prune_interval(["x"], [range_fact("x", 2.0, 2.0)], "x",
                                    Interval(2.0, 2.0))
        assert out == Interval(2.0, 2.0)


class TestResolution:
    def test_explicit_command_wins(self):
        cmd = smt.resolve_command("mysolver --pipe")
        assert cmd == ["mysolver", "--pipe"]

    def test_env_override(self, monkeypatch):
        monkeypatch.setenv("PROBFP_SOLVER_CMD", "z3 -in -v:1")
        assert smt.resolve_command() == ["z3", "-in", "-v:1"]

    def test_dead_process_raises(self):
        c = smt.SolverClient(command="false")
        with pytest.raises(smt.SolverUnavailableError):
            c.check_sat(["x"], ["(> x 0.0)"])
        c.close()

    def test_unstartable_command_raises(self):
        c = smt.SolverClient(command="/nonexistent/solver-binary")
        with pytest.raises(smt.SolverUnavailableError):
            c.check_sat(["x"], ["(> x 0.0)"])
        c.close()
