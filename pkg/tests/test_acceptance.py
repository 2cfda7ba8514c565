"""End-to-end acceptance gates.

Each test pins one externally guaranteed behavior of the analyzer at a
stated numeric tolerance and wall-clock budget.  Seeds are fixed so runs
are reproducible; every test prints as a single pass/fail line under
``pytest -v``.
"""

import itertools
import math
import time

import numpy as np
import pytest
from scipy import integrate
from scipy.optimize import linprog

from probfp import dists, errdist, formats, kernels, smt
from probfp.analysis import AnalysisConfig, analyze, run_samples
from probfp.depops import lp_bounds
from probfp.parser import parse_program

SINGLE = formats.get_format("single")
HALF = formats.get_format("half")
TOY = formats.get_format("custom:4,-2,3")

KS_1PCT = 1.628  # asymptotic Kolmogorov-Smirnov critical factor at alpha = 0.01

needs_solver = pytest.mark.skipif(not smt.solver_available(),
                                  reason="no SMT backend configured")


class Stopwatch:
    def __init__(self, budget_s: float):
        self.budget = budget_s
        self.t0 = time.perf_counter()

    def check(self) -> None:
        elapsed = time.perf_counter() - self.t0
        assert elapsed < self.budget, (
            f"took {elapsed:.1f}s, budget {self.budget:.0f}s")


def ks_distance(samples: np.ndarray, cdf) -> float:
    s = np.sort(samples)
    n = len(s)
    f = np.asarray(cdf(s), dtype=float)
    hi = np.max(np.arange(1, n + 1) / n - f)
    lo = np.max(f - np.arange(0, n) / n)
    return max(hi, lo)


def test_01_limiting_density_shape_and_mass():
    """Closed-form roundoff density: center value, edge zeros, branch
    continuity, unit mass."""
    sw = Stopwatch(1.0)
    assert float(errdist.typical_density(0.0)) == 0.75
    assert float(errdist.typical_density(1.0)) == 0.0
    assert float(errdist.typical_density(-1.0)) == 0.0
    for c in (0.5, -0.5):
        left = float(errdist.typical_density(c - 1e-13))
        right = float(errdist.typical_density(c + 1e-13))
        assert abs(left - right) < 1e-12
    total, _ = integrate.quad(lambda t: float(errdist.typical_density(t)),
                              -1.0, 1.0, points=[-0.5, 0.5], limit=200)
    assert abs(total - 1.0) < 1e-9
    sw.check()


def test_02_toy_format_error_cdf_matches_sampling():
    """Per-value error CDF in a tiny format (4 fractional bits, 3-bit
    exponent) agrees with 1e5 sampled rounding errors (K-S at 1%)."""
    sw = Stopwatch(60.0)
    d = dists.make_builtin("uniform", (2.0, 4.0))
    e = errdist.exact_error_density(d, TOY)
    x = dists.sample(d, seed=1234, n=100_000)
    t = kernels.relative_errors(x, TOY.p, TOY.e_min, TOY.e_max) / TOY.u
    assert ks_distance(t, e.cdf) < KS_1PCT / math.sqrt(len(t))
    sw.check()


def test_03_aggregated_density_remainder_anchors():
    """Rigorous remainder of the binade-aggregated density stays below the
    published single-precision anchors."""
    sw = Stopwatch(60.0)
    e_norm = errdist.hp_error_density(dists.make_builtin("normal", (0.0, 1.0)),
                                      SINGLE)
    assert e_norm.remainder <= 3.2e-7
    e_unif = errdist.hp_error_density(dists.make_builtin("uniform", (-2.0, 2.0)),
                                      SINGLE)
    assert e_unif.remainder <= 1.2e-7
    sw.check()


def test_04_exact_vs_aggregated_density_l1_within_remainder():
    """At half precision the L1 gap between the per-value density and the
    binade-aggregated density is covered by the computed remainder."""
    sw = Stopwatch(300.0)
    d = dists.make_builtin("uniform", (2.0, 4.0))
    grid = errdist.build_grid()
    exact = errdist.exact_error_density(d, HALF, grid)
    agg = errdist.hp_error_density(d, HALF, grid)
    l1 = float(np.trapezoid(np.abs(exact.density_values - agg.density_values),
                            grid))
    assert l1 <= agg.remainder + 1e-6
    sw.check()


def test_05_covariance_bounds_symmetric_input():
    """Value/relative-error covariance: analytic bounds collapse to [0, 0]
    for a symmetric input, and a 1e6-sample Monte-Carlo estimate agrees
    within 3 standard errors."""
    sw = Stopwatch(60.0)
    d = dists.make_builtin("uniform", (-2.0, 2.0))
    cb = errdist.covariance_bounds(d, SINGLE)
    assert cb.lo == 0.0
    assert cb.hi == 0.0
    x = dists.sample(d, seed=99, n=1_000_000)
    rel = kernels.relative_errors(x, SINGLE.p, SINGLE.e_min, SINGLE.e_max)
    prod = (x - x.mean()) * (rel - rel.mean())
    cov = float(prod.mean())
    se = float(prod.std(ddof=1)) / math.sqrt(len(x))
    assert abs(cov) <= 3.0 * se
    sw.check()


@needs_solver
def test_06_dependent_ratio_pbox_covers_sampling():
    """(x + y) / y with shared y: the dependency-aware output p-box covers
    the empirical CDF of 1e5 joint samples at every grid point."""
    sw = Stopwatch(600.0)
    prog = parse_program("x ~ uniform(1, 2)\n"
                         "y ~ uniform(1, 2)\n"
                         "z = (x + y) / y\n", name="ratio")
    res = analyze(prog, AnalysisConfig(fmt=SINGLE))
    vals, _ = run_samples(prog, SINGLE, 100_000, seed=3)
    vals = np.sort(vals)
    ecdf = np.searchsorted(vals, res.pbox.grid, side="right") / len(vals)
    slack = 0.01
    assert np.all(ecdf >= res.pbox.cdf_lo - slack)
    assert np.all(ecdf <= res.pbox.cdf_hi + slack)
    sw.check()


@needs_solver
def test_07_self_difference_support_collapses():
    """x - x: the dependency analysis prunes the output support to at most
    2^-20 of the input width."""
    sw = Stopwatch(60.0)
    prog = parse_program("x ~ uniform(1, 2)\nz = x - x\n", name="selfdiff")
    cfg = AnalysisConfig(fmt=SINGLE, n_intervals=20, dep_cell_budget=100,
                         dep_query_budget=1500)
    res = analyze(prog, cfg)
    input_width = 1.0
    assert res.support.hi - res.support.lo <= 2.0 ** -20 * input_width
    sw.check()


def test_08_full_confidence_equals_worst_case_path():
    """Conditional bound at confidence 1.0 is the exact same number as the
    global worst-case maximization."""
    sw = Stopwatch(60.0)
    for text in ("x ~ uniform(2, 4)\ny ~ uniform(2, 4)\nz = x + y\n",
                 "x ~ uniform(2, 4)\ny ~ uniform(2, 4)\nz = x * y\n"):
        prog = parse_program(text, name="pair")
        res = analyze(prog, AnalysisConfig(fmt=SINGLE, n_intervals=30))
        assert res.conditional_bound(1.0) == res.worst_case_bound
    sw.check()


@needs_solver
def test_09a_bspline0_bound_matches_published_scale():
    """Cubic spline segment 0, uniform input, single precision, 50 cells,
    99% confidence: bound within 2x of the published 5.71e-08; worst case
    within 2x of 5.72e-08."""
    sw = Stopwatch(600.0)
    prog = parse_program("x ~ uniform(0, 1)\n"
                         "z = ((1 - x) * (1 - x) * (1 - x)) / 6\n",
                         name="bspline0")
    res = analyze(prog, AnalysisConfig(fmt=SINGLE))
    assert 5.71e-08 / 2.0 <= res.error_bound <= 5.71e-08 * 2.0
    assert 5.72e-08 / 2.0 <= res.worst_case_bound <= 5.72e-08 * 2.0
    sw.check()


@needs_solver
def test_09b_bspline3_bound_matches_published_scale():
    """Cubic spline segment 3, uniform input, single precision, 50 cells,
    99% confidence: bound and worst case within 2x of the published
    4.22e-08."""
    sw = Stopwatch(600.0)
    prog = parse_program("x ~ uniform(0, 1)\n"
                         "z = -(x * x * x) / 6\n", name="bspline3")
    res = analyze(prog, AnalysisConfig(fmt=SINGLE))
    assert 4.22e-08 / 2.0 <= res.error_bound <= 4.22e-08 * 2.0
    assert 4.22e-08 / 2.0 <= res.worst_case_bound <= 4.22e-08 * 2.0
    sw.check()


def _polytope_vertices(cells, px, py):
    """Brute-force basic feasible solutions of the marginal polytope."""
    k = len(cells)
    rows = []
    b = []
    for i in range(3):
        rows.append([1.0 if c[0] == i else 0.0 for c in cells])
        b.append(px[i])
    for j in range(3):
        rows.append([1.0 if c[1] == j else 0.0 for c in cells])
        b.append(py[j])
    a_full = np.array(rows)
    b_full = np.array(b)
    a_red = a_full[:5]  # row rank is 5: both marginal groups sum to 1
    b_red = b_full[:5]
    verts = []
    for cols in itertools.combinations(range(k), min(5, k)):
        sub = a_red[:, cols]
        if sub.shape[0] != sub.shape[1] or abs(np.linalg.det(sub)) < 1e-12:
            continue
        q_sub = np.linalg.solve(sub, b_red)
        if np.any(q_sub < -1e-12):
            continue
        q = np.zeros(k)
        q[list(cols)] = q_sub
        if np.max(np.abs(a_full @ q - b_full)) < 1e-9:
            verts.append(np.clip(q, 0.0, None))
    return verts


def test_10_lp_bounds_bracket_enumerated_joints():
    """On 100 random 3x3 marginal instances with randomly zeroed cells the
    LP envelope brackets the CDF of every enumerated joint distribution."""
    sw = Stopwatch(60.0)
    npr = np.random.default_rng(424242)
    done = 0
    while done < 100:
        px = npr.dirichlet([1.0, 1.0, 1.0])
        py = npr.dirichlet([1.0, 1.0, 1.0])
        mask = npr.random((3, 3)) < 0.8
        zval = npr.uniform(-5.0, 5.0, size=(3, 3))
        cells = [(i, j, float(zval[i, j]), float(zval[i, j]))
                 for i in range(3) for j in range(3) if mask[i, j]]
        if len(cells) < 5:
            continue
        verts = _polytope_vertices(cells, px, py)
        if not verts:
            continue  # infeasible zero pattern; draw again
        done += 1
        thresholds = np.sort(np.unique([c[2] for c in cells]))
        lo, hi = lp_bounds(cells, [(float(p), float(p)) for p in px],
                           [(float(p), float(p)) for p in py], thresholds)
        zs = np.array([c[2] for c in cells])
        for q in verts:
            for t_idx, v in enumerate(thresholds):
                cdf = float(np.sum(q[zs <= v]))
                assert lo[t_idx] - 1e-6 <= cdf <= hi[t_idx] + 1e-6
    sw.check()


@needs_solver
def test_11_polynomial_error_form_sound_and_calibrated():
    """Three-variable polynomial with repeated variables: all 1e5 sampled
    errors stay below the full-confidence bound, and at most 1% + 3 SE
    exceed the 99% bound."""
    sw = Stopwatch(600.0)
    prog = parse_program(
        "x1 ~ uniform(-15, 15)\n"
        "x2 ~ uniform(-15, 15)\n"
        "x3 ~ uniform(-15, 15)\n"
        "z = -x1 * x2 - 2 * x2 * x3 - x1 - x3\n", name="rigidbody1")
    cfg = AnalysisConfig(fmt=SINGLE, dep_cell_budget=150, dep_query_budget=2500)
    res = analyze(prog, cfg)
    full = res.conditional_bound(1.0)
    partial = res.conditional_bound(0.99)
    _, errs = run_samples(prog, SINGLE, 100_000, seed=11)
    assert float(errs.max()) <= full
    frac = float(np.mean(errs > partial))
    allowance = 0.01 + 3.0 * math.sqrt(0.01 * 0.99 / len(errs))
    assert frac <= allowance
    sw.check()


@needs_solver
def test_12_long_tail_inputs_shrink_conditional_bound():
    """Quadratic with truncated-normal inputs: dropping 1% of probability
    mass shrinks the error bound by at least 10x."""
    sw = Stopwatch(3600.0)
    prog = parse_program(
        "x1 ~ normal in [-100, 100]\n"
        "x2 ~ normal in [-100, 100]\n"
        "z = (x1 - 1) * (x1 - 1) + (x2 - 1) * (x2 - 1) - x2 * x1\n",
        name="trid1")
    res = analyze(prog, AnalysisConfig(fmt=SINGLE))
    full = res.conditional_bound(1.0)
    partial = res.conditional_bound(0.99)
    assert partial <= full / 10.0
    sw.check()
