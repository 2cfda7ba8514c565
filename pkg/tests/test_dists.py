import math

import numpy as np
import pytest
from scipy import integrate, stats

from probfp import dists
from probfp.dists import discretize, make_builtin, piecewise, sample, truncate

# 1% critical value for the one-sample K-S statistic at n = 10^5
KS_CRIT = 1.628 / math.sqrt(10 ** 5)


def test_uniform_basics():
    d = make_builtin("uniform", (2, 4))
    assert d.pdf(3.0) == pytest.approx(0.5)
    assert d.pdf(5.0) == 0.0
    assert d.cdf(3.0) == pytest.approx(0.5)
    assert d.support == (2.0, 4.0)


def test_truncated_normal_density():
    d = make_builtin("normal", (0, 1), truncation=(-3, 3))
    expected = stats.norm.pdf(0) / (stats.norm.cdf(3) - stats.norm.cdf(-3))
    assert float(d.pdf(0.0)) == pytest.approx(expected, rel=1e-12)
    assert float(d.pdf(0.0)) == pytest.approx(0.4000223, abs=5e-7)
    assert float(d.cdf(3.0)) == pytest.approx(1.0)
    assert float(d.cdf(-3.0)) == pytest.approx(0.0, abs=1e-15)


def test_laplace_scale_density():
    d = make_builtin("laplace", (0, 0.01))
    assert float(d.pdf(0.0)) == pytest.approx(50.0)


def test_invalid_parameters():
    with pytest.raises(ValueError):
        make_builtin("uniform", (4, 2))
    with pytest.raises(ValueError):
        make_builtin("normal", (0, -1))
    with pytest.raises(ValueError):
        make_builtin("gamma", (1, 1))


def test_zero_mass_truncation():
    with pytest.raises(ValueError):
        make_builtin("exponential", (1.0,), truncation=(-5, -1))


def test_truncation_preserves_density_shape():
    base = make_builtin("normal", (0, 1))
    t = truncate(base, -2, 2)
    r_base = float(base.pdf(0.5) / base.pdf(1.5))
    r_trunc = float(t.pdf(0.5) / t.pdf(1.5))
    assert r_trunc == pytest.approx(r_base, rel=1e-12)


@pytest.mark.parametrize("kind,params,window", [
    ("uniform", (0, 1), None),
    ("normal", (0, 1), (-4, 4)),
    ("laplace", (0, 1), (-8, 8)),
    ("exponential", (2.0,), (0, 6)),
    ("rayleigh", (1.0,), (0, 5)),
    ("beta", (2.0, 3.0), None),
])
def test_builtin_pdf_integrates_to_one(kind, params, window):
    d = make_builtin(kind, params, truncation=window)
    val, _ = integrate.quad(lambda x: float(d.pdf(x)), d.support.lo, d.support.hi, limit=200)
    assert val == pytest.approx(1.0, abs=1e-9)


@pytest.mark.parametrize("kind,params,window", [
    ("uniform", (2, 4), None),
    ("normal", (0, 1), (-3, 3)),
    ("laplace", (0, 0.5), (-4, 4)),
    ("exponential", (1.0,), (0, 8)),
    ("rayleigh", (2.0,), None),
    ("beta", (2.0, 5.0), None),
])
def test_sampling_matches_cdf(kind, params, window):
    d = make_builtin(kind, params, truncation=window)
    xs = sample(d, seed=123, n=10 ** 5)
    if window is not None:
        assert xs.min() >= window[0] and xs.max() <= window[1]
    stat = stats.kstest(xs, lambda v: np.asarray(d.cdf(v), dtype=float)).statistic
    assert stat < KS_CRIT


def test_sampling_deterministic():
    d = make_builtin("uniform", (0, 1))
    a = sample(d, seed=9, n=1000)
    b = sample(d, seed=9, n=1000)
    assert np.array_equal(a, b)
    assert abs(a.mean() - 0.5) < 0.003 * 3


def test_xpdf_integral_against_quadrature():
    cases = [
        make_builtin("uniform", (2, 4)),
        make_builtin("normal", (1, 2), truncation=(-5, 7)),
        make_builtin("laplace", (0.5, 1.5), truncation=(-9, 9)),
        make_builtin("exponential", (3.0,), truncation=(0, 5)),
        make_builtin("rayleigh", (1.5,), truncation=(0, 7)),
        make_builtin("beta", (2.0, 2.0)),
    ]
    for d in cases:
        for a, b in [(d.support.lo, d.support.hi), (0.25, 1.0), (-1.0, 0.5)]:
            lo, hi = max(a, d.support.lo), min(b, d.support.hi)
            if lo >= hi:
                continue
            want, _ = integrate.quad(lambda x: x * float(d.pdf(x)), lo, hi, limit=200)
            got, err = d.xpdf_integral(lo, hi)
            assert got == pytest.approx(want, abs=1e-9 + err)


def test_pdf_derivative_matches_finite_differences():
    cases = [
        make_builtin("normal", (0, 1)),
        make_builtin("laplace", (0, 1)),
        make_builtin("exponential", (1.0,)),
        make_builtin("rayleigh", (1.0,)),
        make_builtin("beta", (3.0, 2.0)),
    ]
    for d in cases:
        for x in (0.3, 0.7, 1.3):
            h = 1e-6
            fd = (float(d.pdf(x + h)) - float(d.pdf(x - h))) / (2 * h)
            assert float(d.pdf_derivative(x)) == pytest.approx(fd, rel=1e-4, abs=1e-6)


def test_piecewise_constant_is_uniform():
    d = piecewise([0, 1], [[1.0]])
    assert float(d.pdf(0.5)) == pytest.approx(1.0)
    assert float(d.cdf(0.75)) == pytest.approx(0.75)
    assert float(d.ppf(0.25)) == pytest.approx(0.25, abs=1e-12)


def test_piecewise_triangle():
    d = piecewise([0, 1, 2], [[0, 1], [2, -1]])
    assert float(d.cdf(1.0)) == pytest.approx(0.5)
    assert float(d.pdf(1.0)) == pytest.approx(1.0)
    xs = sample(d, seed=5, n=10 ** 5)
    stat = stats.kstest(xs, lambda v: np.asarray(d.cdf(v), dtype=float)).statistic
    assert stat < KS_CRIT


def test_piecewise_two_constants():
    d = piecewise([0, 0.25, 1], [[2.0], [2.0 / 3.0]])
    assert float(d.cdf(0.25)) == pytest.approx(0.5)


def test_piecewise_rejects_bad_input():
    with pytest.raises(ValueError):
        piecewise([0, 1], [[-1.0]])
    with pytest.raises(ValueError):
        piecewise([0, 1], [[0.0]])
    with pytest.raises(ValueError):
        piecewise([1, 0], [[1.0]])


def test_discretize_uniform_equal_mass():
    d = make_builtin("uniform", (0, 1))
    s = discretize(d, 2)
    assert [(e.interval.lo, e.interval.hi) for e in s.elements] == [(0.0, 0.5), (0.5, 1.0)]
    assert [e.p_max for e in s.elements] == pytest.approx([0.5, 0.5])


def test_discretize_symmetric_normal():
    d = make_builtin("normal", (0, 1), truncation=(-3, 3))
    s = discretize(d, 2)
    assert s.elements[0].interval.hi == pytest.approx(0.0, abs=1e-9)
    assert [e.p_max for e in s.elements] == pytest.approx([0.5, 0.5], abs=1e-12)


def test_discretize_uniform_50():
    d = make_builtin("uniform", (2, 4))
    s = discretize(d, 50)
    widths = [e.interval.width for e in s.elements]
    masses = [e.p_max for e in s.elements]
    assert len(s) == 50
    assert widths == pytest.approx([0.04] * 50, abs=1e-12)
    assert masses == pytest.approx([0.02] * 50, abs=1e-12)
    assert sum(masses) == pytest.approx(1.0, abs=1e-9)


def test_discretize_masses_are_cdf_differences():
    d = make_builtin("normal", (0, 1), truncation=(-3, 3))
    for scheme in ("mass", "width", "hybrid"):
        s = discretize(d, 17, scheme=scheme)
        assert len(s) == 17
        assert s.support == (-3.0, 3.0)
        for e in s.elements:
            want = float(d.cdf(e.interval.hi) - d.cdf(e.interval.lo))
            assert e.p_max == pytest.approx(want, abs=1e-12)
        assert s.mass_bounds[0] == pytest.approx(1.0, abs=1e-9)


def test_discretize_hybrid_tail_resolution():
    d = make_builtin("normal", (0, 1), truncation=(-100, 100))
    s = discretize(d, 50, scheme="hybrid")
    assert len(s) == 50
    # geometric cuts must reach into the far tails
    assert max(e.interval.lo for e in s.elements) > 50.0
    tail_mass = sum(e.p_max for e in s.elements if e.interval.lo >= 50.0)
    assert tail_mass < 1e-12


def test_discretize_requires_bounded_support():
    with pytest.raises(ValueError):
        discretize(make_builtin("normal", (0, 1)), 10)
