import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from probfp import dsarith as da
from probfp.dsarith import DSStructure, FocalElement, PBox
from probfp.intervals import DivisionByZeroInterval
from probfp.traces import leaf_trace


def ds(*triples):
    return DSStructure.of(FocalElement.known(lo, hi, m) for lo, hi, m in triples)


def test_focal_element_validation():
    with pytest.raises(ValueError):
        FocalElement.known(2.0, 1.0, 0.5)
    with pytest.raises(ValueError):
        FocalElement.unknown(0.0, 1.0, 0.7, 0.3)


def test_ds_to_pbox_single_element():
    pb = da.ds_to_pbox(ds((0, 1, 1.0)))
    lo0, hi0 = pb.cdf_bounds(0.0)
    lo1, hi1 = pb.cdf_bounds(1.0)
    assert hi0 == 1.0 and lo0 == 0.0
    assert lo1 == 1.0 and hi1 == 1.0


def test_ds_to_pbox_two_elements():
    pb = da.ds_to_pbox(ds((0, 1, 0.5), (1, 2, 0.5)))
    lo, hi = pb.cdf_bounds(1.0)
    assert hi == 1.0
    assert lo == 0.5


def test_ds_to_pbox_unknown_masses():
    s = DSStructure.of([
        FocalElement.unknown(0.0, 1.0, 0.0, 0.5),
        FocalElement.unknown(0.0, 2.0, 0.5, 1.0),
    ])
    pb = da.ds_to_pbox(s)
    _, hi1 = pb.cdf_bounds(1.0)
    lo2, _ = pb.cdf_bounds(2.0)
    assert hi1 == 1.0  # clamped from 1.5
    assert lo2 == 0.5


def test_pbox_to_ds_degenerate_uniform():
    grid = np.linspace(0.0, 1.0, 2001)
    pb = PBox(grid, grid.copy(), grid.copy())
    s = da.pbox_to_ds(pb, 2)
    (a, b), (c, d) = (e.interval for e in s.elements)
    assert (a, b) == (0.0, 0.5)
    assert (c, d) == (0.5, 1.0)
    assert all(e.p_min == e.p_max == 0.5 for e in s.elements)


def test_pbox_to_ds_point_mass():
    pb = da.ds_to_pbox(ds((3, 3, 1.0)))
    s = da.pbox_to_ds(pb, 4)
    assert all(e.interval == (3.0, 3.0) for e in s.elements)


def test_pbox_to_ds_custom_levels():
    grid = np.linspace(0.0, 1.0, 2001)
    pb = PBox(grid, grid.copy(), grid.copy())
    s = da.pbox_to_ds(pb, 3, levels=[0.25, 0.75, 1.0])
    masses = [e.p_max for e in s.elements]
    assert masses == pytest.approx([0.25, 0.5, 0.25])


def test_ind_op_pairwise_add():
    x = ds((0, 1, 0.5), (1, 2, 0.5))
    tx, ty = leaf_trace(0, 2), leaf_trace(0, 2)
    z, tz = da.ind_op(x, x, "+", tx, ty)
    ivs = [(round(e.interval.lo, 9), round(e.interval.hi, 9)) for e in z.elements]
    assert ivs == [(0.0, 2.0), (1.0, 3.0), (1.0, 3.0), (2.0, 4.0)]
    assert [e.p_max for e in z.elements] == pytest.approx([0.25] * 4)
    assert tz.result in tz.vars
    assert any("(+" in f for f in tz.facts)


def test_ind_op_point_mass_scaling():
    x = ds((1, 2, 0.4), (2, 3, 0.6))
    two = DSStructure.point_mass(2.0)
    z, _ = da.ind_op(x, two, "*", leaf_trace(1, 3), leaf_trace(2, 2))
    assert [e.p_max for e in z.elements] == pytest.approx([0.4, 0.6])
    assert z.elements[0].interval.lo <= 2.0 and z.elements[0].interval.hi >= 4.0


def test_ind_op_division():
    z, _ = da.ind_op(ds((1, 2, 1.0)), ds((4, 8, 1.0)), "/", leaf_trace(1, 2), leaf_trace(4, 8))
    e = z.elements[0]
    assert e.interval.lo == pytest.approx(0.125, abs=1e-12)
    assert e.interval.hi == pytest.approx(0.5, abs=1e-12)
    with pytest.raises(DivisionByZeroInterval):
        da.ind_op(ds((1, 2, 1.0)), ds((-1, 1, 1.0)), "/", leaf_trace(1, 2), leaf_trace(-1, 1))


def test_ind_op_mass_product():
    x = ds((0, 1, 0.3), (1, 2, 0.7))
    y = ds((2, 3, 0.5), (3, 4, 0.5))
    z, _ = da.ind_op(x, y, "+", leaf_trace(0, 2), leaf_trace(2, 4))
    lo, hi = z.mass_bounds
    assert lo == pytest.approx(1.0, abs=1e-9)
    assert hi == pytest.approx(1.0, abs=1e-9)


def envelope_contains(outer: PBox, inner: PBox) -> bool:
    xs = np.unique(np.concatenate([outer.grid, inner.grid]))
    olo, ohi = outer.cdf_bounds(xs)
    ilo, ihi = inner.cdf_bounds(xs)
    return bool(np.all(olo <= ilo + 1e-9) and np.all(ohi >= ihi - 1e-9))


def test_condense_identity_and_budget():
    x = ds((0, 1, 0.5), (1, 2, 0.5))
    assert da.condense(x, 2) is x
    big = ds(*[(i * 0.1, i * 0.1 + 0.2, 1 / 40) for i in range(40)])
    small = da.condense(big, 7)
    assert len(small) <= 7
    assert small.mass_bounds[0] == pytest.approx(1.0, abs=1e-9)
    assert envelope_contains(da.ds_to_pbox(small), da.ds_to_pbox(big))


def test_condense_2500_to_50():
    rng = np.random.default_rng(3)
    los = rng.uniform(-1, 1, 2500)
    widths = rng.uniform(0, 0.5, 2500)
    big = DSStructure.of(FocalElement.known(l, l + w, 1 / 2500) for l, w in zip(los, widths))
    small = da.condense(big, 50)
    assert len(small) == 50
    assert small.mass_bounds[1] == pytest.approx(1.0, abs=1e-9)
    assert envelope_contains(da.ds_to_pbox(small), da.ds_to_pbox(big))


def test_monte_carlo_soundness_of_ind_op():
    rng = np.random.default_rng(11)
    n = 10 ** 5
    xs, ys = rng.uniform(1, 2, n), rng.uniform(3, 5, n)
    cuts_x = np.linspace(1, 2, 51)
    cuts_y = np.linspace(3, 5, 51)
    dx = DSStructure.of(FocalElement.known(a, b, 0.02) for a, b in zip(cuts_x, cuts_x[1:]))
    dy = DSStructure.of(FocalElement.known(a, b, 0.02) for a, b in zip(cuts_y, cuts_y[1:]))
    for op, samples in [("+", xs + ys), ("-", xs - ys), ("*", xs * ys)]:
        z, _ = da.ind_op(dx, dy, op, leaf_trace(1, 2), leaf_trace(3, 5))
        pb = da.ds_to_pbox(z)
        emp = np.searchsorted(np.sort(samples), pb.grid, side="right") / n
        slack = 0.01
        assert np.all(emp <= pb.cdf_hi + slack)
        assert np.all(emp >= pb.cdf_lo - slack)
        a, b = np.quantile(samples, [0.2, 0.8])
        p_lo, p_hi = pb.prob_bounds(float(a), float(b))
        frac = np.mean((samples >= a) & (samples <= b))
        assert p_hi >= frac - slack
        assert p_lo <= frac + slack


@st.composite
def random_ds(draw):
    k = draw(st.integers(2, 10))
    los = [draw(st.floats(-10, 10)) for _ in range(k)]
    ws = [draw(st.floats(0, 5)) for _ in range(k)]
    raw = [draw(st.floats(0.01, 1)) for _ in range(k)]
    tot = sum(raw)
    return DSStructure.of(
        FocalElement.known(lo, lo + w, m / tot) for lo, w, m in zip(los, ws, raw)
    )


@settings(max_examples=60, deadline=None)
@given(random_ds(), st.integers(1, 12))
def test_roundtrip_never_tightens(s, n):
    pb = da.ds_to_pbox(s)
    back = da.pbox_to_ds(pb, n)
    assert envelope_contains(da.ds_to_pbox(back), pb_as_inner(pb))


def pb_as_inner(pb: PBox) -> PBox:
    return pb


def test_export_csv(tmp_path):
    pb = da.ds_to_pbox(ds((0, 1, 0.5), (1, 2, 0.5)))
    path = tmp_path / "pb.csv"
    da.export_pbox_csv(pb, str(path))
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "x,cdf_lo,cdf_hi"
    assert len(lines) == len(pb.grid) + 1
