"""Dempster-Shafer structures and probability boxes.

A DS-structure is a finite set of focal elements: real intervals paired
with probability mass, where the mass may itself only be known up to
bounds.  It over-approximates a distribution whose CDF then lies inside
the envelope of a probability box.  Arithmetic on independent operands
is plain pairwise interval arithmetic with product masses.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from . import intervals as iv
from .intervals import Interval
from .traces import Trace, op_trace

MASS_TOL = 1e-9


@dataclass(frozen=True)
class FocalElement:
    interval: Interval
    p_min: float
    p_max: float

    @classmethod
    def known(cls, lo: float, hi: float, mass: float) -> "FocalElement":
        return cls(Interval(lo, hi), mass, mass)

    @classmethod
    def unknown(cls, lo: float, hi: float, p_min: float = 0.0, p_max: float = 1.0) -> "FocalElement":
        return cls(Interval(lo, hi), p_min, p_max)

    def __post_init__(self) -> None:
        if self.interval.lo > self.interval.hi:
            raise ValueError("interval endpoints out of order")
        if not 0.0 <= self.p_min <= self.p_max:
            raise ValueError("probability bounds out of order")

    @property
    def is_known(self) -> bool:
        return self.p_min == self.p_max

    @property
    def midpoint(self) -> float:
        return self.interval.mid


@dataclass(frozen=True)
class DSStructure:
    elements: tuple[FocalElement, ...]

    @classmethod
    def of(cls, elements: Iterable[FocalElement]) -> "DSStructure":
        return cls(tuple(elements))

    @classmethod
    def point_mass(cls, x: float) -> "DSStructure":
        return cls((FocalElement.known(x, x, 1.0),))

    def __len__(self) -> int:
        return len(self.elements)

    @property
    def mass_bounds(self) -> tuple[float, float]:
        return (sum(e.p_min for e in self.elements), sum(e.p_max for e in self.elements))

    @property
    def support(self) -> Interval:
        lo = min(e.interval.lo for e in self.elements)
        hi = max(e.interval.hi for e in self.elements)
        return Interval(lo, hi)

    def sorted(self) -> "DSStructure":
        key = lambda e: (e.interval.lo, e.interval.hi, e.p_min, e.p_max)
        return DSStructure(tuple(sorted(self.elements, key=key)))


@dataclass(frozen=True)
class PBox:
    grid: np.ndarray
    cdf_lo: np.ndarray
    cdf_hi: np.ndarray

    def __post_init__(self) -> None:
        g, lo, hi = self.grid, self.cdf_lo, self.cdf_hi
        if not (len(g) == len(lo) == len(hi)):
            raise ValueError("grid and cdf arrays must align")
        if np.any(np.diff(g) < 0):
            raise ValueError("grid must be sorted")
        if np.any(np.diff(lo) < -MASS_TOL) or np.any(np.diff(hi) < -MASS_TOL):
            raise ValueError("cdf envelopes must be nondecreasing")
        if np.any(lo > hi + MASS_TOL):
            raise ValueError("lower cdf exceeds upper cdf")

    def cdf_bounds(self, x) -> tuple[np.ndarray, np.ndarray]:
        """Sound envelope values at arbitrary points.

        Between grid points the true envelope is unknown, so the lower
        cdf is read from the last grid point at or below x and the upper
        cdf from the first grid point at or above x.
        """
        x = np.asarray(x, dtype=float)
        i_lo = np.searchsorted(self.grid, x, side="right") - 1
        lo = np.where(i_lo >= 0, self.cdf_lo[np.clip(i_lo, 0, None)], 0.0)
        i_hi = np.searchsorted(self.grid, x, side="left")
        hi = np.where(i_hi < len(self.grid),
                      self.cdf_hi[np.clip(i_hi, None, len(self.grid) - 1)],
                      self.cdf_hi[-1])
        return lo, hi

    def prob_bounds(self, a: float, b: float) -> tuple[float, float]:
        """Bounds on P[a <= Z <= b]."""
        lo_a, hi_a = self.cdf_bounds(a)
        lo_b, hi_b = self.cdf_bounds(b)
        return (max(0.0, float(lo_b - hi_a)), min(1.0, float(hi_b - lo_a)))


def ds_to_pbox(ds: DSStructure) -> PBox:
    los = np.array([e.interval.lo for e in ds.elements])
    his = np.array([e.interval.hi for e in ds.elements])
    pmin = np.array([e.p_min for e in ds.elements])
    pmax = np.array([e.p_max for e in ds.elements])
    grid = np.unique(np.concatenate([los, his]))

    order_lo = np.argsort(los, kind="stable")
    lo_sorted, pmax_cum = los[order_lo], np.concatenate([[0.0], np.cumsum(pmax[order_lo])])
    cdf_hi = pmax_cum[np.searchsorted(lo_sorted, grid, side="right")]

    order_hi = np.argsort(his, kind="stable")
    hi_sorted, pmin_cum = his[order_hi], np.concatenate([[0.0], np.cumsum(pmin[order_hi])])
    cdf_lo = pmin_cum[np.searchsorted(hi_sorted, grid, side="right")]

    cdf_hi = np.clip(cdf_hi, 0.0, 1.0)
    cdf_lo = np.clip(cdf_lo, 0.0, 1.0)
    cdf_lo = np.minimum(cdf_lo, cdf_hi)
    return PBox(grid, cdf_lo, cdf_hi)


def pbox_to_ds(pb: PBox, n: int, levels: Sequence[float] | None = None) -> DSStructure:
    """Horizontal slicing of the envelope into focal elements.

    Element i spans from where the upper cdf first exceeds the previous
    level to where the lower cdf reaches the current level, and carries
    the level increment as known mass.  Grid reads back off by one point
    on the left so sampled envelopes are never tightened.
    """
    if n < 1:
        raise ValueError("need at least one slice")
    if levels is None:
        levels = [(i + 1) / n for i in range(n)]
    levels = list(levels)
    if len(levels) != n or any(b <= a for a, b in zip([0.0] + levels[:-1], levels)) or abs(levels[-1] - 1.0) > MASS_TOL:
        raise ValueError("levels must increase to 1")
    last = len(pb.grid) - 1
    elements = []
    prev = 0.0
    for beta in levels:
        j = np.searchsorted(pb.cdf_hi, prev, side="right")
        left = pb.grid[last] if j > last else pb.grid[max(j - 1, 0)]
        k = np.searchsorted(pb.cdf_lo, min(beta, pb.cdf_lo[-1]), side="left")
        right = pb.grid[min(k, last)]
        elements.append(FocalElement.known(min(left, right), max(left, right), beta - prev))
        prev = beta
    return DSStructure.of(elements)


def ind_op(dsx: DSStructure, dsy: DSStructure, op: str,
           trace_x: Trace, trace_y: Trace) -> tuple[DSStructure, Trace]:
    """Pairwise interval op with product masses; operands independent."""
    out = []
    for ex in dsx.elements:
        for ey in dsy.elements:
            r = iv.binop(op, ex.interval, ey.interval)
            out.append(FocalElement(r, ex.p_min * ey.p_min, min(1.0, ex.p_max * ey.p_max)))
    ds = DSStructure.of(out).sorted()
    return ds, op_trace(op, trace_x, trace_y)


def condense(ds: DSStructure, n: int) -> DSStructure:
    """Reduce to at most n elements by hulling midpoint-adjacent runs."""
    if n < 1:
        raise ValueError("need at least one element")
    if len(ds) <= n:
        return ds
    key = lambda e: (e.midpoint, e.interval.lo, e.interval.hi)
    ordered = sorted(ds.elements, key=key)
    merged = []
    for chunk in np.array_split(np.arange(len(ordered)), n):
        group = [ordered[i] for i in chunk]
        hull = group[0].interval
        for e in group[1:]:
            hull = iv.hull(hull, e.interval)
        merged.append(FocalElement(hull,
                                   min(1.0, sum(e.p_min for e in group)),
                                   min(1.0, sum(e.p_max for e in group))))
    return DSStructure.of(merged).sorted()


def export_pbox_csv(pb: PBox, path: str) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "cdf_lo", "cdf_hi"])
        for x, lo, hi in zip(pb.grid, pb.cdf_lo, pb.cdf_hi):
            w.writerow([repr(float(x)), repr(float(lo)), repr(float(hi))])
