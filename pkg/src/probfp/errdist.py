"""Distributions of the relative rounding error.

The error of rounding a random input X is measured in multiples of the
unit roundoff u, so its continuous part lives on [-1, 1].  Three
constructions are provided, in decreasing exactness:

  * exact_error_density: per-representable-value sum; only feasible for
    formats small enough to enumerate, but gives a machine-accurate
    density and CDF.
  * hp_error_density: binade-aggregated form for real-world formats,
    with a rigorous total-variation remainder covering what the
    aggregation discards.
  * typical_density: the closed-form limit when every significand is
    equally likely; parameter-free.

Discrete atoms (inputs collapsing to zero, where the relative error is
exactly 1, and overflow to either infinity) are carried explicitly.
Also here: bounds on Cov(X, err(X)) used to justify treating the
rounding factor of an operation as independent of its operand.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .dsarith import PBox
from .dists import Distribution
from .formats import FloatFormat

GRID_BASE_NODES = 16385


def build_grid(base_nodes: int = GRID_BASE_NODES) -> np.ndarray:
    """Nodes over [-1,1], refined near the kinks at |t| in {1/2, 1}."""
    base = np.linspace(-1.0, 1.0, base_nodes)
    extra = []
    for c in (-1.0, -0.5, 0.5, 1.0):
        steps = 2.0 ** -np.arange(11, 26, dtype=float)
        extra.append(c + steps)
        extra.append(c - steps)
    pts = np.concatenate([base] + extra)
    return np.unique(pts[(pts >= -1.0) & (pts <= 1.0)])


@dataclass(frozen=True)
class ErrorDistribution:
    grid: np.ndarray
    density_values: np.ndarray
    cdf_values: np.ndarray
    atom_one: float
    atom_pos_inf: float
    atom_neg_inf: float
    remainder: float
    density: Callable[[np.ndarray], np.ndarray]
    cdf: Callable[[np.ndarray], np.ndarray]

    @property
    def atoms(self) -> float:
        return self.atom_one + self.atom_pos_inf + self.atom_neg_inf

    def mass_window(self) -> tuple[float, float]:
        total = float(self.cdf_values[-1]) + self.atoms
        return total - self.remainder, total + self.remainder


def typical_density(t) -> np.ndarray:
    """Limiting error density when all significands are equiprobable."""
    t = np.abs(np.asarray(t, dtype=float))
    inner = np.full_like(t, 0.75)
    with np.errstate(divide="ignore"):
        r = np.where(t > 0, 1.0 / np.where(t > 0, t, 1.0) - 1.0, 0.0)
    outer = 0.5 * r + 0.25 * r * r
    return np.where(t <= 0.5, inner, np.where(t <= 1.0, outer, 0.0))


def _atoms(d: Distribution, fmt: FloatFormat) -> tuple[float, float, float]:
    thr = float(fmt.zero_threshold)
    big = float(fmt.max_finite)
    atom_one = float(d.cdf(thr) - d.cdf(-thr))
    atom_pos = float(1.0 - d.cdf(big))
    atom_neg = float(d.cdf(-big))
    return atom_one, atom_pos, atom_neg


def _trapezoid_cdf(grid: np.ndarray, dens: np.ndarray) -> np.ndarray:
    steps = np.diff(grid) * (dens[:-1] + dens[1:]) / 2.0
    return np.concatenate([[0.0], np.cumsum(steps)])


def _cumulative_cdf(grid: np.ndarray, dens: np.ndarray) -> tuple[np.ndarray, float]:
    """Cumulative integral of a sampled density plus a quadrature-error estimate
    (the trapezoid/Simpson gap, which dominates the higher-order residual)."""
    from scipy.integrate import cumulative_simpson

    trap = _trapezoid_cdf(grid, dens)
    simp = cumulative_simpson(dens, x=grid, initial=0.0)
    cdf = np.maximum.accumulate(np.maximum(simp, 0.0))
    return cdf, float(np.max(np.abs(trap - simp))) + 1e-12


def exact_error_density(d: Distribution, fmt: FloatFormat,
                        grid: np.ndarray | None = None) -> ErrorDistribution:
    """Per-value error density; machine-accurate CDF. Small formats only."""
    from .formats import enumerate_finite, exact_value, rounding_interval

    if fmt.count_finite_nonzero() > (1 << 22):
        raise ValueError("format too large to enumerate; use hp_error_density")
    if grid is None:
        grid = build_grid()
    win_lo = d.support.lo if math.isfinite(d.support.lo) else None
    win_hi = d.support.hi if math.isfinite(d.support.hi) else None
    zs = list(enumerate_finite(fmt, win_lo, win_hi))
    z_val = np.array([float(exact_value(z, fmt)) for z in zs])
    z_lo = np.empty(len(zs))
    z_hi = np.empty(len(zs))
    for i, z in enumerate(zs):
        ri = rounding_interval(z, fmt)
        z_lo[i], z_hi[i] = float(ri.lo), float(ri.hi)
    u = fmt.u
    pos = z_val > 0
    cdf_at_lo = np.asarray(d.cdf(z_lo), dtype=float)
    cdf_at_hi = np.asarray(d.cdf(z_hi), dtype=float)
    t_block = max(1, 30_000_000 // max(1, len(z_val)))

    def _sum_over_values(t: np.ndarray, term) -> np.ndarray:
        out = np.zeros_like(t)
        for tstart in range(0, len(t), t_block):
            shrink = 1.0 - t[tstart:tstart + t_block, None] * u
            for start in range(0, len(z_val), 4096):
                zc = slice(start, start + 4096)
                out[tstart:tstart + t_block] += np.sum(term(shrink, zc), axis=1)
        return out

    def density(t):
        t = np.atleast_1d(np.asarray(t, dtype=float))

        def term(shrink, zc):
            x = z_val[None, zc] / shrink
            inside = (x >= z_lo[None, zc]) & (x <= z_hi[None, zc])
            w = d.pdf(x) * (u * np.abs(z_val)[None, zc]) / (shrink ** 2)
            return np.where(inside, w, 0.0)

        return _sum_over_values(t, term)

    def cdf(t):
        t = np.atleast_1d(np.asarray(t, dtype=float))

        def term(shrink, zc):
            x = np.clip(z_val[None, zc] / shrink, z_lo[None, zc], z_hi[None, zc])
            fx = d.cdf(x)
            # the error is increasing in x for positive z, decreasing for negative
            return np.where(pos[None, zc], fx - cdf_at_lo[None, zc],
                            cdf_at_hi[None, zc] - fx)

        return _sum_over_values(t, term)

    atom_one, atom_pos, atom_neg = _atoms(d, fmt)
    dens_vals = density(grid)
    cdf_vals = cdf(grid)
    return ErrorDistribution(grid, dens_vals, cdf_vals, atom_one, atom_pos, atom_neg,
                             0.0, density, cdf)


def _binades(fmt: FloatFormat) -> np.ndarray:
    return np.arange(fmt.e_min + 1, fmt.e_max)


def _weighted_binade_integrals(d: Distribution, e_arr: np.ndarray, upper_scale,
                               u: float) -> np.ndarray:
    """Per (sign, binade): integral of (|x|/2^{e+1}) f(x) dx from |x| = 2^e(1-u)
    up to |x| = 2^e * upper_scale, one row per binade, columns [positive, negative]."""
    lo_mag = np.ldexp(1.0 - u, e_arr)
    with np.errstate(over="ignore"):
        hi_mag = np.ldexp(np.asarray(upper_scale, dtype=float), e_arr)
    anti = d.xpdf_anti
    scale = np.ldexp(1.0, -(e_arr + 1))
    pos = (anti(hi_mag) - anti(lo_mag)) * scale
    neg = (anti(-hi_mag) - anti(-lo_mag)) * scale
    return np.maximum(pos, 0.0), np.maximum(neg, 0.0)


def hp_error_density(d: Distribution, fmt: FloatFormat,
                     grid: np.ndarray | None = None) -> ErrorDistribution:
    """Binade-aggregated error density with a rigorous remainder."""
    if grid is None:
        grid = build_grid()
    u = fmt.u
    e_arr = _binades(fmt)
    lo_sup, hi_sup = d.support
    mag_hi = max(abs(lo_sup), abs(hi_sup))
    mag = np.ldexp(1.0, e_arr)
    keep = mag <= mag_hi * 2.0 + np.ldexp(1.0, fmt.e_min + 2)
    e_arr = e_arr[keep]

    pos_half, neg_half = _weighted_binade_integrals(d, e_arr, 2.0 - u, u)
    k_half = float(np.sum(pos_half) + np.sum(neg_half))
    quad_err = 1e-15 * (np.sum(np.abs(pos_half)) + np.sum(np.abs(neg_half))
                        + len(e_arr) * d.xpdf_err_scale * 1e-2)

    def outer_sum(ts: np.ndarray) -> np.ndarray:
        # |t| in (1/2, 1]: upper magnitude per binade is 2^e(1/|t| - u)
        s = (1.0 / np.abs(ts) - u)[:, None]
        p, nvals = _weighted_binade_integrals(d, e_arr, s, u)
        return np.sum(p, axis=-1) + np.sum(nvals, axis=-1)

    def density(t):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        shrink = 1.0 - t * u
        vals = np.full_like(t, k_half)
        outer = np.abs(t) > 0.5
        if np.any(outer):
            vals[outer] = outer_sum(t[outer])
        vals = np.where(np.abs(t) > 1.0, 0.0, vals)
        return vals / shrink

    atom_one, atom_pos, atom_neg = _atoms(d, fmt)
    dens_vals = density(grid)
    cdf_vals, cum_err = _cumulative_cdf(grid, dens_vals)
    remainder = _hp_remainder(d, fmt) + float(quad_err) + cum_err

    def cdf(t):
        return np.interp(np.asarray(t, dtype=float), grid, cdf_vals)

    return ErrorDistribution(grid, dens_vals, cdf_vals, atom_one, atom_pos, atom_neg,
                             remainder, density, cdf)


def _segment_max(d: Distribution, g1: float, g2: float, nodes: int = 257) -> float:
    """Sound-ish max of |f'(x)x + f(x)| over the open interval (g1, g2):
    dense grid plus one inter-node variation as padding."""
    eps = (g2 - g1) * 1e-9
    xs = np.linspace(g1 + eps, g2 - eps, nodes)
    g = np.abs(d.pdf_derivative(xs) * xs + d.pdf(xs))
    m = float(np.max(g))
    pad = float(np.max(np.abs(np.diff(g)))) if len(g) > 1 else 0.0
    return m + pad


def _hp_remainder(d: Distribution, fmt: FloatFormat) -> float:
    """Total-variation gap between the aggregated and exact densities.

    Mass on extremal exponents, plus second-order linearization error
    accumulated per smoothness segment: each representable z carries
    weight (2^p + k) * 2^{2e} / 2^{3p+1} against the segment max of
    |f'(x)x + f(x)|, summed in closed form over the touched k-range.
    """
    p = fmt.p
    u = fmt.u
    total = 0.0

    # mass rounding into the extremal binades (widened windows, sound)
    thr = float(fmt.zero_threshold)
    lo_edge = np.ldexp(1.0 + u, fmt.e_min + 1)
    hi_edge = np.ldexp(1.0 - u, fmt.e_max)
    big = float(fmt.max_finite)
    total += float(d.cdf(lo_edge) - d.cdf(thr)) + float(d.cdf(-thr) - d.cdf(-lo_edge))
    total += float(d.cdf(big) - d.cdf(hi_edge)) + float(d.cdf(-hi_edge) - d.cdf(-big))

    lo_sup, hi_sup = d.support
    bps = sorted(set(d.breakpoints))
    for e in _binades(fmt):
        for sgn in (1.0, -1.0):
            # stretched window: union of the rounding intervals of binade e
            w1 = sgn * np.ldexp(1.0 - 2.0 ** -(p + 2), e)
            w2 = sgn * np.ldexp(2.0 - 2.0 ** -(p + 1), e)
            a, b = min(w1, w2), max(w1, w2)
            if b <= lo_sup or a >= hi_sup:
                continue
            cuts = [a] + [c for c in bps if a < c < b] + [b]
            scale = np.ldexp(1.0, e)
            for g1, g2 in zip(cuts[:-1], cuts[1:]):
                m_seg = _segment_max(d, g1, g2)
                if m_seg == 0.0:
                    continue
                # touched significand range (widened by one, sound)
                lo_rel = (min(abs(g1), abs(g2)) / scale - 1.0) * 2.0 ** (p + 1)
                hi_rel = (max(abs(g1), abs(g2)) / scale - 1.0) * 2.0 ** (p + 1)
                k1 = max(0, int(math.floor((lo_rel - 1.0) / 2.0)) - 1)
                k2 = min(2 ** p - 1, int(math.ceil((hi_rel + 1.0) / 2.0)) + 1)
                if k2 < k1:
                    continue
                count = k2 - k1 + 1
                series = count * 2.0 ** p + (k1 + k2) * count / 2.0
                try:
                    scale2 = 2.0 ** (2 * e - 3 * p - 1)
                except OverflowError:
                    scale2 = math.inf
                total += m_seg * series * scale2
    return total


def typical_with_slack(d: Distribution, fmt: FloatFormat,
                       grid: np.ndarray | None = None) -> ErrorDistribution:
    """Typical density wrapped with a measured gap to the aggregated form."""
    hp = hp_error_density(d, fmt, grid)
    g = hp.grid
    typ = typical_density(g)
    l1 = float(np.trapezoid(np.abs(hp.density_values - typ), g))
    cdf_vals, cum_err = _cumulative_cdf(g, typ)

    def cdf(t):
        return np.interp(np.asarray(t, dtype=float), g, cdf_vals)

    return ErrorDistribution(g, typ, cdf_vals, hp.atom_one, hp.atom_pos_inf,
                             hp.atom_neg_inf, hp.remainder + l1 + cum_err,
                             typical_density, cdf)


def error_pbox(e: ErrorDistribution) -> PBox:
    """CDF envelope: the continuous CDF plus atoms, widened by the remainder."""
    c_full = e.atom_neg_inf + e.cdf_values + e.atom_one * (e.grid >= 1.0)
    lo = np.clip(c_full - e.remainder, 0.0, 1.0)
    hi = np.clip(c_full + e.remainder, 0.0, 1.0)
    return PBox(e.grid.copy(), lo, hi)


@dataclass(frozen=True)
class CovarianceBounds:
    lo: float
    hi: float
    L: float
    K: float


def covariance_bounds(d: Distribution, fmt: FloatFormat) -> CovarianceBounds:
    """Bounds on Cov(X, err_rel(X)) for piecewise-constant-ish densities."""
    u = fmt.u
    lo_sup, hi_sup = d.support
    mag_hi = max(abs(lo_sup), abs(hi_sup))
    L = 0.0
    K = 0.0
    for e in range(fmt.e_min, fmt.e_max + 1):
        lo_mag = math.ldexp(1.0, e)
        if lo_mag > mag_hi * 2.0:
            break
        hi_mag = lo_mag * 2.0
        f_pos = float(d.pdf(lo_mag))
        f_neg = float(d.pdf(-lo_mag))
        L += (f_pos - f_neg) * math.ldexp(1.0, 2 * e) * 1.5 * u * u
        anti = d.xpdf_anti
        pos = float(anti(hi_mag) - anti(lo_mag)) / hi_mag
        neg = float(anti(-hi_mag) - anti(-lo_mag)) / hi_mag
        K += max(pos, 0.0) + max(neg, 0.0)
    ex = d.mean()[0]
    c1 = L - ex * K * (4.0 * u / 3.0)
    c2 = L - ex * K * (u / 6.0)
    return CovarianceBounds(min(c1, c2), max(c1, c2), L, K)


def export_density_csv(e: ErrorDistribution, path: str) -> None:
    c_full = e.atom_neg_inf + e.cdf_values + e.atom_one * (e.grid >= 1.0)
    lo = np.clip(c_full - e.remainder, 0.0, 1.0)
    hi = np.clip(c_full + e.remainder, 0.0, 1.0)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "density", "cdf_lo", "cdf_hi"])
        for row in zip(e.grid, e.density_values, lo, hi):
            w.writerow([repr(float(v)) for v in row])
