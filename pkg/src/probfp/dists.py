"""Input random variables.

Built-in families (uniform, normal, laplace, exponential, rayleigh,
beta), user-defined piecewise-polynomial densities, optional truncation
with renormalization, inverse-transform sampling, and discretization of
a bounded distribution into a Dempster-Shafer structure.

Beyond pdf/cdf/ppf, each distribution exposes what the error-density
machinery needs: the pdf's derivative, the points where pdf smoothness
breaks, and closed-form (or quadrature, with tracked error) integrals
of x*pdf(x).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from numpy.polynomial import Polynomial
from scipy import optimize, special, stats

from .dsarith import DSStructure, FocalElement
from .intervals import Interval

BUILTIN_KINDS = ("uniform", "normal", "laplace", "exponential", "rayleigh", "beta")

_SQRT_2PI = math.sqrt(2.0 * math.pi)


def _phi(s: np.ndarray) -> np.ndarray:
    return np.exp(-0.5 * np.asarray(s, dtype=float) ** 2) / _SQRT_2PI


@dataclass(frozen=True)
class Distribution:
    name: str
    support: Interval
    pdf: Callable[[np.ndarray], np.ndarray]
    cdf: Callable[[np.ndarray], np.ndarray]
    ppf: Callable[[np.ndarray], np.ndarray]
    pdf_derivative: Callable[[np.ndarray], np.ndarray]
    breakpoints: tuple[float, ...]
    # vectorized antiderivative of x*pdf(x), constant outside the support
    xpdf_anti: Callable[[np.ndarray], np.ndarray] = field(repr=False, default=None)
    # relative scale of double-roundoff noise in xpdf_anti differences
    xpdf_err_scale: float = field(repr=False, default=1.0)

    def mass(self, a: float, b: float) -> float:
        return float(self.cdf(b) - self.cdf(a))

    def xpdf_integral(self, a: float, b: float) -> tuple[float, float]:
        """Integral of x*pdf(x) over [a, b] and a numerical-error bound."""
        if a >= b:
            return 0.0, 0.0
        val = float(self.xpdf_anti(b) - self.xpdf_anti(a))
        return val, 1e-15 * (abs(val) + self.xpdf_err_scale)

    def mean(self) -> tuple[float, float]:
        return self.xpdf_integral(self.support.lo, self.support.hi)


def sample(d: Distribution, seed: int, n: int) -> np.ndarray:
    """Inverse-transform samples, reproducible for a fixed seed."""
    if n < 1:
        raise ValueError("need at least one sample")
    u = np.random.default_rng(seed).random(n)
    return np.asarray(d.ppf(u), dtype=float)


def _family(kind: str, params: Sequence[float]) -> Distribution:
    if kind == "uniform":
        a, b = params
        if not b > a:
            raise ValueError("uniform needs a < b")
        h = 1.0 / (b - a)
        frozen = stats.uniform(loc=a, scale=b - a)

        def anti(y):
            y = np.clip(np.asarray(y, dtype=float), a, b)
            return h * y * y / 2.0

        return Distribution(f"uniform({a},{b})", Interval(a, b),
                            frozen.pdf, frozen.cdf, frozen.ppf,
                            lambda x: np.zeros_like(np.asarray(x, dtype=float)),
                            (a, b), anti, max(abs(a), abs(b)))

    if kind == "normal":
        mu, sigma = params
        if not sigma > 0:
            raise ValueError("normal needs sigma > 0")
        frozen = stats.norm(loc=mu, scale=sigma)

        def dpdf(x):
            x = np.asarray(x, dtype=float)
            return -(x - mu) / sigma ** 2 * frozen.pdf(x)

        def anti(y):
            s = (np.asarray(y, dtype=float) - mu) / sigma
            return -sigma * _phi(s) + mu * special.ndtr(s)

        return Distribution(f"normal({mu},{sigma})", Interval(-math.inf, math.inf),
                            frozen.pdf, frozen.cdf, frozen.ppf, dpdf, (),
                            anti, abs(mu) + sigma)

    if kind == "laplace":
        mu, b = params
        if not b > 0:
            raise ValueError("laplace needs scale > 0")
        frozen = stats.laplace(loc=mu, scale=b)

        def dpdf(x):
            x = np.asarray(x, dtype=float)
            return -np.sign(x - mu) / b * frozen.pdf(x)

        def anti(y):
            # piecewise antiderivative of t*pdf(t), continuous at mu;
            # exponents clamped so the unselected where-branch cannot overflow
            y = np.asarray(y, dtype=float)
            s = (y - mu) / b
            up = -np.exp(np.minimum(-s, 0.0)) * (y + b) / 2.0
            lo_ = np.exp(np.minimum(s, 0.0)) * (y - b) / 2.0 - mu
            return np.where(y >= mu, up, lo_)

        return Distribution(f"laplace({mu},{b})", Interval(-math.inf, math.inf),
                            frozen.pdf, frozen.cdf, frozen.ppf, dpdf, (mu,),
                            anti, abs(mu) + b)

    if kind == "exponential":
        (lam,) = params
        if not lam > 0:
            raise ValueError("exponential needs rate > 0")
        frozen = stats.expon(scale=1.0 / lam)

        def dpdf(x):
            x = np.asarray(x, dtype=float)
            return np.where(x >= 0, -lam * frozen.pdf(x), 0.0)

        def anti(y):
            y = np.maximum(np.asarray(y, dtype=float), 0.0)
            return -np.exp(-lam * y) * (y + 1.0 / lam)

        return Distribution(f"exponential({lam})", Interval(0.0, math.inf),
                            frozen.pdf, frozen.cdf, frozen.ppf, dpdf, (0.0,),
                            anti, 1.0 / lam)

    if kind == "rayleigh":
        (sigma,) = params
        if not sigma > 0:
            raise ValueError("rayleigh needs sigma > 0")
        frozen = stats.rayleigh(scale=sigma)

        def dpdf(x):
            x = np.asarray(x, dtype=float)
            g = np.exp(-x * x / (2 * sigma ** 2))
            return np.where(x >= 0, g * (1.0 / sigma ** 2 - x * x / sigma ** 4), 0.0)

        def anti(y):
            y = np.maximum(np.asarray(y, dtype=float), 0.0)
            return (-y * np.exp(-y * y / (2 * sigma ** 2))
                    + sigma * math.sqrt(math.pi / 2) * special.erf(y / (sigma * math.sqrt(2))))

        return Distribution(f"rayleigh({sigma})", Interval(0.0, math.inf),
                            frozen.pdf, frozen.cdf, frozen.ppf, dpdf, (0.0,),
                            anti, sigma)

    if kind == "beta":
        al, be = params
        if not (al > 0 and be > 0):
            raise ValueError("beta needs positive shape parameters")
        frozen = stats.beta(al, be)

        def dpdf(x):
            x = np.asarray(x, dtype=float)
            inside = (x > 0) & (x < 1)
            xs = np.where(inside, x, 0.5)
            val = frozen.pdf(xs) * ((al - 1) / xs - (be - 1) / (1 - xs))
            return np.where(inside, val, 0.0)

        def anti(y):
            y = np.clip(np.asarray(y, dtype=float), 0.0, 1.0)
            return al / (al + be) * special.betainc(al + 1, be, y)

        return Distribution(f"beta({al},{be})", Interval(0.0, 1.0),
                            frozen.pdf, frozen.cdf, frozen.ppf, dpdf, (0.0, 1.0),
                            anti, 1.0)

    raise ValueError(f"unknown distribution kind {kind!r}")


def truncate(d: Distribution, lo: float, hi: float) -> Distribution:
    """Restrict to [lo, hi] and renormalize."""
    lo = max(lo, d.support.lo)
    hi = min(hi, d.support.hi)
    if not lo < hi:
        raise ValueError("truncation window does not intersect the support")
    mass = float(d.cdf(hi) - d.cdf(lo))
    if mass <= 0.0:
        raise ValueError("truncation window carries zero probability mass")
    f_lo = float(d.cdf(lo))
    z = 1.0 / mass

    def pdf(x):
        x = np.asarray(x, dtype=float)
        return np.where((x >= lo) & (x <= hi), d.pdf(x) * z, 0.0)

    def cdf(x):
        x = np.asarray(x, dtype=float)
        return np.clip((d.cdf(np.clip(x, lo, hi)) - f_lo) * z, 0.0, 1.0)

    def ppf(q):
        q = np.asarray(q, dtype=float)
        return np.clip(d.ppf(f_lo + q * mass), lo, hi)

    def dpdf(x):
        x = np.asarray(x, dtype=float)
        return np.where((x >= lo) & (x <= hi), d.pdf_derivative(x) * z, 0.0)

    def anti(y):
        return d.xpdf_anti(np.clip(np.asarray(y, dtype=float), lo, hi)) * z

    bps = tuple(sorted({lo, hi} | {b for b in d.breakpoints if lo < b < hi}))
    return Distribution(f"{d.name}|[{lo},{hi}]", Interval(lo, hi),
                        pdf, cdf, ppf, dpdf, bps, anti, d.xpdf_err_scale * z)


def make_builtin(kind: str, params: Sequence[float],
                 truncation: tuple[float, float] | None = None) -> Distribution:
    d = _family(kind, tuple(float(p) for p in params))
    if truncation is not None:
        d = truncate(d, float(truncation[0]), float(truncation[1]))
    return d


def _coef_matrix(polys: Sequence[Polynomial]) -> np.ndarray:
    width = max(p.coef.size for p in polys)
    mat = np.zeros((len(polys), width))
    for i, p in enumerate(polys):
        mat[i, : p.coef.size] = p.coef
    return mat


def _eval_pieces(mat: np.ndarray, idx: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Horner evaluation of per-piece polynomials, vectorized over x."""
    vals = np.zeros_like(x)
    for k in range(mat.shape[1] - 1, -1, -1):
        vals = vals * x + mat[idx, k]
    return vals


def piecewise(breakpoints: Sequence[float], densities: Sequence[Sequence[float]]) -> Distribution:
    """Density given per piece as polynomial coefficients (low order first)."""
    bps = [float(b) for b in breakpoints]
    if len(bps) != len(densities) + 1 or any(b >= c for b, c in zip(bps, bps[1:])):
        raise ValueError("breakpoints must be sorted with one polynomial per gap")
    polys = [Polynomial(list(c)) for c in densities]
    for p, (a, b) in zip(polys, zip(bps, bps[1:])):
        xs = np.linspace(a, b, 64)
        if np.any(p(xs) < -1e-12):
            raise ValueError("density pieces must be nonnegative")
    ints = [p.integ() for p in polys]
    masses = [float(I(b) - I(a)) for I, a, b in zip(ints, bps[:-1], bps[1:])]
    total = sum(masses)
    if total <= 0.0:
        raise ValueError("density has zero total mass")
    polys = [p / total for p in polys]
    ints = [p.integ() for p in polys]
    masses = [m / total for m in masses]
    cum = np.concatenate([[0.0], np.cumsum(masses)])
    arr_bps = np.array(bps)

    pdf_mat = _coef_matrix(polys)
    int_mat = _coef_matrix(ints)
    der_mat = _coef_matrix([p.deriv() for p in polys])
    cdf_off = np.array([cum[i] - float(ints[i](arr_bps[i])) for i in range(len(polys))])

    def piece_index(x):
        return np.clip(np.searchsorted(arr_bps, x, side="right") - 1, 0, len(polys) - 1)

    def pdf(x):
        x = np.asarray(x, dtype=float)
        xe = np.clip(x, bps[0], bps[-1])
        vals = _eval_pieces(pdf_mat, piece_index(xe), xe)
        return np.where((x >= bps[0]) & (x <= bps[-1]), vals, 0.0)

    def cdf(x):
        x = np.asarray(x, dtype=float)
        xc = np.clip(x, bps[0], bps[-1])
        idx = piece_index(xc)
        vals = cdf_off[idx] + _eval_pieces(int_mat, idx, xc)
        return np.clip(vals, 0.0, 1.0)

    def ppf(q):
        q = np.atleast_1d(np.asarray(q, dtype=float))
        out = np.empty_like(q)
        for j, qq in enumerate(q):
            qq = min(max(qq, 0.0), 1.0)
            i = int(np.clip(np.searchsorted(cum, qq, side="right") - 1, 0, len(polys) - 1))
            a, b = bps[i], bps[i + 1]
            g = lambda v: cum[i] + ints[i](v) - ints[i](a) - qq
            if g(a) >= 0:
                out[j] = a
            elif g(b) <= 0:
                out[j] = b
            else:
                out[j] = optimize.brentq(g, a, b, xtol=1e-14)
        return out if out.size > 1 else float(out[0])

    def dpdf(x):
        x = np.asarray(x, dtype=float)
        xe = np.clip(x, bps[0], bps[-1])
        vals = _eval_pieces(der_mat, piece_index(xe), xe)
        return np.where((x >= bps[0]) & (x <= bps[-1]), vals, 0.0)

    x_ints = [(Polynomial([0.0, 1.0]) * p).integ() for p in polys]
    cum_x = np.concatenate([[0.0], np.cumsum([float(I(b) - I(a)) for I, a, b
                                              in zip(x_ints, bps[:-1], bps[1:])])])
    xint_mat = _coef_matrix(x_ints)
    anti_off = np.array([cum_x[i] - float(x_ints[i](arr_bps[i])) for i in range(len(polys))])

    def anti(y):
        y = np.clip(np.asarray(y, dtype=float), bps[0], bps[-1])
        idx = piece_index(y)
        return anti_off[idx] + _eval_pieces(xint_mat, idx, y)

    return Distribution(f"piecewise[{len(polys)}]", Interval(bps[0], bps[-1]),
                        pdf, cdf, ppf, dpdf, tuple(bps), anti,
                        max(abs(bps[0]), abs(bps[-1])) + 1.0)


def discretize(d: Distribution, n: int, scheme: str = "mass") -> DSStructure:
    """Partition the support into n focal elements with exact CDF masses.

    Schemes: "mass" cuts at equal-probability quantiles, "width" at
    equally spaced points, "hybrid" merges both cut families so that
    probability-dense regions get quantile resolution while low-mass
    tails still get geometric resolution.
    """
    if n < 1:
        raise ValueError("need at least one focal element")
    lo, hi = d.support
    if not (math.isfinite(lo) and math.isfinite(hi)):
        raise ValueError("unbounded support: truncate before discretizing")
    if scheme == "mass":
        interior = np.asarray(d.ppf(np.arange(1, n) / n), dtype=float)
    elif scheme == "width":
        interior = np.linspace(lo, hi, n + 1)[1:-1]
    elif scheme == "hybrid":
        q = (n - 1) // 2
        w = (n - 1) - q
        qs = np.asarray(d.ppf(np.arange(1, q + 1) / (q + 1)), dtype=float)
        ws = lo + (hi - lo) * np.arange(1, w + 1) / (w + 1)
        interior = np.concatenate([qs, ws])
    else:
        raise ValueError(f"unknown discretization scheme {scheme!r}")
    cuts = np.unique(np.concatenate([[lo], np.clip(interior, lo, hi), [hi]]))
    while len(cuts) < n + 1:
        gaps = np.diff(cuts)
        k = int(np.argmax(gaps))
        cuts = np.insert(cuts, k + 1, cuts[k] + gaps[k] / 2.0)
    cdf_vals = np.asarray(d.cdf(cuts), dtype=float)
    masses = np.clip(np.diff(cdf_vals), 0.0, 1.0)
    return DSStructure.of(
        FocalElement.known(float(a), float(b), float(m))
        for a, b, m in zip(cuts[:-1], cuts[1:], masses)
    )
