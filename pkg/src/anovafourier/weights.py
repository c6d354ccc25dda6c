"""Product-and-order-dependent weights and closed-form truncation bounds.

The weight

    w(k) = gamma_{supp k}^{-1} (1 + ||k||_1)^alpha  prod_{s in supp k} (1+|k_s|)^beta

with gamma_u = Gamma_{|u|} prod_{s in u} gamma_s combines isotropic (alpha)
and dominating-mixed (beta) smoothness with per-dimension weights gamma and
per-order weights Gamma.  Conventions: Gamma_0 = 1 and the empty product is
1, so w(0) = 1.

All bound evaluators return +inf as a marker (instead of raising) when a
summability precondition fails, which keeps parameter sweeps plottable.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from itertools import combinations, product

import numpy as np

from .index_sets import TermFamily


@dataclass(frozen=True, eq=False)
class WeightParams:
    alpha: float
    beta: float
    gamma: np.ndarray   # per-dimension weights, entries in (0, 1]
    Gamma: np.ndarray   # per-order weights Gamma_1..Gamma_d, nonincreasing

    def __post_init__(self):
        g = np.asarray(self.gamma, dtype=float)
        G = np.asarray(self.Gamma, dtype=float)
        if g.ndim != 1 or G.ndim != 1 or g.shape != G.shape:
            raise ValueError("gamma and Gamma must be 1-d arrays of equal length")
        if self.beta < 0:
            raise ValueError("beta must be >= 0")
        if self.alpha < -self.beta:
            raise ValueError("need alpha >= -beta")
        if np.any(g <= 0) or np.any(g > 1) or np.any(G <= 0) or np.any(G > 1):
            raise ValueError("gamma and Gamma entries must lie in (0, 1]")
        if np.any(np.diff(G) > 1e-15):
            raise ValueError("Gamma must be nonincreasing")
        object.__setattr__(self, "gamma", g)
        object.__setattr__(self, "Gamma", G)

    @property
    def d(self) -> int:
        return self.gamma.shape[0]

    def gamma_of_order(self, n: int) -> float:
        return 1.0 if n == 0 else float(self.Gamma[n - 1])


def pod_weight(k, p: WeightParams) -> float:
    """Evaluate the POD weight at a frequency k in Z^d."""
    k = np.asarray(k, dtype=np.int64)
    supp = np.flatnonzero(k)
    gamma_u = p.gamma_of_order(len(supp)) * float(np.prod(p.gamma[supp])) \
        if len(supp) else 1.0
    iso = (1.0 + float(np.sum(np.abs(k)))) ** p.alpha
    mixed = float(np.prod((1.0 + np.abs(k[supp])) ** p.beta)) if len(supp) else 1.0
    return iso * mixed / gamma_u


_BERNOULLI = (1.0 / 6.0, -1.0 / 30.0, 1.0 / 42.0, -1.0 / 30.0)


def zeta(s: float, terms: int = 64) -> float:
    """Riemann zeta for s > 1 by direct series with Euler-Maclaurin tail.

    Accurate to ~1e-14 for s >= 1.05 with the default cutoff.
    """
    if s <= 1.0:
        return math.inf
    K = terms
    head = sum(n ** -s for n in range(1, K))
    tail = K ** (1.0 - s) / (s - 1.0) + 0.5 * K ** -s
    corr = 0.0
    rising = s
    kpow = K ** (-s - 1.0)
    fact = 2.0
    for j, b in enumerate(_BERNOULLI, start=1):
        corr += b / fact * rising * kpow
        rising *= (s + 2 * j - 1) * (s + 2 * j)
        kpow /= K * K
        fact *= (2 * j + 1) * (2 * j + 2)
    return head + tail + corr


def wiener_trunc_bound(p: WeightParams, d_s: int) -> float:
    """Sup-norm truncation bound for superposition threshold d_s.

    Gamma_{d_s+1} (2+d_s)^(-alpha) 2^(-beta (d_s+1)) prod of the d_s+1
    largest gamma entries.  Invariant under permutations of gamma.
    """
    if not 1 <= d_s < p.d:
        raise ValueError("need 1 <= d_s < d (no excluded terms otherwise)")
    g_sorted = np.sort(p.gamma)[::-1]
    return (p.gamma_of_order(d_s + 1)
            * (2.0 + d_s) ** (-p.alpha)
            * 2.0 ** (-p.beta * (d_s + 1))
            * float(np.prod(g_sorted[:d_s + 1])))


def sobolev_trunc_bound_l2(p: WeightParams, d_s: int) -> float:
    """L2 truncation bound; shares the closed form of the sup-norm bound."""
    return wiener_trunc_bound(p, d_s)


def sobolev_trunc_bound_linf(p: WeightParams, d_s: int) -> float:
    """Sup-norm bound via the zeta-function tail sum (alpha = 0, beta > 1/2).

    sqrt( sum_{n=d_s+1}^{d} 2^n Gamma_n^2 (zeta(2 beta) - 1)^n ||gamma||_2^(2n) );
    returns +inf when beta <= 1/2 (the coefficient tail is not summable).
    """
    if p.alpha != 0:
        raise ValueError("this bound requires alpha = 0")
    if not 1 <= d_s <= p.d:
        raise ValueError("need 1 <= d_s <= d")
    if p.beta <= 0.5:
        return math.inf
    z1 = zeta(2.0 * p.beta) - 1.0
    g2 = float(np.sum(p.gamma ** 2))
    total = 0.0
    for n in range(d_s + 1, p.d + 1):
        total += 2.0 ** n * p.gamma_of_order(n) ** 2 * z1 ** n * g2 ** n
    return math.sqrt(total)


def sobolev_trunc_bound_linf_closed(p: WeightParams, d_s: int, c: float) -> float:
    """Geometric closed form of the zeta-tail bound when Gamma_s = c^s.

    Valid under ||gamma||_2 < 1 / (c sqrt(2 zeta(2 beta) - 2)); agrees with
    the finite sum to roundoff.
    """
    if p.alpha != 0:
        raise ValueError("this bound requires alpha = 0")
    if p.beta <= 0.5:
        return math.inf
    if not np.allclose(p.Gamma, c ** np.arange(1, p.d + 1), rtol=1e-12, atol=0):
        raise ValueError("Gamma is not geometric with the given base")
    z1 = zeta(2.0 * p.beta) - 1.0
    g2 = float(np.sum(p.gamma ** 2))
    if math.sqrt(g2) >= 1.0 / (c * math.sqrt(2.0 * z1)):
        raise ValueError("geometric closed form requires ||gamma||_2 < 1/(c sqrt(2 zeta(2b)-2))")
    q = 2.0 * c * c * z1 * g2
    if d_s >= p.d:
        return 0.0
    return math.sqrt(q ** (d_s + 1) / (1.0 - q) * (1.0 - q ** (p.d - d_s)))


def superposition_threshold(p: WeightParams, delta: float) -> int:
    """Smallest d_s whose squared L2 truncation bound is <= 1 - delta.

    Returns d when no threshold qualifies.  The bound is nonincreasing in
    d_s, so a linear scan returns the true minimum.
    """
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must lie in (0, 1)")
    for d_s in range(1, p.d):
        if sobolev_trunc_bound_l2(p, d_s) ** 2 <= 1.0 - delta:
            return d_s
    return p.d


def min_excluded_weight(w, U: TermFamily, d: int | None = None) -> float:
    """Exact min of w over the frequencies whose support falls outside U.

    ``w`` is a WeightParams or a callable on Z^d, coordinate-wise monotone in
    each |k_s|; the minimum is then attained at entries of modulus one on a
    minimal excluded support, so only sign patterns need scanning.
    """
    if isinstance(w, WeightParams):
        p = w
        d = p.d
        w_fn = lambda k: pod_weight(k, p)
    else:
        if d is None:
            raise ValueError("d is required for a callable weight")
        w_fn = w
    mo = U.max_order()
    if mo >= d and len(U) == 2 ** d:
        raise ValueError("U is the full family; no excluded terms")
    best = math.inf
    for order in range(1, min(mo + 1, d) + 1):
        for v in combinations(range(1, d + 1), order):
            if v in U:
                continue
            if any(tuple(c for c in v if c != drop) not in U for drop in v):
                continue  # not minimal: some proper subset already excluded
            for signs in product((1, -1), repeat=order):
                k = np.zeros(d, dtype=np.int64)
                for c, s in zip(v, signs):
                    k[c - 1] = s
                best = min(best, float(w_fn(k)))
    if not math.isfinite(best):
        raise ValueError("no excluded support found below order max|u|+1")
    return best


@dataclass(frozen=True, eq=False)
class BoundCurve:
    """Sampled truncation-bound curve for one parameter sweep."""

    parameter: str       # "alpha" or "beta"
    grid: np.ndarray
    values: np.ndarray
    d: int
    d_s: int
    kind: str            # "l2_linf_pod" or "linf_zeta"


def bound_curve(p: WeightParams, d_s: int, parameter: str, grid,
                kind: str = "l2_linf_pod") -> BoundCurve:
    """Evaluate a truncation bound along an alpha or beta grid."""
    grid = np.asarray(grid, dtype=float)
    vals = np.empty_like(grid)
    for i, t in enumerate(grid):
        alpha = t if parameter == "alpha" else p.alpha
        beta = t if parameter == "beta" else p.beta
        try:
            q = WeightParams(alpha, beta, p.gamma, p.Gamma)
            if kind == "linf_zeta":
                vals[i] = sobolev_trunc_bound_linf(q, d_s)
            else:
                vals[i] = sobolev_trunc_bound_l2(q, d_s)
        except ValueError:
            vals[i] = math.inf
    return BoundCurve(parameter, grid, vals, p.d, d_s, kind)


_SQRT_TOKENS = {"pi": math.pi, "sqrt2": math.sqrt(2.0), "sqrt3": math.sqrt(3.0)}


def parse_weight_sequence(expr: str, d: int) -> np.ndarray:
    """Parse a per-dimension/per-order weight expression into a length-d array.

    Supported forms: a number; ``1/s``; ``1/s^p``; ``c^s`` where c is a
    number or a token expression like ``(sqrt3/pi)``.
    """
    e = expr.strip().replace(" ", "")

    def token_value(text):
        text = text.strip("()")
        if "/" in text:
            num, den = text.split("/")
            return token_value(num) / token_value(den)
        if text in _SQRT_TOKENS:
            return _SQRT_TOKENS[text]
        return float(text)

    s = np.arange(1, d + 1, dtype=float)
    if e == "1/s":
        return 1.0 / s
    m = re.fullmatch(r"1/s\^([0-9.]+)", e)
    if m:
        return 1.0 / s ** float(m.group(1))
    m = re.fullmatch(r"(.+)\^s", e)
    if m:
        return token_value(m.group(1)) ** s
    return np.full(d, token_value(e))
