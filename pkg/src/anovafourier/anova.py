"""Coefficient-level ANOVA machinery.

Works on :class:`CoefficientMap` objects: complex Fourier coefficients laid
out in the canonical block order of a :class:`GroupedIndexSet`.  Because the
embedded blocks have disjoint supports, every term's contribution is exactly
one contiguous slice; truncation, variance and sensitivity indices follow by
slicing.

The quadrature helpers at the bottom are test oracles (dyadic tensor grids,
d <= 4): they validate the projection/term identities independently of the
coefficient path.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from itertools import combinations, product

import numpy as np

from .index_sets import (GroupedIndexSet, TermFamily, term_sort_key,
                         validate_term)


@dataclass(frozen=True, eq=False)
class CoefficientMap:
    """Complex coefficients aligned with the canonical layout of an index set."""

    index_set: GroupedIndexSet
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.complex128).reshape(-1)
        if v.shape[0] != len(self.index_set):
            raise ValueError(
                f"coefficient vector length {v.shape[0]} != |I(U)| = {len(self.index_set)}")
        object.__setattr__(self, "values", v)

    def block(self, term) -> np.ndarray:
        term = tuple(term)
        sl = self.index_set.block_slices().get(term)
        if sl is None:
            raise KeyError(f"no block for term {term}")
        return self.values[sl]

    def mean(self) -> complex:
        return complex(self.block(())[0])


def support(k) -> tuple:
    """Coordinates (1-based, ascending) of the nonzero entries of k."""
    k = np.asarray(k)
    return tuple(int(i + 1) for i in np.flatnonzero(k))


def term_family_ds(d, d_s) -> TermFamily:
    """All coordinate subsets of order at most d_s."""
    if not 1 <= d_s <= d:
        raise ValueError("need 1 <= d_s <= d")
    terms = [()]
    for n in range(1, d_s + 1):
        terms.extend(combinations(range(1, d + 1), n))
    return TermFamily(d, frozenset(terms))


def truncate(coeffs: CoefficientMap, U: TermFamily) -> CoefficientMap:
    """Keep exactly the blocks whose term lies in U (a new, smaller map)."""
    fam = coeffs.index_set.family
    if not U.issubset(fam):
        extra = sorted(U.terms - fam.terms, key=term_sort_key)
        raise ValueError(f"family contains terms without blocks: {extra[:3]}")
    slices = coeffs.index_set.block_slices()
    blocks = tuple(b for b in coeffs.index_set.blocks if b.term in U)
    sub = GroupedIndexSet(coeffs.index_set.d, blocks)
    vals = np.concatenate([coeffs.values[slices[b.term]] for b in sub.blocks]) \
        if sub.blocks else np.zeros(0, dtype=np.complex128)
    return CoefficientMap(sub, vals)


def variance(coeffs: CoefficientMap) -> float:
    """sigma^2 = sum_{k != 0} |c_k|^2; requires the zero-frequency block."""
    if () not in coeffs.index_set.family:
        raise ValueError("index set is missing the zero-frequency block")
    sl = coeffs.index_set.block_slices()[()]
    total = float(np.sum(np.abs(coeffs.values) ** 2))
    return total - float(np.sum(np.abs(coeffs.values[sl]) ** 2))


@dataclass(frozen=True, eq=False)
class SensitivityReport:
    """Per-term variances and global sensitivity indices of a coefficient map.

    ``gsi`` entries are None when the total variance is zero (the ranking is
    then undefined and must not be silently divided out).
    """

    total_variance: float
    mean: complex
    terms: tuple          # of Term, canonical order, empty term excluded
    variances: np.ndarray
    gsis: tuple           # floats, or None markers when undefined

    @property
    def defined(self) -> bool:
        return self.total_variance > 0.0

    def gsi(self, term) -> float | None:
        return self.gsis[self.terms.index(tuple(term))]

    def variance_of(self, term) -> float:
        return float(self.variances[self.terms.index(tuple(term))])

    def to_json_dict(self) -> dict:
        return {"total_variance": self.total_variance,
                "mean": [self.mean.real, self.mean.imag],
                "terms": [{"u": list(u), "variance": float(v),
                           "gsi": (None if g is None else float(g))}
                          for u, v, g in zip(self.terms, self.variances, self.gsis)]}

    def to_csv(self) -> str:
        lines = ["u;order;variance;gsi"]
        for u, v, g in zip(self.terms, self.variances, self.gsis):
            us = ",".join(str(c) for c in u)
            gs = "" if g is None else repr(float(g))
            lines.append(f"{us};{len(u)};{float(v)!r};{gs}")
        return "\n".join(lines) + "\n"


def sensitivity(coeffs: CoefficientMap) -> SensitivityReport:
    """Global sensitivity indices rho(u) = Var(f_u)/Var(f) from block slices."""
    slices = coeffs.index_set.block_slices()
    total = variance(coeffs)
    terms = []
    variances = []
    for b in coeffs.index_set.blocks:
        if b.term == ():
            continue
        terms.append(b.term)
        variances.append(float(np.sum(np.abs(coeffs.values[slices[b.term]]) ** 2)))
    variances = np.asarray(variances)
    if total > 0.0:
        gsis = tuple(float(v / total) for v in variances)
    else:
        gsis = tuple(None for _ in terms)
    return SensitivityReport(total, coeffs.mean() if () in slices else 0j,
                             tuple(terms), variances, gsis)


# ---------------------------------------------------------------------------
# quadrature oracles (test fixtures; dyadic grids, d <= 4)
# ---------------------------------------------------------------------------

def _grid_samples(sampler, d, grid):
    if grid & (grid - 1):
        raise ValueError("grid resolution must be a power of two")
    if d > 4:
        raise ValueError("quadrature oracle is limited to d <= 4")
    axes = [np.arange(grid) / grid] * d
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=1)
    return np.asarray(sampler(pts), dtype=np.complex128).reshape((grid,) * d)


def _fft_coeffs(samples):
    # rectangle rule: c_hat[l] = mean over grid of f(x) e^{-2 pi i l.x}
    return np.fft.fftn(samples) / samples.size


def quadrature_projection(sampler, u, d, grid=64) -> dict:
    """Rectangle-rule Fourier coefficients of the projection P_u f.

    Returns a dict mapping |u|-dimensional integer tuples l (within the grid
    window in each axis) to the approximate coefficient of P_u f.  Exact to
    roundoff for trigonometric polynomials within the grid bandwidth.
    """
    u = validate_term(u, d)
    c = _fft_coeffs(_grid_samples(sampler, d, grid))
    half = grid // 2
    out = {}
    rng = range(-half, half)
    for l in product(rng, repeat=len(u)):
        idx = [0] * d
        for coord, v in zip(u, l):
            idx[coord - 1] = v % grid
        out[tuple(l)] = complex(c[tuple(idx)])
    return out


def direct_formula_check(sampler, u, d, grid=64) -> float:
    """Max pointwise gap between two constructions of the ANOVA term f_u.

    Route (a): alternating sum over v subset u of (-1)^(|u|-|v|) P_v f with the
    projections realized as grid means over the complementary axes.
    Route (b): keep exactly the sampled coefficients whose support equals u
    and evaluate back on the grid.  Both routes operate on the same samples,
    so the discrepancy isolates the combinatorial identities.
    """
    u = validate_term(u, d)
    samples = _grid_samples(sampler, d, grid)

    # route (a): alternating sum of projections, broadcast over the x_u grid
    acc = np.zeros_like(samples)
    for r in range(len(u) + 1):
        for v in combinations(u, r):
            comp = tuple(i for i in range(d) if (i + 1) not in v)
            proj = samples.mean(axis=comp, keepdims=True)
            acc += ((-1) ** (len(u) - len(v))) * proj
    # route (b): coefficient rule of the term series
    c = np.fft.fftn(samples) / samples.size
    half = grid // 2
    freq_axis = np.fft.fftfreq(grid, d=1.0 / grid).astype(int)
    keep = np.ones_like(c, dtype=bool)
    for axis in range(d):
        shape = [1] * d
        shape[axis] = grid
        nz = (freq_axis != 0).reshape(shape)
        if (axis + 1) in u:
            keep &= nz
        else:
            keep &= ~nz
    term_vals = np.fft.ifftn(np.where(keep, c, 0)) * samples.size
    return float(np.max(np.abs(acc - term_vals)))


def report_to_json(report: SensitivityReport) -> str:
    return json.dumps(report.to_json_dict(), indent=2, sort_keys=True)
