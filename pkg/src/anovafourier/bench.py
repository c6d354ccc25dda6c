"""Nine-dimensional B-spline test function with exact Fourier oracles.

The target is a sum of four products of univariate 1-periodic splines

    f(x) = B2(x1) B4(x5) + B2(x2) B4(x6) + B2(x3) B4(x7) + B2(x4) B4(x8) B6(x9),

where B_j is the j-dilated cardinal B-spline wrapped once around the torus
and normalized to unit L2 norm.  Its Fourier coefficients factor into the
univariate ones, c_k(B_j) = c_j sinc^j(pi k / j) cos(pi k), so coefficients,
norms, term variances and sensitivity indices all have closed forms.  The
four products have disjoint coordinate supports, which makes the nonzero
term family exactly

    U* = P({1,5}) u P({2,6}) u P({3,7}) u P({4,8,9}).

Closed-form spline evaluation is certified against the truncated Fourier
series in the tests (the series tail is analytically bounded).
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .anova import SensitivityReport, term_family_ds
from .index_sets import TermFamily, full_grid, hyperbolic_cross, term_sort_key
from .method import (ActiveSetResult, ApproxModel, DetectionConfig,
                     approximate, build_search_sets, detect, gap_intervals)

D = 9

#: the four product factors as (coordinate, spline order) tuples
PRODUCTS = (((1, 2), (5, 4)),
            ((2, 2), (6, 4)),
            ((3, 2), (7, 4)),
            ((4, 2), (8, 4), (9, 6)))

BSPLINE_NORM = _kernels.BSPLINE_NORM
C2 = BSPLINE_NORM[2]
C4 = BSPLINE_NORM[4]
C6 = BSPLINE_NORM[6]


def u_star() -> TermFamily:
    """Exact nonzero term family of the test function."""
    return TermFamily.downward_closure(D, [(1, 5), (2, 6), (3, 7), (4, 8, 9)])


def u_plus() -> TermFamily:
    """U* without its single third-order term (the d_s = 2 optimum)."""
    return TermFamily.downward_closure(
        D, [(1, 5), (2, 6), (3, 7), (4, 8), (4, 9), (8, 9)])


def bspline_value(j: int, x):
    """Closed-form piecewise-polynomial evaluation of B_j on the torus."""
    if j not in (2, 4, 6):
        raise ValueError("spline order must be 2, 4 or 6")
    return _kernels.bspline_values(j, x)


def bspline_coeff(j: int, k) -> float:
    """Univariate coefficient c_j sinc^j(pi k / j) cos(pi k); sinc(0) = 1."""
    if j not in (2, 4, 6):
        raise ValueError("spline order must be 2, 4 or 6")
    k = int(k)
    if k == 0:
        return _kernels.BSPLINE_NORM[j]
    t = math.pi * k / j
    return _kernels.BSPLINE_NORM[j] * (math.sin(t) / t) ** j * (-1.0) ** (k & 1)


def bspline_coeff_arr(j: int, k) -> np.ndarray:
    k = np.asarray(k, dtype=np.int64)
    t = np.pi * k / j
    with np.errstate(invalid="ignore", divide="ignore"):
        sinc = np.where(k == 0, 1.0, np.sin(t) / np.where(t == 0, 1.0, t))
    return _kernels.BSPLINE_NORM[j] * sinc ** j * np.where(k & 1, -1.0, 1.0)


def testfun_value(x) -> np.ndarray:
    """Evaluate f at one point or at rows of an (m, 9) array."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        return _kernels.testfun_values(x[None, :])[0]
    return _kernels.testfun_values(x)


def testfun_coeff(k) -> float:
    """Exact Fourier coefficient of f at a single 9-dimensional frequency."""
    return float(testfun_coeffs(np.asarray(k, dtype=np.int64)[None, :])[0])


def testfun_coeffs(freqs) -> np.ndarray:
    """Exact coefficients for all rows of an (n, 9) frequency array.

    A product contributes iff the frequency is supported inside its
    coordinate set; the contribution is the product of univariate
    coefficients (mean factors where the entry is zero).
    """
    freqs = np.asarray(freqs, dtype=np.int64)
    if freqs.ndim == 1:
        freqs = freqs[None, :]
    out = np.zeros(freqs.shape[0])
    for prod in PRODUCTS:
        coords = [c for c, _ in prod]
        others = [c for c in range(1, D + 1) if c not in coords]
        mask = np.all(freqs[:, [c - 1 for c in others]] == 0, axis=1)
        vals = np.ones(freqs.shape[0])
        for c, j in prod:
            vals *= bspline_coeff_arr(j, freqs[:, c - 1])
        out += np.where(mask, vals, 0.0)
    return out


def exact_mean() -> float:
    return 3.0 * C2 * C4 + C2 * C4 * C6


def exact_term_variances() -> dict:
    """Closed-form variances of every nonzero ANOVA term of f.

    For a product of univariate unit-norm factors with disjoint coordinates,
    the term over a subset of its coordinates has variance equal to the
    product of (1 - mean^2) over included factors and mean^2 over the rest.
    """
    means = {2: C2, 4: C4, 6: C6}
    out = {}
    for prod in PRODUCTS:
        coords = tuple(c for c, _ in prod)
        for mask in range(1, 1 << len(prod)):
            sub = tuple(coords[i] for i in range(len(prod)) if mask >> i & 1)
            v = 1.0
            for i, (c, j) in enumerate(prod):
                m2 = means[j] ** 2
                v *= (1.0 - m2) if (mask >> i & 1) else m2
            out[sub] = out.get(sub, 0.0) + v
    return out


def exact_variance() -> float:
    return sum(exact_term_variances().values())


def exact_norm_sq() -> float:
    return exact_variance() + exact_mean() ** 2


def exact_gsi() -> dict:
    total = exact_variance()
    return {u: v / total for u, v in exact_term_variances().items()}


def exact_sensitivity_report(d_s: int = 3) -> SensitivityReport:
    """Exact sensitivities arranged like a pilot report over U_{d_s}."""
    fam = term_family_ds(D, d_s)
    tv = exact_term_variances()
    terms = [u for u in fam.sorted_terms() if u]
    variances = np.array([tv.get(u, 0.0) for u in terms])
    total = exact_variance()
    gsis = tuple(float(v / total) for v in variances)
    return SensitivityReport(total, complex(exact_mean()), tuple(terms),
                             variances, gsis)


#: exact sensitivity indices listed for the ten published coordinates
#: (matched by the acceptance suite within 1e-3)
PUBLISHED_GSI = {
    (5,): 0.13485590547067322,
    (1,): 0.048995887099158836,
    (9,): 0.08479925199524384,
    (8,): 0.05705736651807279,
    (4,): 0.020729792280798152,
    (1, 5): 0.04495099140872069,
    (8, 9): 0.07780131659625403,
    (4, 9): 0.028265903218229544,
    (4, 8): 0.019018986643685766,
    (4, 8, 9): 0.025923436849895076,
}


def errors(model: ApproxModel, X, y):
    """(eps_l2, eps_L2): training error at the nodes and exact L2 error.

    The L2 error uses Parseval with the exact coefficients on the model's
    index set:  ||f - S f||^2 = ||f||^2 + sum_I |c - h|^2 - sum_I |c|^2.
    """
    y = np.asarray(y)
    fitted = model.evaluate_on(X)
    eps_l2 = float(np.linalg.norm(y - fitted) / np.linalg.norm(y))
    exact = testfun_coeffs(model.index_set.embedded())
    diff = float(np.sum(np.abs(exact - model.coefficients.values) ** 2))
    kept = float(np.sum(exact ** 2))
    nsq = exact_norm_sq()
    eps_L2 = math.sqrt(max(nsq + diff - kept, 0.0) / nsq)
    return eps_l2, eps_L2


@dataclass(frozen=True, eq=False)
class ExperimentRow:
    id: str
    scenario: str
    d_s: int
    N: tuple
    set_size: int
    samples: int
    eps_l2: float
    eps_L2: float
    gaps: tuple | None
    seconds: float
    extra: dict = field(default_factory=dict)

    def csv_line(self) -> str:
        def gap_str(g):
            if g is None:
                return "empty"
            return f"({g[0]:.3g},{g[1]:.3g})"
        gaps = "|".join(gap_str(g) for g in self.gaps) if self.gaps else ""
        N = ",".join(str(n) for n in self.N)
        return (f"{self.id};{self.scenario};{self.d_s};[{N}];{self.set_size};"
                f"{self.samples};{self.eps_l2:.6e};{self.eps_L2:.6e};{gaps};"
                f"{self.seconds:.2f}")

    @staticmethod
    def csv_header() -> str:
        return "id;scenario;d_s;N;set_size;samples;eps_l2;eps_L2;gaps;seconds"


def _truth_family(d_s: int) -> TermFamily:
    return u_star() if d_s >= 3 else u_plus()


def run_experiment(cfg: dict) -> ExperimentRow:
    """Run one detection or refinement experiment on the test function.

    Config keys: ``id``, ``mode`` ("detect" or "approximate"), ``scenario``
    ("scattered" or "lattice"), ``d_s``, ``sets`` ({"type", "N"}),
    ``sampling`` ({"count", "seed"} for scattered), ``solver`` (optional),
    ``family`` ("ds" | "ustar" | "uplus", default per mode).
    """
    t0 = time.time()
    d_s = int(cfg["d_s"])
    scenario = cfg["scenario"]
    sampling = dict(cfg.get("sampling", {}))
    sampling.setdefault("kind", scenario)
    solver = cfg.get("solver", {})
    mode = cfg.get("mode", "detect")
    truth = _truth_family(d_s)

    if mode == "detect":
        dc = DetectionConfig(d=D, d_s=d_s, search=cfg["sets"],
                             thresholds=cfg.get("thresholds", [0.0] * d_s),
                             sampling=sampling, solver=solver)
        result: ActiveSetResult = detect(dc, testfun_value)
        model = result.pilot
        gaps = gap_intervals(result.report, truth, d_s)
        set_size = len(model.index_set)
    else:
        family = {"ustar": u_star(), "uplus": u_plus(),
                  "ds": term_family_ds(D, d_s)}[cfg.get("family", "ustar")]
        sets = build_search_sets(D, d_s, cfg["sets"], family=family)
        model = approximate(family, sets, testfun_value, sampling, solver)
        gaps = None
        set_size = len(model.index_set)

    X, y = model.fit_data()
    eps_l2, eps_L2 = errors(model, X, y)
    samples = model.provenance.get("sample_count", len(y))
    extra = {}
    if "lattice" in model.provenance:
        extra["M"] = model.provenance["lattice"]["M"]
    row = ExperimentRow(str(cfg.get("id", "run")), scenario, d_s,
                        tuple(cfg["sets"]["N"]), set_size, int(samples),
                        eps_l2, eps_L2, gaps, time.time() - t0, extra)
    return row


#: published experiment configurations, keyed by (table, row).
#: Tables 1-3 are the scattered runs (detection d_s = 3, refinement on U*,
#: detection d_s = 2); table 4 is black-box detection on mixed-smoothness
#: crosses, table 5 (= 6) black-box refinement on U*.
TABLE_CONFIGS = {}


def _register_tables():
    scat = {"count": 2_500_000, "seed": 1}
    for i, N in enumerate([(256, 32, 8), (256, 32, 16), (256, 32, 32),
                           (256, 64, 8), (256, 64, 16), (256, 64, 32),
                           (512, 64, 8), (512, 64, 16), (512, 64, 32)], 1):
        TABLE_CONFIGS[(1, i)] = {"mode": "detect", "scenario": "scattered",
                                 "d_s": 3, "sets": {"type": "full_grid", "N": N},
                                 "sampling": dict(scat)}
    for i, N in enumerate([(1024, 64, 64), (1024, 128, 32),
                           (1024, 128, 64), (1024, 256, 64)], 1):
        TABLE_CONFIGS[(2, i)] = {"mode": "approximate", "family": "ustar",
                                 "scenario": "scattered", "d_s": 3,
                                 "sets": {"type": "full_grid", "N": N},
                                 "sampling": dict(scat)}
    for i, N in enumerate([(256, 16), (256, 32), (256, 64), (256, 128)], 1):
        TABLE_CONFIGS[(3, i)] = {"mode": "detect", "scenario": "scattered",
                                 "d_s": 2, "sets": {"type": "full_grid", "N": N},
                                 "sampling": dict(scat)}
    for i, N in enumerate([(100, 100, 100), (1000, 1000, 1000),
                           (10**4, 10**4, 10**3), (10**5, 10**4, 10**3)], 1):
        TABLE_CONFIGS[(4, i)] = {"mode": "detect", "scenario": "lattice",
                                 "d_s": 3,
                                 "sets": {"type": "hyperbolic_cross", "N": N},
                                 "sampling": {"seed": 1}}
    for i, N in enumerate([(10**4,) * 3, (10**5,) * 3,
                           (10**6, 10**5, 10**5), (10**6, 10**6, 10**5)], 1):
        cfg = {"mode": "approximate", "family": "ustar", "scenario": "lattice",
               "d_s": 3, "sets": {"type": "hyperbolic_cross", "N": N},
               "sampling": {"seed": 1}}
        TABLE_CONFIGS[(5, i)] = cfg
        TABLE_CONFIGS[(6, i)] = cfg


_register_tables()

#: reduced-size counterparts used by default on a desk machine
DESK_CONFIGS = {
    "scattered-ds3": {"mode": "detect", "scenario": "scattered", "d_s": 3,
                      "sets": {"type": "full_grid", "N": (32, 8, 4)},
                      "sampling": {"count": 100_000, "seed": 1}},
    "scattered-ds2": {"mode": "detect", "scenario": "scattered", "d_s": 2,
                      "sets": {"type": "full_grid", "N": (32, 8)},
                      "sampling": {"count": 100_000, "seed": 1}},
    "scattered-ustar": {"mode": "approximate", "family": "ustar",
                        "scenario": "scattered", "d_s": 3,
                        "sets": {"type": "full_grid", "N": (32, 8, 4)},
                        "sampling": {"count": 100_000, "seed": 1}},
    "scattered-uplus": {"mode": "approximate", "family": "uplus",
                        "scenario": "scattered", "d_s": 2,
                        "sets": {"type": "full_grid", "N": (32, 8)},
                        "sampling": {"count": 100_000, "seed": 1}},
    "lattice-ds3": {"mode": "detect", "scenario": "lattice", "d_s": 3,
                    "sets": {"type": "hyperbolic_cross", "N": (30, 30, 30)},
                    "sampling": {"seed": 1}},
}
