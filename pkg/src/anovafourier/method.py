"""Two-stage approximation: sensitivity-driven detection, then refinement.

Stage one fits a pilot Fourier partial sum on the full order-limited term
family U_{d_s} with order-dependent search sets, computes global sensitivity
indices of the pilot, and keeps the downward closure of the terms whose
index exceeds the order-dependent threshold (strict inequality; ties are
excluded).  Stage two refits on the active family with fresh (usually
larger) per-term sets; in the black-box scenario a new reconstructing
lattice is built for the refined index set.
"""

from __future__ import annotations

import binascii
import hashlib
import json
import struct
import warnings
from dataclasses import dataclass, field

import numpy as np

from .anova import CoefficientMap, SensitivityReport, sensitivity, term_family_ds
from .index_sets import (GroupedIndexSet, LowDimIndexSet, TermFamily,
                         empty_term_set, full_grid, grouped, hyperbolic_cross,
                         weighted_index_set)
from .lattice import Rank1Lattice, cbc_construct, lattice_evaluate
from .operator import (BlockFourierOperator, NodeSet, SolveReport,
                       lattice_nodes, lattice_solve, lsqr, uniform_nodes)
from .weights import WeightParams, pod_weight

SOLVER_DEFAULTS = {"atol": 1e-8, "btol": 1e-8, "max_iter_detect": 50,
                   "max_iter_final": 200}


@dataclass(frozen=True, eq=False)
class DetectionConfig:
    """Inputs of the detection stage.

    ``search`` is {"type": "full_grid" | "hyperbolic_cross" | "weighted",
    "N": [N_1, .., N_ds]} with one cutoff per term order (terms of equal
    order share their set); "weighted" additionally takes weight parameters
    under "weight".  ``thresholds`` is the order-dependent epsilon vector.
    """

    d: int
    d_s: int
    search: dict
    thresholds: tuple
    sampling: dict
    solver: dict = field(default_factory=dict)

    def __post_init__(self):
        if not 1 <= self.d_s <= self.d:
            raise ValueError(f"need 1 <= d_s <= d, got d_s={self.d_s}, d={self.d}")
        eps = tuple(float(e) for e in self.thresholds)
        if len(eps) != self.d_s:
            raise ValueError("need one threshold per term order 1..d_s")
        if any(not 0.0 <= e <= 1.0 for e in eps):
            raise ValueError("thresholds must lie in [0, 1]")
        N = self.search.get("N", ())
        if len(N) != self.d_s:
            raise ValueError("need one search-set cutoff per term order 1..d_s")
        object.__setattr__(self, "thresholds", eps)


def _order_set(kind: str, order: int, N, weight=None) -> np.ndarray:
    template = tuple(range(1, order + 1))
    if kind == "full_grid":
        return full_grid(template, int(N)).freqs
    if kind == "hyperbolic_cross":
        return hyperbolic_cross(template, float(N)).freqs
    if kind == "weighted":
        return weighted_index_set(template, weight, float(N), d=order).freqs
    raise ValueError(f"unknown search-set type {kind!r}")


def _weight_fn(search: dict):
    spec = search.get("weight")
    if spec is None:
        return None
    if callable(spec):
        return spec
    p = WeightParams(spec["alpha"], spec["beta"],
                     np.asarray(spec["gamma"], dtype=float),
                     np.asarray(spec["Gamma"], dtype=float))
    return lambda k: pod_weight(k, p)


def build_search_sets(d: int, d_s: int, search: dict,
                      family: TermFamily | None = None) -> dict:
    """Per-term index sets over a family (default U_{d_s}), order-dependent.

    Terms of equal order share one frequency pattern, constructed once.
    """
    fam = family if family is not None else term_family_ds(d, d_s)
    N = search["N"]
    weight = _weight_fn(search)
    patterns = {}
    sets = {(): empty_term_set()}
    for u in fam.sorted_terms():
        if not u:
            continue
        order = len(u)
        if order not in patterns:
            patterns[order] = _order_set(search["type"], order,
                                         N[order - 1], weight)
        sets[u] = LowDimIndexSet(u, patterns[order])
    return sets


@dataclass(frozen=True, eq=False)
class ApproxModel:
    """Recovered Fourier partial sum: index set, coefficients, provenance."""

    coefficients: CoefficientMap
    provenance: dict = field(default_factory=dict)
    _nodes: NodeSet | None = None
    _values: np.ndarray | None = None

    @property
    def index_set(self) -> GroupedIndexSet:
        return self.coefficients.index_set

    def fit_data(self):
        """The node set and target values the model was fitted on."""
        return self._nodes, self._values

    def evaluate(self, x) -> np.ndarray:
        """Blockwise partial-sum evaluation at points (coordinates mod 1)."""
        x = np.asarray(x, dtype=np.float64)
        single = x.ndim == 1
        pts = np.atleast_2d(x)
        pts = pts - np.floor(pts)
        op = BlockFourierOperator(NodeSet(pts), self.index_set)
        out = op.forward(self.coefficients)
        return out[0] if single else out

    def evaluate_on(self, nodes) -> np.ndarray:
        """Evaluate at a NodeSet, using the lattice FFT path when possible."""
        if isinstance(nodes, NodeSet) and nodes.provenance.get("kind") == "lattice":
            lat = Rank1Lattice(np.asarray(nodes.provenance["z"], dtype=np.int64),
                               int(nodes.provenance["M"]))
            return lattice_evaluate(self.coefficients, lat)
        pts = nodes.points if isinstance(nodes, NodeSet) else np.asarray(nodes)
        return self.evaluate(pts)

    def evaluate_real(self, x):
        return np.real(self.evaluate(x))

    def to_json_dict(self) -> dict:
        blocks = []
        slices = self.index_set.block_slices()
        for b in self.index_set.blocks:
            vals = self.coefficients.values[slices[b.term]]
            raw = b"".join(struct.pack("<dd", v.real, v.imag) for v in vals)
            blocks.append({"u": list(b.term),
                           "data": binascii.hexlify(raw).decode()})
        return {"format": "anovafourier-model-v1",
                "index_set": self.index_set.to_json_dict(),
                "coefficients": {"encoding": "hex-binary64-pairs",
                                 "blocks": blocks},
                "provenance": self.provenance}

    @staticmethod
    def from_json_dict(doc) -> "ApproxModel":
        idx = GroupedIndexSet.from_json_dict(doc["index_set"])
        parts = []
        for blk in doc["coefficients"]["blocks"]:
            raw = binascii.unhexlify(blk["data"])
            flat = np.frombuffer(raw, dtype="<f8")
            parts.append(flat[0::2] + 1j * flat[1::2])
        values = np.concatenate(parts) if parts else np.zeros(0, complex)
        return ApproxModel(CoefficientMap(idx, values),
                           dict(doc.get("provenance", {})))

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json_dict(), fh, indent=2, sort_keys=True)

    @staticmethod
    def load(path) -> "ApproxModel":
        with open(path) as fh:
            return ApproxModel.from_json_dict(json.load(fh))

    def digest(self) -> str:
        doc = json.dumps(self.to_json_dict(), separators=(",", ":"),
                         sort_keys=True)
        return hashlib.sha256(doc.encode()).hexdigest()


@dataclass(frozen=True, eq=False)
class ActiveSetResult:
    """Output of the detection stage."""

    report: SensitivityReport
    active: TermFamily
    pilot: ApproxModel


def _acquire_data(index_set: GroupedIndexSet, target, sampling: dict):
    """Node set, values and provenance for either sampling scenario."""
    kind = sampling.get("kind", "scattered")
    prov = {"sampling": {k: v for k, v in sampling.items()}}
    if kind == "scattered":
        if isinstance(target, tuple):
            X, y = target
            nodes = X if isinstance(X, NodeSet) else NodeSet(np.asarray(X))
            y = np.asarray(y, dtype=np.complex128)
        else:
            nodes = uniform_nodes(index_set.d, int(sampling["count"]),
                                  int(sampling.get("seed", 0)))
            y = np.asarray(target(nodes.points), dtype=np.complex128)
        prov["sample_count"] = len(nodes)
        return nodes, y, prov, None
    if kind == "lattice":
        if isinstance(target, tuple):
            raise ValueError("black-box sampling needs a callable target")
        lat = cbc_construct(index_set, seed=int(sampling.get("seed", 0)))
        nodes = lattice_nodes(lat)
        y = np.asarray(target(nodes.points), dtype=np.complex128)
        prov["sample_count"] = lat.M
        prov["lattice"] = lat.to_json_dict(index_set.digest())
        return nodes, y, prov, lat
    raise ValueError(f"unknown sampling kind {kind!r}")


def _solve(index_set, nodes, y, lat, solver: dict, stage: str) -> SolveReport:
    if lat is not None:
        return lattice_solve(lat, index_set, y, certified=True)
    op = BlockFourierOperator(nodes, index_set)
    key = "max_iter_detect" if stage == "detect" else "max_iter_final"
    return lsqr(op, y,
                atol=float(solver.get("atol", SOLVER_DEFAULTS["atol"])),
                btol=float(solver.get("btol", SOLVER_DEFAULTS["btol"])),
                max_iter=int(solver.get("max_iter", SOLVER_DEFAULTS[key])))


def detect(cfg: DetectionConfig, target) -> ActiveSetResult:
    """Stage one: pilot fit on U_{d_s}, sensitivity ranking, thresholding.

    ``target`` is a callable mapping an (m, d) point array to values, or a
    tuple (X, y) of fixed scattered data.  The active family is the downward
    closure of the terms whose pilot sensitivity index strictly exceeds the
    threshold for their order.
    """
    fam = term_family_ds(cfg.d, cfg.d_s)
    sets = build_search_sets(cfg.d, cfg.d_s, cfg.search)
    index_set = grouped(fam, sets)
    nodes, y, prov, lat = _acquire_data(index_set, target, cfg.sampling)
    if len(index_set) > len(nodes):
        warnings.warn(f"underdetermined pilot: |I(U)| = {len(index_set)} "
                      f"exceeds |X| = {len(nodes)}")
    elif cfg.sampling.get("kind", "scattered") == "scattered" and \
            len(index_set) > len(nodes) / 10:
        warnings.warn("pilot system has fewer than 10 samples per unknown; "
                      "overfitting may distort the ranking")
    report_solve = _solve(index_set, nodes, y, lat, cfg.solver, "detect")
    pilot_report = sensitivity(report_solve.coefficients)
    if not pilot_report.defined:
        raise ValueError("pilot fit has zero variance; ranking undefined")
    keep = [u for u in fam.sorted_terms()
            if u and pilot_report.gsi(u) > cfg.thresholds[len(u) - 1]]
    active = TermFamily.downward_closure(cfg.d, [()] + keep)
    prov.update({"stage": "detect", "d_s": cfg.d_s, "search": cfg.search,
                 "thresholds": list(cfg.thresholds),
                 "solver_report": report_solve.to_json_dict()})
    pilot = ApproxModel(report_solve.coefficients, prov, nodes, y)
    return ActiveSetResult(pilot_report, active, pilot)


def gap_intervals(report: SensitivityReport, truth: TermFamily, d_s: int):
    """Per-order threshold gaps separating true from spurious terms.

    For order j the interval is (max spurious GSI, min true GSI); it is None
    when the ranking assumption fails at that order (no gap) and (0, b) when
    no spurious order-j terms exist in the report.
    """
    out = []
    for j in range(1, d_s + 1):
        inside = [g for u, g in zip(report.terms, report.gsis)
                  if len(u) == j and u in truth]
        outside = [g for u, g in zip(report.terms, report.gsis)
                   if len(u) == j and u not in truth]
        if not inside or any(g is None for g in inside + outside):
            out.append(None)
            continue
        a = max(outside) if outside else 0.0
        b = min(inside)
        out.append((float(a), float(b)) if a < b else None)
    return tuple(out)


def approximate(active: TermFamily, sets: dict, target, sampling: dict,
                solver: dict | None = None) -> ApproxModel:
    """Stage two: least-squares fit restricted to the active family.

    ``sets`` maps every term of the family to its refinement index set.  In
    the lattice scenario a fresh reconstructing lattice is constructed for
    the refined grouped set.
    """
    index_set = grouped(active, sets)
    nodes, y, prov, lat = _acquire_data(index_set, target, sampling)
    if len(index_set) > len(nodes):
        warnings.warn(f"underdetermined refit: |I(U)| = {len(index_set)} "
                      f"exceeds |X| = {len(nodes)}")
    report = _solve(index_set, nodes, y, lat, solver or {}, "final")
    fitted = lattice_evaluate(report.coefficients, lat) if lat is not None \
        else BlockFourierOperator(nodes, index_set).forward(report.coefficients)
    prov.update({"stage": "approximate",
                 "solver_report": report.to_json_dict(),
                 "imag_residual": float(np.max(np.abs(fitted.imag)))})
    return ApproxModel(report.coefficients, prov, nodes, y)


def tiered_sets(active: TermFamily, report: SensitivityReport, search: dict,
                d: int) -> tuple[dict, dict]:
    """Two-tier refinement sets: high-GSI terms keep the full cutoff N_j,
    the lower-ranked half of each order gets N_j halved.

    Returns (sets, tier_record); the record goes into model provenance.
    """
    N = search["N"]
    weight = _weight_fn(search)
    sets = {(): empty_term_set()}
    record = {}
    by_order = {}
    for u in active.sorted_terms():
        if u:
            by_order.setdefault(len(u), []).append(u)
    for order, terms in by_order.items():
        ranked = sorted(terms, key=lambda u: -(report.gsi(u) or 0.0))
        cut = (len(ranked) + 1) // 2
        for rank, u in enumerate(ranked):
            if rank < cut:
                Nu = N[order - 1]
            else:
                Nu = max(2, int(N[order - 1]) // 2)
                if search["type"] == "full_grid" and Nu % 2:
                    Nu -= 1
            freqs = _order_set(search["type"], order, Nu, weight)
            sets[u] = LowDimIndexSet(u, freqs)
            record[",".join(map(str, u))] = Nu
    return sets, record
