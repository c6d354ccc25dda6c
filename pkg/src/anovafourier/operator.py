"""Block-structured nonequispaced Fourier operator and least-squares solvers.

The system matrix F = (e^(2 pi i k.x)) over a grouped index set splits into
per-term blocks F_u that read only the coordinates x_u of each node, so the
matrix is never formed: ``forward`` accumulates block products, ``adjoint``
concatenates block adjoints.  LSQR runs on top of this operator contract;
for reconstructing-lattice nodes the Moore-Penrose solve collapses to one
adjoint multiplication and is handled by :func:`lattice_solve`.

Replacing the direct kernels by a fast transform only requires another
object with the same ``forward``/``adjoint``/``shape`` surface.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .anova import CoefficientMap
from .index_sets import GroupedIndexSet
from .lattice import Rank1Lattice, is_reconstructing, lattice_evaluate, lattice_reconstruct


@dataclass(frozen=True, eq=False)
class NodeSet:
    """Sampling nodes in [0,1)^d plus provenance (seed or lattice)."""

    points: np.ndarray
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.ndim != 2:
            raise ValueError("points must be a 2-d array")
        if pts.size and (pts.min() < 0.0 or pts.max() >= 1.0):
            raise ValueError("node coordinates must lie in [0, 1)")
        object.__setattr__(self, "points", pts)

    @property
    def d(self) -> int:
        return self.points.shape[1]

    def __len__(self):
        return self.points.shape[0]


def uniform_nodes(d: int, m: int, seed: int) -> NodeSet:
    """m i.i.d. uniform nodes from a counter-based generator (reproducible)."""
    if m < 1:
        raise ValueError("need at least one node")
    rng = np.random.Generator(np.random.Philox(seed))
    pts = rng.random((m, d))
    return NodeSet(pts, {"kind": "scattered", "seed": int(seed), "count": int(m)})


def lattice_nodes(lat: Rank1Lattice) -> NodeSet:
    return NodeSet(lat.nodes(), {"kind": "lattice",
                                 "z": [int(v) for v in lat.z], "M": int(lat.M)})


class BlockFourierOperator:
    """Matrix-free F and F* for a node set and grouped index set.

    The block structure shows up twice: logically each term's block only
    reads the coordinates x_u, and physically the shared per-axis frequency
    values of all blocks are collected once into a phase-table plan, so a
    node costs a handful of sincos evaluations plus ~||k||_0 complex
    multiplies per frequency.
    """

    def __init__(self, nodes: NodeSet, index_set: GroupedIndexSet):
        if nodes.d != index_set.d:
            raise ValueError(
                f"node dimension {nodes.d} != index set dimension {index_set.d}")
        self.nodes = nodes
        self.index_set = index_set
        self._plan = _kernels.build_plan(index_set.embedded())
        self._pts = np.ascontiguousarray(nodes.points)

    @property
    def shape(self):
        return (len(self.nodes), len(self.index_set))

    def forward(self, coeffs) -> np.ndarray:
        """F c, accumulated over per-term blocks (parallel over nodes)."""
        c = coeffs.values if isinstance(coeffs, CoefficientMap) else \
            np.asarray(coeffs, dtype=np.complex128)
        if c.shape[0] != self.shape[1]:
            raise ValueError("coefficient length mismatch")
        return _kernels.plan_forward(self._pts, self._plan, c)

    def adjoint(self, y) -> np.ndarray:
        """F* y in canonical block order (parallel over frequencies)."""
        y = np.asarray(y, dtype=np.complex128)
        if y.shape[0] != self.shape[0]:
            raise ValueError("value length mismatch")
        return _kernels.plan_adjoint(self._pts, self._plan, y)


@dataclass(frozen=True, eq=False)
class SolveReport:
    """Least-squares solution plus convergence record.

    ``residual_norm`` is the solver's internal estimate; ``residual_check``
    recomputes ||y - F h|| through one extra forward pass.
    """

    coefficients: CoefficientMap
    iterations: int
    residual_norm: float
    residual_check: float
    stop_reason: str
    provenance: dict = field(default_factory=dict)

    def to_json_dict(self) -> dict:
        return {"iterations": int(self.iterations),
                "residual_norm": float(self.residual_norm),
                "residual_check": float(self.residual_check),
                "stop_reason": self.stop_reason,
                "provenance": self.provenance}


def lsqr(op, y, atol: float = 1e-8, btol: float = 1e-8,
         max_iter: int = 200) -> SolveReport:
    """Matrix-free LSQR (Golub-Kahan bidiagonalization) for min ||y - F h||.

    Works natively on complex operators; the bidiagonalization scalars are
    the real norms of the Lanczos vectors, so the plane rotations stay real.
    Stopping follows the standard criteria driven by (atol, btol); running
    out of iterations is reported in ``stop_reason`` and the current iterate
    is still returned.
    """
    y = np.asarray(y, dtype=np.complex128)
    m, n = op.shape
    x = np.zeros(n, dtype=np.complex128)

    u = y.copy()
    bnorm = beta = float(np.linalg.norm(u))
    if beta == 0.0:
        coeffs = CoefficientMap(op.index_set, x)
        return SolveReport(coeffs, 0, 0.0, 0.0, "zero right-hand side")
    u /= beta
    v = op.adjoint(u)
    alpha = float(np.linalg.norm(v))
    if alpha == 0.0:
        coeffs = CoefficientMap(op.index_set, x)
        return SolveReport(coeffs, 0, beta, beta, "right-hand side orthogonal to range")
    v /= alpha
    w = v.copy()
    phibar = beta
    rhobar = alpha
    anorm2 = alpha * alpha
    stop = f"iteration limit {max_iter} reached without convergence"
    it = 0
    for it in range(1, max_iter + 1):
        u = op.forward(v) - alpha * u
        beta = float(np.linalg.norm(u))
        if beta > 0.0:
            u /= beta
            v = op.adjoint(u) - beta * v
            alpha = float(np.linalg.norm(v))
            if alpha > 0.0:
                v /= alpha
        anorm2 += alpha * alpha + beta * beta
        rho = math.hypot(rhobar, beta)
        c = rhobar / rho
        s = beta / rho
        theta = s * alpha
        rhobar = -c * alpha
        phi = c * phibar
        phibar = s * phibar
        x += (phi / rho) * w
        w = v - (theta / rho) * w
        rnorm = phibar
        arnorm = alpha * abs(c * phibar)
        anorm = math.sqrt(anorm2)
        xnorm = float(np.linalg.norm(x))
        if rnorm <= btol * bnorm + atol * anorm * xnorm:
            stop = "residual tolerance reached"
            break
        if anorm * rnorm > 0 and arnorm / (anorm * rnorm) <= atol:
            stop = "normal-equations tolerance reached"
            break
    coeffs = CoefficientMap(op.index_set, x)
    check = float(np.linalg.norm(y - op.forward(x)))
    return SolveReport(coeffs, it, float(phibar), check, stop,
                       {"solver": "lsqr", "atol": atol, "btol": btol,
                        "max_iter": max_iter})


def lattice_solve(lat: Rank1Lattice, index_set: GroupedIndexSet, y,
                  certified: bool = False) -> SolveReport:
    """Exact least squares on reconstructing-lattice samples: h = (1/M) F* y.

    Refuses lattices that fail certification (pass ``certified=True`` to
    skip the re-check when the lattice was just certified by construction).
    """
    if not certified and not is_reconstructing(lat, index_set):
        raise ValueError("lattice is not reconstructing for this index set")
    y = np.asarray(y, dtype=np.complex128)
    coeffs = lattice_reconstruct(y, index_set, lat)
    fitted = lattice_evaluate(coeffs, lat)
    res = float(np.linalg.norm(y - fitted))
    return SolveReport(coeffs, 1, res, res, "direct adjoint solve",
                       {"solver": "lattice", "M": int(lat.M),
                        "z": [int(v) for v in lat.z]})
