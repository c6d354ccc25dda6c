"""Rank-1 lattices: node generation, reconstruction property, CBC search,
and FFT-based evaluation/reconstruction.

A rank-1 lattice is the node set {(j/M) z mod 1 : j = 0..M-1}.  It is
*reconstructing* for a frequency set I when the residues k.z mod M are
pairwise distinct over I; this is equivalent to the difference-set condition
m.z != 0 mod M for all nonzero m in D(I), and makes the normal-equations
matrix F*F equal M times the identity, so least squares reduces to one
adjoint multiplication realized by a single length-M FFT.

All residue arithmetic reduces k and z modulo M before multiplying, which
keeps intermediates below 2^63 for any M < 2^31.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .index_sets import GroupedIndexSet


def is_prime(n: int) -> bool:
    """Deterministic Miller-Rabin, valid for all 64-bit integers."""
    if n < 2:
        return False
    for p in (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37):
        if n % p == 0:
            return n == p
    d, r = n - 1, 0
    while d % 2 == 0:
        d //= 2
        r += 1
    for a in (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37):
        x = pow(a, d, n)
        if x in (1, n - 1):
            continue
        for _ in range(r - 1):
            x = x * x % n
            if x == n - 1:
                break
        else:
            return False
    return True


def next_prime(n: int) -> int:
    n = max(2, n)
    while not is_prime(n):
        n += 1
    return n


@dataclass(frozen=True, eq=False)
class Rank1Lattice:
    z: np.ndarray
    M: int

    def __post_init__(self):
        if self.M < 1:
            raise ValueError("lattice size must be >= 1")
        z = np.mod(np.asarray(self.z, dtype=np.int64), self.M)
        object.__setattr__(self, "z", z)

    @property
    def d(self) -> int:
        return self.z.shape[0]

    def nodes(self) -> np.ndarray:
        """All M nodes x_j = (j/M) z mod 1 in row order j = 0..M-1."""
        j = np.arange(self.M, dtype=np.float64)[:, None]
        x = j * (self.z[None, :] / self.M)
        return x - np.floor(x)

    def residues(self, freqs) -> np.ndarray:
        return _kernels.residues(np.asarray(freqs, dtype=np.int64), self.z, self.M)

    def to_json_dict(self, index_set_digest: str = "") -> dict:
        return {"d": int(self.d), "M": int(self.M),
                "z": [int(v) for v in self.z],
                "index_set_digest": index_set_digest}

    @staticmethod
    def from_json_dict(doc) -> "Rank1Lattice":
        return Rank1Lattice(np.asarray(doc["z"], dtype=np.int64), int(doc["M"]))


def _embedded(freqs) -> np.ndarray:
    if isinstance(freqs, GroupedIndexSet):
        return freqs.embedded()
    f = np.asarray(freqs, dtype=np.int64)
    return f[None, :] if f.ndim == 1 else f


def is_reconstructing(lat: Rank1Lattice, freqs) -> bool:
    """Distinctness of k.z mod M over I (the difference-set condition)."""
    f = _embedded(freqs)
    if f.shape[0] > lat.M:
        return False  # pigeonhole
    res = lat.residues(f)
    return bool(_kernels.residues_injective(res, lat.M))


#: multiplicative escalation of the lattice-size search, relative to |I|
_CBC_SCALES = (1.0, 1.1, 1.25, 1.5, 1.75, 2.0, 2.5, 3.0, 4.0, 5.0, 6.5, 8.0,
               10.0, 13.0, 16.0, 20.0, 26.0, 32.0, 42.0, 55.0, 70.0, 90.0,
               120.0, 160.0, 220.0, 300.0, 400.0, 550.0, 750.0, 1000.0)


def cbc_construct(freqs, seed: int = 0, candidate_budget: int = 96,
                  M_cap: int | None = None, primes_per_scale: int = 2) -> Rank1Lattice:
    """Component-by-component search for a reconstructing rank-1 lattice.

    Candidate sizes are primes drawn from a geometric schedule starting at
    the first prime >= |I| (a few consecutive primes per scale).  For each M
    the generating vector is grown one coordinate at a time, drawing z_s
    from a seeded random permutation of {1, .., M-1} (capped at
    ``candidate_budget``) and keeping the residues injective on the distinct
    coordinate prefixes of I; exhausting a coordinate's budget advances to
    the next prime.  The result is certified with :func:`is_reconstructing`
    before it is returned.  M_cap defaults to |I|^2 >= |D(I)|, past which
    the prime-existence guarantee is void and a hard error is raised.
    """
    f = _embedded(freqs)
    n, d = f.shape
    if n == 0:
        raise ValueError("empty frequency set")
    uniq = np.unique(f, axis=0)
    if uniq.shape[0] != n:
        raise ValueError("frequency set contains duplicates")
    if n == 1:
        return Rank1Lattice(np.zeros(d, dtype=np.int64), 1)
    if M_cap is None:
        M_cap = n * n
    rng = np.random.Generator(np.random.Philox(seed))

    def size_schedule():
        seen = set()
        for scale in _CBC_SCALES:
            M = next_prime(int(math.ceil(scale * n)))
            for _ in range(primes_per_scale):
                if M > M_cap:
                    break
                if M not in seen:
                    seen.add(M)
                    yield M
                M = next_prime(M + 1)

    # distinct-prefix representatives per coordinate, computed once
    reps_per_coord = []
    gid = np.zeros(n, dtype=np.int64)
    for s in range(d):
        col = f[:, s]
        pairs = gid * (2 * np.abs(col).max() + 2) + (col - col.min())
        _, gid = np.unique(pairs, return_inverse=True)
        reps_per_coord.append(np.unique(gid, return_index=True)[1])

    for M in size_schedule():
        z = np.zeros(d, dtype=np.int64)
        base = np.zeros(n, dtype=np.int64)
        ok = True
        for s in range(d):
            reps = reps_per_coord[s]
            kcol = np.mod(f[:, s], M)
            if np.all(f[reps, s] == 0):
                continue  # z_s free; leave at 0
            ncand = min(candidate_budget, M - 1)
            if ncand == M - 1:
                cands = 1 + rng.permutation(M - 1)
            else:
                # sampling with replacement; duplicates only waste a try
                cands = rng.integers(1, M, size=ncand)
            pick = _kernels.first_injective(base[reps], kcol[reps],
                                            cands.astype(np.int64), M)
            if pick < 0:
                ok = False
                break
            z[s] = cands[pick]
            base = (base + kcol * z[s]) % M
        if ok:
            lat = Rank1Lattice(z, M)
            if is_reconstructing(lat, f):
                return lat
    raise RuntimeError(
        f"CBC search exhausted: no reconstructing lattice found with M <= {M_cap}")


def lattice_evaluate(coeffs, lat: Rank1Lattice) -> np.ndarray:
    """Evaluate the trigonometric polynomial at all lattice nodes via one FFT.

    ``coeffs`` is a CoefficientMap or a pair (freqs, values).  Works for any
    lattice; coefficients landing in the same residue class add up, exactly
    as the aliasing formula predicts.
    """
    freqs, values = _coeff_pair(coeffs)
    res = lat.residues(freqs)
    buckets = _kernels.bucket_accumulate(res, values, lat.M)
    return lat.M * np.fft.ifft(buckets)


def lattice_reconstruct(values, index_set, lat: Rank1Lattice):
    """Approximate coefficients (1/M) sum_j p(x_j) e^(-2 pi i j (k.z)/M).

    For a polynomial supported on the index set of a reconstructing lattice
    this recovers the coefficients exactly up to roundoff (the Moore-Penrose
    solve, since F*F = M Id).  Non-reconstructing lattices are permitted;
    exactness is then void.
    """
    from .anova import CoefficientMap
    values = np.asarray(values, dtype=np.complex128)
    if values.shape[0] != lat.M:
        raise ValueError("need exactly M sample values")
    spectrum = np.fft.fft(values) / lat.M
    if isinstance(index_set, GroupedIndexSet):
        res = lat.residues(index_set.embedded())
        return CoefficientMap(index_set, spectrum[res])
    res = lat.residues(_embedded(index_set))
    return spectrum[res]


def _coeff_pair(coeffs):
    from .anova import CoefficientMap
    if isinstance(coeffs, CoefficientMap):
        return coeffs.index_set.embedded(), coeffs.values
    freqs, values = coeffs
    return _embedded(freqs), np.asarray(values, dtype=np.complex128)


@dataclass(frozen=True, eq=False)
class DualLatticeWindow:
    """Members of the integer dual lattice inside the cube [-K, K]^d."""

    lattice: Rank1Lattice
    K: int

    def members(self) -> np.ndarray:
        d = self.lattice.d
        axis = np.arange(-self.K, self.K + 1, dtype=np.int64)
        grids = np.meshgrid(*([axis] * d), indexing="ij")
        cube = np.stack([g.ravel() for g in grids], axis=1)
        res = self.lattice.residues(cube)
        return cube[res == 0]


def aliasing_sum(exact_coeff, k, window: DualLatticeWindow,
                 boundary_tol: float = 1e-14) -> complex:
    """Windowed dual-lattice sum sum_{h in dual, h != 0} c(k + h).

    ``exact_coeff`` maps a d-dimensional integer vector to the true Fourier
    coefficient.  Raises when dual members on the window boundary still carry
    coefficient mass above ``boundary_tol`` (window too small).
    """
    k = np.asarray(k, dtype=np.int64)
    total = 0j
    for h in window.members():
        if not np.any(h):
            continue
        c = complex(exact_coeff(k + h))
        if np.max(np.abs(h)) == window.K and abs(c) > boundary_tol:
            raise ValueError("aliasing window too small: boundary member "
                             f"{h.tolist()} carries coefficient {c!r}")
        total += c
    return total


def save_lattice(path, lat: Rank1Lattice, index_set_digest: str = "") -> None:
    with open(path, "w") as fh:
        json.dump(lat.to_json_dict(index_set_digest), fh, indent=2, sort_keys=True)


def load_lattice(path) -> Rank1Lattice:
    with open(path) as fh:
        return Rank1Lattice.from_json_dict(json.load(fh))
