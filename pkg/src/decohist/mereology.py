"""Parthood on the lattice of sums of maximal branch vectors.

An element is a non-empty set of maximal-branch indices and denotes the
sum of those branch vectors.  ``is_part`` decides parthood from the
vectors alone: ``b`` is part of ``g`` when the vectors coincide, or when
``g - b`` is a non-zero lattice vector orthogonal to ``b``.
``subset_oracle`` is the independent set-inclusion answer the vector
route must reproduce.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

from . import _kernels
from .histories import (CONSISTENCY_EPS, DEFAULT_BUDGET, HistorySpace, all_branch_vectors,
                        consistency_check)

ZERO_TOL = 1e-14
COEF_TOL = 1e-6
ORTHO_TOL = 1e-6
EXHAUSTIVE_MAX = 10


class LatticeError(ValueError):
    pass


class InconsistentSpaceError(LatticeError):
    pass


Element = frozenset


@dataclass(frozen=True, eq=False)
class BranchLattice:
    vectors: np.ndarray                 # (K, dim), row i is maximal branch i
    histories: tuple = ()
    max_residual_inner: float = 0.0
    validated: bool = True
    _pinv: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        v = np.ascontiguousarray(np.atleast_2d(self.vectors), dtype=complex)
        object.__setattr__(self, "vectors", v)
        if not self.histories:
            object.__setattr__(self, "histories", tuple((i,) for i in range(len(v))))
        object.__setattr__(self, "_pinv", np.linalg.pinv(v.T, rcond=1e-12))

    # -- construction -------------------------------------------------------

    @classmethod
    def from_vectors(cls, vectors, histories: Sequence = (), validate: bool = True,
                     tolerance: float = CONSISTENCY_EPS) -> "BranchLattice":
        """Lattice over the given maximal vectors.

        With ``validate`` the vectors must be non-zero and pairwise orthogonal
        to within the consistency tolerance; ``validate=False`` admits
        corrupted inputs for negative controls.
        """
        v = np.atleast_2d(np.asarray(vectors, dtype=complex))
        gram = v.conj() @ v.T
        w = gram.diagonal().real
        off = np.abs(gram - np.diag(gram.diagonal()))
        resid = float(off.max()) if len(v) > 1 else 0.0
        if validate:
            if np.any(w <= ZERO_TOL):
                raise LatticeError("maximal branches must be non-zero")
            scale = np.sqrt(np.outer(w, w))
            if len(v) > 1 and float((off / scale).max()) > tolerance:
                raise InconsistentSpaceError("maximal branch vectors are not orthogonal")
        return cls(v, tuple(histories), resid, validate)

    @classmethod
    def from_space(cls, space: HistorySpace, tolerance: float = CONSISTENCY_EPS,
                   budget: int = DEFAULT_BUDGET) -> "BranchLattice":
        """Lattice of a consistent space; zero-weight maximal histories are dropped."""
        report = consistency_check(space, tolerance, budget=budget)
        if not report.passed:
            raise InconsistentSpaceError(
                f"history space is not consistent (max ratio {report.max_ratio:.3e})")
        hists, vecs = all_branch_vectors(space, budget=budget)
        w = np.einsum("ij,ij->i", vecs.conj(), vecs).real
        keep = np.flatnonzero(w > ZERO_TOL)
        return cls.from_vectors(vecs[keep], [hists[i] for i in keep], True, tolerance)

    # -- elements -----------------------------------------------------------

    @property
    def size(self) -> int:
        return len(self.vectors)

    @property
    def n_elements(self) -> int:
        return 2**self.size - 1

    def element(self, items: Iterable[int]) -> Element:
        el = frozenset(int(i) for i in items)
        if not el:
            raise LatticeError("the empty set is not a lattice element")
        if min(el) < 0 or max(el) >= self.size:
            raise LatticeError(f"element {sorted(el)} references a missing maximal branch")
        return el

    @property
    def top(self) -> Element:
        return frozenset(range(self.size))

    def vector(self, el: Iterable[int]) -> np.ndarray:
        el = self.element(el)
        return self.vectors[sorted(el)].sum(axis=0)

    @staticmethod
    def mask(el: Iterable[int]) -> int:
        return sum(1 << i for i in el)

    def from_mask(self, m: int) -> Element:
        return frozenset(i for i in range(self.size) if m >> i & 1)

    def index(self, el: Iterable[int]) -> int:
        return self.mask(self.element(el)) - 1

    def elements(self) -> list[Element]:
        """All elements, position ``i`` holding the element with mask ``i + 1``."""
        return [self.from_mask(m) for m in range(1, self.n_elements + 1)]

    def element_for_prefix(self, prefix: Sequence[int]) -> Element:
        """Maximal branches refining a truncated history (latest-first, earliest times)."""
        prefix = tuple(prefix)
        k = len(prefix)
        return self.element(i for i, h in enumerate(self.histories) if k == 0 or tuple(h)[-k:] == prefix)

    # -- relations ----------------------------------------------------------

    def coefficients(self, v: np.ndarray) -> np.ndarray:
        """Least-squares coordinates of ``v`` on the maximal branch vectors."""
        return self._pinv @ v

    @cached_property
    def gram(self) -> np.ndarray:
        return self.vectors.conj() @ self.vectors.T

    @cached_property
    def part_matrix(self) -> np.ndarray:
        """``R[b, g]`` = is_part for every element pair, by vector arithmetic."""
        if self.size > 16:
            raise LatticeError("part matrix limited to 16 maximal branches")
        e = self.n_elements
        masks = np.arange(1, e + 1)
        bits = ((masks[:, None] >> np.arange(self.size)) & 1).astype(float)
        coefs = np.empty((e, self.size), dtype=complex)
        norms2 = np.empty(e)
        for lo in range(0, e, 512):
            vec = bits[lo:lo + 512] @ self.vectors
            coefs[lo:lo + 512] = vec @ self._pinv.T
            norms2[lo:lo + 512] = np.einsum("ij,ij->i", vec.conj(), vec).real
        gcoefs = np.ascontiguousarray(coefs @ self.gram.T)
        return _kernels.part_matrix(coefs, gcoefs, norms2, COEF_TOL, ORTHO_TOL, ZERO_TOL)

    @cached_property
    def subset_matrix(self) -> np.ndarray:
        masks = np.arange(1, self.n_elements + 1)
        return (masks[:, None] & masks[None, :]) == masks[:, None]


def is_part(lattice: BranchLattice, b, g) -> bool:
    """Vector Part: equal vectors, or ``g = b + delta`` with ``delta`` a non-zero lattice vector orthogonal to ``b``."""
    vb, vg = lattice.vector(b), lattice.vector(g)
    delta = vg - vb
    nd2 = float(np.vdot(delta, delta).real)
    if nd2 <= ZERO_TOL:
        return True
    c = lattice.coefficients(delta)
    if np.any(np.minimum(np.abs(c), np.abs(c - 1.0)) > COEF_TOL):
        return False
    recon = c @ lattice.vectors
    if float(np.vdot(recon - delta, recon - delta).real) > ZERO_TOL + COEF_TOL * nd2:
        return False
    nb2 = float(np.vdot(vb, vb).real)
    return abs(np.vdot(delta, vb)) <= ORTHO_TOL * np.sqrt(nd2 * nb2) + ZERO_TOL


def subset_oracle(lattice: BranchLattice, b, g) -> bool:
    return lattice.element(b) <= lattice.element(g)


def overlap(lattice: BranchLattice, b, g) -> bool:
    """Some element is part of both."""
    r = lattice.part_matrix
    return bool(np.any(r[:, lattice.index(b)] & r[:, lattice.index(g)]))


def underlap(lattice: BranchLattice, b, g) -> bool:
    """Both are part of some element."""
    r = lattice.part_matrix
    return bool(np.any(r[lattice.index(b)] & r[lattice.index(g)]))


def fusion(lattice: BranchLattice, b, g) -> Element:
    return lattice.element(b) | lattice.element(g)


def common_part(lattice: BranchLattice, b, g) -> Element | None:
    """The shared maximal branches, or None when ``b`` and ``g`` share none.

    Checks that the remainders ``b - common`` and ``g - common`` are
    orthogonal to each other and to the common part.
    """
    b, g = lattice.element(b), lattice.element(g)
    common = b & g
    if not common:
        return None
    vd = lattice.vector(common)
    rests = [lattice.vector(x) - vd for x in (b, g)]
    scale = max(np.sqrt(np.vdot(vd, vd).real), 1.0)
    worst = max(abs(np.vdot(rests[0], rests[1])), abs(np.vdot(rests[0], vd)), abs(np.vdot(rests[1], vd)))
    if worst > ORTHO_TOL * scale:
        raise LatticeError(f"common-part decomposition not orthogonal (|<.|.>| = {worst:.3e})")
    return common


def orthogonal_overlaps(lattice: BranchLattice) -> list[tuple[Element, Element]]:
    """Pairs of mutually orthogonal elements that nevertheless overlap (should be empty)."""
    e = lattice.n_elements
    masks = np.arange(1, e + 1)
    bits = ((masks[:, None] >> np.arange(lattice.size)) & 1).astype(float)
    g = np.abs(bits @ lattice.gram @ bits.T)
    n = np.sqrt(np.clip(np.diag(g), 0.0, None))
    ortho = g <= ORTHO_TOL * np.outer(n, n) + ZERO_TOL
    r = lattice.part_matrix.astype(np.float32)
    shared = (r.T @ r) > 0
    bad = np.argwhere(np.triu(ortho & shared, 1))
    return [(lattice.from_mask(int(i) + 1), lattice.from_mask(int(j) + 1)) for i, j in bad]


# ---------------------------------------------------------------------------
# axiom suite


AXIOMS = ("part_oracle", "reflexivity", "antisymmetry", "transitivity", "self_fusion", "common_upper_bound", "fusion_is_least", "fusion_rule")


@dataclass(frozen=True)
class MereologyReport:
    results: dict
    witness: dict | None
    mode: str
    n_branches: int
    n_elements: int
    max_residual_inner: float

    @property
    def passed(self) -> bool:
        return all(self.results.values())


def _w(name, *els):
    return {"axiom": name, "elements": [sorted(e) for e in els]}


def axioms_check(lattice: BranchLattice, sample_budget: int = 20000, seed: int = 0,
                 exhaustive_max: int = EXHAUSTIVE_MAX) -> MereologyReport:
    """Partial-order laws, fusion laws and agreement with the subset oracle.

    Exhaustive over all element pairs and triples up to ``exhaustive_max``
    maximal branches; otherwise ``sample_budget`` random triples drawn with
    ``seed``.  The first failure is returned as a witness of index sets.
    """
    if lattice.size <= exhaustive_max:
        results, witness = _exhaustive(lattice)
        mode = "exhaustive"
    else:
        results, witness = _sampled(lattice, sample_budget, seed)
        mode = "sampled"
    return MereologyReport(results, witness, mode, lattice.size, lattice.n_elements,
                           lattice.max_residual_inner)


def _exhaustive(lat: BranchLattice):
    r = lat.part_matrix
    s = lat.subset_matrix
    el = lat.from_mask
    e = lat.n_elements
    res = {k: True for k in AXIOMS}
    witness = None

    def fail(name, *idx):
        nonlocal witness
        res[name] = False
        if witness is None:
            witness = _w(name, *(el(i + 1) for i in idx))

    bad = np.argwhere(r != s)
    if bad.size:
        fail("part_oracle", *bad[0])
    if not r.diagonal().all():
        fail("reflexivity", int(np.argmin(r.diagonal())))
    anti = r & r.T & ~np.eye(e, dtype=bool)
    if anti.any():
        fail("antisymmetry", *np.argwhere(anti)[0])
    rf = r.astype(np.float32)
    trans = ((rf @ rf) > 0) & ~r
    if trans.any():
        x, z = np.argwhere(trans)[0]
        y = int(np.flatnonzero(r[x] & r[:, z])[0])
        fail("transitivity", x, y, z)
    for x in range(e):
        ub = r[x]
        lub = ub & r[:, ub].all(axis=1)
        if lub.sum() != 1 or not lub[x]:
            fail("self_fusion", x)
            break
    code, x, y, w = _kernels.fusion_scan(r)
    if code == 1:
        fail("fusion_rule", x, y)
        ub = r[x] & r[y]
        if ub.any() and (ub & r[:, ub].all(axis=1)).sum() != 1:
            fail("common_upper_bound", x, y)
    elif code == 2:
        fail("fusion_is_least", x, y, w)
        fail("fusion_rule", x, y)
    if not r[:, e - 1].all():  # every element underlaps every other via the top
        fail("common_upper_bound", int(np.argmin(r[:, e - 1])), e - 1)
    return res, witness


def _sampled(lat: BranchLattice, budget: int, seed: int):
    rng = np.random.default_rng(seed)
    k = lat.size
    res = {n: True for n in AXIOMS}
    witness = None
    memo = {}

    def part(a, b):
        key = (a, b)
        if key not in memo:
            memo[key] = is_part(lat, lat.from_mask(a), lat.from_mask(b))
        return memo[key]

    def fail(name, *ms):
        nonlocal witness
        res[name] = False
        if witness is None:
            witness = _w(name, *(lat.from_mask(m) for m in ms))

    top = (1 << k) - 1
    for _ in range(budget):
        x, y, z = (int(m) for m in rng.integers(1, top + 1, size=3))
        if part(x, y) != ((x & y) == x):
            fail("part_oracle", x, y)
        if not part(x, x):
            fail("reflexivity", x)
        if x != y and part(x, y) and part(y, x):
            fail("antisymmetry", x, y)
        if part(x, y) and part(y, z) and not part(x, z):
            fail("transitivity", x, y, z)
        u = x | y
        if not (part(x, u) and part(y, u)):
            fail("fusion_rule", x, y)
        if part(x, z) and part(y, z) and not part(u, z):
            fail("fusion_is_least", x, y, z)
        if (x | x) != x or not part(x, x):
            fail("self_fusion", x)
        if not (part(x, top) and part(y, top)):
            fail("common_upper_bound", x, y)
    return res, witness
