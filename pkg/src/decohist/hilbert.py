"""Dense linear algebra on finite-dimensional Hilbert spaces.

States are 1-d complex ``numpy`` arrays and operators are square 2-d complex
arrays.  Units are dimensionless with hbar = 1, so ``evolve(H, t)`` is
``exp(-i H t)``.  Tensor products put the first factor in the most
significant index position (``numpy.kron`` ordering).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import reduce
from typing import Sequence

import numpy as np

from . import _kernels

DEFAULT_TOL = 1e-10


class StructureError(ValueError):
    """An operator or partition fails a structural check (hermitian, unitary, ...)."""


class PartitionError(StructureError):
    pass


# ---------------------------------------------------------------------------
# basic constructors and structural flags


def as_state(entries) -> np.ndarray:
    v = np.asarray(entries, dtype=complex).reshape(-1)
    if v.size == 0:
        raise StructureError("state vector must have positive dimension")
    return v


def as_operator(entries) -> np.ndarray:
    a = np.asarray(entries, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] == 0:
        raise StructureError(f"operator must be square and non-empty, got shape {a.shape}")
    return a


def ket(index: int, dim: int) -> np.ndarray:
    v = np.zeros(dim, dtype=complex)
    v[index] = 1.0
    return v


def norm_sq(v: np.ndarray) -> float:
    return float(np.vdot(v, v).real)


def max_dev(a: np.ndarray, b: np.ndarray) -> float:
    """Largest entrywise modulus of ``a - b``."""
    return float(np.max(np.abs(a - b))) if a.size else 0.0


def hermitian_deviation(a: np.ndarray) -> float:
    return max_dev(a, a.conj().T)


def is_hermitian(a: np.ndarray, tol: float = DEFAULT_TOL) -> bool:
    return hermitian_deviation(a) <= tol


def is_unitary(u: np.ndarray, tol: float = DEFAULT_TOL) -> bool:
    return max_dev(u.conj().T @ u, np.eye(u.shape[0])) <= tol


def is_projector(p: np.ndarray, tol: float = DEFAULT_TOL) -> bool:
    return hermitian_deviation(p) <= tol and max_dev(p @ p, p) <= tol


def tensor_product(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Kronecker product of two states or two operators.

    ``a`` indexes the slow (most significant) factor, so for basis states
    ``ket(i, m) (x) ket(j, n) == ket(i * n + j, m * n)``.
    """
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    if a.ndim != b.ndim:
        raise StructureError("tensor_product needs two states or two operators")
    return np.kron(a, b)


def tensor(*factors: np.ndarray) -> np.ndarray:
    return reduce(tensor_product, factors)


def embed(op: np.ndarray, position: int, dims: Sequence[int]) -> np.ndarray:
    """``I (x) ... (x) op (x) ... (x) I`` with ``op`` acting on factor ``position``."""
    mats = [np.eye(d, dtype=complex) for d in dims]
    mats[position] = np.asarray(op, dtype=complex)
    return tensor(*mats)


# ---------------------------------------------------------------------------
# evolution


class Propagator:
    """Caches the eigendecomposition of a hermitian ``H`` to produce ``exp(-iHt)``."""

    def __init__(self, hamiltonian, tol: float = DEFAULT_TOL):
        h = as_operator(hamiltonian)
        dev = hermitian_deviation(h)
        if dev > tol:
            raise StructureError(f"hamiltonian not hermitian (max deviation {dev:.3e})")
        h = 0.5 * (h + h.conj().T)
        self.dim = h.shape[0]
        self.is_zero = not np.any(h)
        # diagonal H (including H = 0) needs no eigensolver
        self.is_diagonal = not np.any(h - np.diag(np.diag(h)))
        if self.is_diagonal:
            self.energies, self.basis = np.diag(h).real.copy(), None
        else:
            self.energies, self.basis = np.linalg.eigh(h)

    def __call__(self, t: float) -> np.ndarray:
        if self.is_zero or t == 0:
            return np.eye(self.dim, dtype=complex)
        phases = np.exp(-1j * self.energies * t)
        if self.basis is None:
            return np.diag(phases)
        return (self.basis * phases) @ self.basis.conj().T


def evolve(hamiltonian, t: float, tol: float = DEFAULT_TOL) -> np.ndarray:
    """Unitary ``exp(-i H t)`` via the eigendecomposition of ``H``."""
    return Propagator(hamiltonian, tol)(t)


def heisenberg_projector(projector, hamiltonian, t: float, tol: float = DEFAULT_TOL) -> np.ndarray:
    """``exp(iHt) P exp(-iHt)``; rejects a non-projector ``P`` or non-hermitian ``H``."""
    p = as_operator(projector)
    if not is_projector(p, tol):
        raise StructureError("input is not a projector")
    u = evolve(hamiltonian, t, tol)
    out = u.conj().T @ p @ u
    if not is_projector(out, tol):
        raise StructureError("heisenberg projector lost idempotence; tolerance too tight")
    return out


# ---------------------------------------------------------------------------
# partitions of unity


@dataclass(frozen=True)
class ValidationReport:
    dim: int
    n_cells: int
    completeness_deviation: float
    orthogonality_deviation: float
    tolerance: float

    @property
    def accepted(self) -> bool:
        return (self.completeness_deviation <= self.tolerance
                and self.orthogonality_deviation <= self.tolerance)


def validate_partition(cells: Sequence[np.ndarray], tol: float = DEFAULT_TOL) -> ValidationReport:
    """Measure how far ``cells`` is from an exhaustive, orthogonal set of projectors.

    Orthogonality deviation is the largest entry of ``P_j P_k - delta_jk P_j``
    over all pairs (this includes idempotence on the diagonal); hermiticity
    failures are folded into it as well.
    """
    if not cells:
        raise StructureError("partition has no cells")
    mats = [as_operator(c) for c in cells]
    dim = mats[0].shape[0]
    if any(m.shape[0] != dim for m in mats):
        raise StructureError("partition cells have mismatched dimensions")
    complete = max_dev(sum(mats), np.eye(dim))
    orth = max(hermitian_deviation(m) for m in mats)
    for j, pj in enumerate(mats):
        for k, pk in enumerate(mats):
            target = pj if j == k else 0.0
            orth = max(orth, float(np.max(np.abs(pj @ pk - target))))
    return ValidationReport(dim, len(mats), complete, orth, tol)


@dataclass(frozen=True, eq=False)
class ProjectorPartition:
    """Labelled partition of unity.

    Two storage forms are supported.  Dense partitions hold one projector
    matrix per cell.  Diagonal partitions hold ``basis_labels``, the cell
    index of every computational basis state, which keeps memory linear in
    the dimension when there are many cells.
    """

    dim: int
    labels: tuple[str, ...]
    projectors: tuple[np.ndarray, ...] | None = None
    basis_labels: np.ndarray | None = field(default=None, repr=False)

    @classmethod
    def from_projectors(cls, projectors, labels=None, tol: float = DEFAULT_TOL) -> "ProjectorPartition":
        mats = tuple(as_operator(p) for p in projectors)
        report = validate_partition(mats, tol)
        if not report.accepted:
            raise PartitionError(
                f"not a partition of unity: completeness deviation {report.completeness_deviation:.3e}, "
                f"orthogonality deviation {report.orthogonality_deviation:.3e}")
        labels = tuple(str(x) for x in (labels if labels is not None else range(len(mats))))
        if len(labels) != len(mats):
            raise PartitionError("one label per cell required")
        for m in mats:
            m.setflags(write=False)
        return cls(report.dim, labels, projectors=mats)

    @classmethod
    def from_basis_sets(cls, dim: int, sets: Sequence[Sequence[int]], labels=None) -> "ProjectorPartition":
        """Diagonal partition; ``sets[k]`` lists the basis indices spanning cell ``k``."""
        counts = np.zeros(dim, dtype=np.int64)
        basis_labels = np.full(dim, -1, dtype=np.int64)
        for k, s in enumerate(sets):
            idx = np.asarray(list(s), dtype=np.int64)
            if idx.size and (idx.min() < 0 or idx.max() >= dim):
                raise PartitionError(f"cell {k} references a basis index outside 0..{dim - 1}")
            np.add.at(counts, idx, 1)
            basis_labels[idx] = k
        complete = float(np.max(np.abs(counts - 1))) if dim else 0.0
        orth = 1.0 if np.any(counts > 1) else 0.0
        if complete > 0 or orth > 0:
            raise PartitionError(
                f"not a partition of unity: completeness deviation {complete:.3e}, "
                f"orthogonality deviation {orth:.3e}")
        labels = tuple(str(x) for x in (labels if labels is not None else range(len(sets))))
        if len(labels) != len(sets):
            raise PartitionError("one label per cell required")
        basis_labels.setflags(write=False)
        return cls(dim, labels, basis_labels=basis_labels)

    @classmethod
    def from_labels(cls, basis_labels, labels) -> "ProjectorPartition":
        arr = np.asarray(basis_labels, dtype=np.int64)
        n = len(labels)
        if arr.min() < 0 or arr.max() >= n:
            raise PartitionError("basis label out of range")
        arr = arr.copy()
        arr.setflags(write=False)
        return cls(arr.size, tuple(str(x) for x in labels), basis_labels=arr)

    @classmethod
    def trivial(cls, dim: int, label: str = "all") -> "ProjectorPartition":
        return cls.from_labels(np.zeros(dim, dtype=np.int64), [label])

    def __len__(self) -> int:
        return len(self.labels)

    @property
    def is_diagonal(self) -> bool:
        return self.basis_labels is not None

    def index(self, cell) -> int:
        """Cell index from an index or a label."""
        if isinstance(cell, str):
            return self.labels.index(cell)
        cell = int(cell)
        if not 0 <= cell < len(self):
            raise IndexError(f"cell index {cell} out of range for {len(self)} cells")
        return cell

    def projector(self, cell) -> np.ndarray:
        k = self.index(cell)
        if self.projectors is not None:
            return self.projectors[k]
        return np.diag((self.basis_labels == k).astype(complex))

    def apply(self, cell, vecs: np.ndarray) -> np.ndarray:
        """Apply one cell's projector to a state or to a stack of row states."""
        k = self.index(cell)
        if self.projectors is not None:
            return vecs @ self.projectors[k].T
        return vecs * (self.basis_labels == k)

    def split(self, vecs: np.ndarray) -> np.ndarray:
        """Project each row state onto every cell.

        Returns shape ``(m * ncells, dim)`` where row ``i * ncells + k`` is
        cell ``k`` applied to input row ``i``.
        """
        vecs = np.ascontiguousarray(np.atleast_2d(vecs), dtype=complex)
        if self.basis_labels is not None:
            return _kernels.split_masked(vecs, self.basis_labels, len(self))
        stack = np.stack(self.projectors)  # (ncells, d, d)
        out = np.einsum("kij,mj->mki", stack, vecs)
        return out.reshape(-1, self.dim)

    def validate(self, tol: float = DEFAULT_TOL) -> ValidationReport:
        if self.projectors is not None:
            return validate_partition(self.projectors, tol)
        return ValidationReport(self.dim, len(self), 0.0 if np.all(self.basis_labels >= 0) else 1.0, 0.0, tol)

    def coarsen(self, mapping: Sequence[int], labels=None) -> "ProjectorPartition":
        """Merge cells: fine cell ``k`` goes to supercell ``mapping[k]``."""
        mapping = [int(m) for m in mapping]
        if len(mapping) != len(self):
            raise PartitionError("grouping must assign every cell")
        n = max(mapping) + 1
        if min(mapping) < 0 or set(mapping) != set(range(n)):
            raise PartitionError("grouping is not a surjection onto 0..n-1")
        if labels is None:
            labels = ["|".join(self.labels[k] for k in range(len(self)) if mapping[k] == s) for s in range(n)]
        if self.basis_labels is not None:
            return ProjectorPartition.from_labels(np.asarray(mapping)[self.basis_labels], labels)
        sums = [sum(self.projectors[k] for k in range(len(self)) if mapping[k] == s) for s in range(n)]
        return ProjectorPartition.from_projectors(sums, labels)
