"""Measurement scenarios: pointer coupling, repeated trials, amplitude-meter no-go.

The measured system is a qubit with basis ``|+> = ket(0)``, ``|-> = ket(1)``.
A pointer of dimension ``d`` starts in the ready state ``ket(0)`` and the
coupling shifts it cyclically by 1 for ``|+>`` and by 2 for ``|->``, so the
``+`` reading is pointer state 1 and the ``-`` reading is pointer state
``2 mod d`` (for ``d = 2`` the ``-`` reading coincides with the ready state).
The coupling Hamiltonian produces exactly this shift at ``t = 1`` and the
records persist at every ``t = 1 + j*d``.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.stats import unitary_group

from . import _kernels
from .hilbert import (DEFAULT_TOL, ProjectorPartition, StructureError, as_operator, embed,
                      is_unitary, ket, norm_sq, tensor)
from .histories import DEFAULT_BUDGET, EnumerationBudgetExceeded, HistorySpace, all_branch_vectors

SHIFT = {"+": 1, "-": 2}
OTHER = "o"
DELTA = 1e-6


@dataclass(frozen=True)
class SpinPreparation:
    """``c|+> + sqrt(1 - |c|^2)|->`` with the second amplitude real and non-negative."""

    c: complex

    def __post_init__(self):
        c = complex(self.c)
        if abs(c) > 1.0 + 1e-12:
            raise ValueError(f"|c| must not exceed 1, got {abs(c)}")
        object.__setattr__(self, "c", c)

    @classmethod
    def from_weight(cls, c2: float) -> "SpinPreparation":
        if not 0.0 <= c2 <= 1.0:
            raise ValueError(f"|c|^2 must lie in [0, 1], got {c2}")
        return cls(math.sqrt(c2))

    @property
    def c2(self) -> float:
        return min(abs(self.c) ** 2, 1.0)

    @property
    def minus_amplitude(self) -> float:
        return math.sqrt(max(0.0, 1.0 - self.c2))

    def state(self) -> np.ndarray:
        return np.array([self.c, self.minus_amplitude], dtype=complex)


def _prep(p) -> SpinPreparation:
    """Accept a SpinPreparation or a float read as |c|^2."""
    return p if isinstance(p, SpinPreparation) else SpinPreparation.from_weight(float(p))


def _reading(pointer: int, d: int) -> str:
    if pointer == SHIFT["+"] % d:
        return "+"
    if pointer == SHIFT["-"] % d:
        return "-"
    return OTHER


def reading_labels(pointer_dim: int) -> list[str]:
    return ["+", "-"] + ([OTHER] if pointer_dim >= 3 else [])


def record_times(pointer_dim: int, count: int) -> tuple[float, ...]:
    """Sample times at which the coupling has acted and the record is intact."""
    return tuple(1.0 + j * pointer_dim for j in range(count))


def shift_generator(d: int, s: int) -> np.ndarray:
    """Hermitian ``G`` with ``exp(-iG) = X^s`` for the cyclic shift ``X|p> = |p+1 mod d>``."""
    k = np.arange(d)
    four = np.exp(-2j * np.pi * np.outer(k, k) / d) / np.sqrt(d)  # column k: eigenvector of X, eigenvalue w^k
    theta = np.mod(-2 * np.pi * k * s / d, 2 * np.pi)
    return (four * theta) @ four.conj().T


def coupling_hamiltonian(pointer_dim: int) -> np.ndarray:
    """Controlled pointer shift on system (x) pointer."""
    d = pointer_dim
    h = np.zeros((2 * d, 2 * d), dtype=complex)
    for s, lab in enumerate(("+", "-")):
        proj = np.zeros((2, 2))
        proj[s, s] = 1.0
        h += np.kron(proj, shift_generator(d, SHIFT[lab]))
    return 0.5 * (h + h.conj().T)


def coupling_unitary(pointer_dim: int) -> np.ndarray:
    """The permutation realized by the coupling at ``t = 1``."""
    d = pointer_dim
    u = np.zeros((2 * d, 2 * d), dtype=complex)
    for s, lab in enumerate(("+", "-")):
        for p in range(d):
            u[s * d + (p + SHIFT[lab]) % d, s * d + p] = 1.0
    return u


def pointer_partition(pointer_dim: int, env_dim: int = 1) -> ProjectorPartition:
    """Pointer-reading cells on env (x) system (x) pointer."""
    d = pointer_dim
    labels = reading_labels(d)
    basis = [labels.index(_reading(i % d, d)) for i in range(env_dim * 2 * d)]
    return ProjectorPartition.from_labels(basis, labels)


def von_neumann_model(prep, pointer_dim: int = 2, times: Sequence[float] = (1.0,),
                      env_state=None) -> HistorySpace:
    """Single measurement of the qubit by a pointer, on env (x) system (x) pointer.

    ``env_state`` defaults to a one-dimensional spectator environment.
    """
    prep = _prep(prep)
    if pointer_dim < 2:
        raise ValueError("pointer_dim must be at least 2")
    env = np.array([1.0], dtype=complex) if env_state is None else np.asarray(env_state, dtype=complex)
    env = env / np.sqrt(norm_sq(env))
    e = env.size
    omega = tensor(env, prep.state(), ket(0, pointer_dim))
    h = np.kron(np.eye(e), coupling_hamiltonian(pointer_dim))
    return HistorySpace.uniform(h, omega, times, pointer_partition(pointer_dim, e))


def outcome_labels(n: int, pointer_dim: int = 2) -> list[str]:
    """Outcome strings, first copy first, in cell order."""
    return ["".join(p) for p in itertools.product(reading_labels(pointer_dim), repeat=n)]


def repeated_measurement_space(prep, n: int, pointer_dim: int = 2, times: Sequence[float] = (1.0,),
                               model: str = "auto", max_full_dim: int = 256,
                               budget: int = DEFAULT_BUDGET) -> HistorySpace:
    """``n`` non-interacting system+pointer copies measured at once.

    ``model="full"`` keeps every system and pointer, dimension ``(2d)^n``.
    ``model="record"`` keeps only the record sector: after the coupling,
    the copies' states are ``|s_k>|reading(s_k)>`` and the branch vectors
    and weights coincide with those of the qubits measured directly, so
    the space is ``(C^2)^n`` with ``H = 0``, ``Omega`` the product
    preparation, and one cell per outcome string.  The record model assumes
    every sample time is a record time (see :func:`record_times`).
    ``"auto"`` picks the full model while its dimension stays within
    ``max_full_dim``.
    """
    prep = _prep(prep)
    if n < 1:
        raise ValueError("n must be >= 1")
    labels = reading_labels(pointer_dim)
    if len(labels) ** n > budget:
        raise EnumerationBudgetExceeded(f"{len(labels) ** n} outcome strings exceed the budget of {budget}")
    full_dim = (2 * pointer_dim) ** n
    if model == "auto":
        model = "full" if full_dim <= max_full_dim else "record"
    if model == "record":
        dim = 2**n
        omega = tensor(*([prep.state()] * n))
        cells = outcome_labels(n, 2)
        part = ProjectorPartition.from_labels(np.arange(dim), cells)
        return HistorySpace.uniform(np.zeros((dim, dim)), omega, times, part)
    if model != "full":
        raise ValueError(f"unknown model {model!r}")
    local = 2 * pointer_dim
    h_local = coupling_hamiltonian(pointer_dim)
    h = sum(embed(h_local, k, [local] * n) for k in range(n))
    omega = tensor(*([np.kron(prep.state(), ket(0, pointer_dim))] * n))
    idx = np.arange(full_dim)
    cell = np.zeros(full_dim, dtype=np.int64)
    for k in range(n):
        digit = (idx // local ** (n - 1 - k)) % local
        read = np.array([labels.index(_reading(p % pointer_dim, pointer_dim)) for p in digit])
        cell = cell * len(labels) + read
    part = ProjectorPartition.from_labels(cell, outcome_labels(n, pointer_dim))
    return HistorySpace.uniform(h, omega, times, part)


def plus_count(label: str) -> int:
    return label.count("+")


# ---------------------------------------------------------------------------
# relative-frequency statistics


@dataclass(frozen=True)
class FrequencyDistribution:
    n: int
    c2: float
    weights: np.ndarray
    crosscheck_deviation: float | None = None

    @property
    def total(self) -> float:
        return float(self.weights.sum())

    @property
    def argmax(self) -> int:
        return int(np.argmax(self.weights))

    def rows(self) -> list[tuple[int, float]]:
        return [(m, float(x)) for m, x in enumerate(self.weights)]


def frequency_weights(c2: float, n: int) -> np.ndarray:
    """``x(M) = C(n, M) |c|^{2M} (1 - |c|^2)^{n-M}``; log-domain for ``n > 50``."""
    return _kernels.binomial_pmf(float(c2), int(n))


def enumerated_frequency_weights(prep, n: int, **space_kw) -> np.ndarray:
    """Aggregate the enumerated branch weights of the n-fold model by '+' count."""
    space = repeated_measurement_space(prep, n, **space_kw)
    hists, vecs = all_branch_vectors(space)
    w = np.einsum("ij,ij->i", vecs.conj(), vecs).real
    counts = [plus_count(space.labels_of(h)[-1]) for h in hists]
    return np.bincount(counts, weights=w, minlength=n + 1)


def frequency_distribution(prep, n: int, crosscheck_max_n: int = 10) -> FrequencyDistribution:
    """Closed-form distribution of the '+' count over ``n`` trials.

    ``prep`` is a SpinPreparation or the weight ``|c|^2``.  For
    ``n <= crosscheck_max_n`` the closed form is compared with the
    aggregated branch weights of the enumerated n-fold model.
    """
    prep = _prep(prep)
    if n < 1:
        raise ValueError("n must be >= 1")
    x = frequency_weights(prep.c2, n)
    dev = None
    if n <= crosscheck_max_n:
        dev = float(np.max(np.abs(enumerated_frequency_weights(prep, n) - x)))
    return FrequencyDistribution(n, prep.c2, x, dev)


def concentration_report(prep, n: int, epsilon: float) -> float:
    """Total weight of counts ``M`` with ``|M/n - |c|^2| <= epsilon``."""
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    prep = _prep(prep)
    x = frequency_weights(prep.c2, n)
    m = np.arange(n + 1)
    inside = np.abs(m / n - prep.c2) <= epsilon + 1e-12
    return float(x[inside].sum())


def concentration_profile(prep, ns: Sequence[int], epsilon: float) -> dict:
    """Concentration values along ``ns`` plus whether they happen to be non-decreasing."""
    vals = [concentration_report(prep, n, epsilon) for n in ns]
    mono = all(b >= a - 1e-15 for a, b in zip(vals, vals[1:]))
    return {"n": list(ns), "concentration": vals, "monotone": mono}


def exchangeability_spread(space: HistorySpace) -> float:
    """Largest weight spread among outcome strings with the same '+' count."""
    hists, vecs = all_branch_vectors(space)
    w = np.einsum("ij,ij->i", vecs.conj(), vecs).real
    groups: dict[int, list[float]] = {}
    for h, x in zip(hists, w):
        lab = space.labels_of(h)[-1]
        if OTHER in lab:
            continue
        groups.setdefault(plus_count(lab), []).append(x)
    return max(max(g) - min(g) for g in groups.values())


# ---------------------------------------------------------------------------
# no-go check for deterministic amplitude meters


def overlap_bound(r1: float, r2: float) -> float:
    """Upper bound on ``|<y1|y2>|`` for unit vectors with residuals ``r_j`` off orthogonal cells."""
    a = math.sqrt(max(r1, 0.0)) * math.sqrt(max(1.0 - r2, 0.0)) + math.sqrt(max(r2, 0.0))
    b = math.sqrt(max(r2, 0.0)) * math.sqrt(max(1.0 - r1, 0.0)) + math.sqrt(max(r1, 0.0))
    return min(a, b, 1.0)


@dataclass(frozen=True)
class NoGoReport:
    inner_in: float
    inner_out: float
    residuals: tuple[float, float]
    cells_orthogonal: bool
    delta: float
    contradiction_bound: float   # max |<Ux1|Ux2>| if both residuals were <= delta
    required_residual: float     # lower bound on max residual implied by unitarity
    tolerance: float = 1e-10

    @property
    def unitarity_gap(self) -> float:
        return abs(self.inner_in - self.inner_out)

    @property
    def unitarity_ok(self) -> bool:
        return self.unitarity_gap <= self.tolerance

    @property
    def meter_achieved(self) -> bool:
        return max(self.residuals) <= self.delta

    @property
    def impossible_as_claimed(self) -> bool:
        """No unitary can map both preparations into their cells within ``delta``."""
        return self.cells_orthogonal and self.contradiction_bound < self.inner_in

    @property
    def contradiction(self) -> bool:
        """The candidate looks like a meter although unitarity forbids it."""
        return self.meter_achieved and self.impossible_as_claimed

    @property
    def bound_respected(self) -> bool:
        return max(self.residuals) >= self.required_residual - 1e-12


def _inputs(preps, pointer_dim):
    return [np.kron(_prep(p).state(), ket(0, pointer_dim)) for p in preps]


def no_go_check(prep1, prep2, candidate, partition: ProjectorPartition, cells=("+", "-"),
                delta: float = DELTA, tol: float = DEFAULT_TOL) -> NoGoReport:
    """Test ``candidate`` as a deterministic meter sending preparation ``j`` to ``cells[j]``.

    The candidate acts on system (x) pointer with the pointer ready in
    ``ket(0)``.  Residual ``r_j = 1 - ||P_j U x_j||^2``.  If the cells are
    orthogonal then ``|<Ux1|Ux2>| <= sqrt(r1) + sqrt(r2)``, and unitarity
    fixes ``|<Ux1|Ux2>| = |<x1|x2>| = i``, so ``max r_j >= i^2 / 4``.
    """
    u = as_operator(candidate)
    if u.shape[0] != partition.dim or u.shape[0] % 2:
        raise StructureError("candidate and partition must act on system (x) pointer")
    if not is_unitary(u, tol):
        raise StructureError("candidate is not unitary")
    x1, x2 = _inputs((prep1, prep2), u.shape[0] // 2)
    y1, y2 = u @ x1, u @ x2
    p1, p2 = partition.projector(cells[0]), partition.projector(cells[1])
    r = (1.0 - norm_sq(p1 @ y1), 1.0 - norm_sq(p2 @ y2))
    orth = float(np.max(np.abs(p1 @ p2))) <= tol
    inner_in = abs(np.vdot(x1, x2))
    return NoGoReport(
        inner_in=float(inner_in),
        inner_out=float(abs(np.vdot(y1, y2))),
        residuals=(float(r[0]), float(r[1])),
        cells_orthogonal=orth,
        delta=delta,
        contradiction_bound=overlap_bound(delta, delta),
        required_residual=float(inner_in**2 / 4.0) if orth else 0.0,
        tolerance=tol,
    )


def random_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random unitary."""
    return unitary_group.rvs(dim, random_state=rng)


def targeted_unitary(prep1, prep2, partition: ProjectorPartition, cells=("+", "-")) -> np.ndarray:
    """Best-effort meter: sends x1 exactly into ``cells[0]`` and x2 as far into ``cells[1]`` as unitarity allows."""
    dim = partition.dim
    x1, x2 = _inputs((prep1, prep2), dim // 2)
    a1 = partition.projector(cells[0])[:, np.argmax(np.diag(partition.projector(cells[0])).real)]
    a2 = partition.projector(cells[1])[:, np.argmax(np.diag(partition.projector(cells[1])).real)]
    a1 = a1 / np.sqrt(norm_sq(a1))
    a2 = a2 / np.sqrt(norm_sq(a2))
    ov = np.vdot(x1, x2)
    y2 = ov * a1 + np.sqrt(max(0.0, 1.0 - abs(ov) ** 2)) * a2
    src = _complete_basis([x1, x2])
    dst = _complete_basis([a1, y2])
    return dst @ src.conj().T


def _complete_basis(vecs) -> np.ndarray:
    """Gram-Schmidt ``vecs`` then extend with the standard basis; columns orthonormal."""
    dim = vecs[0].size
    cols = []
    for v in list(vecs) + [ket(i, dim) for i in range(dim)]:
        w = v.astype(complex).copy()
        for c in cols:
            w = w - np.vdot(c, w) * c
        n = np.sqrt(norm_sq(w))
        if n > 1e-9:
            cols.append(w / n)
        if len(cols) == dim:
            break
    return np.stack(cols, axis=1)


@dataclass(frozen=True)
class NoGoSearchReport:
    c2_pair: tuple[float, float]
    trials: int
    seed: int
    inner_in: float
    max_unitarity_gap: float
    min_max_residual: float
    targeted_residuals: tuple[float, float]
    required_residual: float
    contradiction_bound: float
    meters_found: int
    bounds_respected: bool
    delta: float

    @property
    def passed(self) -> bool:
        return (self.max_unitarity_gap <= 1e-10 and self.meters_found == 0
                and self.bounds_respected)


def no_go_search(c2_pair=(0.4, 0.6), trials: int = 200, seed: int = 0, pointer_dim: int = 2,
                 delta: float = DELTA) -> NoGoSearchReport:
    """Seeded Haar-random search plus one targeted candidate."""
    p1, p2 = (SpinPreparation.from_weight(c) for c in c2_pair)
    part = pointer_partition(pointer_dim)
    rng = np.random.default_rng(seed)
    reports = [no_go_check(p1, p2, random_unitary(2 * pointer_dim, rng), part, delta=delta)
               for _ in range(trials)]
    targeted = no_go_check(p1, p2, targeted_unitary(p1, p2, part), part, delta=delta)
    allr = reports + [targeted]
    return NoGoSearchReport(
        c2_pair=(float(c2_pair[0]), float(c2_pair[1])),
        trials=trials,
        seed=seed,
        inner_in=targeted.inner_in,
        max_unitarity_gap=max(r.unitarity_gap for r in allr),
        min_max_residual=min(max(r.residuals) for r in allr),
        targeted_residuals=targeted.residuals,
        required_residual=targeted.required_residual,
        contradiction_bound=targeted.contradiction_bound,
        meters_found=sum(r.meter_achieved and r.cells_orthogonal for r in allr),
        bounds_respected=all(r.bound_respected for r in allr),
        delta=delta,
    )
