"""Decoherent histories on a finite Hilbert space.

A history is a tuple of cell indices stored latest-first,
``(a_n, ..., a_1)``.  A tuple shorter than the number of sample times is a
truncated history covering the earliest ``len(h)`` times, so ``()`` is the
trivial history whose chain operator is the identity.  Concatenating a
later segment ``alpha`` with an earlier one ``beta`` is plain tuple
addition, ``alpha + beta``.
"""
from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from . import _kernels
from .hilbert import (DEFAULT_TOL, ProjectorPartition, Propagator, StructureError,
                      as_operator, as_state, norm_sq)

History = tuple  # tuple[int, ...], latest-first

DEFAULT_BUDGET = 2**20
CONSISTENCY_EPS = 1e-8
CONSISTENCY_FLOOR = 1e-12


class EnumerationBudgetExceeded(RuntimeError):
    pass


class UndefinedConditionalError(ValueError):
    pass


# ---------------------------------------------------------------------------
# history space


@dataclass(frozen=True, eq=False)
class HistorySpace:
    hamiltonian: np.ndarray
    omega: np.ndarray
    times: tuple[float, ...]
    partitions: tuple[ProjectorPartition, ...]
    tolerance: float = DEFAULT_TOL
    _prop: Propagator = field(init=False, repr=False)

    def __post_init__(self):
        h = as_operator(self.hamiltonian)
        omega = as_state(self.omega)
        times = tuple(float(t) for t in self.times)
        parts = tuple(self.partitions)
        object.__setattr__(self, "hamiltonian", h)
        object.__setattr__(self, "omega", omega)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "partitions", parts)
        if h.shape[0] != omega.size:
            raise StructureError(f"hamiltonian dim {h.shape[0]} != state dim {omega.size}")
        if len(parts) != len(times):
            raise StructureError("need exactly one partition per sample time")
        if any(p.dim != omega.size for p in parts):
            raise StructureError("partition dimension does not match the state")
        if any(b <= a for a, b in zip(times, times[1:])):
            raise StructureError("sample times must be strictly increasing")
        if abs(norm_sq(omega) - 1.0) > self.tolerance:
            raise StructureError(f"universal state not normalized (norm^2 = {norm_sq(omega):.12g})")
        object.__setattr__(self, "_prop", Propagator(h, self.tolerance))

    @classmethod
    def uniform(cls, hamiltonian, omega, times, partition: ProjectorPartition, **kw) -> "HistorySpace":
        """The same partition at every sample time."""
        return cls(hamiltonian, omega, tuple(times), (partition,) * len(times), **kw)

    @property
    def dim(self) -> int:
        return self.omega.size

    @property
    def n_times(self) -> int:
        return len(self.times)

    @property
    def shape(self) -> tuple[int, ...]:
        """Number of cells at each time, earliest first."""
        return tuple(len(p) for p in self.partitions)

    @property
    def n_histories(self) -> int:
        return int(np.prod(self.shape, dtype=object)) if self.shape else 1

    def unitary(self, t: float) -> np.ndarray:
        return self._prop(t)

    def heisenberg(self, k: int, cell) -> np.ndarray:
        """Projector for ``cell`` at sample time ``k`` in the Heisenberg picture."""
        u = self.unitary(self.times[k])
        return u.conj().T @ self.partitions[k].projector(cell) @ u

    def check_history(self, h: Sequence[int], full: bool = False) -> History:
        h = tuple(int(a) for a in h)
        if len(h) > self.n_times or (full and len(h) != self.n_times):
            raise ValueError(f"history length {len(h)} invalid for {self.n_times} sample times")
        for k, a in enumerate(reversed(h)):
            if not 0 <= a < len(self.partitions[k]):
                raise ValueError(f"cell index {a} invalid at time index {k}")
        return h

    def histories(self, depth: int | None = None, budget: int = DEFAULT_BUDGET) -> list[History]:
        """All histories over the first ``depth`` times (default: all times).

        Ordered with the earliest cell most significant, matching the row
        order of :func:`all_branch_vectors`.
        """
        depth = self.n_times if depth is None else depth
        shape = self.shape[:depth]
        total = int(np.prod(shape, dtype=object)) if shape else 1
        if total > budget:
            raise EnumerationBudgetExceeded(f"{total} histories exceed the budget of {budget}")
        return [tuple(reversed(p)) for p in itertools.product(*(range(n) for n in shape))]

    def labels_of(self, h: Sequence[int]) -> list[str]:
        """Cell labels of ``h``, earliest first."""
        return [self.partitions[k].labels[a] for k, a in enumerate(reversed(tuple(h)))]


def earliest_first(h: Sequence[int]) -> list[int]:
    return list(reversed(tuple(h)))


def history_id(h: Sequence[int]) -> str:
    """Serialized form: earliest-first cell indices joined by '/'; '' for the root."""
    return "/".join(str(a) for a in earliest_first(h))


# ---------------------------------------------------------------------------
# chain operators and branch vectors


@dataclass(frozen=True, eq=False)
class BranchVector:
    history: History
    vector: np.ndarray
    weight: float


def chain_operator(space: HistorySpace, h: Sequence[int]) -> np.ndarray:
    """Time-ordered product of Heisenberg projectors, latest factor leftmost."""
    h = space.check_history(h)
    c = np.eye(space.dim, dtype=complex)
    for k, a in enumerate(reversed(h)):
        c = space.heisenberg(k, a) @ c
    return c


def branch_vector(space: HistorySpace, h: Sequence[int]) -> BranchVector:
    h = space.check_history(h)
    v = chain_operator(space, h) @ space.omega
    return BranchVector(h, v, norm_sq(v))


def all_branch_vectors(space: HistorySpace, depth: int | None = None,
                       budget: int = DEFAULT_BUDGET) -> tuple[list[History], np.ndarray]:
    """Branch vectors for every history over the first ``depth`` times.

    Works in the Schrodinger frame and splits by partition cells one time
    at a time, so no Heisenberg projector is ever materialized.  Row ``r``
    of the result belongs to ``space.histories(depth)[r]``.
    """
    hists = space.histories(depth, budget)
    depth = space.n_times if depth is None else depth
    psi = space.omega[None, :]
    t_prev = 0.0
    for k in range(depth):
        t = space.times[k]
        psi = psi @ space.unitary(t - t_prev).T
        psi = space.partitions[k].split(psi)
        t_prev = t
    if depth:
        psi = psi @ space.unitary(-t_prev).T
    return hists, psi


def decoherence_functional(space: HistorySpace, h1: Sequence[int], h2: Sequence[int]) -> complex:
    """``<h1|h2>`` between branch vectors (antilinear in the first slot)."""
    v1 = branch_vector(space, h1).vector
    v2 = branch_vector(space, h2).vector
    return complex(np.vdot(v1, v2))


def decoherence_matrix(space: HistorySpace, budget: int = DEFAULT_BUDGET) -> tuple[list[History], np.ndarray]:
    hists, vecs = all_branch_vectors(space, budget=budget)
    return hists, vecs.conj() @ vecs.T


# ---------------------------------------------------------------------------
# weights and probabilities


def weight_trace(space: HistorySpace, h: Sequence[int]) -> float:
    """``Tr(C rho C^dagger)`` with ``rho = |Omega><Omega|``."""
    c = chain_operator(space, h)
    rho = np.outer(space.omega, space.omega.conj())
    return float(np.trace(c @ rho @ c.conj().T).real)


def weight(space: HistorySpace, h: Sequence[int], check: bool = True) -> float:
    """Squared norm of the branch vector, cross-checked against the trace form."""
    p = branch_vector(space, h).weight
    if check:
        tr = weight_trace(space, h)
        if abs(p - tr) > 1e-12 * max(1.0, p):
            raise ArithmeticError(f"norm form {p!r} and trace form {tr!r} of the weight disagree")
    return p


def collapse_oracle(space: HistorySpace, h: Sequence[int]) -> float:
    """Weight of ``h`` from sequential projective measurement with renormalization.

    Evolves in the Schrodinger picture between sample times, projects,
    renormalizes, and multiplies the Born probabilities of the steps.
    Shares no code with the chain-operator route.
    """
    h = space.check_history(h)
    psi = space.omega.copy()
    t_prev = 0.0
    prob = 1.0
    for k, a in enumerate(reversed(h)):
        t = space.times[k]
        psi = space.unitary(t - t_prev) @ psi
        t_prev = t
        before = norm_sq(psi)
        psi = space.partitions[k].apply(a, psi)
        after = norm_sq(psi)
        if after == 0.0:
            return 0.0
        prob *= after / before
        psi = psi / np.sqrt(after)
    return prob


def conditional_probability(space: HistorySpace, alpha: Sequence[int], beta: Sequence[int]) -> float:
    """Probability of the later segment ``alpha`` given the earlier history ``beta``.

    ``beta`` covers the first ``len(beta)`` times and ``alpha`` the next
    ``len(alpha)`` times; both latest-first.
    """
    alpha, beta = tuple(alpha), tuple(beta)
    joint = space.check_history(alpha + beta)
    wb = weight(space, beta)
    if wb <= 0.0:
        raise UndefinedConditionalError(f"conditioning history {history_id(beta)!r} has zero weight")
    if not alpha:
        return 1.0
    return weight(space, joint) / wb


def schrodinger_state(space: HistorySpace, h: Sequence[int], t: float) -> np.ndarray:
    """Unnormalized state at time ``t`` after post-selecting on ``h`` up to ``t``.

    Only cells with sample time ``<= t`` enter; for ``t`` before every sample
    time this is just ``exp(-iHt)|Omega>``.
    """
    h = space.check_history(h)
    if not np.isfinite(t):
        raise ValueError("time must be finite")
    cells = earliest_first(h)
    k = sum(1 for s in space.times[:len(cells)] if s <= t)
    past = tuple(reversed(cells[:k]))
    return space.unitary(t) @ (chain_operator(space, past) @ space.omega)


# ---------------------------------------------------------------------------
# consistency


@dataclass(frozen=True)
class ConsistencyReport:
    n_histories: int
    max_offdiagonal: float
    max_ratio: float
    worst_pair: tuple[History, History] | None
    tolerance: float
    floor: float
    weak: bool
    total_weight: float

    @property
    def passed(self) -> bool:
        return self.max_ratio <= self.tolerance


def consistency_check(space: HistorySpace, tolerance: float = CONSISTENCY_EPS,
                      floor: float = CONSISTENCY_FLOOR, weak: bool = False,
                      budget: int = DEFAULT_BUDGET) -> ConsistencyReport:
    """Pairwise orthogonality of branch vectors.

    A pair passes when ``|<a|b>| <= max(tolerance * sqrt(p_a p_b), floor)``:
    relative to the branch weights, with an absolute allowance ``floor`` so
    rounding noise between zero-weight branches is not counted.  The
    reported ratio is ``|<a|b>| / max(sqrt(p_a p_b), floor / tolerance)``.
    With ``weak=True`` only the real part of the inner product is tested.
    """
    hists, vecs = all_branch_vectors(space, budget=budget)
    gram = vecs.conj() @ vecs.T
    weights = np.ascontiguousarray(gram.diagonal().real)
    mx, ratio, i, j = _kernels.offdiag_scan(np.ascontiguousarray(gram), weights, tolerance,
                                          floor / tolerance, weak)
    pair = (hists[i], hists[j]) if i >= 0 else None
    return ConsistencyReport(len(hists), float(mx), float(ratio), pair, tolerance, floor, weak,
                             float(weights.sum()))


# ---------------------------------------------------------------------------
# coarse-graining and the sum rule


def _normalize_grouping(space: HistorySpace, grouping) -> list[list[int]]:
    if len(grouping) != space.n_times:
        raise ValueError("grouping needs one entry per sample time")
    out = []
    for k, g in enumerate(grouping):
        n = len(space.partitions[k])
        g = list(range(n)) if g is None else [int(x) for x in g]
        if len(g) != n:
            raise ValueError(f"grouping at time index {k} must assign all {n} cells")
        m = max(g) + 1
        if min(g) < 0 or set(g) != set(range(m)):
            raise ValueError(f"grouping at time index {k} is not a surjection onto supercells")
        out.append(g)
    return out


def coarse_grain(space: HistorySpace, grouping) -> HistorySpace:
    """Coarser space whose cells are sums of member projectors.

    ``grouping[k][a]`` is the supercell of fine cell ``a`` at time index
    ``k``; ``None`` leaves a time unchanged.
    """
    g = _normalize_grouping(space, grouping)
    parts = tuple(p.coarsen(m) for p, m in zip(space.partitions, g))
    return HistorySpace(space.hamiltonian, space.omega, space.times, parts, space.tolerance)


def coarse_history(grouping, h: Sequence[int]) -> History:
    """Image of a fine history under the grouping."""
    cells = earliest_first(h)
    return tuple(reversed([grouping[k][a] if grouping[k] is not None else a for k, a in enumerate(cells)]))


def fine_members(space: HistorySpace, grouping, coarse: Sequence[int]) -> list[History]:
    g = _normalize_grouping(space, grouping)
    cells = earliest_first(coarse)
    choices = [[a for a in range(len(g[k])) if g[k][a] == s] for k, s in enumerate(cells)]
    return [tuple(reversed(p)) for p in itertools.product(*choices)]


def chain_additivity_deviation(space: HistorySpace, grouping, budget: int = 4096) -> float:
    """Largest entrywise gap between a coarse chain operator and the sum of its fine members."""
    coarse = coarse_grain(space, grouping)
    worst = 0.0
    for ch in coarse.histories(budget=budget):
        total = sum(chain_operator(space, fh) for fh in fine_members(space, grouping, ch))
        worst = max(worst, float(np.max(np.abs(chain_operator(coarse, ch) - total))))
    return worst


@dataclass(frozen=True)
class SumRuleEntry:
    history: History
    coarse_weight: float
    fine_weight_sum: float

    @property
    def discrepancy(self) -> float:
        return abs(self.coarse_weight - self.fine_weight_sum)


@dataclass(frozen=True)
class SumRuleReport:
    entries: tuple[SumRuleEntry, ...]
    tolerance: float

    @property
    def max_discrepancy(self) -> float:
        return max((e.discrepancy for e in self.entries), default=0.0)

    @property
    def passed(self) -> bool:
        return self.max_discrepancy <= self.tolerance


def sum_rule_check(space: HistorySpace, grouping, tolerance: float = 1e-10,
                   budget: int = DEFAULT_BUDGET) -> SumRuleReport:
    """Compare each coarse weight with the summed weights of its fine members."""
    g = _normalize_grouping(space, grouping)
    coarse = coarse_grain(space, g)
    fh, fv = all_branch_vectors(space, budget=budget)
    ch, cv = all_branch_vectors(coarse, budget=budget)
    fine_w = np.einsum("ij,ij->i", fv.conj(), fv).real
    coarse_w = np.einsum("ij,ij->i", cv.conj(), cv).real
    row = {h: r for r, h in enumerate(ch)}
    sums = np.zeros(len(ch))
    for h, w in zip(fh, fine_w):
        sums[row[coarse_history(g, h)]] += w
    entries = tuple(SumRuleEntry(h, float(coarse_w[r]), float(sums[r])) for r, h in enumerate(ch))
    return SumRuleReport(entries, tolerance)


# ---------------------------------------------------------------------------
# branching structure


@dataclass(frozen=True)
class BranchingViolation:
    later_time: int
    earlier_time: int
    cell: int
    predecessors: tuple[int, ...]


@dataclass(frozen=True)
class BranchingReport:
    checked: int
    violations: tuple[BranchingViolation, ...]
    tolerance: float

    @property
    def passed(self) -> bool:
        return not self.violations


def branching_structure_check(space: HistorySpace, tolerance: float = 1e-10,
                              floor: float = 1e-14) -> BranchingReport:
    """Unique-predecessor test for every pair of sample times.

    For times ``m < n`` and each cell ``a_n`` with ``P_{a_n}(t_n)|Omega> != 0``
    (squared norm above ``floor``), counts cells ``a_m`` whose joint vector
    ``P_{a_n}(t_n) P_{a_m}(t_m)|Omega>`` carries squared norm above
    ``tolerance`` times that of ``P_{a_n}(t_n)|Omega>``.  Passes when every
    count is exactly one.
    """
    violations = []
    checked = 0
    for n in range(space.n_times):
        part_n = space.partitions[n]
        single = part_n.split(space.unitary(space.times[n]) @ space.omega)
        w_n = np.einsum("ij,ij->i", single.conj(), single).real
        for m in range(n):
            part_m = space.partitions[m]
            psi = part_m.split(space.unitary(space.times[m]) @ space.omega)
            psi = psi @ space.unitary(space.times[n] - space.times[m]).T
            joint = part_n.split(psi).reshape(len(part_m), len(part_n), -1)
            w_joint = np.einsum("mnd,mnd->mn", joint.conj(), joint).real
            for a in range(len(part_n)):
                if w_n[a] <= floor:
                    continue
                checked += 1
                preds = tuple(int(b) for b in np.flatnonzero(w_joint[:, a] > tolerance * w_n[a]))
                if len(preds) != 1:
                    violations.append(BranchingViolation(n, m, a, preds))
    return BranchingReport(checked, tuple(violations), tolerance)


# ---------------------------------------------------------------------------
# branch tree


@dataclass(frozen=True, eq=False)
class BranchNode:
    history: History
    vector: np.ndarray
    weight: float
    children: tuple[History, ...]
    pruned_weight: float
    residual: np.ndarray = field(repr=False)


@dataclass(frozen=True, eq=False)
class BranchTree:
    space: HistorySpace
    nodes: dict
    prune_threshold: float

    @property
    def root(self) -> BranchNode:
        return self.nodes[()]

    def node(self, h: Sequence[int]) -> BranchNode:
        return self.nodes[tuple(h)]

    def leaves(self) -> list[BranchNode]:
        n = self.space.n_times
        return [v for k, v in self.nodes.items() if len(k) == n]

    def leaves_under(self, prefix: Sequence[int]) -> list[BranchNode]:
        """Maximal nodes whose history extends the truncated history ``prefix``."""
        prefix = tuple(prefix)
        k = len(prefix)
        return [v for v in self.leaves() if k == 0 or v.history[-k:] == prefix]

    @property
    def pruned_weight(self) -> float:
        return float(sum(v.pruned_weight for v in self.nodes.values()))

    @property
    def retained_weight(self) -> float:
        return float(sum(v.weight for v in self.leaves()))


def build_branch_tree(space: HistorySpace, prune_threshold: float = 0.0,
                      consistency_tolerance: float = CONSISTENCY_EPS,
                      budget: int = DEFAULT_BUDGET) -> BranchTree:
    """Tree of truncated histories with their branch vectors.

    Children whose weight falls below ``prune_threshold`` are dropped and
    their weight and vector sum are kept on the parent, so each node's
    vector equals its children's vectors plus its residual.
    """
    if space.n_histories <= budget:
        report = consistency_check(space, consistency_tolerance, budget=budget)
        if not report.passed:
            warnings.warn(f"history space is not consistent (max ratio {report.max_ratio:.3e}); "
                          "branch weights are not additive", stacklevel=2)
    nodes = {}
    frontier = [((), space.omega.copy())]  # (history, Schrodinger-frame vector)
    pending = {}
    t_prev = 0.0
    for k in range(space.n_times):
        t = space.times[k]
        if not frontier:
            break
        part = space.partitions[k]
        stack = np.stack([s for _, s in frontier]) @ space.unitary(t - t_prev).T
        kids = part.split(stack).reshape(len(frontier), len(part), -1)
        back = space.unitary(-t)
        new_frontier = []
        for (h, _), ks in zip(frontier, kids):
            children, pw = [], 0.0
            resid = np.zeros(space.dim, dtype=complex)
            for a, s in enumerate(ks):
                w = norm_sq(s)
                ch = (a,) + h
                if w < prune_threshold:
                    pw += w
                    resid += back @ s
                    continue
                children.append(ch)
                new_frontier.append((ch, s))
                pending[ch] = (back @ s, w)
            pending.setdefault(h, (space.omega.copy(), norm_sq(space.omega)))
            vec, w = pending.pop(h)
            nodes[h] = BranchNode(h, vec, w, tuple(children), pw, resid)
        if len(nodes) + len(new_frontier) > budget:
            raise EnumerationBudgetExceeded(f"branch tree exceeds the budget of {budget} nodes")
        frontier = new_frontier
        t_prev = t
    for h, _ in frontier:
        vec, w = pending.pop(h)
        nodes[h] = BranchNode(h, vec, w, (), 0.0, np.zeros(space.dim, dtype=complex))
    if () not in nodes:
        nodes[()] = BranchNode((), space.omega.copy(), norm_sq(space.omega), (), 0.0,
                               np.zeros(space.dim, dtype=complex))
    return BranchTree(space, nodes, prune_threshold)


def iter_tree(tree: BranchTree, h: Sequence[int] = ()) -> Iterable[BranchNode]:
    node = tree.node(h)
    yield node
    for c in node.children:
        yield from iter_tree(tree, c)
