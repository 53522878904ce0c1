"""Branch-relative truth conditions for present, future and modal utterances.

An utterance is made in a maximal branch at a time ``t``.  The branch's
cells split at ``t``: a cell sampled at ``t_k <= t`` belongs to the past,
one sampled at ``t_k > t`` to the future.  Predicates are evaluated on
``(cell label, time index)`` pairs.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

from .histories import BranchTree, History, UndefinedConditionalError, history_id

# branches at or below this weight are treated as absent (rounding noise)
WEIGHT_FLOOR = 1e-14


@dataclass(frozen=True)
class Predicate:
    """A predicate over cells.

    ``eternal`` predicates are true of a branch if any of its cells
    satisfies them, whatever the time of utterance; occasion predicates are
    evaluated at the cell current at the time of utterance.
    """

    name: str
    evaluator: Callable[[str, int], bool]
    eternal: bool = False

    def __call__(self, label: str, time_index: int) -> bool:
        return bool(self.evaluator(label, time_index))

    @classmethod
    def on_labels(cls, name: str, labels: Sequence[str], times: Sequence[int] | None = None,
                  eternal: bool = False) -> "Predicate":
        """True on cells whose label is in ``labels`` (optionally only at ``times``)."""
        labs = frozenset(labels)
        ts = None if times is None else frozenset(times)
        return cls(name, lambda lab, k: lab in labs and (ts is None or k in ts), eternal)

    @classmethod
    def constant(cls, name: str, value: bool, eternal: bool = False) -> "Predicate":
        return cls(name, lambda lab, k: value, eternal)

    @classmethod
    def from_dict(cls, d: dict) -> "Predicate":
        kind = d.get("kind", "occasion")
        if kind not in ("occasion", "eternal"):
            raise ValueError(f"predicate kind must be 'occasion' or 'eternal', got {kind!r}")
        if "value" in d:
            return cls.constant(d["name"], bool(d["value"]), kind == "eternal")
        return cls.on_labels(d["name"], d["labels"], d.get("times"), kind == "eternal")


@dataclass(frozen=True)
class UtteranceContext:
    branch: History   # maximal, latest-first
    time: float


def _check(tree: BranchTree, ctx: UtteranceContext) -> History:
    h = tuple(ctx.branch)
    if len(h) != tree.space.n_times or h not in tree.nodes:
        raise ValueError(f"branch {history_id(h)!r} is not a maximal branch of the tree")
    if tree.nodes[h].weight <= WEIGHT_FLOOR:
        raise ValueError(f"branch {history_id(h)!r} has zero weight")
    return h


def past_future_split(tree: BranchTree, ctx: UtteranceContext) -> tuple[History, History]:
    """``(past, future)`` segments, each latest-first; ``future + past`` is the branch."""
    h = _check(tree, ctx)
    k = sum(1 for t in tree.space.times if t <= ctx.time)
    n = len(h)
    return h[n - k:], h[:n - k]


def _cells(tree: BranchTree, segment: History, offset: int) -> list[tuple[str, int]]:
    """(label, time index) pairs of a segment whose earliest cell sits at time index ``offset``."""
    out = []
    for j, a in enumerate(reversed(segment)):
        k = offset + j
        out.append((tree.space.partitions[k].labels[a], k))
    return out


def eval_present(tree: BranchTree, ctx: UtteranceContext, pred: Predicate) -> bool:
    h = _check(tree, ctx)
    if pred.eternal:
        return any(pred(lab, k) for lab, k in _cells(tree, h, 0))
    past, _ = past_future_split(tree, ctx)
    if not past:
        return False
    lab, k = _cells(tree, past, 0)[-1]
    return pred(lab, k)


def eval_will(tree: BranchTree, ctx: UtteranceContext, pred: Predicate, universal: bool = False) -> bool:
    """True iff ``pred`` holds at some future cell (all future cells with ``universal``)."""
    past, future = past_future_split(tree, ctx)
    cells = _cells(tree, future, len(past))
    if not cells:
        return False
    test = all if universal else any
    return test(pred(lab, k) for lab, k in cells)


def eval_might(tree: BranchTree, ctx: UtteranceContext, pred: Predicate, threshold: float,
               universal: bool = False) -> bool:
    """True iff a branch sharing the past at ``t`` has conditional weight above
    ``threshold`` and makes ``pred`` true in its future."""
    if not 0.0 <= threshold < 1.0:
        raise ValueError("threshold must lie in [0, 1)")
    past, _ = past_future_split(tree, ctx)
    node = tree.nodes.get(past)
    if node is None or node.weight <= WEIGHT_FLOOR:
        raise UndefinedConditionalError(f"past {history_id(past)!r} has zero weight")
    for leaf in tree.leaves_under(past):
        if leaf.weight > WEIGHT_FLOOR and leaf.weight / node.weight > threshold:
            if eval_will(tree, UtteranceContext(leaf.history, ctx.time), pred, universal):
                return True
    return False


def truth_table(tree: BranchTree, predicates: Sequence[Predicate], times: Sequence[float],
                threshold: float) -> list[dict]:
    """One row per (non-zero branch, time, predicate, rule)."""
    rows = []
    for leaf in sorted(tree.leaves(), key=lambda n: history_id(n.history)):
        if leaf.weight <= WEIGHT_FLOOR:
            continue
        for t in times:
            ctx = UtteranceContext(leaf.history, t)
            for p in predicates:
                verdicts = {
                    "present": eval_present(tree, ctx, p),
                    "will": eval_will(tree, ctx, p),
                    "might": eval_might(tree, ctx, p, threshold),
                }
                for rule, v in verdicts.items():
                    rows.append({
                        "branch": history_id(leaf.history),
                        "labels": tree.space.labels_of(leaf.history),
                        "time": float(t),
                        "predicate": p.name,
                        "rule": rule,
                        "verdict": bool(v),
                    })
    return rows


def _live_leaves(tree: BranchTree):
    return [n for n in sorted(tree.leaves(), key=lambda n: history_id(n.history)) if n.weight > WEIGHT_FLOOR]


def property_checks(tree: BranchTree, predicates: Sequence[Predicate], times: Sequence[float],
                    thresholds: Sequence[float] = (0.0, 0.001, 0.1, 0.3, 0.5, 0.7, 0.9)) -> dict:
    """Structural properties of the truth rules over a predicate corpus.

    Returns ``{name: witness or None}``; ``None`` means the property holds.
    Witnesses are ``(branch id, time, predicate)`` tuples.
    """
    ths = sorted(set(float(x) for x in thresholds))
    found = {"will_implies_might": None, "might_monotone": None,
             "eternal_time_independent": None, "same_past_same_might": None}
    leaves = _live_leaves(tree)
    for p in predicates:
        for leaf in leaves:
            hid = history_id(leaf.history)
            if p.eternal:
                vals = {eval_present(tree, UtteranceContext(leaf.history, t), p) for t in times}
                if len(vals) > 1 and found["eternal_time_independent"] is None:
                    found["eternal_time_independent"] = (hid, None, p.name)
            for t in times:
                ctx = UtteranceContext(leaf.history, t)
                might = [eval_might(tree, ctx, p, th) for th in ths]
                if eval_will(tree, ctx, p) and not might[0] and found["will_implies_might"] is None:
                    found["will_implies_might"] = (hid, float(t), p.name)
                if any(b and not a for a, b in zip(might, might[1:])) and found["might_monotone"] is None:
                    found["might_monotone"] = (hid, float(t), p.name)
        for t in times:
            classes: dict = {}
            for leaf in leaves:
                past, _ = past_future_split(tree, UtteranceContext(leaf.history, t))
                verdict = tuple(eval_might(tree, UtteranceContext(leaf.history, t), p, th) for th in ths)
                prev = classes.setdefault(past, verdict)
                if prev != verdict and found["same_past_same_might"] is None:
                    found["same_past_same_might"] = (history_id(leaf.history), float(t), p.name)
    return found
