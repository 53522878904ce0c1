import dataclasses

import pytest

from decohist.histories import BranchTree, UndefinedConditionalError, build_branch_tree
from decohist.measurement import SpinPreparation, von_neumann_model
from decohist.scenario import load_scenario
from decohist.semantics import (
    Predicate,
    UtteranceContext,
    eval_might,
    eval_present,
    eval_will,
    past_future_split,
    property_checks,
    truth_table,
)

READS_PLUS = Predicate.on_labels("reads +", ["+"])
READS_MINUS = Predicate.on_labels("reads -", ["-"])


@pytest.fixture(scope="module")
def tree():
    # records sampled at t=1 and t=3
    return build_branch_tree(von_neumann_model(SpinPreparation.from_weight(0.7), times=(1.0, 3.0)))


def leaf(tree, reading):
    return next(n.history for n in tree.leaves()
                if n.weight > 0.1 and tree.space.labels_of(n.history) == [reading, reading])


def test_past_future_split_conventions(tree):
    h = leaf(tree, "+")
    assert past_future_split(tree, UtteranceContext(h, 0.5)) == ((), h)
    assert past_future_split(tree, UtteranceContext(h, 9.0)) == (h, ())
    past, future = past_future_split(tree, UtteranceContext(h, 1.0))  # boundary goes to the past
    assert past == h[-1:] and future == h[:-1]
    assert future + past == h


def test_present_tense(tree):
    up, down = leaf(tree, "+"), leaf(tree, "-")
    assert eval_present(tree, UtteranceContext(up, 2.0), READS_PLUS)
    assert not eval_present(tree, UtteranceContext(down, 2.0), READS_PLUS)
    assert eval_present(tree, UtteranceContext(up, 0.5), Predicate.constant("true", True, eternal=True))
    assert not eval_present(tree, UtteranceContext(up, 0.5), READS_PLUS)  # nothing has happened yet


def test_eternal_predicates_are_time_independent(tree):
    p = Predicate.on_labels("spin-up world", ["+"], eternal=True)
    up = leaf(tree, "+")
    assert {eval_present(tree, UtteranceContext(up, t), p) for t in (0.0, 1.0, 5.0)} == {True}


def test_future_tense(tree):
    up = leaf(tree, "+")
    assert eval_will(tree, UtteranceContext(up, 0.5), READS_PLUS)
    assert not eval_will(tree, UtteranceContext(up, 0.5), READS_MINUS)
    assert not eval_will(tree, UtteranceContext(up, 3.0), READS_PLUS)  # empty future
    at_second = Predicate.on_labels("late +", ["+"], times=[1])
    assert eval_will(tree, UtteranceContext(up, 0.5), at_second, universal=False)
    assert not eval_will(tree, UtteranceContext(up, 0.5), at_second, universal=True)


def test_might_with_threshold(tree):
    up, down = leaf(tree, "+"), leaf(tree, "-")
    for h in (up, down):
        ctx = UtteranceContext(h, 0.5)
        assert eval_might(tree, ctx, READS_PLUS, 0.5)
        assert not eval_might(tree, ctx, READS_MINUS, 0.5)
        assert eval_might(tree, ctx, READS_MINUS, 0.0)
    # after the first record, the branch's own past settles the matter
    assert not eval_might(tree, UtteranceContext(up, 2.0), READS_MINUS, 0.0)


def test_might_errors(tree):
    up = leaf(tree, "+")
    with pytest.raises(ValueError):
        eval_might(tree, UtteranceContext(up, 0.5), READS_PLUS, 1.0)
    zero = next(n.history for n in tree.leaves() if n.weight < 1e-20)
    with pytest.raises(ValueError):
        eval_present(tree, UtteranceContext(zero, 0.5), READS_PLUS)
    # a past segment without weight leaves the conditional undefined
    nodes = dict(tree.nodes)
    nodes[up[-1:]] = dataclasses.replace(nodes[up[-1:]], weight=0.0)
    broken = BranchTree(tree.space, nodes, 0.0)
    with pytest.raises(UndefinedConditionalError):
        eval_might(broken, UtteranceContext(up, 2.0), READS_PLUS, 0.0)


def test_predicate_from_dict():
    p = Predicate.from_dict({"name": "x", "kind": "eternal", "labels": ["+"]})
    assert p.eternal and p("+", 0) and not p("-", 0)
    assert Predicate.from_dict({"name": "f", "value": False})("+", 3) is False
    with pytest.raises(ValueError):
        Predicate.from_dict({"name": "x", "kind": "sometimes", "labels": []})


def test_alice_corpus_properties():
    sc = load_scenario("alice_semantics")
    tree = build_branch_tree(sc.space)
    found = property_checks(tree, sc.predicates, sc.utterance_times)
    assert all(v is None for v in found.values()), found
    rows = truth_table(tree, sc.predicates, sc.utterance_times, 0.5)
    assert len(rows) == 2 * len(sc.utterance_times) * len(sc.predicates) * 3
    pre = {(r["branch"], r["predicate"]): r["verdict"] for r in rows if r["time"] == 0.5 and r["rule"] == "might"}
    assert all(v for (b, p), v in pre.items() if p == "reads +")
    assert not any(v for (b, p), v in pre.items() if p == "reads -")
