"""Acceptance criteria 1-9.  Each test prints one PASS/FAIL line, collected
again in the terminal summary.  Timed sections run after kernel warm-up."""
import itertools
import math
import time
from contextlib import contextmanager
from fractions import Fraction

import numpy as np
import pytest

import oracles
from decohist import _kernels
from decohist.histories import (
    all_branch_vectors,
    branching_structure_check,
    build_branch_tree,
    collapse_oracle,
    consistency_check,
    sum_rule_check,
    weight,
)
from decohist.measurement import (
    SpinPreparation,
    concentration_report,
    frequency_distribution,
    no_go_search,
    repeated_measurement_space,
    von_neumann_model,
)
from decohist.mereology import BranchLattice, axioms_check, is_part, orthogonal_overlaps, subset_oracle
from decohist.scenario import load_scenario
from decohist.semantics import Predicate, UtteranceContext, eval_might, eval_will, past_future_split


@pytest.fixture(scope="module", autouse=True)
def warm():
    _kernels.warmup()
    von_neumann_model(0.5)


@contextmanager
def criterion(log, n, title):
    info = {}
    try:
        yield info
    except BaseException:
        line = f"criterion {n}: FAIL  {title}  {_fmt(info)}"
        log.append(line)
        print(line)
        raise
    line = f"criterion {n}: PASS  {title}  {_fmt(info)}"
    log.append(line)
    print(line)


def _fmt(info):
    return ", ".join(f"{k}={v:.3g}" if isinstance(v, float) else f"{k}={v}" for k, v in info.items())


def test_c1_von_neumann_branch_weights(acceptance_log):
    with criterion(acceptance_log, 1, "von Neumann branch weights equal (|c|^2, 1-|c|^2)") as info:
        t0 = time.perf_counter()
        worst = 0.0
        for c2 in (0.3, 0.5, 0.7):
            sp = von_neumann_model(SpinPreparation.from_weight(c2))
            labels = sp.partitions[0].labels
            w_plus = weight(sp, (labels.index("+"),))
            w_minus = weight(sp, (labels.index("-"),))
            worst = max(worst, abs(w_plus - c2), abs(w_minus - (1 - c2)))
        info["max_err"] = worst
        info["seconds"] = time.perf_counter() - t0
        assert worst <= 1e-12
        assert info["seconds"] < 1.0


def test_c2_exchangeability_n10(acceptance_log):
    with criterion(acceptance_log, 2, "N=10 branches with equal M share one weight") as info:
        sp = repeated_measurement_space(SpinPreparation.from_weight(0.7), 10)
        hists, vecs = all_branch_vectors(sp)
        w = np.einsum("ij,ij->i", vecs.conj(), vecs).real
        groups = {}
        for h, x in zip(hists, w):
            groups.setdefault(sp.labels_of(h)[0].count("+"), []).append(x)
        info["branches"] = len(hists)
        assert sorted((m, len(g)) for m, g in groups.items()) == [(m, math.comb(10, m)) for m in range(11)]
        spread = max(max(g) - min(g) for g in groups.values())
        info["max_spread"] = spread
        assert spread <= 1e-12


def test_c3_concentration(acceptance_log):
    with criterion(acceptance_log, 3, "frequency weights peak at |c|^2 and concentrate") as info:
        t0 = time.perf_counter()
        d10 = frequency_distribution(SpinPreparation.from_weight(0.7), 10)
        mass = concentration_report(SpinPreparation.from_weight(0.5), 100, 0.1)
        d100 = frequency_distribution(SpinPreparation.from_weight(0.5), 100)
        info["seconds"] = time.perf_counter() - t0
        oracle = float(sum(oracles.binomial_exact(100, Fraction(1, 2))[40:61]))
        info["argmax_N10"] = d10.argmax
        info["mass_N100"] = mass
        info["oracle_N100"] = oracle
        assert d10.argmax == 7
        assert abs(mass - oracle) <= 1e-12 and mass >= 0.95
        assert abs(d10.total - 1.0) <= 1e-10 and abs(d100.total - 1.0) <= 1e-10
        assert info["seconds"] < 1.0


def test_c4_weight_matches_collapse_oracle(acceptance_log):
    with criterion(acceptance_log, 4, "chain-operator weight equals sequential-collapse weight") as info:
        rng = np.random.default_rng(2024)
        t0 = time.perf_counter()
        worst, count = 0.0, 0
        for _ in range(120):
            sp, raw = oracles.random_space(rng, max_dim=8, max_times=3, max_cells=3)
            for h in sp.histories():
                worst = max(worst, abs(weight(sp, h) - collapse_oracle(sp, h)))
                count += 1
        info["spaces"] = 120
        info["histories"] = count
        info["max_err"] = worst
        info["seconds"] = time.perf_counter() - t0
        assert worst <= 1e-12
        assert info["seconds"] < 30.0


def test_c5_consistency_and_sum_rule(acceptance_log):
    with criterion(acceptance_log, 5, "repeated_N consistent and additive; twoslit violates the sum rule") as info:
        rep = load_scenario("repeated_N")
        cons = consistency_check(rep.space)
        info["offdiag"] = cons.max_offdiagonal
        assert cons.passed and cons.max_offdiagonal < 1e-12
        worst = max(sum_rule_check(rep.space, g, 1e-10).max_discrepancy for g in rep.coarse_grainings.values())
        info["groupings"] = len(rep.coarse_grainings)
        info["sumrule_max"] = worst
        assert worst <= 1e-10
        ts = load_scenario("twoslit")
        disc = sum_rule_check(ts.space, ts.coarse_grainings["ignore_slit"]).max_discrepancy
        info["twoslit_disc"] = disc
        assert disc > 0.1
        assert abs(disc - ts.golden["sum_rule_max_discrepancy"]) <= 1e-12


def test_c6_no_go(acceptance_log):
    with criterion(acceptance_log, 6, "no unitary is a deterministic amplitude meter") as info:
        r = no_go_search((0.4, 0.6), trials=200, seed=0)
        info["max_unitarity_gap"] = r.max_unitarity_gap
        info["meters"] = r.meters_found
        info["bound"] = r.contradiction_bound
        info["inner"] = r.inner_in
        info["min_residual"] = r.min_max_residual
        assert r.max_unitarity_gap <= 1e-10
        assert r.meters_found == 0
        assert r.contradiction_bound < r.inner_in  # orthogonal-cell outputs cannot keep the input overlap
        assert r.passed


def _random_lattice(n, seed):
    rng = np.random.default_rng(seed)
    d = n + 2
    q, _ = np.linalg.qr(rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d)))
    return BranchLattice.from_vectors(q[:, :n].T * rng.uniform(0.05, 1.0, size=(n, 1)))


def test_c7_mereology(acceptance_log):
    with criterion(acceptance_log, 7, "vector parthood matches subsets; axioms hold; controls detected") as info:
        lattices = [_random_lattice(n, 700 + n) for n in range(2, 11)]
        lattices += [BranchLattice.from_space(repeated_measurement_space(0.7, n)) for n in (1, 2, 3)]
        sizes = []
        for lat in lattices:
            sizes.append(lat.size)
            assert np.array_equal(lat.part_matrix, lat.subset_matrix)
            if lat.size <= 6:
                for b, g in itertools.product(lat.elements(), repeat=2):
                    assert is_part(lat, b, g) == subset_oracle(lat, b, g)
            rep = axioms_check(lat)
            assert rep.mode == "exhaustive" and rep.passed, rep.witness
            assert orthogonal_overlaps(lat) == []
        info["lattice_sizes"] = f"{min(sizes)}-{max(sizes)}"
        bad = BranchLattice.from_vectors(np.array([[1, 0, 0], [0.6, 0.8, 0], [0, 0, 1]], dtype=complex),
                                         validate=False)
        detected = not axioms_check(bad).passed
        info["corrupted_detected"] = detected
        assert detected


def test_c8_branching_structure(acceptance_log):
    with criterion(acceptance_log, 8, "unique predecessors: repeated_N passes, recombining interferometer fails") as info:
        ok = branching_structure_check(load_scenario("repeated_N").space)
        bad = branching_structure_check(load_scenario("interferometer_recombine").space)
        info["repeated_N"] = ok.passed
        info["interferometer_violations"] = len(bad.violations)
        assert ok.passed and not bad.passed


def test_c9_semantics(acceptance_log):
    with criterion(acceptance_log, 9, "branch-relative will/might rules on the alice corpus") as info:
        sc = load_scenario("alice_semantics")
        tree = build_branch_tree(sc.space)
        leaves = [n for n in tree.leaves() if n.weight > 1e-14]
        checked = 0
        for leaf, t, p in itertools.product(leaves, sc.utterance_times, sc.predicates):
            ctx = UtteranceContext(leaf.history, t)
            if eval_will(tree, ctx, p):
                assert eval_might(tree, ctx, p, 0.0)
            checked += 1
        info["will_implies_might_cases"] = checked
        plus, minus = Predicate.on_labels("reads +", ["+"]), Predicate.on_labels("reads -", ["-"])
        pre = min(sc.space.times) - 0.5
        for leaf in leaves:
            ctx = UtteranceContext(leaf.history, pre)
            assert eval_might(tree, ctx, plus, 0.5)
            assert not eval_might(tree, ctx, minus, 0.5)
        groups = 0
        for t in sc.utterance_times:
            by_past = {}
            for leaf in leaves:
                ctx = UtteranceContext(leaf.history, t)
                past, _ = past_future_split(tree, ctx)
                verdict = tuple(eval_might(tree, ctx, p, th) for p in sc.predicates for th in (0.0, 0.001, 0.5))
                by_past.setdefault(past, set()).add(verdict)
            assert all(len(v) == 1 for v in by_past.values())
            groups += len(by_past)
        info["past_classes"] = groups
