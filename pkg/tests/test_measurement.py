import math
from fractions import Fraction

import numpy as np
import pytest
from scipy.stats import binom

import oracles
from decohist.hilbert import StructureError, evolve, is_unitary, ket
from decohist.histories import all_branch_vectors, consistency_check, weight
from decohist.measurement import (
    SpinPreparation,
    concentration_profile,
    concentration_report,
    coupling_hamiltonian,
    coupling_unitary,
    enumerated_frequency_weights,
    exchangeability_spread,
    frequency_distribution,
    frequency_weights,
    no_go_check,
    no_go_search,
    outcome_labels,
    overlap_bound,
    pointer_partition,
    random_unitary,
    record_times,
    repeated_measurement_space,
    targeted_unitary,
    von_neumann_model,
)


@pytest.mark.parametrize("d", [2, 3, 4, 5])
def test_coupling_hamiltonian_realizes_controlled_shift(d):
    h = coupling_hamiltonian(d)
    np.testing.assert_allclose(h, h.conj().T, atol=1e-14)
    np.testing.assert_allclose(evolve(h, 1.0), coupling_unitary(d), atol=1e-12)
    up = np.kron(ket(0, 2), ket(0, d))
    down = np.kron(ket(1, 2), ket(0, d))
    np.testing.assert_allclose(evolve(h, 1.0) @ up, np.kron(ket(0, 2), ket(1 % d, d)), atol=1e-12)
    np.testing.assert_allclose(evolve(h, 1.0) @ down, np.kron(ket(1, 2), ket(2 % d, d)), atol=1e-12)


@pytest.mark.parametrize("d", [2, 3])
def test_records_persist_at_record_times(d):
    u1 = coupling_unitary(d)
    for t in record_times(d, 4):
        np.testing.assert_allclose(evolve(coupling_hamiltonian(d), t), u1, atol=1e-11)


def test_spin_preparation():
    p = SpinPreparation.from_weight(0.7)
    assert p.c2 == pytest.approx(0.7)
    assert np.linalg.norm(p.state()) == pytest.approx(1.0)
    assert SpinPreparation(0.6j).minus_amplitude == pytest.approx(0.8)
    with pytest.raises(ValueError):
        SpinPreparation.from_weight(1.2)
    with pytest.raises(ValueError):
        SpinPreparation(1.1)


@pytest.mark.parametrize("c2", [0.0, 0.3, 0.5, 0.7, 1.0])
def test_von_neumann_branch_weights_are_born_weights(c2):
    sp = von_neumann_model(SpinPreparation.from_weight(c2))
    labels = sp.partitions[0].labels
    assert weight(sp, (labels.index("+"),)) == pytest.approx(c2, abs=1e-12)
    assert weight(sp, (labels.index("-"),)) == pytest.approx(1 - c2, abs=1e-12)


def test_von_neumann_branch_vectors_are_product_states():
    c = 0.6 * np.exp(0.4j)
    sp = von_neumann_model(SpinPreparation(c), pointer_dim=3)
    hists, vecs = all_branch_vectors(sp)
    u = evolve(sp.hamiltonian, 1.0)
    plus = u @ vecs[sp.partitions[0].index("+")]
    minus = u @ vecs[sp.partitions[0].index("-")]
    np.testing.assert_allclose(plus, c * np.kron(ket(0, 2), ket(1, 3)), atol=1e-12)
    np.testing.assert_allclose(minus, 0.8 * np.kron(ket(1, 2), ket(2, 3)), atol=1e-12)
    assert weight(sp, (sp.partitions[0].index("o"),)) == pytest.approx(0.0, abs=1e-24)


def test_von_neumann_with_environment_factor():
    env = np.array([1, 1j]) / np.sqrt(2)
    sp = von_neumann_model(SpinPreparation.from_weight(0.3), env_state=env)
    assert sp.dim == 8
    assert weight(sp, (sp.partitions[0].index("+"),)) == pytest.approx(0.3, abs=1e-12)


def test_full_and_record_models_agree():
    prep = SpinPreparation.from_weight(0.7)
    full = repeated_measurement_space(prep, 3, 2, (1.0, 3.0), model="full")
    rec = repeated_measurement_space(prep, 3, 2, (1.0, 3.0), model="record")
    assert full.dim == 64 and rec.dim == 8
    assert full.partitions[0].labels == rec.partitions[0].labels
    for h in rec.histories():
        assert weight(full, h) == pytest.approx(weight(rec, h), abs=1e-12)


def test_outcome_string_weights_match_product_rule():
    c2 = 0.7
    sp = repeated_measurement_space(c2, 4)
    for h, lab in zip(sp.histories(), outcome_labels(4)):
        m = lab.count("+")
        assert weight(sp, h) == pytest.approx(c2**m * (1 - c2) ** (4 - m), abs=1e-12)


def test_exchangeability_n10():
    sp = repeated_measurement_space(0.7, 10)
    assert sp.dim == 1024
    assert exchangeability_spread(sp) < 1e-12
    assert consistency_check(sp).passed


def test_pointer_dim_three_has_other_cell():
    sp = repeated_measurement_space(0.5, 2, pointer_dim=3)
    assert "o" in sp.partitions[0].labels[2]
    assert len(sp.partitions[0]) == 9


def test_frequency_weights_against_binomial_oracle():
    for n, c2 in [(1, 0.3), (10, 0.7), (37, 0.123), (100, 0.5), (400, 0.9)]:
        x = frequency_weights(c2, n)
        np.testing.assert_allclose(x, binom.pmf(np.arange(n + 1), n, c2), atol=1e-12, rtol=1e-10)
        assert x.sum() == pytest.approx(1.0, abs=1e-10)


def test_frequency_edge_weights():
    np.testing.assert_array_equal(frequency_weights(0.0, 3), [1, 0, 0, 0])
    np.testing.assert_array_equal(frequency_weights(1.0, 3), [0, 0, 0, 1])


def test_frequency_distribution_n10_argmax_and_crosscheck():
    dist = frequency_distribution(SpinPreparation.from_weight(0.7), 10)
    assert dist.argmax == 7
    assert dist.crosscheck_deviation < 1e-12
    exact = oracles.binomial_exact(10, Fraction(7, 10))
    np.testing.assert_allclose(dist.weights, [float(v) for v in exact], atol=1e-15)
    np.testing.assert_allclose(enumerated_frequency_weights(0.7, 6), binom.pmf(np.arange(7), 6, 0.7),
                               atol=1e-12)


def test_concentration_n100_exact_rational_oracle():
    exact = oracles.binomial_exact(100, Fraction(1, 2))
    ref = float(sum(exact[40:61]))
    got = concentration_report(SpinPreparation.from_weight(0.5), 100, 0.1)
    assert got == pytest.approx(ref, abs=1e-12)
    assert got >= 0.95


def test_concentration_profile_and_errors():
    prof = concentration_profile(0.5, [10, 100, 1000], 0.1)
    assert prof["concentration"][-1] > 0.99
    with pytest.raises(ValueError):
        concentration_report(0.5, 10, 0.0)


def test_overlap_bound_is_attained_and_bounds_random_vectors():
    rng = np.random.default_rng(0)
    part = pointer_partition(2)
    p1, p2 = part.projector("+"), part.projector("-")
    for _ in range(300):
        y1, y2 = oracles.random_state(rng, 4), oracles.random_state(rng, 4)
        r1 = 1 - np.linalg.norm(p1 @ y1) ** 2
        r2 = 1 - np.linalg.norm(p2 @ y2) ** 2
        assert abs(np.vdot(y1, y2)) <= overlap_bound(r1, r2) + 1e-12
    assert overlap_bound(0.0, 0.0) == 0.0
    assert overlap_bound(1e-6, 1e-6) == pytest.approx(2e-3, rel=1e-3)


def test_no_go_single_candidate_report():
    part = pointer_partition(2)
    p1, p2 = SpinPreparation.from_weight(0.4), SpinPreparation.from_weight(0.6)
    i = math.sqrt(0.4 * 0.6) * 2
    rep = no_go_check(p1, p2, coupling_unitary(2), part)
    assert rep.inner_in == pytest.approx(i, abs=1e-12)
    assert rep.unitarity_ok and rep.cells_orthogonal and rep.impossible_as_claimed
    assert rep.residuals == pytest.approx((0.6, 0.6), abs=1e-12)
    assert rep.bound_respected and not rep.contradiction
    assert rep.required_residual == pytest.approx(i**2 / 4)


def test_targeted_unitary_saturates_unitarity():
    part = pointer_partition(2)
    p1, p2 = SpinPreparation.from_weight(0.4), SpinPreparation.from_weight(0.6)
    u = targeted_unitary(p1, p2, part)
    assert is_unitary(u)
    rep = no_go_check(p1, p2, u, part)
    assert rep.residuals[0] == pytest.approx(0.0, abs=1e-12)
    assert rep.residuals[1] == pytest.approx(rep.inner_in**2, abs=1e-12)


def test_no_go_rejects_non_unitary():
    with pytest.raises(StructureError, match="not unitary"):
        no_go_check(0.4, 0.6, np.eye(4) * 0.5, pointer_partition(2))


def test_no_go_search_seeded_and_passing():
    a = no_go_search((0.4, 0.6), trials=50, seed=3)
    b = no_go_search((0.4, 0.6), trials=50, seed=3)
    assert a == b
    assert a.passed and a.meters_found == 0
    assert a.min_max_residual >= a.required_residual


def test_random_unitary_is_unitary():
    assert is_unitary(random_unitary(6, np.random.default_rng(1)))
