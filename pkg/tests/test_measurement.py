import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qeraser.hilbert import Ket, Register, basis_ket, equal_up_to_global_phase, tensor
from qeraser.measurement import (
    ImpossibleOutcomeError,
    NotOrthonormalError,
    Outcome,
    OutcomeDistribution,
    ProjectiveMeasurement,
    RegisterConflictError,
    UnknownOutcomeError,
    collapse,
    conditional_probability,
    distribution,
    joint_probability,
    order_independence_report,
    outcome_probability,
    random_measurement,
    random_orthonormal,
    random_state,
    sequential_joint,
)
from qeraser.optics import (
    ENV,
    SYS_PORT,
    circular_basis,
    elliptical_basis,
    elliptical_route_state,
    env_analyzer,
    full_eraser_state,
    system_detectors,
)

from conftest import random_ket, reg


def brute_joint(state: Ket, measA, K, measB, L) -> float:
    """|<a|<b|psi>|^2 via explicit projectors on the full space (two-register states only)."""
    assert len(state.layout) == 2
    first, second = (measA, measB) if state.layout[0].name == measA.register.name else (measB, measA)
    k1, k2 = (K, L) if first is measA else (L, K)
    P1 = sum(np.outer(v, v.conj()) for v in first.outcome(k1).vectors)
    P2 = sum(np.outer(v, v.conj()) for v in second.outcome(k2).vectors)
    proj = np.kron(P1, P2)
    psi = state.amplitudes
    return float(np.real(psi.conj() @ proj @ psi))


def brute_marginal(state: Ket, meas, K) -> float:
    ops = []
    for r in state.layout:
        if r.name == meas.register.name:
            ops.append(sum(np.outer(v, v.conj()) for v in meas.outcome(K).vectors))
        else:
            ops.append(np.eye(r.dim))
    full = ops[0]
    for op in ops[1:]:
        full = np.kron(full, op)
    psi = state.amplitudes
    return float(np.real(psi.conj() @ full @ psi))


def test_measurement_validation():
    with pytest.raises(NotOrthonormalError):
        ProjectiveMeasurement(ENV, (Outcome("x", "D1", [[1, 0]]),))
    with pytest.raises(NotOrthonormalError):
        ProjectiveMeasurement(ENV, (Outcome("x", "D1", [[1, 0]]), Outcome("y", "D2", [[1, 1]])))


def test_unknown_outcome():
    with pytest.raises(UnknownOutcomeError):
        outcome_probability(full_eraser_state(0.1), system_detectors(), "D7")


def test_port_marginal_is_half():
    psi = elliptical_route_state(0.9)
    assert outcome_probability(psi, system_detectors(), "D3") == pytest.approx(0.5, abs=1e-12)
    assert outcome_probability(psi, system_detectors(), "3") == pytest.approx(0.5, abs=1e-12)


def test_basis_ket_in_own_basis():
    m = ProjectiveMeasurement.from_basis(circular_basis())
    r = circular_basis().ket("R")
    assert outcome_probability(r, m, "R") == pytest.approx(1, abs=1e-12)
    assert outcome_probability(r, m, "L") == pytest.approx(0, abs=1e-12)


def test_choice1_R_probability_at_quarter_period():
    # (1/2) sin^2 a + (1/2) cos^2 a = 1/2
    psi = full_eraser_state(np.pi / 2)
    assert outcome_probability(psi, env_analyzer(1), "R") == pytest.approx(0.5, abs=1e-12)


def test_completeness(rng):
    for _ in range(50):
        a, b = reg("a", int(rng.integers(2, 5))), reg("b", int(rng.integers(2, 5)))
        psi = random_state((a, b), rng)
        for r in (a, b):
            m = random_measurement(r, rng)
            assert sum(outcome_probability(psi, m, o) for o in m.labels) == pytest.approx(1, abs=1e-12)


def test_marginal_matches_brute_force(rng):
    for _ in range(30):
        a, b, c = reg("a", 2), reg("b", 3), reg("c", 2)
        psi = random_state((a, b, c), rng)
        m = random_measurement(b, rng)
        for o in m.labels:
            assert outcome_probability(psi, m, o) == pytest.approx(brute_marginal(psi, m, o), abs=1e-12)


def test_collapse_to_E_and_E_perp():
    for th in (0.0, 0.7, -1.9, np.pi / 2):
        psi = elliptical_route_state(th)
        be = elliptical_basis(th)
        post = collapse(psi, system_detectors(), "D3")
        assert equal_up_to_global_phase(post, tensor(be.ket("E"), basis_ket(SYS_PORT, "3")), 1e-12)
        post = collapse(psi, system_detectors(), "D4")
        assert equal_up_to_global_phase(post, tensor(be.ket("E_perp"), basis_ket(SYS_PORT, "4")), 1e-12)


def test_collapse_repeatability_on_elliptical_basis():
    for th in np.linspace(-np.pi, np.pi, 37):
        post = collapse(elliptical_route_state(th), system_detectors(), "D3")
        m = ProjectiveMeasurement.from_basis(elliptical_basis(th))
        assert 1 - outcome_probability(post, m, "E") < 1e-12


def test_collapse_product_state(rng):
    a, b = reg("a", 3), reg("b", 2)
    x, y = random_ket(rng, a), random_ket(rng, b)
    m = random_measurement(b, rng)
    post = collapse(tensor(x, y), m, m.labels[0])
    expected = tensor(x, Ket((b,), m.outcome(m.labels[0]).vectors[0]))
    assert equal_up_to_global_phase(post, expected, 1e-12)


def test_collapse_impossible_outcome():
    psi = full_eraser_state(np.pi / 2)
    m = env_analyzer(1)
    post = collapse(psi, system_detectors(), "D3")
    with pytest.raises(ImpossibleOutcomeError):
        collapse(post, m, "L")


def test_collapse_idempotent(rng):
    for _ in range(20):
        a, b = reg("a", 3), reg("b", 3)
        psi = random_state((a, b), rng)
        m = random_measurement(a, rng)
        for o in m.labels:
            post = collapse(psi, m, o)
            assert outcome_probability(post, m, o) == pytest.approx(1, abs=1e-12)


def test_joint_probability_values():
    psi = full_eraser_state(np.pi / 2)
    env, sys_ = env_analyzer(1), system_detectors()
    assert joint_probability(psi, env, "R", sys_, "D3") == pytest.approx(0.5, abs=1e-12)
    assert joint_probability(psi, env, "D1", sys_, "D3") == pytest.approx(0.5, abs=1e-12)
    assert joint_probability(psi, env, "L", sys_, "D3") == pytest.approx(0, abs=1e-12)


@pytest.mark.parametrize("theta", np.linspace(-np.pi, np.pi, 9))
def test_choice0_all_quarter(theta):
    psi = elliptical_route_state(theta)
    env, sys_ = env_analyzer(0), system_detectors()
    for e, s in itertools.product(("D1", "D2"), ("D3", "D4")):
        assert joint_probability(psi, env, e, sys_, s) == pytest.approx(0.25, abs=1e-12)


def test_joint_symmetric_and_brute(rng):
    for _ in range(30):
        a, b = reg("a", int(rng.integers(2, 5))), reg("b", int(rng.integers(2, 5)))
        psi = random_state((a, b), rng)
        ma, mb = random_measurement(a, rng), random_measurement(b, rng)
        for K, L in itertools.product(ma.labels, mb.labels):
            p = joint_probability(psi, ma, K, mb, L)
            assert p == pytest.approx(joint_probability(psi, mb, L, ma, K), abs=1e-15)
            assert p == pytest.approx(brute_joint(psi, ma, K, mb, L), abs=1e-12)


def test_joint_same_register():
    m = system_detectors()
    with pytest.raises(RegisterConflictError):
        joint_probability(full_eraser_state(0), m, "D3", m, "D4")


def test_sequential_examples():
    psi = full_eraser_state(np.pi / 2)
    env, sys_ = env_analyzer(1), system_detectors()
    assert conditional_probability(psi, (env, "R"), (sys_, "D3")) == pytest.approx(1, abs=1e-12)
    assert sequential_joint(psi, (env, "R"), (sys_, "D3")) == pytest.approx(0.5, abs=1e-12)
    assert conditional_probability(psi, (sys_, "D3"), (env, "R")) == pytest.approx(1, abs=1e-12)
    assert sequential_joint(psi, (sys_, "D3"), (env, "R")) == pytest.approx(0.5, abs=1e-12)


def test_sequential_impossible_first_is_zero():
    psi = tensor(basis_ket(ENV, "H"), basis_ket(SYS_PORT, "3"))
    assert sequential_joint(psi, (system_detectors(), "D4"), (env_analyzer(0), "D1")) == 0.0
    assert conditional_probability(psi, (system_detectors(), "D4"), (env_analyzer(0), "D1")) == 0.0


def test_degenerate_outcome():
    r = Register("q", ("0", "1", "2"))
    m = ProjectiveMeasurement(r, (
        Outcome("low", "Dlow", [[1, 0, 0], [0, 1, 0]]),
        Outcome("high", "Dhigh", [[0, 0, 1]]),
    ))
    psi = Ket((r,), np.array([1, 1, 1]) / np.sqrt(3))
    assert outcome_probability(psi, m, "low") == pytest.approx(2 / 3)
    post = collapse(psi, m, "low")
    assert np.allclose(post.amplitudes, np.array([1, 1, 0]) / np.sqrt(2))


def test_order_report_eraser_grid():
    for th in np.linspace(-np.pi, np.pi, 181):
        psi = full_eraser_state(th)
        rep = order_independence_report(psi, env_analyzer(1), system_detectors())
        assert rep.passed and rep.max_deviation < 1e-12
        assert len(rep.rows) == 4


def test_order_report_product_state(rng):
    a, b = reg("a", 3), reg("b", 4)
    psi = tensor(random_ket(rng, a), random_ket(rng, b))
    rep = order_independence_report(psi, random_measurement(a, rng), random_measurement(b, rng))
    assert rep.max_deviation < 1e-15


def test_order_report_flags_violation():
    psi = full_eraser_state(0.3)
    rep = order_independence_report(psi, env_analyzer(1), system_detectors(), tol=-1.0)
    assert not rep.passed and len(rep.violations) == 4


def test_random_orthonormal_is_unitary(rng):
    for d in (2, 3, 4):
        q = random_orthonormal(d, rng)
        assert np.allclose(q @ q.conj().T, np.eye(d), atol=1e-12)


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), da=st.integers(2, 4), db=st.integers(2, 4))
def test_order_independence_property(seed, da, db):
    rng = np.random.default_rng(seed)
    a, b = reg("a", da), reg("b", db)
    psi = random_state((a, b), rng)
    rep = order_independence_report(psi, random_measurement(a, rng), random_measurement(b, rng))
    assert rep.max_deviation < 1e-12


def test_distribution_keys_and_validation():
    d = distribution(full_eraser_state(0.4), system_detectors())
    assert d.labels == ("D3", "D4")
    assert sum(d.probabilities) == pytest.approx(1, abs=1e-12)
    with pytest.raises(ValueError):
        OutcomeDistribution(("a", "b"), (0.5, 0.6))
