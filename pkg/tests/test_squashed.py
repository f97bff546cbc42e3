import math

import numpy as np
import pytest

from sqent.entropic import cmi, mutual_information
from sqent.models import ModelStateSpec, build_state, classical_decomposition, ladder_projectors
from sqent.squashed import (
    _SquashProblem,
    best_index,
    bounds_sandwich,
    esq_lower,
    esq_sequence,
    esq_upper,
    markov_certificate,
    universal_extension_estimate,
)
from sqent.state import LayoutError, StateError, compress, haar_isometry, partial_trace, random_state
from sqent.stiefel import (
    OptimizerConfig,
    descend,
    finite_difference_gradient,
    is_isometry,
    polar,
    riemannian_gradient,
)

FAST = OptimizerConfig(restarts=4, seed=1)
LOG2 = math.log(2)


def two_qubit(rank, seed):
    return random_state((("A", 2), ("B", 2)), rank, seed)


def test_analytic_gradient_matches_finite_differences():
    omega = two_qubit(3, 0)
    prob = _SquashProblem(omega, 2)
    V = haar_isometry(np.random.default_rng(1), prob.n * prob.dF, prob.dC)
    _, g = prob(V)
    g_fd = finite_difference_gradient(prob.value, V, 1e-6)
    assert np.max(np.abs(g - g_fd)) < 1e-6


def test_polar_retraction_gives_isometry():
    X = np.random.default_rng(2).standard_normal((6, 3))
    assert is_isometry(polar(X))


def test_riemannian_gradient_is_tangent():
    rng = np.random.default_rng(3)
    V = haar_isometry(rng, 5, 2)
    G = riemannian_gradient(V, rng.standard_normal((5, 2)) + 1j * rng.standard_normal((5, 2)))
    sym = V.conj().T @ G
    assert np.allclose(sym + sym.conj().T, 0, atol=1e-12)


def test_descent_minimizes_rayleigh_quotient():
    # min Re Tr(V^dag A V) over isometries = sum of the smallest eigenvalues
    rng = np.random.default_rng(4)
    A = rng.standard_normal((6, 6))
    A = A + A.T
    f = lambda V: (float(np.real(np.trace(V.conj().T @ A @ V))), 2 * A @ V)
    res = descend(f, haar_isometry(rng, 6, 2), OptimizerConfig())
    assert res.value == pytest.approx(np.sort(np.linalg.eigvalsh(A))[:2].sum(), abs=1e-8)
    assert res.converged


def test_best_index_prefers_lowest_on_tie():
    assert best_index([1.0, 0.5, 0.5, 0.7]) == 1


def test_bell_state():
    bell = build_state(ModelStateSpec("bell"))
    val, cert = esq_upper(bell, 2, FAST)
    assert val == pytest.approx(LOG2, abs=1e-6)
    assert esq_lower(bell) == pytest.approx(LOG2, abs=1e-12)


def test_upper_bounded_by_half_mutual_information_and_certified():
    omega = two_qubit(3, 5)
    val, cert = esq_upper(omega, 2, FAST)
    assert 0 <= val <= 0.5 * mutual_information(omega, "A", "B") + 1e-12
    cert.check(omega)
    assert cert.value == pytest.approx(val)
    assert cert.channel is not None and is_isometry(cert.channel.isometry)
    kraus = cert.channel.kraus()
    assert np.allclose(sum(K.conj().T @ K for K in kraus), np.eye(cert.channel.d_c))
    assert len(cert.restart_values) == FAST.restarts + 2


def test_deterministic_and_thread_independent():
    omega = two_qubit(3, 6)
    a = esq_upper(omega, 2, OptimizerConfig(restarts=3, seed=9))[0]
    b = esq_upper(omega, 2, OptimizerConfig(restarts=3, seed=9))[0]
    c = esq_upper(omega, 2, OptimizerConfig(restarts=3, seed=9, threads=2))[0]
    assert a == b == c


def test_finite_difference_mode_agrees():
    omega = two_qubit(2, 7)
    cfg = OptimizerConfig(restarts=1, seed=0, max_iterations=60)
    fd = esq_upper(omega, 2, OptimizerConfig(restarts=1, seed=0, max_iterations=60, gradient="finite-difference"))[0]
    an = esq_upper(omega, 2, cfg)[0]
    assert fd == pytest.approx(an, abs=1e-3)


def test_sequence_nonincreasing():
    omega = build_state(ModelStateSpec("werner", 0.8))
    rows = esq_sequence(omega, 3, FAST)
    vals = [r["value"] for r in rows]
    assert all(b <= a for a, b in zip(vals, vals[1:]))
    assert rows[0]["raw"] == pytest.approx(0.5 * mutual_information(omega, "A", "B"))


def test_markov_certificate_for_classical_state():
    omega = build_state(ModelStateSpec("classical-correlated", None, 4))
    cert = markov_certificate(classical_decomposition(omega))
    assert cert.provenance == "analytic-markov"
    assert cert.cmi_value < 1e-12
    cert.check(omega)


def test_markov_certificate_rejects_bad_weights():
    omega = build_state(ModelStateSpec("classical-correlated", None, 3))
    dec = classical_decomposition(omega)
    bad = [(2 * p, a, b) for p, a, b in dec]
    with pytest.raises(ValueError):
        markov_certificate(bad)


def test_requires_bipartite_normalized():
    with pytest.raises(LayoutError):
        esq_upper(random_state((("A", 2), ("B", 2), ("C", 2)), seed=1), 2, FAST)
    with pytest.raises(StateError):
        esq_upper(two_qubit(2, 1).scaled(0.5), 2, FAST)


def test_dimension_bound_holds_on_optimizer_output():
    omega = two_qubit(4, 11)
    _, cert = esq_upper(omega, 2, FAST)
    assert cert.cmi_value >= mutual_information(omega, "A", "B") - 4 * LOG2


def test_monotone_under_compression():
    omega = random_state((("A", 3), ("B", 2)), 3, 12)
    P = ladder_projectors(3, [2], "A")[0]
    w = compress(omega, [P], renormalize=True)
    assert esq_upper(w, 2, FAST)[0] <= esq_upper(omega, 2, FAST)[0] + 2e-2


def test_universal_extension_estimate_running_sup():
    omega = build_state(ModelStateSpec("tmsv", 0.5, 4))
    la = ladder_projectors(4, [1, 2, 4], "A")
    lb = ladder_projectors(4, [1, 2, 4], "B")
    rows = universal_extension_estimate(omega, la, lb, 2, FAST)
    est = [r["estimate"] for r in rows]
    assert all(b >= a for a, b in zip(est, est[1:]))
    assert rows[-1]["trace"] == pytest.approx(1.0)


def test_sandwich_werner():
    rec = bounds_sandwich(build_state(ModelStateSpec("werner", 0.8)), 2, FAST, 4)
    assert rec["lower"] <= rec["upper_optimized"] + 1e-6
    assert rec["upper_optimized"] <= rec["upper_trivial"] + 1e-12
    assert rec["upper_optimized"] <= rec["upper_formation"] + 1e-3
