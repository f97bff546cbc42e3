import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sqent.entropic import binary_entropy, entropy, theta
from sqent.energy import (
    BETA_MIN,
    HamiltonianSpectrum,
    UnattainableEnergy,
    cmi_continuity_bound,
    delta_entropy_product,
    em_continuity_bound,
    energy_truncation_projector,
    fannes_cmi_bound,
    finite_dim_esq_bound,
    gibbs_entropy,
    gibbs_probabilities,
    gibbs_state,
    mean_energy,
    optimized_bound,
    oscillator_beta,
    oscillator_entropy,
    regularized_bound,
    solve_beta,
    tightness_witness,
)
from sqent.state import DensityOperator, compress, random_state

TAIL = HamiltonianSpectrum.oscillator(1, tail=True)


def test_spectrum_validation():
    with pytest.raises(ValueError):
        HamiltonianSpectrum([1.0, 2.0])
    with pytest.raises(ValueError):
        HamiltonianSpectrum([0.0, 2.0, 1.0])
    with pytest.raises(ValueError):
        HamiltonianSpectrum([0.0, 2.0], "oscillator", geometric_tail=True)


@pytest.mark.parametrize("E", [0.1, 0.5, 1.0, 2.0, 10.0])
def test_tail_oscillator_closed_forms(E):
    assert solve_beta(TAIL, E) == pytest.approx(math.log1p(1 / E), abs=1e-12)
    assert gibbs_entropy(TAIL, E) == pytest.approx(oscillator_entropy(E), abs=1e-12)
    assert oscillator_beta(E) == pytest.approx(math.log1p(1 / E))


@pytest.mark.parametrize("E", [0.5, 1.0, 3.0])
def test_finite_oscillator_converges_to_closed_form(E):
    spec = HamiltonianSpectrum.oscillator_for_energy(E)
    assert gibbs_entropy(spec, E) == pytest.approx(oscillator_entropy(E), abs=1e-9)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.05, 1.9))
def test_bisection_hits_requested_energy(E):
    spec = HamiltonianSpectrum([0.0, 0.5, 1.5, 3.0])
    if E >= mean_energy(spec, BETA_MIN):
        assert gibbs_entropy(spec, E) == pytest.approx(math.log(4))
        return
    beta = solve_beta(spec, E)
    assert mean_energy(spec, beta) == pytest.approx(E, abs=1e-10)
    p = gibbs_probabilities(spec, E)
    assert p.sum() == pytest.approx(1.0)


def test_gibbs_entropy_is_maximal_under_constraint():
    spec = HamiltonianSpectrum.oscillator(6)
    rng = np.random.default_rng(0)
    E = 1.0
    h = gibbs_entropy(spec, E)
    for _ in range(200):
        p = rng.dirichlet(np.ones(6) * 0.5)
        if p @ spec.levels <= E:
            assert -np.sum(p[p > 0] * np.log(p[p > 0])) <= h + 1e-12


def test_unattainable_energy():
    spec = HamiltonianSpectrum.oscillator(4)
    with pytest.raises(UnattainableEnergy):
        solve_beta(spec, 0.0)
    with pytest.raises(UnattainableEnergy):
        solve_beta(spec, 5.0)


def test_tail_spectrum_not_materialized():
    with pytest.raises(ValueError):
        gibbs_state(TAIL, 1.0)


def test_cmi_bound_terms():
    eps, ep, E = 0.05, 0.3, 1.0
    rep = cmi_continuity_bound(TAIL, E, eps, ep)
    delta = (ep - eps) / (1 + ep)
    assert rep.delta == pytest.approx(delta)
    assert rep.term("entropy") == pytest.approx((2 * ep + 4 * delta) * oscillator_entropy(E / delta))
    assert rep.term("theta") == pytest.approx(4 * (1 + ep) * binary_entropy(ep / (1 + ep)))
    assert rep.term("delta") == pytest.approx(4 * binary_entropy(delta))
    assert rep.total == pytest.approx(sum(v for _, v in rep.terms))
    with pytest.raises(ValueError):
        cmi_continuity_bound(TAIL, E, 0.3, 0.3)


def test_em_bound_terms():
    eps, ep, E = 0.01, 0.5, 2.0
    rep = em_continuity_bound(TAIL, E, eps, ep)
    delta = (ep - 0.1) / (1 + ep)
    assert rep.delta == pytest.approx(delta)
    assert rep.term("entropy") == pytest.approx((ep + 2 * delta) * oscillator_entropy(E / delta))
    assert rep.term("theta") == pytest.approx(2 * theta(ep))
    assert rep.term("delta") == pytest.approx(2 * binary_entropy(delta))
    with pytest.raises(ValueError):
        em_continuity_bound(TAIL, E, eps, 0.1)


def test_regularized_bound_single_copy_matches():
    assert regularized_bound(TAIL, 1.0, 0.01, 1, 0.5) == pytest.approx(
        em_continuity_bound(TAIL, 1.0, 0.01, 0.5).total)
    # per-copy bound decreases towards the entropy term as n grows
    vals = [regularized_bound(TAIL, 1.0, 0.01, n, 0.5) for n in (1, 2, 10)]
    assert vals[0] > vals[1] > vals[2]


def test_finite_dimensional_bounds():
    assert finite_dim_esq_bound(4, 0.04) == pytest.approx(0.2 * math.log(4) + 2 * theta(0.2))
    assert fannes_cmi_bound(3, 0.1) == pytest.approx(0.2 * math.log(3) + 4 * theta(0.1))
    assert finite_dim_esq_bound(2, 0.0) == 0.0


def test_vanishing_entropy_term():
    vals = [delta_entropy_product(TAIL, 1.0, 10.0 ** -k) for k in range(1, 7)]
    assert all(a > b for a, b in zip(vals, vals[1:]))
    assert vals[-1] < 1e-3


def test_energy_truncation_estimates():
    # Tr P omega >= 1 - delta, H(omega_<=) <= H(gamma(E/delta)) and log rank P <= H(gamma(E/delta))
    spec = HamiltonianSpectrum.oscillator(10)
    H = np.diag(spec.levels)
    rng = np.random.default_rng(5)
    for _ in range(100):
        w = random_state((("A", 10),), int(rng.integers(1, 11)), rng)
        E = float(np.real(np.trace(H @ w.matrix)))
        delta = float(rng.uniform(0.05, 0.9))
        P = energy_truncation_projector(spec, E / delta, "A")
        c = compress(w, [P])
        h_cut = gibbs_entropy(spec, E / delta)
        assert c.weight >= 1 - delta - 1e-12
        assert entropy(c.normalized()) <= h_cut + 1e-10
        assert math.log(P.rank) <= h_cut + 1e-10


@pytest.mark.parametrize("eps", [0.05, 0.1, 0.2])
def test_tightness_witness(eps):
    spec = HamiltonianSpectrum.oscillator(12)
    w = tightness_witness(spec, 1.0, eps)
    assert w.gap == pytest.approx(2 * eps * gibbs_entropy(spec, 1.0), abs=1e-8)
    assert w.half_trace_distance <= eps + 1e-10
    assert w.bound is not None and w.gap <= w.bound.total
    assert isinstance(w.rho, DensityOperator)


def test_witness_bound_absent_when_eps_not_below_eps_prime():
    w = tightness_witness(HamiltonianSpectrum.oscillator(6), 0.5, 0.2, eps_prime=0.2)
    assert w.bound is None


def test_optimized_bound_is_minimal_and_monotone():
    totals = []
    for eps in (0.01, 0.05, 0.1, 0.2):
        best = optimized_bound("cmi", TAIL, 1.0, eps)
        assert eps < best.eps_prime <= 1
        for ep in (0.3, 0.6, 1.0):
            if ep > eps:
                assert best.total <= cmi_continuity_bound(TAIL, 1.0, eps, ep).total + 1e-12
        totals.append(best.total)
    assert all(a <= b for a, b in zip(totals, totals[1:]))
    em = optimized_bound("em", TAIL, 1.0, 0.01)
    assert em.eps_prime > 0.1
