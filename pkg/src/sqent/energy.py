"""Gibbs states of a Hamiltonian spectrum and energy-constrained continuity bounds.

Spectra are given by their lowest levels (ground energy 0). An oscillator
spectrum may be marked ``geometric_tail``: the listed levels are then a
prefix of the infinite ladder 0, 1, 2, ... and every sum includes the
closed-form geometric remainder, so Z, the mean energy and the entropy are
those of the untruncated oscillator. Finite spectra are genuine finite
Hamiltonians and can be materialized as density matrices.

Trace-distance conventions differ between the two main bounds:
``cmi_continuity_bound`` takes eps = (1/2)||rho - sigma||_1, while
``em_continuity_bound`` takes eps = ||omega2 - omega1||_1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .entropic import binary_entropy, cmi, shannon_entropy, theta
from .state import DensityOperator, LocalProjector, SystemLayout, tensor, trace_distance

BETA_MIN = 1e-8
BETA_MAX = 1e8


class UnattainableEnergy(ValueError):
    """The requested mean energy is outside the range reachable for beta in [1e-8, 1e8]."""


@dataclass(frozen=True, eq=False)
class HamiltonianSpectrum:
    levels: np.ndarray
    model: str | None = None
    geometric_tail: bool = False

    def __post_init__(self):
        lv = np.asarray(self.levels, dtype=float).reshape(-1)
        if lv.size == 0:
            raise ValueError("spectrum needs at least one level")
        if abs(lv[0]) > 1e-12:
            raise ValueError(f"ground energy must be 0, got {lv[0]}")
        if np.any(np.diff(lv) < 0):
            raise ValueError("levels must be nondecreasing")
        if self.geometric_tail and (self.model != "oscillator" or not np.allclose(lv, np.arange(lv.size))):
            raise ValueError("geometric tail requires oscillator levels 0, 1, ..., d-1")
        lv.setflags(write=False)
        object.__setattr__(self, "levels", lv)

    @classmethod
    def oscillator(cls, d: int, tail: bool = False) -> "HamiltonianSpectrum":
        return cls(np.arange(d, dtype=float), "oscillator", tail)

    @classmethod
    def oscillator_for_energy(cls, E_max: float, tail_tol: float = 1e-12) -> "HamiltonianSpectrum":
        """Finite oscillator whose Gibbs tail mass at energy E_max is below tail_tol."""
        lam = E_max / (E_max + 1.0)
        d = int(math.ceil(math.log(tail_tol) / math.log(lam))) + 1
        return cls.oscillator(max(d, 2))

    @property
    def dim(self) -> int:
        return int(self.levels.size)

    def tail_mass(self, beta: float) -> float:
        """Infinite-oscillator Gibbs weight beyond the listed levels (0 for other models)."""
        if self.model != "oscillator":
            return 0.0
        return math.exp(-beta * self.dim)


def _check_beta(beta: float):
    if not beta > 0:
        raise ValueError(f"beta must be positive, got {beta}")


def _tail_sums(spec: HamiltonianSpectrum, beta: float) -> tuple[float, float]:
    """Sum_{k>=d} x^k and sum_{k>=d} k x^k for x = exp(-beta)."""
    if not spec.geometric_tail:
        return 0.0, 0.0
    d = spec.dim
    x = math.exp(-beta)
    one_minus_x = -math.expm1(-beta)
    xd = math.exp(-beta * d)
    return xd / one_minus_x, xd * (d - (d - 1) * x) / one_minus_x**2


def partition_function(spec: HamiltonianSpectrum, beta: float) -> float:
    _check_beta(beta)
    return float(np.sum(np.exp(-beta * spec.levels))) + _tail_sums(spec, beta)[0]


def mean_energy(spec: HamiltonianSpectrum, beta: float) -> float:
    _check_beta(beta)
    w = np.exp(-beta * spec.levels)
    z_tail, e_tail = _tail_sums(spec, beta)
    return (float(np.dot(spec.levels, w)) + e_tail) / (float(np.sum(w)) + z_tail)


def solve_beta(spec: HamiltonianSpectrum, E: float) -> float:
    """Inverse temperature with mean energy E, by bisection on log(beta) over [1e-8, 1e8]."""
    if not E > 0:
        raise UnattainableEnergy(f"energy must be positive, got {E}")
    hi_E = mean_energy(spec, BETA_MIN)
    lo_E = mean_energy(spec, BETA_MAX)
    if not lo_E < E < hi_E:
        raise UnattainableEnergy(
            f"E = {E} outside the attainable range ({lo_E:.6g}, {hi_E:.6g}) of this spectrum")
    lo, hi = math.log(BETA_MIN), math.log(BETA_MAX)
    # mean energy decreases in beta; run to machine resolution
    for _ in range(400):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        if mean_energy(spec, math.exp(mid)) > E:
            lo = mid
        else:
            hi = mid
    beta = math.exp(0.5 * (lo + hi))
    resid = abs(mean_energy(spec, beta) - E)
    if resid > 1e-10 * max(1.0, E):
        raise ArithmeticError(f"bisection residual {resid:.3e} above tolerance")
    return beta


def gibbs_probabilities(spec: HamiltonianSpectrum, E: float) -> np.ndarray:
    """Gibbs weights of the listed levels (normalized by the full partition function)."""
    beta = solve_beta(spec, E)
    return np.exp(-beta * spec.levels) / partition_function(spec, beta)


def gibbs_state(spec: HamiltonianSpectrum, E: float, label: str = "A") -> DensityOperator:
    if spec.geometric_tail:
        raise ValueError("an untruncated spectrum cannot be materialized; use a finite truncation")
    p = gibbs_probabilities(spec, E)
    return DensityOperator(SystemLayout(((label, spec.dim),)), np.diag(p), check=False)


def gibbs_entropy(spec: HamiltonianSpectrum, E: float) -> float:
    """H(gamma(E)); with a geometric tail this is beta E + log Z of the full oscillator.

    For a finite spectrum, E at or above the infinite-temperature mean energy
    gives log d: the maximally mixed state then satisfies the constraint.
    """
    if not spec.geometric_tail and E >= mean_energy(spec, BETA_MIN):
        return math.log(spec.dim)
    if spec.geometric_tail:
        beta = solve_beta(spec, E)
        return beta * E + math.log(partition_function(spec, beta))
    # the Gibbs state is diagonal, so its von Neumann entropy is the Shannon entropy of p
    return shannon_entropy(gibbs_probabilities(spec, E))


def oscillator_beta(E: float) -> float:
    """Closed form log(1 + 1/E) for the unit-spacing oscillator."""
    return math.log1p(1.0 / E)


def oscillator_entropy(E: float) -> float:
    """Closed form (E + 1) log(E + 1) - E log E."""
    return (E + 1) * math.log1p(E) - E * math.log(E)


@dataclass
class BoundReport:
    kind: str
    eps: float
    eps_prime: float
    delta: float
    energy: float
    terms: list[tuple[str, float]] = field(default_factory=list)

    @property
    def total(self) -> float:
        return math.fsum(v for _, v in self.terms)

    def term(self, name: str) -> float:
        return dict(self.terms)[name]

    def to_dict(self) -> dict:
        return {
            "bound": self.kind,
            "eps": self.eps,
            "eps_prime": self.eps_prime,
            "delta": self.delta,
            "E": self.energy,
            "terms": {k: v for k, v in self.terms},
            "total": self.total,
        }


def cmi_continuity_bound(spec: HamiltonianSpectrum, E: float, eps: float, eps_prime: float) -> BoundReport:
    """Bound on |I(A:C|B)_rho - I(A:C|B)_sigma| for (1/2)||rho - sigma||_1 <= eps, energy of A <= E.

    (2 eps' + 4 delta) H(gamma(E/delta)) + 4 (1+eps') h2(eps'/(1+eps')) + 4 h2(delta),
    delta = (eps' - eps) / (1 + eps').
    """
    if not 0 <= eps < eps_prime <= 1:
        raise ValueError(f"need 0 <= eps < eps' <= 1, got eps={eps}, eps'={eps_prime}")
    delta = (eps_prime - eps) / (1 + eps_prime)
    h = gibbs_entropy(spec, E / delta)
    return BoundReport("cmi", eps, eps_prime, delta, E, [
        ("entropy", (2 * eps_prime + 4 * delta) * h),
        ("theta", 4 * theta(eps_prime)),
        ("delta", 4 * binary_entropy(delta)),
    ])


def em_continuity_bound(spec: HamiltonianSpectrum, E: float, eps: float, eps_prime: float) -> BoundReport:
    """Common bound for squashed entanglement and entanglement of formation.

    eps = ||omega2 - omega1||_1 < 1, eps' in (sqrt(eps), 1],
    delta = (eps' - sqrt(eps)) / (1 + eps').
    """
    if not 0 <= eps < 1:
        raise ValueError(f"need 0 <= eps < 1, got {eps}")
    r = math.sqrt(eps)
    if not r < eps_prime <= 1:
        raise ValueError(f"need sqrt(eps) < eps' <= 1, got sqrt(eps)={r}, eps'={eps_prime}")
    delta = (eps_prime - r) / (1 + eps_prime)
    h = gibbs_entropy(spec, E / delta)
    return BoundReport("em", eps, eps_prime, delta, E, [
        ("entropy", (eps_prime + 2 * delta) * h),
        ("theta", 2 * theta(eps_prime)),
        ("delta", 2 * binary_entropy(delta)),
    ])


def regularized_bound(spec: HamiltonianSpectrum, E: float, eps: float, n: int, eps_prime: float) -> float:
    """Per-copy bound for n copies: the n-fold Gibbs entropy is n H(gamma(E/delta))."""
    if n < 1:
        raise ValueError("number of copies must be >= 1")
    rep = em_continuity_bound(spec, E, eps, eps_prime)
    return (n * rep.term("entropy") + rep.term("theta") + rep.term("delta")) / n


def finite_dim_esq_bound(d_a: int, eps: float) -> float:
    """sqrt(eps) log d_A + 2 (1 + sqrt(eps)) h2(sqrt(eps) / (1 + sqrt(eps))), eps = ||.||_1."""
    if d_a < 2 or not 0 <= eps < 1:
        raise ValueError(f"need d_A >= 2 and 0 <= eps < 1, got d_A={d_a}, eps={eps}")
    r = math.sqrt(eps)
    return r * math.log(d_a) + 2 * theta(r)


def fannes_cmi_bound(d: int, eps_prime: float) -> float:
    """2 eps' log d + 4 (1 + eps') h2(eps' / (1 + eps'))."""
    if d < 1 or not 0 <= eps_prime <= 1:
        raise ValueError(f"need d >= 1 and eps' in [0, 1], got d={d}, eps'={eps_prime}")
    return 2 * eps_prime * math.log(d) + 4 * theta(eps_prime)


def optimized_bound(kind: str, spec: HamiltonianSpectrum, E: float, eps: float,
                    points: int = 400) -> BoundReport:
    """The cmi or em bound minimized over eps' on a grid of the admissible interval.

    Admissible eps' is (eps, 1] for the cmi bound and (sqrt(eps), 1] for the
    em bound; the grid is geometric towards the lower end, where the
    minimum usually sits for small eps.
    """
    fns = {"cmi": (cmi_continuity_bound, eps), "em": (em_continuity_bound, math.sqrt(max(eps, 0.0)))}
    if kind not in fns:
        raise ValueError(f"unknown bound {kind!r}; choose cmi or em")
    fn, lo = fns[kind]
    if not 0 <= lo < 1:
        raise ValueError(f"no admissible eps' for eps = {eps}")
    gaps = np.geomspace(1e-6, 1.0, points) * (1.0 - lo)
    best = None
    for ep in lo + gaps:
        rep = fn(spec, E, eps, float(min(ep, 1.0)))
        if best is None or rep.total < best.total:
            best = rep
    return best


def energy_truncation_projector(spec: HamiltonianSpectrum, cutoff: float, label: str = "A") -> LocalProjector:
    """Projector onto the listed levels with energy <= cutoff."""
    if cutoff < 0:
        raise ValueError("cutoff must be nonnegative")
    return LocalProjector.onto_levels(label, spec.dim, np.flatnonzero(spec.levels <= cutoff))


def delta_entropy_product(spec: HamiltonianSpectrum, E: float, delta: float) -> float:
    """delta * H(gamma(E / delta)), which vanishes as delta -> 0 for admissible spectra."""
    return delta * gibbs_entropy(spec, E / delta)


@dataclass(frozen=True, eq=False)
class TightnessWitness:
    rho: DensityOperator
    sigma: DensityOperator
    gap: float
    expected_gap: float
    half_trace_distance: float
    bound: BoundReport


def tightness_witness(spec: HamiltonianSpectrum, E: float, eps: float, dim_b: int = 2,
                      dim_c: int | None = None, eps_prime: float = 1.0) -> TightnessWitness:
    """The pair rho = gamma (x) tau_B (x) tau_C, sigma = (1-eps) rho + eps phi_AC (x) tau'_B.

    phi_AC purifies the Gibbs state and tau_B, tau'_B are orthogonal, so the
    CMI gap I(A:C|B)_sigma - I(A:C|B)_rho equals 2 eps H(gamma(E)).
    """
    if not 0 <= eps < 1:
        raise ValueError(f"need eps in [0, 1), got {eps}")
    gamma = gibbs_state(spec, E)
    p = np.real(np.diag(gamma.matrix))
    d_a = spec.dim
    dim_c = d_a if dim_c is None else dim_c
    if dim_b < 2:
        raise ValueError("B must have dimension >= 2 to host orthogonal pure states")
    if dim_c < int(np.sum(p > 0)):
        raise ValueError(f"C of dimension {dim_c} cannot purify a Gibbs state of rank {int(np.sum(p > 0))}")

    def proj(label, d, k):
        m = np.zeros((d, d))
        m[k, k] = 1.0
        return DensityOperator(SystemLayout(((label, d),)), m, check=False)

    rho = tensor(tensor(gamma, proj("B", dim_b, 0)), proj("C", dim_c, 0))
    phi = np.zeros((d_a, dim_c), dtype=np.complex128)
    phi[np.arange(d_a), np.arange(d_a)] = np.sqrt(p)
    phi_ac = DensityOperator(SystemLayout((("A", d_a), ("C", dim_c))),
                             np.outer(phi.reshape(-1), phi.reshape(-1).conj()), check=False)
    flagged = tensor(phi_ac, proj("B", dim_b, 1))
    sigma = DensityOperator(rho.layout, (1 - eps) * rho.matrix + eps * flagged.matrix, check=False)
    gap = cmi(sigma, "A", "C", "B") - cmi(rho, "A", "C", "B")
    h = gibbs_entropy(spec, E)
    expected = 2 * eps * h
    if abs(gap - expected) > 1e-8:
        raise ArithmeticError(f"witness gap {gap} differs from 2 eps H(gamma) = {expected}")
    half_td = 0.5 * trace_distance(rho, sigma)
    if half_td > eps + 1e-10:
        raise ArithmeticError(f"witness pair is at half trace distance {half_td} > eps = {eps}")
    bound = cmi_continuity_bound(spec, E, eps, eps_prime) if eps < eps_prime else None
    return TightnessWitness(rho, sigma, gap, expected, half_td, bound)
