"""Entanglement of formation by convex-roof minimization.

Every m-member pure-state decomposition of omega arises from the
eigen-ensemble {sqrt(l_i) e_i} through an m x rank isometry U
(|phi_j> = sum_i U_ji sqrt(l_i)|e_i>), so the roof is a search over the
Stiefel manifold. The average marginal entropy is computed with the cone
entropy of the unnormalized reduced operators, which keeps the objective
smooth when a member's weight goes to zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .entropic import EntropicInconsistency, binary_entropy, cmi, entropy, shannon_entropy
from .squashed import LOG_FLOOR, _bipartite, _require_normalized, best_index, run_restarts
from .state import (
    DensityOperator,
    LayoutError,
    PureStateVector,
    SystemLayout,
    haar_isometry,
    partial_trace,
    purification_matrix,
)
from .stiefel import OptimizerConfig, polar

DEFAULT_MAX_ENSEMBLE = 16


@dataclass(frozen=True, eq=False)
class PureDecomposition:
    probs: np.ndarray
    members: tuple[PureStateVector, ...]
    converged: bool = True

    def density(self) -> DensityOperator:
        layout = self.members[0].layout
        m = sum(p * np.outer(v.amplitudes, v.amplitudes.conj()) for p, v in zip(self.probs, self.members))
        return DensityOperator(layout, m, check=False)

    def check(self, target: DensityOperator, tol: float = 1e-8) -> None:
        if abs(float(np.sum(self.probs)) - 1) > 1e-10:
            raise ValueError("decomposition weights do not sum to one")
        gap = float(np.max(np.abs(self.density().matrix - target.matrix)))
        if gap > tol:
            raise ValueError(f"decomposition reproduces the target only to {gap:.3e}")

    def average_entanglement(self) -> float:
        a = self.members[0].layout.labels[0]
        return float(sum(p * entropy(partial_trace(v.density(), {a}))
                         for p, v in zip(self.probs, self.members)))

    def to_json(self) -> list:
        return [[float(p), [[float(z.real), float(z.imag)] for z in v.amplitudes]]
                for p, v in zip(self.probs, self.members)]


class _RoofProblem:
    """Objective sum_j H(Tr_B |phi_j><phi_j|) over decompositions phi = U S^T."""

    def __init__(self, omega: DensityOperator, m: int):
        self.a, self.b, self.dA, self.dB = _bipartite(omega)
        self.S = purification_matrix(omega)  # (D, r), columns sqrt(l_i) e_i
        self.r = self.S.shape[1]
        self.m = m

    def _terms(self, U: np.ndarray, grad: bool):
        Phi = (U @ self.S.T).reshape(self.m, self.dA, self.dB)
        rho = Phi @ Phi.conj().transpose(0, 2, 1)
        w, u = np.linalg.eigh(rho)
        w = np.clip(w, 0.0, None)
        val = sum(shannon_entropy(wj) for wj in w)
        if not grad:
            return val, None
        t = np.maximum(w.sum(axis=1), LOG_FLOOR)
        logs = np.log(np.maximum(w, LOG_FLOOR)) - np.log(t)[:, None]
        K = -np.einsum("jik,jk,jlk->jil", u, logs, u.conj())
        X = 2 * (K @ Phi).reshape(self.m, self.dA * self.dB)
        return val, X @ self.S.conj()

    def value(self, U: np.ndarray) -> float:
        return self._terms(U, False)[0]

    def __call__(self, U: np.ndarray):
        return self._terms(U, True)

    def start(self, k: int, seed: int) -> np.ndarray:
        if k == 0:
            return np.eye(self.m, self.r, dtype=np.complex128)
        rng = np.random.default_rng([seed, k])
        return haar_isometry(rng, self.m, self.r)

    def decomposition(self, U: np.ndarray, converged: bool = True) -> PureDecomposition:
        Phi = U @ self.S.T
        p = np.sum(np.abs(Phi) ** 2, axis=1)
        keep = p > 1e-300
        layout = SystemLayout(((self.a, self.dA), (self.b, self.dB)))
        members = tuple(PureStateVector(layout, row / math.sqrt(pj), normalize=True)
                        for row, pj in zip(Phi[keep], p[keep]))
        return PureDecomposition(p[keep] / p[keep].sum(), members, converged)


def default_ensemble_size(omega: DensityOperator) -> int:
    r = omega.rank()
    return max(r, min(r * r, DEFAULT_MAX_ENSEMBLE))


def eof_upper(omega: DensityOperator, m: int | None = None,
              cfg: OptimizerConfig | None = None) -> tuple[float, PureDecomposition]:
    """Best convex-roof value found over decompositions with m members.

    Starts from the eigen-ensemble and ``cfg.restarts`` Haar-random
    isometries; the returned decomposition realizes the value.
    """
    cfg = cfg or OptimizerConfig()
    _require_normalized(omega)
    prob_r = purification_matrix(omega).shape[1]
    m = default_ensemble_size(omega) if m is None else int(m)
    if m < prob_r:
        raise ValueError(f"ensemble size {m} is below rank {prob_r}")
    prob = _RoofProblem(omega, m)
    results = run_restarts(prob, list(range(cfg.restarts + 1)), cfg)
    k = best_index([r.value for r in results])
    U = polar(results[k].V)
    decomp = prob.decomposition(U, results[k].converged)
    return decomp.average_entanglement(), decomp


def classical_extension(decomp: PureDecomposition, e_label: str = "E") -> DensityOperator:
    """sum_j p_j |phi_j><phi_j| (x) |j><j| on AB (x) E."""
    k = len(decomp.members)
    layout = decomp.members[0].layout
    D = layout.total_dim
    W = np.zeros((D * k, D * k), dtype=np.complex128)
    for j, (p, v) in enumerate(zip(decomp.probs, decomp.members)):
        W[j::k, j::k] = p * np.outer(v.amplitudes, v.amplitudes.conj())
    return DensityOperator(SystemLayout(layout.subsystems + ((e_label, k),)), W, check=False)


def eof_via_classical_extension(omega: DensityOperator, m: int | None = None,
                                cfg: OptimizerConfig | None = None) -> float:
    """Half the CMI of the flagged extension built from the best decomposition."""
    value, decomp = eof_upper(omega, m, cfg)
    a, b, _, _ = _bipartite(omega)
    e = next(lab for lab in ("E", "X", "Z") if lab not in omega.labels)
    half_cmi = 0.5 * cmi(classical_extension(decomp, e), a, b, e)
    if abs(half_cmi - value) > 1e-6:
        raise EntropicInconsistency(f"flagged extension gives {half_cmi}, roof value {value}")
    return half_cmi


_YY = np.kron(np.array([[0, -1j], [1j, 0]]), np.array([[0, -1j], [1j, 0]]))


def concurrence(omega: DensityOperator) -> float:
    if omega.layout.dims != (2, 2):
        raise LayoutError(f"concurrence needs a two-qubit state, got dims {omega.layout.dims}")
    rho = omega.matrix / omega.weight
    flipped = _YY @ rho.conj() @ _YY
    w, v = np.linalg.eigh(rho)
    sq = (v * np.sqrt(np.clip(w, 0, None))) @ v.conj().T
    mu = np.sqrt(np.clip(np.linalg.eigvalsh(sq @ flipped @ sq), 0, None))[::-1]
    return float(max(0.0, mu[0] - mu[1] - mu[2] - mu[3]))


def wootters_eof(omega: DensityOperator) -> float:
    """Two-qubit entanglement of formation h2((1 + sqrt(1 - C^2)) / 2), in nats."""
    C = concurrence(omega)
    return binary_entropy(0.5 * (1 + math.sqrt(max(0.0, 1 - C * C))))
