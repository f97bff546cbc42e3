"""Squashed entanglement with a bounded-dimension extension system.

Extensions of omega_AB are generated from its minimal purification
omega_ABC by a squashing channel on C, written in Stinespring form as an
isometry V : C -> E (x) F with dim E = n and dim F = n * dim C. Every
channel C -> E fits in that environment, so the search space is exactly
the set of extensions with dim E <= n, and the marginal on AB is correct
by construction.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .entropic import EntropicInconsistency, cmi, entropy, mutual_information, shannon_entropy
from .state import (
    DensityOperator,
    LayoutError,
    LocalProjector,
    StateError,
    SystemLayout,
    compress,
    haar_isometry,
    partial_trace,
    purification_matrix,
    tensor,
)
from .stiefel import OptimizerConfig, descend, is_isometry, polar, with_fd_gradient

log = logging.getLogger(__name__)

LOG_FLOOR = 1e-15

TraceSink = Callable[[int, int, float], None]


@dataclass(frozen=True, eq=False)
class SquashingChannel:
    isometry: np.ndarray
    d_c: int
    d_e: int
    d_f: int

    def __post_init__(self):
        V = self.isometry
        if V.shape != (self.d_e * self.d_f, self.d_c):
            raise ValueError(f"isometry shape {V.shape} != ({self.d_e * self.d_f}, {self.d_c})")
        if not is_isometry(V, 1e-9):
            raise ValueError("squashing channel is not an isometry")

    def kraus(self) -> list[np.ndarray]:
        """Kraus operators C -> E, one per environment basis vector."""
        t = self.isometry.reshape(self.d_e, self.d_f, self.d_c)
        return [t[:, f, :] for f in range(self.d_f)]


@dataclass(frozen=True, eq=False)
class ExtensionCertificate:
    extension: DensityOperator
    cmi_value: float
    provenance: str  # "optimizer" | "analytic-markov" | "trivial"
    channel: SquashingChannel | None = None
    restart_values: tuple[float, ...] = ()
    converged: bool = True

    def check(self, target: DensityOperator | None = None, tol: float = 1e-8,
              a: str = "A", b: str = "B", e: str = "E") -> None:
        """Verify the marginal on AB and the recorded CMI value; raise on failure."""
        if target is not None:
            red = partial_trace(self.extension, {a, b})
            gap = float(np.max(np.abs(red.matrix - target.matrix)))
            if gap > tol:
                raise StateError(f"extension marginal deviates from target by {gap:.3e}")
        val = cmi(self.extension, a, b, e)
        if abs(val - self.cmi_value) > tol:
            raise EntropicInconsistency(f"recorded CMI {self.cmi_value} != recomputed {val}")

    @property
    def value(self) -> float:
        return 0.5 * self.cmi_value


def _bipartite(omega: DensityOperator) -> tuple[str, str, int, int]:
    if len(omega.labels) != 2:
        raise LayoutError(f"expected a bipartite state, got labels {omega.labels}")
    a, b = omega.labels
    return a, b, omega.layout.dim(a), omega.layout.dim(b)


def _require_normalized(omega: DensityOperator):
    if abs(omega.weight - 1) > 1e-10:
        raise StateError(f"state must be normalized (trace {omega.weight})")


def _ext_label(omega: DensityOperator) -> str:
    for cand in ("E", "X", "Z"):
        if cand not in omega.labels:
            return cand
    raise LayoutError("no free label for the extension system")


def _entropy_and_log(m: np.ndarray) -> tuple[float, np.ndarray]:
    w, u = np.linalg.eigh(m)
    w = np.clip(w, 0.0, None)
    L = (u * np.log(np.maximum(w, LOG_FLOOR))) @ u.conj().T
    return shannon_entropy(w), L


def cmi_with_gradient(W: np.ndarray, dA: int, dB: int, dE: int) -> tuple[float, np.ndarray]:
    """I(A:B|E) of the matrix W on A (x) B (x) E and its derivative dI/dW.

    The derivative G satisfies dI = Re Tr(G dW) for Hermitian dW.
    """
    T = W.reshape(dA, dB, dE, dA, dB, dE)
    w_ae = np.einsum("abeAbE->aeAE", T).reshape(dA * dE, dA * dE)
    w_be = np.einsum("abeaBE->beBE", T).reshape(dB * dE, dB * dE)
    w_e = np.einsum("abeabE->eE", T)
    h_abe, L_abe = _entropy_and_log(W)
    h_ae, L_ae = _entropy_and_log(w_ae)
    h_be, L_be = _entropy_and_log(w_be)
    h_e, L_e = _entropy_and_log(w_e)
    val = h_ae + h_be - h_e - h_abe
    Ia, Ib = np.eye(dA), np.eye(dB)
    G = L_abe.reshape(dA, dB, dE, dA, dB, dE).copy()
    G -= np.einsum("aeAE,bB->abeABE", L_ae.reshape(dA, dE, dA, dE), Ib)
    G -= np.einsum("aA,beBE->abeABE", Ia, L_be.reshape(dB, dE, dB, dE))
    G += np.einsum("aA,bB,eE->abeABE", Ia, Ib, L_e)
    D = dA * dB * dE
    return val, G.reshape(D, D)


class _SquashProblem:
    """Objective 1/2 I(A:B|E) as a function of the Stinespring isometry."""

    def __init__(self, omega: DensityOperator, n: int):
        self.a, self.b, self.dA, self.dB = _bipartite(omega)
        self.n = n
        self.Psi = purification_matrix(omega)  # (dA*dB, dC)
        self.dC = self.Psi.shape[1]
        self.dF = self.dC * n

    def extension_matrix(self, V: np.ndarray) -> np.ndarray:
        M = (self.Psi @ V.T).reshape(self.dA * self.dB * self.n, self.dF)
        W = M @ M.conj().T
        return 0.5 * (W + W.conj().T)

    def value(self, V: np.ndarray) -> float:
        W = self.extension_matrix(V)
        return 0.5 * cmi_with_gradient(W, self.dA, self.dB, self.n)[0]

    def __call__(self, V: np.ndarray) -> tuple[float, np.ndarray]:
        M = (self.Psi @ V.T).reshape(self.dA * self.dB * self.n, self.dF)
        W = M @ M.conj().T
        val, G = cmi_with_gradient(0.5 * (W + W.conj().T), self.dA, self.dB, self.n)
        Y = (G @ M).reshape(self.dA * self.dB, self.n * self.dF)
        return 0.5 * val, Y.T @ self.Psi.conj()

    def trivial_start(self) -> np.ndarray:
        V = np.zeros((self.n * self.dF, self.dC), dtype=np.complex128)
        for c in range(self.dC):
            V[c, c] = 1.0  # e = 0, f = c
        return V

    def diagonal_start(self) -> np.ndarray:
        # the purifying basis diagonalizes omega_C; copy its index into E and F
        V = np.zeros((self.n * self.dF, self.dC), dtype=np.complex128)
        for c in range(self.dC):
            V[(c % self.n) * self.dF + c, c] = 1.0
        return V

    def start(self, k: int, seed: int) -> np.ndarray:
        if k == 0:
            return self.trivial_start()
        if k == 1:
            return self.diagonal_start()
        rng = np.random.default_rng([seed, k])
        return haar_isometry(rng, self.n * self.dF, self.dC)


def run_restarts(problem, starts: Sequence[int], cfg: OptimizerConfig,
                 trace: TraceSink | None = None):
    """Run one descent per start index; returns results ordered by index."""
    objective = problem
    if cfg.gradient == "finite-difference":
        objective = with_fd_gradient(problem.value, cfg.fd_step)

    def one(k):
        sink = None if trace is None else (lambda it, v, k=k: trace(k, it, v))
        return descend(objective, problem.start(k, cfg.seed), cfg, sink)

    if cfg.threads > 1 and len(starts) > 1:
        with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
            results = list(pool.map(one, starts))
    else:
        results = [one(k) for k in starts]
    return results


def best_index(values: Sequence[float]) -> int:
    """Index of the minimum; ties go to the lowest index."""
    best = 0
    for k, v in enumerate(values):
        if v < values[best]:
            best = k
    return best


def _embed(omega: DensityOperator, label: str, dim: int) -> DensityOperator:
    e0 = np.zeros((dim, dim))
    e0[0, 0] = 1.0
    return tensor(omega, DensityOperator(SystemLayout(((label, dim),)), e0, check=False))


def esq_upper(omega: DensityOperator, n: int, cfg: OptimizerConfig | None = None,
              trace: TraceSink | None = None) -> tuple[float, ExtensionCertificate]:
    """Upper estimate of the squashed entanglement with dim E <= n.

    Runs the two structured starts (trivial channel, channel diagonal in the
    eigenbasis of omega_C) followed by ``cfg.restarts`` Haar-random
    isometries, and returns half the smallest CMI found together with the
    extension that realizes it. n = 1 is evaluated analytically.
    """
    cfg = cfg or OptimizerConfig()
    _require_normalized(omega)
    if n < 1:
        raise ValueError("extension dimension n must be >= 1")
    a, b, dA, dB = _bipartite(omega)
    e = _ext_label(omega)
    mi = mutual_information(omega, a, b)
    if n == 1:
        ext = _embed(omega, e, 1)
        return 0.5 * mi, ExtensionCertificate(ext, mi, "trivial")

    prob = _SquashProblem(omega, n)
    starts = list(range(cfg.restarts + 2))
    results = run_restarts(prob, starts, cfg, trace)
    values = [r.value for r in results]
    k = best_index(values)
    V = polar(results[k].V)
    channel = SquashingChannel(V, prob.dC, n, prob.dF)
    W = prob.extension_matrix(V)
    layout = SystemLayout(((a, dA), (b, dB), (e, n)))
    ext = DensityOperator(layout, W, check=False)
    c = cmi(ext, a, b, e)
    # bounded-dimension extensions cannot remove more than 4 log n of correlation
    if c < mi - 4 * math.log(n) - 1e-8:
        raise EntropicInconsistency(f"CMI {c} below the dimension bound {mi - 4 * math.log(n)}")
    if not results[k].converged:
        log.warning("esq_upper: best restart stopped at max_iterations")
    cert = ExtensionCertificate(ext, c, "optimizer", channel, tuple(0.5 * v for v in values),
                                results[k].converged)
    return 0.5 * c, cert


def esq_sequence(omega: DensityOperator, n_max: int, cfg: OptimizerConfig | None = None) -> list[dict]:
    """esq_upper for n = 1..n_max; ``value`` is the running minimum of ``raw``."""
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    rows = []
    best = math.inf
    for n in range(1, n_max + 1):
        raw, _ = esq_upper(omega, n, cfg)
        best = min(best, raw)
        rows.append({"n": n, "value": best, "raw": raw})
    return rows


def esq_lower(omega: DensityOperator) -> float:
    """max(0, I(A:B)/2 - H(AB)), valid for extensions of any dimension."""
    _require_normalized(omega)
    a, b, _, _ = _bipartite(omega)
    return max(0.0, 0.5 * mutual_information(omega, a, b) - entropy(omega))


def markov_certificate(decomposition: Sequence[tuple[float, DensityOperator, DensityOperator]],
                       e_label: str = "E") -> ExtensionCertificate:
    """Extension sum_i p_i rho_i (x) sigma_i (x) |i><i| of a separable decomposition."""
    probs = np.array([p for p, _, _ in decomposition], dtype=float)
    if np.any(probs < -1e-12) or abs(probs.sum() - 1) > 1e-10:
        raise ValueError("decomposition weights must form a probability vector")
    for _, r, s in decomposition:
        if abs(r.weight - 1) > 1e-10 or abs(s.weight - 1) > 1e-10:
            raise StateError("decomposition members must be normalized")
    k = len(decomposition)
    terms = []
    for i, (p, r, s) in enumerate(decomposition):
        flag = np.zeros((k, k))
        flag[i, i] = 1.0
        terms.append(p * np.kron(np.kron(r.matrix, s.matrix), flag))
    _, r0, s0 = decomposition[0]
    layout = SystemLayout(r0.layout.subsystems + s0.layout.subsystems + ((e_label, k),))
    ext = DensityOperator(layout, sum(terms), check=False)
    a = r0.labels
    b = s0.labels
    return ExtensionCertificate(ext, cmi(ext, a, b, e_label), "analytic-markov")


def universal_extension_estimate(omega: DensityOperator, ladder_a: Sequence[LocalProjector],
                                 ladder_b: Sequence[LocalProjector], n: int,
                                 cfg: OptimizerConfig | None = None) -> list[dict]:
    """Running supremum of Tr(w) * esq_upper(w / Tr w) over compressions w along the ladders."""
    if len(ladder_a) != len(ladder_b):
        raise ValueError("ladders on A and B must have the same length")
    for ladder in (ladder_a, ladder_b):
        for P, Q in zip(ladder, ladder[1:]):
            if P.rank > Q.rank or np.max(np.abs(Q.matrix @ P.matrix - P.matrix)) > 1e-10:
                raise ValueError("projector ladders must be increasing")
    rows = []
    sup = 0.0
    for step, (Pa, Pb) in enumerate(zip(ladder_a, ladder_b)):
        w = compress(omega, [Pa, Pb])
        t = w.weight
        if t < 1e-12:
            val = 0.0
        else:
            val = t * esq_upper(w.normalized(), n, cfg)[0]
        sup = max(sup, val)
        rows.append({"step": step, "trace": t, "value": val, "estimate": sup})
    return rows


def bounds_sandwich(omega: DensityOperator, n: int, cfg: OptimizerConfig | None = None,
                    m: int | None = None) -> dict:
    """Lower bound, trivial upper bound, optimized upper bound and formation upper bound."""
    from .formation import eof_upper

    a, b, _, _ = _bipartite(omega)
    lower = esq_lower(omega)
    trivial = 0.5 * mutual_information(omega, a, b)
    optimized = min(esq_upper(omega, n, cfg)[0], trivial)
    formation = eof_upper(omega, m, cfg)[0]
    rec = {"lower": lower, "upper_trivial": trivial,
           "upper_optimized": optimized, "upper_formation": formation}
    if lower > min(trivial, optimized, formation) + 1e-6:
        raise EntropicInconsistency(f"lower bound exceeds an upper bound: {rec}")
    return rec
