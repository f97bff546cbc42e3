"""Descent on the complex Stiefel manifold {V : V^dagger V = I}.

Used by both the squashing-channel search and the convex-roof search.
The objective returns its value and the Euclidean gradient with respect
to the real inner product Re Tr(X^dagger Y).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

Objective = Callable[[np.ndarray], tuple[float, np.ndarray]]


@dataclass
class OptimizerConfig:
    restarts: int = 8
    max_iterations: int = 2000
    step_tol: float = 1e-9
    value_tol: float = 1e-12
    seed: int = 0
    gradient: str = "analytic"  # or "finite-difference"
    fd_step: float = 1e-5
    threads: int = 1

    def __post_init__(self):
        if self.restarts < 1:
            raise ValueError("restarts must be >= 1")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.gradient not in ("analytic", "finite-difference"):
            raise ValueError(f"unknown gradient mode {self.gradient!r}")


@dataclass
class DescentResult:
    V: np.ndarray
    value: float
    iterations: int
    converged: bool
    history: list[float] = field(default_factory=list)


def polar(X: np.ndarray) -> np.ndarray:
    """Closest isometry to X (polar factor), the retraction used after each step."""
    u, _, vh = np.linalg.svd(X, full_matrices=False)
    return u @ vh


def is_isometry(V: np.ndarray, tol: float = 1e-9) -> bool:
    return bool(np.max(np.abs(V.conj().T @ V - np.eye(V.shape[1]))) <= tol)


def riemannian_gradient(V: np.ndarray, egrad: np.ndarray) -> np.ndarray:
    sym = V.conj().T @ egrad
    return egrad - V @ (0.5 * (sym + sym.conj().T))


def finite_difference_gradient(f: Callable[[np.ndarray], float], V: np.ndarray, h: float = 1e-5) -> np.ndarray:
    """Central differences over real and imaginary parts of every entry."""
    g = np.zeros_like(V, dtype=np.complex128)
    for idx in np.ndindex(V.shape):
        for unit in (1.0, 1j):
            dV = np.zeros_like(V, dtype=np.complex128)
            dV[idx] = unit * h
            d = (f(V + dV) - f(V - dV)) / (2 * h)
            g[idx] += unit * d
    return g


def with_fd_gradient(f: Callable[[np.ndarray], float], h: float) -> Objective:
    return lambda V: (f(V), finite_difference_gradient(f, V, h))


def descend(objective: Objective, V0: np.ndarray, cfg: OptimizerConfig,
            trace: Callable[[int, float], None] | None = None) -> DescentResult:
    """Riemannian gradient descent with Armijo backtracking and polar retraction.

    The trial step length starts from a Barzilai-Borwein estimate; the run
    stops once the gradient norm drops below ``step_tol`` or the value
    stalls (relative change below ``value_tol``) for five iterations.
    """
    V = polar(V0)
    f, eg = objective(V)
    g = riemannian_gradient(V, eg)
    history = [f]
    if trace is not None:
        trace(0, f)
    t = 1.0
    stall = 0
    prev_V = prev_g = None
    converged = False
    it = 0
    for it in range(1, cfg.max_iterations + 1):
        gn2 = float(np.real(np.vdot(g, g)))
        if np.sqrt(gn2) < cfg.step_tol:
            converged = True
            break
        if prev_V is not None:
            s = V - prev_V
            y = g - prev_g
            sy = abs(float(np.real(np.vdot(s, y))))
            if sy > 1e-30:
                t = float(np.real(np.vdot(s, s))) / sy
        t = min(max(t, 1e-8), 1e3)
        while True:
            V_try = polar(V - t * g)
            f_try, eg_try = objective(V_try)
            if f_try <= f - 1e-4 * t * gn2 or t < 1e-14:
                break
            t *= 0.5
        if f_try > f:
            # no descent even at the smallest step: treat as a stationary point
            converged = True
            break
        prev_V, prev_g = V, g
        decrease = f - f_try
        V, f = V_try, f_try
        g = riemannian_gradient(V, eg_try)
        history.append(f)
        if trace is not None:
            trace(it, f)
        if decrease <= cfg.value_tol * max(1.0, abs(f)):
            stall += 1
            if stall >= 5:
                converged = True
                break
        else:
            stall = 0
    return DescentResult(V=V, value=f, iterations=it, converged=converged, history=history)
