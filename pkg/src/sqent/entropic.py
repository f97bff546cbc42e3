"""Entropic functionals on the cone of positive operators (natural logs).

Every quantity here is homogeneous of degree one, so sub-normalized
operators produced by local compressions can be fed in directly.
"""

from __future__ import annotations

import math
from typing import Iterable, Sequence

import numpy as np

from .state import (
    DensityOperator,
    LayoutError,
    LocalProjector,
    apply_local,
    partial_trace,
)

SUPPORT_TOL = 1e-10
CMI_AGREEMENT_TOL = 1e-8
CMI_NEGATIVE_TOL = 1e-9


class EntropicInconsistency(ArithmeticError):
    """Equivalent formulas disagreed beyond tolerance, or a nonnegative quantity went negative."""


def eta(x):
    """eta(x) = -x log x with eta(0) = 0, elementwise."""
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    pos = x > 0
    out[pos] = -x[pos] * np.log(x[pos])
    return out if out.ndim else float(out)


def shannon_entropy(p) -> float:
    """Cone extension sum eta(p_i) - eta(sum p_i) of the Shannon entropy."""
    p = np.asarray(p, dtype=float)
    if p.size and p.min() < -SUPPORT_TOL:
        raise ValueError(f"negative weight {p.min():.3e}")
    p = np.clip(p, 0.0, None)
    val = float(np.sum(eta(p)) - eta(float(np.sum(p))))
    return max(val, 0.0) if val > -1e-10 else val


def entropy(rho: DensityOperator) -> float:
    """Von Neumann entropy H(rho) = Tr eta(rho) - eta(Tr rho)."""
    return shannon_entropy(rho.eigvals())


def entropy_of_matrix(m: np.ndarray) -> float:
    return shannon_entropy(np.linalg.eigvalsh(m))


def binary_entropy(lam: float) -> float:
    if not 0.0 <= lam <= 1.0:
        raise ValueError(f"binary entropy needs lambda in [0, 1], got {lam}")
    return float(eta(lam) + eta(1.0 - lam))


def theta(x: float) -> float:
    """(1 + x) h2(x / (1 + x)) for x >= 0."""
    if x < 0:
        raise ValueError(f"theta needs x >= 0, got {x}")
    return (1.0 + x) * binary_entropy(x / (1.0 + x))


def _support_split(m: np.ndarray, tol: float = SUPPORT_TOL):
    w, v = np.linalg.eigh(m)
    inside = w > tol
    return w[inside], v[:, inside], v[:, ~inside]


def relative_entropy(rho: DensityOperator, sigma: DensityOperator) -> float:
    """H(rho || sigma) = Tr(rho log rho - rho log sigma + sigma - rho); +inf off support."""
    if rho.layout != sigma.layout:
        raise LayoutError("relative entropy needs states on the same layout")
    ws, vs, vperp = _support_split(sigma.matrix)
    if vperp.shape[1]:
        leak = vperp.conj().T @ rho.matrix @ vperp
        if np.max(np.abs(leak), initial=0.0) > SUPPORT_TOL:
            return math.inf
    wr = np.clip(np.linalg.eigvalsh(rho.matrix), 0.0, None)
    tr_rho_log_rho = -float(np.sum(eta(wr)))
    rho_in = vs.conj().T @ rho.matrix @ vs
    tr_rho_log_sigma = float(np.real(np.sum(np.diag(rho_in) * np.log(ws))))
    val = tr_rho_log_rho - tr_rho_log_sigma + sigma.weight - rho.weight
    return max(val, 0.0) if val > -1e-10 else val


class _Marginals:
    """Per-call cache of marginal entropies keyed by label sets."""

    def __init__(self, omega: DensityOperator):
        self.omega = omega
        self._cache: dict[frozenset, float] = {}

    def H(self, labels: Iterable[str]) -> float:
        key = frozenset(labels)
        if not key:
            return 0.0
        if key not in self._cache:
            self._cache[key] = entropy(partial_trace(self.omega, key))
        return self._cache[key]

    def mi(self, a: Iterable[str], b: Iterable[str]) -> float:
        a, b = frozenset(a), frozenset(b)
        if not a or not b:
            return 0.0
        return self.H(a) + self.H(b) - self.H(a | b)


def _labels(x) -> frozenset:
    if isinstance(x, str):
        return frozenset([x])
    return frozenset(x)


def _check_disjoint(omega: DensityOperator, *parts: frozenset, cover: bool = True):
    seen: set = set()
    for p in parts:
        for lab in p:
            omega.layout.index(lab)
        if seen & p:
            raise LayoutError(f"label sets overlap: {sorted(seen & p)}")
        seen |= p
    if cover and seen != set(omega.labels):
        raise LayoutError(f"label sets {sorted(seen)} do not partition layout {omega.labels}")


def mutual_information(omega: DensityOperator, part_a, part_b, *, method: str = "entropy") -> float:
    """I(A:B) for a partition of the layout into two nonempty label sets.

    ``method="relative"`` evaluates H(omega || omega_A x omega_B) on the
    normalized state and rescales by the trace; ``"entropy"`` uses
    H(A) + H(B) - H(AB). The two agree in finite dimensions.
    """
    a, b = _labels(part_a), _labels(part_b)
    if not a or not b:
        raise LayoutError("both parts must be nonempty")
    _check_disjoint(omega, a, b)
    if method == "relative":
        from .state import tensor
        t = omega.weight
        w = omega.normalized()
        prod = tensor(partial_trace(w, a), partial_trace(w, b))
        return t * relative_entropy(w, prod)
    if method != "entropy":
        raise ValueError(f"unknown method {method!r}")
    return max(_Marginals(omega).mi(a, b), 0.0)


def conditional_entropy(omega: DensityOperator, of, given) -> float:
    """Extended conditional entropy H(A) - I(A:B), checked against H(AB) - H(B)."""
    a, b = _labels(of), _labels(given)
    _check_disjoint(omega, a, b)
    m = _Marginals(omega)
    val = m.H(a) - m.mi(a, b)
    direct = m.H(a | b) - m.H(b)
    if abs(val - direct) > 1e-9:
        raise EntropicInconsistency(f"conditional entropy forms disagree: {val} vs {direct}")
    return val


def cmi_forms(omega: DensityOperator, a, b, e=()) -> tuple[float, float, float]:
    """The three equivalent finite-dimensional expressions for I(A:B|E)."""
    a, b, e = _labels(a), _labels(b), _labels(e)
    m = _Marginals(omega)
    direct = m.H(a | e) + m.H(b | e) - m.H(e) - m.H(a | b | e)
    chain = m.mi(a, b | e) - m.mi(a, e)
    four = m.mi(a, b) - m.mi(a, e) - m.mi(b, e) + m.mi(a | b, e)
    return direct, chain, four


def cmi(omega: DensityOperator, a, b, e=(), *, check: bool = True) -> float:
    """Conditional mutual information I(A:B|E); E empty gives I(A:B).

    All three equivalent forms are evaluated and must agree to 1e-8;
    values in [-1e-9, 0) are clipped to zero, more negative ones raise.
    """
    a, b, e = _labels(a), _labels(b), _labels(e)
    if not a or not b:
        raise LayoutError("A and B must be nonempty")
    _check_disjoint(omega, a, b, e)
    direct, chain, four = cmi_forms(omega, a, b, e)
    if check:
        spread = max(direct, chain, four) - min(direct, chain, four)
        if spread > CMI_AGREEMENT_TOL:
            raise EntropicInconsistency(f"CMI forms disagree by {spread:.3e}")
    if direct < -CMI_NEGATIVE_TOL:
        raise EntropicInconsistency(f"negative conditional mutual information {direct:.3e}")
    return max(direct, 0.0)


def cmi_truncated_sequence(omega: DensityOperator, a, b, e, projectors: Sequence[LocalProjector]) -> list[float]:
    """I(A:BE) - I(A:E) of the unnormalized compressions Q omega Q, one per projector.

    Projectors act on a single label of A and must have nested ranges.
    """
    a, b, e = _labels(a), _labels(b), _labels(e)
    _check_disjoint(omega, a, b, e)
    for P in projectors:
        if P.target not in a:
            raise LayoutError(f"projector target {P.target!r} is not part of A")
    for P, Q in zip(projectors, projectors[1:]):
        if P.target != Q.target or np.max(np.abs(Q.matrix @ P.matrix - P.matrix)) > 1e-10:
            raise ValueError("projector sequence must be increasing (nested ranges)")
    out = []
    for P in projectors:
        # keep the full local dimension so marginals stay comparable
        Qw = apply_local(omega, P.target, P.matrix)
        m = _Marginals(Qw)
        out.append(m.mi(a, b | e) - m.mi(a, e))
    return out


__all__ = [
    "eta", "shannon_entropy", "entropy", "binary_entropy", "theta",
    "relative_entropy", "mutual_information", "conditional_entropy",
    "cmi", "cmi_forms", "cmi_truncated_sequence", "EntropicInconsistency",
]
