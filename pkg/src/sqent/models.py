"""Model states and truncation experiments.

Families: the two-mode squeezed vacuum in truncated Schmidt form, a
classically correlated state sum_k pi_k |kk><kk| with the heavy tail
pi_k ~ 1 / ((k+1) log^s(k+2)) (normalizable for s > 1, infinite Shannon
entropy for s <= 2), and the standard two-qubit Werner, isotropic and
Bell states.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

from .entropic import mutual_information, shannon_entropy
from .formation import eof_upper
from .squashed import esq_lower, esq_upper, markov_certificate
from .state import DensityOperator, LocalProjector, SystemLayout, compress
from .stiefel import OptimizerConfig

FAMILIES = ("tmsv", "classical-correlated", "werner", "isotropic", "bell")


@dataclass(frozen=True)
class ModelStateSpec:
    family: str
    param: float | None = None
    truncation_dim: int = 2

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}; choose from {FAMILIES}")
        if self.family == "tmsv" and not (self.param is not None and 0 < self.param < 1):
            raise ValueError("tmsv needs lambda in (0, 1)")
        if self.family in ("werner", "isotropic") and not (self.param is not None and 0 <= self.param <= 1):
            raise ValueError(f"{self.family} needs p in [0, 1]")
        if self.family == "classical-correlated":
            if self.truncation_dim < 2:
                raise ValueError("classical-correlated needs d >= 2")
            if self.param is not None and self.param <= 1:
                raise ValueError("tail exponent must exceed 1")
        if self.family in ("werner", "isotropic", "bell") and self.truncation_dim != 2:
            object.__setattr__(self, "truncation_dim", 2)

    def to_dict(self) -> dict:
        return asdict(self)


def heavy_tail_weights(d: int, exponent: float = 2.0) -> np.ndarray:
    k = np.arange(d, dtype=float)
    w = 1.0 / ((k + 1) * np.log(k + 2) ** exponent)
    return w / w.sum()


def tmsv_weights(lam: float, d: int) -> np.ndarray:
    w = lam ** np.arange(d, dtype=float)
    return w / w.sum()


def _two_qubit(m: np.ndarray) -> DensityOperator:
    return DensityOperator(SystemLayout((("A", 2), ("B", 2))), m)


def _projector(v: np.ndarray) -> np.ndarray:
    v = np.asarray(v, dtype=np.complex128) / np.linalg.norm(v)
    return np.outer(v, v.conj())


def build_state(spec: ModelStateSpec) -> DensityOperator:
    fam, d = spec.family, spec.truncation_dim
    if fam == "bell":
        return _two_qubit(_projector([1, 0, 0, 1]))
    if fam == "werner":
        p = spec.param
        return _two_qubit(p * _projector([0, 1, -1, 0]) + (1 - p) * np.eye(4) / 4)
    if fam == "isotropic":
        p = spec.param
        return _two_qubit(p * _projector([1, 0, 0, 1]) + (1 - p) * np.eye(4) / 4)
    layout = SystemLayout((("A", d), ("B", d)))
    if fam == "tmsv":
        c = np.sqrt(tmsv_weights(spec.param, d))
        v = np.zeros(d * d, dtype=np.complex128)
        v[np.arange(d) * (d + 1)] = c
        return DensityOperator(layout, np.outer(v, v.conj()))
    pi = heavy_tail_weights(d, 2.0 if spec.param is None else spec.param)
    m = np.zeros((d * d, d * d))
    m[np.arange(d) * (d + 1), np.arange(d) * (d + 1)] = pi
    return DensityOperator(layout, m)


def classical_decomposition(omega: DensityOperator) -> list[tuple[float, DensityOperator, DensityOperator]]:
    """Product decomposition of a state diagonal in the |kk> basis (classically correlated)."""
    dA, dB = omega.layout.dims
    diag = np.real(np.diag(omega.matrix)).reshape(dA, dB)
    terms = []
    for k in range(min(dA, dB)):
        if diag[k, k] <= 0:
            continue
        ra = np.zeros((dA, dA)); ra[k, k] = 1.0
        rb = np.zeros((dB, dB)); rb[k, k] = 1.0
        terms.append((diag[k, k], DensityOperator((("A", dA),), ra, check=False),
                      DensityOperator((("B", dB),), rb, check=False)))
    total = sum(p for p, _, _ in terms)
    return [(p / total, a, b) for p, a, b in terms]


def ladder_projectors(dim: int, ranks: Sequence[int], label: str) -> list[LocalProjector]:
    return [LocalProjector.onto_levels(label, dim, range(r)) for r in ranks]


def convergence_run(spec: ModelStateSpec, ladder_ranks: Sequence[int], n: int,
                    cfg: OptimizerConfig | None = None, m: int | None = None) -> list[dict]:
    """Measures of the renormalized compressions P_r (x) P_r omega P_r (x) P_r along a rank ladder.

    For the classically correlated family the optimizer value is
    complemented by the Markov extension of the compressed state.
    """
    ranks = list(ladder_ranks)
    if any(r2 <= r1 for r1, r2 in zip(ranks, ranks[1:])):
        raise ValueError("ladder ranks must be increasing")
    if ranks and (ranks[0] < 1 or ranks[-1] > spec.truncation_dim):
        raise ValueError(f"ladder ranks must lie in [1, {spec.truncation_dim}]")
    omega = build_state(spec)
    d = spec.truncation_dim
    rows = []
    for r in ranks:
        Pa = LocalProjector.onto_levels("A", d, range(r))
        Pb = LocalProjector.onto_levels("B", d, range(r))
        w = compress(omega, [Pa, Pb])
        t = w.weight
        w = w.normalized()
        upper, cert = esq_upper(w, n, cfg)
        source = cert.provenance
        if spec.family == "classical-correlated":
            mk = markov_certificate(classical_decomposition(w))
            if mk.value < upper:
                upper, source = mk.value, mk.provenance
        rows.append({
            "rank": r,
            "trace": t,
            "mutual_information": mutual_information(w, "A", "B"),
            "esq_lower": esq_lower(w),
            "esq_upper": upper,
            "esq_source": source,
            "eof_upper": eof_upper(w, m, cfg)[0],
        })
    return rows


def dichotomy_probe(d: int, n_list: Sequence[int], exponent: float = 2.0) -> list[dict]:
    """Dimension-limited lower bound against the d-dimensional Markov certificate.

    Any extension with dim E = n has I(A:B|E) >= I(A:B) - 4 log n, giving
    lower = max(0, (I - 4 log n) / 2); the certified upper value is the
    Markov extension with dim E = d, reported for rows with n >= d.
    """
    spec = ModelStateSpec("classical-correlated", exponent, d)
    omega = build_state(spec)
    mi = mutual_information(omega, "A", "B")
    cert = markov_certificate(classical_decomposition(omega))
    rows = []
    for n in n_list:
        if n < 1:
            raise ValueError("extension dimensions must be >= 1")
        rows.append({
            "d": d,
            "n": n,
            "mutual_information": mi,
            "shannon_entropy": shannon_entropy(heavy_tail_weights(d, exponent)),
            "lower": max(0.0, 0.5 * (mi - 4 * math.log(n))),
            "raw_lower": 0.5 * (mi - 4 * math.log(n)),
            "certified_upper": cert.value if n >= d else None,
        })
    return rows
