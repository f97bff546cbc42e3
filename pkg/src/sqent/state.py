"""Dense multipartite states: layouts, tensor products, partial traces,
purification, local compression and the trace norm.

Layouts are kept in canonical (sorted-label) order so that every marginal
has a single unambiguous matrix representation.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

HERMITIAN_TOL = 1e-10
PSD_FLOOR = 1e-10
TRACE_TOL = 1e-10
RANK_TOL = 1e-12


class LayoutError(ValueError):
    """Raised for unknown, duplicated or mismatched subsystem labels."""


class StateError(ValueError):
    """Raised when a matrix violates the density-operator invariants."""


class StateFormatError(StateError):
    """A serialized state is structurally malformed."""


@dataclass(frozen=True)
class SystemLayout:
    subsystems: tuple[tuple[str, int], ...]

    def __post_init__(self):
        subs = tuple((str(lab), int(d)) for lab, d in self.subsystems)
        labels = [lab for lab, _ in subs]
        if len(set(labels)) != len(labels):
            raise LayoutError(f"duplicate labels in layout {labels}")
        if any(d < 1 for _, d in subs):
            raise LayoutError(f"dimensions must be positive: {subs}")
        object.__setattr__(self, "subsystems", subs)

    @classmethod
    def of(cls, *pairs: tuple[str, int], **dims: int) -> "SystemLayout":
        return cls(tuple(pairs) + tuple(dims.items()))

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(lab for lab, _ in self.subsystems)

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(d for _, d in self.subsystems)

    @property
    def total_dim(self) -> int:
        return int(np.prod(self.dims, dtype=np.int64)) if self.subsystems else 1

    def dim(self, label: str) -> int:
        for lab, d in self.subsystems:
            if lab == label:
                return d
        raise LayoutError(f"unknown label {label!r}; layout has {self.labels}")

    def index(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise LayoutError(f"unknown label {label!r}; layout has {self.labels}") from None

    def is_canonical(self) -> bool:
        return list(self.labels) == sorted(self.labels)

    def canonical(self) -> "SystemLayout":
        return SystemLayout(tuple(sorted(self.subsystems)))

    def sub(self, labels: Iterable[str]) -> "SystemLayout":
        keep = set(labels)
        for lab in keep:
            self.index(lab)
        return SystemLayout(tuple(p for p in self.subsystems if p[0] in keep))

    def __len__(self) -> int:
        return len(self.subsystems)


def _as_layout(layout) -> SystemLayout:
    if isinstance(layout, SystemLayout):
        return layout
    return SystemLayout(tuple(tuple(p) for p in layout))


def _permute_matrix(matrix: np.ndarray, dims: Sequence[int], order: Sequence[int]) -> np.ndarray:
    """Reorder tensor factors of a square operator: new factor k is old factor order[k]."""
    n = len(dims)
    if list(order) == list(range(n)):
        return matrix
    t = matrix.reshape(tuple(dims) * 2)
    axes = list(order) + [n + k for k in order]
    D = matrix.shape[0]
    return t.transpose(axes).reshape(D, D)


def _permute_vector(vec: np.ndarray, dims: Sequence[int], order: Sequence[int]) -> np.ndarray:
    if list(order) == list(range(len(dims))):
        return vec
    return vec.reshape(tuple(dims)).transpose(list(order)).reshape(-1)


def _canonicalize(layout: SystemLayout, matrix: np.ndarray):
    if layout.is_canonical():
        return layout, matrix
    order = sorted(range(len(layout)), key=lambda k: layout.labels[k])
    new_layout = SystemLayout(tuple(layout.subsystems[k] for k in order))
    return new_layout, _permute_matrix(matrix, layout.dims, order)


@dataclass(frozen=True, eq=False)
class DensityOperator:
    """Positive semidefinite operator with trace in (0, 1] on a labeled layout.

    Small negative eigenvalues (above ``-PSD_FLOOR``) are clipped on
    construction; anything more negative is rejected.
    """

    layout: SystemLayout
    matrix: np.ndarray = field(repr=False)

    def __init__(self, layout, matrix, *, check: bool = True):
        layout = _as_layout(layout)
        m = np.array(matrix, dtype=np.complex128)
        D = layout.total_dim
        if m.shape != (D, D):
            raise StateError(f"matrix shape {m.shape} does not match layout dimension {D}")
        if check:
            if np.max(np.abs(m - m.conj().T), initial=0.0) > HERMITIAN_TOL:
                raise StateError("matrix is not Hermitian")
            m = 0.5 * (m + m.conj().T)
            w, v = np.linalg.eigh(m)
            if w[0] < -PSD_FLOOR:
                raise StateError(f"matrix is not PSD (min eigenvalue {w[0]:.3e})")
            if w[0] < 0:
                w = np.clip(w, 0.0, None)
                m = (v * w) @ v.conj().T
            tr = float(np.sum(w))
            if not (0 < tr <= 1 + TRACE_TOL):
                raise StateError(f"trace {tr} outside (0, 1]")
        layout, m = _canonicalize(layout, m)
        m.setflags(write=False)
        object.__setattr__(self, "layout", layout)
        object.__setattr__(self, "matrix", m)

    @property
    def weight(self) -> float:
        return float(np.real(np.trace(self.matrix)))

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def labels(self) -> tuple[str, ...]:
        return self.layout.labels

    def eigvals(self) -> np.ndarray:
        m = self.matrix
        d = np.diag(m)
        if np.count_nonzero(m) == np.count_nonzero(d):
            return np.sort(np.clip(d.real, 0.0, None))
        return np.clip(np.linalg.eigvalsh(m), 0.0, None)

    def rank(self, tol: float = RANK_TOL) -> int:
        return int(np.sum(self.eigvals() > tol))

    def normalized(self) -> "DensityOperator":
        return self.scaled(1.0 / self.weight)

    def scaled(self, factor: float) -> "DensityOperator":
        return DensityOperator(self.layout, self.matrix * factor, check=False)

    def purity(self) -> float:
        return float(np.real(np.vdot(self.matrix, self.matrix))) / self.weight**2

    def relabel(self, mapping: dict[str, str]) -> "DensityOperator":
        subs = tuple((mapping.get(lab, lab), d) for lab, d in self.layout.subsystems)
        return DensityOperator(SystemLayout(subs), self.matrix, check=False)

    def __repr__(self) -> str:
        return f"DensityOperator({list(self.layout.subsystems)}, weight={self.weight:.6g})"


@dataclass(frozen=True, eq=False)
class PureStateVector:
    layout: SystemLayout
    amplitudes: np.ndarray = field(repr=False)

    def __init__(self, layout, amplitudes, *, normalize: bool = False):
        layout = _as_layout(layout)
        v = np.array(amplitudes, dtype=np.complex128).reshape(-1)
        if v.shape[0] != layout.total_dim:
            raise StateError(f"vector length {v.shape[0]} does not match layout dimension {layout.total_dim}")
        nrm = np.linalg.norm(v)
        if normalize:
            v = v / nrm
        elif abs(nrm - 1) > 1e-12:
            raise StateError(f"state vector norm {nrm} is not 1")
        if not layout.is_canonical():
            order = sorted(range(len(layout)), key=lambda k: layout.labels[k])
            v = _permute_vector(v, layout.dims, order)
            layout = SystemLayout(tuple(layout.subsystems[k] for k in order))
        v.setflags(write=False)
        object.__setattr__(self, "layout", layout)
        object.__setattr__(self, "amplitudes", v)

    def density(self) -> DensityOperator:
        v = self.amplitudes
        return DensityOperator(self.layout, np.outer(v, v.conj()), check=False)


@dataclass(frozen=True, eq=False)
class LocalProjector:
    target: str
    matrix: np.ndarray = field(repr=False)

    def __init__(self, target: str, matrix):
        P = np.array(matrix, dtype=np.complex128)
        if P.ndim != 2 or P.shape[0] != P.shape[1]:
            raise StateError("projector must be a square matrix")
        if np.max(np.abs(P - P.conj().T)) > 1e-10 or np.max(np.abs(P @ P - P)) > 1e-10:
            raise StateError("matrix is not an orthogonal projector")
        P.setflags(write=False)
        object.__setattr__(self, "target", target)
        object.__setattr__(self, "matrix", P)

    @classmethod
    def onto_levels(cls, target: str, dim: int, levels: Iterable[int]) -> "LocalProjector":
        P = np.zeros((dim, dim), dtype=np.complex128)
        for k in levels:
            P[k, k] = 1.0
        return cls(target, P)

    @property
    def rank(self) -> int:
        return int(round(float(np.real(np.trace(self.matrix)))))

    def range_basis(self) -> np.ndarray:
        """Orthonormal columns spanning the range of the projector."""
        if _is_diagonal(self.matrix):
            # keep the computational basis so compressed states stay readable
            return np.eye(self.matrix.shape[0])[:, np.real(np.diag(self.matrix)) > 0.5]
        w, v = np.linalg.eigh(self.matrix)
        return v[:, w > 0.5]


def _is_diagonal(m: np.ndarray) -> bool:
    return bool(np.all(m == np.diag(np.diag(m))))


def ket(layout, *indices: int) -> PureStateVector:
    """Computational basis vector |i1 i2 ...> in the given (label) order."""
    layout = _as_layout(layout)
    v = np.zeros(layout.total_dim, dtype=np.complex128)
    v[np.ravel_multi_index(indices, layout.dims)] = 1.0
    return PureStateVector(layout, v)


def tensor(a: DensityOperator, b: DensityOperator) -> DensityOperator:
    clash = set(a.labels) & set(b.labels)
    if clash:
        raise LayoutError(f"label collision in tensor product: {sorted(clash)}")
    layout = SystemLayout(a.layout.subsystems + b.layout.subsystems)
    return DensityOperator(layout, np.kron(a.matrix, b.matrix), check=False)


def tensor_all(*ops: DensityOperator) -> DensityOperator:
    out = ops[0]
    for op in ops[1:]:
        out = tensor(out, op)
    return out


def partial_trace_matrix(matrix: np.ndarray, dims: Sequence[int], keep: Sequence[int]) -> np.ndarray:
    """Partial trace of a square matrix over all factors not listed in ``keep``."""
    n = len(dims)
    keep = sorted(keep)
    if len(keep) == n:
        return matrix
    t = matrix.reshape(tuple(dims) * 2)
    # einsum subscripts: traced factors share the same index on both sides
    letters = iter("abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ")
    row = [next(letters) for _ in range(n)]
    col = [row[k] if k not in keep else next(letters) for k in range(n)]
    out = "".join(row[k] for k in keep) + "".join(col[k] for k in keep)
    res = np.einsum("".join(row) + "".join(col) + "->" + out, t)
    dk = int(np.prod([dims[k] for k in keep], dtype=np.int64))
    return res.reshape(dk, dk)


def partial_trace(omega: DensityOperator, keep: Iterable[str]) -> DensityOperator:
    keep = set(keep)
    if not keep:
        raise LayoutError("keep set must be nonempty")
    idx = [omega.layout.index(lab) for lab in keep]
    sub = omega.layout.sub(keep)
    m = partial_trace_matrix(omega.matrix, omega.layout.dims, idx)
    return DensityOperator(sub, m, check=False)


def purification_matrix(omega: DensityOperator) -> np.ndarray:
    """Columns sqrt(l_i) e_i over the support, largest eigenvalue first.

    Reading the result as a vector on (layout, reference) gives the minimal
    purification; the reference marginal is diagonal in this basis.
    """
    w, v = np.linalg.eigh(omega.matrix)
    order = np.argsort(w)[::-1]
    w, v = w[order], v[:, order]
    r = max(1, int(np.sum(w > RANK_TOL)))
    return v[:, :r] * np.sqrt(np.clip(w[:r], 0, None))


def purify(omega: DensityOperator, new_label: str) -> PureStateVector:
    """Minimal purification sum_i sqrt(l_i) |e_i>|i> with reference dimension rank(omega)."""
    if new_label in omega.labels:
        raise LayoutError(f"label {new_label!r} already present")
    if abs(omega.weight - 1) > TRACE_TOL:
        raise StateError("purification requires a normalized state")
    amps = purification_matrix(omega)
    amps = amps / np.linalg.norm(amps)
    layout = SystemLayout(omega.layout.subsystems + ((new_label, amps.shape[1]),))
    return PureStateVector(layout, amps.reshape(-1))


def apply_local(omega: DensityOperator, label: str, op: np.ndarray) -> DensityOperator:
    """Return (op on label) omega (op on label)^dagger; op may change the local dimension."""
    k = omega.layout.index(label)
    dims = omega.layout.dims
    op = np.asarray(op, dtype=np.complex128)
    if op.shape[1] != dims[k]:
        raise LayoutError(f"operator input dimension {op.shape[1]} != dim({label}) = {dims[k]}")
    n = len(dims)
    t = omega.matrix.reshape(tuple(dims) * 2)
    t = np.moveaxis(np.tensordot(op, t, axes=([1], [k])), 0, k)
    t = np.moveaxis(np.tensordot(t, op.conj(), axes=([n + k], [1])), -1, n + k)
    new_dims = list(dims)
    new_dims[k] = op.shape[0]
    D = int(np.prod(new_dims, dtype=np.int64))
    subs = list(omega.layout.subsystems)
    subs[k] = (label, op.shape[0])
    return DensityOperator(SystemLayout(tuple(subs)), t.reshape(D, D), check=False)


def compress(omega: DensityOperator, projectors: Sequence[LocalProjector],
             renormalize: bool = False) -> DensityOperator:
    """Compress by local projectors, restricting each factor to the projector range."""
    out = omega
    for P in projectors:
        if P.matrix.shape[0] != out.layout.dim(P.target):
            raise LayoutError(f"projector on {P.target!r} has wrong dimension")
        basis = P.range_basis()
        out = apply_local(out, P.target, basis.conj().T)
    if renormalize:
        tr = out.weight
        if tr < 1e-12:
            raise StateError(f"compressed trace {tr:.3e} too small to renormalize")
        out = out.scaled(1.0 / tr)
    return out


def trace_norm(m: np.ndarray) -> float:
    return float(np.sum(np.abs(np.linalg.eigvalsh(0.5 * (m + m.conj().T)))))


def trace_distance(rho: DensityOperator, sigma: DensityOperator) -> float:
    """Full trace norm ||rho - sigma||_1 (no factor 1/2)."""
    if rho.layout != sigma.layout:
        raise LayoutError(f"layout mismatch: {rho.layout.subsystems} vs {sigma.layout.subsystems}")
    return trace_norm(rho.matrix - sigma.matrix)


def mix(states: Sequence[DensityOperator], probs: Sequence[float]) -> DensityOperator:
    if len({s.layout for s in states}) != 1:
        raise LayoutError("cannot mix states on different layouts")
    m = sum(p * s.matrix for p, s in zip(probs, states))
    return DensityOperator(states[0].layout, m)


def maximally_mixed(layout) -> DensityOperator:
    layout = _as_layout(layout)
    D = layout.total_dim
    return DensityOperator(layout, np.eye(D) / D, check=False)


def haar_isometry(rng: np.random.Generator, rows: int, cols: int) -> np.ndarray:
    """Haar-random isometry (rows >= cols) from the QR of a Ginibre matrix."""
    z = (rng.standard_normal((rows, cols)) + 1j * rng.standard_normal((rows, cols))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return q * (d / np.abs(d))


def random_state(layout, rank: int | None = None, seed: int | np.random.Generator | None = None) -> DensityOperator:
    """Random state of the given rank: partial trace of a Haar-random purification."""
    layout = _as_layout(layout)
    D = layout.total_dim
    rank = D if rank is None else int(rank)
    if not 1 <= rank <= D:
        raise ValueError(f"rank {rank} outside [1, {D}]")
    rng = np.random.default_rng(seed)
    g = rng.standard_normal((D, rank)) + 1j * rng.standard_normal((D, rank))
    m = g @ g.conj().T
    m /= np.real(np.trace(m))
    return DensityOperator(layout, m, check=False)


def random_pure(layout, seed=None) -> PureStateVector:
    layout = _as_layout(layout)
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(layout.total_dim) + 1j * rng.standard_normal(layout.total_dim)
    return PureStateVector(layout, v, normalize=True)


# -- JSON state files -------------------------------------------------------

def state_to_json(omega: DensityOperator) -> dict:
    m = omega.matrix
    return {
        "layout": [[lab, d] for lab, d in omega.layout.subsystems],
        "matrix": [[[float(z.real), float(z.imag)] for z in row] for row in m],
        "weight": omega.weight,
    }


def state_from_json(obj: dict) -> DensityOperator:
    try:
        layout = SystemLayout(tuple((str(lab), int(d)) for lab, d in obj["layout"]))
        arr = np.asarray(obj["matrix"], dtype=np.float64)
    except (KeyError, TypeError, ValueError) as exc:
        raise StateFormatError(f"malformed state file: {exc}") from exc
    if arr.ndim != 3 or arr.shape[-1] != 2:
        raise StateFormatError("matrix entries must be [re, im] pairs")
    omega = DensityOperator(layout, arr[..., 0] + 1j * arr[..., 1])
    if "weight" in obj and abs(float(obj["weight"]) - omega.weight) > TRACE_TOL:
        raise StateError(f"declared weight {obj['weight']} != trace {omega.weight}")
    return omega
