import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sqent.state import (
    DensityOperator,
    LayoutError,
    LocalProjector,
    StateError,
    StateFormatError,
    SystemLayout,
    compress,
    haar_isometry,
    ket,
    partial_trace,
    purify,
    random_state,
    state_from_json,
    state_to_json,
    tensor,
    trace_distance,
)


def test_layout_basics():
    lay = SystemLayout((("B", 3), ("A", 2)))
    assert lay.total_dim == 6
    assert lay.dim("B") == 3
    assert not lay.is_canonical()
    with pytest.raises(LayoutError):
        SystemLayout((("A", 2), ("A", 3)))
    with pytest.raises(LayoutError):
        SystemLayout((("A", 0),))


def test_rejects_non_states():
    lay = SystemLayout((("A", 2),))
    with pytest.raises(StateError):
        DensityOperator(lay, np.array([[1, 1], [0, 0]]))
    with pytest.raises(StateError):
        DensityOperator(lay, np.diag([1.2, -0.2]))
    with pytest.raises(StateError):
        DensityOperator(lay, np.diag([0.8, 0.8]))
    with pytest.raises(StateError):
        DensityOperator(lay, np.eye(3) / 3)


def test_tiny_negative_eigenvalues_are_clipped():
    w = DensityOperator((("A", 2),), np.diag([1.0, -1e-12]))
    assert w.eigvals().min() >= 0


def test_subnormalized_allowed():
    w = DensityOperator((("A", 2),), np.eye(2) / 4)
    assert w.weight == pytest.approx(0.5)
    assert w.normalized().weight == pytest.approx(1.0)


def test_canonical_order_is_independent_of_input_order():
    rng = np.random.default_rng(0)
    a = random_state((("A", 2),), seed=rng)
    b = random_state((("B", 3),), seed=rng)
    ab, ba = tensor(a, b), tensor(b, a)
    assert ab.labels == ba.labels == ("A", "B")
    assert np.allclose(ab.matrix, ba.matrix)


def test_partial_trace_of_product():
    rng = np.random.default_rng(1)
    a = random_state((("A", 2),), seed=rng)
    b = random_state((("B", 3),), seed=rng)
    ab = tensor(a, b)
    assert np.allclose(partial_trace(ab, {"A"}).matrix, a.matrix)
    assert np.allclose(partial_trace(ab, {"B"}).matrix, b.matrix)


def test_tensor_label_collision():
    a = random_state((("A", 2),), seed=0)
    with pytest.raises(LayoutError):
        tensor(a, a)


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 4), st.integers(2, 4), st.integers(0, 10_000))
def test_purification_reproduces_state(da, db, seed):
    lay = SystemLayout((("A", da), ("B", db)))
    rank = 1 + seed % (da * db)
    w = random_state(lay, rank, seed)
    psi = purify(w, "C")
    assert psi.layout.dim("C") == rank
    back = partial_trace(psi.density(), {"A", "B"})
    assert np.max(np.abs(back.matrix - w.matrix)) < 1e-10


def test_ket_and_projector_compression():
    lay = SystemLayout((("A", 3), ("B", 2)))
    w = ket(lay, 2, 1).density()
    P = LocalProjector.onto_levels("A", 3, [0, 1])
    assert compress(w, [P]).weight == pytest.approx(0.0, abs=1e-15)
    Q = LocalProjector.onto_levels("A", 3, [2])
    c = compress(w, [Q])
    assert c.layout.dim("A") == 1
    assert c.weight == pytest.approx(1.0)


def test_compress_renormalize_fails_on_zero_weight():
    w = ket(SystemLayout((("A", 2),)), 1).density()
    with pytest.raises(StateError):
        compress(w, [LocalProjector.onto_levels("A", 2, [0])], renormalize=True)


def test_trace_distance_full_norm():
    lay = SystemLayout((("A", 2),))
    z, o = ket(lay, 0).density(), ket(lay, 1).density()
    assert trace_distance(z, o) == pytest.approx(2.0)


def test_haar_isometry():
    V = haar_isometry(np.random.default_rng(3), 6, 2)
    assert np.allclose(V.conj().T @ V, np.eye(2))


def test_json_round_trip():
    w = random_state((("A", 2), ("B", 2)), 3, 5)
    back = state_from_json(json.loads(json.dumps(state_to_json(w))))
    assert np.allclose(back.matrix, w.matrix)
    assert back.layout == w.layout


def test_json_malformed():
    with pytest.raises(StateFormatError):
        state_from_json({"layout": [["A", 2]]})
    obj = state_to_json(random_state((("A", 2),), seed=1))
    obj["weight"] = 0.5
    with pytest.raises(StateError):
        state_from_json(obj)
