import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sqent.entropic import (
    binary_entropy,
    cmi,
    cmi_truncated_sequence,
    conditional_entropy,
    entropy,
    mutual_information,
    relative_entropy,
    shannon_entropy,
    theta,
)
from sqent.models import ModelStateSpec, build_state, ladder_projectors
from sqent.state import SystemLayout, ket, maximally_mixed, random_state, tensor

LOG2 = math.log(2)


def bell():
    return build_state(ModelStateSpec("bell"))


def test_entropy_values():
    assert entropy(maximally_mixed((("A", 3),))) == pytest.approx(math.log(3))
    assert entropy(ket(SystemLayout((("A", 2),)), 0).density()) == pytest.approx(0.0, abs=1e-15)
    assert binary_entropy(0.5) == pytest.approx(LOG2)
    assert binary_entropy(0.0) == 0.0
    assert theta(0.0) == 0.0


def test_cone_entropy_is_homogeneous():
    w = random_state((("A", 3),), seed=4)
    for c in (0.1, 0.5, 1.0):
        assert entropy(w.scaled(c)) == pytest.approx(c * entropy(w), abs=1e-12)


def test_shannon_rejects_negative():
    with pytest.raises(ValueError):
        shannon_entropy([0.5, -0.1])


def test_bell_state_quantities():
    w = bell()
    assert mutual_information(w, "A", "B") == pytest.approx(2 * LOG2)
    assert conditional_entropy(w, "A", "B") == pytest.approx(-LOG2)


def test_relative_entropy_support_leak_is_infinite():
    lay = SystemLayout((("A", 2),))
    assert relative_entropy(maximally_mixed(lay), ket(lay, 0).density()) == math.inf
    assert relative_entropy(ket(lay, 0).density(), maximally_mixed(lay)) == pytest.approx(LOG2)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000))
def test_mutual_information_methods_agree(seed):
    lay = SystemLayout((("A", 2), ("B", 3)))
    w = random_state(lay, 1 + seed % 6, seed)
    a = mutual_information(w, "A", "B")
    b = mutual_information(w, "A", "B", method="relative")
    assert a == pytest.approx(b, abs=1e-9)


def test_mutual_information_needs_partition():
    w = random_state((("A", 2), ("B", 2), ("E", 2)), seed=1)
    with pytest.raises(ValueError):
        mutual_information(w, "A", "B")


def test_cmi_of_markov_product_is_zero():
    rng = np.random.default_rng(2)
    a = random_state((("A", 2),), seed=rng)
    be = random_state((("B", 2), ("E", 2)), seed=rng)
    assert cmi(tensor(a, be), "A", "B", "E") == pytest.approx(0.0, abs=1e-12)


def test_cmi_without_conditioning_is_mi():
    w = random_state((("A", 2), ("B", 2)), seed=3)
    assert cmi(w, "A", "B") == pytest.approx(mutual_information(w, "A", "B"), abs=1e-12)


def test_cmi_grouped_labels():
    w = random_state((("A", 2), ("A2", 2), ("B", 2), ("E", 2)), 4, 5)
    v = cmi(w, ["A", "A2"], "B", "E")
    assert v >= 0


def test_truncated_sequence_monotone_and_converges():
    tmsv = build_state(ModelStateSpec("tmsv", 0.6, 8))
    tau = random_state((("E", 2),), seed=6)
    w = tensor(tmsv, tau)
    seq = cmi_truncated_sequence(w, "A", "B", "E", ladder_projectors(8, range(1, 9), "A"))
    assert all(y >= x - 1e-10 for x, y in zip(seq, seq[1:]))
    assert seq[-1] == pytest.approx(cmi(w, "A", "B", "E"), abs=1e-10)


def test_truncated_sequence_random_state_converges():
    w = random_state((("A", 3), ("B", 2), ("E", 2)), seed=7)
    seq = cmi_truncated_sequence(w, "A", "B", "E", ladder_projectors(3, [1, 2, 3], "A"))
    assert seq[-1] == pytest.approx(cmi(w, "A", "B", "E"), abs=1e-10)


def test_truncated_sequence_rejects_unnested():
    w = random_state((("A", 3), ("B", 2), ("E", 2)), seed=8)
    from sqent.state import LocalProjector
    ps = [LocalProjector.onto_levels("A", 3, [1]), LocalProjector.onto_levels("A", 3, [0])]
    with pytest.raises(ValueError):
        cmi_truncated_sequence(w, "A", "B", "E", ps)
