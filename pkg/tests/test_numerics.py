import math

import numpy as np
import pytest

from gnn_zero_one.numerics import (
    KINDS,
    Classifier,
    Nonlinearity,
    apply_nonlinearity,
    classify,
    init_classifier,
    margin,
    mlp_logit,
    sigmoid,
)
from gnn_zero_one.rng import RngState


def scalar_head(b2, w2=0.0):
    return Classifier([[0.0]], [0.0], [w2], b2)


def test_clipped_identity_values():
    ci = Nonlinearity("clipped_identity")
    assert apply_nonlinearity(ci, -2.0) == -1.0
    assert apply_nonlinearity(ci, 0.37) == 0.37
    assert apply_nonlinearity(ci, 5.0) == 1.0


def test_other_kinds():
    assert apply_nonlinearity(Nonlinearity("relu"), -3.0) == 0.0
    assert apply_nonlinearity(Nonlinearity("clipped_relu", 2.5), 7.0) == 2.5
    assert apply_nonlinearity(Nonlinearity("identity"), -7.25) == -7.25
    assert apply_nonlinearity(Nonlinearity("sigmoid"), 0.0) == 0.5
    assert apply_nonlinearity(Nonlinearity("tanh"), 0.0) == 0.0


def test_elementwise_preserves_shape():
    x = np.linspace(-3, 3, 12).reshape(3, 4)
    for k in KINDS:
        assert Nonlinearity(k)(x).shape == (3, 4)


def test_saturation_metadata():
    assert Nonlinearity("clipped_identity").saturation_values == (-1.0, 1.0)
    assert Nonlinearity("clipped_relu", 3.0).saturation_values == (0.0, 3.0)
    assert [k for k in KINDS if Nonlinearity(k).eventually_constant] == ["clipped_identity", "clipped_relu"]
    with pytest.raises(ValueError):
        Nonlinearity("tanh").saturation_values


def test_unknown_kind_and_bad_cap():
    with pytest.raises(ValueError):
        Nonlinearity("softplus")
    with pytest.raises(ValueError):
        Nonlinearity("clipped_relu", 0.0)


def test_sigmoid_is_overflow_safe():
    assert sigmoid(1000.0) == 1.0
    assert sigmoid(-1000.0) == 0.0


def test_mlp_logit_hand_values():
    zero = Classifier(np.zeros((2, 3)), np.zeros(2), np.zeros(2), 0.0)
    assert mlp_logit(zero, [1.0, 2.0, 3.0]) == 0.0
    one = Classifier([[1.0]], [0.0], [1.0], 0.0)
    assert mlp_logit(one, [0.0]) == 0.0
    c = Classifier([[1.0]], [0.0], [2.0], 0.5)
    assert mlp_logit(c, [1.0]) == pytest.approx(2 * math.tanh(1) + 0.5)
    assert mlp_logit(c, [1.0]) == pytest.approx(2.0232, abs=5e-5)


def test_margin_hand_value():
    c = Classifier([[1.0]], [0.0], [2.0], 0.5)
    assert margin(c, [1.0]) == pytest.approx(sigmoid(2 * math.tanh(1) + 0.5) - 0.5, abs=1e-15)
    assert margin(c, [1.0]) == pytest.approx(0.3833, abs=1e-4)
    assert margin(scalar_head(0.0), [4.0]) == 0.0
    assert margin(scalar_head(40.0), [0.0]) == pytest.approx(0.5)


def test_classify_tie_and_signs():
    assert classify(scalar_head(0.0), [0.0]) == 0
    assert classify(scalar_head(0.01), [0.0]) == 1
    assert classify(scalar_head(-5.0), [0.0]) == 0


def test_batched_logits_match_columns():
    c = init_classifier(4, RngState(1))
    V = RngState(2).uniform((4, 9))
    batch = mlp_logit(c, V)
    assert np.allclose(batch, [mlp_logit(c, V[:, j]) for j in range(9)], rtol=0, atol=1e-14)
    assert np.array_equal(classify(c, V), (batch > 0).astype(int))


def test_dimension_mismatch():
    c = init_classifier(3, RngState(0))
    with pytest.raises(ValueError, match="dimension mismatch"):
        mlp_logit(c, [1.0, 2.0])


def test_init_classifier_shapes_and_support():
    c = init_classifier(5, RngState(3))
    assert c.W1.shape == (5, 5) and c.b1.shape == (5,) and c.W2.shape == (5,)
    c = init_classifier(5, RngState(3), hidden=2)
    assert c.hidden == 2
    allw = np.concatenate([c.W1.ravel(), c.b1, c.W2, [c.b2]])
    assert np.all((allw > -1) & (allw < 1))


def test_classifier_json_round_trip():
    c = init_classifier(3, RngState(8))
    assert Classifier.from_json(c.to_json()) == c
    with pytest.raises(ValueError):
        Classifier.from_json({**c.to_json(), "W3": []})


def test_nonlinearity_json_round_trip():
    for nl in (Nonlinearity("tanh"), Nonlinearity("clipped_relu", 2.0)):
        assert Nonlinearity.from_json(nl.to_json()) == nl
