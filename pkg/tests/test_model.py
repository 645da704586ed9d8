import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from conftest import random_model
from spherekg.model import BACKWARD, FORWARD, ConfigError, ModelConfig, SphereModel


def two_d_model(centers, radii, theta, alpha=0.0, beta=0.0):
    centers = np.asarray(centers, dtype=np.float64)
    cfg = ModelConfig(k=2, n_blocks=1, alpha=alpha, beta=beta)
    return SphereModel(cfg, centers.reshape(len(centers), 1, 2), np.asarray(radii, dtype=np.float64),
                       np.array([[[theta]]]))


class TestConfig:
    @pytest.mark.parametrize("field,value", [("gamma", 0.0), ("gamma", -1.0), ("alpha", -0.1), ("beta", -1.0),
                                             ("k", 1), ("n_reflections", 3), ("adv_temperature", 0.0)])
    def test_invalid(self, field, value):
        with pytest.raises(ConfigError) as exc:
            ModelConfig(**{field: value}).validate()
        assert exc.value.field == field

    def test_from_dict_coerces_strings(self):
        cfg = ModelConfig.from_dict({"k": "3", "gamma": "2.5", "rotation_init": "identity"})
        assert cfg.k == 3 and cfg.gamma == 2.5 and cfg.rotation_init == "identity"

    def test_unknown_key(self):
        with pytest.raises(ConfigError):
            ModelConfig.from_dict({"gamma_typo": 1})


class TestInitialize:
    @pytest.mark.parametrize("k", [2, 3, 5])
    def test_shapes_and_bounds(self, k):
        cfg = ModelConfig(k=k, n_blocks=4, gamma=8.0)
        m = SphereModel.initialize(cfg, 10, 3, np.random.default_rng(0))
        assert m.centers.shape == (10, 4, k)
        assert np.all(np.abs(m.centers) <= (8.0 + 2.0) / (4 * k))
        np.testing.assert_array_equal(m.radii, 0.05)
        if k == 3:
            np.testing.assert_allclose(np.linalg.norm(m.rel_params, axis=-1), 1.0, atol=1e-12)
        if k == 5:
            np.testing.assert_allclose(np.linalg.norm(m.rel_params.reshape(3, 4, 2, 5), axis=-1), 1.0, atol=1e-12)

    @pytest.mark.parametrize("k", [2, 3, 4])
    def test_identity_init(self, k):
        cfg = ModelConfig(k=k, n_blocks=3, rotation_init="identity")
        m = SphereModel.initialize(cfg, 4, 2, np.random.default_rng(0))
        c = m.centers[1].ravel()
        np.testing.assert_allclose(m.transform_head(1, c), c, atol=1e-15)


class TestTransformHead:
    def test_half_turn(self):
        m = two_d_model([[0, 0]], [0], math.pi)
        np.testing.assert_allclose(m.transform_head(0, [1.5, -2.0]), [-1.5, 2.0], atol=1e-15)

    @pytest.mark.parametrize("k", [2, 3, 5])
    def test_dense_oracle(self, k):
        rng = np.random.default_rng(k)
        m = random_model(rng, k, n_blocks=3)
        c = rng.normal(size=3 * k)
        np.testing.assert_allclose(m.transform_head(1, c), oracles.transform(k, m.rel_params[1], c), atol=1e-12)

    def test_bad_relation(self):
        m = random_model(np.random.default_rng(0), 2)
        with pytest.raises(IndexError):
            m.transform_head(5, np.zeros(4))

    def test_bad_dimension(self):
        m = random_model(np.random.default_rng(0), 2)
        with pytest.raises(ValueError):
            m.transform_head(0, np.zeros(3))


class TestDistances:
    def test_coincident_identity(self):
        m = two_d_model([[0.3, 0.4], [0.3, 0.4]], [0, 0], 0.0)
        assert m.center_distance(0, 0, 1) == 0.0

    def test_rotation_maps_head_onto_tail(self):
        m = two_d_model([[1, 0], [0, 1]], [0, 0], math.pi / 2)
        assert m.center_distance(0, 0, 1) == pytest.approx(0.0, abs=1e-15)

    @pytest.mark.parametrize("k", [2, 3, 5])
    def test_dense_oracle(self, k):
        rng = np.random.default_rng(20 + k)
        m = random_model(rng, k)
        for h, r, t in [(0, 0, 1), (3, 1, 3), (7, 1, 2)]:
            ref = np.linalg.norm(oracles.transform(k, m.rel_params[r], m.centers[h].ravel()) - m.centers[t].ravel())
            assert m.center_distance(h, r, t) == pytest.approx(ref, abs=1e-12)
            assert m.center_distance(h, r, t, BACKWARD) == pytest.approx(ref, abs=1e-12)

    def test_invalid_ids(self):
        m = random_model(np.random.default_rng(0), 3)
        with pytest.raises(IndexError):
            m.center_distance(0, 0, 8)
        with pytest.raises(IndexError):
            m.center_distance(-1, 0, 1)

    def test_training_distance_clamps(self):
        m = two_d_model([[0, 0], [1, 0]], [0.6, 0.6], 0.0)
        assert m.training_distance(0, 0, 1) == 0.0

    def test_training_distance_slack(self):
        m = two_d_model([[0, 0], [2, 0]], [0.5, 0.5], 0.0, alpha=0.1)
        assert m.training_distance(0, 0, 1) == pytest.approx(2.0 - 0.55 - 0.5)

    def test_point_entities(self):
        m = two_d_model([[0, 0], [2, 1]], [0, 0], 0.4)
        assert m.training_distance(0, 0, 1) == m.center_distance(0, 0, 1)


class TestIsRetrieved:
    def test_concentric_points(self):
        m = two_d_model([[0.1, 0.1], [0.1, 0.1]], [0, 0], 0.0)
        assert m.is_retrieved(0, 0, 1)

    def test_gap(self):
        m = two_d_model([[0, 0], [1, 0]], [0.4, 0.4], 0.0)
        assert not m.is_retrieved(0, 0, 1)

    def test_negative_radius(self):
        m = two_d_model([[0, 0], [0.1, 0]], [0.5, -0.2], 0.0)
        assert m.is_retrieved(0, 0, 1)

    def test_tangent(self):
        m = two_d_model([[0, 0], [1, 0]], [0.5, 0.5], 0.0)
        assert m.is_retrieved(0, 0, 1)

    def test_slack_not_used_for_retrieval(self):
        m = two_d_model([[0, 0], [1.05, 0]], [0.5, 0.5], 0.0, alpha=0.2)
        assert m.training_distance(0, 0, 1) == 0.0
        assert not m.is_retrieved(0, 0, 1)


@pytest.mark.parametrize("k", [2, 3, 6])
class TestInvariants:
    @settings(max_examples=30, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1))
    def test_forward_backward_agree(self, k, seed):
        rng = np.random.default_rng(seed)
        m = random_model(rng, k)
        h, t = rng.integers(0, 8, size=2)
        r = int(rng.integers(0, 2))
        f, b = m.center_distance(h, r, t, FORWARD), m.center_distance(h, r, t, BACKWARD)
        assert abs(f - b) < 1e-9
        assert m.is_retrieved(h, r, t, FORWARD) == m.is_retrieved(h, r, t, BACKWARD)

    @settings(max_examples=30, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1))
    def test_norm_preserved(self, k, seed):
        rng = np.random.default_rng(seed)
        m = random_model(rng, k, n_blocks=3)
        c = rng.normal(size=3 * k) * 5
        assert abs(np.linalg.norm(m.transform_head(0, c)) - np.linalg.norm(c)) < 1e-9

    @settings(max_examples=30, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1), bump=st.floats(0, 2))
    def test_training_distance_monotone_in_radii(self, k, seed, bump):
        rng = np.random.default_rng(seed)
        m = random_model(rng, k, alpha=0.1, beta=0.2)
        base = m.training_distance(0, 1, 2)
        m.radii[0] += bump
        mid = m.training_distance(0, 1, 2)
        m.radii[2] += bump
        assert mid <= base + 1e-15
        assert m.training_distance(0, 1, 2) <= mid + 1e-15
