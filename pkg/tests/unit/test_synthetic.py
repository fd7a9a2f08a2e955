"""Unit tests for the synthetic dataset generators."""

import numpy as np
import pytest

from patientcode.data.dataset import Modality
from patientcode.data.synthetic import SynthConfig, synth_generate, synth_linear_pairs
from patientcode.errors import ConfigError


def test_generator_is_deterministic_per_seed():
    """Test the same config produces bit-identical embeddings."""
    cfg = SynthConfig(per_class=5, image_dim=4, sequence_dim=3, seed=11)
    a, b = synth_generate(cfg), synth_generate(cfg)
    assert a.case_ids == b.case_ids
    np.testing.assert_array_equal(a.matrix(Modality.IMAGE), b.matrix(Modality.IMAGE))
    np.testing.assert_array_equal(a.matrix(Modality.SEQUENCE), b.matrix(Modality.SEQUENCE))


def test_shape_and_labels():
    """Test class sizes, schema and label names follow the config."""
    dataset = synth_generate(SynthConfig(n_classes=3, per_class=4, image_dim=6, sequence_dim=5))
    assert len(dataset) == 12
    assert dataset.classes == ["class-0", "class-1", "class-2"]
    assert dataset.labels.count("class-1") == 4
    assert dataset.matrix(Modality.IMAGE).shape == (12, 6)
    assert dataset.matrix(Modality.SEQUENCE).shape == (12, 5)


def test_zero_signal_zero_noise_gives_zero_embeddings():
    """Test signal and noise scales multiply their components."""
    dataset = synth_generate(SynthConfig(per_class=2, image_dim=3, sequence_dim=3,
                                         image_signal=0.0, sequence_signal=0.0, noise=0.0))
    assert not dataset.matrix(Modality.IMAGE).any()


def test_noise_free_cases_equal_their_class_prototype():
    """Test without noise every case of a class shares one embedding."""
    dataset = synth_generate(SynthConfig(per_class=3, image_dim=4, sequence_dim=4, noise=0.0))
    image = dataset.matrix(Modality.IMAGE)
    np.testing.assert_array_equal(image[0], image[2])
    assert not np.array_equal(image[0], image[3])


@pytest.mark.parametrize("field,value", [
    ("n_classes", 1),
    ("per_class", 1),
    ("image_dim", 0),
    ("image_signal", 1.5),
    ("noise", -0.1),
])
def test_invalid_config_is_rejected(field, value):
    """Test each out-of-range parameter raises ConfigError naming it."""
    with pytest.raises(ConfigError) as excinfo:
        SynthConfig(**{field: value}).validate()
    assert excinfo.value.field == f"synth.{field}"


def test_linear_pairs_follow_the_map():
    """Test noise-free linear pairs satisfy g = M f exactly."""
    mapping = np.arange(6, dtype=float).reshape(3, 2)
    dataset = synth_linear_pairs(5, 2, 3, noise=0.0, seed=2, mapping=mapping)
    f = dataset.matrix(Modality.IMAGE)
    g = dataset.matrix(Modality.SEQUENCE)
    np.testing.assert_allclose(g, f @ mapping.T)
