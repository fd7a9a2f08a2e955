"""Unit tests for triplet training of the fusion network.

Uses a small latent dimension so the trunk stays cheap; the training loop
is the same one that drives the full 128 x 128 network.
"""

import numpy as np
import pytest

from patientcode.errors import ConfigError, DataError
from patientcode.fusion.fusion_network import FusionNetwork
from patientcode.fusion.mining import MiningSpace, mine_triplets
from patientcode.fusion.training import FusionHyper, train_fusion, triplet_batch_gradients
from patientcode.latent.autoencoder import LatentSet
from patientcode.nn.gradcheck import grad_check

LATENT = 6


def synth_latent_set(per_class=8, n_classes=2, spread=0.3, seed=0):
    """Latents drawn around one prototype pair per class."""
    rng = np.random.default_rng(seed)
    protos_u = rng.standard_normal((n_classes, LATENT))
    protos_v = rng.standard_normal((n_classes, LATENT))
    labels = [f"class-{i // per_class}" for i in range(per_class * n_classes)]
    cls = np.array([i // per_class for i in range(per_class * n_classes)])
    u = protos_u[cls] + spread * rng.standard_normal((len(cls), LATENT))
    v = protos_v[cls] + spread * rng.standard_normal((len(cls), LATENT))
    ids = tuple(f"case-{i:03d}" for i in range(len(cls)))
    return LatentSet(ids, tuple(labels), u, v)


def _class_distances(codes, labels):
    """Mean within-class and between-class Euclidean distance of codes."""
    labels = np.array(labels)
    diff = codes[:, None, :] - codes[None, :, :]
    distances = np.sqrt(np.sum(diff * diff, axis=2))
    same = labels[:, None] == labels[None, :]
    off_diagonal = ~np.eye(len(labels), dtype=bool)
    return distances[same & off_diagonal].mean(), distances[~same].mean()


def test_training_separates_classes():
    """Test trained codes are closer within a class than across classes."""
    latents = synth_latent_set()
    q = FusionNetwork.build(latent_dim=LATENT, seed=0, dtype=np.float64)
    q, report = train_fusion(q, latents, FusionHyper(epochs=40, learning_rate=1e-3, batch_size=8))
    intra, inter = _class_distances(q.codes(latents.u, latents.v), latents.labels)
    assert len(report.losses) == 40
    assert report.final_loss < report.losses[0]
    assert intra < inter


def _block_means(losses, width):
    """Mean loss of consecutive non-overlapping windows."""
    return np.asarray(losses).reshape(-1, width).mean(axis=1)


def test_triplet_gradient_matches_finite_differences():
    """Test the shared-trunk triplet gradient through outer product and trunk in float64."""
    latents = synth_latent_set(per_class=4, spread=0.5, seed=5)
    q = FusionNetwork.build(latent_dim=LATENT, seed=4, dtype=np.float64)
    triplets = mine_triplets(latents.labels, q.codes(latents.u, latents.v))
    batch = np.array([(t.anchor, t.positive, t.negative) for t in triplets], dtype=np.int64)
    assert len(np.unique(batch)) < batch.size

    params = q.network.parameters()
    bounds = np.cumsum([0] + [p.size for p in params])

    def loss_and_grad(flat):
        for p, lo, hi in zip(params, bounds[:-1], bounds[1:]):
            p[...] = flat[lo:hi].reshape(p.shape)
        loss, grads = triplet_batch_gradients(q, latents, batch, alpha=1.0)
        return loss, np.concatenate([g.reshape(-1) for g in grads])

    point = np.concatenate([p.reshape(-1) for p in params])
    assert loss_and_grad(point.copy())[0] > 0
    rng = np.random.default_rng(0)
    coordinates = np.concatenate([
        rng.choice(np.arange(lo, hi), size=min(20, hi - lo), replace=False)
        for lo, hi in zip(bounds[:-1], bounds[1:])
    ])
    assert grad_check(loss_and_grad, point, coordinates=coordinates, floor=1e-3) < 1e-4


def test_loss_trends_down_on_fixed_triplets():
    """Test the 10-epoch moving loss never rises while training on triplets mined once."""
    latents = synth_latent_set()
    q = FusionNetwork.build(latent_dim=LATENT, seed=6, dtype=np.float64)
    hyper = FusionHyper(epochs=40, learning_rate=1e-4, batch_size=64, mining_space=MiningSpace.LATENTS)
    _, report = train_fusion(q, latents, hyper)
    means = _block_means(report.losses, 10)
    assert np.all(np.diff(means) <= 1e-9)
    assert means[-1] < means[0]


def test_loss_trends_down_with_remining():
    """Test the last 10 epochs average below the first 10 when triplets are re-mined every epoch."""
    latents = synth_latent_set()
    q = FusionNetwork.build(latent_dim=LATENT, seed=7, dtype=np.float64)
    _, report = train_fusion(q, latents, FusionHyper(epochs=40, learning_rate=1e-3, batch_size=8))
    means = _block_means(report.losses, 10)
    assert means[-1] < means[0]


def test_zero_margin_with_collapsed_classes_leaves_params_unchanged():
    """Test alpha = 0 and identical class members give zero loss and no update."""
    latents = synth_latent_set(spread=0.0)
    q = FusionNetwork.build(latent_dim=LATENT, seed=1)
    before = [p.copy() for p in q.network.parameters()]
    q, report = train_fusion(q, latents, FusionHyper(epochs=3, learning_rate=1e-2, alpha=0.0))
    assert report.losses == [0.0, 0.0, 0.0]
    for a, b in zip(before, q.network.parameters()):
        np.testing.assert_array_equal(a, b)


def test_training_is_deterministic():
    """Test the same seed reproduces the same parameters and curve."""
    latents = synth_latent_set()
    hyper = FusionHyper(epochs=3, learning_rate=1e-3, batch_size=4, seed=9)
    qa, ra = train_fusion(FusionNetwork.build(latent_dim=LATENT, seed=2), latents, hyper)
    qb, rb = train_fusion(FusionNetwork.build(latent_dim=LATENT, seed=2), latents, hyper)
    assert ra.losses == rb.losses
    for a, b in zip(qa.network.parameters(), qb.network.parameters()):
        np.testing.assert_array_equal(a, b)


def test_latent_mining_space_trains():
    """Test triplets mined once from the latents also drive training."""
    latents = synth_latent_set()
    hyper = FusionHyper(epochs=2, learning_rate=1e-3, mining_space=MiningSpace.LATENTS)
    _, report = train_fusion(FusionNetwork.build(latent_dim=LATENT), latents, hyper)
    assert len(report.losses) == 2


def test_zero_epochs_is_a_no_op():
    """Test zero epochs returns the network untouched with an empty curve."""
    latents = synth_latent_set()
    q = FusionNetwork.build(latent_dim=LATENT, seed=3)
    before = q.network.layers[0].weight.copy()
    q, report = train_fusion(q, latents, FusionHyper(epochs=0))
    np.testing.assert_array_equal(q.network.layers[0].weight, before)
    assert report.losses == []


def test_singleton_classes_leave_no_triplets():
    """Test training fails when every class has a single case."""
    latents = LatentSet(("a", "b"), ("X", "Y"), np.ones((2, LATENT)), np.ones((2, LATENT)))
    with pytest.raises(DataError):
        train_fusion(FusionNetwork.build(latent_dim=LATENT), latents, FusionHyper(epochs=1))


@pytest.mark.parametrize("field,value", [
    ("epochs", -1),
    ("learning_rate", 0.0),
    ("alpha", -0.1),
    ("batch_size", 0),
])
def test_invalid_hyperparameters(field, value):
    """Test each invalid setting raises ConfigError naming its fusion field."""
    with pytest.raises(ConfigError) as excinfo:
        FusionHyper(**{field: value}).validate()
    assert excinfo.value.field == f"fusion.{field}"
