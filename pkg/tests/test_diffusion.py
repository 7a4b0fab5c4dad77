"""Tests for the noise schedule, label codec, forward corruption and losses."""

import sys
import os
import math

import numpy as np
import pytest

# Add src to path for imports
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..', 'src'))

from tasdiff.autodiff import SeqTensor, check_gradients
from tasdiff.config import LossConfig
from tasdiff.diffusion import (
    DiffusionError,
    DiffusionSchedule,
    LabelCodec,
    boundary_sequence,
    corrupt,
    gaussian_kernel,
    loss_boundary,
    loss_ce,
    loss_smooth,
    loss_terms,
    make_schedule,
    one_hot,
    smooth_boundaries,
)
from tasdiff.utils.logging import setup_logging, get_logger


def test_cosine_schedule():
    setup_logging(log_level="INFO")
    logger = get_logger("test_cosine_schedule")

    schedule = make_schedule(1000)
    assert schedule.alpha_bar.shape == (1001,)
    assert schedule.at(0) == 1.0
    assert np.all(np.diff(schedule.alpha_bar) < 0)
    assert 0.0 < schedule.at(1000) < 1e-3

    logger.info("✅ Cosine schedule test passed")


def test_schedule_validation():
    with pytest.raises(DiffusionError):
        make_schedule(1)
    with pytest.raises(DiffusionError):
        DiffusionSchedule(steps=2, alpha_bar=np.array([1.0, 0.5]))
    with pytest.raises(DiffusionError):
        DiffusionSchedule(steps=2, alpha_bar=np.array([0.9, 0.5, 0.1]))
    with pytest.raises(DiffusionError):
        DiffusionSchedule(steps=2, alpha_bar=np.array([1.0, 0.5, 0.5]))

    schedule = make_schedule(10)
    with pytest.raises(DiffusionError):
        schedule.at(11)
    with pytest.raises(DiffusionError):
        schedule.check_step(0)


def test_label_codec_round_trip():
    rng = np.random.default_rng(0)
    labels = rng.integers(0, 5, size=50)
    for scale in (0.5, 1.0, 2.0):
        codec = LabelCodec(scale)
        encoded = codec.encode(one_hot(labels, 5))
        assert set(np.unique(encoded)) == {-scale, scale}
        np.testing.assert_array_equal(codec.decode_labels(encoded), labels)
        np.testing.assert_allclose(codec.decode(encoded), one_hot(labels, 5))

    np.testing.assert_allclose(LabelCodec().decode(np.array([-3.0, 0.0, 3.0])), [0.0, 0.5, 1.0])
    with pytest.raises(DiffusionError):
        LabelCodec(0.0)


def test_one_hot_validation():
    np.testing.assert_array_equal(one_hot(np.array([1, 0]), 2), [[0.0, 1.0], [1.0, 0.0]])
    with pytest.raises(DiffusionError):
        one_hot(np.array([0, 3]), 3)
    with pytest.raises(DiffusionError):
        one_hot(np.array([], dtype=int), 3)


def test_corrupt():
    schedule = make_schedule(100)
    clean = LabelCodec().encode(one_hot(np.array([0, 1, 2, 1]), 3))
    noise = np.random.default_rng(1).standard_normal(clean.shape)

    a = schedule.at(30)
    np.testing.assert_allclose(corrupt(clean, 30, schedule, noise), math.sqrt(a) * clean + math.sqrt(1 - a) * noise)
    # Almost all signal is gone at the last step.
    np.testing.assert_allclose(corrupt(clean, 100, schedule, noise), noise, atol=1e-6)

    with pytest.raises(DiffusionError):
        corrupt(clean, 0, schedule, noise)
    with pytest.raises(DiffusionError):
        corrupt(clean, 10, schedule, noise[:2])


def test_boundary_sequence_and_smoothing():
    labels = np.array([0, 0, 0, 1, 1, 2])
    np.testing.assert_array_equal(boundary_sequence(labels), [0, 0, 1, 0, 1])
    np.testing.assert_array_equal(boundary_sequence(one_hot(labels, 3)), [0, 0, 1, 0, 1])

    kernel = gaussian_kernel(1.0)
    assert kernel.size == 9
    assert kernel[4] == 1.0

    smoothed = smooth_boundaries(np.array([0, 0, 0, 1, 0, 0, 0], dtype=float), sigma=1.0)
    assert smoothed[3] == 1.0
    np.testing.assert_allclose(smoothed[2], math.exp(-0.5))
    assert (smoothed >= 0).all() and (smoothed <= 1).all()

    raw = np.array([0.0, 1.0, 0.0])
    np.testing.assert_array_equal(smooth_boundaries(raw, sigma=0.0), raw)


def test_uniform_predictions_give_log_c_over_c():
    for classes in (2, 5, 11):
        probs = SeqTensor(np.full((20, classes), 1.0 / classes))
        targets = one_hot(np.arange(20) % classes, classes)
        assert abs(loss_ce(probs, targets).item() - math.log(classes) / classes) <= 1e-6


def test_constant_predictions_have_zero_smoothness():
    probs = SeqTensor(np.tile([0.2, 0.3, 0.5], (15, 1)))
    assert loss_smooth(probs).item() == 0.0
    assert loss_smooth(SeqTensor(np.array([[0.5, 0.5]]))).item() == 0.0


def test_smoothness_clamp_variant():
    probs = SeqTensor(np.array([[1.0 - 1e-7, 1e-7], [1e-7, 1.0 - 1e-7]]))
    unclamped = loss_smooth(probs).item()
    clamped = loss_smooth(probs, clamp_at=16.0).item()
    assert unclamped > 16.0
    assert clamped == pytest.approx(16.0)


def test_exact_one_hot_boundary_loss_is_tiny():
    labels = np.array([0, 0, 1, 1, 1, 2, 2, 0])
    probs = SeqTensor(one_hot(labels, 3))
    targets = boundary_sequence(labels)
    assert loss_boundary(probs, targets).item() <= 1e-5

    with pytest.raises(DiffusionError):
        loss_boundary(SeqTensor(np.array([[1.0, 0.0]])), np.zeros(0))
    with pytest.raises(DiffusionError):
        loss_boundary(probs, np.zeros(3))


def test_loss_terms_sum_and_gradients():
    rng = np.random.default_rng(2)
    labels = np.array([0, 0, 1, 1, 2, 2, 2])
    targets = one_hot(labels, 3)
    config = LossConfig()

    logits = rng.standard_normal((7, 3))
    probs = SeqTensor(np.exp(logits) / np.exp(logits).sum(axis=1, keepdims=True))
    terms = loss_terms(probs, targets, config=config)
    values = terms.values()
    assert values["loss"] == pytest.approx(values["ce"] + values["smooth"] + values["boundary"])

    # Gradients flow through the softmax into every loss term.
    from tasdiff import autodiff as ad
    for _ in range(5):
        x = SeqTensor(rng.standard_normal((7, 3)), requires_grad=True)
        result = check_gradients(lambda t: loss_terms(ad.softmax_channels(t), targets, config=config).total, [x], rng=rng)
        assert result.passed(1e-4)


def test_single_frame_losses():
    probs = SeqTensor(np.array([[0.7, 0.3]]))
    terms = loss_terms(probs, np.array([[1.0, 0.0]]))
    assert terms.boundary.item() == 0.0
    assert terms.smooth.item() == 0.0
    assert terms.ce.item() == pytest.approx(-math.log(0.7) / 2)


def random_probs(rng, length, classes):
    logits = rng.standard_normal((length, classes))
    return np.exp(logits) / np.exp(logits).sum(axis=1, keepdims=True)


def test_cross_entropy_is_minimal_at_targets():
    rng = np.random.default_rng(3)
    labels = rng.integers(0, 4, size=16)
    targets = one_hot(labels, 4)
    best = loss_ce(SeqTensor(targets), targets).item()
    assert best == pytest.approx(0.0, abs=1e-12)

    for weight in (1e-3, 0.1, 0.5, 1.0):
        perturbed = (1.0 - weight) * targets + weight * random_probs(rng, 16, 4)
        assert loss_ce(SeqTensor(perturbed), targets).item() > best


def test_corrupt_is_affine_in_noise():
    schedule = make_schedule(50)
    rng = np.random.default_rng(4)
    clean = LabelCodec().encode(one_hot(rng.integers(0, 3, size=9), 3))
    first, second = rng.standard_normal((2, 9, 3))

    for step in (1, 17, 50):
        a = schedule.at(step)
        mixed = corrupt(clean, step, schedule, 0.3 * first + 0.7 * second)
        np.testing.assert_allclose(
            mixed, 0.3 * corrupt(clean, step, schedule, first) + 0.7 * corrupt(clean, step, schedule, second)
        )
        np.testing.assert_allclose(
            corrupt(clean, step, schedule, first) - corrupt(clean, step, schedule, second),
            math.sqrt(1.0 - a) * (first - second),
        )


def test_smooth_boundaries_is_translation_equivariant():
    boundaries = np.zeros(40)
    boundaries[[12, 18]] = 1.0
    shift = 5
    shifted = np.roll(boundaries, shift)

    for sigma in (0.5, 1.0):
        np.testing.assert_allclose(
            smooth_boundaries(shifted, sigma)[shift:],
            smooth_boundaries(boundaries, sigma)[:-shift],
        )


def test_losses_are_non_negative():
    rng = np.random.default_rng(5)
    for _ in range(50):
        length, classes = int(rng.integers(2, 20)), int(rng.integers(2, 6))
        labels = rng.integers(0, classes, size=length)
        probs = SeqTensor(random_probs(rng, length, classes))
        terms = loss_terms(probs, one_hot(labels, classes), config=LossConfig(smooth_clamp=16.0))
        assert terms.ce.item() >= 0.0
        assert terms.smooth.item() >= 0.0
        assert terms.boundary.item() >= 0.0


def test_smoothness_loss_matches_double_loop():
    rng = np.random.default_rng(6)
    probs = random_probs(rng, 11, 4)
    probs[3] = [1.0 - 3e-7, 1e-7, 1e-7, 1e-7]

    for clamp_at in (None, 16.0):
        expected = 0.0
        for i in range(1, 11):
            for c in range(4):
                diff = (math.log(max(probs[i, c], 1e-7)) - math.log(max(probs[i - 1, c], 1e-7))) ** 2
                expected += diff if clamp_at is None else min(diff, clamp_at)
        expected /= 10 * 4
        assert loss_smooth(SeqTensor(probs), clamp_at=clamp_at).item() == pytest.approx(expected, rel=1e-10)


def test_boundary_loss_matches_double_loop():
    rng = np.random.default_rng(7)
    labels = np.array([0, 0, 1, 1, 1, 2, 0, 0, 0, 2])
    probs = random_probs(rng, 10, 3)
    targets = smooth_boundaries(boundary_sequence(labels), 1.0)

    expected = 0.0
    for i in range(9):
        same = sum(probs[i, c] * probs[i + 1, c] for c in range(3))
        same = min(max(same, 1e-7), 1.0 - 1e-7)
        expected += targets[i] * math.log(1.0 - same) + (1.0 - targets[i]) * math.log(same)
    expected = -expected / 9
    assert loss_boundary(SeqTensor(probs), targets).item() == pytest.approx(expected, rel=1e-10)
