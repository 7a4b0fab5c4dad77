"""Tests for condition masks."""

import sys
import os

import numpy as np
import pytest

# Add src to path for imports
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..', 'src'))

from tasdiff import autodiff as ad
from tasdiff.autodiff import SeqTensor, ShapeError
from tasdiff.config import DecoderConfig, MaskKind
from tasdiff.diffusion import (
    ConditionMask,
    DiffusionError,
    apply_mask,
    boundary_mask,
    one_hot,
    relation_mask,
    sample_mask,
)
from tasdiff.models import Decoder


LABELS = np.array([0, 0, 0, 0, 1, 1, 1, 2, 2, 2, 2, 2])


def test_boundary_mask_window():
    # Changes sit between frames 3|4 and 6|7.
    values = boundary_mask(LABELS, radius=2)
    np.testing.assert_array_equal(np.flatnonzero(values == 0), [2, 3, 4, 5, 6, 7, 8])

    np.testing.assert_array_equal(boundary_mask(LABELS, radius=0), np.ones(12))
    np.testing.assert_array_equal(boundary_mask(np.zeros(6, dtype=int), radius=3), np.ones(6))
    # Windows are clipped at the sequence edges.
    np.testing.assert_array_equal(boundary_mask(np.array([0, 1]), radius=4), [0.0, 0.0])


def test_boundary_mask_accepts_one_hot():
    np.testing.assert_array_equal(boundary_mask(one_hot(LABELS, 3), 1), boundary_mask(LABELS, 1))


def test_relation_mask_zeros_one_segment():
    rng = np.random.default_rng(0)
    seen = set()
    for _ in range(30):
        values = relation_mask(LABELS, rng)
        masked = np.flatnonzero(values == 0)
        assert masked.size > 0
        assert np.all(np.diff(masked) == 1)
        assert len(set(LABELS[masked])) == 1
        seen.add(tuple(masked))
    assert seen == {(0, 1, 2, 3), (4, 5, 6), (7, 8, 9, 10, 11)}


def test_sample_mask_kinds():
    rng = np.random.default_rng(1)
    assert (sample_mask(LABELS, MaskKind.ONES).values == 1).all()
    assert (sample_mask(LABELS, "zeros").values == 0).all()
    mask = sample_mask(LABELS, MaskKind.BOUNDARY, radius=1)
    assert mask.kind is MaskKind.BOUNDARY
    np.testing.assert_array_equal(mask.masked_frames, [3, 4, 6, 7])
    assert sample_mask(LABELS, MaskKind.RELATION, rng=rng).masked_frames.size in (3, 4, 5)

    drawn = {sample_mask(LABELS, rng=rng).kind for _ in range(200)}
    assert drawn == set(MaskKind)
    only = {sample_mask(LABELS, rng=rng, kinds=[MaskKind.ZEROS]).kind for _ in range(10)}
    assert only == {MaskKind.ZEROS}


def test_sample_mask_requires_kind_or_rng():
    with pytest.raises(DiffusionError):
        sample_mask(LABELS)
    with pytest.raises(ValueError):
        sample_mask(LABELS, "sideways")
    with pytest.raises(DiffusionError):
        sample_mask(np.array([], dtype=int), MaskKind.ONES)


def test_condition_mask_values():
    mask = ConditionMask(MaskKind.ONES, np.ones(5))
    assert mask.values.shape == (5, 1)
    assert mask.length == 5
    with pytest.raises(DiffusionError):
        ConditionMask(MaskKind.ONES, np.array([1.0, 0.5]))


def test_apply_mask():
    features = SeqTensor(np.arange(12, dtype=float).reshape(4, 3), requires_grad=True)
    masked = apply_mask(features, ConditionMask(MaskKind.BOUNDARY, np.array([1, 0, 0, 1])))
    np.testing.assert_array_equal(masked.data[1:3], 0.0)
    np.testing.assert_array_equal(masked.data[[0, 3]], features.data[[0, 3]])

    np.testing.assert_array_equal(apply_mask(features, np.ones(4)).data, features.data)
    with pytest.raises(ShapeError):
        apply_mask(features, np.ones(5))


def test_sample_mask_kinds_are_uniform():
    rng = np.random.default_rng(11)
    draws = 10_000
    counts = {kind: 0 for kind in MaskKind}
    for _ in range(draws):
        counts[sample_mask(LABELS, rng=rng).kind] += 1

    for kind, count in counts.items():
        assert abs(count / draws - 0.25) <= 0.02, (kind, count)


def test_masked_condition_frames_get_no_gradient():
    rng = np.random.default_rng(12)
    decoder = Decoder(DecoderConfig(hidden=8, num_blocks=2), 3, rng)
    mask = sample_mask(LABELS, MaskKind.BOUNDARY, radius=1)
    cond = SeqTensor(rng.standard_normal((12, 8)), requires_grad=True)
    noisy = rng.standard_normal((12, 3))
    weights = rng.standard_normal((12, 3))

    probs = decoder(noisy, 25, cond, mask=mask.values)
    ad.sum_all(ad.mul(probs, weights)).backward()

    masked = mask.masked_frames
    np.testing.assert_array_equal(cond.grad[masked], 0.0)
    kept = np.setdiff1d(np.arange(12), masked)
    assert np.abs(cond.grad[kept]).sum(axis=1).min() > 0.0
