"""Tests for synthetic videos, on-disk formats and sub-sequence augmentation."""

import sys
import os
import json

import numpy as np
import pytest

# Add src to path for imports
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..', 'src'))

from tasdiff.config import SyntheticGenConfig
from tasdiff.data import (
    FEATURE_HEADER,
    MANIFEST_NAME,
    MAPPING_NAME,
    ClassMapping,
    DatasetError,
    FeatureFormatError,
    FeatureSequence,
    ManifestEntry,
    SyntheticVideoGenerator,
    VideoRecord,
    augment_subsample,
    decode_features,
    encode_features,
    generate_synthetic,
    load_dataset,
    median_filter_labels,
    predict_with_augmentation,
    read_labels,
    read_manifest,
    read_mapping,
    recombine,
    save_dataset,
    video_file_name,
    write_labels,
    write_manifest,
    write_mapping,
)
from tasdiff.evaluation import segments_from_labels
from tasdiff.utils.logging import setup_logging, get_logger


def small_gen_config(**overrides) -> SyntheticGenConfig:
    data = dict(num_videos=4, eval_videos=1, length_min=40, length_max=60, num_classes=4,
                feature_dim=6, min_segment=4, max_segment=10, seed=3)
    data.update(overrides)
    return SyntheticGenConfig(**data)


def test_synthetic_generation_is_deterministic():
    setup_logging(log_level="INFO")
    logger = get_logger("test_synthetic_generation_is_deterministic")

    first = generate_synthetic(small_gen_config())
    second = generate_synthetic(small_gen_config())
    other = generate_synthetic(small_gen_config(seed=4))

    for a, b in zip(first, second):
        assert a.video_id == b.video_id
        assert a.labels == b.labels
        np.testing.assert_array_equal(a.features.values, b.features.values)
    assert any(
        a.length != c.length or not np.array_equal(a.features.values, c.features.values)
        for a, c in zip(first, other)
    )

    logger.info("✅ Synthetic determinism test passed")


def test_synthetic_videos_respect_config():
    config = small_gen_config()
    generator = SyntheticVideoGenerator(config)
    videos = generator.generate()

    assert [v.split for v in videos] == ["train", "train", "train", "eval"]
    assert np.allclose(np.diag(generator.transitions), 0.0)
    np.testing.assert_allclose(generator.transitions.sum(axis=1), 1.0)
    for video in videos:
        assert config.length_min <= video.length <= config.length_max
        assert video.features.dim == config.feature_dim
        assert video.features.values.dtype == np.float32
        for segment in segments_from_labels(video.label_ids(generator.mapping)):
            assert config.min_segment <= segment.length <= config.max_segment


def test_class_means_are_equidistant():
    generator = SyntheticVideoGenerator(small_gen_config(separation=2.0))
    means = generator.class_means
    np.testing.assert_allclose(np.linalg.norm(means, axis=1), 2.0)
    np.testing.assert_allclose(means @ means.T, 4.0 * np.eye(4), atol=1e-9)


def test_sample_durations_tile_length():
    generator = SyntheticVideoGenerator(small_gen_config())
    for length in range(4, 80):
        durations = generator.sample_durations(length)
        assert sum(durations) == length
        assert all(4 <= d <= 10 for d in durations)


def test_feature_round_trip_is_bit_exact():
    rng = np.random.default_rng(0)
    values = rng.standard_normal((17, 5)).astype(np.float32)
    blob = encode_features(values)
    assert len(blob) == FEATURE_HEADER.itemsize + 4 * 17 * 5
    assert blob[:4] == b"EDAF"
    decoded = decode_features(blob)
    assert decoded.dtype == np.float32
    assert decoded.tobytes() == values.tobytes()


def test_feature_parser_rejects_every_truncation():
    blob = encode_features(np.random.default_rng(1).standard_normal((6, 3)))
    for cut in range(len(blob)):
        with pytest.raises(FeatureFormatError) as excinfo:
            decode_features(blob[:cut])
        assert excinfo.value.offset <= cut

    with pytest.raises(FeatureFormatError) as excinfo:
        decode_features(blob + b"\x00")
    assert excinfo.value.offset == len(blob)


def test_feature_parser_rejects_header_corruption():
    blob = encode_features(np.random.default_rng(2).standard_normal((6, 3)))
    rng = np.random.default_rng(3)
    for position in range(FEATURE_HEADER.itemsize):
        for _ in range(5):
            corrupted = bytearray(blob)
            corrupted[position] = (corrupted[position] + int(rng.integers(1, 256))) % 256
            with pytest.raises(FeatureFormatError):
                decode_features(bytes(corrupted))


def test_feature_parser_reports_non_finite_offset():
    values = np.ones((4, 2), dtype=np.float32)
    values[2, 1] = np.nan
    blob = bytearray(encode_features(np.ones((4, 2))))
    payload = values.astype("<f4").tobytes()
    blob[FEATURE_HEADER.itemsize:] = payload
    with pytest.raises(FeatureFormatError) as excinfo:
        decode_features(bytes(blob))
    assert excinfo.value.offset == FEATURE_HEADER.itemsize + 4 * 5

    with pytest.raises(DatasetError):
        encode_features(values)


def test_feature_sequence_validation():
    with pytest.raises(DatasetError):
        FeatureSequence(np.zeros(5))
    with pytest.raises(DatasetError):
        FeatureSequence(np.zeros((0, 3)))
    with pytest.raises(DatasetError):
        VideoRecord("v", np.zeros((3, 2)), ["a", "b"])
    with pytest.raises(DatasetError):
        VideoRecord("", np.zeros((1, 2)), ["a"])


def test_label_files(tmp_path):
    path = tmp_path / "labels" / "v.txt"
    write_labels(path, ["walk", "walk", "sit"])
    assert read_labels(path, expected_length=3) == ["walk", "walk", "sit"]

    with pytest.raises(DatasetError):
        read_labels(path, expected_length=4)
    path.write_text("walk\n\nsit\n")
    with pytest.raises(DatasetError):
        read_labels(path)
    with pytest.raises(DatasetError):
        read_labels(tmp_path / "missing.txt")


def test_text_files_must_be_utf8(tmp_path):
    labels = tmp_path / "labels.txt"
    labels.write_bytes(b"walk\n\xff\xfesit\n")
    with pytest.raises(DatasetError):
        read_labels(labels)

    mapping = tmp_path / MAPPING_NAME
    mapping.write_bytes(b"0 a\n1 \xc3\n")
    with pytest.raises(DatasetError):
        read_mapping(mapping)

    manifest = tmp_path / MANIFEST_NAME
    manifest.write_bytes(b"[{\"id\": \"\xff\"}]")
    with pytest.raises(DatasetError):
        read_manifest(manifest)


def test_video_file_names(tmp_path):
    assert video_file_name("video_001", ".txt") == "video_001.txt"
    assert video_file_name("../../etc/passwd", ".txt") == "passwd.txt"
    for bad in ("", "..", "a/.."):
        with pytest.raises(DatasetError):
            video_file_name(bad, ".txt")

    path = tmp_path / MANIFEST_NAME
    path.write_text(json.dumps([
        {"id": "a/v1", "feature_path": "f1", "label_path": "l1"},
        {"id": "b/v1", "feature_path": "f2", "label_path": "l2"},
    ]))
    with pytest.raises(DatasetError):
        read_manifest(path)


def test_class_mapping(tmp_path):
    mapping = ClassMapping.from_labels([["b", "a", "b"], ["c", "a"]])
    assert mapping.names == ("b", "a", "c")
    np.testing.assert_array_equal(mapping.encode(["c", "b"]), [2, 0])
    assert mapping.decode([1, 2]) == ["a", "c"]
    with pytest.raises(DatasetError):
        mapping.id_of("z")
    with pytest.raises(DatasetError):
        mapping.name_of(3)
    with pytest.raises(DatasetError):
        ClassMapping(("only",))
    with pytest.raises(DatasetError):
        ClassMapping(("a", "a"))
    with pytest.raises(DatasetError):
        ClassMapping(("a", "two words"))

    path = tmp_path / MAPPING_NAME
    write_mapping(path, mapping)
    assert path.read_text() == "0 b\n1 a\n2 c\n"
    assert read_mapping(path) == mapping

    path.write_text("0 b\n2 c\n")
    with pytest.raises(DatasetError):
        read_mapping(path)
    path.write_text("0 b extra\n1 a\n")
    with pytest.raises(DatasetError):
        read_mapping(path)


def test_manifest(tmp_path):
    entries = [ManifestEntry("v1", "features/v1.feat", "labels/v1.txt", "eval")]
    path = tmp_path / MANIFEST_NAME
    write_manifest(path, entries)
    assert json.loads(path.read_text())[0]["id"] == "v1"
    assert read_manifest(path) == entries

    path.write_text(json.dumps([{"id": "v1", "feature_path": "a", "label_path": "b"}] * 2))
    with pytest.raises(DatasetError):
        read_manifest(path)
    path.write_text(json.dumps([{"id": "v1"}]))
    with pytest.raises(DatasetError):
        read_manifest(path)
    path.write_text(json.dumps({"id": "v1"}))
    with pytest.raises(DatasetError):
        read_manifest(path)
    path.write_text("{broken")
    with pytest.raises(DatasetError):
        read_manifest(path)


def test_dataset_round_trip(tmp_path):
    generator = SyntheticVideoGenerator(small_gen_config())
    videos = generator.generate()
    save_dataset(videos, generator.mapping, tmp_path)

    loaded, mapping = load_dataset(tmp_path)
    assert mapping == generator.mapping
    assert [v.video_id for v in loaded] == [v.video_id for v in videos]
    for original, reloaded in zip(videos, loaded):
        assert reloaded.labels == original.labels
        assert reloaded.features.values.tobytes() == original.features.values.tobytes()

    eval_videos, _ = load_dataset(tmp_path, split="eval")
    assert [v.video_id for v in eval_videos] == ["video_003"]

    write_mapping(tmp_path / MAPPING_NAME, ClassMapping(("x", "y")))
    with pytest.raises(DatasetError):
        load_dataset(tmp_path)


def test_subsample_and_recombine_are_inverse():
    rng = np.random.default_rng(0)
    for length in range(1, 14):
        values = rng.standard_normal((length, 2))
        for rate in range(1, 6):
            subs = augment_subsample(values, rate)
            assert len(subs) == rate
            assert sum(sub.shape[0] for sub in subs) == length
            np.testing.assert_array_equal(subs[0], values[::rate])
            np.testing.assert_array_equal(recombine(subs, length, rate), values)


def test_recombine_errors():
    subs = augment_subsample(np.arange(10), 4)
    with pytest.raises(DatasetError):
        recombine(subs[:3], 10, 4)
    with pytest.raises(DatasetError):
        recombine(subs, 11, 4)
    with pytest.raises(DatasetError):
        augment_subsample(np.arange(3), 0)


def test_median_filter_labels():
    labels = np.array([0, 0, 0, 2, 0, 0, 1, 1, 1, 1])
    np.testing.assert_array_equal(median_filter_labels(labels, 3), [0, 0, 0, 0, 0, 0, 1, 1, 1, 1])
    np.testing.assert_array_equal(median_filter_labels(labels, 1), labels)
    with pytest.raises(DatasetError):
        median_filter_labels(labels, 4)


def test_predict_with_augmentation():
    labels = np.repeat([0, 2, 1, 2], [7, 5, 9, 3])
    features = np.stack([labels, np.zeros_like(labels)], axis=1).astype(float)
    calls = []

    def predict(sub):
        calls.append(sub.shape[0])
        return sub[:, 0].astype(int)

    out = predict_with_augmentation(predict, features, rate=4, median_window=1)
    np.testing.assert_array_equal(out, labels)
    assert calls == [6, 6, 6, 6]

    # Fewer frames than sub-sequences leaves some empty and unpredicted.
    calls.clear()
    short = predict_with_augmentation(predict, features[:2], rate=4, median_window=3)
    np.testing.assert_array_equal(short, labels[:2])
    assert calls == [1, 1]
