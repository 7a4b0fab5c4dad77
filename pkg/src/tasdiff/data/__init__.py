"""Datasets: records, synthetic generation, file formats and augmentation."""

from .models import ClassMapping, DatasetError, FeatureSequence, ManifestEntry, VideoRecord
from .synthetic import SyntheticVideoGenerator, generate_synthetic
from .io import (
    FEATURE_HEADER,
    FEATURE_MAGIC,
    FEATURE_VERSION,
    MANIFEST_NAME,
    MAPPING_NAME,
    FeatureFormatError,
    decode_features,
    encode_features,
    load_dataset,
    load_video,
    read_features,
    read_labels,
    read_manifest,
    read_mapping,
    save_dataset,
    save_video,
    video_file_name,
    write_features,
    write_labels,
    write_manifest,
    write_mapping,
)
from .augment import augment_subsample, median_filter_labels, predict_with_augmentation, recombine

__all__ = [
    "ClassMapping",
    "DatasetError",
    "FeatureSequence",
    "ManifestEntry",
    "VideoRecord",

    "SyntheticVideoGenerator",
    "generate_synthetic",

    "FEATURE_HEADER",
    "FEATURE_MAGIC",
    "FEATURE_VERSION",
    "MANIFEST_NAME",
    "MAPPING_NAME",
    "FeatureFormatError",
    "decode_features",
    "encode_features",
    "load_dataset",
    "load_video",
    "read_features",
    "read_labels",
    "read_manifest",
    "read_mapping",
    "save_dataset",
    "save_video",
    "video_file_name",
    "write_features",
    "write_labels",
    "write_manifest",
    "write_mapping",

    "augment_subsample",
    "median_filter_labels",
    "predict_with_augmentation",
    "recombine",
]
