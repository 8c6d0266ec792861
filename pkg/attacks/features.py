import numpy as np
from django.db import models

from pufs.bits import parity_transform


class FeatureMap(models.TextChoices):
    PARITY = "parity", "Parity"
    RAW_BITS = "raw_bits", "Raw bits"
    RAW_PLUS_PARITY = "raw_plus_parity", "Raw bits and parity"


def feature_width(fmap: FeatureMap, challenge_width: int) -> int:
    return {
        FeatureMap.PARITY: challenge_width + 1,
        FeatureMap.RAW_BITS: challenge_width,
        FeatureMap.RAW_PLUS_PARITY: 2 * challenge_width + 1,
    }[FeatureMap(fmap)]


def featurize(challenges, fmap: FeatureMap) -> np.ndarray:
    """Map 0/1 challenges to +-1 features; a single challenge gives a vector, a batch a matrix."""
    single = np.ndim(challenges) == 1
    batch = np.atleast_2d(np.asarray(challenges, dtype=np.float64))
    fmap = FeatureMap(fmap)
    if fmap == FeatureMap.PARITY:
        features = parity_transform(batch)
    elif fmap == FeatureMap.RAW_BITS:
        features = 2.0 * batch - 1.0
    else:
        features = np.concatenate([2.0 * batch - 1.0, parity_transform(batch)], axis=1)
    return features[0] if single else features
