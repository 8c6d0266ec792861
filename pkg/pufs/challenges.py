import numpy as np

from feedpuf.exceptions import ConfigurationError, InfeasibleError

from .models import WEAK_CHALLENGE_LIMIT, PufType

CHALLENGE_STREAM = 4

# above this width challenges are drawn bitwise instead of by index
_INDEX_SAMPLING_LIMIT = 24


def index_to_bits(indices, width: int) -> np.ndarray:
    shifts = np.arange(width - 1, -1, -1, dtype=np.int64)
    return ((np.asarray(indices, dtype=np.int64)[:, None] >> shifts) & 1).astype(np.uint8)


def all_challenges(width: int) -> np.ndarray:
    if width > WEAK_CHALLENGE_LIMIT:
        raise ConfigurationError(f"refusing to enumerate 2^{width} challenges")
    return index_to_bits(np.arange(2**width), width)


def _first_occurrences(rows: np.ndarray) -> np.ndarray:
    _, first = np.unique(rows, axis=0, return_index=True)
    return rows[np.sort(first)]


def sample_challenges(width: int, num: int, seed: int, distinct: bool = True) -> np.ndarray:
    """Seeded uniform challenges ``(num, width)``, in draw order."""
    if num < 1:
        raise ConfigurationError(f"need at least one challenge, got {num}")
    if distinct and width < 63 and num > 2**width:
        raise InfeasibleError(f"cannot draw {num} distinct challenges from 2^{width}")
    rng = np.random.default_rng([seed, CHALLENGE_STREAM])
    if width <= _INDEX_SAMPLING_LIMIT:
        indices = rng.choice(2**width, size=num, replace=not distinct)
        return index_to_bits(indices, width)

    rows = rng.integers(0, 2, size=(num, width), dtype=np.uint8)
    if distinct:
        rows = _first_occurrences(rows)
        while rows.shape[0] < num:
            extra = rng.integers(0, 2, size=(num - rows.shape[0], width), dtype=np.uint8)
            rows = _first_occurrences(np.vstack([rows, extra]))
    return rows


def challenge_space(width: int, puf_type: PufType, m: int, seed: int) -> np.ndarray:
    """Whole challenge space for weak PUFs, ``m`` seeded draws for strong ones."""
    if PufType(puf_type) == PufType.WEAK:
        return all_challenges(width)
    distinct = width >= 63 or m <= 2**width
    return sample_challenges(width, m, seed, distinct=distinct)
