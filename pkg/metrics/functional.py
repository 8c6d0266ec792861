"""
Hamming distance and weight, the three functional metrics, and the average bit
value (ABV) that reduces a cyclic response sequence to one response vector.

Every metric accumulates integer bit counts and divides once at the end, so the
result does not depend on evaluation order.
"""

from itertools import combinations

import numpy as np

from feedpuf.exceptions import UsageError
from pufs.bits import bits_from_string
from pufs.models import Trajectory


def _vector(value) -> np.ndarray:
    if isinstance(value, str):
        return bits_from_string(value)
    return np.asarray(value, dtype=np.uint8)


def _stack(values) -> np.ndarray:
    if isinstance(values, np.ndarray):
        return values.astype(np.uint8, copy=False)
    rows = [_vector(value) for value in values]
    if len({row.shape for row in rows}) > 1:
        raise UsageError("response vectors have different widths")
    return np.stack(rows) if rows else np.empty((0, 0), dtype=np.uint8)


def hamming_distance(r1, r2) -> int:
    a, b = _vector(r1), _vector(r2)
    if a.shape != b.shape:
        raise UsageError(f"cannot compare {a.size}-bit and {b.size}-bit responses")
    return int(np.count_nonzero(a != b))


def hamming_weight(r) -> int:
    return int(np.count_nonzero(_vector(r)))


def _population(responses) -> np.ndarray:
    arr = _stack(responses)
    if arr.ndim == 2:
        arr = arr[:, None, :]
    if arr.ndim != 3:
        raise UsageError("expected responses shaped (k, n) or (k, m, n)")
    if arr.shape[0] < 2:
        raise UsageError(f"uniqueness needs at least two instances, got {arr.shape[0]}")
    return arr


def uniqueness(responses) -> float:
    """
    Normalized inter-instance Hamming distance, in percent.

    ``responses`` is ``(k, n)`` for one challenge or ``(k, m, n)`` for ``m``
    challenges; with several challenges each one weighs the same.
    """
    arr = _population(responses)
    k, m, n = arr.shape
    # a bit position with `ones` ones among k instances differs in ones * (k - ones) pairs
    ones = arr.sum(axis=0, dtype=np.int64)
    differing = int((ones * (k - ones)).sum())
    return 100.0 * 2 * differing / (k * (k - 1) * m * n)


def pairwise_uniqueness(responses) -> list[tuple[int, int, float]]:
    """Per-pair normalized Hamming distance, in percent."""
    arr = _population(responses)
    _, m, n = arr.shape
    return [
        (i, j, 100.0 * int(np.count_nonzero(arr[i] != arr[j])) / (m * n))
        for i, j in combinations(range(arr.shape[0]), 2)
    ]


def reliability(reference, samples) -> float:
    """
    One minus the mean intra-instance Hamming distance to ``reference``, in percent.

    ``samples`` stacks ``s`` responses shaped like ``reference`` along a new first axis.
    """
    ref = _vector(reference)
    stacked = _stack(samples)
    if stacked.ndim == ref.ndim:
        stacked = stacked[None]
    if stacked.shape[1:] != ref.shape:
        raise UsageError(f"samples shaped {stacked.shape[1:]} do not match the reference {ref.shape}")
    s = stacked.shape[0]
    if s < 1:
        raise UsageError("reliability needs at least one sample")
    differing = int(np.count_nonzero(stacked != ref))
    value = 100.0 * (1.0 - differing / (s * ref.size))
    assert 0.0 <= value <= 100.0
    return value


def uniformity(responses) -> float:
    """Normalized Hamming weight over all responses, in percent."""
    arr = _stack(responses)
    if arr.size == 0:
        raise UsageError("uniformity needs at least one response")
    return 100.0 * int(np.count_nonzero(arr)) / arr.size


def _responses(traj) -> np.ndarray:
    return traj.responses if isinstance(traj, Trajectory) else np.asarray(traj, dtype=np.uint8)


def abv(traj) -> np.ndarray:
    """Fraction of cycles each response bit is high; the cycle axis is second to last."""
    return _responses(traj).mean(axis=-2)


def abv_response(traj) -> np.ndarray:
    """ABV thresholded at one half, ties to 1."""
    responses = _responses(traj)
    cycles = responses.shape[-2]
    if cycles < 1:
        raise UsageError("ABV needs at least one cycle")
    return (2 * responses.sum(axis=-2, dtype=np.int64) >= cycles).astype(np.uint8)
