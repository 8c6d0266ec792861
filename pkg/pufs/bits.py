"""
Bit-vector conventions shared by every module.

Bit strings are MSB-first: index 0 is the leftmost character. Challenges and
responses are ``uint8`` arrays holding 0/1, batched along the first axis.
"""

import numpy as np

from feedpuf.exceptions import UsageError


def bits_from_string(text: str) -> np.ndarray:
    if not text or set(text) - {"0", "1"}:
        raise UsageError(f"not a bit string: {text!r}")
    return np.frombuffer(text.encode("ascii"), dtype=np.uint8) - ord("0")


def bits_to_string(bits) -> str:
    return "".join("1" if b else "0" for b in np.asarray(bits).ravel())


def rows_to_strings(rows) -> list[str]:
    rows = np.asarray(rows, dtype=np.uint8)
    chars = (rows + ord("0")).astype(np.uint8)
    return [row.tobytes().decode("ascii") for row in chars]


def strings_to_rows(texts, width: int) -> np.ndarray:
    if len(texts) == 0:
        return np.zeros((0, width), dtype=np.uint8)
    joined = "".join(texts)
    if len(joined) != width * len(texts):
        raise UsageError(f"bit strings do not all have width {width}")
    rows = np.frombuffer(joined.encode("ascii"), dtype=np.uint8) - ord("0")
    if rows.max(initial=0) > 1:
        raise UsageError("bit strings may only contain 0 and 1")
    return rows.reshape(len(texts), width)


def as_batch(challenges, width: int) -> np.ndarray:
    batch = np.atleast_2d(np.asarray(challenges, dtype=np.uint8))
    if batch.shape[-1] != width:
        raise UsageError(f"challenge width {batch.shape[-1]} does not match {width}")
    return batch


def parity_transform(challenges) -> np.ndarray:
    """
    Additive-delay feature map: phi_i = prod_{j >= i} (1 - 2 c_j), plus a trailing 1.

    Works on a single challenge or a batch; returns float64 in {-1, +1}.
    """
    batch = np.atleast_2d(np.asarray(challenges, dtype=np.float64))
    signs = 1.0 - 2.0 * batch
    suffix = np.cumprod(signs[:, ::-1], axis=1)[:, ::-1]
    features = np.concatenate([suffix, np.ones((batch.shape[0], 1))], axis=1)
    return features if np.ndim(challenges) > 1 else features[0]
