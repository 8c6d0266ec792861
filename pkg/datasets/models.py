"""
In-memory CRP datasets.

A dataset is column-oriented: one row per (challenge, response, cycle) triple.
Acyclic datasets hold one row per challenge with ``cycle_index == 1``; cyclic
datasets hold one CRP-equivalent row per cycle of each held challenge.
"""

from dataclasses import dataclass, field, replace
from typing import NamedTuple

import numpy as np

from feedpuf.exceptions import UsageError
from pufs.bits import bits_to_string


class CrpRow(NamedTuple):
    instance_id: str
    challenge: str
    response: str
    cycle_index: int
    faulty: bool


def challenge_groups(challenges: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """
    Label rows by external challenge.

    Returns ``(group, sizes)``: ``group[r]`` numbers challenges in order of first
    appearance and ``sizes[g]`` counts the rows of group ``g``.
    """
    if challenges.shape[0] == 0:
        return np.zeros(0, dtype=np.intp), np.zeros(0, dtype=np.intp)
    packed = np.ascontiguousarray(np.packbits(challenges, axis=1))
    keys = packed.view(np.dtype((np.void, packed.shape[1]))).ravel()
    _, first, inverse, counts = np.unique(keys, return_index=True, return_inverse=True, return_counts=True)
    order = np.argsort(first, kind="stable")
    rank = np.empty_like(order)
    rank[order] = np.arange(order.size)
    return rank[inverse.ravel()], counts[order]


@dataclass(frozen=True, eq=False)
class CrpDataset:
    instance_id: str
    challenges: np.ndarray  # (rows, n_c) uint8
    responses: np.ndarray  # (rows, n) uint8
    cycle_index: np.ndarray  # (rows,) int64, 1-based
    faulty: bool
    meta: dict = field(default_factory=dict)
    train_idx: np.ndarray | None = None
    test_idx: np.ndarray | None = None

    def __post_init__(self):
        rows = self.challenges.shape[0]
        if self.responses.shape[0] != rows or self.cycle_index.shape[0] != rows:
            raise UsageError("dataset columns have different lengths")
        if rows and self.cycle_index.min() < 1:
            raise UsageError("cycle_index is 1-based")

    def __len__(self):
        return self.challenges.shape[0]

    @property
    def challenge_width(self) -> int:
        return self.challenges.shape[1]

    @property
    def response_width(self) -> int:
        return self.responses.shape[1]

    @property
    def is_split(self) -> bool:
        return self.train_idx is not None

    def num_challenges(self) -> int:
        return len(challenge_groups(self.challenges)[1])

    def crp_equivalents(self) -> int:
        """Distinct (challenge, response) pairs."""
        joined = np.concatenate([self.challenges, self.responses], axis=1)
        return len(challenge_groups(joined)[1])

    def with_split(self, train_idx, test_idx, **meta) -> "CrpDataset":
        return replace(
            self,
            train_idx=np.asarray(train_idx, dtype=np.intp),
            test_idx=np.asarray(test_idx, dtype=np.intp),
            meta={**self.meta, **meta},
        )

    def subset(self, idx) -> "CrpDataset":
        idx = np.asarray(idx, dtype=np.intp)
        return replace(
            self,
            challenges=self.challenges[idx],
            responses=self.responses[idx],
            cycle_index=self.cycle_index[idx],
            train_idx=None,
            test_idx=None,
        )

    def train(self) -> "CrpDataset":
        if not self.is_split:
            raise UsageError("dataset has not been split")
        return self.subset(self.train_idx)

    def test(self) -> "CrpDataset":
        if not self.is_split:
            raise UsageError("dataset has not been split")
        return self.subset(self.test_idx)

    def rows(self):
        for ch, resp, cycle in zip(self.challenges, self.responses, self.cycle_index):
            yield CrpRow(self.instance_id, bits_to_string(ch), bits_to_string(resp), int(cycle), self.faulty)
