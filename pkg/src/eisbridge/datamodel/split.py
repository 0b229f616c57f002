"""Train/test splitting policies.

Two policies are supported:

``first_n_train``
    Cells are grouped by their full metadata (test-condition labels); within
    each group, ordered by cell number, the first ``n`` go to training and
    the rest to test.

``odd_even``
    Odd-numbered cells train, even-numbered cells test. The cell number is
    the trailing integer in the cell id, falling back to the 1-based input
    position when the id carries no digits.
"""

from __future__ import annotations

import re
from typing import Sequence

from ..exceptions import GroupTooSmallError, MissingFieldError
from .types import CellHistory, DatasetSplit

_TRAILING_INT = re.compile(r"(\d+)(?!.*\d)")


def _cell_number(cell: CellHistory, position: int) -> int:
    m = _TRAILING_INT.search(cell.cell_id)
    return int(m.group(1)) if m else position + 1


def _first_n_train(cells: Sequence[CellHistory], n: int) -> DatasetSplit:
    if n < 1:
        raise ValueError("first_n_train needs n >= 1")
    groups: dict = {}
    for pos, cell in enumerate(cells):
        key = tuple(sorted(cell.metadata.items()))
        groups.setdefault(key, []).append((pos, cell))
    train_ids = set()
    for key, members in groups.items():
        if len(members) <= n:
            label = dict(key) or "<no metadata>"
            raise GroupTooSmallError(
                f"condition group {label} has {len(members)} cell(s); "
                f"first_n_train({n}) leaves no test cells"
            )
        ordered = sorted(members, key=lambda pc: (_cell_number(pc[1], pc[0]), pc[1].cell_id))
        for _, cell in ordered[:n]:
            train_ids.add(cell.cell_id)
    train = tuple(c for c in cells if c.cell_id in train_ids)
    test = tuple(c for c in cells if c.cell_id not in train_ids)
    return DatasetSplit(train=train, test=test)


def _odd_even(cells: Sequence[CellHistory]) -> DatasetSplit:
    train, test = [], []
    for pos, cell in enumerate(cells):
        (train if _cell_number(cell, pos) % 2 == 1 else test).append(cell)
    return DatasetSplit(train=tuple(train), test=tuple(test))


def split_by_policy(cells: Sequence[CellHistory], policy: str, n: int | None = None) -> DatasetSplit:
    if not cells:
        raise MissingFieldError("no cells to split")
    if policy == "first_n_train":
        if n is None:
            raise ValueError("first_n_train needs n")
        return _first_n_train(cells, int(n))
    if policy == "odd_even":
        return _odd_even(cells)
    raise ValueError(f"unknown split policy {policy!r}")
