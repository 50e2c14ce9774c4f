"""Sparse numeric node-attribute storage with observation status.

Entries are kept in parallel arrays sorted by (entity id, attribute id).
Values stay in their native units; regression slopes and intercepts absorb
scale and offset, so no normalization happens here. For MISSING entries the
stored value is the held-out ground truth, read only by evaluation code.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import IntEnum
from typing import Iterable

import numpy as np

from .errors import DataError
from .graph import Vocabulary


class Status(IntEnum):
    OBSERVED = 0
    MISSING = 1
    IMPUTED = 2


@dataclass
class AttributeTable:
    """Immutable (entity, attribute-type) -> value map with per-entry status."""

    types: Vocabulary
    entity_ids: np.ndarray  # int64, sorted by (entity, attr)
    attr_ids: np.ndarray  # int64
    values: np.ndarray  # float64, native units
    status: np.ndarray  # int8 Status codes
    index: dict[tuple[int, int], int] = field(repr=False)
    per_entity: list[list[int]] = field(repr=False)  # entry idx per entity, attr-sorted
    _stats: dict[int, tuple[int, float, float, float]] = field(default_factory=dict, repr=False)

    @classmethod
    def build(
        cls,
        n_entities: int,
        types: Vocabulary,
        entries: Iterable[tuple[int, int, float]],
        status: Status = Status.OBSERVED,
    ) -> "AttributeTable":
        rows = sorted(entries)
        entity_ids = np.array([e for e, _, _ in rows], dtype=np.int64)
        attr_ids = np.array([a for _, a, _ in rows], dtype=np.int64)
        values = np.array([v for _, _, v in rows], dtype=np.float64)
        statuses = np.full(len(rows), int(status), dtype=np.int8)
        index = {(e, a): i for i, (e, a, _) in enumerate(rows)}
        if len(index) != len(rows):
            raise DataError("duplicate (entity, attribute) entry")
        per_entity: list[list[int]] = [[] for _ in range(n_entities)]
        for i, (e, _, _) in enumerate(rows):
            per_entity[e].append(i)
        return cls(
            types=types,
            entity_ids=entity_ids,
            attr_ids=attr_ids,
            values=values,
            status=statuses,
            index=index,
            per_entity=per_entity,
        )

    @property
    def n_entries(self) -> int:
        return len(self.values)

    @property
    def n_types(self) -> int:
        return len(self.types)

    def entries_of(self, entity: int) -> list[int]:
        """Entry indices at ``entity``, ascending by attribute id."""
        return self.per_entity[entity]

    def with_status(self, status: np.ndarray) -> "AttributeTable":
        """A copy of the table with a replacement status array."""
        status = np.asarray(status, dtype=np.int8)
        if status.shape != self.status.shape:
            raise ValueError("status array shape mismatch")
        return AttributeTable(
            types=self.types,
            entity_ids=self.entity_ids,
            attr_ids=self.attr_ids,
            values=self.values,
            status=status.copy(),
            index=self.index,
            per_entity=self.per_entity,
        )

    # -- per-type statistics over OBSERVED entries ---------------------------

    def observed_values(self, attr: int) -> np.ndarray:
        mask = (self.attr_ids == attr) & (self.status == Status.OBSERVED)
        return self.values[mask]

    def _observed_stats(self, attr: int) -> tuple[int, float, float, float]:
        cached = self._stats.get(attr)
        if cached is None:
            vals = self.observed_values(attr)
            if vals.size == 0:
                raise DataError(
                    f"attribute type {self.types.label(attr)!r} has no observed entries"
                )
            cached = (vals.size, float(vals.min()), float(vals.max()), float(vals.mean()))
            self._stats[attr] = cached
        return cached

    def value_range(self, attr: int) -> float:
        """max - min over observed values of the type;Errors when none observed."""
        _, lo, hi, _ = self._observed_stats(attr)
        return hi - lo

    def mean_value(self, attr: int) -> float:
        return self._observed_stats(attr)[3]

    def type_summary(self, attr: int) -> tuple[int, float, float, float]:
        """(count, min, max, mean) over observed entries of the type."""
        return self._observed_stats(attr)
