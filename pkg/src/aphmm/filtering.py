"""Per-timestamp state filters.

The histogram filter replaces sort-based best-n selection: values in [0, 1]
are bucketed into n equal-width bins using a base+offset layout, and selection
walks bins from the highest value range downward until the accumulated state
count reaches the filter size.  The result is a superset of the exact top-n
set (whole bins are taken, including the crossing bin), found without sorting.

A sort-based filter with identical interface is provided for accuracy
comparisons.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValueOutOfRange

DEFAULT_BIN_COUNT = 16
DEFAULT_FILTER_SIZE = 500


@dataclass(frozen=True)
class FilterConfig:
    kind: str = "histogram"  # "histogram" | "sort"
    bin_count: int = DEFAULT_BIN_COUNT
    filter_size: int = DEFAULT_FILTER_SIZE

    def __post_init__(self):
        if self.kind not in ("histogram", "sort"):
            raise ValueError(f"unknown filter kind {self.kind!r}")
        if self.bin_count < 1 or self.filter_size < 1:
            raise ValueError("bin_count and filter_size must be positive")

    def make(self) -> "HistogramFilter | SortFilter":
        if self.kind == "histogram":
            return HistogramFilter(self.bin_count, self.filter_size)
        return SortFilter(self.filter_size)


class HistogramFilter:
    """n-bin base+offset selector over values in [0, 1].

    Each bin owns a region of the member store; ``base`` marks the region
    start and ``offset`` the next free slot, so discarding the negligible
    bins needs no sorting.  Bin b covers (b/n, (b+1)/n] with 1.0 clamped into
    the last bin.
    """

    def __init__(self, bin_count: int = DEFAULT_BIN_COUNT, filter_size: int = DEFAULT_FILTER_SIZE):
        if bin_count < 1:
            raise ValueError("bin_count must be positive")
        if filter_size < 1:
            raise ValueError("filter_size must be positive")
        self.bin_count = bin_count
        self.filter_size = filter_size
        self._members: list[list[int]] = [[] for _ in range(bin_count)]
        self._count = 0
        self.selections = 0

    @property
    def bin_width(self) -> float:
        return 1.0 / self.bin_count

    def bin_of(self, value: float) -> int:
        if not (0.0 <= value <= 1.0):
            raise ValueOutOfRange(f"filter value {value!r} outside [0,1]")
        return min(int(value * self.bin_count), self.bin_count - 1)

    def bases(self) -> np.ndarray:
        """Region start offsets per bin in the flattened member store."""
        sizes = [len(m) for m in self._members]
        return np.concatenate(([0], np.cumsum(sizes)[:-1])).astype(np.int64)

    def offsets(self) -> np.ndarray:
        """Next free slot per bin, relative to its base."""
        return np.array([len(m) for m in self._members], dtype=np.int64)

    def insert(self, state_id: int, value: float) -> None:
        self._members[self.bin_of(value)].append(int(state_id))
        self._count += 1

    def insert_many(self, state_ids: np.ndarray, values: np.ndarray) -> None:
        values = np.asarray(values, dtype=np.float64)
        if len(values) == 0:
            return
        if values.min() < 0.0 or values.max() > 1.0:
            bad = values[(values < 0.0) | (values > 1.0)][0]
            raise ValueOutOfRange(f"filter value {bad!r} outside [0,1]")
        bins = np.minimum((values * self.bin_count).astype(np.int64), self.bin_count - 1)
        order = np.argsort(bins, kind="stable")
        sorted_bins = bins[order]
        sorted_ids = np.asarray(state_ids)[order]
        starts = np.searchsorted(sorted_bins, np.arange(self.bin_count))
        ends = np.searchsorted(sorted_bins, np.arange(self.bin_count), side="right")
        for b in range(self.bin_count):
            if ends[b] > starts[b]:
                self._members[b].extend(int(x) for x in sorted_ids[starts[b]:ends[b]])
        self._count += len(values)

    def select(self) -> np.ndarray:
        """Walk bins from the top of the value range down; stop after the first
        bin where the running count reaches the filter size and return every
        state seen so far (the crossing bin is taken whole)."""
        self.selections += 1
        picked: list[int] = []
        for b in range(self.bin_count - 1, -1, -1):
            members = self._members[b]
            picked.extend(members)
            if len(picked) >= self.filter_size:
                break
        return np.array(sorted(picked), dtype=np.int64)

    def reset(self) -> None:
        for m in self._members:
            m.clear()
        self._count = 0

    def __len__(self) -> int:
        return self._count


class SortFilter:
    """Exact best-n selection; the baseline the histogram filter replaces."""

    def __init__(self, filter_size: int = DEFAULT_FILTER_SIZE):
        if filter_size < 1:
            raise ValueError("filter_size must be positive")
        self.filter_size = filter_size
        self._ids: list[int] = []
        self._values: list[float] = []
        self.selections = 0

    def insert(self, state_id: int, value: float) -> None:
        if not (0.0 <= value <= 1.0):
            raise ValueOutOfRange(f"filter value {value!r} outside [0,1]")
        self._ids.append(int(state_id))
        self._values.append(float(value))

    def insert_many(self, state_ids: np.ndarray, values: np.ndarray) -> None:
        values = np.asarray(values, dtype=np.float64)
        if len(values) and (values.min() < 0.0 or values.max() > 1.0):
            bad = values[(values < 0.0) | (values > 1.0)][0]
            raise ValueOutOfRange(f"filter value {bad!r} outside [0,1]")
        self._ids.extend(int(x) for x in np.asarray(state_ids))
        self._values.extend(float(v) for v in values)

    def select(self) -> np.ndarray:
        self.selections += 1
        if not self._ids:
            return np.array([], dtype=np.int64)
        ids = np.array(self._ids, dtype=np.int64)
        values = np.array(self._values)
        if len(ids) <= self.filter_size:
            return np.sort(ids)
        # deterministic: by value descending, then id ascending
        order = np.lexsort((ids, -values))
        return np.sort(ids[order[: self.filter_size]])

    def reset(self) -> None:
        self._ids.clear()
        self._values.clear()

    def __len__(self) -> int:
        return len(self._ids)
