"""Uncertainty sets: finite unions of closed intervals, or finite label sets."""

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError


def _normalise_intervals(intervals):
    arr = np.asarray(intervals, dtype=float).reshape(-1, 2)
    if arr.size and np.any(arr[:, 0] > arr[:, 1]):
        raise DomainError("interval lower end exceeds upper end")
    if arr.shape[0] <= 1:
        return arr
    arr = arr[np.argsort(arr[:, 0], kind="stable")]
    merged = [arr[0].copy()]
    for lo, hi in arr[1:]:
        if lo <= merged[-1][1]:
            merged[-1][1] = max(merged[-1][1], hi)
        else:
            merged.append(np.array([lo, hi]))
    return np.array(merged)


@dataclass(frozen=True, eq=False)
class UncertaintySet:
    """A set with its nominal coverage level.

    ``kind`` is ``"interval_union"`` (closed, sorted, disjoint intervals) or
    ``"label_subset"``.
    """

    kind: str
    intervals: np.ndarray = field(default_factory=lambda: np.empty((0, 2)))
    labels: frozenset = frozenset()
    level: float = float("nan")

    def __post_init__(self):
        if self.kind == "interval_union":
            object.__setattr__(self, "intervals", _normalise_intervals(self.intervals))
        elif self.kind == "label_subset":
            object.__setattr__(self, "labels", frozenset(self.labels))
        else:
            raise DomainError(f"unknown set kind {self.kind!r}")

    @classmethod
    def interval(cls, lo, hi, level=float("nan")):
        return cls("interval_union", np.array([[lo, hi]], dtype=float), level=level)

    @classmethod
    def from_labels(cls, labels, level=float("nan")):
        return cls("label_subset", labels=frozenset(labels), level=level)

    @classmethod
    def empty_like(cls, other):
        return cls(other.kind, level=other.level)

    def is_empty(self):
        return self.intervals.shape[0] == 0 if self.kind == "interval_union" else not self.labels

    def measure(self):
        """Total length, or number of labels."""
        if self.kind == "interval_union":
            return float(np.sum(self.intervals[:, 1] - self.intervals[:, 0]))
        return float(len(self.labels))

    def contains(self, x):
        if self.kind == "label_subset":
            return x in self.labels
        iv = self.intervals
        return bool(np.any((iv[:, 0] <= x) & (x <= iv[:, 1])))

    def hull(self):
        if self.kind != "interval_union" or self.is_empty():
            raise DomainError("hull needs a non-empty interval union")
        return float(self.intervals[0, 0]), float(self.intervals[-1, 1])

    def intersect(self, other):
        _same_kind(self, other)
        if self.kind == "label_subset":
            return UncertaintySet.from_labels(self.labels & other.labels, self.level)
        out = []
        a, b = self.intervals, other.intervals
        i = j = 0
        while i < len(a) and j < len(b):
            lo, hi = max(a[i, 0], b[j, 0]), min(a[i, 1], b[j, 1])
            if lo <= hi:
                out.append((lo, hi))
            if a[i, 1] < b[j, 1]:
                i += 1
            else:
                j += 1
        return UncertaintySet("interval_union", np.array(out).reshape(-1, 2), level=self.level)

    def issubset(self, other, tol=1e-12):
        _same_kind(self, other)
        if self.kind == "label_subset":
            return self.labels <= other.labels
        for lo, hi in self.intervals:
            inside = (other.intervals[:, 0] <= lo + tol) & (hi <= other.intervals[:, 1] + tol)
            if not inside.any():
                return False
        return True

    def __eq__(self, other):
        if not isinstance(other, UncertaintySet) or other.kind != self.kind:
            return NotImplemented
        if self.kind == "label_subset":
            return self.labels == other.labels
        return self.intervals.shape == other.intervals.shape and np.allclose(self.intervals, other.intervals)

    def to_json(self):
        body = {"kind": self.kind, "level": None if np.isnan(self.level) else self.level}
        if self.kind == "interval_union":
            body["intervals"] = self.intervals.tolist()
        else:
            body["labels"] = sorted(self.labels, key=str)
        return body

    @classmethod
    def from_json(cls, body):
        level = body.get("level")
        level = float("nan") if level is None else float(level)
        if body["kind"] == "interval_union":
            return cls("interval_union", np.asarray(body["intervals"], dtype=float), level=level)
        return cls("label_subset", labels=frozenset(body["labels"]), level=level)


def _same_kind(a, b):
    if a.kind != b.kind:
        raise DomainError("sets must be of the same kind")
