"""Uniform grid directory over the MBRs of stored uncertainty regions.

MBRs are treated as half-open boxes ``[x0, x1) x [y0, y1)`` and query
rectangles as closed boxes; a location is a candidate for a query whenever
the two intersect. Every cell center of a location lies strictly inside its
MBR, so a location with positive probability in a query rectangle is always
a candidate.
"""
from __future__ import annotations

import math
from collections import defaultdict

import numpy as np

from ..errors import DataError


def mbr_intersects(mbr, rect):
    x0, y0, x1, y1 = mbr
    a0, b0, a1, b1 = rect
    return x0 <= a1 and a0 < x1 and y0 <= b1 and b0 < y1


class GridDirectory:
    def __init__(self, cell: float, origin=(0.0, 0.0)):
        if not cell > 0:
            raise DataError("directory cell size must be positive")
        self.cell = float(cell)
        self.origin = (float(origin[0]), float(origin[1]))
        self.ids: list = []
        self.mbrs = np.zeros((0, 4))
        self.buckets: dict = {}

    def __len__(self):
        return len(self.ids)

    def _bucket(self, v, axis):
        return math.floor((v - self.origin[axis]) / self.cell)

    def _mbr_range(self, lo, hi, axis):
        a = self._bucket(lo, axis)
        b = math.ceil((hi - self.origin[axis]) / self.cell) - 1
        return a, max(a, b)

    def bucket_keys(self, mbr):
        """Directory cells overlapped by a half-open MBR."""
        x0, y0, x1, y1 = mbr
        bx0, bx1 = self._mbr_range(x0, x1, 0)
        by0, by1 = self._mbr_range(y0, y1, 1)
        return [(bx, by) for bx in range(bx0, bx1 + 1) for by in range(by0, by1 + 1)]

    def candidates_idx(self, rect) -> np.ndarray:
        """Positions (into ``ids``) of the locations whose MBR meets ``rect``."""
        a0, b0, a1, b1 = rect
        a0, a1 = min(a0, a1), max(a0, a1)
        b0, b1 = min(b0, b1), max(b0, b1)
        bx0, bx1 = self._bucket(a0, 0), self._bucket(a1, 0)
        by0, by1 = self._bucket(b0, 1), self._bucket(b1, 1)
        hits = []
        if (bx1 - bx0 + 1) * (by1 - by0 + 1) > len(self.buckets):
            for (bx, by), pos in self.buckets.items():
                if bx0 <= bx <= bx1 and by0 <= by <= by1:
                    hits.append(pos)
        else:
            for bx in range(bx0, bx1 + 1):
                for by in range(by0, by1 + 1):
                    pos = self.buckets.get((bx, by))
                    if pos is not None:
                        hits.append(pos)
        if not hits:
            return np.zeros(0, dtype=np.int64)
        pos = np.unique(np.concatenate(hits))
        m = self.mbrs[pos]
        keep = (m[:, 0] <= a1) & (a0 < m[:, 2]) & (m[:, 1] <= b1) & (b0 < m[:, 3])
        return pos[keep]

    def raw_candidates(self, rect) -> set:
        """Union of the overlapped buckets before the MBR test."""
        a0, b0, a1, b1 = rect
        out = set()
        for bx in range(self._bucket(min(a0, a1), 0), self._bucket(max(a0, a1), 0) + 1):
            for by in range(self._bucket(min(b0, b1), 1), self._bucket(max(b0, b1), 1) + 1):
                pos = self.buckets.get((bx, by))
                if pos is not None:
                    out.update(self.ids[p] for p in pos)
        return out

    def candidates(self, rect) -> set:
        return {self.ids[p] for p in self.candidates_idx(rect)}

    def ids_in_bucket(self, key) -> set:
        pos = self.buckets.get(key)
        return set() if pos is None else {self.ids[p] for p in pos}


def build_directory(locations, cell: float, origin=(0.0, 0.0)) -> GridDirectory:
    """``locations`` is an iterable of ``(id, (x0, y0, x1, y1))``."""
    d = GridDirectory(cell, origin)
    locations = list(locations)
    d.ids = [lid for lid, _ in locations]
    d.mbrs = np.array([m for _, m in locations], dtype=float).reshape(-1, 4)
    tmp = defaultdict(list)
    for pos, (_, mbr) in enumerate(locations):
        for key in d.bucket_keys(mbr):
            tmp[key].append(pos)
    d.buckets = {k: np.array(v, dtype=np.int64) for k, v in tmp.items()}
    return d


def candidates(d: GridDirectory, rect) -> set:
    return d.candidates(rect)
