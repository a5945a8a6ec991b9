"""Complete quad-tree over a gridded pdf, stored as a linear quad-tree.

The tree is kept implicitly: only its leaves are materialized, sorted by
Morton code. A leaf is either a single cell (level 0) or a collapsed block
of ``4**level`` cells whose mass is spread uniformly. Every internal node
is a contiguous Morton range, so node aggregates come from prefix sums over
the leaves.
"""
from __future__ import annotations

from functools import lru_cache

import numpy as np

from ..errors import DataError, GridSideError, OutOfBoundsError
from ..synth import GridPdf
from . import morton


class PdfQuadTree:
    __slots__ = ("location_id", "n", "depth", "domain", "start", "level", "mass", "cum",
                 "eps_mass", "eps_dev")

    def __init__(self, n, start, level, mass, location_id=None, domain=None,
                 eps_mass=0.0, eps_dev=0.0):
        if n < 1 or n & (n - 1):
            raise GridSideError(f"grid side {n} is not a power of two")
        self.n = n
        self.depth = n.bit_length() - 1
        self.location_id = location_id
        self.domain = domain
        self.start = np.asarray(start, dtype=np.int64)
        self.level = np.asarray(level, dtype=np.int8)
        self.mass = np.asarray(mass, dtype=np.float64)
        self.cum = np.concatenate(([0.0], np.cumsum(self.mass)))
        self.eps_mass = eps_mass
        self.eps_dev = eps_dev

    def __len__(self):
        return len(self.start)

    def __repr__(self):
        return (f"PdfQuadTree(id={self.location_id!r}, n={self.n}, leaves={len(self)}, "
                f"collapsed={int((self.level > 0).sum())})")

    @property
    def total(self) -> float:
        return float(self.cum[-1])

    @property
    def n_collapsed(self) -> int:
        return int((self.level > 0).sum())

    def _sizes(self):
        return np.left_shift(np.int64(1), 2 * self.level.astype(np.int64))

    @property
    def max_cell(self) -> float:
        return float((self.mass / self._sizes()).max()) if len(self) else 0.0

    # ----------------------------------------------------------- nodes

    def node(self, level: int, code: int):
        """``(mass, max_cell, collapsed)`` of the node with Morton prefix
        ``code`` at ``level`` (0 = cells, ``depth`` = root)."""
        lo = int(code) << (2 * level)
        hi = lo + (1 << (2 * level))
        k = int(np.searchsorted(self.start, lo, side="right")) - 1
        if k >= 0:
            lk = int(self.level[k])
            if lk > level and int(self.start[k]) + (1 << (2 * lk)) > lo:
                per_cell = self.mass[k] / (1 << (2 * lk))
                return per_cell * (1 << (2 * level)), per_cell, False
        a = int(np.searchsorted(self.start, lo))
        b = int(np.searchsorted(self.start, hi))
        if a == b:
            return 0.0, 0.0, False
        m = float(self.cum[b] - self.cum[a])
        per_cell = self.mass[a:b] / self._sizes()[a:b]
        collapsed = b - a == 1 and int(self.level[a]) == level and level > 0
        return m, float(per_cell.max()), collapsed

    def nodes(self, level: int):
        """Arrays ``(codes, mass, max_cell, collapsed)`` of the nonzero nodes
        present at ``level``. Blocks inside a larger collapsed leaf are not
        nodes of the tree and are omitted."""
        keep = self.level <= level
        start, lev, mass = self.start[keep], self.level[keep], self.mass[keep]
        if not len(start):
            empty = np.zeros(0)
            return empty.astype(np.int64), empty, empty, empty.astype(bool)
        prefix = start >> (2 * level)
        cut = np.flatnonzero(np.diff(prefix)) + 1
        first = np.concatenate(([0], cut))
        codes = prefix[first]
        gmass = np.add.reduceat(mass, first)
        per_cell = mass / np.left_shift(np.int64(1), 2 * lev.astype(np.int64))
        gmax = np.maximum.reduceat(per_cell, first)
        count = np.diff(np.concatenate((first, [len(start)])))
        collapsed = (count == 1) & (lev[first] == level) & (level > 0)
        return codes, gmass, gmax, collapsed

    # --------------------------------------------------------- queries

    def _check_rect(self, rect):
        i0, j0, i1, j1 = (int(v) for v in rect)
        if not (0 <= i0 <= i1 <= self.n and 0 <= j0 <= j1 <= self.n):
            raise OutOfBoundsError(f"rectangle {rect} outside grid of side {self.n}")
        return i0, j0, i1, j1

    def block_masses(self, lo, lvl):
        """Masses of aligned blocks given by Morton start ``lo`` and level."""
        lo = np.asarray(lo, dtype=np.int64)
        lvl = np.asarray(lvl, dtype=np.int64)
        if not len(self) or not lo.size:
            return np.zeros(lo.shape)
        size = np.left_shift(np.int64(1), 2 * lvl)
        a = np.searchsorted(self.start, lo)
        b = np.searchsorted(self.start, lo + size)
        out = self.cum[b] - self.cum[a]
        k = np.searchsorted(self.start, lo, side="right") - 1
        valid = k >= 0
        kk = np.where(valid, k, 0)
        lk = self.level[kk].astype(np.int64)
        ksize = np.left_shift(np.int64(1), 2 * lk)
        big = valid & (lk > lvl) & (self.start[kk] + ksize > lo)
        if big.any():
            out = np.where(big, self.mass[kk] * size / ksize, out)
        return out

    def mass_in_rect(self, rect) -> float:
        """Probability mass in the half-open cell rectangle
        ``(i0, j0, i1, j1)``; collapsed blocks straddling the rectangle
        contribute pro rata."""
        i0, j0, i1, j1 = self._check_rect(rect)
        if i0 == i1 or j0 == j1 or not len(self):
            return 0.0
        if i0 == 0 and j0 == 0 and i1 == self.n and j1 == self.n:
            return self.total
        lo, lvl = decompose(i0, j0, i1, j1, self.n)
        return float(self.block_masses(lo, lvl).sum())

    def mass_bounds(self, rect, threshold=None):
        """Refine ``(lower, upper)`` bounds on :meth:`mass_in_rect` top-down,
        one tree level at a time, stopping as soon as both bounds fall on
        the same side of ``threshold``. Without a threshold the bounds are
        refined down to the cells and coincide."""
        i0, j0, i1, j1 = self._check_rect(rect)
        if i0 == i1 or j0 == j1 or not len(self):
            return 0.0, 0.0
        area = (i1 - i0) * (j1 - j0)
        lower, upper = 0.0, min(self.total, self.max_cell * area)
        if threshold is not None and upper < threshold:
            return lower, upper
        bi_leaf, bj_leaf = morton.decode(self.start)
        side_leaf = np.left_shift(np.int64(1), self.level.astype(np.int64))
        leaf_overlap = _overlap(bi_leaf, bj_leaf, side_leaf, i0, j0, i1, j1)
        leaf_part = self.mass * leaf_overlap / (side_leaf * side_leaf)
        for level in range(self.depth, -1, -1):
            # leaves collapsed above this level are resolved exactly
            exact = leaf_part[self.level > level].sum()
            codes, m, mx, collapsed = self.nodes(level)
            side = 1 << level
            bi, bj = morton.decode(codes << (2 * level))
            overlap = _overlap(bi, bj, side, i0, j0, i1, j1)
            full = overlap == side * side
            part = (overlap > 0) & ~full
            exact += m[full].sum() + (m[part & collapsed] * overlap[part & collapsed]
                                      / (side * side)).sum()
            open_ = part & ~collapsed
            slack = np.minimum(m[open_], mx[open_] * overlap[open_]).sum()
            lower, upper = float(exact), float(min(exact + slack, upper))
            if threshold is not None and (lower >= threshold or upper < threshold):
                break
            if not open_.any():
                upper = lower
                break
        return lower, upper

    def cell_values(self, codes):
        """Per-cell masses at the given Morton codes."""
        codes = np.asarray(codes, dtype=np.int64)
        if not len(self):
            return np.zeros(codes.shape)
        k = np.searchsorted(self.start, codes, side="right") - 1
        valid = k >= 0
        kk = np.where(valid, k, 0)
        size = self._sizes()[kk]
        hit = valid & (self.start[kk] + size > codes)
        return np.where(hit, self.mass[kk] / size, 0.0)

    # ------------------------------------------------------ conversion

    def support_mbr(self):
        """Inclusive cell bounds of the represented support, collapsed
        blocks counted at their full extent."""
        bi, bj = morton.decode(self.start)
        side = np.left_shift(np.int64(1), self.level.astype(np.int64))
        return (int(bi.min()), int(bj.min()),
                int((bi + side).max()) - 1, int((bj + side).max()) - 1)

    def mbr_meters(self):
        i0, j0, i1, j1 = self.support_mbr()
        d = self.domain
        return (d.xmin + i0 * d.delta, d.ymin + j0 * d.delta,
                d.xmin + (i1 + 1) * d.delta, d.ymin + (j1 + 1) * d.delta)

    def to_cells(self):
        """Reconstructed ``(morton codes, masses)`` of every nonzero cell."""
        sizes = self._sizes()
        if not (self.level > 0).any():
            return self.start, self.mass
        codes = np.concatenate([np.arange(s, s + z, dtype=np.int64)
                                for s, z in zip(self.start, sizes)])
        mass = np.repeat(self.mass / sizes, sizes)
        keep = mass > 0
        return codes[keep], mass[keep]

    def to_histogram(self) -> GridPdf:
        if self.domain is None:
            raise DataError("tree carries no domain")
        codes, mass = self.to_cells()
        i, j = morton.decode(codes)
        idx = (i * self.n + j).astype(np.uint32)
        order = np.argsort(idx, kind="stable")
        return GridPdf(self.domain, idx[order], mass[order], check=False)


def build_quadtree(h: GridPdf, location_id=None) -> PdfQuadTree:
    """Lossless quad-tree with one leaf per nonzero cell."""
    n = h.domain.n
    if n & (n - 1):
        raise GridSideError(f"grid side {n} is not a power of two")
    i, j = h.ij
    codes = morton.encode(i, j)
    order = np.argsort(codes, kind="stable")
    return PdfQuadTree(n, codes[order], np.zeros(len(codes), np.int8), h.mass[order],
                       location_id=location_id, domain=h.domain)


def compress(t: PdfQuadTree, eps_mass: float, eps_dev: float) -> PdfQuadTree:
    """Collapse maximal blocks whose mass is at most ``eps_mass`` or whose
    total absolute deviation from the block-uniform value is at most
    ``eps_dev``. A zero epsilon disables its criterion."""
    if eps_mass < 0 or eps_dev < 0:
        raise DataError("compression tolerances must be >= 0")
    codes, p = t.to_cells()
    if (eps_mass == 0 and eps_dev == 0) or not len(codes):
        return PdfQuadTree(t.n, t.start, t.level, t.mass, t.location_id, t.domain,
                           t.eps_mass, t.eps_dev)
    covered = np.zeros(len(codes), dtype=bool)
    starts, levels, masses = [], [], []
    for level in range(t.depth, 0, -1):
        size = 1 << (2 * level)
        prefix = codes >> (2 * level)
        cut = np.flatnonzero(np.diff(prefix)) + 1
        first = np.concatenate(([0], cut))
        group = np.repeat(np.arange(len(first)), np.diff(np.concatenate((first, [len(codes)]))))
        gmass = np.add.reduceat(p, first)
        count = np.diff(np.concatenate((first, [len(codes)])))
        u = gmass / size
        dev = np.add.reduceat(np.abs(p - u[group]), first) + (size - count) * u
        crit = np.zeros(len(first), dtype=bool)
        if eps_mass > 0:
            crit |= gmass <= eps_mass
        if eps_dev > 0:
            crit |= dev <= eps_dev
        sel = crit & ~covered[first]
        if sel.any():
            starts.append(prefix[first[sel]] << (2 * level))
            levels.append(np.full(int(sel.sum()), level, dtype=np.int8))
            masses.append(gmass[sel])
            covered |= sel[group]
    rest = ~covered
    starts.append(codes[rest])
    levels.append(np.zeros(int(rest.sum()), dtype=np.int8))
    masses.append(p[rest])
    start = np.concatenate(starts)
    order = np.argsort(start, kind="stable")
    return PdfQuadTree(t.n, start[order], np.concatenate(levels)[order],
                       np.concatenate(masses)[order], t.location_id, t.domain,
                       eps_mass, eps_dev)


def _overlap(bi, bj, side, i0, j0, i1, j1):
    ox = np.clip(np.minimum(bi + side, i1) - np.maximum(bi, i0), 0, None)
    oy = np.clip(np.minimum(bj + side, j1) - np.maximum(bj, j0), 0, None)
    return ox * oy


@lru_cache(maxsize=256)
def _decompose(i0, j0, i1, j1, n):
    lo, lvl = [], []
    depth = n.bit_length() - 1
    stack = [(0, 0, depth)]
    while stack:
        bi, bj, level = stack.pop()
        side = 1 << level
        if bi >= i1 or bj >= j1 or bi + side <= i0 or bj + side <= j0:
            continue
        if i0 <= bi and bi + side <= i1 and j0 <= bj and bj + side <= j1:
            lo.append((bi, bj))
            lvl.append(level)
            continue
        half = side >> 1
        stack += [(bi, bj, level - 1), (bi, bj + half, level - 1),
                  (bi + half, bj, level - 1), (bi + half, bj + half, level - 1)]
    if not lo:
        return np.zeros(0, np.int64), np.zeros(0, np.int64)
    ij = np.array(lo)
    return morton.encode(ij[:, 0], ij[:, 1]), np.array(lvl, dtype=np.int64)


def decompose(i0, j0, i1, j1, n):
    """Maximal aligned quad-tree blocks tiling a half-open cell rectangle,
    as ``(morton starts, levels)``."""
    return _decompose(int(i0), int(j0), int(i1), int(j1), int(n))
