"""Probabilistic region and similarity queries over stored locations.

All probabilities refer to the stored (possibly compressed) quad-trees.
Results are ranked by descending score with ties broken by ascending id;
scores are compared at a resolution of ``1e-12`` so that values that agree
to rounding error rank as ties.
"""
from __future__ import annotations

from typing import Iterable

import numpy as np

from . import geometry as geo
from .errors import DataError, DomainMismatchError, UnknownNodeError
from .index import build_directory, build_quadtree, compress
from .index import morton
from .index.quadtree import PdfQuadTree
from .synth import DomainSpec, GridPdf

SCORE_ATOL = 1e-12


def rank_key(item):
    ident, score = item
    return (-round(score, 12), ident)


def ranked(items):
    return sorted(items, key=rank_key)


class Region:
    """A query region: an axis-aligned metric rectangle ``(x1, y1, x2, y2)``
    or a simple polygon, rasterized to the cells whose centers it covers."""

    def __init__(self, domain: DomainSpec, shape):
        self.domain = domain
        shape = list(shape)
        if len(shape) == 4 and all(isinstance(v, (int, float, np.floating)) for v in shape):
            x1, y1, x2, y2 = map(float, shape)
            self.polygon = None
            self.bbox = (min(x1, x2), min(y1, y2), max(x1, x2), max(y1, y2))
            self.cell_rect = domain.rect_to_cells(*self.bbox)
            i0, j0, i1, j1 = self.cell_rect
            self.n_cells = (i1 - i0) * (j1 - j0)
            self.codes = None
        else:
            from .model import to_shape
            to_shape(shape)  # simple-polygon check
            self.polygon = np.asarray(shape, dtype=float)
            self.bbox = geo.bbox(self.polygon)
            self.cell_rect = None
            self.codes = self._rasterize()
            self.n_cells = len(self.codes)

    def _rasterize(self):
        d = self.domain
        i0, j0, i1, j1 = d.rect_to_cells(*self.bbox)
        if i0 == i1 or j0 == j1:
            return np.zeros(0, dtype=np.int64)
        ii, jj = np.meshgrid(np.arange(i0, i1), np.arange(j0, j1), indexing="ij")
        cx, cy = d.centers(ii, jj)
        inside = geo.points_in_polygon(cx, cy, self.polygon)
        inside |= geo.distance_to_boundary(cx, cy, self.polygon) <= 1e-9
        return np.sort(morton.encode(ii[inside], jj[inside]))

    @property
    def is_empty(self):
        return self.n_cells == 0

    def mass(self, tree: PdfQuadTree) -> float:
        if self.is_empty:
            return 0.0
        if self.codes is None:
            return tree.mass_in_rect(self.cell_rect)
        return float(tree.cell_values(self.codes).sum())


def histogram_intersection(ca, ma, cb, mb) -> float:
    _, ia, ib = np.intersect1d(ca, cb, assume_unique=True, return_indices=True)
    return float(np.minimum(ma[ia], mb[ib]).sum())


class LocationStore:
    """Quad-trees of all stored locations plus the grid directory on top."""

    def __init__(self, domain: DomainSpec, eps_mass=0.0, eps_dev=0.0, dir_cell=None):
        self.domain = domain
        self.eps_mass = eps_mass
        self.eps_dev = eps_dev
        self.dir_cell = dir_cell if dir_cell is not None else 16 * domain.delta
        self.trees: dict[str, PdfQuadTree] = {}
        self.directory = None
        self.last_stats: dict = {}
        self._ids: list = []

    def __len__(self):
        return len(self.trees)

    def __contains__(self, lid):
        return lid in self.trees

    def add(self, lid: str, pdf: GridPdf):
        if pdf.domain != self.domain:
            raise DomainMismatchError(f"location {lid}: pdf domain differs from the store")
        if lid in self.trees:
            raise DataError(f"duplicate location id {lid!r}")
        tree = build_quadtree(pdf, lid)
        if self.eps_mass or self.eps_dev:
            tree = compress(tree, self.eps_mass, self.eps_dev)
        self.trees[lid] = tree
        self.directory = None

    @classmethod
    def build(cls, items: Iterable, domain: DomainSpec, eps_mass=0.0, eps_dev=0.0,
              dir_cell=None) -> "LocationStore":
        store = cls(domain, eps_mass, eps_dev, dir_cell)
        for lid, pdf in items:
            store.add(lid, pdf)
        store.build_index()
        return store

    def build_index(self):
        self._ids = sorted(self.trees)
        locs = [(lid, self.trees[lid].mbr_meters()) for lid in self._ids]
        self.directory = build_directory(locs, self.dir_cell, (self.domain.xmin, self.domain.ymin))
        self._max_cell = np.array([self.trees[lid].max_cell for lid in self._ids])
        self._total = np.array([self.trees[lid].total for lid in self._ids])
        self._mbr_cells = np.array([self.trees[lid].support_mbr() for lid in self._ids],
                                   dtype=np.int64).reshape(-1, 4)

    def _ensure_index(self):
        if self.directory is None:
            self.build_index()

    def tree(self, lid) -> PdfQuadTree:
        try:
            return self.trees[lid]
        except KeyError:
            raise UnknownNodeError(f"unknown location {lid!r}") from None

    def region(self, shape) -> Region:
        return shape if isinstance(shape, Region) else Region(self.domain, shape)

    # ------------------------------------------------------------ region

    def prob_in_region(self, lid, region) -> float:
        tree = self.tree(lid)
        p = self.region(region).mass(tree)
        return min(max(p, 0.0), 1.0)

    def _candidates(self, reg: Region):
        self._ensure_index()
        if reg.is_empty:
            return np.zeros(0, dtype=np.int64)
        return self.directory.candidates_idx(reg.bbox)

    def _upper_bounds(self, reg: Region, pos):
        """Cheap per-candidate upper bounds and the positions whose support
        lies entirely inside a rectangular region."""
        if reg.codes is not None:
            return np.minimum(self._total[pos], self._max_cell[pos] * reg.n_cells), \
                np.zeros(len(pos), dtype=bool)
        i0, j0, i1, j1 = reg.cell_rect
        m = self._mbr_cells[pos]
        ox = np.clip(np.minimum(m[:, 2] + 1, i1) - np.maximum(m[:, 0], i0), 0, None)
        oy = np.clip(np.minimum(m[:, 3] + 1, j1) - np.maximum(m[:, 1], j0), 0, None)
        inside = (m[:, 0] >= i0) & (m[:, 2] < i1) & (m[:, 1] >= j0) & (m[:, 3] < j1)
        ub = np.minimum(self._total[pos], self._max_cell[pos] * ox * oy)
        return ub, inside

    def range_query(self, region, tau: float):
        """Locations whose probability of lying in ``region`` is at least
        ``tau``, as ``[(id, p)]`` ranked by descending ``p``."""
        if not 0 < tau <= 1:
            raise DataError("threshold tau must lie in (0, 1]")
        reg = self.region(region)
        pos = self._candidates(reg)
        ub, inside = self._upper_bounds(reg, pos)
        out, exact = [], 0
        for p_idx, bound, full in zip(pos, ub, inside):
            if bound < tau - SCORE_ATOL:
                continue
            lid = self._ids[p_idx]
            if full:
                p = self._total[p_idx]
            else:
                p = reg.mass(self.trees[lid])
                exact += 1
            if p >= tau - SCORE_ATOL:
                out.append((lid, min(float(p), 1.0)))
        self.last_stats = {"candidates": len(pos), "evaluated": exact}
        return ranked(out)

    def topk_range(self, region, k: int):
        """The ``k`` locations most likely to lie in ``region``."""
        if k < 1:
            raise DataError("k must be >= 1")
        reg = self.region(region)
        pos = self._candidates(reg)
        ub, inside = self._upper_bounds(reg, pos)
        order = sorted(range(len(pos)), key=lambda t: (-ub[t], self._ids[pos[t]]))
        best, exact = [], 0
        for t in order:
            if len(best) >= k:
                kth = ranked(best)[k - 1][1]
                if round(ub[t], 12) < round(kth, 12):
                    break
            p_idx = pos[t]
            lid = self._ids[p_idx]
            if inside[t]:
                p = float(self._total[p_idx])
            else:
                p = reg.mass(self.trees[lid])
                exact += 1
            if p > SCORE_ATOL:
                best.append((lid, min(p, 1.0)))
        self.last_stats = {"candidates": len(pos), "evaluated": exact}
        return ranked(best)[:k]

    # -------------------------------------------------------- similarity

    def _query_cells(self, q):
        """``(codes, masses, mbr_meters, own id)`` for a stored id or an
        ad-hoc pdf."""
        if isinstance(q, GridPdf):
            if q.domain != self.domain:
                raise DomainMismatchError("query pdf is defined over a different domain")
            tree = build_quadtree(q)
            codes, mass = tree.to_cells()
            return codes, mass, q.mbr_meters(), None
        tree = self.tree(q)
        codes, mass = tree.to_cells()
        return codes, mass, tree.mbr_meters(), q

    def similarity(self, a, b) -> float:
        ca, ma, _, _ = self._query_cells(a)
        cb, mb, _, _ = self._query_cells(b)
        return min(histogram_intersection(ca, ma, cb, mb), 1.0)

    def _sim_scores(self, q):
        self._ensure_index()
        codes, mass, mbr, own = self._query_cells(q)
        pos = self.directory.candidates_idx(mbr)
        scores = []
        for p_idx in pos:
            lid = self._ids[p_idx]
            if lid == own:
                continue
            cb, mb = self.trees[lid].to_cells()
            s = histogram_intersection(codes, mass, cb, mb)
            if s > SCORE_ATOL:
                scores.append((lid, min(s, 1.0)))
        self.last_stats = {"candidates": len(pos), "evaluated": len(pos)}
        return scores

    def topk_similar(self, q, k: int):
        if k < 1:
            raise DataError("k must be >= 1")
        return ranked(self._sim_scores(q))[:k]

    def sim_threshold(self, q, tau: float):
        if not 0 < tau <= 1:
            raise DataError("threshold tau must lie in (0, 1]")
        return ranked([(lid, s) for lid, s in self._sim_scores(q) if s >= tau - SCORE_ATOL])
