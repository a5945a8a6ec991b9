"""Projection of s-expressions onto the domain as gridded probability masses.

Each descriptor is mapped to a density evaluated at cell centers of a
uniform grid and normalized to unit mass; AND-expressions multiply the
conjunct masses cellwise and renormalize.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Mapping, Optional

import numpy as np

from . import geometry as geo
from .errors import (
    ContradictionError,
    DataError,
    DomainMismatchError,
    MissingOrientationError,
    UnresolvableLandmarkError,
    ZeroMassError,
)
from .model import to_shape
from .sexpr import DIRECTIONAL, SDescriptor, SExpression

MASS_TOL = 1e-6


@dataclass(frozen=True)
class DomainSpec:
    xmin: float
    ymin: float
    xmax: float
    ymax: float
    delta: float

    def __post_init__(self):
        if not (self.xmax > self.xmin and self.ymax > self.ymin):
            raise DataError("domain must have positive extent")
        if not self.delta > 0:
            raise DataError("cell size delta must be positive")

    @property
    def nx(self) -> int:
        return math.ceil(round((self.xmax - self.xmin) / self.delta, 9))

    @property
    def ny(self) -> int:
        return math.ceil(round((self.ymax - self.ymin) / self.delta, 9))

    @property
    def n(self) -> int:
        """Grid side padded up to a power of two."""
        m = max(self.nx, self.ny)
        return 1 << (m - 1).bit_length()

    @property
    def n_cells(self) -> int:
        """Number of non-padding cells."""
        return self.nx * self.ny

    def centers(self, i, j):
        return (self.xmin + (np.asarray(i) + 0.5) * self.delta,
                self.ymin + (np.asarray(j) + 0.5) * self.delta)

    def cell_range(self, lo, hi, axis):
        """Inclusive cell index range whose centers lie in ``[lo, hi]``."""
        origin = self.xmin if axis == 0 else self.ymin
        limit = self.nx if axis == 0 else self.ny
        a = math.ceil((lo - origin) / self.delta - 0.5)
        b = math.floor((hi - origin) / self.delta - 0.5)
        return max(a, 0), min(b, limit - 1)

    def rect_to_cells(self, x1, y1, x2, y2):
        """Half-open cell rectangle ``(i0, j0, i1, j1)`` of the cells whose
        centers lie in the closed metric rectangle; empty ranges collapse to
        ``i0 == i1``."""
        x1, x2 = min(x1, x2), max(x1, x2)
        y1, y2 = min(y1, y2), max(y1, y2)
        i0, i1 = self.cell_range(x1, x2, 0)
        j0, j1 = self.cell_range(y1, y2, 1)
        if i1 < i0 or j1 < j0:
            return (0, 0, 0, 0)
        return (i0, j0, i1 + 1, j1 + 1)

    def to_dict(self):
        return asdict(self)


@dataclass
class Landmark:
    id: str
    name: str
    footprint: object
    height: Optional[float] = None
    orientation: Optional[tuple] = None
    # indoor/outdoor only consider landmarks of kind "building"
    kind: str = "building"

    def __post_init__(self):
        fp = self.footprint
        if len(fp) == 2 and all(isinstance(v, (int, float)) for v in fp):
            self.footprint = (float(fp[0]), float(fp[1]))
        else:
            self.footprint = [tuple(map(float, p)) for p in fp]
            to_shape(self.footprint)  # validates simplicity and area
        if self.orientation is not None:
            ox, oy = map(float, self.orientation)
            norm = math.hypot(ox, oy)
            if norm == 0:
                raise DataError(f"landmark {self.id}: zero orientation vector")
            self.orientation = (ox / norm, oy / norm)
        fp = np.asarray(self.footprint, dtype=float)
        self._fp = fp
        self.area = geo.polygon_area(fp)
        self.centroid = geo.polygon_centroid(fp)
        self.bbox = geo.bbox(fp)

    @property
    def is_point(self):
        return self._fp.ndim == 1

    def to_dict(self):
        out = {"id": self.id, "name": self.name, "kind": self.kind}
        out["polygon"] = list(self.footprint) if self.is_point else [list(p) for p in self.footprint]
        if self.height is not None:
            out["height"] = self.height
        if self.orientation is not None:
            out["orientation"] = list(self.orientation)
        return out

    @classmethod
    def from_dict(cls, d):
        return cls(d["id"], d.get("name", d["id"]), d["polygon"], d.get("height"),
                   d.get("orientation"), d.get("kind", "building"))


class LandmarkMap(Mapping):
    def __init__(self, landmarks=()):
        self._lm = {}
        for lm in landmarks:
            if lm.id in self._lm:
                raise DataError(f"duplicate landmark id {lm.id!r}")
            self._lm[lm.id] = lm

    def __getitem__(self, key):
        try:
            return self._lm[key]
        except KeyError:
            raise UnresolvableLandmarkError(f"unknown landmark {key!r}") from None

    def __iter__(self):
        return iter(self._lm)

    def __len__(self):
        return len(self._lm)

    def buildings(self):
        return [lm for lm in self._lm.values() if lm.kind == "building" and not lm.is_point]


@dataclass(frozen=True)
class SynthParams:
    near_scale: float = 0.5
    between_scale: float = 0.25
    # Gaussian falloffs are truncated at this many standard deviations
    cutoff: float = 3.0
    # lower bound on the near() scale; None means one cell edge
    min_sigma: Optional[float] = None

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


class GridPdf:
    """Sparse cell masses of a location over the padded ``n x n`` grid.

    Cells are keyed by ``i * n + j`` where ``i`` indexes x and ``j`` y; the
    index array is sorted and unique, masses are strictly positive.
    """

    __slots__ = ("domain", "idx", "mass", "_mbr")

    def __init__(self, domain: DomainSpec, idx, mass, check=True):
        self.domain = domain
        self.idx = np.asarray(idx, dtype=np.uint32)
        self.mass = np.asarray(mass, dtype=np.float64)
        self._mbr = None
        if check:
            if self.idx.shape != self.mass.shape:
                raise DataError("index and mass arrays differ in length")
            if len(self.idx) and np.any(np.diff(self.idx.astype(np.int64)) <= 0):
                order = np.argsort(self.idx, kind="stable")
                self.idx, self.mass = self.idx[order], self.mass[order]
                if np.any(np.diff(self.idx.astype(np.int64)) == 0):
                    raise DataError("duplicate cell index")
            if np.any(self.mass < 0):
                raise DataError("negative cell mass")
            n = domain.n
            if len(self.idx) and int(self.idx[-1]) >= n * n:
                raise DataError("cell index outside grid")
            keep = self.mass > 0
            if not keep.all():
                self.idx, self.mass = self.idx[keep], self.mass[keep]

    def __len__(self):
        return len(self.idx)

    @property
    def total(self) -> float:
        return float(self.mass.sum())

    @property
    def ij(self):
        n = self.domain.n
        idx = self.idx.astype(np.int64)
        return idx // n, idx % n

    @property
    def cells(self) -> dict:
        i, j = self.ij
        return {(int(a), int(b)): float(m) for a, b, m in zip(i, j, self.mass)}

    @property
    def support_mbr(self):
        """Inclusive cell bounds ``(i0, j0, i1, j1)`` of the nonzero cells."""
        if self._mbr is None:
            if not len(self.idx):
                raise ZeroMassError("empty pdf has no support")
            i, j = self.ij
            self._mbr = (int(i.min()), int(j.min()), int(i.max()), int(j.max()))
        return self._mbr

    def mbr_meters(self):
        i0, j0, i1, j1 = self.support_mbr
        d = self.domain
        return (d.xmin + i0 * d.delta, d.ymin + j0 * d.delta,
                d.xmin + (i1 + 1) * d.delta, d.ymin + (j1 + 1) * d.delta)

    def to_dense(self):
        n = self.domain.n
        out = np.zeros(n * n)
        out[self.idx] = self.mass
        return out.reshape(n, n)

    def normalized(self):
        s = self.mass.sum()
        if not s > 0:
            raise ZeroMassError("pdf has zero total mass")
        return GridPdf(self.domain, self.idx, self.mass / s, check=False)

    def same_as(self, other, atol=0.0):
        return (self.domain == other.domain and np.array_equal(self.idx, other.idx)
                and np.allclose(self.mass, other.mass, rtol=0, atol=atol))

    def __repr__(self):
        return f"GridPdf(cells={len(self)}, total={self.total:.6g})"


def uniform_pdf(domain: DomainSpec) -> GridPdf:
    i, j = np.meshgrid(np.arange(domain.nx), np.arange(domain.ny), indexing="ij")
    idx = (i * domain.n + j).ravel()
    return GridPdf(domain, idx, np.full(idx.size, 1.0 / idx.size), check=False)


def _window(domain, x0, y0, x1, y1):
    """Cell index ranges and center coordinates covering a metric box."""
    i0 = max(int(math.floor((x0 - domain.xmin) / domain.delta)), 0)
    i1 = min(int(math.ceil((x1 - domain.xmin) / domain.delta)), domain.nx - 1)
    j0 = max(int(math.floor((y0 - domain.ymin) / domain.delta)), 0)
    j1 = min(int(math.ceil((y1 - domain.ymin) / domain.delta)), domain.ny - 1)
    if i1 < i0 or j1 < j0:
        return None
    ii, jj = np.meshgrid(np.arange(i0, i1 + 1), np.arange(j0, j1 + 1), indexing="ij")
    cx, cy = domain.centers(ii, jj)
    return ii, jj, cx, cy


def _to_pdf(domain, ii, jj, dens, what):
    keep = dens > 0
    if not keep.any():
        raise ZeroMassError(f"{what}: no cell of the grid carries mass")
    idx = (ii[keep] * domain.n + jj[keep]).astype(np.uint32)
    mass = dens[keep].astype(np.float64)
    order = np.argsort(idx, kind="stable")
    idx, mass = idx[order], mass[order]
    return GridPdf(domain, idx, mass / mass.sum(), check=False)


def near_sigma(lm: Landmark, params: SynthParams, domain: DomainSpec) -> float:
    h = lm.height or 0.0
    sigma = params.near_scale * math.sqrt(lm.area + h * h)
    floor = domain.delta if params.min_sigma is None else params.min_sigma
    return max(sigma, floor)


def _near_density(lm, params, domain):
    sigma = near_sigma(lm, params, domain)
    reach = params.cutoff * sigma
    bx0, by0, bx1, by1 = lm.bbox
    win = _window(domain, bx0 - reach, by0 - reach, bx1 + reach, by1 + reach)
    if win is None:
        return None
    ii, jj, cx, cy = win
    r = geo.distance_to_boundary(cx, cy, lm._fp)
    inside = geo.strictly_inside(cx, cy, lm._fp, r)
    dens = np.exp(-(r * r) / (2 * sigma * sigma))
    dens[inside | (r > reach)] = 0.0
    return ii, jj, cx, cy, dens


def _inside_mask(cx, cy, landmarks):
    mask = np.zeros(cx.shape, dtype=bool)
    for lm in landmarks:
        if lm.is_point:
            continue
        bx0, by0, bx1, by1 = lm.bbox
        sel = (cx >= bx0) & (cx <= bx1) & (cy >= by0) & (cy <= by1)
        if sel.any():
            mask[sel] |= geo.strictly_inside(cx[sel], cy[sel], lm._fp)
    return mask


def _direction(kind, lm):
    if lm.orientation is None:
        raise MissingOrientationError(f"{kind}({lm.id}) needs landmark orientation")
    ox, oy = lm.orientation
    return {
        "infrontof": (ox, oy),
        "behind": (-ox, -oy),
        "totheleftof": (-oy, ox),
        "totherightof": (oy, -ox),
    }[kind]


def synth_descriptor(d: SDescriptor, landmarks: LandmarkMap, domain: DomainSpec,
                     params: SynthParams = SynthParams()) -> GridPdf:
    lms = [landmarks[lid] for lid in d.landmarks]
    what = d.render()

    if d.kind in ("outdoor", "indoor"):
        win = _window(domain, domain.xmin, domain.ymin, domain.xmax, domain.ymax)
        ii, jj, cx, cy = win
        inside = _inside_mask(cx, cy, landmarks.buildings())
        dens = (~inside if d.kind == "outdoor" else inside).astype(float)
        return _to_pdf(domain, ii, jj, dens, what)

    if d.kind == "within":
        (lm,) = lms
        if lm.is_point:
            raise ZeroMassError(f"{what}: point landmark has no interior")
        win = _window(domain, *lm.bbox)
        if win is None:
            raise ZeroMassError(f"{what}: footprint lies outside the grid")
        ii, jj, cx, cy = win
        dens = geo.strictly_inside(cx, cy, lm._fp).astype(float)
        return _to_pdf(domain, ii, jj, dens, what)

    if d.kind == "withindist":
        (lm,) = lms
        bx0, by0, bx1, by1 = lm.bbox
        r = d.distance
        win = _window(domain, bx0 - r, by0 - r, bx1 + r, by1 + r)
        if win is None:
            raise ZeroMassError(f"{what}: region lies outside the grid")
        ii, jj, cx, cy = win
        dist = geo.distance_to_boundary(cx, cy, lm._fp)
        inside = geo.strictly_inside(cx, cy, lm._fp, dist)
        dens = ((~inside) & (dist <= r)).astype(float)
        return _to_pdf(domain, ii, jj, dens, what)

    if d.kind == "near" or d.kind in DIRECTIONAL:
        (lm,) = lms
        if d.kind in DIRECTIONAL:
            dx, dy = _direction(d.kind, lm)
        res = _near_density(lm, params, domain)
        if res is None:
            raise ZeroMassError(f"{what}: region lies outside the grid")
        ii, jj, cx, cy, dens = res
        if d.kind in DIRECTIONAL:
            vx, vy = cx - lm.centroid[0], cy - lm.centroid[1]
            norm = np.hypot(vx, vy)
            with np.errstate(invalid="ignore", divide="ignore"):
                cos = np.where(norm > 0, (vx * dx + vy * dy) / norm, 0.0)
            dens = dens * np.maximum(cos, 0.0) ** 2
        return _to_pdf(domain, ii, jj, dens, what)

    if d.kind == "between":
        a, b = lms
        ca, cb = a.centroid, b.centroid
        seg = cb - ca
        length = float(np.hypot(*seg))
        if length == 0:
            raise ZeroMassError(f"{what}: landmarks share a centroid")
        sigma = params.between_scale * length
        reach = params.cutoff * sigma
        x0, y0 = np.minimum(ca, cb) - reach
        x1, y1 = np.maximum(ca, cb) + reach
        win = _window(domain, x0, y0, x1, y1)
        if win is None:
            raise ZeroMassError(f"{what}: region lies outside the grid")
        ii, jj, cx, cy = win
        ux, uy = seg / length
        rx, ry = cx - ca[0], cy - ca[1]
        t = (rx * ux + ry * uy) / length
        s = np.abs(rx * uy - ry * ux)
        dens = np.exp(-(s * s) / (2 * sigma * sigma))
        excluded = (t < 0) | (t > 1) | (s > reach)
        excluded |= _inside_mask(cx, cy, [a, b])
        dens[excluded] = 0.0
        return _to_pdf(domain, ii, jj, dens, what)

    raise DataError(f"unsupported descriptor {d.kind}")  # pragma: no cover


def _check_domains(pdfs):
    dom = pdfs[0].domain
    for p in pdfs[1:]:
        if p.domain != dom:
            raise DomainMismatchError("pdfs are defined over different domains")
    return dom


def combine_and(pdfs) -> GridPdf:
    """Cellwise product of the conjunct masses, renormalized."""
    pdfs = list(pdfs)
    if not pdfs:
        raise DataError("combine_and needs at least one pdf")
    dom = _check_domains(pdfs)
    # look the smallest support up in the others; the product is formed
    # over sorted factors so it does not depend on the argument order
    idx = min(pdfs, key=len).idx
    for p in pdfs:
        if idx.size == 0 or len(p) == 0:
            idx = idx[:0]
            break
        pos = np.minimum(np.searchsorted(p.idx, idx), len(p.idx) - 1)
        idx = idx[p.idx[pos] == idx]
    if idx.size == 0:
        raise ContradictionError("conjuncts have disjoint supports")
    factors = np.stack([p.mass[np.searchsorted(p.idx, idx)] for p in pdfs])
    factors.sort(axis=0)
    prod = np.prod(factors, axis=0)
    s = prod.sum()
    if not s > 0:
        raise ContradictionError("conjunction has zero total mass")
    return GridPdf(dom, idx, prod / s, check=False)


def apply_prior(pdf: GridPdf, prior: Optional[GridPdf]) -> GridPdf:
    if prior is None:
        return pdf
    _check_domains([pdf, prior])
    if abs(prior.total - 1.0) > MASS_TOL:
        raise DataError("prior must have unit mass")
    return combine_and([pdf, prior])


def synth_expression(e: SExpression, landmarks: LandmarkMap, domain: DomainSpec,
                     params: SynthParams = SynthParams(), prior: Optional[GridPdf] = None,
                     cache: Optional[dict] = None) -> GridPdf:
    parts = []
    for d in e.conjuncts:
        if cache is not None and d in cache:
            parts.append(cache[d])
            continue
        pdf = synth_descriptor(d, landmarks, domain, params)
        if cache is not None:
            cache[d] = pdf
        parts.append(pdf)
    combined = parts[0] if len(parts) == 1 else combine_and(parts)
    return apply_prior(combined, prior)


class Synthesizer:
    """Binds a landmark map, domain and parameters; caches descriptor pdfs."""

    def __init__(self, landmarks: LandmarkMap, domain: DomainSpec,
                 params: SynthParams = SynthParams(), prior: Optional[GridPdf] = None):
        self.landmarks = landmarks
        self.domain = domain
        self.params = params
        self.prior = prior
        self._cache: dict = {}

    def __call__(self, expr: SExpression) -> GridPdf:
        key = ("expr", expr)
        if key not in self._cache:
            self._cache[key] = synth_expression(expr, self.landmarks, self.domain, self.params,
                                                self.prior, self._cache)
        return self._cache[key]

    def descriptor(self, d: SDescriptor) -> GridPdf:
        if d not in self._cache:
            self._cache[d] = synth_descriptor(d, self.landmarks, self.domain, self.params)
        return self._cache[d]
