"""Vectorized planar geometry over arrays of query points."""
import numpy as np


def polygon_area(poly):
    p = np.asarray(poly, dtype=float)
    if p.ndim == 1:
        return 0.0
    x, y = p[:, 0], p[:, 1]
    return 0.5 * abs(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def polygon_centroid(poly):
    p = np.asarray(poly, dtype=float)
    if p.ndim == 1:
        return p.copy()
    x, y = p[:, 0], p[:, 1]
    xn, yn = np.roll(x, -1), np.roll(y, -1)
    cross = x * yn - xn * y
    a = cross.sum() / 2.0
    if a == 0:
        return p.mean(axis=0)
    return np.array([((x + xn) * cross).sum() / (6 * a), ((y + yn) * cross).sum() / (6 * a)])


def bbox(poly):
    p = np.asarray(poly, dtype=float)
    if p.ndim == 1:
        return p[0], p[1], p[0], p[1]
    return p[:, 0].min(), p[:, 1].min(), p[:, 0].max(), p[:, 1].max()


def points_in_polygon(px, py, poly):
    """Even-odd test; points exactly on the boundary may go either way."""
    p = np.asarray(poly, dtype=float)
    inside = np.zeros(np.shape(px), dtype=bool)
    if p.ndim == 1:
        return inside
    x0, y0 = p[:, 0], p[:, 1]
    x1, y1 = np.roll(x0, -1), np.roll(y0, -1)
    for ax, ay, bx, by in zip(x0, y0, x1, y1):
        if ay == by:
            continue
        crosses = (ay > py) != (by > py)
        xint = ax + (py - ay) * (bx - ax) / (by - ay)
        inside ^= crosses & (px < xint)
    return inside


def distance_to_boundary(px, py, poly):
    """Euclidean distance from each point to the polygon boundary (or to the
    point itself for a point geometry)."""
    p = np.asarray(poly, dtype=float)
    if p.ndim == 1:
        return np.hypot(px - p[0], py - p[1])
    best = np.full(np.shape(px), np.inf)
    x0, y0 = p[:, 0], p[:, 1]
    x1, y1 = np.roll(x0, -1), np.roll(y0, -1)
    for ax, ay, bx, by in zip(x0, y0, x1, y1):
        dx, dy = bx - ax, by - ay
        ll = dx * dx + dy * dy
        if ll == 0:
            d = np.hypot(px - ax, py - ay)
        else:
            t = np.clip(((px - ax) * dx + (py - ay) * dy) / ll, 0.0, 1.0)
            d = np.hypot(px - (ax + t * dx), py - (ay + t * dy))
        np.minimum(best, d, out=best)
    return best


def strictly_inside(px, py, poly, dist=None, tol=1e-9):
    """Interior test excluding the boundary."""
    if dist is None:
        dist = distance_to_boundary(px, py, poly)
    return points_in_polygon(px, py, poly) & (dist > tol)
