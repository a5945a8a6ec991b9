"""Z-order (Morton) codes for grid cells.

The x index occupies the odd bits and the y index the even bits, so the
four children of a quad-tree block are ordered (x0,y0), (x0,y1), (x1,y0),
(x1,y1) and every block is a contiguous code range.
"""
import numpy as np


def _spread(v):
    v = np.asarray(v, dtype=np.uint64) & np.uint64(0xFFFF)
    v = (v | (v << np.uint64(8))) & np.uint64(0x00FF00FF)
    v = (v | (v << np.uint64(4))) & np.uint64(0x0F0F0F0F)
    v = (v | (v << np.uint64(2))) & np.uint64(0x33333333)
    v = (v | (v << np.uint64(1))) & np.uint64(0x55555555)
    return v


def _compact(v):
    v = np.asarray(v, dtype=np.uint64) & np.uint64(0x55555555)
    v = (v | (v >> np.uint64(1))) & np.uint64(0x33333333)
    v = (v | (v >> np.uint64(2))) & np.uint64(0x0F0F0F0F)
    v = (v | (v >> np.uint64(4))) & np.uint64(0x00FF00FF)
    v = (v | (v >> np.uint64(8))) & np.uint64(0x0000FFFF)
    return v


def encode(i, j):
    return ((_spread(i) << np.uint64(1)) | _spread(j)).astype(np.int64)


def decode(code):
    c = np.asarray(code, dtype=np.uint64)
    return _compact(c >> np.uint64(1)).astype(np.int64), _compact(c).astype(np.int64)
