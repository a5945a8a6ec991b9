"""Binary histogram files.

Layout (little-endian): magic ``EMSH``, version u16, grid side u32, record
count u64, then ``count`` records of (cell index u32 = i*n + j, mass f64).
"""
import struct

import numpy as np

from ..errors import StoreError
from ..synth import DomainSpec, GridPdf

MAGIC = b"EMSH"
VERSION = 1
_HEADER = struct.Struct("<4sHIQ")
RECORD = np.dtype([("idx", "<u4"), ("mass", "<f8")])


def dumps(pdf: GridPdf) -> bytes:
    rec = np.empty(len(pdf), dtype=RECORD)
    rec["idx"] = pdf.idx
    rec["mass"] = pdf.mass
    return _HEADER.pack(MAGIC, VERSION, pdf.domain.n, len(pdf)) + rec.tobytes()


def loads(data: bytes, domain: DomainSpec) -> GridPdf:
    if len(data) < _HEADER.size:
        raise StoreError("truncated histogram header")
    magic, version, side, count = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise StoreError("not a histogram file (bad magic)")
    if version != VERSION:
        raise StoreError(f"unsupported histogram version {version}")
    if side != domain.n:
        raise StoreError(f"histogram grid side {side} does not match domain ({domain.n})")
    body = data[_HEADER.size:]
    if len(body) != count * RECORD.itemsize:
        raise StoreError("histogram record count does not match file size")
    rec = np.frombuffer(body, dtype=RECORD)
    return GridPdf(domain, rec["idx"].astype(np.uint32), rec["mass"].astype(np.float64))


def write_histogram(path, pdf: GridPdf):
    with open(path, "wb") as fh:
        fh.write(dumps(pdf))


def read_histogram(path, domain: DomainSpec) -> GridPdf:
    with open(path, "rb") as fh:
        return loads(fh.read(), domain)
