"""Feature-based similarity of attribute records."""
from __future__ import annotations

import logging
import numbers
from dataclasses import dataclass
from typing import Mapping, Optional

from ..errors import DataError

log = logging.getLogger(__name__)

KINDS = ("string", "enum", "numeric")


@dataclass(frozen=True)
class AttrSpec:
    kind: str
    weight: float = 1.0
    # value range for numeric attributes; None uses max(|a|, |b|)
    range: Optional[float] = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DataError(f"unknown attribute kind {self.kind!r}")
        if self.weight < 0:
            raise DataError("attribute weights must be >= 0")


def levenshtein(a: str, b: str) -> int:
    if len(a) < len(b):
        a, b = b, a
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, 1):
        cur = [i]
        for j, cb in enumerate(b, 1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (ca != cb)))
        prev = cur
    return prev[-1]


def string_similarity(a: str, b: str) -> float:
    """``1 - levenshtein / max length``; two empty strings are identical."""
    m = max(len(a), len(b))
    return 1.0 if m == 0 else 1.0 - levenshtein(a, b) / m


def _infer(value) -> AttrSpec:
    if isinstance(value, bool):
        return AttrSpec("enum")
    if isinstance(value, numbers.Real):
        return AttrSpec("numeric")
    return AttrSpec("string")


def attr_similarity(a, b, spec: AttrSpec) -> float:
    if spec.kind == "enum":
        return 1.0 if a == b else 0.0
    if spec.kind == "string":
        return string_similarity(str(a), str(b))
    try:
        a, b = float(a), float(b)
    except (TypeError, ValueError):
        raise DataError(f"non-numeric value for numeric attribute: {a!r}, {b!r}") from None
    rng = spec.range if spec.range is not None else max(abs(a), abs(b))
    if rng <= 0:
        return 1.0 if a == b else 0.0
    return min(max(1.0 - abs(a - b) / rng, 0.0), 1.0)


def fbs_compare(a: Mapping, b: Mapping, schema: Optional[Mapping[str, AttrSpec]] = None):
    """``(similarity, number of attributes compared)``.

    The similarity is the weighted mean of per-attribute similarities over
    the attributes both records carry. Attributes missing on either side (or
    ``None``) are skipped; with nothing left to compare the result is 0.
    """
    names = sorted(schema) if schema is not None else sorted(set(a) | set(b))
    num = den = 0.0
    compared = 0
    for name in names:
        va, vb = a.get(name), b.get(name)
        if va is None or vb is None:
            continue
        spec = schema[name] if schema is not None else _infer(va)
        if spec.weight == 0:
            continue
        num += spec.weight * attr_similarity(va, vb, spec)
        den += spec.weight
        compared += 1
    if den == 0:
        log.warning("fbs: no attribute present on both records")
        return 0.0, 0
    return num / den, compared


def fbs_similarity(a: Mapping, b: Mapping, schema: Optional[Mapping[str, AttrSpec]] = None) -> float:
    return fbs_compare(a, b, schema)[0]
