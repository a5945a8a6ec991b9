"""Spatial expressions: conjunctions of landmark-relative descriptors.

Textual form::

    expr := desc ('&' desc)*
    desc := kind '(' [arg (',' arg)*] ')'

Kind names are case-insensitive, whitespace is insignificant and ``∧`` is
accepted as an alias of ``&``. Zero-arity descriptors may be written without
the empty argument list (``outdoor``). ``withindist`` takes a landmark followed by a
positive distance in meters.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Mapping

from .errors import (
    ArityError,
    NoTemplateMatchError,
    SExprError,
    SExprSyntaxError,
    UnknownDescriptorError,
    UnresolvableLandmarkError,
    UnsupportedOrError,
)

ARITY = {
    "near": 1, "within": 1, "withindist": 1, "between": 2,
    "behind": 1, "infrontof": 1, "totheleftof": 1, "totherightof": 1,
    "indoor": 0, "outdoor": 0,
}
DIRECTIONAL = ("behind", "infrontof", "totheleftof", "totherightof")


@dataclass(frozen=True)
class SDescriptor:
    kind: str
    landmarks: tuple = ()
    distance: float | None = None

    def __post_init__(self):
        if self.kind not in ARITY:
            raise UnknownDescriptorError(f"unknown descriptor {self.kind!r}")
        object.__setattr__(self, "landmarks", tuple(self.landmarks))
        if len(self.landmarks) != ARITY[self.kind]:
            raise ArityError(
                f"{self.kind} takes {ARITY[self.kind]} landmark(s), got {len(self.landmarks)}")
        if self.kind == "withindist":
            if self.distance is None or not self.distance > 0:
                raise ArityError("withindist needs a positive distance parameter")
        elif self.distance is not None:
            raise ArityError(f"{self.kind} takes no distance parameter")

    def render(self) -> str:
        args = list(self.landmarks)
        if self.distance is not None:
            args.append(repr(float(self.distance)))
        return f"{self.kind}({', '.join(args)})"

    def __str__(self):
        return self.render()


@dataclass(frozen=True)
class SExpression:
    conjuncts: tuple

    def __post_init__(self):
        object.__setattr__(self, "conjuncts", tuple(self.conjuncts))
        if not self.conjuncts:
            raise SExprError("an s-expression needs at least one descriptor")
        if len(set(self.conjuncts)) != len(self.conjuncts):
            raise SExprError("duplicate conjunct in s-expression")

    def render(self) -> str:
        return " & ".join(d.render() for d in self.conjuncts)

    def landmarks(self) -> set:
        return {lm for d in self.conjuncts for lm in d.landmarks}

    def __str__(self):
        return self.render()

    def __iter__(self):
        return iter(self.conjuncts)

    def __len__(self):
        return len(self.conjuncts)


def render(expr: SExpression) -> str:
    return expr.render()


_TOKEN = re.compile(r"\s*(?:(?P<punct>[(),&|∧∨])|(?P<word>[^\s(),&|∧∨]+))")


def _tokenize(text):
    """Yield (kind, value, byte_offset) triples."""
    pos = 0
    while True:
        m = _TOKEN.match(text, pos)
        if m is None or m.end() == pos:
            rest = text[pos:]
            if rest.strip():
                # unreachable for well-formed unicode, kept as a guard
                raise SExprSyntaxError("unexpected character", len(text[:pos].encode()))
            return
        start = m.start("punct") if m.group("punct") else m.start("word")
        offset = len(text[:start].encode())
        if m.group("punct"):
            p = m.group("punct")
            yield ("punct", {"∧": "&", "∨": "|"}.get(p, p), offset)
        else:
            yield ("word", m.group("word"), offset)
        pos = m.end()


def parse(text: str) -> SExpression:
    tokens = list(_tokenize(text))
    end = len(text.encode())
    i = 0

    def peek():
        return tokens[i] if i < len(tokens) else ("eof", None, end)

    def expect(value):
        nonlocal i
        kind, val, off = peek()
        if kind == "punct" and val == "|":
            raise UnsupportedOrError(f"OR-expressions are not supported (byte offset {off})")
        if kind != "punct" or val != value:
            shown = "end of input" if kind == "eof" else repr(val)
            raise SExprSyntaxError(f"expected {value!r}, found {shown}", off)
        i += 1

    conjuncts = []
    while True:
        kind, val, off = peek()
        if kind != "word":
            if kind == "punct" and val == "|":
                raise UnsupportedOrError(f"OR-expressions are not supported (byte offset {off})")
            shown = "end of input" if kind == "eof" else repr(val)
            raise SExprSyntaxError(f"expected descriptor name, found {shown}", off)
        name = val.lower()
        if name not in ARITY:
            raise UnknownDescriptorError(f"unknown descriptor {val!r} at byte offset {off}")
        i += 1
        args = []
        if ARITY[name] == 0 and not (peek()[0] == "punct" and peek()[1] == "("):
            # zero-arity descriptors may omit the empty argument list
            conjuncts.append(SDescriptor(name))
            kind, val, off = peek()
            if kind == "eof":
                break
            if kind == "punct" and val == "|":
                raise UnsupportedOrError(f"OR-expressions are not supported (byte offset {off})")
            expect("&")
            continue
        expect("(")
        if not (peek()[0] == "punct" and peek()[1] == ")"):
            while True:
                akind, aval, aoff = peek()
                if akind != "word":
                    if akind == "punct" and aval == "|":
                        raise UnsupportedOrError(
                            f"OR-expressions are not supported (byte offset {aoff})")
                    shown = "end of input" if akind == "eof" else repr(aval)
                    raise SExprSyntaxError(f"expected argument, found {shown}", aoff)
                args.append(aval)
                i += 1
                if peek()[0] == "punct" and peek()[1] == ",":
                    i += 1
                    continue
                break
        expect(")")
        conjuncts.append(_make_descriptor(name, args, off))
        kind, val, off = peek()
        if kind == "eof":
            break
        if kind == "punct" and val == "|":
            raise UnsupportedOrError(f"OR-expressions are not supported (byte offset {off})")
        expect("&")
    return SExpression(tuple(conjuncts))


def _make_descriptor(name, args, offset):
    if name == "withindist":
        if len(args) != 2:
            raise ArityError(f"withindist takes a landmark and a distance (byte offset {offset})")
        try:
            d = float(args[1])
        except ValueError:
            raise ArityError(f"withindist distance {args[1]!r} is not a number") from None
        return SDescriptor(name, (args[0],), d)
    if len(args) != ARITY[name]:
        raise ArityError(
            f"{name} takes {ARITY[name]} landmark(s), got {len(args)} (byte offset {offset})")
    return SDescriptor(name, tuple(args))


# ------------------------------------------------------------- templates

# leading generic words dropped when resolving a landmark phrase
_GENERIC = ("buildings", "building", "interstate", "highway", "street",
            "road", "route", "the", "bldg")


class LandmarkResolver:
    """Exact, then case-folded, lookup of landmark names and ids."""

    def __init__(self, names: Mapping[str, str]):
        # names: landmark name (or id) -> landmark id
        self.exact = dict(names)
        self.folded = {}
        for name, lid in names.items():
            self.folded.setdefault(name.casefold(), lid)

    @classmethod
    def from_landmarks(cls, landmarks):
        names = {}
        for lm in landmarks:
            names.setdefault(lm.id, lm.id)
            if lm.name:
                names.setdefault(lm.name, lm.id)
        return cls(names)

    def lookup(self, phrase: str):
        phrase = " ".join(phrase.split())
        words = phrase.split(" ")
        while words:
            cand = " ".join(words)
            if cand in self.exact:
                return self.exact[cand]
            if cand.casefold() in self.folded:
                return self.folded[cand.casefold()]
            if words[0].casefold() in _GENERIC and len(words) > 1:
                words = words[1:]
                continue
            break
        return None

    def resolve(self, phrase: str):
        lid = self.lookup(phrase)
        if lid is None:
            raise UnresolvableLandmarkError(f"cannot resolve landmark {phrase!r}")
        return lid


def _split_and(text, resolver):
    """Split ``'<L1> and <L2>'`` at the first ' and ' giving two resolvable
    landmarks."""
    parts = text.split(" and ")
    for k in range(1, len(parts)):
        a, b = " and ".join(parts[:k]), " and ".join(parts[k:])
        la, lb = resolver.lookup(a), resolver.lookup(b)
        if la is not None and lb is not None:
            return la, lb
    if len(parts) < 2:
        raise NoTemplateMatchError(f"no template matches {text!r}")
    raise UnresolvableLandmarkError(f"cannot resolve landmarks in {text!r}")


def map_template(phrase: str, resolver) -> SExpression:
    """Map a stylized location phrase onto an s-expression.

    Recognized templates: ``near <L>``, ``between <L1> and <L2>``,
    ``on <L1>, near <L2>``, ``on <L1> between <L2> and <L3>``,
    ``inside <L>`` and ``outside``.
    """
    if not isinstance(resolver, LandmarkResolver):
        resolver = LandmarkResolver.from_landmarks(resolver)
    text = " ".join(phrase.split())
    low = text.casefold()

    if low == "outside":
        return SExpression((SDescriptor("outdoor"),))
    m = re.fullmatch(r"on (.+?),? near (.+)", text, re.IGNORECASE)
    if m:
        return SExpression((SDescriptor("within", (resolver.resolve(m.group(1)),)),
                            SDescriptor("near", (resolver.resolve(m.group(2)),))))
    m = re.fullmatch(r"on (.+?) between (.+)", text, re.IGNORECASE)
    if m:
        a, b = _split_and(m.group(2), resolver)
        return SExpression((SDescriptor("within", (resolver.resolve(m.group(1)),)),
                            SDescriptor("between", (a, b))))
    m = re.fullmatch(r"between (.+)", text, re.IGNORECASE)
    if m:
        return SExpression((SDescriptor("between", _split_and(m.group(1), resolver)),))
    m = re.fullmatch(r"near (.+)", text, re.IGNORECASE)
    if m:
        return SExpression((SDescriptor("near", (resolver.resolve(m.group(1)),)),))
    m = re.fullmatch(r"inside (.+)", text, re.IGNORECASE)
    if m:
        return SExpression((SDescriptor("within", (resolver.resolve(m.group(1)),)),))
    raise NoTemplateMatchError(f"no template matches {phrase!r}")
