"""Factor-to-bitstring encoding and Hamming geometry.

A formulation is a fixed-length bit vector. A :class:`FactorSchema` explains
what the bits mean: each factor occupies a contiguous slice, either
binary-coded (level index written in base 2) or one-hot (one bit per level).
The campaign machinery operates on raw bit vectors; decoding back to factor
levels is presentation only, and bit patterns with no physical recipe are
reported as :class:`~formopt.errors.InvalidCode` rather than silently snapped
to a nearby level.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field

from .errors import (
    InvalidCode,
    LengthMismatch,
    LevelNotInSchema,
    ParseError,
    UnknownFactor,
)
from .validation import as_bit_string

CODE_KINDS = ("binary-coded", "one-hot")


@dataclass(frozen=True)
class FactorSpec:
    """One formulation factor: its physical levels and their bit code.

    levels must be strictly increasing. For binary-coded factors the level
    index is written in `bit_width` bits (so len(levels) <= 2**bit_width);
    for one-hot factors bit_width must equal len(levels).
    """

    name: str
    unit: str
    levels: tuple[float, ...]
    bit_width: int
    code: str = "binary-coded"

    def __post_init__(self):
        object.__setattr__(self, "levels", tuple(float(v) for v in self.levels))
        if not self.name:
            raise ValueError("factor name must be non-empty")
        if self.code not in CODE_KINDS:
            raise ValueError(f"code must be one of {CODE_KINDS}, got {self.code!r}")
        if self.bit_width < 1:
            raise ValueError("bit_width must be >= 1")
        if not self.levels:
            raise ValueError("levels must be non-empty")
        if any(b >= a for a, b in zip(self.levels[1:], self.levels)):
            raise ValueError(f"levels must be strictly increasing: {self.levels}")
        if self.code == "binary-coded" and len(self.levels) > 2**self.bit_width:
            raise ValueError(
                f"{len(self.levels)} levels do not fit in {self.bit_width} bits"
            )
        if self.code == "one-hot" and len(self.levels) != self.bit_width:
            raise ValueError("one-hot factors need bit_width == number of levels")

    def encode_value(self, value: float) -> str:
        try:
            idx = self.levels.index(float(value))
        except ValueError:
            raise LevelNotInSchema(
                f"{value!r} is not a level of factor {self.name!r}; "
                f"levels are {list(self.levels)}"
            ) from None
        if self.code == "one-hot":
            return "".join("1" if i == idx else "0" for i in range(self.bit_width))
        return format(idx, f"0{self.bit_width}b")

    def decode_bits(self, bits: str) -> float:
        if len(bits) != self.bit_width:
            raise LengthMismatch(
                f"factor {self.name!r} expects {self.bit_width} bits, got {len(bits)}"
            )
        if self.code == "one-hot":
            if bits.count("1") != 1:
                raise InvalidCode(
                    f"one-hot factor {self.name!r} needs exactly one set bit, got {bits!r}"
                )
            return self.levels[bits.index("1")]
        idx = int(bits, 2)
        if idx >= len(self.levels):
            raise InvalidCode(
                f"code {idx} exceeds the last level index {len(self.levels) - 1} "
                f"of factor {self.name!r}"
            )
        return self.levels[idx]


@dataclass(frozen=True)
class FactorSchema:
    """Ordered factors plus the total bit count `n`."""

    factors: tuple[FactorSpec, ...]
    n: int = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "factors", tuple(self.factors))
        names = [f.name for f in self.factors]
        if len(set(names)) != len(names):
            raise ValueError(f"factor names must be unique: {names}")
        n = sum(f.bit_width for f in self.factors)
        if n < 1:
            raise ValueError("schema must define at least one bit")
        object.__setattr__(self, "n", n)

    def to_dict(self) -> dict:
        return {
            "factors": [
                {
                    "name": f.name,
                    "unit": f.unit,
                    "levels": list(f.levels),
                    "bit_width": f.bit_width,
                    "code": f.code,
                }
                for f in self.factors
            ]
        }

    @classmethod
    def from_dict(cls, data: dict) -> "FactorSchema":
        try:
            factors = [
                FactorSpec(
                    name=f["name"],
                    unit=f.get("unit", ""),
                    levels=tuple(f["levels"]),
                    bit_width=int(f["bit_width"]),
                    code=f.get("code", "binary-coded"),
                )
                for f in data["factors"]
            ]
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"bad schema: {exc}") from exc
        return cls(factors=tuple(factors))

    @classmethod
    def from_json(cls, text: str) -> "FactorSchema":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ParseError(f"schema is not valid JSON: {exc}") from exc
        return cls.from_dict(data)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    @classmethod
    def plain_bits(cls, n: int) -> "FactorSchema":
        """A schema of n anonymous 2-level factors; used when only the raw
        bit space matters (no physical decode)."""
        return cls(
            factors=tuple(
                FactorSpec(name=f"x{i}", unit="", levels=(0.0, 1.0), bit_width=1)
                for i in range(n)
            )
        )

    def level_assignments(self):
        """Iterate every valid factor-level assignment (exhaustive)."""
        names = [f.name for f in self.factors]
        for combo in itertools.product(*(f.levels for f in self.factors)):
            yield dict(zip(names, combo))


def encode(levels: dict, schema: FactorSchema) -> str:
    """Map {factor name: level value} to the concatenated bit string.

    Every schema factor must be present and each value must be an exact
    member of that factor's levels.
    """
    unknown = set(levels) - {f.name for f in schema.factors}
    if unknown:
        raise UnknownFactor(f"not in schema: {sorted(unknown)}")
    parts = []
    for spec in schema.factors:
        if spec.name not in levels:
            raise UnknownFactor(f"missing value for factor {spec.name!r}")
        parts.append(spec.encode_value(levels[spec.name]))
    return "".join(parts)


def decode(bits: str, schema: FactorSchema) -> dict:
    """Inverse of :func:`encode`; raises InvalidCode on unphysical patterns."""
    bits = as_bit_string(bits)
    if len(bits) != schema.n:
        raise LengthMismatch(f"expected {schema.n} bits, got {len(bits)}")
    out = {}
    pos = 0
    for spec in schema.factors:
        out[spec.name] = spec.decode_bits(bits[pos : pos + spec.bit_width])
        pos += spec.bit_width
    return out


def hamming(a: str, b: str) -> int:
    """Number of differing positions between two equal-length bit strings."""
    a = as_bit_string(a)
    b = as_bit_string(b)
    if len(a) != len(b):
        raise LengthMismatch(f"lengths differ: {len(a)} vs {len(b)}")
    return sum(ca != cb for ca, cb in zip(a, b))


def neighbors(x: str, radius: int = 1) -> list[str]:
    """All bit strings within Hamming distance `radius` of x, excluding x.

    Deterministic order: ascending tuples of flipped indices, i.e. (0,),
    (0,1), ..., (1,), (1,2), ...; at radius 1 this is simply "flip bit 0
    first, then bit 1, ...".
    """
    x = as_bit_string(x)
    if radius < 1:
        raise ValueError("radius must be >= 1")
    n = len(x)
    flips = sorted(
        idx
        for r in range(1, min(radius, n) + 1)
        for idx in itertools.combinations(range(n), r)
    )
    out = []
    for idx in flips:
        chars = list(x)
        for i in idx:
            chars[i] = "1" if chars[i] == "0" else "0"
        out.append("".join(chars))
    return out
