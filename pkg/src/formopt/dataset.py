"""Observations and the dataset they live in.

An observation is one (recipe bits, measured value) pair, flagged `real`
(came from an actual experiment) or `augmented` (synthetic filler). Derived
statistics -- mean, std, max -- are always over the real observations only,
so synthetic rows can never raise the ceiling the error metrics and the
contour weights are normalized against.

CSV interchange: header `id,bits,ain,kind`, bits in canonical '0/1' text.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, replace

import numpy as np

from .errors import LengthMismatch, NoRealData, ParseError
from .validation import as_bit_string, check_finite_ain

KINDS = ("real", "augmented")
CSV_HEADER = ["id", "bits", "ain", "kind"]


@dataclass(frozen=True)
class Observation:
    id: int
    bits: str
    ain: float
    kind: str = "real"

    def __post_init__(self):
        object.__setattr__(self, "bits", as_bit_string(self.bits))
        object.__setattr__(self, "ain", check_finite_ain(self.ain))
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}, got {self.kind!r}")


class Dataset:
    """Ordered collection of observations with cached real-only statistics."""

    def __init__(self, observations=()):
        self._observations: list[Observation] = []
        self._ids: set[int] = set()
        self._n_bits: int | None = None
        self._stats: tuple[float, float, float] | None = None
        for obs in observations:
            self.add(obs)

    # -- mutation --------------------------------------------------------------

    def add(self, obs: Observation) -> Observation:
        if obs.id in self._ids:
            raise ValueError(f"duplicate observation id {obs.id}")
        if self._n_bits is None:
            self._n_bits = len(obs.bits)
        elif len(obs.bits) != self._n_bits:
            raise LengthMismatch(
                f"observation {obs.id} has {len(obs.bits)} bits, dataset has {self._n_bits}"
            )
        self._observations.append(obs)
        self._ids.add(obs.id)
        self._stats = None
        return obs

    def record(self, bits: str, ain: float, kind: str = "real") -> Observation:
        """Append with the next free id."""
        return self.add(Observation(id=self.next_id(), bits=bits, ain=ain, kind=kind))

    def next_id(self) -> int:
        return max(self._ids) + 1 if self._ids else 0

    # -- access ----------------------------------------------------------------

    @property
    def observations(self) -> tuple[Observation, ...]:
        return tuple(self._observations)

    @property
    def n_bits(self) -> int | None:
        return self._n_bits

    def __len__(self):
        return len(self._observations)

    def __iter__(self):
        return iter(self._observations)

    def real(self) -> tuple[Observation, ...]:
        return tuple(o for o in self._observations if o.kind == "real")

    def augmented(self) -> tuple[Observation, ...]:
        return tuple(o for o in self._observations if o.kind == "augmented")

    def bit_strings(self, kind: str | None = None) -> set[str]:
        return {
            o.bits for o in self._observations if kind is None or o.kind == kind
        }

    def copy(self) -> "Dataset":
        return Dataset(self._observations)

    # -- derived statistics (real observations only) -----------------------------

    def _real_stats(self) -> tuple[float, float, float]:
        if self._stats is None:
            values = np.array([o.ain for o in self._observations if o.kind == "real"])
            if values.size == 0:
                raise NoRealData("dataset holds no real observations")
            self._stats = (
                float(values.mean()),
                float(values.std()),
                float(values.max()),
            )
        return self._stats

    @property
    def real_mean(self) -> float:
        return self._real_stats()[0]

    @property
    def real_std(self) -> float:
        return self._real_stats()[1]

    @property
    def real_max(self) -> float:
        return self._real_stats()[2]

    # -- matrix views ------------------------------------------------------------

    def design(self, kind: str | None = None) -> tuple[np.ndarray, np.ndarray]:
        """(X, y): uint8 bit matrix and float response vector."""
        rows = [o for o in self._observations if kind is None or o.kind == kind]
        n = self._n_bits or 0
        X = np.zeros((len(rows), n), dtype=np.uint8)
        y = np.zeros(len(rows))
        for i, o in enumerate(rows):
            X[i] = [c == "1" for c in o.bits]
            y[i] = o.ain
        return X, y

    # -- CSV ----------------------------------------------------------------------

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for o in self._observations:
            writer.writerow([o.id, o.bits, repr(o.ain), o.kind])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "Dataset":
        reader = csv.reader(io.StringIO(text))
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError("empty dataset CSV") from None
        if [h.strip() for h in header] != CSV_HEADER:
            raise ParseError(f"expected header {','.join(CSV_HEADER)!r}, got {header}")
        ds = cls()
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 4:
                raise ParseError(f"line {lineno}: expected 4 fields, got {len(row)}")
            try:
                ds.add(Observation(int(row[0]), row[1], float(row[2]), row[3].strip()))
            except (ValueError, LengthMismatch) as exc:
                raise ParseError(f"line {lineno}: {exc}") from exc
        return ds


def renumber(observations, start: int = 0) -> list[Observation]:
    """Fresh consecutive ids; used when merging datasets."""
    return [replace(o, id=start + i) for i, o in enumerate(observations)]
