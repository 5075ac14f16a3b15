"""Input validation helpers.

Bit vectors travel through the public API as plain '0'/'1' strings (the
canonical text form used in every file format); internally the numeric code
works on small uint8 arrays. These helpers do the conversions and the
boundary checks so the rest of the package can assume clean input.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import LengthMismatch, NonFiniteAin


def as_bit_array(bits, n: int | None = None) -> np.ndarray:
    """Coerce a bit string or 0/1 sequence to a uint8 array.

    Raises LengthMismatch if `n` is given and disagrees, ValueError on any
    character or value outside {0, 1}.
    """
    if isinstance(bits, str):
        if bits.strip("01"):
            raise ValueError(f"bit string may contain only '0'/'1': {bits!r}")
        arr = np.frombuffer(bits.encode("ascii"), dtype=np.uint8) - ord("0")
    else:
        arr = np.asarray(bits)
        if arr.ndim != 1:
            raise ValueError("bit vector must be one-dimensional")
        if not np.isin(arr, (0, 1)).all():
            raise ValueError("bit vector entries must be 0 or 1")
        arr = arr.astype(np.uint8)
    if n is not None and arr.size != n:
        raise LengthMismatch(f"expected {n} bits, got {arr.size}")
    return arr


def as_bit_string(bits) -> str:
    """Canonical '0101...' text form of a bit string or 0/1 sequence."""
    if isinstance(bits, str):
        as_bit_array(bits)  # validate characters only
        return bits
    return "".join("1" if b else "0" for b in as_bit_array(bits))


def as_bit_matrix(X, n: int | None = None) -> np.ndarray:
    """Coerce a 2-D array-like (or iterable of bit strings) to uint8 (N, n)."""
    if not isinstance(X, np.ndarray) and all(isinstance(r, str) for r in X):
        rows = [as_bit_array(r, n) for r in X]
        if not rows:
            return np.zeros((0, n or 0), dtype=np.uint8)
        widths = {r.size for r in rows}
        if len(widths) > 1:
            raise LengthMismatch(f"inconsistent bit lengths: {sorted(widths)}")
        return np.vstack(rows)
    arr = np.asarray(X)
    if arr.ndim != 2:
        raise ValueError("expected a 2-D array of bits")
    if arr.size and not np.isin(arr, (0, 1)).all():
        raise ValueError("bit matrix entries must be 0 or 1")
    if n is not None and arr.shape[1] != n:
        raise LengthMismatch(f"expected {n} columns, got {arr.shape[1]}")
    return arr.astype(np.uint8)


def bit_value(bits) -> int:
    """Binary value of a bit vector, first bit most significant.

    Used as the universal tie-break: the lowest binary value wins.
    """
    return int(as_bit_string(bits), 2) if len(bits) else 0


def check_finite_ain(value) -> float:
    """Validate a measured response value; returns it as float."""
    v = float(value)
    if not math.isfinite(v):
        raise NonFiniteAin(f"measured value must be finite, got {value!r}")
    return v


def check_positive(name: str, value) -> None:
    if not value > 0:
        raise ValueError(f"{name} must be positive, got {value!r}")


def mask_seed(seed: int) -> int:
    """Fold an arbitrary integer seed into the non-negative 64-bit range."""
    return int(seed) & 0xFFFFFFFFFFFFFFFF
