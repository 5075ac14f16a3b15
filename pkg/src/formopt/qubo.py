"""Quadratic surrogate over binary formulation vectors.

The model predicts the response E(x) = sum_{i<j} q[i,j] x_i x_j
+ sum_i b_i x_i + c and is stored canonically: strictly upper-triangular
couplings, diagonal quadratic terms folded into the linear vector (x_i^2 = x_i
over binary variables, so they are indistinguishable), and pairs folded onto
the upper triangle. For n bits that is n(n-1)/2 + n + 1 free parameters
(254 at n = 22); a redundant full-matrix parameterization of the same
function would carry n^2 + n + 1 (507 at n = 22).

The predicted value is the quantity to MAXIMIZE; solvers minimize -E
internally. Models are immutable after construction and safe to share across
concurrent solver workers.
"""

from __future__ import annotations

import json

import numpy as np

from .errors import IndexOutOfRange, LengthMismatch, ParseError, VersionMismatch
from .validation import as_bit_array, as_bit_matrix

FORMAT_VERSION = 1


class QuboModel:
    """Immutable quadratic surrogate.

    Attributes:
        n: number of bits.
        quad: (n, n) strictly upper-triangular coupling matrix (read-only).
        linear: (n,) vector, diagonal/linear terms (read-only).
        constant: scalar offset.
    """

    __slots__ = ("n", "quad", "linear", "constant", "_coupling")

    def __init__(self, n: int, quad=None, linear=None, constant: float = 0.0):
        if n < 1:
            raise ValueError("n must be >= 1")
        object.__setattr__(self, "n", int(n))
        q = np.zeros((n, n)) if quad is None else np.array(quad, dtype=float)
        if q.shape != (n, n):
            raise LengthMismatch(f"quad must be ({n}, {n}), got {q.shape}")
        if np.any(np.tril(q) != 0.0):
            raise ValueError("quad must be strictly upper triangular")
        b = np.zeros(n) if linear is None else np.array(linear, dtype=float)
        if b.shape != (n,):
            raise LengthMismatch(f"linear must have length {n}, got {b.shape}")
        c = float(constant)
        if not (np.isfinite(q).all() and np.isfinite(b).all() and np.isfinite(c)):
            raise ValueError("model coefficients must be finite")
        q.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "quad", q)
        object.__setattr__(self, "linear", b)
        object.__setattr__(self, "constant", c)
        # symmetric coupling matrix, zero diagonal: row k holds every
        # coupling touching bit k, which makes single-flip deltas O(n)
        coupling = q + q.T
        coupling.setflags(write=False)
        object.__setattr__(self, "_coupling", coupling)

    def __setattr__(self, name, value):
        raise AttributeError("QuboModel is immutable")

    @classmethod
    def from_dense(cls, matrix, linear=None, constant: float = 0.0) -> "QuboModel":
        """Fold an arbitrary (possibly full/symmetric) quadratic matrix into
        canonical form: q[i,j] + q[j,i] onto the upper triangle, diagonal
        into the linear vector."""
        m = np.array(matrix, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise LengthMismatch(f"matrix must be square, got {m.shape}")
        n = m.shape[0]
        upper = np.triu(m, 1) + np.tril(m, -1).T
        b = (np.zeros(n) if linear is None else np.asarray(linear, float)) + np.diag(m)
        return cls(n, upper, b, constant)

    # -- evaluation -----------------------------------------------------------

    def evaluate(self, bits) -> float:
        """Predicted value at one bit vector."""
        x = as_bit_array(bits, self.n).astype(float)
        return float(x @ self.quad @ x + self.linear @ x + self.constant)

    def evaluate_batch(self, X) -> np.ndarray:
        """Predicted values for an (N, n) bit matrix in one pass."""
        M = as_bit_matrix(X, self.n).astype(float)
        return (M @ self.quad * M).sum(axis=1) + M @ self.linear + self.constant

    def delta_evaluate(self, bits, flip: int, current: float) -> float:
        """Energy after toggling bit `flip`, given the current energy.

        O(n) instead of the O(n^2) full evaluation; `current` must equal
        evaluate(bits).
        """
        x = as_bit_array(bits, self.n)
        if not 0 <= flip < self.n:
            raise IndexOutOfRange(f"flip index {flip} outside [0, {self.n})")
        sign = 1.0 - 2.0 * x[flip]  # +1 when 0 -> 1
        return current + sign * (self.linear[flip] + self._coupling[flip] @ x)

    def coupling_matrix(self) -> np.ndarray:
        """Symmetric coupling matrix with zero diagonal (read-only view)."""
        return self._coupling

    # -- serialization ---------------------------------------------------------

    def to_dict(self) -> dict:
        i, j = np.nonzero(self.quad)
        return {
            "version": FORMAT_VERSION,
            "n": self.n,
            "quad": [[int(a), int(b), float(self.quad[a, b])] for a, b in zip(i, j)],
            "linear": [float(v) for v in self.linear],
            "constant": self.constant,
        }

    def serialize(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    @classmethod
    def from_dict(cls, data: dict) -> "QuboModel":
        try:
            version = data["version"]
        except (TypeError, KeyError):
            raise ParseError("model is missing the 'version' field") from None
        if version != FORMAT_VERSION:
            raise VersionMismatch(f"unsupported model version {version!r}")
        try:
            n = int(data["n"])
            quad = np.zeros((n, n))
            for i, j, value in data.get("quad", []):
                if not 0 <= i < j < n:
                    raise ParseError(f"quad entry ({i}, {j}) is not upper-triangular")
                quad[i, j] = float(value)
            linear = np.asarray(data["linear"], dtype=float)
            constant = float(data["constant"])
        except ParseError:
            raise
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"bad model payload: {exc}") from exc
        return cls(n, quad, linear, constant)

    @classmethod
    def deserialize(cls, text: str) -> "QuboModel":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ParseError(f"model is not valid JSON: {exc}") from exc
        return cls.from_dict(data)

    # -- misc ------------------------------------------------------------------

    def __eq__(self, other):
        return (
            isinstance(other, QuboModel)
            and self.n == other.n
            and np.array_equal(self.quad, other.quad)
            and np.array_equal(self.linear, other.linear)
            and self.constant == other.constant
        )

    def __repr__(self):
        nq = int(np.count_nonzero(self.quad))
        return f"QuboModel(n={self.n}, quad_terms={nq}, constant={self.constant:g})"


def random_model(n: int, seed: int = 0, scale: float = 1.0) -> QuboModel:
    """Dense random model with N(0, scale^2) coefficients; test/oracle helper."""
    rng = np.random.default_rng(seed)
    quad = np.triu(rng.normal(0.0, scale, (n, n)), 1)
    linear = rng.normal(0.0, scale, n)
    constant = float(rng.normal(0.0, scale))
    return QuboModel(n, quad, linear, constant)
