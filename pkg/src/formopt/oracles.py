"""Synthetic experiment stand-ins for closed-loop simulation.

An oracle maps a recipe bit string to a measured value, like the lab does,
but cheaply and reproducibly. Three kinds:

  hidden_qubo      a random quadratic surface (the surrogate family itself,
                   so exact recovery is possible in principle)
  qubo_plus_cubic  adds random third-order terms the quadratic surrogate
                   cannot represent, forcing systematic model error
  noisy            adds zero-mean Gaussian measurement noise per call

Raw values are affinely rescaled to a configurable output range (default
6000..11000) so simulated campaigns run on a realistic response scale.
"""

from __future__ import annotations

import numpy as np

from .errors import BadParams
from .qubo import QuboModel
from .validation import as_bit_array, as_bit_matrix, mask_seed

KINDS = ("hidden_qubo", "qubo_plus_cubic", "noisy")

_HIDDEN_OPTIMUM_MAX_BITS = 16


class Oracle:
    """Deterministic callable bits -> value (unless noise_std > 0)."""

    def __init__(self, name: str, n: int, batch_fn, noise_std: float = 0.0,
                 noise_rng: np.random.Generator | None = None,
                 hidden_optimum: tuple[str, float] | None = None):
        self.name = name
        self.n = n
        self._batch_fn = batch_fn
        self.noise_std = noise_std
        self._noise_rng = noise_rng
        self.hidden_optimum = hidden_optimum

    def __call__(self, bits) -> float:
        value = float(self._batch_fn(as_bit_array(bits, self.n)[None, :])[0])
        if self.noise_std > 0.0:
            value += self.noise_std * float(self._noise_rng.standard_normal())
        return value

    def noiseless_batch(self, X) -> np.ndarray:
        """Rescaled values without measurement noise, for analysis."""
        return self._batch_fn(as_bit_matrix(X, self.n))

    def __repr__(self):
        return f"Oracle({self.name})"


def make_oracle(kind: str, n: int, seed: int = 0,
                ain_range: tuple[float, float] = (6000.0, 11000.0),
                n_triples: int | None = None, cubic_scale: float = 1.0,
                noise_std: float = 0.0) -> Oracle:
    """Build a synthetic oracle; same (kind, n, seed, params) -> same oracle."""
    if kind not in KINDS:
        raise BadParams(f"oracle kind must be one of {KINDS}, got {kind!r}")
    if n < 1:
        raise BadParams("n must be >= 1")
    lo, hi = float(ain_range[0]), float(ain_range[1])
    if not lo < hi:
        raise BadParams(f"ain_range must be increasing, got {ain_range}")
    if noise_std < 0:
        raise BadParams("noise_std must be >= 0")
    if kind != "noisy" and noise_std:
        raise BadParams("only the 'noisy' kind takes noise_std")

    root = np.random.SeedSequence(entropy=mask_seed(seed))
    model_seed, triple_seed, probe_seed, noise_seed = root.spawn(4)
    model = _random_model(n, model_seed)

    triples = np.empty((0, 3), dtype=np.int64)
    coeffs = np.empty(0)
    if kind == "qubo_plus_cubic":
        if n < 3:
            raise BadParams("cubic terms need n >= 3")
        t_rng = np.random.default_rng(triple_seed)
        k = n_triples if n_triples is not None else n
        if k < 1:
            raise BadParams("n_triples must be >= 1")
        triples = np.array(
            [t_rng.choice(n, size=3, replace=False) for _ in range(k)], dtype=np.int64
        )
        coeffs = t_rng.normal(0.0, cubic_scale, size=k)

    def raw_batch(X: np.ndarray) -> np.ndarray:
        e = model.evaluate_batch(X)
        Xf = X.astype(float)
        for (i, j, l), c in zip(triples, coeffs):
            e = e + c * Xf[:, i] * Xf[:, j] * Xf[:, l]
        return e

    # calibrate the affine rescale on the full space when small, on a fixed
    # random probe set otherwise
    if n <= _HIDDEN_OPTIMUM_MAX_BITS:
        probes = _all_states(n)
    else:
        probes = np.random.default_rng(probe_seed).integers(
            0, 2, size=(4096, n), dtype=np.uint8
        )
    raw = raw_batch(probes)
    raw_lo, raw_hi = float(raw.min()), float(raw.max())
    if raw_hi == raw_lo:
        scale, shift = 0.0, (lo + hi) / 2.0
    else:
        scale = (hi - lo) / (raw_hi - raw_lo)
        shift = lo - raw_lo * scale

    def batch_fn(X: np.ndarray) -> np.ndarray:
        return raw_batch(X) * scale + shift

    hidden_optimum = None
    if n <= _HIDDEN_OPTIMUM_MAX_BITS:
        k = int(np.argmax(raw))
        hidden_optimum = (format(k, f"0{n}b"), float(raw[k] * scale + shift))

    name = f"{kind}(n={n}, seed={seed})"
    return Oracle(
        name=name, n=n, batch_fn=batch_fn, noise_std=noise_std,
        noise_rng=np.random.default_rng(noise_seed) if kind == "noisy" else None,
        hidden_optimum=hidden_optimum,
    )


def _random_model(n: int, seed_seq: np.random.SeedSequence) -> QuboModel:
    rng = np.random.default_rng(seed_seq)
    quad = np.triu(rng.normal(0.0, 1.0, (n, n)), 1)
    linear = rng.normal(0.0, 1.0, n)
    return QuboModel(n, quad, linear, float(rng.normal()))


def _all_states(n: int) -> np.ndarray:
    shifts = np.arange(n - 1, -1, -1, dtype=np.uint32)
    codes = np.arange(1 << n, dtype=np.uint32)
    return ((codes[:, None] >> shifts[None, :]) & 1).astype(np.uint8)
