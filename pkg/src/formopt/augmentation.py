"""Synthetic filler for scarce datasets, and the rule that prunes it.

With O(n^2) coefficients and a handful of experiments the surrogate is
wildly underdetermined, so n^2 synthetic observations are scattered over
untried bit vectors with values drawn just below the real mean: the model
then predicts "about average" everywhere it has no evidence instead of
extrapolating wildly. Crucially, filler close to real measurements (Hamming
distance <= 3 by default) is deleted again, so the flat prior does not
drown out the neighborhoods where real gradients are known and better
recipes are likely to hide. Real observations are never touched.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import Dataset
from .encoding import FactorSchema
from .errors import NoRealData, SpaceExhausted
from .validation import mask_seed


@dataclass(frozen=True)
class AugmentConfig:
    """count defaults to n^2 at application time; values are drawn uniformly
    from [mean*(1 - below_mean_fraction), mean) over the real mean."""

    count: int | None = None
    below_mean_fraction: float = 0.05
    elimination_radius: int = 3
    seed: int = 0

    def __post_init__(self):
        if self.count is not None and self.count < 1:
            raise ValueError("count must be >= 1 when given")
        if not 0.0 < self.below_mean_fraction <= 1.0:
            raise ValueError("below_mean_fraction must lie in (0, 1]")
        if self.elimination_radius < 0:
            raise ValueError("elimination_radius must be >= 0")


def augment(dataset: Dataset, schema: FactorSchema,
            config: AugmentConfig = AugmentConfig()) -> Dataset:
    """Return a copy of `dataset` plus `count` augmented observations.

    Bits are sampled uniformly without replacement from states not already
    present (real or augmented); values sit strictly below the real mean.
    Deterministic for a fixed seed. Raises SpaceExhausted when fewer free
    states remain than requested and NoRealData without a real observation
    to anchor the mean.
    """
    real = dataset.real()
    if not real:
        raise NoRealData("augmentation needs at least one real observation")
    n = schema.n
    count = config.count if config.count is not None else n * n
    existing = dataset.bit_strings()
    free = 2**n - len(existing)
    if free < count:
        raise SpaceExhausted(
            f"requested {count} augmented states but only {free} of 2^{n} are untried"
        )

    rng = np.random.default_rng(mask_seed(config.seed))
    if n <= 16:
        # small spaces: enumerate the free states and sample exactly
        free_states = [
            bits for v in range(2**n)
            if (bits := format(v, f"0{n}b")) not in existing
        ]
        idx = rng.choice(len(free_states), size=count, replace=False)
        new_bits = [free_states[i] for i in idx]
    else:
        # vast spaces: rejection sampling, collisions are vanishingly rare
        taken = set(existing)
        new_bits = []
        while len(new_bits) < count:
            block = rng.integers(0, 2, size=(max(count - len(new_bits), 16), n))
            for row in block:
                bits = "".join("1" if b else "0" for b in row)
                if bits not in taken:
                    taken.add(bits)
                    new_bits.append(bits)
                    if len(new_bits) == count:
                        break

    mean = dataset.real_mean
    lo = mean * (1.0 - config.below_mean_fraction)
    values = lo + (mean - lo) * rng.random(count)

    out = dataset.copy()
    for bits, value in zip(new_bits, values):
        out.record(bits, float(value), kind="augmented")
    return out


def eliminate(dataset: Dataset, radius: int = 3) -> Dataset:
    """Drop augmented observations within Hamming `radius` of any real one.

    Real observations always survive; survivor order is preserved;
    idempotent."""
    real_bits = sorted(dataset.bit_strings("real"))
    aug = dataset.augmented()
    if not real_bits or not aug or radius < 0:
        return dataset.copy()
    R = np.array([[c == "1" for c in b] for b in real_bits], dtype=np.uint8)
    A = np.array([[c == "1" for c in o.bits] for o in aug], dtype=np.uint8)
    dmin = (A[:, None, :] != R[None, :, :]).sum(axis=2).min(axis=1)
    doomed = {o.id for o, d in zip(aug, dmin) if d <= radius}
    return Dataset(o for o in dataset if o.id not in doomed)
