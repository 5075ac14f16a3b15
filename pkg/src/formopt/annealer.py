"""Restart simulated annealing over a QuboModel, plus sampling-depth budgets.

The solver runs independent Metropolis chains with single-bit-flip proposals
under a geometric temperature schedule and returns the best distinct states
that are not in the caller's exclusion set (already-tested recipes). An
exhaustive enumerator doubles as the test oracle for small n.

The budget helpers quantify how many independent draws a sampler needs
before one of them beats a target lying `m` standard deviations below the
mean of an approximately Gaussian cost distribution: a single draw fails
with probability Phi(m), so k draws suffice once Phi(m)^k < epsilon. That
per-draw failure rate, and hence the required budget, does not depend on
the number of bits; deepening the target by one standard deviation
multiplies the budget by roughly e^2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ._sa_kernel import run_chains
from .errors import DegenerateDepth, Exhausted, TooLarge, ZeroVariance
from .qubo import QuboModel
from .validation import as_bit_string, bit_value, mask_seed

EXHAUSTIVE_MAX_BITS = 24

# spawn-key roles so every consumer of a seed gets an independent stream
_ROLE_INIT, _ROLE_BITS, _ROLE_UNIF, _ROLE_TEMP, _ROLE_ZOBRIST = range(5)


@dataclass(frozen=True)
class SaConfig:
    """Solver knobs.

    sweeps is the number of full-bit passes per restart (n proposals each).
    temp_initial defaults to the sample standard deviation of 100 random
    states' energies; temp_final defaults to temp_initial / 1000.
    exclude holds bit strings that must not be returned as candidates; they
    may still be traversed by a chain.
    """

    sweeps: int = 2000
    restarts: int = 27
    temp_initial: float | None = None
    temp_final: float | None = None
    seed: int = 0
    exclude: frozenset[str] = field(default_factory=frozenset)
    top_k: int = 5

    def __post_init__(self):
        if self.sweeps < 1 or self.restarts < 1 or self.top_k < 1:
            raise ValueError("sweeps, restarts and top_k must all be >= 1")
        if self.temp_initial is not None and self.temp_final is not None:
            if not (self.temp_initial >= self.temp_final > 0):
                raise ValueError("need temp_initial >= temp_final > 0")
        object.__setattr__(self, "exclude", frozenset(self.exclude))


@dataclass(frozen=True)
class SolveResult:
    """Ranked candidates (bits, predicted value), best first, plus energy
    statistics over every state the chains visited."""

    candidates: tuple[tuple[str, float], ...]
    best_energy: float
    mean_energy: float
    std_energy: float
    n_sampled: int

    @property
    def best(self) -> tuple[str, float]:
        return self.candidates[0]


@dataclass(frozen=True)
class DepthBudget:
    """How hard a target is to beat by random draws: the depth m (in sigma),
    the per-draw failure probability, and the minimal number of draws that
    pushes overall failure below epsilon."""

    m: float
    per_draw_failure: float
    required_draws: int
    epsilon: float

    @classmethod
    def compute(cls, m: float, epsilon: float) -> "DepthBudget":
        return cls(
            m=float(m),
            per_draw_failure=failure_rate(m),
            required_draws=required_iterations(m, epsilon),
            epsilon=float(epsilon),
        )


def failure_rate(m: float) -> float:
    """Probability a single uniform draw fails to beat a cost m sigma below
    the mean: the standard normal CDF at m."""
    if not math.isfinite(m):
        raise ValueError(f"depth must be finite, got {m!r}")
    return 0.5 * math.erfc(-m / math.sqrt(2.0))


def required_iterations(m: float, epsilon: float, resolution: float | None = 1e-4) -> int:
    """Smallest k with failure_rate(m)**k < epsilon.

    The per-draw probability is quantized to `resolution` (default one basis
    point, i.e. percentages with two decimals) before exponentiation, which
    is the precision the budget is ever quoted at; pass resolution=None for
    the full-precision probability.
    """
    if not 0.0 < epsilon < 1.0:
        raise ValueError(f"epsilon must lie in (0, 1), got {epsilon!r}")
    p = failure_rate(m)
    if resolution is not None:
        p = round(p / resolution) * resolution
    if p >= 1.0:
        raise DegenerateDepth(
            f"per-draw failure rate for depth m={m} rounds to 1; no draw budget applies"
        )
    if p <= 0.0:
        return 1
    k = max(1, math.floor(math.log(epsilon) / math.log(p)) + 1)
    while p**k >= epsilon:
        k += 1
    while k > 1 and p ** (k - 1) < epsilon:
        k -= 1
    return k


def estimate_depth(costs, best: float) -> float:
    """Depth m = -(best - mean) / std of a cost sample (lower cost is better)."""
    sample = np.asarray(costs, dtype=float)
    if sample.size < 2:
        raise ZeroVariance("need at least 2 sampled costs to estimate depth")
    std = float(sample.std(ddof=1))
    if std == 0.0:
        raise ZeroVariance("sampled costs have zero variance")
    return -(float(best) - float(sample.mean())) / std


def _spawned_rng(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(
        np.random.SeedSequence(entropy=mask_seed(seed), spawn_key=key)
    )


def _auto_temperature(model: QuboModel, seed: int) -> float:
    """Sample std of 100 random-state energies; 1.0 on degenerate models."""
    rng = _spawned_rng(seed, _ROLE_TEMP)
    states = rng.integers(0, 2, size=(100, model.n), dtype=np.uint8)
    std = float(model.evaluate_batch(states).std(ddof=1))
    return std if std > 0.0 else 1.0


def _zobrist_keys(n: int, seed: int) -> np.ndarray:
    rng = _spawned_rng(seed, _ROLE_ZOBRIST)
    return rng.integers(0, 2**64, size=n, dtype=np.uint64)


def solve(model: QuboModel, config: SaConfig = SaConfig()) -> SolveResult:
    """Restart simulated annealing; maximizes the model's prediction.

    Deterministic for a fixed (model, config): every restart draws from its
    own generator derived from (seed, restart index), so the outcome cannot
    depend on execution order. Raises Exhausted when every state visited
    across all restarts is in config.exclude.
    """
    n = model.n
    sweeps, restarts = config.sweeps, config.restarts
    t_hi = config.temp_initial
    if t_hi is None:
        t_hi = _auto_temperature(model, config.seed)
    t_lo = config.temp_final if config.temp_final is not None else t_hi / 1000.0
    if not (t_hi >= t_lo > 0.0):
        raise ValueError(f"bad temperature range [{t_lo}, {t_hi}]")

    steps = sweeps * n
    if sweeps == 1:
        sweep_temps = np.array([t_hi])
    else:
        sweep_temps = t_hi * (t_lo / t_hi) ** (np.arange(sweeps) / (sweeps - 1))
    temps = np.repeat(sweep_temps, n)

    init_states = np.empty((restarts, n), dtype=np.uint8)
    bit_idx = np.empty((restarts, steps), dtype=np.int64)
    log_unif = np.empty((restarts, steps), dtype=np.float64)
    for r in range(restarts):
        rng = _spawned_rng(config.seed, _ROLE_INIT, r)
        init_states[r] = rng.integers(0, 2, size=n, dtype=np.uint8)
        bit_idx[r] = rng.integers(0, n, size=steps, dtype=np.int64)
        u = rng.random(steps)
        with np.errstate(divide="ignore"):  # u == 0 -> -inf -> always accept
            log_unif[r] = np.log(u)

    zobrist = _zobrist_keys(n, config.seed)
    exclude = {as_bit_string(b) for b in config.exclude}
    if exclude:
        rows = np.array(
            [[c == "1" for c in b] for b in sorted(exclude)], dtype=bool
        )
        excl_hashes = np.sort(
            np.bitwise_xor.reduce(np.where(rows, zobrist, np.uint64(0)), axis=1)
        )
    else:
        excl_hashes = np.empty(0, dtype=np.uint64)

    (best_states, best_energies, found,
     count, total, total_sq, best_seen) = run_chains(
        model.coupling_matrix(), model.linear, model.constant,
        init_states, bit_idx, log_unif, temps, zobrist, excl_hashes,
    )

    pool: dict[str, float] = {}
    for r in range(restarts):
        if not found[r]:
            continue
        bits = "".join("1" if v else "0" for v in best_states[r])
        if bits in exclude:  # exact re-check; hashes only pre-filter
            continue
        pool[bits] = model.evaluate(bits)
    if not pool:
        raise Exhausted(
            "every state visited by the solver is excluded; "
            "fall back to untested neighbors"
        )
    ranked = sorted(pool.items(), key=lambda kv: (-kv[1], bit_value(kv[0])))

    mean = total / count
    var = max(total_sq / count - mean * mean, 0.0)
    return SolveResult(
        candidates=tuple(ranked[: config.top_k]),
        best_energy=float(best_seen),
        mean_energy=float(mean),
        std_energy=float(math.sqrt(var)),
        n_sampled=int(count),
    )


def exhaustive_solve(model: QuboModel) -> tuple[str, float]:
    """True argmax by enumeration; ties break to the lowest binary value.

    Guarded to n <= 24 (the whole point of the annealer is to avoid this)."""
    n = model.n
    if n > EXHAUSTIVE_MAX_BITS:
        raise TooLarge(f"exhaustive enumeration is capped at n={EXHAUSTIVE_MAX_BITS}")
    shifts = np.arange(n - 1, -1, -1, dtype=np.uint32)
    best_val = -math.inf
    best_state = 0
    chunk = 1 << 16
    for lo in range(0, 1 << n, chunk):
        hi = min(lo + chunk, 1 << n)
        codes = np.arange(lo, hi, dtype=np.uint32)
        X = (codes[:, None] >> shifts[None, :]) & 1
        energies = model.evaluate_batch(X.astype(np.uint8))
        k = int(np.argmax(energies))  # first occurrence = lowest binary value
        if energies[k] > best_val:
            best_val = float(energies[k])
            best_state = lo + k
    return format(best_state, f"0{n}b"), best_val
