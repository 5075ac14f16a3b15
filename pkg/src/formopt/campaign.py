"""The suggest -> experiment -> record -> refit loop.

A campaign owns the durable state of one optimization: the real
observations, the iteration log, the current best recipe, and a small state
machine (ready -> awaiting_result -> ready, or ready -> terminated). Each
suggestion runs the full pipeline: augment the real data with synthetic
filler, prune filler near real points, fit the surrogate (coarse-fine,
contour-aware by default), and anneal it while excluding every recipe
already tested. If the solver cannot produce an untested candidate, the
campaign probes the single-flip neighbors of the current best; once those
are exhausted too, and none improved, the campaign terminates.

Augmented data never persists: it is regenerated per fit and discarded, so
the stored dataset is exactly the experimental record. The iteration counter
increments only when a recorded experiment strictly improves the best value,
so it counts improvements, not experiments.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import os
import time
from dataclasses import dataclass, replace

import numpy as np

from .annealer import SaConfig, solve
from .augmentation import AugmentConfig, augment, eliminate
from .dataset import Dataset, Observation
from .encoding import FactorSchema, neighbors
from .errors import (
    BitsMismatch,
    Exhausted,
    LengthMismatch,
    NoSeedData,
    ParseError,
    Terminated,
    VersionMismatch,
    WrongState,
)
from .fitting import FitConfig, coarse_fine_fit, fit
from .oracles import Oracle
from .validation import as_bit_string, check_finite_ain, mask_seed

logger = logging.getLogger(__name__)

FORMAT_VERSION = 1

LOG_CSV_HEADER = [
    "Iteration",
    "Number of Experiments",
    "Best_solution",
    "Real AIN",
    "Estimate AIN",
    "MSE(%)",
    "Contour-Aware MSE(%)",
]

READY, AWAITING, TERMINATED = "ready", "awaiting_result", "terminated"


def _now() -> str:
    """ISO timestamp; override with env FORMOPT_CLOCK (epoch seconds) when
    byte-identical artifacts are needed across sessions."""
    fixed = os.environ.get("FORMOPT_CLOCK")
    t = float(fixed) if fixed else time.time()
    return time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime(t))


@dataclass
class LogEntry:
    """One recorded experiment; the columns mirror the exported trace."""

    iteration: int
    experiment_count: int
    suggested_bits: str
    source: str  # "qubo" | "neighbor" | "manual"
    real_ain: float | None
    estimated_ain: float | None
    mse_pct: float | None
    cae_pct: float | None
    best_ain: float
    improving: bool
    timestamp: str

    def to_dict(self) -> dict:
        return {
            "iteration": self.iteration,
            "experiment_count": self.experiment_count,
            "suggested_bits": self.suggested_bits,
            "source": self.source,
            "real_ain": self.real_ain,
            "estimated_ain": self.estimated_ain,
            "mse_pct": self.mse_pct,
            "cae_pct": self.cae_pct,
            "best_ain": self.best_ain,
            "improving": self.improving,
            "timestamp": self.timestamp,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "LogEntry":
        return cls(**d)


@dataclass
class _Pending:
    """Suggestion awaiting its measurement, with the suggesting model's
    estimate and error metrics (the pairing reported in the trace)."""

    bits: str
    estimated_ain: float
    source: str
    mse_pct: float | None
    cae_pct: float | None

    def to_dict(self) -> dict:
        return {
            "bits": self.bits,
            "estimated_ain": self.estimated_ain,
            "source": self.source,
            "mse_pct": self.mse_pct,
            "cae_pct": self.cae_pct,
        }


class Campaign:
    """Single-writer state machine; mutations must be serialized by the caller."""

    def __init__(self, id: str, schema: FactorSchema,
                 fit_config: FitConfig | None = None,
                 sa_config: SaConfig | None = None,
                 aug_config: AugmentConfig | None = None,
                 rng_seed: int = 0):
        self.id = id
        self.schema = schema
        # campaign defaults follow the full procedure: two-stage fit with the
        # contour-aware cost, synthetic filler regenerated per fit
        self.fit_config = fit_config or FitConfig(cost="contour_aware",
                                                  strategy="coarse_fine")
        self.sa_config = sa_config or SaConfig()
        self.aug_config = aug_config or AugmentConfig()
        self.dataset = Dataset()  # real observations only; filler is transient
        self.log: list[LogEntry] = []
        self.iteration = 1
        self.best: tuple[str, float] | None = None
        self.state = READY
        self.pending: _Pending | None = None
        self.rng_seed = int(rng_seed)
        self.suggest_calls = 0

    # -- lifecycle ------------------------------------------------------------

    def _check_ready(self):
        if self.state == TERMINATED:
            raise Terminated(f"campaign {self.id!r} has terminated")
        if self.state != READY:
            raise WrongState(
                f"campaign {self.id!r} is {self.state}; record the pending result first"
            )

    def _seed_for(self, role: int) -> int:
        ss = np.random.SeedSequence(
            entropy=mask_seed(self.rng_seed), spawn_key=(self.suggest_calls, role)
        )
        return int(ss.generate_state(1, np.uint64)[0])

    def suggest_next(self) -> tuple[str, float, str]:
        """Run the pipeline and propose the next experiment.

        Returns (bits, estimated value, source) and moves the campaign to
        awaiting_result. Raises Terminated once the solver is exhausted and
        every single-flip neighbor of the best recipe has been tested.
        """
        self._check_ready()
        n = self.schema.n
        tested = self.dataset.bit_strings("real")

        fit_ds = self.dataset.copy()
        free = 2**n - len(tested)
        count = self.aug_config.count if self.aug_config.count is not None else n * n
        count = min(count, free)
        if count > 0:
            aug_cfg = replace(self.aug_config, count=count, seed=self._seed_for(0))
            fit_ds = augment(fit_ds, self.schema, aug_cfg)
            fit_ds = eliminate(fit_ds, self.aug_config.elimination_radius)

        if self.fit_config.strategy == "coarse_fine":
            report = coarse_fine_fit(fit_ds, self.fit_config)
        else:
            report = fit(fit_ds, self.fit_config)

        sa_cfg = replace(
            self.sa_config, seed=self._seed_for(1), exclude=frozenset(tested)
        )
        try:
            result = solve(report.model, sa_cfg)
            bits, estimate = result.best
            source = "qubo"
        except Exhausted:
            bits = next(
                (nb for nb in neighbors(self.best[0], 1) if nb not in tested), None
            )
            if bits is None:
                # solver exhausted and the full neighbor sweep of the best
                # recipe is tested without improving it: stop condition
                self.state = TERMINATED
                self.suggest_calls += 1
                raise Terminated(
                    f"campaign {self.id!r}: no untested candidates remain around the optimum"
                ) from None
            estimate = report.model.evaluate(bits)
            source = "neighbor"

        self.pending = _Pending(
            bits=bits,
            estimated_ain=float(estimate),
            source=source,
            mse_pct=report.mse_pct,
            cae_pct=report.cae_pct,
        )
        self.state = AWAITING
        self.suggest_calls += 1
        return bits, float(estimate), source

    def record_result(self, bits: str, measured_ain: float,
                      out_of_band: bool = False) -> "Campaign":
        """Store a measured result and advance the state machine.

        The normal path requires a pending suggestion with matching bits.
        With out_of_band=True an unsolicited experiment is recorded without
        touching a pending suggestion."""
        bits = as_bit_string(bits)
        if len(bits) != self.schema.n:
            self._bad_length(bits)
        ain = check_finite_ain(measured_ain)

        if out_of_band:
            if self.state == TERMINATED:
                raise WrongState(f"campaign {self.id!r} has terminated")
            source, pending = "manual", None
        else:
            if self.state != AWAITING or self.pending is None:
                raise WrongState(
                    f"campaign {self.id!r} has no pending suggestion to record"
                )
            if bits != self.pending.bits:
                raise BitsMismatch(
                    f"recorded bits {bits} differ from the pending suggestion "
                    f"{self.pending.bits}; use out_of_band to store unsolicited results"
                )
            source, pending = self.pending.source, self.pending

        if bits in self.dataset.bit_strings("real"):
            logger.warning("campaign %s: %s re-measured", self.id, bits)

        self.dataset.record(bits, ain, kind="real")
        if self.best is None:  # baseline, not an improvement
            improving = False
            self.best = (bits, ain)
        else:
            improving = ain > self.best[1]
            if improving:
                self.best = (bits, ain)
                self.iteration += 1
        self.log.append(LogEntry(
            iteration=self.iteration,
            experiment_count=len(self.dataset.real()),
            suggested_bits=bits,
            source=source,
            real_ain=ain,
            estimated_ain=pending.estimated_ain if pending else None,
            mse_pct=pending.mse_pct if pending else None,
            cae_pct=pending.cae_pct if pending else None,
            best_ain=self.best[1],
            improving=improving,
            timestamp=_now(),
        ))
        if not out_of_band:
            self.pending = None
            self.state = READY
        return self

    def _bad_length(self, bits):
        raise LengthMismatch(
            f"bits have length {len(bits)}, campaign schema has n={self.schema.n}"
        )

    # -- serialization -----------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "version": FORMAT_VERSION,
            "id": self.id,
            "schema": self.schema.to_dict(),
            "fit_config": _fit_config_dict(self.fit_config),
            "sa_config": _sa_config_dict(self.sa_config),
            "aug_config": _aug_config_dict(self.aug_config),
            "observations": [
                {"id": o.id, "bits": o.bits, "ain": o.ain, "kind": o.kind}
                for o in self.dataset
            ],
            "log": [e.to_dict() for e in self.log],
            "iteration": self.iteration,
            "best": {"bits": self.best[0], "ain": self.best[1]} if self.best else None,
            "state": self.state,
            "pending": self.pending.to_dict() if self.pending else None,
            "rng": {"seed": self.rng_seed, "suggest_calls": self.suggest_calls},
        }

    def summary(self) -> dict:
        """Compact view for listings and mutation responses."""
        return {
            "id": self.id,
            "n": self.schema.n,
            "state": self.state,
            "iteration": self.iteration,
            "experiments": len(self.dataset.real()),
            "best": {"bits": self.best[0], "ain": self.best[1]} if self.best else None,
            "pending": self.pending.to_dict() if self.pending else None,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Campaign":
        try:
            version = data["version"]
        except (TypeError, KeyError):
            raise ParseError("campaign is missing the 'version' field") from None
        if version != FORMAT_VERSION:
            raise VersionMismatch(f"unsupported campaign version {version!r}")
        try:
            c = cls(
                id=data["id"],
                schema=FactorSchema.from_dict(data["schema"]),
                fit_config=_fit_config_from(data["fit_config"]),
                sa_config=_sa_config_from(data["sa_config"]),
                aug_config=_aug_config_from(data["aug_config"]),
                rng_seed=data["rng"]["seed"],
            )
            for o in data["observations"]:
                c.dataset.add(Observation(o["id"], o["bits"], o["ain"], o["kind"]))
            c.log = [LogEntry.from_dict(e) for e in data["log"]]
            c.iteration = int(data["iteration"])
            c.best = (data["best"]["bits"], data["best"]["ain"]) if data["best"] else None
            c.state = data["state"]
            if c.state not in (READY, AWAITING, TERMINATED):
                raise ParseError(f"unknown campaign state {c.state!r}")
            c.pending = _Pending(**data["pending"]) if data["pending"] else None
            c.suggest_calls = int(data["rng"]["suggest_calls"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"bad campaign payload: {exc}") from exc
        return c

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "Campaign":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ParseError(f"campaign is not valid JSON: {exc}") from exc
        return cls.from_dict(data)

    # -- exports -------------------------------------------------------------------

    def export_log_csv(self) -> str:
        """Trace in the standard column layout, one row per experiment."""
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(LOG_CSV_HEADER)
        for e in self.log:
            writer.writerow([
                e.iteration,
                e.experiment_count,
                e.suggested_bits,
                _cell(e.real_ain),
                _cell(e.estimated_ain),
                _cell(e.mse_pct),
                _cell(e.cae_pct),
            ])
        return buf.getvalue()

    def metrics_series(self) -> dict:
        """Chart-ready series: best value per experiment, errors per entry."""
        return {
            "experiments": [e.experiment_count for e in self.log],
            "best_ain": [e.best_ain for e in self.log],
            "real_ain": [e.real_ain for e in self.log],
            "iterations": [e.iteration for e in self.log],
            "mse_pct": [e.mse_pct for e in self.log],
            "cae_pct": [e.cae_pct for e in self.log],
        }


def _cell(v):
    return "" if v is None else repr(float(v))


# -- construction -------------------------------------------------------------------


def init_campaign(schema: FactorSchema,
                  fit_config: FitConfig | None = None,
                  sa_config: SaConfig | None = None,
                  aug_config: AugmentConfig | None = None,
                  seed_observations=None,
                  random_count: int | None = None,
                  oracle: Oracle | None = None,
                  rng_seed: int = 0,
                  id: str = "campaign") -> Campaign:
    """Create a campaign from explicit seed observations, or by evaluating
    `random_count` random recipes against an oracle."""
    c = Campaign(id=id, schema=schema, fit_config=fit_config, sa_config=sa_config,
                 aug_config=aug_config, rng_seed=rng_seed)
    seeds: list[tuple[str, float]] = []
    if seed_observations:
        seeds = [(as_bit_string(b), check_finite_ain(a)) for b, a in seed_observations]
    elif random_count:
        if oracle is None:
            raise NoSeedData("random_count needs an oracle to evaluate the seeds")
        rng = np.random.default_rng(
            np.random.SeedSequence(entropy=mask_seed(rng_seed), spawn_key=(0xBEEF,))
        )
        for _ in range(random_count):
            bits = "".join(
                "1" if b else "0" for b in rng.integers(0, 2, size=schema.n)
            )
            seeds.append((bits, oracle(bits)))
    if not seeds:
        raise NoSeedData("a campaign needs at least one seed observation")

    seen = set()
    for bits, ain in seeds:
        if len(bits) != schema.n:
            c._bad_length(bits)
        if bits in seen:
            logger.warning("campaign %s: duplicate seed recipe %s", id, bits)
        seen.add(bits)
        c.dataset.record(bits, ain, kind="real")
        if c.best is None or ain > c.best[1]:
            c.best = (bits, ain)
    return c


def record_result(campaign: Campaign, bits: str, measured_ain: float,
                  out_of_band: bool = False) -> Campaign:
    return campaign.record_result(bits, measured_ain, out_of_band)


def suggest_next(campaign: Campaign) -> tuple[str, float, str]:
    return campaign.suggest_next()


def run_simulated(campaign: Campaign, oracle: Oracle, budget: int) -> Campaign:
    """Closed loop: suggest, evaluate with the oracle, record; stop at the
    budget or at termination."""
    for _ in range(budget):
        try:
            bits, _, _ = campaign.suggest_next()
        except Terminated:
            break
        campaign.record_result(bits, oracle(bits))
    return campaign


def save(campaign: Campaign) -> str:
    return campaign.to_json()


def load(text: str) -> Campaign:
    return Campaign.from_json(text)


# -- config (de)serialization ---------------------------------------------------------


def _fit_config_dict(c: FitConfig) -> dict:
    return {
        "cost": c.cost, "tau": c.tau, "strategy": c.strategy, "ridge": c.ridge,
        "max_iterations": c.max_iterations, "step_size": c.step_size,
        "gradient_tolerance": c.gradient_tolerance, "seed": c.seed,
    }


def _fit_config_from(d: dict) -> FitConfig:
    return FitConfig(**d)


def _sa_config_dict(c: SaConfig) -> dict:
    return {
        "sweeps": c.sweeps, "restarts": c.restarts,
        "temp_initial": c.temp_initial, "temp_final": c.temp_final,
        "seed": c.seed, "exclude": sorted(c.exclude), "top_k": c.top_k,
    }


def _sa_config_from(d: dict) -> SaConfig:
    d = dict(d)
    d["exclude"] = frozenset(d.get("exclude", ()))
    return SaConfig(**d)


def _aug_config_dict(c: AugmentConfig) -> dict:
    return {
        "count": c.count, "below_mean_fraction": c.below_mean_fraction,
        "elimination_radius": c.elimination_radius, "seed": c.seed,
    }


def _aug_config_from(d: dict) -> AugmentConfig:
    return AugmentConfig(**d)
