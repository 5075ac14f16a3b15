"""Campaign state machine, closed-loop simulation, persistence."""

import numpy as np
import pytest

import formopt.campaign as campaign_mod
from formopt.annealer import SaConfig
from formopt.augmentation import AugmentConfig
from formopt.campaign import (
    Campaign,
    init_campaign,
    load,
    run_simulated,
    save,
)
from formopt.encoding import FactorSchema, hamming, neighbors
from formopt.errors import (
    BitsMismatch,
    Exhausted,
    LengthMismatch,
    NonFiniteAin,
    NoSeedData,
    ParseError,
    Terminated,
    VersionMismatch,
    WrongState,
)
from formopt.fitting import FitConfig
from formopt.oracles import make_oracle

FAST_FIT = FitConfig(cost="contour_aware", strategy="coarse_fine",
                     max_iterations=200, gradient_tolerance=1e-6)
FAST_SA = SaConfig(sweeps=80, restarts=4, seed=0)


def fresh(n=8, seeds=6, rng_seed=0, oracle_seed=1, **kw):
    oracle = make_oracle("hidden_qubo", n, seed=oracle_seed)
    c = init_campaign(
        FactorSchema.plain_bits(n),
        fit_config=kw.pop("fit_config", FAST_FIT),
        sa_config=kw.pop("sa_config", FAST_SA),
        aug_config=kw.pop("aug_config", None),
        random_count=seeds,
        oracle=oracle,
        rng_seed=rng_seed,
        id=kw.pop("id", "test"),
        **kw,
    )
    return c, oracle


# -- init ------------------------------------------------------------------------


def test_init_with_explicit_observations():
    obs = [(format(v, "05b"), 7000.0 + v) for v in range(18)]
    c = init_campaign(FactorSchema.plain_bits(5), seed_observations=obs)
    assert len(c.dataset.real()) == 18
    assert c.iteration == 1
    assert c.state == "ready"
    assert c.best == ("10001", 7017.0)


def test_init_with_single_observation():
    c = init_campaign(FactorSchema.plain_bits(3),
                      seed_observations=[("010", 42.0)])
    assert c.best == ("010", 42.0)


def test_init_random_count_is_reproducible():
    a, _ = fresh(rng_seed=7)
    b, _ = fresh(rng_seed=7)
    assert a.dataset.observations == b.dataset.observations
    c, _ = fresh(rng_seed=8)
    assert c.dataset.observations != a.dataset.observations


def test_init_requires_seed_data():
    with pytest.raises(NoSeedData):
        init_campaign(FactorSchema.plain_bits(3))
    with pytest.raises(NoSeedData):
        init_campaign(FactorSchema.plain_bits(3), random_count=5)  # no oracle


def test_init_rejects_wrong_length_bits():
    with pytest.raises(LengthMismatch):
        init_campaign(FactorSchema.plain_bits(3), seed_observations=[("01", 1.0)])


def test_init_allows_duplicate_bits_with_warning(caplog):
    with caplog.at_level("WARNING"):
        c = init_campaign(FactorSchema.plain_bits(3),
                          seed_observations=[("010", 1.0), ("010", 2.0)])
    assert len(c.dataset.real()) == 2
    assert any("duplicate" in r.message for r in caplog.records)


# -- suggest / record ---------------------------------------------------------------


def test_suggest_returns_untested_bits_and_estimate():
    c, _ = fresh()
    bits, estimate, source = c.suggest_next()
    assert bits not in {o.bits for o in c.dataset}
    assert source == "qubo"
    assert np.isfinite(estimate)
    assert c.state == "awaiting_result"
    assert c.pending.bits == bits


def test_suggest_twice_without_recording_is_wrong_state():
    c, _ = fresh()
    c.suggest_next()
    with pytest.raises(WrongState):
        c.suggest_next()


def test_record_improving_increments_iteration():
    c, _ = fresh()
    before_best = c.best[1]
    bits, _, _ = c.suggest_next()
    c.record_result(bits, before_best + 100.0)
    assert c.iteration == 2
    assert c.best == (bits, before_best + 100.0)
    assert c.state == "ready"
    assert c.log[-1].improving


def test_record_below_best_keeps_iteration():
    c, _ = fresh()
    best = c.best
    bits, _, _ = c.suggest_next()
    c.record_result(bits, best[1] - 1.0)
    assert c.iteration == 1
    assert c.best == best
    assert len(c.dataset.real()) == 7  # observation still stored
    assert not c.log[-1].improving


def test_record_tie_does_not_increment():
    c, _ = fresh()
    best = c.best
    bits, _, _ = c.suggest_next()
    c.record_result(bits, best[1])  # strict improvement required
    assert c.iteration == 1
    assert c.best == best


def test_record_without_pending_is_wrong_state():
    c, _ = fresh()
    with pytest.raises(WrongState):
        c.record_result("00000000", 1.0)


def test_record_mismatched_bits():
    c, _ = fresh()
    bits, _, _ = c.suggest_next()
    other = "".join("1" if ch == "0" else "0" for ch in bits)
    with pytest.raises(BitsMismatch):
        c.record_result(other, 1.0)


def test_record_out_of_band_keeps_pending():
    c, _ = fresh()
    bits, _, _ = c.suggest_next()
    other = "".join("1" if ch == "0" else "0" for ch in bits)
    c.record_result(other, 99999.0, out_of_band=True)
    assert c.state == "awaiting_result"       # pending untouched
    assert c.log[-1].source == "manual"
    assert c.best == (other, 99999.0)         # improvement still counts
    c.record_result(bits, 1.0)
    assert c.state == "ready"


def test_record_rejects_non_finite():
    c, _ = fresh()
    bits, _, _ = c.suggest_next()
    with pytest.raises(NonFiniteAin):
        c.record_result(bits, float("nan"))


def test_log_entry_pairs_estimate_with_measurement():
    c, _ = fresh()
    bits, estimate, _ = c.suggest_next()
    c.record_result(bits, 8867.0)
    entry = c.log[-1]
    assert entry.suggested_bits == bits
    assert entry.estimated_ain == pytest.approx(estimate)
    assert entry.real_ain == 8867.0
    assert entry.mse_pct is not None and entry.cae_pct is not None
    assert entry.experiment_count == 7


# -- fallback and termination ----------------------------------------------------------


def test_neighbor_fallback_when_solver_exhausted(monkeypatch):
    c, _ = fresh()

    def exhausted_solve(model, config):
        raise Exhausted("forced")

    monkeypatch.setattr(campaign_mod, "solve", exhausted_solve)
    bits, estimate, source = c.suggest_next()
    assert source == "neighbor"
    assert hamming(bits, c.best[0]) == 1
    assert bits not in c.dataset.bit_strings("real")
    # ascending flip order: it is the first untested neighbor
    tested = c.dataset.bit_strings("real")
    first = next(nb for nb in neighbors(c.best[0], 1) if nb not in tested)
    assert bits == first


def test_terminates_when_space_fully_tested():
    schema = FactorSchema.plain_bits(2)
    obs = [(format(v, "02b"), float(v)) for v in range(4)]
    c = init_campaign(schema, fit_config=FAST_FIT, sa_config=FAST_SA,
                      seed_observations=obs)
    with pytest.raises(Terminated):
        c.suggest_next()
    assert c.state == "terminated"
    with pytest.raises(Terminated):
        c.suggest_next()


def test_full_run_terminates_with_exhausted_neighborhood():
    for seed in range(3):
        c, oracle = fresh(n=4, seeds=3, rng_seed=seed, oracle_seed=seed + 10,
                          sa_config=SaConfig(sweeps=40, restarts=3, seed=0))
        run_simulated(c, oracle, budget=10_000)
        assert c.state == "terminated"
        tested = c.dataset.bit_strings("real")
        assert all(nb in tested for nb in neighbors(c.best[0], 1))
        assert all(o.ain <= c.best[1] for o in c.dataset.real())


# -- run_simulated ---------------------------------------------------------------------


def test_budget_zero_leaves_campaign_unchanged():
    c, oracle = fresh()
    before = save(c)
    run_simulated(c, oracle, budget=0)
    assert save(c) == before


def test_simulated_campaign_usually_finds_hidden_optimum():
    hits = 0
    runs = 20
    for seed in range(runs):
        oracle = make_oracle("hidden_qubo", 10, seed=seed)
        c = init_campaign(
            FactorSchema.plain_bits(10),
            fit_config=FAST_FIT,
            sa_config=SaConfig(sweeps=100, restarts=4, seed=0),
            random_count=10, oracle=oracle, rng_seed=seed, id=f"run{seed}",
        )
        run_simulated(c, oracle, budget=100)
        if c.best[0] == oracle.hidden_optimum[0]:
            hits += 1
    assert hits >= 16  # >= 80% of seeded runs


def test_best_so_far_is_nondecreasing_and_iteration_counts_improvements():
    c, oracle = fresh(n=8, seeds=5)
    run_simulated(c, oracle, budget=30)
    bests = [e.best_ain for e in c.log]
    assert bests == sorted(bests)
    assert c.iteration == 1 + sum(1 for e in c.log if e.improving)
    suggested = [e.suggested_bits for e in c.log if e.source != "manual"]
    assert len(set(suggested)) == len(suggested)  # never re-suggests tested bits


# -- persistence -------------------------------------------------------------------


def test_save_load_roundtrip():
    c, oracle = fresh()
    run_simulated(c, oracle, budget=5)
    again = load(save(c))
    assert save(again) == save(c)
    assert again.best == c.best
    assert again.log[-1].to_dict() == c.log[-1].to_dict()


def test_save_load_midrun_reproduces_next_suggestion():
    c, oracle = fresh(rng_seed=3)
    run_simulated(c, oracle, budget=4)
    snapshot = save(c)
    expected = c.suggest_next()
    resumed = load(snapshot)
    assert resumed.suggest_next() == expected


def test_roundtrip_empty_log():
    c, _ = fresh()
    assert load(save(c)).log == []


def test_load_errors():
    with pytest.raises(ParseError):
        load("{truncated")
    with pytest.raises(ParseError):
        load('{"no": "version"}')
    c, _ = fresh()
    text = save(c).replace('"version": 1', '"version": 9')
    with pytest.raises(VersionMismatch):
        load(text)


def test_export_csv_layout():
    c, oracle = fresh()
    run_simulated(c, oracle, budget=3)
    lines = c.export_log_csv().splitlines()
    assert lines[0] == ("Iteration,Number of Experiments,Best_solution,"
                        "Real AIN,Estimate AIN,MSE(%),Contour-Aware MSE(%)")
    assert len(lines) == 4


def test_campaign_augmentation_is_transient():
    c, oracle = fresh()
    bits, _, _ = c.suggest_next()
    c.record_result(bits, oracle(bits))
    assert all(o.kind == "real" for o in c.dataset)


def test_oracle_basics():
    oracle = make_oracle("hidden_qubo", 6, seed=2)
    probes = [format(v, "06b") for v in range(20)]
    again = make_oracle("hidden_qubo", 6, seed=2)
    assert [oracle(p) for p in probes] == [again(p) for p in probes]

    noisy = make_oracle("noisy", 6, seed=2, noise_std=5.0)
    assert noisy("000111") != noisy("000111")
    quiet = make_oracle("noisy", 6, seed=2, noise_std=0.0)
    assert quiet("000111") == quiet("000111")

    cubic = make_oracle("qubo_plus_cubic", 6, seed=2)
    base = make_oracle("hidden_qubo", 6, seed=2)
    assert any(cubic(p) != base(p) for p in probes)
