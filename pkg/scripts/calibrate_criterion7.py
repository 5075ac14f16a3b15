"""Pilot for the contour-aware vs mse campaign comparison (n=22 closed loop).

Runs a few seeded pairs with the candidate test configuration and prints the
per-run relative error at the best-found formulation plus the best values,
so the acceptance test's configuration can be frozen with evidence.
"""

import sys
import time

from formopt.annealer import SaConfig
from formopt.campaign import init_campaign, run_simulated
from formopt.encoding import FactorSchema
from formopt.fitting import FitConfig
from formopt.oracles import make_oracle

N = 22
BUDGET = int(sys.argv[1]) if len(sys.argv) > 1 else 200
RUNS = int(sys.argv[2]) if len(sys.argv) > 2 else 6

SA = SaConfig(sweeps=120, restarts=5, seed=0)
FIT = dict(strategy="coarse_fine", max_iterations=250, gradient_tolerance=1e-6)


def run_one(seed, cost):
    oracle = make_oracle("qubo_plus_cubic", N, seed=seed)
    c = init_campaign(
        FactorSchema.plain_bits(N),
        fit_config=FitConfig(cost=cost, **FIT),
        sa_config=SA,
        random_count=18,
        oracle=oracle,
        rng_seed=seed,
        id=f"{cost}-{seed}",
    )
    run_simulated(c, oracle, BUDGET)
    improving = [e for e in c.log if e.improving]
    last = improving[-1] if improving else None
    rel_err = (abs(last.estimated_ain - last.real_ain) / c.best[1]
               if last else float("nan"))
    return rel_err, c.best[1]


t0 = time.time()
wins = 0
best_ge = 0
pairs = []
for seed in range(RUNS):
    e_c, b_c = run_one(seed, "contour_aware")
    e_m, b_m = run_one(seed, "mse")
    wins += e_c < e_m
    best_ge += b_c >= b_m
    pairs.append((e_c, e_m, b_c, b_m))
    print(f"seed {seed}: rel_err contour {e_c:.5f} vs mse {e_m:.5f} | "
          f"best contour {b_c:.1f} vs mse {b_m:.1f}", flush=True)

cb = sorted(p[2] for p in pairs)
mb = sorted(p[3] for p in pairs)
print(f"\nwins (smaller rel err): {wins}/{RUNS}")
print(f"best >= mse: {best_ge}/{RUNS}")
print(f"median best: contour {cb[len(cb)//2]:.1f} vs mse {mb[len(mb)//2]:.1f}")
print(f"elapsed {time.time()-t0:.1f}s for {RUNS} pairs (budget {BUDGET})")
