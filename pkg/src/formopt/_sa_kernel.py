"""Compiled inner loop for restart simulated annealing.

All randomness is pre-drawn outside (per-restart generators), so the kernel
is a pure deterministic function of its inputs and the result cannot depend
on scheduling. Excluded states are recognized inside the loop via Zobrist
hashes (XOR of per-bit keys); the caller re-checks candidates exactly, so a
hash collision can at worst hide a candidate, never emit a wrong one.
"""

from __future__ import annotations

import numba as nb
import numpy as np


@nb.njit(cache=True)
def run_chains(coupling, linear, constant, init_states, bit_idx, log_unif, temps,
               zobrist, excl_hashes):
    """Run all restart chains; energies are the value being maximized.

    coupling: (n, n) symmetric, zero diagonal. linear: (n,).
    init_states: (R, n) uint8. bit_idx: (R, S) proposal bit per step.
    log_unif: (R, S) log of acceptance uniforms. temps: (S,) per-step
    temperature. zobrist: (n,) uint64 keys. excl_hashes: sorted uint64.

    Returns per-restart best non-excluded visited state/energy/found flag,
    plus visit statistics (count, sum, sum of squares, best energy overall).
    """
    R, n = init_states.shape
    S = bit_idx.shape[1]
    m_excl = excl_hashes.shape[0]

    best_states = np.zeros((R, n), dtype=np.uint8)
    best_energies = np.full(R, -np.inf)
    found = np.zeros(R, dtype=np.bool_)

    stat_count = 0.0
    stat_sum = 0.0
    stat_sumsq = 0.0
    stat_best = -np.inf

    for r in range(R):
        x = init_states[r].astype(np.float64)
        h = np.uint64(0)
        for i in range(n):
            if x[i] > 0.5:
                h ^= zobrist[i]
        e = constant
        for i in range(n):
            if x[i] > 0.5:
                e += linear[i]
                for j in range(i + 1, n):
                    if x[j] > 0.5:
                        e += coupling[i, j]

        for t in range(-1, S):  # t == -1 visits the initial state
            if t >= 0:
                k = bit_idx[r, t]
                s = 1.0 - 2.0 * x[k]
                dot = 0.0
                for i in range(n):
                    dot += coupling[k, i] * x[i]
                de = s * (linear[k] + dot)
                if de > temps[t] * log_unif[r, t]:
                    x[k] = 1.0 - x[k]
                    e += de
                    h ^= zobrist[k]

            stat_count += 1.0
            stat_sum += e
            stat_sumsq += e * e
            if e > stat_best:
                stat_best = e

            if e > best_energies[r]:
                excluded = False
                if m_excl > 0:
                    pos = np.searchsorted(excl_hashes, h)
                    if pos < m_excl and excl_hashes[pos] == h:
                        excluded = True
                if not excluded:
                    best_energies[r] = e
                    found[r] = True
                    for i in range(n):
                        best_states[r, i] = np.uint8(x[i] > 0.5)

    return (best_states, best_energies, found,
            stat_count, stat_sum, stat_sumsq, stat_best)
