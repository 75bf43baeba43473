# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled twin of kernels.fallback.run_snowflake_tally.

Draws the same Binomial tallies through numpy's C distribution API in the
same order the vectorized numpy code does, so results are byte-identical
for the same generator state.
"""

import numpy as np

cimport numpy as cnp
from cpython.pycapsule cimport PyCapsule_GetPointer
from numpy.random cimport bitgen_t
from numpy.random.c_distributions cimport random_binomial, binomial_t

cnp.import_array()

ADVERSARIES = ("none", "crash", "split", "opposite")

cdef int ADV_NONE = 0, ADV_CRASH = 1, ADV_SPLIT = 2, ADV_OPPOSITE = 3


def run_snowflake_tally(gen, long n, long f, long k, long alpha1,
                        a2s, betas, long max_rounds, init_vals, adversary):
    """See kernels.fallback.run_snowflake_tally; identical contract."""
    if adversary not in ADVERSARIES:
        raise ValueError(f"unknown adversary {adversary!r}")
    cdef int adv = ADVERSARIES.index(adversary)

    capsule = gen.bit_generator.capsule
    cdef bitgen_t *rng = <bitgen_t *> PyCapsule_GetPointer(capsule, "BitGenerator")
    cdef binomial_t binom
    binom.has_binomial = 0

    cdef cnp.int64_t[::1] a2v = np.ascontiguousarray(a2s, dtype=np.int64)
    cdef cnp.int64_t[::1] bev = np.ascontiguousarray(betas, dtype=np.int64)
    cdef long nrules = a2v.shape[0]
    cdef long u_all = n - f
    if len(init_vals) != u_all:
        raise ValueError("need one initial value per correct processor")

    vals_arr = np.asarray(init_vals, dtype=np.int8).copy()
    counts_arr = np.zeros((u_all, nrules), dtype=np.int64)
    decided_round_arr = np.full(u_all, -1, dtype=np.int64)
    decided_val_arr = np.full(u_all, -1, dtype=np.int8)
    ones_history = []

    cdef cnp.int8_t[::1] vals = vals_arr
    cdef cnp.int64_t[:, ::1] counts = counts_arr
    cdef cnp.int64_t[::1] decided_round = decided_round_arr
    cdef cnp.int8_t[::1] decided_val = decided_val_arr

    active_arr = np.arange(u_all, dtype=np.int64)
    b_arr = np.zeros(u_all, dtype=np.int64)
    cdef cnp.int64_t[::1] active = active_arr
    cdef cnp.int64_t[::1] b = b_arr

    cdef double pf = <double> f / n
    cdef double pm
    cdef long rounds_run = 0
    cdef long t, i, j, u, m, idx, v, c, ones_c
    cdef long byz_ones, byz_zeros, ones_t, zeros_t, opp, match
    cdef bint decided, minority_one

    for t in range(1, max_rounds + 1):
        u = 0
        for i in range(u_all):
            if decided_round[i] < 0:
                active[u] = i
                u += 1
        if u == 0:
            break
        rounds_run = t
        m = 0
        for i in range(u_all):
            m += vals[i]
        ones_history.append(m)
        minority_one = 2 * m <= u_all
        pm = <double> m / u_all

        if f > 0:
            for i in range(u):
                b[i] = <long> random_binomial(rng, pf, k, &binom)
        else:
            for i in range(u):
                b[i] = 0

        for i in range(u):
            idx = active[i]
            c = k - b[i]
            if m == 0:
                ones_c = 0
            elif m == u_all:
                ones_c = c
            else:
                ones_c = <long> random_binomial(rng, pm, c, &binom)

            v = vals[idx]
            if adv == ADV_SPLIT:
                byz_ones = b[i] if minority_one else 0
                byz_zeros = b[i] - byz_ones
            elif adv == ADV_OPPOSITE:
                byz_ones = b[i] if v == 0 else 0
                byz_zeros = b[i] - byz_ones
            else:
                byz_ones = 0
                byz_zeros = 0

            ones_t = ones_c + byz_ones
            zeros_t = c - ones_c + byz_zeros

            opp = zeros_t if v == 1 else ones_t
            if opp >= alpha1:
                v = 1 - v
                for j in range(nrules):
                    counts[idx, j] = 0
            match = ones_t if v == 1 else zeros_t

            decided = 0
            for j in range(nrules):
                if match >= a2v[j]:
                    counts[idx, j] += 1
                else:
                    counts[idx, j] = 0
                if counts[idx, j] >= bev[j]:
                    decided = 1
            vals[idx] = <cnp.int8_t> v
            if decided:
                decided_round[idx] = t
                decided_val[idx] = <cnp.int8_t> v

    return {
        "decided_round": decided_round_arr,
        "decided_val": decided_val_arr,
        "vals": vals_arr,
        "ones_history": np.asarray(ones_history, dtype=np.int64),
        "rounds_run": rounds_run,
    }
