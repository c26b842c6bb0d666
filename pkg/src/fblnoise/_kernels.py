"""Compiled inner loop of the photon-lifetime simulator.

The kernel consumes pre-drawn random numbers and can stop part-way
through a step when a buffer runs dry; all loop variables live in
``state`` so the caller can refill and resume.
"""
import numpy as np
from numba import njit

# indices into the float64 state vector
K, T, LAM_REM, I_HAT, CLIPPED, RATE, U_SUM, N_REC, N_PUMP = range(9)
STATE_SIZE = 9


@njit(cache=True)
def advance(counts, state, lifetimes, intervals, accept, rec, kappa, R0, lam, wf, eta, dt, t_total):
    """Run until the horizon or until a buffer is exhausted.

    Returns the number of random draws consumed from ``lifetimes`` and
    ``intervals`` (and ``accept`` when detection is lossy).
    """
    n_bins = counts.shape[0]
    k = int(state[K])
    t = state[T]
    lam_rem = state[LAM_REM]
    ihat = state[I_HAT]
    clipped = state[CLIPPED]
    R = state[RATE]
    usum = state[U_SUM]
    n_rec = int(state[N_REC])
    n_pump = state[N_PUMP]

    i_ref = eta * R0
    decay = np.exp(-wf * dt)
    inv_dt = 1.0 / dt
    inv_kappa = 1.0 / kappa
    lossy = eta < 1.0
    record = rec.shape[0] > 0
    nbuf = lifetimes.shape[0]
    j = 0
    stop = False

    while k < n_bins:
        tend = (k + 1) * dt
        if R > 0.0:
            while True:
                tp = t + lam_rem / R
                if tp >= tend:
                    lam_rem -= R * (tend - t)
                    break
                if j >= nbuf or (record and n_rec >= rec.shape[0]):
                    stop = True
                    break
                t = tp
                life = lifetimes[j] * inv_kappa
                td = t + life
                usum += min(life, t_total - t)
                n_pump += 1.0
                if (not lossy) or accept[j] < eta:
                    b = int(td * inv_dt)
                    if b < n_bins:
                        counts[b] += 1
                        if record:
                            rec[n_rec] = td
                            n_rec += 1
                lam_rem = intervals[j]
                j += 1
        if stop:
            break
        t = tend
        # bin k is complete: every photon created before tend has been placed
        ihat = ihat * decay + (1.0 - decay) * counts[k] * inv_dt
        k += 1
        R = R0
        if lam > 0.0:
            R = R0 * (1.0 - lam * (ihat - i_ref) / i_ref)
            if R <= 0.0:
                R = 0.0
                if k < n_bins:
                    clipped += 1.0

    state[K] = k
    state[T] = t
    state[LAM_REM] = lam_rem
    state[I_HAT] = ihat
    state[CLIPPED] = clipped
    state[RATE] = R
    state[U_SUM] = usum
    state[N_REC] = n_rec
    state[N_PUMP] = n_pump
    return j
