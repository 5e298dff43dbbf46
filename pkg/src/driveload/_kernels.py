"""Tight sequential loops behind the stream estimator, EM, and Viterbi.

Everything here is written in plain loop form so numba can compile it; when
numba is missing the same functions run as ordinary Python (slow but exact).
The stream kernel mirrors the public step operation order exactly: resolve
forgetting weights, retrospective kernel from the pre-update state, filter
update with the new observation, pairwise-count update, M-step (after
burn-in), stationary vector, event accumulation.
"""

import numpy as np

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]

        def wrap(f):
            return f

        return wrap

# policy codes used by the stream kernel
POLICY_DECAYING = 0
POLICY_FIXED = 1
POLICY_PER_STATE = 2

# counter slots
C_DEGENERATE_OBS = 0
C_DEAD_KERNEL_COL = 1
C_STATIONARY_FALLBACK = 2
C_DEAD_MSTEP_ROW = 3
N_COUNTERS = 4

GAMMA_FLOOR = 1e-6


@njit(cache=True)
def _stationary_inplace(Q, pi, fallback):
    """Stationary row vector of Q via the adjugate closed form (m = 3),
    general elimination otherwise.  On degeneracy keeps ``fallback``.
    Returns 0 on success, 1 when the fallback was used."""
    m = Q.shape[0]
    if m == 3:
        a0 = Q[0, 0] - 1.0
        a1 = Q[1, 0]
        a2 = Q[2, 0]
        b0 = Q[0, 1]
        b1 = Q[1, 1] - 1.0
        b2 = Q[2, 1]
        c0 = a1 * b2 - a2 * b1
        c1 = a2 * b0 - a0 * b2
        c2 = a0 * b1 - a1 * b0
        s = c0 + c1 + c2
        if s != 0.0 and c0 / s >= -1e-12 and c1 / s >= -1e-12 and c2 / s >= -1e-12:
            p0 = c0 / s
            p1 = c1 / s
            p2 = c2 / s
            if p0 < 0.0:
                p0 = 0.0
            if p1 < 0.0:
                p1 = 0.0
            if p2 < 0.0:
                p2 = 0.0
            t = p0 + p1 + p2
            pi[0] = p0 / t
            pi[1] = p1 / t
            pi[2] = p2 / t
            return 0
        for i in range(m):
            pi[i] = fallback[i]
        return 1
    # general m: solve pi (Q - I) = 0 with sum constraint by Gaussian
    # elimination on A = (Q - I)^T with the last row replaced by ones
    A = np.empty((m, m))
    b = np.zeros(m)
    x = np.empty(m)
    for i in range(m):
        for j in range(m):
            A[i, j] = Q[j, i] - (1.0 if i == j else 0.0)
    for j in range(m):
        A[m - 1, j] = 1.0
    b[m - 1] = 1.0
    for col in range(m):
        piv = col
        big = abs(A[col, col])
        for r in range(col + 1, m):
            if abs(A[r, col]) > big:
                big = abs(A[r, col])
                piv = r
        if big < 1e-300:
            for i in range(m):
                pi[i] = fallback[i]
            return 1
        if piv != col:
            for j in range(m):
                tmp = A[col, j]
                A[col, j] = A[piv, j]
                A[piv, j] = tmp
            tmp = b[col]
            b[col] = b[piv]
            b[piv] = tmp
        for r in range(col + 1, m):
            f = A[r, col] / A[col, col]
            for j in range(col, m):
                A[r, j] -= f * A[col, j]
            b[r] -= f * b[col]
    for i in range(m - 1, -1, -1):
        acc = b[i]
        for j in range(i + 1, m):
            acc -= A[i, j] * x[j]
        x[i] = acc / A[i, i]
    s = 0.0
    for i in range(m):
        if x[i] < -1e-9:
            for j in range(m):
                pi[j] = fallback[j]
            return 1
        if x[i] < 0.0:
            x[i] = 0.0
        s += x[i]
    for i in range(m):
        pi[i] = x[i] / s
    return 0


@njit(cache=True)
def stream_kernel(
    logdens,
    Q,
    phi,
    rho,
    eta,
    pi_bar,
    pi_cur,
    t0,
    burn_in,
    policy_kind,
    gamma_base,
    alpha,
    track_events,
    diag_out,
    eta_out,
    counters,
):
    """Advance the online estimator over a block of observations.

    ``logdens`` is (T, m); all state arrays are updated in place.  ``t0`` is
    the number of observations already absorbed; observation t of the block
    is step t0 + t + 1 (1-based).  ``diag_out``/``eta_out`` (T, m) receive
    the post-step transition diagonal and cumulative expected entries.
    """
    T, m = logdens.shape
    R = np.empty((m, m))
    pred = np.empty(m)
    rho_new = np.empty((m, m, m))
    S = np.empty((m, m))
    gamma_vec = np.empty(m)

    for t in range(T):
        step = t0 + t + 1

        # forgetting weights for this step
        if policy_kind == POLICY_DECAYING:
            g = step ** (-alpha)
            for j in range(m):
                gamma_vec[j] = g
            w_bar = g
        elif policy_kind == POLICY_FIXED:
            for j in range(m):
                gamma_vec[j] = gamma_base
            w_bar = gamma_base
        else:
            for j in range(m):
                gj = gamma_base * pi_bar[j]
                if gj < GAMMA_FLOOR:
                    gj = GAMMA_FLOOR
                elif gj > 1.0:
                    gj = 1.0
                gamma_vec[j] = gj
            w_bar = gamma_base

        # retrospective kernel r(k'|k) from the pre-update filter state
        for k in range(m):
            s = 0.0
            for kp in range(m):
                R[kp, k] = phi[kp] * Q[kp, k]
                s += R[kp, k]
            if s > 0.0:
                for kp in range(m):
                    R[kp, k] /= s
            else:
                counters[C_DEAD_KERNEL_COL] += 1
                for kp in range(m):
                    R[kp, k] = 1.0 / m

        # filter update with the new observation
        mx = -np.inf
        for k in range(m):
            if logdens[t, k] > mx:
                mx = logdens[t, k]
        for k in range(m):
            acc = 0.0
            for j in range(m):
                acc += phi[j] * Q[j, k]
            pred[k] = acc
        if mx == -np.inf:
            counters[C_DEGENERATE_OBS] += 1
            for k in range(m):
                phi[k] = 1.0 / m
        elif mx == np.inf:
            s = 0.0
            for k in range(m):
                pred[k] = pred[k] if logdens[t, k] == np.inf else 0.0
                s += pred[k]
            for k in range(m):
                phi[k] = pred[k] / s
        else:
            s = 0.0
            for k in range(m):
                pred[k] *= np.exp(logdens[t, k] - mx)
                s += pred[k]
            if s > 0.0:
                for k in range(m):
                    phi[k] = pred[k] / s
            else:
                counters[C_DEGENERATE_OBS] += 1
                for k in range(m):
                    phi[k] = 1.0 / m

        # pairwise-count tensor update
        for i in range(m):
            for j in range(m):
                g = gamma_vec[j]
                for k in range(m):
                    acc = 0.0
                    for kp in range(m):
                        acc += rho[i, j, kp] * R[kp, k]
                    val = (1.0 - g) * acc
                    if j == k:
                        val += g * R[i, j]
                    rho_new[i, j, k] = val
        for i in range(m):
            for j in range(m):
                for k in range(m):
                    rho[i, j, k] = rho_new[i, j, k]

        # M-step once past burn-in; rows with no mass keep their old values
        if step > burn_in:
            for i in range(m):
                rs = 0.0
                for j in range(m):
                    acc = 0.0
                    for k in range(m):
                        acc += phi[k] * rho[i, j, k]
                    S[i, j] = acc
                    rs += acc
                if rs > 0.0:
                    for j in range(m):
                        Q[i, j] = S[i, j] / rs
                else:
                    counters[C_DEAD_MSTEP_ROW] += 1

        if track_events != 0:
            counters[C_STATIONARY_FALLBACK] += _stationary_inplace(
                Q, pi_cur, pi_cur
            )
            for i in range(m):
                acc = 0.0
                for j in range(m):
                    if j != i:
                        acc += pi_cur[j] * Q[j, i]
                eta[i] += acc
            for i in range(m):
                pi_bar[i] = (1.0 - w_bar) * pi_bar[i] + w_bar * pi_cur[i]

        for i in range(m):
            diag_out[t, i] = Q[i, i]
            eta_out[t, i] = eta[i]


@njit(cache=True)
def forward_loglik_kernel(logdens, Q, pi0):
    """Log likelihood by the scaled forward recursion (compensated sum).

    The first row is weighted against ``pi0`` directly; each later row is
    preceded by one transition through Q."""
    T, m = logdens.shape
    phi = np.empty(m)
    pred = np.empty(m)
    total = 0.0
    comp = 0.0
    for t in range(T):
        mx = -np.inf
        for k in range(m):
            if logdens[t, k] > mx:
                mx = logdens[t, k]
        if mx == -np.inf:
            return -np.inf
        for k in range(m):
            if t == 0:
                pred[k] = pi0[k]
            else:
                acc = 0.0
                for j in range(m):
                    acc += phi[j] * Q[j, k]
                pred[k] = acc
        s = 0.0
        for k in range(m):
            pred[k] *= np.exp(logdens[t, k] - mx)
            s += pred[k]
        if s <= 0.0:
            return -np.inf
        for k in range(m):
            phi[k] = pred[k] / s
        term = np.log(s) + mx
        y = term - comp
        t2 = total + y
        comp = (t2 - total) - y
        total = t2
    return total


@njit(cache=True)
def viterbi_kernel(logdens, Q, pi0):
    """Most probable state path; ties resolve to the lower state index."""
    T, m = logdens.shape
    logQ = np.empty((m, m))
    for i in range(m):
        for j in range(m):
            q = Q[i, j]
            logQ[i, j] = np.log(q) if q > 0.0 else -np.inf
    score = np.empty(m)
    prev = np.empty(m)
    back = np.empty((T, m), dtype=np.int64)
    for k in range(m):
        p = pi0[k]
        score[k] = (np.log(p) if p > 0.0 else -np.inf) + logdens[0, k]
        back[0, k] = 0
    for t in range(1, T):
        for k in range(m):
            prev[k] = score[k]
        for k in range(m):
            best = -np.inf
            arg = 0
            for j in range(m):
                v = prev[j] + logQ[j, k]
                if v > best:
                    best = v
                    arg = j
            score[k] = best + logdens[t, k]
            back[t, k] = arg
    best = -np.inf
    arg = 0
    for k in range(m):
        if score[k] > best:
            best = score[k]
            arg = k
    path = np.empty(T, dtype=np.int64)
    path[T - 1] = arg
    for t in range(T - 2, -1, -1):
        path[t] = back[t + 1, path[t + 1]]
    return path


@njit(cache=True)
def chain_kernel(cum_rows, start_state, u):
    """Sample a state path from per-row cumulative transition probabilities."""
    n = u.shape[0]
    path = np.empty(n, dtype=np.int64)
    m = cum_rows.shape[1]
    s = start_state
    for t in range(n):
        r = u[t]
        row = cum_rows[s]
        k = 0
        while k < m - 1 and r > row[k]:
            k += 1
        s = k
        path[t] = s
    return path
