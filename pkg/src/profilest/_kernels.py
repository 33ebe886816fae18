"""Hot loops.

Each kernel is written once as plain python (suffix ``_py``), which numba
compiles; the public names at the bottom of the module are bound to the
compiled versions or, under ``PROFILEST_BACKEND=numpy``, to the python
sources plus a vectorized numpy DP.  Kernels call each other only through
the public names so that both backends stay internally consistent.

State space of the profile DP: symbols are grouped into multiplicity
classes ``c`` (ascending multiplicity, so the singleton class is ``c = 0``
when present).  A state counts the symbols of each class not yet mapped to
an atom, mixed-radix encoded with ``strides``; ``counts[s, c]`` decodes it.
Kernels never draw random numbers: callers pass pre-drawn uniforms so both
backends consume identical streams.
"""

import math

import numpy as np

from . import _backend

NEG_INF = -np.inf


# ---------------------------------------------------------------------------
# profile DP


def _dp_forward_py(atoms, mus, counts, strides, init):
    """Absorb atoms one by one into the state vector.

    Each atom is either unused or mapped to one still-unmapped symbol of some
    class ``c``, contributing ``r_c * p**mu_c``.  Returns the final vector and
    the log of the scale factor divided out along the way.
    """
    n_states = init.shape[0]
    n_classes = mus.shape[0]
    dp = init.copy()
    log_scale = 0.0
    pw = np.empty(n_classes)
    for a in range(atoms.shape[0]):
        p = atoms[a]
        if p <= 0.0:
            continue
        for c in range(n_classes):
            pw[c] = p ** mus[c]
        # ascending order: writes go to lower states, which were already read
        for s in range(n_states):
            v = dp[s]
            if v == 0.0:
                continue
            for c in range(n_classes):
                r = counts[s, c]
                if r > 0:
                    dp[s - strides[c]] += v * r * pw[c]
        mx = 0.0
        for s in range(n_states):
            if dp[s] > mx:
                mx = dp[s]
        if mx == 0.0:
            return dp, NEG_INF
        for s in range(n_states):
            dp[s] /= mx
        log_scale += math.log(mx)
    return dp, log_scale


def _dp_forward_numpy(atoms, mus, counts, strides, init):
    """Vectorized twin of ``_dp_forward_py``: one array update per class per atom."""
    trans = []
    for c in range(counts.shape[1]):
        src = np.nonzero(counts[:, c] > 0)[0]
        trans.append((src, src - strides[c], counts[src, c].astype(np.float64), mus[c]))
    dp = init.astype(np.float64, copy=True)
    log_scale = 0.0
    for p in atoms:
        if p <= 0.0:
            continue
        new = dp.copy()
        for src, dst, mult, mu in trans:
            new[dst] += dp[src] * mult * (p**mu)
        mx = new.max()
        if mx == 0.0:
            return new, NEG_INF
        dp = new / mx
        log_scale += math.log(mx)
    return dp, log_scale


def _terminal_py(dp, q, phi1):
    """Leftover singletons (``phi1 > 0`` only when a singleton class exists) go to ``q``."""
    total = 0.0
    qp = 1.0
    for r in range(phi1 + 1):
        total += dp[r] * qp
        qp *= q
    return total


def _terminal_dq_py(dp, q, phi1):
    total = 0.0
    qp = 1.0
    for r in range(1, phi1 + 1):
        total += r * dp[r] * qp
        qp *= q
    return total


def _log_prob_py(atoms, q, mus, counts, strides, phi1):
    n_states = counts.shape[0]
    init = np.zeros(n_states)
    init[n_states - 1] = 1.0
    dp, ls = dp_forward(atoms, mus, counts, strides, init)
    if ls == NEG_INF:
        return NEG_INF
    t = terminal(dp, q, phi1)
    if t <= 0.0:
        return NEG_INF
    return math.log(t) + ls


def _log_prob_grad_py(atoms, q, mus, counts, strides, phi1, grad):
    """Fill ``grad`` (length k+1) with ``dP/dx / P`` for ``x = (atoms, q)``; return ``log P``.

    The partial w.r.t. atom ``j`` re-runs the DP without that atom, starting
    from the states one symbol short, weighted by ``phi_c mu_c p_j**(mu_c-1)``.
    """
    k = atoms.shape[0]
    n_states = counts.shape[0]
    n_classes = mus.shape[0]
    init = np.zeros(n_states)
    init[n_states - 1] = 1.0
    dp, ls = dp_forward(atoms, mus, counts, strides, init)
    t = terminal(dp, q, phi1) if ls != NEG_INF else 0.0
    if t <= 0.0:
        for j in range(k + 1):
            grad[j] = np.nan
        return NEG_INF
    log_p = math.log(t) + ls
    grad[k] = terminal_dq(dp, q, phi1) * math.exp(ls - log_p)
    rest = np.empty(max(k - 1, 0))
    full = n_states - 1
    for j in range(k):
        pj = atoms[j]
        done = False
        for i in range(j):
            if atoms[i] == pj:
                grad[j] = grad[i]
                done = True
                break
        if done:
            continue
        pos = 0
        for i in range(k):
            if i != j:
                rest[pos] = atoms[i]
                pos += 1
        start = np.zeros(n_states)
        for c in range(n_classes):
            mu = mus[c]
            phi = counts[full, c]
            start[full - strides[c]] = phi * mu * (pj ** (mu - 1) if mu > 1 else 1.0)
        dpj, lsj = dp_forward(rest, mus, counts, strides, start)
        v = terminal(dpj, q, phi1) if lsj != NEG_INF else 0.0
        grad[j] = v * math.exp(lsj - log_p) if v > 0.0 else 0.0
    return log_p


# ---------------------------------------------------------------------------
# projected ascent


def _project_py(y, cap, out):
    """Euclidean projection of ``y`` onto {x >= 0, x[-1] <= cap, sum(x) = 1}."""
    d = y.shape[0]
    lo = y[0]
    hi = y[0]
    for i in range(d):
        lo = min(lo, y[i])
        hi = max(hi, y[i])
    lo -= 1.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        total = 0.0
        for i in range(d):
            v = y[i] - mid
            if v < 0.0:
                v = 0.0
            if i == d - 1 and v > cap:
                v = cap
            total += v
        if total > 1.0:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-17:
            break
    tau = 0.5 * (lo + hi)
    # exact threshold from the active set found by bisection
    n_free = 0
    s = 0.0
    for i in range(d):
        v = y[i] - tau
        if i == d - 1 and v >= cap:
            s += cap
        elif v > 0.0:
            n_free += 1
            s += y[i]
    if n_free > 0:
        tau = (s - 1.0) / n_free
    for i in range(d):
        v = y[i] - tau
        if v < 0.0:
            v = 0.0
        if i == d - 1 and v > cap:
            v = cap
        out[i] = v


def _ascend_py(x, cap, max_iter, mus, counts, strides, phi1):
    """Projected gradient ascent on ``log P`` from ``x``, in place.

    Step sizes halve from 1.0 until the objective increases; stops when no
    step helps or after three consecutive gains below 1e-13.  Returns
    ``(log P, iterations, evaluations)``.
    """
    d = x.shape[0]
    k = d - 1
    g = np.empty(d)
    y = np.empty(d)
    trial = np.empty(d)
    f = log_prob_grad(x[:k], x[k], mus, counts, strides, phi1, g)
    evals = 1
    if f == NEG_INF:
        return f, 0, evals
    if cap == 0.0:
        g[k] = 0.0
    stall = 0
    it = 0
    while it < max_iter:
        it += 1
        t = 1.0
        moved = False
        fy = NEG_INF
        while t > 1e-18:
            for i in range(d):
                trial[i] = x[i] + t * g[i]
            project(trial, cap, y)
            fy = log_prob(y[:k], y[k], mus, counts, strides, phi1)
            evals += 1
            if fy > f:
                moved = True
                break
            t *= 0.5
        if not moved:
            break
        gain = fy - f
        for i in range(d):
            x[i] = y[i]
        f = log_prob_grad(x[:k], x[k], mus, counts, strides, phi1, g)
        evals += 1
        if cap == 0.0:
            g[k] = 0.0
        if gain < 1e-13:
            stall += 1
            if stall >= 3:
                break
        else:
            stall = 0
    return f, it, evals


# ---------------------------------------------------------------------------
# Metropolis chain over symbol -> slot assignments


def _mcmc_chain_py(log_atoms, log_q, mus, singles, assign, owner, uniforms,
                   burn_in, slot_acc, trace):
    """Run ``len(uniforms) // 4`` Metropolis steps in place.

    ``assign[j]`` is the atom of symbol ``j`` or -1 (continuous part);
    ``owner[s]`` is the symbol on atom ``s`` or -1.  After ``burn_in`` steps the
    observation count on each atom is integrated into ``slot_acc[:k]`` and the
    continuous count into ``slot_acc[k]``.  ``trace`` (length 0 to disable)
    receives a per-step code of the whole assignment.  Returns the number of
    accepted proposals.
    """
    m = assign.shape[0]
    k = owner.shape[0]
    n_single = singles.shape[0]
    steps = uniforms.shape[0] // 4
    cur = np.zeros(k + 1)
    n_free = k
    for j in range(m):
        if assign[j] >= 0:
            cur[assign[j]] += mus[j]
            n_free -= 1
        else:
            cur[k] += 1.0
    last = np.zeros(k + 1, dtype=np.int64)
    for s in range(k + 1):
        last[s] = burn_in
    accepted = 0
    for t in range(steps):
        u0 = uniforms[4 * t]
        u1 = uniforms[4 * t + 1]
        u2 = uniforms[4 * t + 2]
        u3 = uniforms[4 * t + 3]
        lu = math.log(u3) if u3 > 0.0 else NEG_INF
        if u0 < 0.5 or n_single == 0 or log_q == NEG_INF:
            # transposition: a symbol on an atom moves to another atom, swapping with its owner
            j = min(int(u1 * m), m - 1)
            a = assign[j]
            if a >= 0 and k > 1:
                s = min(int(u2 * (k - 1)), k - 2)
                if s >= a:
                    s += 1
                jj = owner[s]
                if jj < 0:
                    ratio = mus[j] * (log_atoms[s] - log_atoms[a])
                else:
                    ratio = (mus[j] - mus[jj]) * (log_atoms[s] - log_atoms[a])
                if lu < ratio:
                    accepted += 1
                    if t >= burn_in:
                        slot_acc[a] += cur[a] * (t - last[a])
                        last[a] = t
                        slot_acc[s] += cur[s] * (t - last[s])
                        last[s] = t
                    assign[j] = s
                    owner[s] = j
                    owner[a] = jj
                    cur[s] += mus[j]
                    cur[a] -= mus[j]
                    if jj >= 0:
                        assign[jj] = a
                        cur[a] += mus[jj]
                        cur[s] -= mus[jj]
        else:
            # a singleton hops between an atom and the continuous part
            j = singles[min(int(u1 * n_single), n_single - 1)]
            a = assign[j]
            if a >= 0:
                ratio = log_q - log_atoms[a] - math.log(n_free + 1)
                if lu < ratio:
                    accepted += 1
                    if t >= burn_in:
                        slot_acc[a] += cur[a] * (t - last[a])
                        last[a] = t
                        slot_acc[k] += cur[k] * (t - last[k])
                        last[k] = t
                    assign[j] = -1
                    owner[a] = -1
                    cur[a] -= 1.0
                    cur[k] += 1.0
                    n_free += 1
            elif n_free > 0:
                target = min(int(u2 * n_free), n_free - 1)
                s = -1
                seen = 0
                for slot in range(k):
                    if owner[slot] < 0:
                        if seen == target:
                            s = slot
                            break
                        seen += 1
                ratio = log_atoms[s] - log_q + math.log(n_free)
                if lu < ratio:
                    accepted += 1
                    if t >= burn_in:
                        slot_acc[s] += cur[s] * (t - last[s])
                        last[s] = t
                        slot_acc[k] += cur[k] * (t - last[k])
                        last[k] = t
                    assign[j] = s
                    owner[s] = j
                    cur[s] += 1.0
                    cur[k] -= 1.0
                    n_free -= 1
        if trace.shape[0] > 0:
            code = 0
            for jx in range(m - 1, -1, -1):
                code = code * (k + 1) + (assign[jx] + 1)
            trace[t] = code
    end = max(steps, burn_in)
    for s in range(k + 1):
        slot_acc[s] += cur[s] * (end - last[s])
    return accepted


# ---------------------------------------------------------------------------
# sequential importance sampling


def _sis_log_weights_py(atoms, q, mus, uniforms, out):
    """Importance weights for ``out.shape[0]`` sequentially built assignments.

    Symbols (``mus`` nonincreasing) are placed one at a time on a free atom
    with probability proportional to ``p**mu`` or, for singletons, on the
    continuous part with weight ``q``.  The weight of a draw is the product
    of the normalizers, so its mean is exactly the pattern probability.
    """
    k = atoms.shape[0]
    m = mus.shape[0]
    used = np.zeros(k, dtype=np.bool_)
    w = np.empty(k + 1)
    for i in range(out.shape[0]):
        for s in range(k):
            used[s] = False
        logw = 0.0
        for j in range(m):
            total = 0.0
            for s in range(k):
                w[s] = 0.0 if used[s] else atoms[s] ** mus[j]
                total += w[s]
            w[k] = q if mus[j] == 1 else 0.0
            total += w[k]
            if total <= 0.0:
                logw = NEG_INF
                break
            logw += math.log(total)
            target = uniforms[i * m + j] * total
            acc = 0.0
            pick = -1
            for s in range(k + 1):
                if w[s] > 0.0:
                    pick = s
                    acc += w[s]
                    if target < acc:
                        break
            if pick < k:
                used[pick] = True
        out[i] = logw


# ---------------------------------------------------------------------------
# backend binding (order matters: callees before callers for numba)

if _backend.USE_NUMBA:
    dp_forward = _backend.njit(_dp_forward_py)
    terminal = _backend.njit(_terminal_py)
    terminal_dq = _backend.njit(_terminal_dq_py)
    log_prob = _backend.njit(_log_prob_py)
    log_prob_grad = _backend.njit(_log_prob_grad_py)
    project = _backend.njit(_project_py)
    ascend = _backend.njit(_ascend_py)
    mcmc_chain = _backend.njit(_mcmc_chain_py)
    sis_log_weights = _backend.njit(_sis_log_weights_py)
else:
    dp_forward = _dp_forward_numpy
    terminal = _terminal_py
    terminal_dq = _terminal_dq_py
    log_prob = _log_prob_py
    log_prob_grad = _log_prob_grad_py
    project = _project_py
    ascend = _ascend_py
    mcmc_chain = _mcmc_chain_py
    sis_log_weights = _sis_log_weights_py
