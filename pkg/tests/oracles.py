"""Independent reference implementations used to check the real ones.

Everything here is deliberately naive (enumeration, double loops, finite
differences) and shares no code with the library paths it verifies.
"""

import itertools

import numpy as np


def active_set_oracle(p_mat, q, a_mat, l, u, tol=1e-7):
    """Exact small-QP solver: enumerate active sets (each inequality row
    inactive / at lower / at upper), solve the equality-constrained KKT
    system, keep primal-feasible candidates, return the best.

    Returns (objective, x) or None if no candidate is feasible.
    """
    p_mat = np.asarray(p_mat, dtype=float)
    a_mat = np.asarray(a_mat, dtype=float)
    q = np.asarray(q, dtype=float)
    l = np.asarray(l, dtype=float)
    u = np.asarray(u, dtype=float)
    n, m = p_mat.shape[0], a_mat.shape[0]

    eq = [j for j in range(m) if np.isfinite(l[j]) and np.isfinite(u[j]) and u[j] - l[j] < 1e-12]
    ineq = [j for j in range(m) if j not in eq]
    choices = []
    for j in ineq:
        opts = [None]
        if np.isfinite(l[j]):
            opts.append((j, l[j]))
        if np.isfinite(u[j]):
            opts.append((j, u[j]))
        choices.append(opts)

    best = None
    for combo in itertools.product(*choices):
        active = [(j, l[j]) for j in eq] + [c for c in combo if c is not None]
        k = len(active)
        kkt = np.zeros((n + k, n + k))
        kkt[:n, :n] = p_mat
        if k:
            rows = np.array([a_mat[j] for j, _ in active])
            kkt[:n, n:] = rows.T
            kkt[n:, :n] = rows
        rhs = np.concatenate([-q, np.array([b for _, b in active])]) if k else -q
        sol, *_ = np.linalg.lstsq(kkt, rhs, rcond=None)
        if np.max(np.abs(kkt @ sol - rhs)) > 1e-8 * max(1.0, float(np.max(np.abs(rhs)))):
            continue  # inconsistent active set
        x = sol[:n]
        ax = a_mat @ x if m else np.zeros(0)
        if np.any(ax < l - tol) or np.any(ax > u + tol):
            continue
        obj = 0.5 * x @ p_mat @ x + q @ x
        if best is None or obj < best[0]:
            best = (obj, x)
    return best


def random_feasible_qp(rng, n_max=20, m_max=8):
    """Strictly convex random QP, feasible by construction (bounds bracket
    a random point; equality rows pinned at that point's value)."""
    n = int(rng.integers(1, n_max + 1))
    m = int(rng.integers(1, m_max + 1))
    b_mat = rng.standard_normal((n, n))
    p_mat = b_mat @ b_mat.T + 0.5 * np.eye(n)
    q = 2.0 * rng.standard_normal(n)
    a_mat = rng.standard_normal((m, n))
    x0 = 0.3 * rng.standard_normal(n)
    mid = a_mat @ x0
    half = np.abs(rng.standard_normal(m)) + 0.1
    l, u = mid - half, mid + half
    for j in range(m):
        r = rng.random()
        if r < 0.2:
            l[j] = u[j] = mid[j]
        elif r < 0.3:
            u[j] = np.inf
        elif r < 0.4:
            l[j] = -np.inf
    return p_mat, q, a_mat, l, u


# ---------------------------------------------------------------------------
# Naive metric references (double loops, no numpy vectorization)
# ---------------------------------------------------------------------------

def naive_nmbe(y, r):
    k = len(y)
    err = 0.0
    r_mean = 0.0
    for j in range(k):
        err += y[j] - r[j]
        r_mean += r[j]
    return 100.0 * (err / k) / (r_mean / k)


def naive_cvrmse(y, r):
    k = len(y)
    sq = 0.0
    r_mean = 0.0
    for j in range(k):
        sq += (y[j] - r[j]) ** 2
        r_mean += r[j]
    return 100.0 * (sq / k) ** 0.5 / (r_mean / k)


def naive_comfort(t_in, bands, dt):
    k, n = len(t_in), len(t_in[0])
    hours, kelvin = [], []
    for i in range(n):
        t_min, t_max = bands[i]
        h = 0
        kh = 0.0
        for j in range(k):
            v = max(0.0, t_in[j][i] - t_max) + max(0.0, t_min - t_in[j][i])
            if v > 0.0:
                h += 1
            kh += v * dt
        hours.append(h)
        kelvin.append(kh)
    pct = [100.0 * h / k for h in hours]
    return hours, pct, sum(pct) / n, kelvin, sum(kelvin) / n


def naive_spatial_variability(y_ctrl, y_rbc):
    k, n = len(y_ctrl), len(y_ctrl[0])
    sigma = []
    for j in range(k):
        deltas = [y_ctrl[j][i] - y_rbc[j][i] for i in range(n)]
        mean = sum(deltas) / n
        var = sum((d - mean) ** 2 for d in deltas) / n
        sigma.append(var ** 0.5)
    ordered = sorted(sigma)
    mid = k // 2
    med = ordered[mid] if k % 2 == 1 else 0.5 * (ordered[mid - 1] + ordered[mid])
    return sigma, med


def gae_double_sum(rewards, values, gamma, lam):
    """Direct finite double-sum evaluation of the advantage definition."""
    k = len(rewards)
    deltas = [rewards[j] + gamma * values[j + 1] - values[j] for j in range(k)]
    return np.array([
        sum((gamma * lam) ** j * deltas[t + j] for j in range(k - t))
        for t in range(k)
    ])


def finite_difference_grads(net, x, upstream, h=1e-5):
    """Central-difference parameter gradients of upstream . f(x)."""
    from districtflex.nn import mlp_forward

    def loss():
        return float(np.sum(mlp_forward(net, x) * upstream))

    grads_w, grads_b = [], []
    for w in net.weights:
        g = np.zeros_like(w)
        for idx in np.ndindex(*w.shape):
            orig = w[idx]
            w[idx] = orig + h
            up = loss()
            w[idx] = orig - h
            down = loss()
            w[idx] = orig
            g[idx] = (up - down) / (2.0 * h)
        grads_w.append(g)
    for b in net.biases:
        g = np.zeros_like(b)
        for idx in np.ndindex(*b.shape):
            orig = b[idx]
            b[idx] = orig + h
            up = loss()
            b[idx] = orig - h
            down = loss()
            b[idx] = orig
            g[idx] = (up - down) / (2.0 * h)
        grads_b.append(g)
    return grads_w, grads_b
