"""Independent oracles used across the test suite.

These deliberately avoid the code paths they are checking: the QP oracle
is a projected-gradient method on the dual, moment references come from
direct summation or symbolic integration, and kinematics references use
explicit rotation matrices or fine-step integration.
"""

import numpy as np


def dual_projected_gradient(H, f, G, w, max_iter=200000, tol=1e-12):
    """Box-free QP oracle: projected gradient ascent on the dual.

    Requires H positive definite. Returns (x, lam) at convergence of the
    dual gradient mapping.
    """
    H = np.asarray(H, dtype=float)
    f = np.asarray(f, dtype=float)
    G = np.asarray(G, dtype=float)
    w = np.asarray(w, dtype=float)
    h_inv = np.linalg.inv(H)
    lipschitz = np.linalg.eigvalsh(G @ h_inv @ G.T).max()
    step = 1.0 / max(lipschitz, 1e-12)
    lam = np.zeros(w.size)
    for _ in range(max_iter):
        grad = -(G @ (h_inv @ (f + G.T @ lam))) - w
        lam_new = np.maximum(0.0, lam + step * grad)
        if np.abs(lam_new - lam).max() < tol * step:
            lam = lam_new
            break
        lam = lam_new
    x = -h_inv @ (f + G.T @ lam)
    return x, lam


def projected_gradient_box(H, f, lo, hi, max_iter=200000, tol=1e-12):
    """Primal projected gradient for box-constrained QPs."""
    H = np.asarray(H, dtype=float)
    f = np.asarray(f, dtype=float)
    step = 1.0 / np.linalg.eigvalsh(H).max()
    x = np.clip(np.zeros(f.size), lo, hi)
    for _ in range(max_iter):
        x_new = np.clip(x - step * (H @ x + f), lo, hi)
        if np.abs(x_new - x).max() < tol * step:
            x = x_new
            break
        x = x_new
    return x


def raw_moment_bruteforce(arr, p, q):
    """Nested-loop pixel moment, independent of the vectorized path."""
    total = 0.0
    for y in range(arr.shape[0]):
        for x in range(arr.shape[1]):
            total += (x**p) * (y**q) * arr[y, x]
    return total


def rotation_2d(angle):
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s], [s, c]])


def random_qp(rng, with_general_rows=True):
    """Random dense strictly convex QP with a guaranteed interior point."""
    n = int(rng.integers(2, 21))
    a = rng.standard_normal((n, n))
    H = a.T @ a + np.eye(n) * rng.uniform(0.5, 2.0)
    f = rng.standard_normal(n)
    lo = -rng.uniform(0.2, 2.0, n)
    hi = rng.uniform(0.2, 2.0, n)
    G = [np.eye(n), -np.eye(n)]
    w = [hi, -lo]
    if with_general_rows:
        k = int(rng.integers(1, 6))
        g_extra = rng.standard_normal((k, n))
        x_interior = rng.uniform(0.5 * lo, 0.5 * hi)
        G.append(g_extra)
        w.append(g_extra @ x_interior + rng.uniform(0.1, 1.0, k))
    return H, f, np.vstack(G), np.concatenate(w)
