"""Brute-force oracles, written without reusing library internals.

Everything here is deliberately naive: dense sweeps, restarts, grids.  The
fundamental matrix is built from the projection matrices
(``F = [e2]x P2 P1^+``) rather than from poses, so the two-view checks do
not share a code path with the solvers they test.
"""

from __future__ import annotations

import numpy as np
from scipy.spatial.transform import Rotation


def cross_matrix(v):
    return np.array([[0.0, -v[2], v[1]], [v[2], 0.0, -v[0]], [-v[1], v[0], 0.0]])


def fundamental_from_P(cam1, cam2):
    P1, P2 = cam1.P, cam2.P
    e2 = P2 @ np.append(cam1.center, 1.0)
    F = cross_matrix(e2) @ P2 @ np.linalg.pinv(P1)
    return F / np.linalg.norm(F)


def projective_pixels(camera, point):
    """Dehomogenized ``P [p; 1]`` with no cheirality test."""
    x = camera.P @ np.append(point, 1.0)
    return x[:2] / x[2]


def reprojection_cost(cameras, pixels, point, norm=2):
    d = [np.linalg.norm(projective_pixels(c, point) - np.asarray(u)) for c, u in zip(cameras, pixels)]
    return float(sum(x**norm for x in d))


def _line_distance(lines, u):
    return np.abs(lines[..., 0] * u[0] + lines[..., 1] * u[1] + lines[..., 2]) / np.hypot(
        lines[..., 0], lines[..., 1]
    )


def _pencil_costs(F, e1, u1, u2, theta):
    # lines through the epipole e1 are exactly the l with l . e1 = 0; both the
    # line in image 1 and its partner F (l x e1) are linear in (cos, sin)
    _, _, Vt = np.linalg.svd(e1.reshape(1, 3))
    a, b = Vt[1], Vt[2]
    a2, b2 = F @ np.cross(a, e1), F @ np.cross(b, e1)
    c, s = np.cos(theta), np.sin(theta)
    out = []
    for la, lb, u in ((a, b, u1), (a2, b2, u2)):
        num = c * (la[0] * u[0] + la[1] * u[1] + la[2]) + s * (lb[0] * u[0] + lb[1] * u[1] + lb[2])
        out.append(np.abs(num) / np.hypot(c * la[0] + s * lb[0], c * la[1] + s * lb[1]))
    return tuple(out)


def _local_minima(cost, k):
    """Indices of the ``k`` lowest local minima of a periodic sampled curve."""
    left, right = np.roll(cost, 1), np.roll(cost, -1)
    idx = np.flatnonzero((cost <= left) & (cost <= right))
    return idx[np.argsort(cost[idx])[:k]]


def epipolar_sweep(cam1, cam2, u1, u2, n=1_000_000, refine=True):
    """Minimum L2 and L1 image costs over a dense sweep of epipolar line pairs.

    Returns ``(min_l2, min_l1)``.  With ``refine`` the few lowest local
    minima of the coarse sweep are each re-swept on successively finer grids.
    """
    F = fundamental_from_P(cam1, cam2)
    e1 = cam1.P @ np.append(cam2.center, 1.0)
    u1, u2 = np.asarray(u1, float), np.asarray(u2, float)
    theta = np.linspace(0.0, np.pi, n, endpoint=False)
    step = np.pi / n
    d1, d2 = _pencil_costs(F, e1, u1, u2, theta)
    out = []
    for norm in (2, 1):
        cost = d1**norm + d2**norm
        best = float(cost.min())
        if refine:
            for k in _local_minima(cost, 8):
                center, half = theta[k], 2 * step
                for _ in range(6):  # zoom in: kinks of the L1 cost are steep
                    fine = np.linspace(center - half, center + half, 2001)
                    f1, f2 = _pencil_costs(F, e1, u1, u2, fine)
                    fc = f1**norm + f2**norm
                    j = int(np.argmin(fc))
                    best = min(best, float(fc[j]))
                    center, half = fine[j], 2 * (fine[1] - fine[0])
        out.append(best)
    return tuple(out)


def angular_sweep(ray1, ray2, n=100_000, norm=1):
    """Minimum angular cost over plane normals orthogonal to the baseline."""
    base = ray2.origin - ray1.origin
    _, _, Vt = np.linalg.svd(base.reshape(1, 3))
    a, b = Vt[1], Vt[2]
    phi = np.linspace(0.0, np.pi, n, endpoint=False)
    normals = np.cos(phi)[:, None] * a + np.sin(phi)[:, None] * b
    s = np.abs(normals @ ray1.direction), np.abs(normals @ ray2.direction)
    cost = s[0] ** norm + s[1] ** norm
    return float(cost.min())


def sine(a, b):
    a, b = np.asarray(a, float), np.asarray(b, float)
    return float(np.linalg.norm(np.cross(a, b)) / (np.linalg.norm(a) * np.linalg.norm(b)))


def ray_distance_cost(rays, p):
    total = 0.0
    for r in rays:
        v = p - r.origin
        total += float(v @ v - (v @ r.direction) ** 2)
    return total


def grid_minimize(f, center, half_width, levels=12, n=21):
    """Coarse-to-fine grid search of a 3-D function."""
    c = np.asarray(center, float)
    w = float(half_width)
    for _ in range(levels):
        g = np.linspace(-w, w, n)
        X, Y, Z = np.meshgrid(g, g, g, indexing="ij")
        cand = c + np.stack([X.ravel(), Y.ravel(), Z.ravel()], axis=1)
        vals = np.array([f(p) for p in cand])
        c = cand[int(np.argmin(vals))]
        w *= 4.0 / (n - 1)
    return c


def central_gradient(f, p, h=1e-6):
    g = np.zeros(3)
    for k in range(3):
        e = np.zeros(3)
        e[k] = h
        g[k] = (f(p + e) - f(p - e)) / (2 * h)
    return g


def _batch_rodrigues(W):
    theta = np.linalg.norm(W, axis=1)
    k = W / np.where(theta > 0, theta, 1.0)[:, None]
    K = np.zeros((len(W), 3, 3))
    K[:, 0, 1], K[:, 0, 2], K[:, 1, 2] = -k[:, 2], k[:, 1], -k[:, 0]
    K[:, 1, 0], K[:, 2, 0], K[:, 2, 1] = k[:, 2], -k[:, 1], k[:, 0]
    s, c = np.sin(theta)[:, None, None], np.cos(theta)[:, None, None]
    return np.eye(3) + s * K + (1.0 - c) * (K @ K)


def similarity_multistart(est, gt, start, restarts=100, seed=0, iterations=300):
    """Best objective found by Levenberg-Marquardt from ``start`` plus random restarts.

    ``start`` is ``(scale, rotation_matrix, translation)``.  All starts are
    iterated together; rotations are updated multiplicatively,
    ``R <- exp([d]x) R``, with log-scale and translation additive.
    """
    x, y = np.asarray(est, float), np.asarray(gt, float)
    rng = np.random.default_rng(seed)
    B = restarts + 1
    log_s = np.concatenate([[np.log(start[0])], rng.normal(0.0, 1.0, restarts)])
    R = np.concatenate([np.asarray(start[1], float)[None], Rotation.random(restarts, random_state=rng).as_matrix()])
    t = np.concatenate([np.asarray(start[2], float)[None], rng.normal(0.0, 5.0, (restarts, 3))])

    def residuals(log_s, R, t):
        Y = np.exp(log_s)[:, None, None] * np.einsum("bij,nj->bni", R, x)
        return Y, Y + t[:, None, :] - y

    Y, r = residuals(log_s, R, t)
    cost = np.einsum("bni,bni->b", r, r)
    lam = np.full(B, 1e-3)
    n = len(x)
    stalled = 0
    for _ in range(iterations):
        J = np.zeros((B, n, 3, 7))
        J[..., 0] = Y
        # d(exp([d]x) Y)/dd = -[Y]x
        J[:, :, 0, 2], J[:, :, 0, 3] = Y[..., 2], -Y[..., 1]
        J[:, :, 1, 1], J[:, :, 1, 3] = -Y[..., 2], Y[..., 0]
        J[:, :, 2, 1], J[:, :, 2, 2] = Y[..., 1], -Y[..., 0]
        J[:, :, 0, 4] = J[:, :, 1, 5] = J[:, :, 2, 6] = 1.0
        J = J.reshape(B, 3 * n, 7)
        A = np.einsum("bmi,bmj->bij", J, J)
        g = np.einsum("bmi,bm->bi", J, r.reshape(B, -1))
        D = A + lam[:, None, None] * (np.eye(7) * np.maximum(np.diagonal(A, axis1=1, axis2=2), 1e-12)[:, None, :])
        step = -np.linalg.solve(D, g[..., None])[..., 0]
        log_c = np.clip(log_s + step[:, 0], -50.0, 50.0)
        R_c = _batch_rodrigues(step[:, 1:4]) @ R
        t_c = t + step[:, 4:7]
        Y_c, r_c = residuals(log_c, R_c, t_c)
        cost_c = np.einsum("bni,bni->b", r_c, r_c)
        ok = cost_c <= cost
        stalled = stalled + 1 if np.all(cost - np.where(ok, cost_c, cost) <= 1e-15 * cost) else 0
        if stalled >= 5:
            break
        log_s = np.where(ok, log_c, log_s)
        R = np.where(ok[:, None, None], R_c, R)
        t = np.where(ok[:, None], t_c, t)
        Y = np.where(ok[:, None, None], Y_c, Y)
        r = np.where(ok[:, None, None], r_c, r)
        cost = np.where(ok, cost_c, cost)
        lam = np.where(ok, np.maximum(lam / 10.0, 1e-15), np.minimum(lam * 10.0, 1e15))
    # evaluate the final objective directly from the parameters
    final = [float(np.sum((np.exp(ls) * x @ Rb.T + tb - y) ** 2)) for ls, Rb, tb in zip(log_s, R, t)]
    return min(final)
