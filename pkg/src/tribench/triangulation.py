"""Triangulation methods.

Closed-form methods work on lines of sight (mid-point, angular) or on two
calibrated cameras and their pixel measurements (two-view L2 / L1 in the
epipolar parametrization).  The N-view reprojection methods are local
refinements started from the mid-point estimate.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.polynomial import polynomial as P
from scipy.optimize import minimize_scalar

from .errors import CheiralityViolation, DegenerateGeometry, EpipoleAtPoint
from .geometry import Camera, Ray, line_of_sight, skew
from .polyroots import real_roots

DEFAULT_TOL = 1e-10
DEFAULT_MAX_ITER = 50
MAX_CONDITION = 1e12
DEPTH_FLOOR = 1e-6
RESIDUAL_FLOOR = 1e-9


@dataclass(frozen=True, eq=False)
class TriangulationResult:
    point: np.ndarray
    iterations: int = 0
    converged: bool = True
    # two-view methods: the corrected measurements (pixels, or ray directions
    # for angular methods) whose lines of sight meet at ``point``
    corrected: tuple | None = None
    # objective value after every accepted iterate (iterative methods only)
    history: tuple = ()
    notes: tuple = ()


# ---------------------------------------------------------------------------
# Costs
# ---------------------------------------------------------------------------


def midpoint_cost(rays, point) -> float:
    """Sum of squared 3D distances from ``point`` to the rays' lines."""
    return float(sum(r.distance_to(point) ** 2 for r in rays))


def reprojection_residuals(cameras, pixels, point):
    """Per-camera residual vectors, their 2x3 Jacobians and the depths."""
    n = len(cameras)
    res = np.empty((n, 2))
    jac = np.empty((n, 2, 3))
    depth = np.empty(n)
    p = np.asarray(point, dtype=float)
    for i, (cam, uv) in enumerate(zip(cameras, pixels)):
        M = cam.calib.K @ cam.pose.rotation
        x = M @ (p - cam.pose.center)
        depth[i] = x[2]
        u = x[:2] / x[2]
        res[i] = u - np.asarray(uv, dtype=float)
        jac[i] = (M[:2] - np.outer(u, M[2])) / x[2]
    return res, jac, depth


def reprojection_cost(cameras, pixels, point, norm: int = 2) -> float:
    """Sum of squared (``norm=2``) or plain (``norm=1``) image distances."""
    res, _, depth = reprojection_residuals(cameras, pixels, point)
    if np.any(depth <= 0):
        return float("inf")
    d = np.hypot(res[:, 0], res[:, 1])
    return float(np.sum(d**2) if norm == 2 else np.sum(d))


def angular_cost(rays, point, norm: int = 2) -> float:
    """Sum of sines (``norm=1``) or squared sines (``norm=2``) of the angles
    between each ray direction and the direction from its origin to ``point``."""
    total = 0.0
    for r in rays:
        v = np.asarray(point, dtype=float) - r.origin
        s = np.linalg.norm(np.cross(r.direction, v)) / np.linalg.norm(v)
        total += s**norm
    return float(total)


# ---------------------------------------------------------------------------
# Mid-point family
# ---------------------------------------------------------------------------


def _solve_weighted(rays, weights) -> np.ndarray:
    A = np.zeros((3, 3))
    b = np.zeros(3)
    for r, w in zip(rays, weights):
        Q = np.eye(3) - np.outer(r.direction, r.direction)
        A += w * Q
        b += w * (Q @ r.origin)
    if np.linalg.cond(A) > MAX_CONDITION:
        raise DegenerateGeometry("lines of sight are (nearly) parallel")
    return np.linalg.solve(A, b)


def midpoint(rays) -> TriangulationResult:
    """Least-squares point closest to all lines of sight (closed form, any N)."""
    if len(rays) < 2:
        raise ValueError("mid-point triangulation needs at least two rays")
    return TriangulationResult(_solve_weighted(rays, np.ones(len(rays))))


def _ray_depths(rays, p) -> np.ndarray:
    return np.array([(p - r.origin) @ r.direction for r in rays])


def midpoint_irls(rays, tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER) -> TriangulationResult:
    """Mid-point re-weighted by inverse squared depth along each ray.

    Each pass solves the weighted normal equations with ``w_i = 1 / z_i**2``,
    ``z_i`` being the depth of the current estimate along ray ``i`` (floored
    at 1e-6), which approximates image-space distances.
    """
    if tol <= 0 or max_iter < 1:
        raise ValueError("tol must be positive and max_iter at least 1")
    p = midpoint(rays).point
    for it in range(1, max_iter + 1):
        z = np.maximum(_ray_depths(rays, p), DEPTH_FLOOR)
        p_new = _solve_weighted(rays, 1.0 / z**2)
        step = np.linalg.norm(p_new - p)
        p = p_new
        if step < tol:
            return TriangulationResult(p, it, True)
    return TriangulationResult(p, max_iter, False, notes=("max_iter reached",))


# ---------------------------------------------------------------------------
# Two-view reprojection methods (epipolar parametrization)
# ---------------------------------------------------------------------------


def relative_motion(cam1: Camera, cam2: Camera):
    """``(R, t)`` with ``x2 = R x1 + t`` between the two camera frames."""
    R1, R2 = cam1.pose.rotation, cam2.pose.rotation
    return R2 @ R1.T, R2 @ (cam1.pose.center - cam2.pose.center)


def fundamental_matrix(cam1: Camera, cam2: Camera) -> np.ndarray:
    """``F`` with ``[u2;1]^T F [u1;1] = 0``, scaled to unit Frobenius norm."""
    R, t = relative_motion(cam1, cam2)
    F = cam2.calib.K_inv.T @ skew(t) @ R @ cam1.calib.K_inv
    return F / np.linalg.norm(F)


class _EpipolarPencil:
    """Pencil of epipolar lines around two measurements.

    Each image is translated so its measurement sits at the origin and rotated
    so its epipole lies on the x axis at ``(1, 0, f)``.  Corresponding
    epipolar lines are then ``(t f1, 1, -t)`` and
    ``(-f2 (c t + d), a t + b, c t + d)``, and the distances from the
    measurements to these lines are rigid image distances.
    """

    def __init__(self, cam1: Camera, cam2: Camera, u1, u2):
        c1, c2 = cam1.pose.center, cam2.pose.center
        if np.linalg.norm(c2 - c1) <= 1e-12:
            raise DegenerateGeometry("camera centers coincide")
        F = fundamental_matrix(cam1, cam2)
        e1 = cam1.calib.K @ cam1.pose.rotation @ (c2 - c1)
        e2 = cam2.calib.K @ cam2.pose.rotation @ (c1 - c2)
        T1 = np.array([[1.0, 0.0, u1[0]], [0.0, 1.0, u1[1]], [0.0, 0.0, 1.0]])
        T2 = np.array([[1.0, 0.0, u2[0]], [0.0, 1.0, u2[1]], [0.0, 0.0, 1.0]])
        e1 = np.array([e1[0] - u1[0] * e1[2], e1[1] - u1[1] * e1[2], e1[2]])
        e2 = np.array([e2[0] - u2[0] * e2[2], e2[1] - u2[1] * e2[2], e2[2]])
        W1 = self._rotation_to_axis(e1)
        W2 = self._rotation_to_axis(e2)
        e1 = e1 / np.hypot(e1[0], e1[1])
        e2 = e2 / np.hypot(e2[0], e2[1])
        Fc = W2 @ T2.T @ F @ T1 @ W1.T
        Fc = Fc / np.abs(Fc).max()
        self.a, self.b, self.c, self.d = Fc[1, 1], Fc[1, 2], Fc[2, 1], Fc[2, 2]
        self.f1, self.f2 = e1[2], e2[2]
        self._back1 = T1 @ W1.T
        self._back2 = T2 @ W2.T

    @staticmethod
    def _rotation_to_axis(e) -> np.ndarray:
        s = np.hypot(e[0], e[1])
        if s <= 1e-9 * abs(e[2]):
            raise EpipoleAtPoint("measurement coincides with the epipole")
        cx, sx = e[0] / s, e[1] / s
        return np.array([[cx, sx, 0.0], [-sx, cx, 0.0], [0.0, 0.0, 1.0]])

    def distances(self, t):
        """Distances of both measurements to the epipolar lines at ``t``."""
        a, b, c, d, f1, f2 = self.a, self.b, self.c, self.d, self.f1, self.f2
        t = np.asarray(t, dtype=float)
        g = c * t + d
        d1 = np.abs(t) / np.sqrt(1.0 + (f1 * t) ** 2)
        d2 = np.abs(g) / np.sqrt((a * t + b) ** 2 + (f2 * g) ** 2)
        return d1, d2

    def distances_at_infinity(self):
        a, c, f1, f2 = self.a, self.c, self.f1, self.f2
        d1 = np.inf if f1 == 0 else 1.0 / abs(f1)
        denom = np.hypot(a, f2 * c)
        d2 = np.inf if denom == 0 else abs(c) / denom
        return d1, d2

    def lines(self, t):
        a, b, c, d, f1, f2 = self.a, self.b, self.c, self.d, self.f1, self.f2
        if np.isinf(t):
            return np.array([f1, 0.0, -1.0]), np.array([-f2 * c, a, c])
        return (
            np.array([t * f1, 1.0, -t]),
            np.array([-f2 * (c * t + d), a * t + b, c * t + d]),
        )

    def corrected_pixels(self, t):
        out = []
        for line, back in zip(self.lines(t), (self._back1, self._back2)):
            lam, mu, nu = line
            foot = np.array([-lam * nu, -mu * nu, lam**2 + mu**2])
            x = back @ foot
            out.append(x[:2] / x[2])
        return tuple(out)

    def l2_polynomial(self) -> np.ndarray:
        """Degree-6 numerator of the derivative of the squared-distance cost."""
        a, b, c, d, f1, f2 = self.a, self.b, self.c, self.d, self.f1, self.f2
        at_b = np.array([b, a])
        ct_d = np.array([d, c])
        q = P.polyadd(P.polymul(at_b, at_b), f2**2 * P.polymul(ct_d, ct_d))
        r = np.array([1.0, 0.0, f1**2])
        lhs = P.polymul([0.0, 1.0], P.polymul(q, q))
        rhs = (a * d - b * c) * P.polymul(P.polymul(r, r), P.polymul(at_b, ct_d))
        return P.polysub(lhs, rhs)

    def l1_polynomial(self) -> np.ndarray:
        """Degree-8 polynomial whose real roots contain the stationary points
        of the sum of (unsquared) distances; squaring adds spurious roots."""
        a, b, c, d, f1, f2 = self.a, self.b, self.c, self.d, self.f1, self.f2
        at_b = np.array([b, a])
        ct_d = np.array([d, c])
        q = P.polyadd(P.polymul(at_b, at_b), f2**2 * P.polymul(ct_d, ct_d))
        r = np.array([1.0, 0.0, f1**2])
        lhs = P.polypow(q, 3)
        rhs = (a * d - b * c) ** 2 * P.polymul(P.polymul(at_b, at_b), P.polypow(r, 3))
        return P.polysub(lhs, rhs)


def _safe_roots(poly) -> list[float]:
    nz = np.flatnonzero(np.abs(poly) > 0)
    if nz.size == 0 or nz[-1] == 0:
        return []
    return real_roots(poly)


def _best_parameter(pencil: _EpipolarPencil, candidates, norm: int) -> float:
    cands = np.array(candidates, dtype=float)
    cands = cands[np.isfinite(cands)]
    d1, d2 = pencil.distances(cands)
    costs = d1**2 + d2**2 if norm == 2 else d1 + d2
    i1, i2 = pencil.distances_at_infinity()
    cost_inf = i1**2 + i2**2 if norm == 2 else i1 + i2
    if cands.size == 0 or cost_inf < costs.min():
        return np.inf
    return float(cands[np.argmin(costs)])


def _intersect_corrected(cam1, cam2, x1, x2):
    rays = [line_of_sight(cam1, x1), line_of_sight(cam2, x2)]
    return midpoint(rays).point


def l2_twoview(cam1: Camera, cam2: Camera, u1, u2) -> TriangulationResult:
    """Two-view triangulation minimizing the sum of squared reprojection errors.

    The optimum is found among the real roots of a degree-6 polynomial in the
    epipolar-line parameter (plus the parameter at infinity); the
    measurements are moved to the closest points on the optimal pair of
    epipolar lines and the corrected lines of sight are intersected.
    """
    pencil = _EpipolarPencil(cam1, cam2, u1, u2)
    t = _best_parameter(pencil, _safe_roots(pencil.l2_polynomial()), norm=2)
    x1, x2 = pencil.corrected_pixels(t)
    return TriangulationResult(_intersect_corrected(cam1, cam2, x1, x2), corrected=(x1, x2))


def l1_twoview(cam1: Camera, cam2: Camera, u1, u2) -> TriangulationResult:
    """Two-view triangulation minimizing the sum of (unsquared) reprojection errors.

    Candidates are the real roots of the degree-8 stationarity polynomial,
    the two kinks of the cost (a zero residual in either image) and the
    parameter at infinity.
    """
    pencil = _EpipolarPencil(cam1, cam2, u1, u2)
    cands = _safe_roots(pencil.l1_polynomial())
    cands.append(0.0)
    if pencil.c != 0.0:
        cands.append(-pencil.d / pencil.c)
    t = _best_parameter(pencil, cands, norm=1)
    x1, x2 = pencil.corrected_pixels(t)
    return TriangulationResult(_intersect_corrected(cam1, cam2, x1, x2), corrected=(x1, x2))


# ---------------------------------------------------------------------------
# N-view reprojection refinement
# ---------------------------------------------------------------------------


def _lines_of_sight(cameras, pixels):
    return [line_of_sight(c, u) for c, u in zip(cameras, pixels)]


def _check_inputs(cameras, pixels, tol, max_iter):
    if len(cameras) < 2 or len(cameras) != len(pixels):
        raise ValueError("need at least two cameras with one pixel each")
    if tol <= 0 or max_iter < 1:
        raise ValueError("tol must be positive and max_iter at least 1")


def _damped_descent(cameras, pixels, p, objective, weights_fn, tol, max_iter):
    """Levenberg-style damped (re)weighted Gauss-Newton on reprojection residuals.

    A step is accepted only when ``objective`` does not increase, so the
    recorded history is non-increasing.
    """
    res, jac, depth = reprojection_residuals(cameras, pixels, p)
    if not np.any(depth > 0):
        raise CheiralityViolation("initial point is behind every camera")
    cost = objective(res, depth)
    history = [cost]
    lam = 1e-3
    for it in range(1, max_iter + 1):
        w = weights_fn(res)
        J = jac.reshape(-1, 3)
        r = res.reshape(-1)
        ww = np.repeat(w, 2)
        H = J.T @ (ww[:, None] * J)
        g = J.T @ (ww * r)
        H_damped = H + lam * np.diag(np.maximum(np.diag(H), 1e-12))
        try:
            step = -np.linalg.solve(H_damped, g)
        except np.linalg.LinAlgError:
            lam *= 10.0
            continue
        small = np.linalg.norm(step) < tol
        cand = p + step
        res_c, jac_c, depth_c = reprojection_residuals(cameras, pixels, cand)
        cost_c = objective(res_c, depth_c)
        if cost_c <= cost:
            p, res, jac, depth, cost = cand, res_c, jac_c, depth_c, cost_c
            history.append(cost)
            lam = max(lam / 10.0, 1e-12)
        else:
            lam *= 10.0
        if small:
            return TriangulationResult(p, it, True, history=tuple(history))
    return TriangulationResult(p, max_iter, False, history=tuple(history), notes=("max_iter reached",))


def _l2_objective(res, depth):
    if np.any(depth <= 0):
        return np.inf
    return float(np.sum(res**2))


def _l1_objective(res, depth):
    if np.any(depth <= 0):
        return np.inf
    return float(np.sum(np.hypot(res[:, 0], res[:, 1])))


def l2_multiview_refine(cameras, pixels, init=None, tol: float = DEFAULT_TOL,
                        max_iter: int = DEFAULT_MAX_ITER) -> TriangulationResult:
    """N-view sum-of-squared reprojection error, refined from ``init``
    (default: the mid-point of the lines of sight)."""
    _check_inputs(cameras, pixels, tol, max_iter)
    if init is None:
        init = midpoint(_lines_of_sight(cameras, pixels)).point
    return _damped_descent(
        cameras, pixels, np.asarray(init, dtype=float), _l2_objective,
        lambda res: np.ones(len(res)), tol, max_iter,
    )


def _kink_polish(cameras, pixels, p, i):
    """Best point on camera ``i``'s line of sight (zero residual there),
    minimizing the remaining reprojection distances along the ray."""
    ray = line_of_sight(cameras[i], pixels[i])
    others = [j for j in range(len(cameras)) if j != i]
    cams = [cameras[j] for j in others]
    pix = [pixels[j] for j in others]
    s0 = max((p - ray.origin) @ ray.direction, DEPTH_FLOOR)

    def cost(s):
        q = ray.at(s)
        res, _, depth = reprojection_residuals(cams, pix, q)
        if np.any(depth <= 0):
            return np.inf
        return float(np.sum(np.hypot(res[:, 0], res[:, 1])))

    # points behind a camera score inf; Brent's parabola step then yields nan and falls back to golden section
    with np.errstate(invalid="ignore"):
        out = minimize_scalar(cost, bounds=(s0 / 4.0, s0 * 4.0), method="bounded",
                              options={"xatol": 1e-12 * max(1.0, s0)})
    return ray.at(out.x), bool(out.success)


def l1_multiview_irls(cameras, pixels, init=None, tol: float = DEFAULT_TOL,
                      max_iter: int = DEFAULT_MAX_ITER) -> TriangulationResult:
    """N-view sum of reprojection distances by iteratively reweighted least
    squares, with weights ``1 / max(residual_i, 1e-9)``.

    IRLS approaches an optimum with a vanishing residual only linearly, so
    the iterate is finally compared against the best point on each camera's
    line of sight; the lowest objective wins.
    """
    _check_inputs(cameras, pixels, tol, max_iter)
    if init is None:
        init = midpoint(_lines_of_sight(cameras, pixels)).point

    def weights(res):
        return 1.0 / np.maximum(np.hypot(res[:, 0], res[:, 1]), RESIDUAL_FLOOR)

    out = _damped_descent(
        cameras, pixels, np.asarray(init, dtype=float), _l1_objective, weights, tol, max_iter,
    )
    best, best_cost = out.point, out.history[-1]
    converged, notes = out.converged, list(out.notes)
    for i in range(len(cameras)):
        q, ok = _kink_polish(cameras, pixels, out.point, i)
        res, _, depth = reprojection_residuals(cameras, pixels, q)
        c = _l1_objective(res, depth)
        if ok and c < best_cost:
            best, best_cost, converged = q, c, True
            notes = [f"zero residual in view {i}"]
    history = out.history
    if best is not out.point:
        history = history + (best_cost,)
    return TriangulationResult(best, out.iterations, converged, history=history, notes=tuple(notes))


# ---------------------------------------------------------------------------
# Angular methods (two views)
# ---------------------------------------------------------------------------


def _plane_basis(axis) -> tuple[np.ndarray, np.ndarray]:
    """Orthonormal basis of the plane orthogonal to unit vector ``axis``."""
    helper = np.eye(3)[np.argmin(np.abs(axis))]
    e1 = np.cross(axis, helper)
    e1 /= np.linalg.norm(e1)
    return e1, np.cross(axis, e1)


def _baseline(ray1: Ray, ray2: Ray) -> np.ndarray:
    base = ray2.origin - ray1.origin
    n = np.linalg.norm(base)
    if n <= 1e-12:
        raise DegenerateGeometry("ray origins coincide")
    base = base / n
    for r in (ray1, ray2):
        if np.linalg.norm(np.cross(base, r.direction)) <= 1e-12:
            raise DegenerateGeometry("ray is parallel to the baseline")
    return base


def _correct_to_plane(ray1: Ray, ray2: Ray, normal) -> TriangulationResult:
    fixed = []
    for r in (ray1, ray2):
        f = r.direction - (normal @ r.direction) * normal
        fixed.append(Ray(r.origin, f / np.linalg.norm(f)))
    p = midpoint(fixed).point
    return TriangulationResult(p, corrected=(fixed[0].direction, fixed[1].direction))


def angular_l1_twoview(ray1: Ray, ray2: Ray) -> TriangulationResult:
    """Minimize the sum of angular errors (sines) to a common epipolar plane.

    On the circle of planes through the baseline the cost is a sum of two
    ``|sin|`` terms, concave between their zeros, so the optimum makes one
    of the two rays exactly coplanar; both choices are compared.
    """
    base = _baseline(ray1, ray2)
    best = None
    for r in (ray1, ray2):
        n = np.cross(base, r.direction)
        n /= np.linalg.norm(n)
        cost = abs(n @ ray1.direction) + abs(n @ ray2.direction)
        if best is None or cost < best[0]:
            best = (cost, n)
    return _correct_to_plane(ray1, ray2, best[1])


def angular_l2_twoview(ray1: Ray, ray2: Ray) -> TriangulationResult:
    """Minimize the sum of squared angular errors (sines) to a common
    epipolar plane: the plane normal is the minor eigenvector of the 2x2
    scatter matrix of the directions restricted to the baseline's
    orthogonal complement."""
    base = _baseline(ray1, ray2)
    e1, e2 = _plane_basis(base)
    B = np.column_stack([e1, e2])
    F = np.column_stack([ray1.direction, ray2.direction])
    M = B.T @ F @ F.T @ B
    _, vecs = np.linalg.eigh(M)
    n = B @ vecs[:, 0]
    return _correct_to_plane(ray1, ray2, n / np.linalg.norm(n))
