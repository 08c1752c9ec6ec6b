"""Real roots of univariate polynomials via companion-matrix eigenvalues."""

from __future__ import annotations

import numpy as np

IMAG_TOL = 1e-8
NEWTON_STEPS = 3


def trim(coeffs) -> np.ndarray:
    """Drop zero leading coefficients (coefficients are lowest degree first)."""
    c = np.asarray(coeffs, dtype=float)
    nz = np.flatnonzero(c)
    if nz.size == 0:
        return c[:0]
    return c[: nz[-1] + 1]


def companion(coeffs) -> np.ndarray:
    """Companion matrix whose eigenvalues are the roots of the polynomial."""
    c = trim(coeffs)
    n = c.size - 1
    if n < 1:
        raise ValueError("polynomial degree must be at least 1")
    C = np.zeros((n, n))
    C[1:, :-1] = np.eye(n - 1)
    C[:, -1] = -c[:-1] / c[-1]
    return C


def _newton_polish(c, x: float, steps: int = NEWTON_STEPS) -> float:
    dc = np.polynomial.polynomial.polyder(c)
    for _ in range(steps):
        fx = np.polynomial.polynomial.polyval(x, c)
        dfx = np.polynomial.polynomial.polyval(x, dc)
        if dfx == 0.0 or not np.isfinite(dfx):
            break
        nxt = x - fx / dfx
        if not np.isfinite(nxt):
            break
        # keep the polished value only if it does not make the residual worse
        if abs(np.polynomial.polynomial.polyval(nxt, c)) > abs(fx):
            break
        x = nxt
    return float(x)


def real_roots(coeffs) -> list[float]:
    """All real roots, sorted ascending.

    ``coeffs`` are ordered lowest degree first.  Eigenvalues whose imaginary
    part is below ``1e-8 * (1 + |real part|)`` count as real; each is then
    polished with three Newton steps.
    """
    c = trim(coeffs)
    if c.size < 2:
        raise ValueError("polynomial degree must be at least 1")
    if c.size == 2:
        return [float(-c[0] / c[1])]
    # scale to a monic polynomial for a better-conditioned companion matrix
    c = c / c[-1]
    eig = np.linalg.eigvals(companion(c))
    keep = np.abs(eig.imag) < IMAG_TOL * (1.0 + np.abs(eig.real))
    roots = [_newton_polish(c, float(r)) for r in eig.real[keep]]
    return sorted(roots)
