"""Least-squares fit of ``f(h) = a exp(b h) + c`` for extrapolation to ``h = 0``."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import least_squares


class FitError(RuntimeError):
    pass


@dataclass(frozen=True)
class ExponentialFit:
    a: float
    b: float
    c: float
    residual: float
    evaluations: int

    @property
    def f0(self) -> float:
        return self.a + self.c

    def __call__(self, h):
        return self.a * np.exp(self.b * np.asarray(h, dtype=float)) + self.c


def _linear_part(h, v, b):
    """Best ``(a, c)`` for fixed ``b`` and the residual norm."""
    M = np.stack([np.exp(b * h), np.ones_like(h)], axis=1)
    coef, *_ = np.linalg.lstsq(M, v, rcond=None)
    return coef, float(np.linalg.norm(M @ coef - v))


def fit_exponential(points, max_nfev: int = 2000, rank_tol: float = 1e-10) -> ExponentialFit:
    """Fit ``a exp(b h) + c`` to ``(h, value)`` pairs by Levenberg-Marquardt.

    The start point comes from a scan over ``b`` with ``(a, c)`` solved
    linearly. Constant data returns ``a = b = 0``.

    Raises:
        ValueError: fewer than three points or repeated ``h``.
        FitError: no convergence within ``max_nfev`` evaluations or a
            rank-deficient Jacobian at the solution.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) < 3:
        raise ValueError("need at least three (h, value) pairs")
    h, v = pts[:, 0], pts[:, 1]
    if len(np.unique(h)) != len(h):
        raise ValueError("abscissae h must be distinct")
    scale = max(float(np.abs(v).max()), 1e-300)
    if np.ptp(v) <= 1e-14 * scale:
        return ExponentialFit(0.0, 0.0, float(v.mean()), 0.0, 0)
    span = float(np.ptp(h))
    grid = np.concatenate([-np.logspace(-3, 2, 60), np.logspace(-3, 2, 60)]) / span
    b0 = min(grid, key=lambda b: _linear_part(h, v, b)[1])
    (a0, c0), _ = _linear_part(h, v, b0)

    def resid(p):
        return p[0] * np.exp(p[1] * h) + p[2] - v

    def jac(p):
        e = np.exp(p[1] * h)
        return np.stack([e, p[0] * h * e, np.ones_like(h)], axis=1)

    sol = least_squares(resid, [a0, b0, c0], jac=jac, method="lm", xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=max_nfev)
    if sol.status <= 0 or not np.all(np.isfinite(sol.x)):
        raise FitError(f"no convergence after {sol.nfev} evaluations: {sol.message}")
    sv = np.linalg.svd(jac(sol.x), compute_uv=False)
    if sv[-1] <= rank_tol * sv[0]:
        raise FitError(f"rank-deficient Jacobian at the solution (condition {sv[0] / max(sv[-1], 1e-300):.3g})")
    a, b, c = map(float, sol.x)
    return ExponentialFit(a, b, c, float(np.linalg.norm(sol.fun)), int(sol.nfev))
