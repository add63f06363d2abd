"""Pointwise algebra on 3-vectors and 3x3 tensors.

Every function broadcasts over leading axes: vectors have shape ``(..., 3)``
and tensors ``(..., 3, 3)``. Norms are returned squared, as the energy
densities use them.
"""

from __future__ import annotations

import numpy as np

SKEW_TOL = 1e-10

IDENTITY = np.eye(3)

# permutation tensor, E[i, j, k] = epsilon_ijk
LEVI_CIVITA = np.zeros((3, 3, 3))
for _i, _j, _k in ((0, 1, 2), (1, 2, 0), (2, 0, 1)):
    LEVI_CIVITA[_i, _j, _k] = 1.0
    LEVI_CIVITA[_i, _k, _j] = -1.0


def anti(v: np.ndarray) -> np.ndarray:
    """Skew tensor ``v x 1`` such that ``anti(v) @ w == cross(v, w)``."""
    v = np.asarray(v, dtype=float)
    return -np.einsum("ijk,...k->...ij", LEVI_CIVITA, v)


def axl(T: np.ndarray, tol: float = SKEW_TOL) -> np.ndarray:
    """Axial vector of a skew tensor, the inverse of :func:`anti`.

    Raises:
        ValueError: if the symmetric part of ``T`` exceeds
            ``tol * max(1, |T|)`` at any point of the batch.
    """
    T = np.asarray(T, dtype=float)
    S = sym(T)
    bad = frob2(S) > (tol * np.maximum(1.0, np.sqrt(frob2(T)))) ** 2
    if np.any(bad):
        raise ValueError("axl() requires a skew-symmetric tensor")
    return -0.5 * np.einsum("ijk,...jk->...i", LEVI_CIVITA, T)


def sym(T: np.ndarray) -> np.ndarray:
    return 0.5 * (T + np.swapaxes(T, -1, -2))


def skw(T: np.ndarray) -> np.ndarray:
    return 0.5 * (T - np.swapaxes(T, -1, -2))


def tr(T: np.ndarray) -> np.ndarray:
    return np.trace(T, axis1=-2, axis2=-1)


def dev(T: np.ndarray) -> np.ndarray:
    return T - (tr(T) / 3.0)[..., None, None] * IDENTITY


def decompose(T: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Split ``T`` into ``(sym, skw, dev sym, tr)``."""
    T = np.asarray(T, dtype=float)
    S = sym(T)
    return S, skw(T), dev(S), tr(T)


def inner(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Frobenius inner product ``<A, B>``."""
    return np.einsum("...ij,...ij->...", A, B)


def frob2(A: np.ndarray) -> np.ndarray:
    return inner(A, A)


def nye_curl(div_theta, grad_theta: np.ndarray) -> np.ndarray:
    """Curl of ``anti(theta)`` from gradient data: ``(div theta) 1 - (D theta)^T``.

    The divergence is passed separately so tangential variants (where it is
    the trace of the projected gradient) reuse the same operator.
    """
    div_theta = np.asarray(div_theta, dtype=float)
    return div_theta[..., None, None] * IDENTITY - np.swapaxes(grad_theta, -1, -2)


def norm_Ce(S: np.ndarray, mu: float, lam: float) -> np.ndarray:
    """Squared isotropic material norm ``2 mu |S|^2 + lam (tr S)^2``."""
    if mu < 0:
        raise ValueError(f"mu must be nonnegative, got {mu}")
    return 2.0 * mu * frob2(S) + lam * tr(S) ** 2


def norm_L(T: np.ndarray, a1: float, a2: float, a3: float) -> np.ndarray:
    """Squared weighted norm ``a1|dev sym T|^2 + a2|skw T|^2 + (a3/3)(tr T)^2``.

    With unit weights this is the squared Frobenius norm.
    """
    if min(a1, a2, a3) < 0:
        raise ValueError(f"weights must be nonnegative, got {(a1, a2, a3)}")
    S = sym(T)
    return a1 * frob2(dev(S)) + a2 * frob2(skw(T)) + (a3 / 3.0) * tr(T) ** 2


def outer(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return a[..., :, None] * b[..., None, :]
