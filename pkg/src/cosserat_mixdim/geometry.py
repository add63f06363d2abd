"""Exact-by-chart geometry: surface and curve frames, curvature, shifters.

Charts are analytic maps from a parameter box to R^3 carrying first and
second derivatives. Everything here is batched over leading axes of the
parameter array.

Conventions:
    * surface normal ``n = g1 x g2 / |g1 x g2|`` (parameter order fixes it)
    * Weingarten tensor ``W = -D_t n``; a sphere with outward normal has
      ``W = -P / R``
    * Gauss curvature is the determinant of the 2x2 tangent-plane
      restriction of ``W``, never the 3x3 determinant
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .tensor import IDENTITY, anti, outer

DEGENERACY_TOL = 1e-12


class DegenerateGeometryError(ValueError):
    pass


@dataclass(frozen=True)
class Chart:
    """Analytic parametrisation ``r: R^dim -> R^3``.

    ``jac`` returns ``(..., 3, dim)`` and ``hess`` returns ``(..., 3, dim, dim)``.
    ``spec`` is the JSON-serialisable description used by :func:`chart_from_spec`.
    """

    dim: int
    map: Callable[[np.ndarray], np.ndarray]
    jac: Callable[[np.ndarray], np.ndarray]
    hess: Callable[[np.ndarray], np.ndarray]
    spec: dict = field(default_factory=dict)
    scale: float = 1.0

    def __call__(self, xi):
        return self.map(np.asarray(xi, dtype=float))


# ---------------------------------------------------------------------------
# chart factories


def _split(xi, n):
    xi = np.asarray(xi, dtype=float)
    return [xi[..., i] for i in range(n)]


def _stack_vec(*comps):
    comps = np.broadcast_arrays(*[np.asarray(c, dtype=float) for c in comps])
    return np.stack(comps, axis=-1)


def affine_chart(origin, basis) -> Chart:
    """``r = origin + basis @ xi``; ``basis`` is ``(3, dim)``."""
    o = np.asarray(origin, dtype=float)
    B = np.atleast_2d(np.asarray(basis, dtype=float))
    if B.shape[0] != 3:
        B = B.T
    dim = B.shape[1]

    def f(xi):
        return o + np.einsum("ij,...j->...i", B, np.asarray(xi, dtype=float))

    def jac(xi):
        xi = np.asarray(xi, dtype=float)
        return np.broadcast_to(B, xi.shape[:-1] + (3, dim)).copy()

    def hess(xi):
        xi = np.asarray(xi, dtype=float)
        return np.zeros(xi.shape[:-1] + (3, dim, dim))

    spec = {"kind": "affine", "origin": o.tolist(), "basis": B.tolist()}
    return Chart(dim, f, jac, hess, spec, float(max(np.abs(B).max(), 1.0)))


def identity_chart() -> Chart:
    ch = affine_chart(np.zeros(3), np.eye(3))
    return Chart(3, ch.map, ch.jac, ch.hess, {"kind": "identity"}, 1.0)


def cylinder_chart(radius: float) -> Chart:
    """Params ``(phi, z)``; normal points radially outward."""
    R = float(radius)

    def f(xi):
        phi, z = _split(xi, 2)
        return _stack_vec(R * np.cos(phi), R * np.sin(phi), z)

    def jac(xi):
        phi, z = _split(xi, 2)
        J = np.zeros(phi.shape + (3, 2))
        J[..., 0, 0] = -R * np.sin(phi)
        J[..., 1, 0] = R * np.cos(phi)
        J[..., 2, 1] = 1.0
        return J

    def hess(xi):
        phi, z = _split(xi, 2)
        Hs = np.zeros(phi.shape + (3, 2, 2))
        Hs[..., 0, 0, 0] = -R * np.cos(phi)
        Hs[..., 1, 0, 0] = -R * np.sin(phi)
        return Hs

    return Chart(2, f, jac, hess, {"kind": "cylinder", "radius": R}, R)


def sphere_chart(radius: float) -> Chart:
    """Params ``(polar, azimuth)``; normal points outward."""
    R = float(radius)

    def f(xi):
        th, ph = _split(xi, 2)
        return R * _stack_vec(np.sin(th) * np.cos(ph), np.sin(th) * np.sin(ph), np.cos(th))

    def jac(xi):
        th, ph = _split(xi, 2)
        J = np.zeros(th.shape + (3, 2))
        J[..., 0, 0] = R * np.cos(th) * np.cos(ph)
        J[..., 1, 0] = R * np.cos(th) * np.sin(ph)
        J[..., 2, 0] = -R * np.sin(th)
        J[..., 0, 1] = -R * np.sin(th) * np.sin(ph)
        J[..., 1, 1] = R * np.sin(th) * np.cos(ph)
        return J

    def hess(xi):
        th, ph = _split(xi, 2)
        Hs = np.zeros(th.shape + (3, 2, 2))
        Hs[..., 0, 0, 0] = -R * np.sin(th) * np.cos(ph)
        Hs[..., 1, 0, 0] = -R * np.sin(th) * np.sin(ph)
        Hs[..., 2, 0, 0] = -R * np.cos(th)
        Hs[..., 0, 0, 1] = Hs[..., 0, 1, 0] = -R * np.cos(th) * np.sin(ph)
        Hs[..., 1, 0, 1] = Hs[..., 1, 1, 0] = R * np.cos(th) * np.cos(ph)
        Hs[..., 0, 1, 1] = -R * np.sin(th) * np.cos(ph)
        Hs[..., 1, 1, 1] = -R * np.sin(th) * np.sin(ph)
        return Hs

    return Chart(2, f, jac, hess, {"kind": "sphere", "radius": R}, R)


def curved_slab_chart() -> Chart:
    """Volume map of the curved silicone slab on the unit cube."""

    def f(xi):
        a, b, c = _split(xi, 3)
        s = 2 * a - 1
        return _stack_vec(200 * s, 40 * (2 * b - 1) * (3 - 2 * s**2), 10 * (c - 7 * np.sin(4 * a - 2)))

    def jac(xi):
        a, b, c = _split(xi, 3)
        s = 2 * a - 1
        J = np.zeros(a.shape + (3, 3))
        J[..., 0, 0] = 400.0
        J[..., 1, 0] = 40 * (2 * b - 1) * (-8 * s)
        J[..., 1, 1] = 80 * (3 - 2 * s**2)
        J[..., 2, 0] = -280 * np.cos(4 * a - 2)
        J[..., 2, 2] = 10.0
        return J

    def hess(xi):
        a, b, c = _split(xi, 3)
        s = 2 * a - 1
        Hs = np.zeros(a.shape + (3, 3, 3))
        Hs[..., 1, 0, 0] = -640 * (2 * b - 1)
        Hs[..., 1, 0, 1] = Hs[..., 1, 1, 0] = -640 * s
        Hs[..., 2, 0, 0] = 1120 * np.sin(4 * a - 2)
        return Hs

    return Chart(3, f, jac, hess, {"kind": "curved_slab"}, 400.0)


def slab_midsurface_chart() -> Chart:
    """Bottom surface (``zeta = 0``) of :func:`curved_slab_chart`; normal is +z."""
    vol = curved_slab_chart()

    def lift(xi):
        xi = np.asarray(xi, dtype=float)
        return np.concatenate([xi, np.zeros(xi.shape[:-1] + (1,))], axis=-1)

    def f(xi):
        return vol.map(lift(xi))

    def jac(xi):
        return vol.jac(lift(xi))[..., :2]

    def hess(xi):
        return vol.hess(lift(xi))[..., :2, :2]

    return Chart(2, f, jac, hess, {"kind": "slab_midsurface"}, 400.0)


def extruded_arc_chart(radius: float, center_y: float, center_z: float) -> Chart:
    """Params ``(x, phi)``: ``r = (x, cy + R cos phi, cz + R sin phi)``."""
    R, cy, cz = float(radius), float(center_y), float(center_z)

    def f(xi):
        x, ph = _split(xi, 2)
        return _stack_vec(x, cy + R * np.cos(ph), cz + R * np.sin(ph))

    def jac(xi):
        x, ph = _split(xi, 2)
        J = np.zeros(x.shape + (3, 2))
        J[..., 0, 0] = 1.0
        J[..., 1, 1] = -R * np.sin(ph)
        J[..., 2, 1] = R * np.cos(ph)
        return J

    def hess(xi):
        x, ph = _split(xi, 2)
        Hs = np.zeros(x.shape + (3, 2, 2))
        Hs[..., 1, 1, 1] = -R * np.cos(ph)
        Hs[..., 2, 1, 1] = -R * np.sin(ph)
        return Hs

    spec = {"kind": "extruded_arc", "radius": R, "center_y": cy, "center_z": cz}
    return Chart(2, f, jac, hess, spec, R)


def circle_arc_chart(radius: float, center, normal_axis: int = 0) -> Chart:
    """Circle in the plane orthogonal to coordinate axis ``normal_axis``.

    For ``normal_axis = 0`` the param ``phi`` maps to
    ``center + R (0, cos phi, sin phi)``.
    """
    R = float(radius)
    c = np.asarray(center, dtype=float)
    ax = int(normal_axis)
    i1, i2 = [(1, 2), (2, 0), (0, 1)][ax]

    def f(xi):
        (ph,) = _split(xi, 1)
        out = np.broadcast_to(c, ph.shape + (3,)).copy()
        out[..., i1] += R * np.cos(ph)
        out[..., i2] += R * np.sin(ph)
        return out

    def jac(xi):
        (ph,) = _split(xi, 1)
        J = np.zeros(ph.shape + (3, 1))
        J[..., i1, 0] = -R * np.sin(ph)
        J[..., i2, 0] = R * np.cos(ph)
        return J

    def hess(xi):
        (ph,) = _split(xi, 1)
        Hs = np.zeros(ph.shape + (3, 1, 1))
        Hs[..., i1, 0, 0] = -R * np.cos(ph)
        Hs[..., i2, 0, 0] = -R * np.sin(ph)
        return Hs

    spec = {"kind": "circle_arc", "radius": R, "center": c.tolist(), "normal_axis": ax}
    return Chart(1, f, jac, hess, spec, R)


def helix_chart(radius: float, pitch: float) -> Chart:
    """``r = (R cos t, R sin t, pitch * t)``; torsion ``pitch / (R^2 + pitch^2)``."""
    R, p = float(radius), float(pitch)

    def f(xi):
        (t,) = _split(xi, 1)
        return _stack_vec(R * np.cos(t), R * np.sin(t), p * t)

    def jac(xi):
        (t,) = _split(xi, 1)
        return _stack_vec(-R * np.sin(t), R * np.cos(t), p + 0 * t)[..., None]

    def hess(xi):
        (t,) = _split(xi, 1)
        return _stack_vec(-R * np.cos(t), -R * np.sin(t), 0 * t)[..., None, None]

    return Chart(1, f, jac, hess, {"kind": "helix", "radius": R, "pitch": p}, R)


_FACTORIES = {
    "affine": lambda s: affine_chart(s["origin"], s["basis"]),
    "identity": lambda s: identity_chart(),
    "cylinder": lambda s: cylinder_chart(s["radius"]),
    "sphere": lambda s: sphere_chart(s["radius"]),
    "curved_slab": lambda s: curved_slab_chart(),
    "slab_midsurface": lambda s: slab_midsurface_chart(),
    "extruded_arc": lambda s: extruded_arc_chart(s["radius"], s["center_y"], s["center_z"]),
    "circle_arc": lambda s: circle_arc_chart(s["radius"], s["center"], s.get("normal_axis", 0)),
    "helix": lambda s: helix_chart(s["radius"], s["pitch"]),
}


def chart_from_spec(spec: dict) -> Chart:
    try:
        return _FACTORIES[spec["kind"]](spec)
    except KeyError as exc:
        raise ValueError(f"unknown chart spec {spec!r}") from exc


# ---------------------------------------------------------------------------
# surfaces


@dataclass
class SurfaceData:
    point: np.ndarray
    g1: np.ndarray
    g2: np.ndarray
    n: np.ndarray
    P: np.ndarray
    Q: np.ndarray
    W: np.ndarray
    H: np.ndarray
    K: np.ndarray
    area_jacobian: np.ndarray
    # contravariant tangents g^1, g^2 stacked as (..., 3, 2)
    dual: np.ndarray


def _surface_basics(chart: Chart, uv):
    uv = np.asarray(uv, dtype=float)
    G = chart.jac(uv)
    g1, g2 = G[..., 0], G[..., 1]
    c = np.cross(g1, g2)
    area = np.linalg.norm(c, axis=-1)
    eps = DEGENERACY_TOL * chart.scale**2
    if np.any(area < eps):
        where = uv[area < eps]
        raise DegenerateGeometryError(f"degenerate tangents at parameters {where[:3].tolist()}")
    metric = np.einsum("...ka,...kb->...ab", G, G)
    dual = np.einsum("...ka,...ab->...kb", G, np.linalg.inv(metric))
    return uv, G, c, area, dual


def surface_frame(chart: Chart, uv) -> SurfaceData:
    """Full differential-geometric frame of a surface chart at ``uv``."""
    uv, G, c, area, dual = _surface_basics(chart, uv)
    n = c / area[..., None]
    P = IDENTITY - outer(n, n)
    Q = outer(n, n)
    W, H, K = _weingarten_from(chart, uv, G, c, area, n, dual)
    return SurfaceData(chart.map(uv), G[..., 0], G[..., 1], n, P, Q, W, H, K, area, dual)


def _weingarten_from(chart, uv, G, c, area, n, dual):
    Hs = chart.hess(uv)
    g1, g2 = G[..., 0], G[..., 1]
    # d g_i / d xi_a = Hs[..., :, i, a]
    dn = []
    for a in range(2):
        dg1 = Hs[..., :, 0, a]
        dg2 = Hs[..., :, 1, a]
        dc = np.cross(dg1, g2) + np.cross(g1, dg2)
        dn.append((dc - n * np.einsum("...k,...k->...", n, dc)[..., None]) / area[..., None])
    # W = -n_{,a} (x) g^a
    W = -(outer(dn[0], dual[..., 0]) + outer(dn[1], dual[..., 1]))
    # 2x2 mixed components M[a, b] = <g^a, W g_b>
    M = np.einsum("...ka,...kl,...lb->...ab", dual, W, G)
    H = 0.5 * (M[..., 0, 0] + M[..., 1, 1])
    K = M[..., 0, 0] * M[..., 1, 1] - M[..., 0, 1] * M[..., 1, 0]
    return W, H, K


def weingarten(chart: Chart, uv) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Return ``(W, H, K)`` with ``W = -D_t n``."""
    uv, G, c, area, dual = _surface_basics(chart, uv)
    n = c / area[..., None]
    return _weingarten_from(chart, uv, G, c, area, n, dual)


def shell_shifter(H, K, zeta):
    """Volume factor ``1 - 2 H zeta + K zeta^2``."""
    return 1.0 - 2.0 * np.asarray(H) * zeta + np.asarray(K) * np.asarray(zeta) ** 2


def chart_gradient(chart: Chart, field, point, field_grad=None, step: float = 1e-5) -> np.ndarray:
    """Gradient of a field ``lambda(xi, eta, zeta)`` on the shell volume ``x = r + zeta n``.

    Uses ``grad = (P - zeta J W J^T) grad_t / shifter + lambda_zeta n`` with
    ``J = anti(n) P`` the quarter turn in the tangent plane; this equals
    ``((1 - 2 H zeta) P + zeta W) grad_t / shifter``. ``field_grad``
    returns parameter partials ``(d/dxi, d/deta, d/dzeta)``; without it they are taken by central
    differences in parameter space.
    """
    point = np.asarray(point, dtype=float)
    uv, zeta = point[:2], float(point[2])
    if field_grad is not None:
        partials = np.asarray(field_grad(point), dtype=float)
    else:
        partials = np.empty(3)
        for i in range(3):
            e = np.zeros(3)
            e[i] = step
            partials[i] = (field(point + e) - field(point - e)) / (2 * step)
    sd = surface_frame(chart, uv)
    shift = float(shell_shifter(sd.H, sd.K, zeta))
    if abs(shift) < DEGENERACY_TOL:
        raise DegenerateGeometryError(f"vanishing shell shifter at {point.tolist()}")
    grad_t = partials[0] * sd.dual[:, 0] + partials[1] * sd.dual[:, 1]
    J = anti(sd.n) @ sd.P
    M = sd.P - zeta * J @ sd.W @ J.T
    return M @ grad_t / shift + partials[2] * sd.n


# ---------------------------------------------------------------------------
# curves


@dataclass
class CurveData:
    point: np.ndarray
    t: np.ndarray
    n: np.ndarray
    c: np.ndarray
    kn: np.ndarray
    kc: np.ndarray
    tau: np.ndarray
    arclength_jacobian: np.ndarray


def curve_frame(chart: Chart, s, n_ref) -> CurveData:
    """Frame ``(t, n, c)`` with ``n = normalize(Q n_ref)`` and ``c = t x n``.

    Curvatures and torsion are with respect to arclength.
    """
    s = np.asarray(s, dtype=float)
    xi = s[..., None] if (s.ndim == 0 or s.shape[-1] != 1) else s
    rp = chart.jac(xi)[..., 0]
    rpp = chart.hess(xi)[..., 0, 0]
    speed = np.linalg.norm(rp, axis=-1)
    if np.any(speed < DEGENERACY_TOL * chart.scale):
        raise DegenerateGeometryError("degenerate curve tangent")
    t = rp / speed[..., None]
    ts = (rpp - t * np.einsum("...k,...k->...", t, rpp)[..., None]) / speed[..., None] ** 2
    nref = np.broadcast_to(np.asarray(n_ref, dtype=float), t.shape)
    td = np.einsum("...k,...k->...", t, nref)
    m = nref - t * td[..., None]
    mnorm = np.linalg.norm(m, axis=-1)
    if np.any(mnorm < 1e-8 * np.linalg.norm(nref, axis=-1)):
        raise DegenerateGeometryError("n_ref is parallel to the curve tangent")
    n = m / mnorm[..., None]
    c = np.cross(t, n)
    ms = -ts * td[..., None] - t * np.einsum("...k,...k->...", ts, nref)[..., None]
    ns = (ms - n * np.einsum("...k,...k->...", n, ms)[..., None]) / mnorm[..., None]
    kn = np.einsum("...k,...k->...", ts, n)
    kc = np.einsum("...k,...k->...", ts, c)
    tau = np.einsum("...k,...k->...", ns, c)
    return CurveData(chart.map(xi), t, n, c, kn, kc, tau, speed)


def beam_shifter(kn, kc, eta, zeta):
    """Beam volume factor ``1 - kn eta - kc zeta``."""
    return 1.0 - np.asarray(kn) * eta - np.asarray(kc) * zeta


def thickness_integrals(a, b, c, h) -> tuple[float, float, float]:
    """Closed forms of ``int (a + b z)^2 c z^k dz`` over ``[-h/2, h/2]``, k = 0, 1, 2.

    The ``k = 2`` form keeps only the ``a^2`` part; the ``b`` contributions are
    of higher order in ``h`` and dropped.
    """
    if h <= 0:
        raise ValueError(f"thickness must be positive, got {h}")
    i0 = c * h * a**2 + c * h**3 * b**2 / 12.0
    i1 = c * h**3 * a * b / 6.0
    i2 = c * h**3 * a**2 / 12.0
    return i0, i1, i2
