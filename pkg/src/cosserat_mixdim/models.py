"""Materials, sections and the pointwise energy kernels.

Every kernel is a nonnegative quadratic form written as a sum of weighted
squared norms of tensors that depend linearly on the pointwise field data
``(v, Dv, theta, Dtheta)``. Kernels are therefore described as lists of
:class:`Term`; the density and the pointwise quadratic form used by assembly
are both derived from the same term list.

Densities are un-halved; the 1/2 of the energy lives in assembly.
Units: N, mm, MPa.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .tensor import IDENTITY, anti, dev, nye_curl, outer, skw, sym

# pointwise input layout: 6 components x (value, d/dx, d/dy, d/dz)
N_FIELD = 6
N_SLOT = 4
N_INPUT = N_FIELD * N_SLOT

TORSION_TOL = 1e-8


# ---------------------------------------------------------------------------
# materials and sections


@dataclass(frozen=True)
class CosseratMaterial:
    """Isotropic linear Cosserat material.

    Attributes:
        mu_e, lambda_e: Lame constants (MPa).
        mu_c: Cosserat couple modulus (MPa).
        Lc: characteristic length (mm).
        a: weights ``(a1, a2, a3)`` of the curvature norm.
        couple_moduli: optional products ``mu_e * Lc^2 * a_i`` (N) used
            directly when the factors are not known individually.
    """

    mu_e: float
    lambda_e: float
    mu_c: float
    Lc: float = 1.0
    a: tuple[float, float, float] = (1.0, 1.0, 1.0)
    couple_moduli: tuple[float, float, float] | None = None

    def __post_init__(self):
        if not self.mu_e > 0:
            raise ValueError(f"mu_e must be positive, got {self.mu_e}")
        if self.lambda_e < 0:
            raise ValueError(f"lambda_e must be nonnegative, got {self.lambda_e}")
        if self.mu_c < 0:
            raise ValueError(f"mu_c must be nonnegative, got {self.mu_c}")
        if self.Lc < 0:
            raise ValueError(f"Lc must be nonnegative, got {self.Lc}")
        if min(self.a) < 0:
            raise ValueError(f"curvature weights must be nonnegative, got {self.a}")
        if self.couple_moduli is not None and min(self.couple_moduli) < 0:
            raise ValueError(f"couple moduli must be nonnegative, got {self.couple_moduli}")

    @property
    def couple(self) -> tuple[float, float, float]:
        """Coefficients of the curvature norm, ``mu_e Lc^2 a_i`` (N)."""
        if self.couple_moduli is not None:
            return tuple(float(k) for k in self.couple_moduli)
        s = self.mu_e * self.Lc**2
        return (s * self.a[0], s * self.a[1], s * self.a[2])

    def with_(self, **changes) -> "CosseratMaterial":
        return replace(self, **changes)


def plane_stress_lambda(lambda_e: float, mu_e: float) -> float:
    """``2 lambda mu / (lambda + 2 mu)``."""
    if not mu_e > 0:
        raise ValueError(f"mu_e must be positive, got {mu_e}")
    den = lambda_e + 2 * mu_e
    if den <= 0:
        raise ValueError("lambda + 2 mu must be positive")
    return 2 * lambda_e * mu_e / den


def youngs_modulus(lambda_e: float, mu_e: float) -> float:
    """``mu (3 lambda + 2 mu) / (lambda + mu)``."""
    den = lambda_e + mu_e
    if den <= 0:
        raise ValueError("lambda + mu must be positive")
    return mu_e * (3 * lambda_e + 2 * mu_e) / den


def poisson_ratio(lambda_e: float, mu_e: float) -> float:
    return lambda_e / (2 * (lambda_e + mu_e))


def cauchy_limit_material(mu_M: float, lambda_M: float, Lc: float = 1e-2) -> CosseratMaterial:
    """Cosserat parameters that reproduce a classical solid: ``mu_c = 1``, identity curvature norm."""
    if not mu_M > 0:
        raise ValueError(f"mu must be positive, got {mu_M}")
    return CosseratMaterial(mu_M, lambda_M, 1.0, Lc, (1.0, 1.0, 1.0))


SHELL_VARIANTS = ("full", "plate", "membrane")
BEAM_VARIANTS = ("curved", "straight", "micro")
VOLUME_VARIANTS = ("cosserat", "cauchy")


@dataclass(frozen=True)
class ShellSection:
    h: float
    variant: str = "full"

    def __post_init__(self):
        if not self.h > 0:
            raise ValueError(f"thickness must be positive, got {self.h}")
        if self.variant not in SHELL_VARIANTS:
            raise ValueError(f"shell variant must be one of {SHELL_VARIANTS}, got {self.variant!r}")


@dataclass(frozen=True)
class BeamSection:
    """Cross-section data; ``I_eta = int zeta^2``, ``I_zeta = int eta^2``."""

    A: float
    I_eta: float
    I_zeta: float
    variant: str = "curved"

    def __post_init__(self):
        if not self.A > 0:
            raise ValueError(f"area must be positive, got {self.A}")
        if self.I_eta < 0 or self.I_zeta < 0:
            raise ValueError("second moments must be nonnegative")
        if self.variant not in BEAM_VARIANTS:
            raise ValueError(f"beam variant must be one of {BEAM_VARIANTS}, got {self.variant!r}")

    @property
    def I_p(self) -> float:
        return self.I_eta + self.I_zeta


def circle_section(r: float, variant: str = "curved") -> BeamSection:
    if not r > 0:
        raise ValueError(f"radius must be positive, got {r}")
    I = np.pi * r**4 / 4
    return BeamSection(np.pi * r**2, I, I, variant)


@dataclass
class LoadSpec:
    """External loads by region or boundary tag.

    Values are constant 3-vectors or callables ``x -> (..., 3)`` of the
    physical position. Couples are given as axial vectors.
    """

    body: dict[str, object] = field(default_factory=dict)
    body_couple: dict[str, object] = field(default_factory=dict)
    surface: dict[str, object] = field(default_factory=dict)
    surface_couple: dict[str, object] = field(default_factory=dict)
    line: dict[str, object] = field(default_factory=dict)
    line_couple: dict[str, object] = field(default_factory=dict)

    def is_empty(self) -> bool:
        return not any((self.body, self.body_couple, self.surface, self.surface_couple, self.line, self.line_couple))


def eval_load(value, x: np.ndarray) -> np.ndarray:
    """Evaluate a load value at points ``x (..., 3)``."""
    if callable(value):
        out = np.asarray(value(x), dtype=float)
    else:
        out = np.asarray(value, dtype=float)
    return np.broadcast_to(out, x.shape[:-1] + (3,))


def load_density(u, theta, force=None, couple=None):
    """``<u, f> + 2 <theta, m>``: the skew pairing ``<anti theta, anti m>`` equals ``2 <theta, m>``."""
    out = np.zeros(np.shape(u)[:-1])
    if force is not None:
        out = out + np.einsum("...i,...i->...", u, force)
    if couple is not None:
        out = out + 2.0 * np.einsum("...i,...i->...", theta, couple)
    return out


# ---------------------------------------------------------------------------
# terms


@dataclass
class Term:
    """``weight * |T|^2`` in one of the norms ``frob``, ``ce`` or ``L``.

    ``params`` holds ``(mu, lam)`` for ``ce`` and ``(k1, k2, k3)`` for ``L``.
    """

    name: str
    weight: object
    tensor: np.ndarray
    norm: str = "frob"
    params: tuple = ()


def _bilinear(term: Term, A: np.ndarray, B: np.ndarray) -> np.ndarray:
    def ip(X, Y):
        return np.einsum("...ij,...ij->...", X, Y)

    if term.norm == "frob":
        return ip(A, B)
    if term.norm == "ce":
        mu, lam = term.params
        return 2 * mu * ip(A, B) + lam * np.trace(A, axis1=-2, axis2=-1) * np.trace(B, axis1=-2, axis2=-1)
    if term.norm == "L":
        k1, k2, k3 = term.params
        SA, SB = sym(A), sym(B)
        return (
            k1 * ip(dev(SA), dev(SB))
            + k2 * ip(skw(A), skw(B))
            + (k3 / 3) * np.trace(A, axis1=-2, axis2=-1) * np.trace(B, axis1=-2, axis2=-1)
        )
    raise ValueError(f"unknown norm {term.norm!r}")


def terms_density(terms: Sequence[Term]) -> np.ndarray:
    total = 0.0
    for t in terms:
        total = total + np.asarray(t.weight) * _bilinear(t, t.tensor, t.tensor)
    return total


def term_densities(terms: Sequence[Term]) -> dict[str, np.ndarray]:
    return {t.name: np.asarray(t.weight) * _bilinear(t, t.tensor, t.tensor) for t in terms}


# ---------------------------------------------------------------------------
# frames passed to kernels


@dataclass
class ShellFrame:
    n: np.ndarray
    W: np.ndarray

    @property
    def P(self):
        return IDENTITY - outer(self.n, self.n)

    @property
    def Q(self):
        return outer(self.n, self.n)


@dataclass
class BeamFrame:
    t: np.ndarray
    n: np.ndarray
    c: np.ndarray
    kn: np.ndarray
    kc: np.ndarray
    tau: np.ndarray | None = None

    @property
    def P(self):
        return outer(self.t, self.t)

    @property
    def Q(self):
        return IDENTITY - outer(self.t, self.t)


def shell_frame_from(surface_data) -> ShellFrame:
    return ShellFrame(surface_data.n, surface_data.W)


def beam_frame_from(curve_data) -> BeamFrame:
    return BeamFrame(curve_data.t, curve_data.n, curve_data.c, curve_data.kn, curve_data.kc, curve_data.tau)


# ---------------------------------------------------------------------------
# kernel term lists


def volume_terms(mat: CosseratMaterial, v, Dv, theta, Dtheta, variant: str = "cosserat") -> list[Term]:
    terms = [Term("strain", 1.0, sym(Dv), "ce", (mat.mu_e, mat.lambda_e))]
    if variant == "cauchy":
        return terms
    if variant != "cosserat":
        raise ValueError(f"volume variant must be one of {VOLUME_VARIANTS}, got {variant!r}")
    terms.append(Term("rotation", 2 * mat.mu_c, skw(Dv) - anti(theta)))
    curl = nye_curl(np.trace(Dtheta, axis1=-2, axis2=-1), Dtheta)
    terms.append(Term("curvature", 1.0, curl, "L", mat.couple))
    return terms


def shell_terms(mat: CosseratMaterial, sec: ShellSection, frame: ShellFrame, v, Dt_v, theta, Dt_theta) -> list[Term]:
    """Terms of the shell density; ``Dt_v`` and ``Dt_theta`` are right-projected gradients."""
    h = sec.h
    n = frame.n
    P, Q = frame.P, frame.Q
    Theta = anti(theta)
    lam_s = plane_stress_lambda(mat.lambda_e, mat.mu_e)
    De = (mat.mu_e, lam_s)
    Dcov_v = P @ Dt_v
    ThetaP = Theta @ P
    terms = [
        Term("membrane", h, sym(Dcov_v), "ce", De),
        Term("drill", 2 * mat.mu_c * h, skw(Dcov_v) - P @ ThetaP),
        Term("shear", (mat.mu_e + mat.mu_c) * h, Q @ (Dt_v - ThetaP)),
    ]
    if sec.variant != "membrane":
        h3 = h**3 / 12
        B = P @ anti(n) @ P @ Dt_theta
        if sec.variant == "full":
            B = B + P @ Theta @ frame.W
        terms += [
            Term("bending", h3, sym(B), "ce", De),
            Term("bending_skew", 2 * mat.mu_c * h3, skw(B)),
        ]
        if sec.variant == "full":
            terms.append(Term("curvature_shear", (mat.mu_e + mat.mu_c) * h3, Q @ Theta @ frame.W))
    div = np.trace(Dt_theta, axis1=-2, axis2=-1)
    terms.append(Term("dislocation", h, nye_curl(div, Dt_theta), "L", mat.couple))
    return terms


def _check_torsion(frame: BeamFrame):
    if frame.tau is not None and np.any(np.abs(frame.tau) > TORSION_TOL * (1 + np.abs(frame.kn) + np.abs(frame.kc))):
        raise ValueError("beam frame has nonzero torsion; twisted cross-sections are not supported")


def beam_terms(mat: CosseratMaterial, sec: BeamSection, frame: BeamFrame, v, Dt_v, theta, Dt_theta) -> list[Term]:
    _check_torsion(frame)
    E = youngs_modulus(mat.lambda_e, mat.mu_e)
    G = mat.mu_e + mat.mu_c
    P, Q = frame.P, frame.Q
    Theta = anti(theta)
    ThetaP = Theta @ P
    div = np.trace(Dt_theta, axis1=-2, axis2=-1)
    terms = [
        Term("axial", E * sec.A, sym(P @ Dt_v)),
        Term("shear", G * sec.A, Q @ (Dt_v - ThetaP)),
    ]
    if sec.variant != "micro":
        An, Ac = anti(frame.n), anti(frame.c)
        terms += [
            Term("bending_n", E * sec.I_zeta, sym(P @ An @ Dt_theta)),
            Term("bending_c", E * sec.I_eta, sym(P @ Ac @ Dt_theta)),
        ]
        if sec.variant == "curved":
            kn = np.asarray(frame.kn)[..., None, None]
            kc = np.asarray(frame.kc)[..., None, None]
            terms += [
                Term("warp_n", G * sec.I_zeta, Q @ (An @ Dt_theta + kn * ThetaP)),
                Term("warp_c", G * sec.I_eta, Q @ (Ac @ Dt_theta + kc * ThetaP)),
            ]
        else:
            terms.append(Term("torsion", G * sec.I_p, div[..., None, None]))
    terms.append(Term("dislocation", sec.A, nye_curl(div, Dt_theta), "L", mat.couple))
    return terms


# ---------------------------------------------------------------------------
# public density kernels


def volume_kernel(mat, Du, theta, Dtheta, variant: str = "cosserat"):
    return terms_density(volume_terms(mat, None, Du, theta, Dtheta, variant))


def shell_kernel(mat, sec, frame, v, Dt_v, theta, Dt_theta):
    if isinstance(sec, ShellSection) and sec.variant != "full":
        sec = replace(sec, variant="full")
    return terms_density(shell_terms(mat, sec, frame, v, Dt_v, theta, Dt_theta))


def plate_kernel(mat, sec, frame, v, Dt_v, theta, Dt_theta):
    return terms_density(shell_terms(mat, replace(sec, variant="plate"), frame, v, Dt_v, theta, Dt_theta))


def membrane_kernel(mat, sec, frame, v, Dt_v, theta, Dt_theta):
    return terms_density(shell_terms(mat, replace(sec, variant="membrane"), frame, v, Dt_v, theta, Dt_theta))


def beam_kernel(mat, sec, frame, v, Dt_v, theta, Dt_theta):
    return terms_density(beam_terms(mat, replace(sec, variant="curved"), frame, v, Dt_v, theta, Dt_theta))


def straight_beam_kernel(mat, sec, frame, v, Dt_v, theta, Dt_theta):
    return terms_density(beam_terms(mat, replace(sec, variant="straight"), frame, v, Dt_v, theta, Dt_theta))


def micro_beam_kernel(mat, sec, frame, v, Dt_v, theta, Dt_theta):
    return terms_density(beam_terms(mat, replace(sec, variant="micro"), frame, v, Dt_v, theta, Dt_theta))


# ---------------------------------------------------------------------------
# pointwise Hessians


def split_inputs(x: np.ndarray):
    """Unpack ``(..., 24)`` pointwise inputs into ``(v, Dv, theta, Dtheta)``."""
    X = x.reshape(x.shape[:-1] + (N_FIELD, N_SLOT))
    return X[..., :3, 0], X[..., :3, 1:], X[..., 3:, 0], X[..., 3:, 1:]


@dataclass
class KernelSpec:
    """Binding of a region to a kernel: ``kind`` is volume, shell or beam."""

    kind: str
    material: CosseratMaterial
    section: object = None
    variant: str = "cosserat"

    def terms(self, v, Dv, theta, Dtheta, frame=None) -> list[Term]:
        if self.kind == "volume":
            return volume_terms(self.material, v, Dv, theta, Dtheta, self.variant)
        if self.kind == "shell":
            P = frame.P
            return shell_terms(self.material, self.section, frame, v, Dv @ P, theta, Dtheta @ P)
        if self.kind == "beam":
            P = frame.P
            return beam_terms(self.material, self.section, frame, v, Dv @ P, theta, Dtheta @ P)
        raise ValueError(f"unknown kernel kind {self.kind!r}")

    def density(self, v, Dv, theta, Dtheta, frame=None):
        return terms_density(self.terms(v, Dv, theta, Dtheta, frame))


def _expand_frame(frame):
    """Insert a broadcast axis before the tensor axes of every frame field."""
    if frame is None:
        return None
    if isinstance(frame, ShellFrame):
        return ShellFrame(frame.n[:, None], frame.W[:, None])
    return BeamFrame(
        frame.t[:, None],
        frame.n[:, None],
        frame.c[:, None],
        np.asarray(frame.kn)[:, None],
        np.asarray(frame.kc)[:, None],
        None if frame.tau is None else np.asarray(frame.tau)[:, None],
    )


def pointwise_form(spec: KernelSpec, frame=None) -> np.ndarray:
    """Symmetric matrix ``C[q]`` with ``density(x) = x^T C[q] x`` over the 24 pointwise inputs.

    ``frame`` fields carry a leading batch axis ``q``; without a frame the
    result has ``q = 1``.
    """
    E = np.eye(N_INPUT)
    if frame is None:
        v, Dv, th, Dth = split_inputs(E)
        terms = spec.terms(v, Dv, th, Dth)
        nq = 1
    else:
        if isinstance(frame, BeamFrame):
            _check_torsion(frame)
            frame = replace(frame, tau=None)
        nq = len(frame.n)
        v, Dv, th, Dth = split_inputs(E[None])
        terms = spec.terms(v, Dv, th, Dth, _expand_frame(frame))
    C = np.zeros((nq, N_INPUT, N_INPUT))
    for t in terms:
        T = np.broadcast_to(t.tensor, (nq, N_INPUT) + np.shape(t.tensor)[-2:])
        C += float(t.weight) * _bilinear(t, T[:, :, None], T[:, None, :])
    return C
