from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cosserat_mixdim.geometry import circle_arc_chart, curve_frame, cylinder_chart, sphere_chart, surface_frame
from cosserat_mixdim.models import (
    BeamFrame,
    BeamSection,
    CosseratMaterial,
    KernelSpec,
    ShellFrame,
    ShellSection,
    beam_frame_from,
    beam_kernel,
    beam_terms,
    cauchy_limit_material,
    circle_section,
    eval_load,
    load_density,
    membrane_kernel,
    micro_beam_kernel,
    plane_stress_lambda,
    plate_kernel,
    pointwise_form,
    poisson_ratio,
    shell_frame_from,
    shell_kernel,
    straight_beam_kernel,
    volume_kernel,
    youngs_modulus,
)

GRAPHITE = CosseratMaterial(2122.64, 289.451, 1e4, couple_moduli=(10867.9, 122264.0, 0.0))
GENERIC = CosseratMaterial(3.0, 2.0, 0.7, Lc=1.3, a=(0.4, 1.1, 2.5))
SEED = st.integers(0, 2**32 - 1)


# independent oracles written out index by index ---------------------------


def _anti(v):
    x, y, z = v
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def _ce(S, mu, lam):
    return 2 * mu * np.sum(S * S) + lam * np.trace(S) ** 2


def _norm_L(X, k):
    S = 0.5 * (X + X.T)
    D = S - np.trace(S) / 3 * np.eye(3)
    W = 0.5 * (X - X.T)
    return k[0] * np.sum(D * D) + k[1] * np.sum(W * W) + k[2] / 3 * np.trace(X) ** 2


def _sym(X):
    return 0.5 * (X + X.T)


def _skw(X):
    return 0.5 * (X - X.T)


def _nye(Dth):
    return np.trace(Dth) * np.eye(3) - Dth.T


def _volume_oracle(m, Du, th, Dth):
    k = m.couple
    return _ce(_sym(Du), m.mu_e, m.lambda_e) + 2 * m.mu_c * np.sum((_skw(Du) - _anti(th)) ** 2) + _norm_L(_nye(Dth), k)


def _shell_oracle(m, h, n, W, Dtv, th, Dtth, bending=True, curvature=True):
    P = np.eye(3) - np.outer(n, n)
    Q = np.outer(n, n)
    Th = _anti(th)
    lam = 2 * m.lambda_e * m.mu_e / (m.lambda_e + 2 * m.mu_e)
    Dcov = P @ Dtv
    e = h * _ce(_sym(Dcov), m.mu_e, lam)
    e += 2 * m.mu_c * h * np.sum((_skw(Dcov) - P @ Th @ P) ** 2)
    e += (m.mu_e + m.mu_c) * h * np.sum((Q @ (Dtv - Th @ P)) ** 2)
    if bending:
        B = P @ _anti(n) @ P @ Dtth + (P @ Th @ W if curvature else 0)
        e += h**3 / 12 * (_ce(_sym(B), m.mu_e, lam) + 2 * m.mu_c * np.sum(_skw(B) ** 2))
        if curvature:
            e += (m.mu_e + m.mu_c) * h**3 / 12 * np.sum((Q @ Th @ W) ** 2)
    e += h * _norm_L(_nye(Dtth), m.couple)
    return e


def _beam_oracle(m, s, f, Dtv, th, Dtth):
    t, n, c = f.t, f.n, f.c
    P = np.outer(t, t)
    Q = np.eye(3) - P
    Th = _anti(th)
    E = m.mu_e * (3 * m.lambda_e + 2 * m.mu_e) / (m.lambda_e + m.mu_e)
    G = m.mu_e + m.mu_c
    e = E * s.A * np.sum(_sym(P @ Dtv) ** 2)
    e += E * s.I_zeta * np.sum(_sym(P @ _anti(n) @ Dtth) ** 2) + E * s.I_eta * np.sum(_sym(P @ _anti(c) @ Dtth) ** 2)
    e += G * s.A * np.sum((Q @ (Dtv - Th @ P)) ** 2)
    e += G * s.I_zeta * np.sum((Q @ (_anti(n) @ Dtth + f.kn * Th @ P)) ** 2)
    e += G * s.I_eta * np.sum((Q @ (_anti(c) @ Dtth + f.kc * Th @ P)) ** 2)
    e += s.A * _norm_L(_nye(Dtth), m.couple)
    return e


def _sphere_frame(uv=(0.9, 0.4), R=2.0):
    return shell_frame_from(surface_frame(sphere_chart(R), uv))


def _arc_frame(phi=0.6, R=50.0):
    cd = curve_frame(circle_arc_chart(R, [10.0, 0.0, -R], 0), np.array(phi), np.array([1.0, 0.0, 0.0]))
    f = beam_frame_from(cd)
    return BeamFrame(f.t, f.n, f.c, float(f.kn), float(f.kc), None)


def _line_frame():
    e = np.eye(3)
    return BeamFrame(e[0], e[1], e[2], 0.0, 0.0, None)


# material helpers ---------------------------------------------------------


def test_plane_stress_lambda():
    assert plane_stress_lambda(0.0, 1.0) == 0.0
    assert plane_stress_lambda(2.0, 1.0) == pytest.approx(1.0)
    lam, mu = 289.451, 2122.64
    assert plane_stress_lambda(lam, mu) == pytest.approx(2 * 289.451 * 2122.64 / (289.451 + 4245.28), rel=1e-12)
    with pytest.raises(ValueError):
        plane_stress_lambda(-3.0, 1.0)


def test_youngs_modulus_and_poisson():
    assert youngs_modulus(0.0, 4.0) == 8.0
    assert youngs_modulus(98.5, 30.0) == pytest.approx(82.996, abs=5e-4)
    assert poisson_ratio(5.328, 0.34) == pytest.approx(0.47, abs=5e-3)
    assert poisson_ratio(98.5, 30.0) == pytest.approx(0.38, abs=5e-3)
    with pytest.raises(ValueError):
        youngs_modulus(-1.0, 1.0)


def test_cauchy_limit_recipe():
    m = cauchy_limit_material(0.34, 5.328)
    assert (m.mu_e, m.lambda_e, m.mu_c, m.Lc, m.a) == (0.34, 5.328, 1.0, 1e-2, (1.0, 1.0, 1.0))
    assert m.with_(Lc=10.0).Lc == 10.0
    with pytest.raises(ValueError):
        cauchy_limit_material(0.0, 1.0)


def test_material_validation_and_couple():
    with pytest.raises(ValueError):
        CosseratMaterial(0.0, 1.0, 1.0)
    with pytest.raises(ValueError):
        CosseratMaterial(1.0, -1.0, 1.0)
    with pytest.raises(ValueError):
        CosseratMaterial(1.0, 1.0, -1.0)
    assert GENERIC.couple == pytest.approx((3.0 * 1.69 * 0.4, 3.0 * 1.69 * 1.1, 3.0 * 1.69 * 2.5))
    assert GRAPHITE.couple == (10867.9, 122264.0, 0.0)


def test_circle_section():
    s = circle_section(0.8)
    assert s.A == pytest.approx(0.64 * np.pi, rel=1e-15)
    assert s.I_eta == s.I_zeta == pytest.approx(0.1024 * np.pi, rel=1e-15)
    u = circle_section(1.0)
    assert (u.A, u.I_eta) == pytest.approx((np.pi, np.pi / 4))
    assert u.I_p == 2 * u.I_eta
    with pytest.raises(ValueError):
        circle_section(0.0)
    with pytest.raises(ValueError):
        ShellSection(0.0)
    with pytest.raises(ValueError):
        BeamSection(1.0, 1.0, 1.0, "twisted")


# volume ---------------------------------------------------------------------


def test_volume_examples():
    m = CosseratMaterial(1.0, 0.0, 5.0)
    assert volume_kernel(m, np.eye(3), np.zeros(3), np.zeros((3, 3))) == pytest.approx(6.0)
    b = np.array([0.3, -1.2, 0.5])
    assert volume_kernel(GENERIC, _anti(b), b, np.zeros((3, 3))) == pytest.approx(0.0, abs=1e-28)


@given(SEED)
def test_volume_matches_oracle(seed):
    rng = np.random.default_rng(seed)
    Du, th, Dth = rng.standard_normal((3, 3)), rng.standard_normal(3), rng.standard_normal((3, 3))
    for m in (GENERIC, GRAPHITE):
        assert volume_kernel(m, Du, th, Dth) == pytest.approx(_volume_oracle(m, Du, th, Dth), rel=1e-12)


@given(SEED)
def test_cauchy_reduction(seed):
    rng = np.random.default_rng(seed)
    Du, Dth = rng.standard_normal((3, 3)), rng.standard_normal((3, 3))
    m = GENERIC.with_(Lc=0.0)
    W = _skw(Du)
    th = np.array([W[2, 1], W[0, 2], W[1, 0]])
    assert volume_kernel(m, Du, th, Dth) == pytest.approx(_ce(_sym(Du), m.mu_e, m.lambda_e), rel=1e-13)
    assert volume_kernel(GENERIC, Du, th, Dth, "cauchy") == pytest.approx(_ce(_sym(Du), 3.0, 2.0), rel=1e-13)


# shells ---------------------------------------------------------------------


def _random_surface_inputs(rng, frame):
    P = np.eye(3) - np.outer(frame.n, frame.n)
    return rng.standard_normal((3, 3)) @ P, rng.standard_normal(3), rng.standard_normal((3, 3)) @ P


@given(SEED)
def test_shell_variants_match_oracle_on_sphere(seed):
    rng = np.random.default_rng(seed)
    f = _sphere_frame()
    sec = ShellSection(1.6)
    Dtv, th, Dtth = _random_surface_inputs(rng, f)
    args = (None, Dtv, th, Dtth)
    full = shell_kernel(GRAPHITE, sec, f, *args)
    assert full == pytest.approx(_shell_oracle(GRAPHITE, 1.6, f.n, f.W, Dtv, th, Dtth), rel=1e-12)
    plate = plate_kernel(GRAPHITE, sec, f, *args)
    assert plate == pytest.approx(_shell_oracle(GRAPHITE, 1.6, f.n, f.W, Dtv, th, Dtth, curvature=False), rel=1e-12)
    memb = membrane_kernel(GRAPHITE, sec, f, *args)
    assert memb == pytest.approx(_shell_oracle(GRAPHITE, 1.6, f.n, f.W, Dtv, th, Dtth, bending=False), rel=1e-12)


@given(SEED)
def test_shell_minus_membrane_is_cubic_in_h(seed):
    rng = np.random.default_rng(seed)
    f = _sphere_frame()
    Dtv, th, Dtth = _random_surface_inputs(rng, f)
    diffs = [shell_kernel(GRAPHITE, ShellSection(h), f, None, Dtv, th, Dtth) - membrane_kernel(GRAPHITE, ShellSection(h), f, None, Dtv, th, Dtth) for h in (1.0, 2.0)]
    assert diffs[1] == pytest.approx(8 * diffs[0], rel=1e-10)


def test_shell_reductions_and_limits(rng):
    plane = ShellFrame(np.array([0.0, 0.0, 1.0]), np.zeros((3, 3)))
    Dtv, th, Dtth = _random_surface_inputs(rng, plane)
    sec = ShellSection(0.5)
    assert shell_kernel(GENERIC, sec, plane, None, Dtv, th, Dtth) == pytest.approx(plate_kernel(GENERIC, sec, plane, None, Dtv, th, Dtth), rel=1e-14)
    small = [shell_kernel(GENERIC, ShellSection(h), plane, None, Dtv, th, Dtth) / h for h in (1e-4, 1e-5)]
    assert small[0] == pytest.approx(small[1], rel=1e-6)
    z = np.zeros((3, 3))
    for kern in (shell_kernel, plate_kernel, membrane_kernel):
        assert kern(GENERIC, sec, plane, None, z, np.zeros(3), z) == 0.0


def test_plate_pure_drill():
    plane = ShellFrame(np.array([0.0, 0.0, 1.0]), np.zeros((3, 3)))
    theta0, h = 0.37, 1.6
    z = np.zeros((3, 3))
    got = plate_kernel(GENERIC, ShellSection(h), plane, None, z, theta0 * plane.n, z)
    P = np.diag([1.0, 1.0, 0.0])
    PTP = P @ _anti(theta0 * plane.n) @ P
    np.testing.assert_allclose(PTP, theta0 * _anti(plane.n))
    assert got == pytest.approx(2 * GENERIC.mu_c * h * np.sum(PTP**2), rel=1e-14)
    assert got == pytest.approx(4 * GENERIC.mu_c * h * theta0**2, rel=1e-14)


@given(SEED)
def test_drill_identification(seed):
    rng = np.random.default_rng(seed)
    for f in (_sphere_frame(), shell_frame_from(surface_frame(cylinder_chart(3.0), (0.4, 1.0)))):
        P = np.eye(3) - np.outer(f.n, f.n)
        Dtv, th, _ = _random_surface_inputs(rng, f)
        R = _skw(P @ Dtv) - P @ _anti(th) @ P
        An = _anti(f.n)
        coef = np.sum(R * An) / np.sum(An * An)
        assert np.abs(R - coef * An).max() < 1e-12 * max(1.0, np.abs(R).max())


# beams ----------------------------------------------------------------------


def _random_curve_inputs(rng, frame):
    P = np.outer(frame.t, frame.t)
    return rng.standard_normal((3, 3)) @ P, rng.standard_normal(3), rng.standard_normal((3, 3)) @ P


@given(SEED)
def test_beam_variants_match_oracle(seed):
    rng = np.random.default_rng(seed)
    sec = BeamSection(2.0, 0.3, 0.7)
    for f in (_arc_frame(), _line_frame()):
        Dtv, th, Dtth = _random_curve_inputs(rng, f)
        assert beam_kernel(GRAPHITE, sec, f, None, Dtv, th, Dtth) == pytest.approx(_beam_oracle(GRAPHITE, sec, f, Dtv, th, Dtth), rel=1e-12)
        micro = BeamSection(2.0, 0.0, 0.0)
        assert micro_beam_kernel(GRAPHITE, sec, f, None, Dtv, th, Dtth) == pytest.approx(_beam_oracle(GRAPHITE, micro, f, Dtv, th, Dtth), rel=1e-12)
    f = _line_frame()
    Dtv, th, Dtth = _random_curve_inputs(rng, f)
    assert straight_beam_kernel(GRAPHITE, sec, f, None, Dtv, th, Dtth) == pytest.approx(beam_kernel(GRAPHITE, sec, f, None, Dtv, th, Dtth), rel=1e-12)


def test_micro_beam_has_three_terms(rng):
    f = _arc_frame()
    terms = beam_terms(GRAPHITE, BeamSection(1.0, 1.0, 1.0, "micro"), f, None, *_random_curve_inputs(rng, f))
    assert [t.name for t in terms] == ["axial", "shear", "dislocation"]


@given(SEED)
def test_warp_identity(seed):
    rng = np.random.default_rng(seed)
    for f in (_arc_frame(0.3), _arc_frame(2.0), _line_frame()):
        _, th, Dtth = _random_curve_inputs(rng, f)
        P = np.outer(f.t, f.t)
        Q = np.eye(3) - P
        Th = _anti(th)
        div = np.trace(Dtth)
        lhs_n = Q @ _anti(f.n) @ Dtth + f.kn * Q @ Th @ P
        lhs_c = Q @ _anti(f.c) @ Dtth + f.kc * Q @ Th @ P
        assert np.abs(lhs_n - (f.kn * Q @ Th @ P - div * np.outer(f.c, f.t))).max() < 1e-12
        assert np.abs(lhs_c - (div * np.outer(f.n, f.t) + f.kc * Q @ Th @ P)).max() < 1e-12


def test_axial_stretch_example():
    f = _line_frame()
    alpha = 0.013
    Dv = np.zeros((3, 3))
    Dv[0, 0] = alpha
    sec = circle_section(0.8, "straight")
    got = straight_beam_kernel(GRAPHITE, sec, f, None, Dv, np.zeros(3), np.zeros((3, 3)))
    E = youngs_modulus(GRAPHITE.lambda_e, GRAPHITE.mu_e)
    assert got == pytest.approx(E * sec.A * alpha**2, rel=1e-14)


def test_torsion_is_rejected():
    e = np.eye(3)
    f = BeamFrame(e[0], e[1], e[2], 0.0, 0.0, 0.1)
    z = np.zeros((3, 3))
    with pytest.raises(ValueError, match="torsion"):
        beam_kernel(GRAPHITE, circle_section(0.8), f, None, z, np.zeros(3), z)


# rigid motions --------------------------------------------------------------


def _rigid_surface(b):
    return _anti(b), b, np.zeros((3, 3))


@settings(max_examples=100)
@given(SEED)
def test_rigid_motions_are_null_for_invariant_kernels(seed):
    rng = np.random.default_rng(seed)
    b = rng.standard_normal(3)
    z = np.zeros((3, 3))
    # densities are O(modulus * |b|^2); 1e5 bounds the graphite moduli
    tol = 1e-24 * 1e5 * np.sum(b * b)
    assert volume_kernel(GRAPHITE, _anti(b), b, z) <= tol
    assert volume_kernel(GRAPHITE, _anti(b), b, z, "cauchy") <= tol
    sphere = _sphere_frame(tuple(rng.uniform([0.3, 0.0], [2.8, 6.0])))
    plane = ShellFrame(np.array([0.0, 0.0, 1.0]), np.zeros((3, 3)))
    sec = ShellSection(1.6)
    for f in (sphere, plane):
        P = np.eye(3) - np.outer(f.n, f.n)
        Dv, th, Dth = _anti(b) @ P, b, z
        assert plate_kernel(GRAPHITE, sec, f, None, Dv, th, Dth) < tol
        assert membrane_kernel(GRAPHITE, sec, f, None, Dv, th, Dth) < tol
    P = np.diag([1.0, 1.0, 0.0])
    assert shell_kernel(GRAPHITE, sec, plane, None, _anti(b) @ P, b, z) < tol
    sb = circle_section(0.8)
    for f in (_arc_frame(float(rng.uniform(0, 6))), _line_frame()):
        Pt = np.outer(f.t, f.t)
        assert straight_beam_kernel(GRAPHITE, sb, f, None, _anti(b) @ Pt, b, z) < tol
        assert micro_beam_kernel(GRAPHITE, sb, f, None, _anti(b) @ Pt, b, z) < tol
    f = _line_frame()
    assert beam_kernel(GRAPHITE, sb, f, None, _anti(b) @ np.outer(f.t, f.t), b, z) < tol


@given(SEED)
def test_curved_kernels_rigid_residual_closed_form(seed):
    """The curvature couplings of the full shell and the curved beam do not vanish on rigid motions."""
    rng = np.random.default_rng(seed)
    b = rng.standard_normal(3)
    z = np.zeros((3, 3))
    f = _sphere_frame()
    P = np.eye(3) - np.outer(f.n, f.n)
    Q = np.eye(3) - P
    h3 = 1.6**3 / 12
    lam = plane_stress_lambda(GRAPHITE.lambda_e, GRAPHITE.mu_e)
    B = P @ _anti(b) @ f.W
    expected = h3 * (_ce(_sym(B), GRAPHITE.mu_e, lam) + 2 * GRAPHITE.mu_c * np.sum(_skw(B) ** 2))
    expected += (GRAPHITE.mu_e + GRAPHITE.mu_c) * h3 * np.sum((Q @ _anti(b) @ f.W) ** 2)
    got = shell_kernel(GRAPHITE, ShellSection(1.6), f, None, _anti(b) @ P, b, z)
    assert got == pytest.approx(expected, rel=1e-12)
    fb = _arc_frame()
    Pt = np.outer(fb.t, fb.t)
    sec = circle_section(0.8)
    QTP = (np.eye(3) - Pt) @ _anti(b) @ Pt
    expected = (GRAPHITE.mu_e + GRAPHITE.mu_c) * (sec.I_zeta * fb.kn**2 + sec.I_eta * fb.kc**2) * np.sum(QTP**2)
    assert beam_kernel(GRAPHITE, sec, fb, None, _anti(b) @ Pt, b, z) == pytest.approx(expected, rel=1e-12)


# pointwise quadratic forms --------------------------------------------------


def _specs():
    return [
        (KernelSpec("volume", GENERIC), None),
        (KernelSpec("volume", GENERIC, variant="cauchy"), None),
        (KernelSpec("shell", GRAPHITE, ShellSection(1.6, "full")), _sphere_frame()),
        (KernelSpec("shell", GRAPHITE, ShellSection(1.6, "plate")), _sphere_frame()),
        (KernelSpec("shell", GRAPHITE, ShellSection(1.6, "membrane")), _sphere_frame()),
        (KernelSpec("beam", GRAPHITE, circle_section(0.8, "curved")), _arc_frame()),
        (KernelSpec("beam", GRAPHITE, circle_section(0.8, "straight")), _arc_frame()),
        (KernelSpec("beam", GRAPHITE, circle_section(0.8, "micro")), _arc_frame()),
    ]


def _batched(frame):
    if frame is None:
        return None
    if isinstance(frame, ShellFrame):
        return ShellFrame(frame.n[None], frame.W[None])
    return BeamFrame(frame.t[None], frame.n[None], frame.c[None], np.array([frame.kn]), np.array([frame.kc]), None)


@pytest.mark.parametrize("idx", range(8))
def test_pointwise_form_reproduces_density(idx, rng):
    spec, frame = _specs()[idx]
    C = pointwise_form(spec, _batched(frame))[0]
    np.testing.assert_allclose(C, C.T, rtol=0, atol=1e-12 * np.abs(C).max())
    assert np.linalg.eigvalsh(C).min() > -1e-10 * np.abs(C).max()
    for _ in range(5):
        x = rng.standard_normal(24)
        X = x.reshape(6, 4)
        v, Dv, th, Dth = X[:3, 0], X[:3, 1:], X[3:, 0], X[3:, 1:]
        dens = spec.density(v, Dv, th, Dth, frame)
        assert x @ C @ x == pytest.approx(float(dens), rel=1e-11)


# loads ----------------------------------------------------------------------


def test_load_helpers():
    x = np.array([[0.0, 0.0, 100.0], [0.0, 0.0, -100.0]])
    q = eval_load(lambda p: np.stack([0 * p[..., 0], -1e-4 * p[..., 2], 0 * p[..., 0]], -1), x)
    np.testing.assert_allclose(q, [[0, -1e-2, 0], [0, 1e-2, 0]])
    np.testing.assert_array_equal(eval_load((0, 0, -1e-6), x), [[0, 0, -1e-6]] * 2)
    u, th = np.array([1.0, 2.0, 3.0]), np.array([0.5, 0.0, -1.0])
    m = np.array([2.0, 1.0, 1.0])
    assert load_density(u, th, np.array([0, 0, 1.0]), m) == pytest.approx(3.0 + 2 * (1.0 - 1.0))
    # the skew pairing <anti th, anti m> equals 2 <th, m>
    assert np.sum(_anti(th) * _anti(m)) == pytest.approx(2 * th @ m)
    assert load_density(u, th) == 0.0
