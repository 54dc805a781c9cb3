import numpy as np
import pytest

from measureproj.constraints import (CurveConstraintSpec, DiffOperator, ProjectionError,
                                     apply_diff, feasibility_residuals, mixed_norm,
                                     project_box, project_curve_set, project_mixed_ball)
from measureproj.measure import ValidationError


def test_d1_example():
    op = DiffOperator(order=1, N=2, dim=2, dt=0.5)
    out = apply_diff(op, [0.0, 0.0, 0.1, 0.0])
    assert np.allclose(out, [0.0, 0.0, 0.2, 0.0])


def test_d1_constant_curve():
    op = DiffOperator(order=1, N=5, dim=2, dt=0.3)
    s = np.tile([0.4, 0.7], 5)
    assert np.abs(apply_diff(op, s)).max() == 0.0


def test_adjoint_identity():
    rng = np.random.default_rng(0)
    for order in (1, 2):
        for N, d in [(4, 1), (6, 2), (3, 3)]:
            op = DiffOperator(order=order, N=N, dim=d, dt=0.37)
            a = rng.standard_normal(N * d)
            b = rng.standard_normal(N * d)
            assert abs(op.apply(a) @ b - a @ op.apply_adjoint(b)) < 1e-12


def test_d2_is_minus_d1t_d1():
    rng = np.random.default_rng(1)
    N, d = 6, 2
    d1 = DiffOperator(order=1, N=N, dim=d, dt=0.5)
    d2 = DiffOperator(order=2, N=N, dim=d, dt=0.5)
    s = rng.standard_normal(N * d)
    assert np.allclose(d2.apply(s), -d1.apply_adjoint(d1.apply(s)))


def test_length_mismatch():
    op = DiffOperator(order=1, N=3, dim=2, dt=0.5)
    with pytest.raises(ValidationError):
        op.apply(np.zeros(5))


def test_project_box():
    assert np.allclose(project_box([-0.2, 0.5]), [0.0, 0.5])
    inside = np.array([0.3, 0.9])
    assert np.array_equal(project_box(inside), inside)


def test_project_box_variational():
    rng = np.random.default_rng(2)
    z = rng.uniform(-1, 2, 20)
    p = project_box(z)
    for _ in range(100):
        y = rng.random(20)
        assert np.linalg.norm(p - z) <= np.linalg.norm(y - z) + 1e-12


def test_mixed_norm_definitions():
    v = np.array([3.0, 4.0, 0.0, 1.0])  # blocks (3,4) and (0,1), d=2
    assert mixed_norm(v, np.inf, 2) == 5.0
    assert mixed_norm(v, 1, 2) == 6.0
    assert abs(mixed_norm(v, 2, 2) - np.sqrt(26.0)) < 1e-15


@pytest.mark.parametrize("q", [1, 2, np.inf])
def test_ball_projection_is_projection(q):
    rng = np.random.default_rng(3)
    for _ in range(40):
        d = int(rng.integers(1, 4))
        n = int(rng.integers(1, 6))
        radius = float(rng.uniform(0.5, 2.0))
        v = rng.standard_normal(n * d) * 2
        p = project_mixed_ball(v, q, radius, d)
        assert mixed_norm(p, q, d) <= radius * (1 + 1e-12)
        # no feasible point is closer than the projection
        for _ in range(40):
            y = rng.standard_normal(n * d) * 2
            norm_y = mixed_norm(y, q, d)
            if norm_y > radius:
                y = y * (radius / norm_y) * rng.random()
            assert np.linalg.norm(p - v) <= np.linalg.norm(y - v) + 1e-9


def test_curve_spec_validation():
    with pytest.raises(ValidationError):
        CurveConstraintSpec(m=3, q=2, alphas=(1.0, 1.0, 1.0), N=4, dim=2, dt=0.1)
    with pytest.raises(ValidationError):
        CurveConstraintSpec(m=1, q=7, alphas=(1.0,), N=4, dim=2, dt=0.1)
    with pytest.raises(ValidationError):
        CurveConstraintSpec(m=2, q=2, alphas=(1.0,), N=4, dim=2, dt=0.1)
    with pytest.raises(ValidationError):
        CurveConstraintSpec(m=1, q=2, alphas=(-1.0,), N=4, dim=2, dt=0.1)


def test_feasible_input_returned_unchanged():
    spec = CurveConstraintSpec(m=1, q="inf", alphas=(1.0,), N=4, dim=2, dt=0.5)
    z = np.array([0.1, 0.1, 0.2, 0.15, 0.3, 0.2, 0.4, 0.3])
    s, info = project_curve_set(spec, z)
    assert np.array_equal(s, z)
    assert info["iterations"] == 0
    assert feasibility_residuals(spec, s).max() == 0.0


def test_hand_kkt_example():
    spec = CurveConstraintSpec(m=1, q="inf", alphas=(1.0,), N=2, dim=1, dt=0.5)
    s, _ = project_curve_set(spec, np.array([0.0, 1.0]), tol=1e-10)
    assert np.abs(s - np.array([0.25, 0.75])).max() < 1e-7


def test_residual_examples():
    spec = CurveConstraintSpec(m=1, q="inf", alphas=(0.5,), N=2, dim=1, dt=1.0)
    feasible = np.array([0.2, 0.5])
    assert feasibility_residuals(spec, feasible).max() == 0.0
    speeding = np.array([0.0, 1.0])  # speed 1.0 = 2 * alpha
    res = feasibility_residuals(spec, speeding)
    assert abs(res[0] - 0.5) < 1e-12


def test_projection_residual_contract():
    rng = np.random.default_rng(4)
    for q in (1, 2, "inf"):
        spec = CurveConstraintSpec(m=1, q=q, alphas=(0.8,), N=5, dim=2, dt=0.3)
        z = rng.uniform(-0.3, 1.3, 10)
        s, _ = project_curve_set(spec, z, tol=1e-8)
        res = feasibility_residuals(spec, s)
        assert res[-1] == 0.0  # box exact
        assert res[0] <= 0.8 * 1e-8 + 1e-15


def test_convexity_of_feasible_set():
    rng = np.random.default_rng(5)
    spec = CurveConstraintSpec(m=2, q="inf", alphas=(1.0, 2.0), N=5, dim=2, dt=0.4)
    for _ in range(20):
        a, _ = project_curve_set(spec, rng.uniform(-0.5, 1.5, 10), tol=1e-10)
        b, _ = project_curve_set(spec, rng.uniform(-0.5, 1.5, 10), tol=1e-10)
        lam = rng.random()
        mix = lam * a + (1 - lam) * b
        res = feasibility_residuals(spec, mix)
        assert res.max() <= 1e-7


def test_projection_nonexpansive_on_samples():
    rng = np.random.default_rng(6)
    spec = CurveConstraintSpec(m=1, q=2, alphas=(0.7,), N=4, dim=2, dt=0.25)
    tol = 1e-9
    for _ in range(10):
        z1 = rng.uniform(-0.5, 1.5, 8)
        z2 = rng.uniform(-0.5, 1.5, 8)
        p1, _ = project_curve_set(spec, z1, tol=tol)
        p2, _ = project_curve_set(spec, z2, tol=tol)
        assert np.linalg.norm(p1 - p2) <= np.linalg.norm(z1 - z2) + 2 * 1e-6


def test_projection_idempotent_within_tol():
    rng = np.random.default_rng(7)
    spec = CurveConstraintSpec(m=1, q="inf", alphas=(0.6,), N=4, dim=2, dt=0.25)
    z = rng.uniform(-0.5, 1.5, 8)
    p1, _ = project_curve_set(spec, z, tol=1e-9)
    p2, _ = project_curve_set(spec, p1, tol=1e-9)
    assert np.linalg.norm(p2 - p1) <= 1e-6


def test_projection_error_carries_residuals():
    spec = CurveConstraintSpec(m=1, q="inf", alphas=(0.01,), N=8, dim=2, dt=0.01)
    z = np.tile(np.linspace(0, 1, 8)[:, None], (1, 2)).reshape(-1)
    with pytest.raises(ProjectionError) as err:
        project_curve_set(spec, z, tol=1e-12, max_iter=3)
    assert err.value.residuals.shape == (2,)


def test_projection_invalid_tol():
    spec = CurveConstraintSpec(m=1, q="inf", alphas=(1.0,), N=2, dim=1, dt=0.5)
    with pytest.raises(ValidationError):
        project_curve_set(spec, np.zeros(2), tol=0.0)
