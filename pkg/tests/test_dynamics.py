import numpy as np
import pytest
from scipy.integrate import solve_ivp

from bohm2p import (Composition, ConfigPoint, GaussianSlit, IntegratorSettings,
                    OscillatorPair, PlaneWavePair, ScaledModel, Trajectory,
                    TrajectoryStatus, constraint_residual, integrate,
                    integrate_batch, velocity, velocity_field, velocity_sum_x)
from bohm2p.errors import (MaxStepsExceeded, NodeProximity, UnsupportedModel)

RNG_SEED = 20260809

TIGHT = IntegratorSettings(rel_tol=1e-11, abs_tol=1e-13)


def gaussian_model(**kw):
    base = dict(sigma0=1.0, a=10.0, kx=0.0, ky=1.0)
    base.update(kw)
    return GaussianSlit(**base)


# -- velocity operation ---------------------------------------------------------


def test_plane_wave_velocities_are_pure_drift():
    model = PlaneWavePair(kx=1.3, ky=0.8)
    rng = np.random.default_rng(RNG_SEED)
    for _ in range(100):
        p = ConfigPoint(rng.uniform(-2, 2, 2), rng.uniform(-2, 2, 2),
                        rng.uniform(0, 2))
        if abs(np.cos(1.3 * (p.r1[0] - p.r2[0]))) < 0.05:
            continue
        pair = velocity(model, p)
        assert pair.v1 == pytest.approx([0.0, 0.8], abs=1e-12)
        assert pair.v2 == pytest.approx([0.0, 0.8], abs=1e-12)


def test_symmetry_plane_velocities_vanish():
    rng = np.random.default_rng(RNG_SEED)
    models = [PlaneWavePair(kx=1.0, ky=0.5), OscillatorPair(omega=1.3, a=1.0),
              gaussian_model(a=3.0), gaussian_model(a=3.0, kx=0.4,
                                                    composition=Composition.PRODUCT)]
    for model in models:
        d = model.dim
        for _ in range(20):
            r1 = np.zeros(d)
            r2 = np.zeros(d)
            if d == 2:
                r1[1] = rng.uniform(-2, 2)
                r2[1] = rng.uniform(-2, 2)
            pair = velocity(model, ConfigPoint(r1, r2, rng.uniform(0, 2)))
            assert pair.v1[0] == 0.0
            assert pair.v2[0] == 0.0


def test_velocity_node_raises():
    model = PlaneWavePair(kx=1.0, ky=0.0)
    with pytest.raises(NodeProximity):
        velocity(model, ConfigPoint([np.pi / 2, 0.0], [0.0, 0.0], 0.0))


def test_velocity_gauge_invariance():
    model = gaussian_model(a=3.0, kx=0.5)
    scaled = ScaledModel(model, -2.7 + 0.9j)
    rng = np.random.default_rng(RNG_SEED)
    for _ in range(50):
        p = ConfigPoint(rng.uniform(-5, 5, 2), rng.uniform(-5, 5, 2),
                        rng.uniform(0, 2))
        if model.density(p.r1, p.r2, p.t) < 1e-4 * model.density_scale(p.t):
            continue
        a = velocity(model, p)
        b = velocity(scaled, p)
        assert a.v1 == pytest.approx(b.v1, abs=1e-12)
        assert a.v2 == pytest.approx(b.v2, abs=1e-12)


def test_mirror_antisymmetry_and_exchange():
    rng = np.random.default_rng(RNG_SEED)
    for model in (PlaneWavePair(kx=1.1, ky=0.7), OscillatorPair(omega=1.3, a=1.0),
                  gaussian_model(a=3.0, kx=0.6, ky=0.9)):
        d = model.dim
        n = 0
        while n < 200:
            r1 = rng.uniform(-3, 3, (1, d))
            r2 = rng.uniform(-3, 3, (1, d))
            t = rng.uniform(0, 2)
            v1, v2, dens = velocity_field(model, r1, r2, t)
            if dens[0] < 1e-4 * model.density_scale(t):
                continue
            m1 = r1.copy()
            m2 = r2.copy()
            m1[:, 0] *= -1
            m2[:, 0] *= -1
            w1, w2, _ = velocity_field(model, m1, m2, t)
            scale = 1.0 + abs(v1[0, 0]) + abs(v2[0, 0])
            assert abs(v1[0, 0] + w1[0, 0]) / scale < 1e-10
            assert abs(v2[0, 0] + w2[0, 0]) / scale < 1e-10
            s1, s2, _ = velocity_field(model, r2, r1, t)
            assert np.allclose(v1, s2, atol=1e-10)
            assert np.allclose(v2, s1, atol=1e-10)
            n += 1


# -- velocity-sum closed form ----------------------------------------------------


def test_velocity_sum_zero_cases():
    model = gaussian_model(a=4.0)
    p = ConfigPoint([3.7, 0.1], [-3.7, 0.4], 1.2)   # x1 + x2 = 0
    assert velocity_sum_x(model, p) == 0.0
    p = ConfigPoint([4.2, 0.0], [-3.6, 0.0], 0.0)   # t = 0
    assert velocity_sum_x(model, p) == 0.0


def test_velocity_sum_product_matches_direct():
    model = gaussian_model(a=3.0, kx=0.7, ky=0.4,
                           composition=Composition.PRODUCT)
    rng = np.random.default_rng(RNG_SEED)
    checked = 0
    while checked < 300:
        p = ConfigPoint(rng.uniform(-6, 6, 2), rng.uniform(-6, 6, 2),
                        rng.uniform(0.1, 3.0))
        if model.density(p.r1, p.r2, p.t) < 1e-8 * model.density_scale(p.t):
            continue
        pair = velocity(model, p)
        direct = pair.v1[0] + pair.v2[0]
        if abs(direct) < 1e-6:
            continue
        closed = velocity_sum_x(model, p)
        assert abs(direct - closed) / max(abs(direct), abs(closed)) < 1e-8
        checked += 1


def test_velocity_sum_symmetrized_is_spreading_term_only():
    model = gaussian_model(a=3.0, kx=0.5, ky=0.2)
    rng = np.random.default_rng(RNG_SEED)
    for _ in range(100):
        p = ConfigPoint(rng.uniform(-5, 5, 2), rng.uniform(-5, 5, 2),
                        rng.uniform(0.1, 3.0))
        if model.density(p.r1, p.r2, p.t) < 1e-6 * model.density_scale(p.t):
            continue
        tau = p.t / 2.0
        expected = 0.25 * (p.r1[0] + p.r2[0]) * p.t / (1 + tau * tau)
        assert velocity_sum_x(model, p) == pytest.approx(expected, rel=1e-12)
        pair = velocity(model, p)
        assert pair.v1[0] + pair.v2[0] == pytest.approx(expected, rel=1e-8,
                                                        abs=1e-10)


def test_velocity_sum_unsupported_model():
    with pytest.raises(UnsupportedModel):
        velocity_sum_x(PlaneWavePair(kx=1.0, ky=1.0),
                       ConfigPoint([0.0, 0.0], [1.0, 0.0], 0.0))


# -- integration -----------------------------------------------------------------


def test_plane_wave_trajectory_exact():
    model = PlaneWavePair(kx=1.0, ky=1.0)
    t_eval = np.linspace(0.0, 2.0, 21)
    traj = integrate(model, ConfigPoint([0.3, 0.0], [-0.4, 0.1], 0.0), 2.0,
                     t_eval=t_eval)
    assert traj.completed
    assert np.max(np.abs(traj.positions1[:, 0] - 0.3)) < 1e-12
    assert np.max(np.abs(traj.positions2[:, 0] + 0.4)) < 1e-12
    assert np.max(np.abs(traj.positions1[:, 1] - t_eval)) < 1e-9
    assert np.max(np.abs(traj.positions2[:, 1] - 0.1 - t_eval)) < 1e-9


def test_gaussian_center_of_mass_scaling():
    model = gaussian_model()
    traj = integrate(model, ConfigPoint([10.4, 0.0], [-9.9, 0.0], 0.0), 10.0,
                     settings=TIGHT, t_eval=np.linspace(0, 10, 51))
    assert traj.completed
    assert constraint_residual(model, traj) < 1e-6


def test_oscillator_conservation_and_noncrossing():
    model = OscillatorPair(omega=50.0, a=1.0)
    period = 2 * np.pi / 50.0
    traj = integrate(model, ConfigPoint([1.05], [-0.95], 0.0), period,
                     t_eval=np.linspace(0, period, 41))
    assert traj.completed
    assert constraint_residual(model, traj) < 1e-6
    gap = traj.positions1[:, 0] - traj.positions2[:, 0]
    assert np.all(gap > 0)


def test_integrate_matches_scipy_reference():
    model = gaussian_model()

    def rhs(t, y):
        v1, v2, _ = velocity_field(model, y[None, :2], y[None, 2:], t)
        return np.concatenate([v1[0], v2[0]])

    y0 = np.array([10.4, 0.0, -9.9, 0.0])
    t_eval = np.linspace(0.0, 10.0, 11)
    ref = solve_ivp(rhs, (0.0, 10.0), y0, method="RK45", rtol=1e-11,
                    atol=1e-13, dense_output=True)
    traj = integrate(model, ConfigPoint(y0[:2], y0[2:], 0.0), 10.0,
                     settings=TIGHT, t_eval=t_eval)
    mine = np.concatenate([traj.positions1, traj.positions2], axis=1)
    theirs = ref.sol(t_eval).T
    assert np.max(np.abs(mine - theirs)) < 1e-7


def test_step_halving_convergence():
    model = gaussian_model()
    start = ConfigPoint([9.6, 0.0], [-10.3, 0.0], 0.0)
    loose = integrate(model, start, 10.0,
                      settings=IntegratorSettings(rel_tol=1e-6, abs_tol=1e-8))
    tight = integrate(model, start, 10.0,
                      settings=IntegratorSettings(rel_tol=5e-7, abs_tol=5e-9))
    diff = np.max(np.abs(np.concatenate([loose.positions1[-1] - tight.positions1[-1],
                                         loose.positions2[-1] - tight.positions2[-1]])))
    scale = max(1.0, float(np.max(np.abs(loose.positions1[-1]))))
    assert diff < 10 * 1e-6 * scale


def test_node_abort_recorded_not_raised():
    model = gaussian_model()
    settings = IntegratorSettings(node_epsilon=0.5)
    traj = integrate(model, ConfigPoint([10.4, 0.0], [-9.9, 0.0], 0.0), 10.0,
                     settings=settings, t_eval=np.linspace(0, 10, 21))
    assert traj.status is TrajectoryStatus.ABORTED_NEAR_NODE
    assert len(traj.times) < 21
    assert np.all(np.diff(traj.times) > 0)
    assert traj.min_density_seen > 0


def test_start_at_node_raises():
    model = PlaneWavePair(kx=1.0, ky=1.0)
    with pytest.raises(NodeProximity):
        integrate(model, ConfigPoint([np.pi / 2, 0.0], [0.0, 0.0], 0.0), 1.0)


def test_max_steps_exceeded_raises():
    model = gaussian_model()
    with pytest.raises(MaxStepsExceeded):
        integrate(model, ConfigPoint([10.0, 0.0], [-10.0, 0.0], 0.0), 10.0,
                  settings=IntegratorSettings(max_steps=3))


def test_time_grid_validation():
    model = gaussian_model()
    start = ConfigPoint([10.0, 0.0], [-10.0, 0.0], 0.0)
    with pytest.raises(ValueError):
        integrate(model, start, 10.0, t_eval=np.array([0.0, 5.0]))
    with pytest.raises(ValueError):
        integrate(model, start, 10.0, t_eval=np.array([0.0, 5.0, 5.0, 10.0]))
    with pytest.raises(ValueError):
        integrate(model, start, 0.0)


def test_trajectory_points_are_config_points():
    model = OscillatorPair(omega=2.0, a=1.0)
    t_eval = np.linspace(0.0, 1.0, 5)
    traj = integrate(model, ConfigPoint([1.1], [-0.9], 0.0), 1.0, t_eval=t_eval)
    points = traj.points
    assert len(points) == 5
    assert points[0].t == 0.0 and points[-1].t == 1.0
    assert all(isinstance(p, ConfigPoint) for p in points)
    assert np.all(np.diff([p.t for p in points]) > 0)


def test_batch_matches_single_bitwise():
    model = gaussian_model()
    t_eval = np.linspace(0.0, 10.0, 11)
    starts = np.array([[10.4, 0.0, -9.9, 0.0],
                       [9.2, 0.0, -10.8, 0.0],
                       [10.0, 0.0, -10.0, 0.0]])
    batch = integrate_batch(model, starts, 0.0, 10.0, t_eval, TIGHT)
    for i in range(3):
        single = integrate(model, ConfigPoint(starts[i, :2], starts[i, 2:], 0.0),
                           10.0, settings=TIGHT, t_eval=t_eval)
        combined = np.concatenate([single.positions1, single.positions2], axis=1)
        assert np.array_equal(batch.samples[i], combined)


# -- constraint residual ----------------------------------------------------------


def _synthetic_trajectory(times, x_sum, gap=2.0):
    x1 = 0.5 * (np.asarray(x_sum) + gap)
    x2 = 0.5 * (np.asarray(x_sum) - gap)
    pos1 = np.stack([x1, np.zeros_like(x1)], axis=1)
    pos2 = np.stack([x2, np.zeros_like(x2)], axis=1)
    return Trajectory(times=np.asarray(times, dtype=float), positions1=pos1,
                      positions2=pos2, status=TrajectoryStatus.COMPLETED,
                      min_density_seen=1.0, step_count=1)


def test_constraint_residual_scaling_factor():
    model = gaussian_model(sigma0=1.0)
    # spread ratio sqrt(3) at t = 2*sqrt(3): scale factor sqrt(1 + 3) = 2,
    # so a pair with midpoint sigma0/2 must reach x1 + x2 = 2 sigma0.
    t_star = 2.0 * np.sqrt(3.0)
    times = np.array([0.0, t_star])
    exact = _synthetic_trajectory(times, [1.0, 2.0])
    assert constraint_residual(model, exact) < 1e-12
    wrong = _synthetic_trajectory(times, [1.0, 1.0])
    assert constraint_residual(model, wrong) == pytest.approx(0.5, rel=1e-12)


def test_constraint_residual_zero_midpoint():
    model = OscillatorPair(omega=2.0, a=1.0)
    traj = integrate(model, ConfigPoint([0.9], [-0.9], 0.0), 1.0,
                     t_eval=np.linspace(0, 1, 11))
    assert constraint_residual(model, traj) < 1e-9


def test_constraint_residual_unsupported_models():
    plane = PlaneWavePair(kx=1.0, ky=1.0)
    traj = integrate(plane, ConfigPoint([0.3, 0.0], [-0.4, 0.0], 0.0), 1.0)
    with pytest.raises(UnsupportedModel):
        constraint_residual(plane, traj)
    product = gaussian_model(composition=Composition.PRODUCT)
    ptraj = integrate(product, ConfigPoint([10.0, 0.0], [9.5, 0.0], 0.0), 1.0)
    with pytest.raises(UnsupportedModel):
        constraint_residual(product, ptraj)


def test_integrator_settings_validation():
    with pytest.raises(ValueError):
        IntegratorSettings(rel_tol=0.0)
    with pytest.raises(ValueError):
        IntegratorSettings(abs_tol=-1.0)
    with pytest.raises(ValueError):
        IntegratorSettings(max_steps=0)
