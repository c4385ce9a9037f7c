"""Guidance velocities and configuration-space trajectory integration.

Each particle moves with the velocity field

    v_i = (hbar / m) Im( grad_i Psi / Psi ),

which is singular at zeros of Psi.  Trajectories are advanced with an
embedded Dormand-Prince 4(5) pair under PI step-size control; output points
are interpolated onto a caller-supplied time grid with cubic Hermite
polynomials on accepted steps.  Steps that run into a near-zero of the
density are rejected and halved, and a trajectory that keeps hitting one is
marked aborted instead of failing the whole batch.

The batch integrator advances many independent trajectories in lock-step
masked arrays, but every per-trajectory quantity (step size, error history,
density floor) evolves only from that trajectory's own state, so results are
bit-identical however trajectories are grouped.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .errors import MaxStepsExceeded, NodeProximity, UnsupportedModel
from .wavefunction import (Composition, ConfigPoint, GaussianSlit,
                           OscillatorPair, WaveModel)

__all__ = [
    "VelocityPair",
    "IntegratorSettings",
    "TrajectoryStatus",
    "Trajectory",
    "velocity",
    "velocity_field",
    "velocity_sum_x",
    "integrate",
    "integrate_batch",
    "constraint_residual",
]

# Consecutive node-triggered step rejections before a trajectory is abandoned.
_MAX_NODE_REJECTIONS = 20
# Fraction of the time span below which a node-halved step means the
# trajectory is pinned against the density threshold and cannot advance.
_NODE_STEP_FLOOR = 1e-13


@dataclass(frozen=True)
class VelocityPair:
    """Guidance velocities of the two particles at one configuration point."""

    v1: np.ndarray
    v2: np.ndarray


@dataclass(frozen=True)
class IntegratorSettings:
    rel_tol: float = 1e-9
    abs_tol: float = 1e-11
    node_epsilon: float = 1e-12
    max_steps: int = 10_000_000

    def __post_init__(self):
        for name in ("rel_tol", "abs_tol", "node_epsilon"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not self.max_steps > 0:
            raise ValueError("max_steps must be positive")


class TrajectoryStatus(enum.Enum):
    COMPLETED = "completed"
    ABORTED_NEAR_NODE = "aborted_near_node"


@dataclass
class Trajectory:
    """One particle pair's path, sampled on the requested time grid."""

    times: np.ndarray          # (nt,), strictly increasing, starts at t_start
    positions1: np.ndarray     # (nt, d)
    positions2: np.ndarray     # (nt, d)
    status: TrajectoryStatus
    min_density_seen: float
    step_count: int

    @property
    def points(self) -> list[ConfigPoint]:
        return [ConfigPoint(self.positions1[i], self.positions2[i], self.times[i])
                for i in range(len(self.times))]

    @property
    def completed(self) -> bool:
        return self.status is TrajectoryStatus.COMPLETED

    def x_sum(self) -> np.ndarray:
        """x1(t) + x2(t) on the sampled grid."""
        return self.positions1[:, 0] + self.positions2[:, 0]


def velocity_field(model: WaveModel, r1, r2, t):
    """Vectorized (v1, v2, |Psi|^2); velocities are zeroed where Psi vanishes.

    Callers that care about node proximity must check the returned density;
    `velocity` below does so for single points.
    """
    psi, g1, g2 = model.amplitude_and_gradients(r1, r2, t)
    dens = psi.real**2 + psi.imag**2
    coef = model.constants.hbar / model.constants.mass
    with np.errstate(divide="ignore", invalid="ignore"):
        v1 = coef * (g1 / psi[..., None]).imag
        v2 = coef * (g2 / psi[..., None]).imag
    bad = ~np.isfinite(v1) | ~np.isfinite(v2)
    if np.any(bad):
        v1 = np.where(bad, 0.0, v1)
        v2 = np.where(bad, 0.0, v2)
    return v1, v2, dens


def velocity(model: WaveModel, p: ConfigPoint, node_epsilon: float = 1e-12) -> VelocityPair:
    """Guidance velocities at one configuration point.

    Raises NodeProximity when |Psi|^2 falls below node_epsilon times the
    model's peak density scale at that time.
    """
    v1, v2, dens = velocity_field(model, p.r1, p.r2, p.t)
    if dens < node_epsilon * model.density_scale(p.t):
        raise NodeProximity(
            f"density {float(dens):.3e} below node threshold at t={p.t}")
    return VelocityPair(np.asarray(v1, dtype=float), np.asarray(v2, dtype=float))


def velocity_sum_x(model: WaveModel, p: ConfigPoint, node_epsilon: float = 1e-12) -> float:
    """Closed form for v1x + v2x of the Gaussian slit model.

    For either composition the sum contains the spreading term
    (hbar/2m sigma0^2)^2 (x1+x2) t / (1 + (hbar t/2m sigma0^2)^2); the product
    composition adds the interference term

        (hbar/m) Im{ (1/Psi) [ (a + (hbar kx/m) t) / (sigma0 sigma_t) + 2i kx ]
                     [ psi_a(r1) psi_a(r2) - psi_b(r1) psi_b(r2) ] },

    which cancels identically under symmetrization.
    """
    if not isinstance(model, GaussianSlit):
        raise UnsupportedModel("velocity_sum_x is defined for the Gaussian slit model")
    dens = float(model.density(p.r1, p.r2, p.t))
    if dens < node_epsilon * model.density_scale(p.t):
        raise NodeProximity(
            f"density {dens:.3e} below node threshold at t={p.t}")
    hbar, m = model.constants.hbar, model.constants.mass
    t = p.t
    tau = float(model.spread_ratio(t))
    rate = hbar / (2.0 * m * model.sigma0**2)
    total = rate * rate * (p.r1[0] + p.r2[0]) * t / (1.0 + tau * tau)
    if model.composition is Composition.PRODUCT:
        sig_t = complex(model.sigma_t(t))
        vx = hbar * model.kx / m
        coupling = (model.a + vx * t) / (model.sigma0 * sig_t) + 2j * model.kx
        a1, _ = model._packet_a(p.r1, t)
        a2, _ = model._packet_a(p.r2, t)
        b1, _ = model._packet_b(p.r1, t)
        b2, _ = model._packet_b(p.r2, t)
        psi = (a1 + b1) * (a2 + b2)
        total += (hbar / m) * float((coupling * (a1 * a2 - b1 * b2) / psi).imag)
    return float(total)


# -- Dormand-Prince 4(5) tableau ----------------------------------------------

_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0])
_A = (
    np.array([1 / 5]),
    np.array([3 / 40, 9 / 40]),
    np.array([44 / 45, -56 / 15, 32 / 9]),
    np.array([19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729]),
    np.array([9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656]),
)
_B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84])
_E = np.array([71 / 57600, 0.0, -71 / 16695, 71 / 1920,
               -17253 / 339200, 22 / 525, -1 / 40])

_SAFETY = 0.9
_MIN_FACTOR = 0.2
_MAX_FACTOR = 5.0
# PI controller exponents for a 5th-order error estimate.
_PI_ALPHA = 0.7 / 5.0
_PI_BETA = 0.4 / 5.0


@dataclass
class BatchResult:
    """Raw output of the batch integrator, one row per trajectory."""

    samples: np.ndarray        # (n, nt, 2d); NaN where never reached
    n_filled: np.ndarray       # (n,) number of valid leading grid points
    aborted: np.ndarray        # (n,) bool
    start_rejected: np.ndarray  # (n,) bool: initial density below threshold
    min_density: np.ndarray    # (n,)
    steps: np.ndarray          # (n,)
    t_eval: np.ndarray = field(repr=False, default=None)

    def trajectory(self, i: int, dim: int) -> Trajectory:
        nf = int(self.n_filled[i])
        status = (TrajectoryStatus.ABORTED_NEAR_NODE if self.aborted[i]
                  else TrajectoryStatus.COMPLETED)
        return Trajectory(
            times=self.t_eval[:nf],
            positions1=self.samples[i, :nf, :dim],
            positions2=self.samples[i, :nf, dim:],
            status=status,
            min_density_seen=float(self.min_density[i]),
            step_count=int(self.steps[i]),
        )


def _rms(a: np.ndarray) -> np.ndarray:
    return np.sqrt(np.mean(a * a, axis=-1))


def _initial_steps(rhs, y0, f0, t0, span, rel_tol, abs_tol):
    sc = abs_tol + rel_tol * np.abs(y0)
    d0 = _rms(y0 / sc)
    d1 = _rms(f0 / sc)
    small = (d0 < 1e-5) | (d1 < 1e-5)
    with np.errstate(divide="ignore", invalid="ignore"):
        h0 = np.where(small, 1e-6, 0.01 * d0 / d1)
    h0 = np.minimum(h0, span)
    y1 = y0 + h0[:, None] * f0
    f1, _ = rhs(y1, t0 + h0)
    d2 = _rms((f1 - f0) / sc) / h0
    dm = np.maximum(d1, d2)
    with np.errstate(divide="ignore", invalid="ignore"):
        h1 = np.where(dm <= 1e-15, np.maximum(1e-6, h0 * 1e-3),
                      (0.01 / dm) ** 0.2)
    return np.minimum(np.minimum(100.0 * h0, h1), span)


def integrate_batch(model: WaveModel, y0: np.ndarray, t_start: float,
                    t_end: float, t_eval: np.ndarray,
                    settings: IntegratorSettings | None = None) -> BatchResult:
    """Advance a batch of configuration states from t_start to t_end.

    ``y0`` has shape (n, 2d) packing (r1, r2) per row.  ``t_eval`` must be
    strictly increasing with t_eval[0] == t_start and t_eval[-1] == t_end.
    """
    settings = settings or IntegratorSettings()
    y0 = np.atleast_2d(np.asarray(y0, dtype=float))
    t_eval = np.asarray(t_eval, dtype=float)
    _validate_grid(t_eval, t_start, t_end)
    n, width = y0.shape
    dim = model.dim
    if width != 2 * dim:
        raise ValueError(f"state width {width} does not match 2*dim={2 * dim}")
    nt = len(t_eval)
    span = t_end - t_start

    def rhs(y, t):
        v1, v2, dens = velocity_field(model, y[:, :dim], y[:, dim:], t)
        return np.concatenate([v1, v2], axis=-1), dens

    samples = np.full((n, nt, width), np.nan)
    samples[:, 0] = y0
    fill_ptr = np.ones(n, dtype=int)

    t = np.full(n, float(t_start))
    y = y0.copy()
    f, dens = rhs(y, t)
    start_rejected = dens < settings.node_epsilon * model.density_scale(t_start)
    running_max = np.maximum(dens, 1e-300)
    min_density = dens.copy()
    steps = np.zeros(n, dtype=int)
    node_rejections = np.zeros(n, dtype=int)
    err_prev = np.ones(n)
    aborted = start_rejected.copy()
    active = ~start_rejected

    h = np.full(n, span)
    if active.any():
        idx0 = np.flatnonzero(active)
        h[idx0] = _initial_steps(rhs, y[idx0], f[idx0], t[idx0], span,
                                 settings.rel_tol, settings.abs_tol)

    time_tol = 1e-12 * max(abs(span), abs(t_end), 1.0)

    while True:
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        steps[idx] += 1
        if np.any(steps[idx] > settings.max_steps):
            raise MaxStepsExceeded(
                f"exceeded {settings.max_steps} steps before reaching t={t_end}")

        k = idx.size
        hh = np.minimum(h[idx], t_end - t[idx])
        ti = t[idx]
        yi = y[idx]
        stages = np.empty((7, k, width))
        stages[0] = f[idx]
        stage_min = np.full(k, np.inf)
        stage_max = np.full(k, 0.0)
        for s, a_row in enumerate(_A, start=1):
            ys = yi + hh[:, None] * np.tensordot(a_row, stages[:s], axes=(0, 0))
            fs, ds = rhs(ys, ti + _C[s] * hh)
            stages[s] = fs
            stage_min = np.minimum(stage_min, ds)
            stage_max = np.maximum(stage_max, ds)
        y_new = yi + hh[:, None] * np.tensordot(_B, stages[:6], axes=(0, 0))
        f_new, d_new = rhs(y_new, ti + hh)
        stages[6] = f_new
        stage_min = np.minimum(stage_min, d_new)
        stage_max = np.maximum(stage_max, d_new)

        finite = np.isfinite(stages).all(axis=(0, 2)) & np.isfinite(y_new).all(axis=1)
        node_bad = (stage_min < settings.node_epsilon * running_max[idx]) | ~finite

        err_vec = hh[:, None] * np.tensordot(_E, stages, axes=(0, 0))
        scale = settings.abs_tol + settings.rel_tol * np.maximum(np.abs(yi), np.abs(y_new))
        with np.errstate(invalid="ignore"):
            err = _rms(err_vec / scale)
        accept = ~node_bad & np.isfinite(err) & (err <= 1.0)

        # Node-triggered rejections: halve and count.  A trajectory is
        # abandoned after too many rejections in a row, or once halving has
        # driven its step so small that it is creeping along the density
        # threshold without meaningful progress.
        if node_bad.any():
            rows = idx[node_bad]
            h[rows] = hh[node_bad] * 0.5
            node_rejections[rows] += 1
            dead = rows[(node_rejections[rows] >= _MAX_NODE_REJECTIONS)
                        | (h[rows] < _NODE_STEP_FLOOR * span)]
            if dead.size:
                aborted[dead] = True
                active[dead] = False

        # Accuracy rejections: shrink with the integral controller.
        err_rej = ~node_bad & ~accept
        if err_rej.any():
            rows = idx[err_rej]
            bad_err = np.maximum(err[err_rej], 1.0)
            factor = np.maximum(_MIN_FACTOR, _SAFETY * bad_err ** -0.2)
            h[rows] = hh[err_rej] * factor

        if accept.any():
            rows = idx[accept]
            t_old = ti[accept]
            h_acc = hh[accept]
            t_new = t_old + h_acc
            y_old = yi[accept]
            y_acc = y_new[accept]
            f_old = stages[0][accept]
            f_acc = stages[6][accept]

            # Fill requested grid points inside (t_old, t_new] by cubic
            # Hermite interpolation; loop runs while any trajectory still has
            # pending grid times inside its accepted step.
            while True:
                ptr = fill_ptr[rows]
                pending = ptr < nt
                tau = t_eval[np.minimum(ptr, nt - 1)]
                pending &= tau <= t_new + time_tol
                if not pending.any():
                    break
                sel = np.flatnonzero(pending)
                theta = np.clip((tau[sel] - t_old[sel]) / h_acc[sel], 0.0, 1.0)
                t2 = theta * theta
                t3 = t2 * theta
                h00 = 2 * t3 - 3 * t2 + 1
                h10 = t3 - 2 * t2 + theta
                h01 = -2 * t3 + 3 * t2
                h11 = t3 - t2
                hs = (h_acc[sel])[:, None]
                vals = (h00[:, None] * y_old[sel] + h10[:, None] * hs * f_old[sel]
                        + h01[:, None] * y_acc[sel] + h11[:, None] * hs * f_acc[sel])
                samples[rows[sel], ptr[sel]] = vals
                fill_ptr[rows[sel]] += 1

            t[rows] = t_new
            y[rows] = y_acc
            f[rows] = f_acc
            node_rejections[rows] = 0
            running_max[rows] = np.maximum(running_max[rows], stage_max[accept])
            min_density[rows] = np.minimum(min_density[rows], stage_min[accept])

            bounded_err = np.maximum(err[accept], 1e-12)
            factor = _SAFETY * bounded_err ** -_PI_ALPHA * err_prev[rows] ** _PI_BETA
            h[rows] = h_acc * np.clip(factor, _MIN_FACTOR, _MAX_FACTOR)
            err_prev[rows] = bounded_err

            done = rows[t_end - t[rows] <= time_tol]
            if done.size:
                active[done] = False

    return BatchResult(samples=samples, n_filled=fill_ptr, aborted=aborted,
                       start_rejected=start_rejected, min_density=min_density,
                       steps=steps, t_eval=t_eval)


def integrate(model: WaveModel, start: ConfigPoint, t_end: float,
              settings: IntegratorSettings | None = None,
              t_eval: np.ndarray | None = None) -> Trajectory:
    """Integrate a single pair trajectory from start.t to t_end."""
    if not t_end > start.t:
        raise ValueError("t_end must exceed the start time")
    if t_eval is None:
        t_eval = np.array([start.t, t_end])
    y0 = np.concatenate([start.r1, start.r2])[None, :]
    result = integrate_batch(model, y0, start.t, t_end, t_eval, settings)
    if result.start_rejected[0]:
        raise NodeProximity("starting density is below the node threshold")
    return result.trajectory(0, model.dim)


def constraint_residual(model: WaveModel, traj: Trajectory) -> float:
    """Max deviation of x1 + x2 from its center-of-mass law, relative to scale.

    The oscillator pair conserves x1 + x2 exactly; the symmetrized Gaussian
    slit model scales it by sqrt(1 + (hbar t/2m sigma0^2)^2).  The deviation
    at each sampled time is divided by max(|predicted|, packet width) so pairs
    with a near-zero midpoint remain well conditioned.
    """
    u = traj.x_sum()
    u0 = u[0]
    if isinstance(model, OscillatorPair):
        predicted = np.full_like(u, u0)
    elif isinstance(model, GaussianSlit) and model.composition is Composition.SYMMETRIZED:
        tau = np.asarray(model.spread_ratio(traj.times))
        predicted = u0 * np.sqrt(1.0 + tau * tau)
    else:
        raise UnsupportedModel(
            "center-of-mass constraint requires the oscillator pair or the "
            "symmetrized Gaussian slit model")
    scale = np.maximum(np.abs(predicted), model.packet_width(0.0))
    return float(np.max(np.abs(u - predicted) / scale))


def _validate_grid(t_eval: np.ndarray, t_start: float, t_end: float) -> None:
    if t_eval.ndim != 1 or len(t_eval) < 2:
        raise ValueError("t_eval must be a 1-d grid with at least two points")
    if not np.all(np.diff(t_eval) > 0):
        raise ValueError("t_eval must be strictly increasing")
    if t_eval[0] != t_start or t_eval[-1] != t_end:
        raise ValueError("t_eval must start at t_start and end at t_end")
