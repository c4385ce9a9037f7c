"""Reproducible |Psi|^2 sampling and batch propagation of trajectory ensembles.

Initial pairs are drawn from the squared modulus of the wave function at
t = 0 with random-walk Metropolis chains.  Chains are vectorized in blocks;
every chain derives its stream from the configured seed and its own index, so
the sample set is bit-identical for a given (model, settings) regardless of
how the work is grouped or threaded.

Two always-accepted moves are mixed into the random walk: swapping the pair
(x1 <-> x2) and reflecting both coordinates (x -> -x).  Both leave the target
density exactly invariant and carry chains between the well-separated density
branches that a local walk cannot cross when the slits are far apart.
"""

from __future__ import annotations

import logging
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .dynamics import IntegratorSettings, Trajectory, TrajectoryStatus, integrate_batch
from .errors import EmptyEnsemble, NotNormalizable, PoorMixingWarning, UnsupportedModel
from .wavefunction import ConfigPoint, Composition, GaussianSlit, WaveModel

__all__ = [
    "SamplerSettings",
    "SampleResult",
    "Ensemble",
    "SlitPartition",
    "sample_positions",
    "sample_initial",
    "propagate",
    "different_slit_filter",
]

logger = logging.getLogger("bohm2p")

# Probability of the exchange and reflection moves per Metropolis step.
_EXCHANGE_PROB = 0.15
_REFLECT_PROB = 0.15
# Chains vectorized per block to bound the up-front randomness buffers.
_CHAIN_BLOCK = 1024


@dataclass(frozen=True)
class SamplerSettings:
    n_samples: int
    seed: int = 0
    burn_in: int = 5000
    thinning: int = 20
    proposal_scale: float | None = None
    samples_per_chain: int = 8

    def __post_init__(self):
        if not self.n_samples > 0:
            raise ValueError("n_samples must be positive")
        if self.burn_in < 0:
            raise ValueError("burn_in must be nonnegative")
        if self.thinning < 1:
            raise ValueError("thinning must be at least 1")
        if self.samples_per_chain < 1:
            raise ValueError("samples_per_chain must be at least 1")
        if self.proposal_scale is not None and not self.proposal_scale > 0:
            raise ValueError("proposal_scale must be positive")


@dataclass
class SampleResult:
    """x-coordinate samples plus sampler diagnostics."""

    x: np.ndarray              # (n, 2): x1, x2 at t = 0
    acceptance_rate: float
    n_chains: int


class Ensemble:
    """A seeded collection of trajectories sharing one model and time grid."""

    def __init__(self, model: WaveModel, trajectories: list[Trajectory],
                 times: np.ndarray, seed: int | None = None):
        self.model = model
        self.trajectories = trajectories
        self.times = np.asarray(times, dtype=float)
        self.seed = seed

    def __len__(self) -> int:
        return len(self.trajectories)

    @property
    def aborted_count(self) -> int:
        return sum(t.status is TrajectoryStatus.ABORTED_NEAR_NODE
                   for t in self.trajectories)

    @property
    def completed_indices(self) -> np.ndarray:
        return np.array([i for i, t in enumerate(self.trajectories) if t.completed],
                        dtype=int)

    def time_index(self, t: float) -> int:
        hits = np.flatnonzero(np.isclose(self.times, t, rtol=0.0, atol=1e-12))
        if hits.size == 0:
            raise ValueError(f"t={t} is not on the ensemble time grid")
        return int(hits[0])

    def positions_at(self, t: float, completed_only: bool = True):
        """Stacked (r1, r2) arrays of shape (k, d) at a grid time."""
        j = self.time_index(t)
        rows = [tr for tr in self.trajectories
                if tr.completed or (not completed_only and len(tr.times) > j)]
        if completed_only:
            rows = [tr for tr in rows if tr.completed]
        if not rows:
            raise EmptyEnsemble("no completed trajectories in the ensemble")
        r1 = np.stack([tr.positions1[j] for tr in rows])
        r2 = np.stack([tr.positions2[j] for tr in rows])
        return r1, r2


def _chain_rng(seed: int, chain_index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, chain_index]))


def _initial_states(model: WaveModel, rngs: list[np.random.Generator]) -> np.ndarray:
    """Start chains at draws from the packet mixture ignoring interference."""
    c = model.packet_center(0.0)
    w = model.packet_width(0.0)
    out = np.empty((len(rngs), 2))
    product = model.composition is Composition.PRODUCT
    for i, rng in enumerate(rngs):
        if product:
            signs = np.where(rng.random(2) < 0.5, 1.0, -1.0)
        else:
            flip = 1.0 if rng.random() < 0.5 else -1.0
            signs = np.array([flip, -flip])
        out[i] = signs * c + w * rng.standard_normal(2)
    return out


def sample_positions(model: WaveModel, settings: SamplerSettings) -> SampleResult:
    """Metropolis samples of the x coordinates of both particles at t = 0."""
    if not model.normalizable:
        raise NotNormalizable(
            "the position density of this model is improper; supply initial "
            "points explicitly instead of sampling")
    n = settings.n_samples
    per_chain = min(settings.samples_per_chain, n)
    n_chains = math.ceil(n / per_chain)
    steps = settings.burn_in + per_chain * settings.thinning
    scale = settings.proposal_scale or model.packet_width(0.0)

    samples = np.empty((n_chains, per_chain, 2))
    accepted = 0
    walk_steps = 0
    for block_start in range(0, n_chains, _CHAIN_BLOCK):
        block = range(block_start, min(block_start + _CHAIN_BLOCK, n_chains))
        rngs = [_chain_rng(settings.seed, i) for i in block]
        k = len(rngs)
        x = _initial_states(model, rngs)
        dens = model.x_density(x[:, 0], x[:, 1], 0.0)
        # Per-chain randomness drawn up front, ordered (steps, chain).
        walk = np.stack([rng.standard_normal((steps, 2)) * scale for rng in rngs], axis=1)
        uni = np.stack([rng.random(steps) for rng in rngs], axis=1)
        move = np.stack([rng.random(steps) for rng in rngs], axis=1)
        out_col = 0
        for s in range(steps):
            mv = move[s]
            exch = mv < _EXCHANGE_PROB
            refl = (mv >= _EXCHANGE_PROB) & (mv < _EXCHANGE_PROB + _REFLECT_PROB)
            if exch.any():
                x[exch] = x[exch][:, ::-1]
            if refl.any():
                x[refl] = -x[refl]
            rw = ~(exch | refl)
            if rw.any():
                prop = x[rw] + walk[s][rw]
                pdens = model.x_density(prop[:, 0], prop[:, 1], 0.0)
                take = uni[s][rw] * dens[rw] < pdens
                rw_idx = np.flatnonzero(rw)[take]
                x[rw_idx] = prop[take]
                dens[rw_idx] = pdens[take]
                accepted += int(take.sum())
                walk_steps += int(rw.sum())
            if s >= settings.burn_in and (s - settings.burn_in + 1) % settings.thinning == 0:
                samples[block.start:block.start + k, out_col] = x
                out_col += 1

    rate = accepted / max(walk_steps, 1)
    if not 0.1 <= rate <= 0.6:
        warnings.warn(
            f"Metropolis acceptance rate {rate:.3f} outside [0.1, 0.6]; "
            "consider adjusting proposal_scale", PoorMixingWarning)
    logger.info("sampler: %d chains x %d samples, acceptance rate %.3f",
                n_chains, per_chain, rate)
    return SampleResult(x=samples.reshape(-1, 2)[:n], acceptance_rate=rate,
                        n_chains=n_chains)


def sample_initial(model: WaveModel, settings: SamplerSettings) -> list[ConfigPoint]:
    """Initial configuration points distributed as |Psi(.,.;0)|^2.

    For two-dimensional variants the y coordinates carry no distribution (the
    packets are plane waves in y) and are placed at the slit exit plane y = 0.
    """
    result = sample_positions(model, settings)
    r1, r2 = model.embed_x(result.x[:, 0], result.x[:, 1])
    return [ConfigPoint(r1[i], r2[i], 0.0) for i in range(len(result.x))]


def _points_to_state(model: WaveModel, initial) -> tuple[np.ndarray, float]:
    if isinstance(initial, np.ndarray):
        y0 = np.atleast_2d(np.asarray(initial, dtype=float))
        return y0, 0.0
    if len(initial) == 0:
        return np.empty((0, 2 * model.dim)), 0.0
    t0 = initial[0].t
    rows = []
    for p in initial:
        if p.dim != model.dim:
            raise ValueError("initial point dimension does not match the model")
        if p.t != t0:
            raise ValueError("all initial points must share one start time")
        rows.append(np.concatenate([p.r1, p.r2]))
    return np.stack(rows), t0


def propagate(model: WaveModel, initial, t_end: float,
              settings: IntegratorSettings | None = None,
              t_eval: np.ndarray | None = None,
              seed: int | None = None,
              threads: int = 1) -> Ensemble:
    """Integrate one trajectory per initial point, preserving order.

    ``initial`` is a list of ConfigPoint (or an (n, 2d) array taken to start
    at t = 0).  Trajectories that run into a node are flagged aborted, never
    dropped.  With ``threads > 1`` the batch is split into contiguous chunks
    integrated concurrently; chunking does not change any result bit.
    """
    y0, t0 = _points_to_state(model, initial)
    if t_eval is None:
        t_eval = np.array([t0, float(t_end)])
    t_eval = np.asarray(t_eval, dtype=float)
    n = len(y0)
    if n == 0:
        return Ensemble(model, [], t_eval, seed=seed)

    if threads <= 1 or n < 2 * threads:
        results = [integrate_batch(model, y0, t0, t_end, t_eval, settings)]
        bounds = [(0, n)]
    else:
        chunk = math.ceil(n / threads)
        bounds = [(i, min(i + chunk, n)) for i in range(0, n, chunk)]
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(
                lambda b: integrate_batch(model, y0[b[0]:b[1]], t0, t_end,
                                          t_eval, settings),
                bounds))

    trajectories: list[Trajectory] = []
    for res, (lo, hi) in zip(results, bounds):
        for i in range(hi - lo):
            trajectories.append(res.trajectory(i, model.dim))
    return Ensemble(model, trajectories, t_eval, seed=seed)


@dataclass
class SlitPartition:
    """Index partition of initial pairs by which slit bands they occupy."""

    different_slits: np.ndarray
    same_slit: np.ndarray
    other: np.ndarray


def different_slit_filter(initial, model: GaussianSlit,
                          width_multiplier: float = 3.0) -> SlitPartition:
    """Split initial pairs into different-slit / same-slit / other classes.

    A particle counts as "at" a slit when its x coordinate lies within
    width_multiplier * sigma0 of that slit's center (+a or -a).
    """
    if not isinstance(model, GaussianSlit):
        raise UnsupportedModel("slit classification requires the Gaussian slit model")
    if isinstance(initial, np.ndarray):
        x1 = initial[:, 0]
        x2 = initial[:, 1]
    else:
        x1 = np.array([p.r1[0] for p in initial])
        x2 = np.array([p.r2[0] for p in initial])
    half = width_multiplier * model.sigma0
    in_a_1 = np.abs(x1 - model.a) <= half
    in_b_1 = np.abs(x1 + model.a) <= half
    in_a_2 = np.abs(x2 - model.a) <= half
    in_b_2 = np.abs(x2 + model.a) <= half
    different = (in_a_1 & in_b_2) | (in_b_1 & in_a_2)
    same = ~different & ((in_a_1 & in_a_2) | (in_b_1 & in_b_2))
    other = ~different & ~same
    return SlitPartition(
        different_slits=np.flatnonzero(different),
        same_slit=np.flatnonzero(same),
        other=np.flatnonzero(other),
    )
