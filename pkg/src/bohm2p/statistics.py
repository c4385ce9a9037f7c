"""Joint detection probabilities by quadrature and from trajectory ensembles.

The detection probability of finding one particle in region R1 and the other
in region R2 at time t is the normalized integral of |Psi|^2 over the
unordered pair event,

    P = I(R1 x R2) + I(R2 x R1) - I((R1 ^ R2) x (R1 ^ R2)),

matching what a pair of detectors records.  Densities of all normalizable
variants live in the x coordinates (transverse plane-wave factors drop out of
|Psi|^2), so integrals are two-dimensional tensor-product Gauss-Legendre sums
over panels, refined until successive refinements agree.  Infinite bounds are
truncated where the Gaussian envelope falls below ~1e-16 of its peak.

Ensemble-side estimators mirror the same unordered-pair convention, so the
Monte Carlo fraction and the quadrature value are directly comparable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.interpolate import PchipInterpolator

from .ensemble import Ensemble
from .errors import EmptyEnsemble, NotNormalizable, QuadratureNotConverged
from .wavefunction import WaveModel, normalization_constant

__all__ = [
    "Region",
    "DetectionReport",
    "CrossingSummary",
    "MarginalReport",
    "MarginalDistribution",
    "joint_probability",
    "bohmian_detection",
    "crossing_statistics",
    "marginal_histogram",
    "ks_statistic",
    "ks_critical_value",
]

_GL_ORDER = 16
_PANEL_SEQUENCE = (4, 8, 16, 32, 64, 128)
_COORDINATES = ("x1", "x2", "x1+x2")


@dataclass(frozen=True)
class Region:
    """A per-coordinate box, possibly half-infinite, for one particle."""

    bounds: tuple[tuple[float, float], ...]

    def __post_init__(self):
        cleaned = []
        for i, (lo, hi) in enumerate(self.bounds):
            lo = -math.inf if lo is None else float(lo)
            hi = math.inf if hi is None else float(hi)
            if math.isfinite(lo) and math.isfinite(hi) and not lo < hi:
                raise ValueError(f"coordinate {i}: lower bound must be below upper")
            cleaned.append((lo, hi))
        object.__setattr__(self, "bounds", tuple(cleaned))

    @property
    def dim(self) -> int:
        return len(self.bounds)

    @classmethod
    def all_space(cls, dim: int) -> "Region":
        return cls(((None, None),) * dim)

    @classmethod
    def x_above(cls, threshold: float, dim: int) -> "Region":
        return cls(((threshold, None),) + ((None, None),) * (dim - 1))

    @classmethod
    def x_below(cls, threshold: float, dim: int) -> "Region":
        return cls(((None, threshold),) + ((None, None),) * (dim - 1))

    def contains(self, r: np.ndarray) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        inside = np.ones(r.shape[:-1], dtype=bool)
        for i, (lo, hi) in enumerate(self.bounds):
            inside &= (r[..., i] >= lo) & (r[..., i] <= hi)
        return inside

    def intersect(self, other: "Region") -> "Region | None":
        """Intersection box, or None when it is empty."""
        if self.dim != other.dim:
            raise ValueError("regions must share a dimension")
        out = []
        for (lo1, hi1), (lo2, hi2) in zip(self.bounds, other.bounds):
            lo, hi = max(lo1, lo2), min(hi1, hi2)
            if not lo < hi:
                return None
            out.append((lo, hi))
        return Region(tuple(out))


@dataclass(frozen=True)
class DetectionReport:
    quantum_probability: float
    bohmian_fraction: float
    mc_standard_error: float
    n_effective: int
    symmetrized_over_exchange: bool = True


@dataclass
class CrossingSummary:
    """Pair-midpoint bookkeeping and same-side counts at the final time."""

    plane_x: float
    n_pairs: int
    both_above: int
    both_below: int
    split: int
    midpoints: np.ndarray
    histogram_counts: np.ndarray
    histogram_edges: np.ndarray

    def midpoint_fraction_within(self, half_width: float) -> float:
        return float(np.mean(np.abs(self.midpoints) <= half_width))


@dataclass
class MarginalReport:
    coordinate: str
    t: float
    n: int
    bin_edges: np.ndarray
    counts: np.ndarray
    quantum_bin_density: np.ndarray
    ks_distance: float
    ks_critical: float

    @property
    def passed(self) -> bool:
        return self.ks_distance < self.ks_critical


def _check_region(model: WaveModel, region: Region) -> None:
    if region.dim != model.dim:
        raise ValueError(f"region dimension {region.dim} != model dimension {model.dim}")
    for axis in model.improper_axes:
        lo, hi = region.bounds[axis]
        if math.isfinite(lo) or math.isfinite(hi):
            raise NotNormalizable(
                f"coordinate {axis} carries a plane-wave factor with no proper "
                "distribution; its region bounds must be infinite")


@lru_cache(maxsize=None)
def _gl_nodes(order: int):
    return np.polynomial.legendre.leggauss(order)


def _panel_rule(lo: float, hi: float, panels: int):
    x, w = _gl_nodes(_GL_ORDER)
    edges = np.linspace(lo, hi, panels + 1)
    mid = 0.5 * (edges[:-1] + edges[1:])
    half = 0.5 * (edges[1:] - edges[:-1])
    nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return nodes, weights


def _clip_interval(bounds: tuple[float, float], support: tuple[float, float]):
    lo = max(bounds[0], support[0])
    hi = min(bounds[1], support[1])
    return (lo, hi) if lo < hi else None


def _ordered_probability(model: WaveModel, b1, b2, t: float,
                         rel_tol: float) -> float:
    """Normalized integral of |Psi|^2 over the ordered box b1 x b2."""
    support = model.x_support(t)
    i1 = _clip_interval(b1, support)
    i2 = _clip_interval(b2, support)
    if i1 is None or i2 is None:
        return 0.0
    norm2 = normalization_constant(model, t) ** 2
    previous = None
    for panels in _PANEL_SEQUENCE:
        n1, w1 = _panel_rule(*i1, panels)
        n2, w2 = _panel_rule(*i2, panels)
        dens = model.x_density(n1[:, None], n2[None, :], t)
        value = norm2 * float(w1 @ dens @ w2)
        if previous is not None and abs(value - previous) <= max(rel_tol * abs(value), 1e-15):
            return value
        previous = value
    raise QuadratureNotConverged(
        f"joint probability did not converge to {rel_tol} within "
        f"{_PANEL_SEQUENCE[-1]} panels")


def joint_probability(model: WaveModel, r1: Region, r2: Region, t: float,
                      rel_tol: float = 1e-8) -> float:
    """Probability that one particle is detected in r1 and the other in r2."""
    if not model.normalizable:
        raise NotNormalizable(
            "detection probabilities require a normalizable model")
    _check_region(model, r1)
    _check_region(model, r2)
    b1 = r1.bounds[0]
    b2 = r2.bounds[0]
    total = _ordered_probability(model, b1, b2, t, rel_tol)
    total += _ordered_probability(model, b2, b1, t, rel_tol)
    both = r1.intersect(r2)
    if both is not None:
        total -= _ordered_probability(model, both.bounds[0], both.bounds[0], t, rel_tol)
    return float(min(max(total, 0.0), 1.0))


def bohmian_detection(ensemble: Ensemble, r1: Region, r2: Region,
                      t: float) -> DetectionReport:
    """Fraction of completed pairs matching the unordered detection event.

    Pairs the Monte Carlo fraction with the quadrature probability and its
    binomial standard error.
    """
    p1, p2 = ensemble.positions_at(t)
    in1a = r1.contains(p1)
    in2a = r2.contains(p2)
    in1b = r2.contains(p1)
    in2b = r1.contains(p2)
    hits = (in1a & in2a) | (in1b & in2b)
    n = len(hits)
    fraction = float(np.mean(hits))
    stderr = math.sqrt(fraction * (1.0 - fraction) / n)
    quantum = joint_probability(ensemble.model, r1, r2, t)
    return DetectionReport(quantum_probability=quantum,
                           bohmian_fraction=fraction,
                           mc_standard_error=stderr,
                           n_effective=n)


def crossing_statistics(ensemble: Ensemble, plane_x: float = 0.0) -> CrossingSummary:
    """Same-side counts at the final time plus the spread of pair midpoints."""
    if len(ensemble) == 0:
        raise EmptyEnsemble("crossing statistics need at least one trajectory")
    t_final = ensemble.times[-1]
    r1, r2 = ensemble.positions_at(t_final)
    x1 = r1[:, 0]
    x2 = r2[:, 0]
    both_above = int(np.sum((x1 > plane_x) & (x2 > plane_x)))
    both_below = int(np.sum((x1 < plane_x) & (x2 < plane_x)))
    split = len(x1) - both_above - both_below

    i1, i2 = ensemble.positions_at(ensemble.times[0])
    midpoints = 0.5 * (i1[:, 0] + i2[:, 0])
    counts, edges = np.histogram(midpoints, bins=50)
    return CrossingSummary(plane_x=plane_x, n_pairs=len(x1),
                           both_above=both_above, both_below=both_below,
                           split=split, midpoints=midpoints,
                           histogram_counts=counts, histogram_edges=edges)


class MarginalDistribution:
    """Quadrature marginal of the normalized configuration density.

    Supports the coordinates "x1", "x2" and "x1+x2".  The density is tabulated
    on a refining grid and integrated with a monotone cubic interpolant until
    the cumulative distribution is stable to 1e-6, giving a smooth cdf oracle
    for goodness-of-fit tests.
    """

    _GRIDS = (513, 1025, 2049, 4097)
    _INNER_PANELS = 48
    _CDF_TOL = 1e-5

    def __init__(self, model: WaveModel, coordinate: str, t: float):
        if not model.normalizable:
            raise NotNormalizable("marginals require a normalizable model")
        if coordinate not in _COORDINATES:
            raise ValueError(f"coordinate must be one of {_COORDINATES}")
        self.model = model
        self.coordinate = coordinate
        self.t = float(t)
        lo, hi = model.x_support(t)
        if coordinate == "x1+x2":
            self.support = (2.0 * lo, 2.0 * hi)
        else:
            self.support = (lo, hi)
        self._norm2 = normalization_constant(model, t) ** 2
        self._inner_nodes, self._inner_weights = _panel_rule(lo, hi, self._INNER_PANELS)
        self._build()

    def _marginal_density(self, v: np.ndarray) -> np.ndarray:
        nodes = self._inner_nodes
        weights = self._inner_weights
        if self.coordinate == "x1+x2":
            # u = x1 + x2, integrated over w = x1 - x2 with Jacobian 1/2.
            lo, hi = self.model.x_support(self.t)
            wn, ww = _panel_rule(lo - hi, hi - lo, self._INNER_PANELS)
            x1 = 0.5 * (v[:, None] + wn[None, :])
            x2 = 0.5 * (v[:, None] - wn[None, :])
            dens = self.model.x_density(x1, x2, self.t)
            return 0.5 * self._norm2 * (dens @ ww)
        dens = self.model.x_density(v[:, None], nodes[None, :], self.t)
        return self._norm2 * (dens @ weights)

    def _build(self) -> None:
        lo, hi = self.support
        previous = None
        for n_grid in self._GRIDS:
            grid = np.linspace(lo, hi, n_grid)
            dens = self._marginal_density(grid)
            cdf_raw = PchipInterpolator(grid, np.maximum(dens, 0.0)).antiderivative()
            total = float(cdf_raw(hi))
            if previous is not None:
                probe = np.linspace(lo, hi, 257)
                drift = np.max(np.abs(cdf_raw(probe) / total - previous(probe)))
                if drift < self._CDF_TOL:
                    break
            previous = lambda v, f=cdf_raw, s=total: f(v) / s
        self._cdf_raw = cdf_raw
        self._total = total
        self._pdf = PchipInterpolator(grid, np.maximum(dens, 0.0))

    def pdf(self, v) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        lo, hi = self.support
        out = np.zeros_like(v, dtype=float)
        inside = (v >= lo) & (v <= hi)
        out[inside] = self._pdf(v[inside]) / self._total
        return out

    def cdf(self, v) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        lo, hi = self.support
        clipped = np.clip(v, lo, hi)
        return np.clip(self._cdf_raw(clipped) / self._total, 0.0, 1.0)


def ks_statistic(values: np.ndarray, cdf) -> float:
    """Exact sup-distance between the empirical cdf of values and cdf."""
    x = np.sort(np.asarray(values, dtype=float))
    n = len(x)
    if n == 0:
        raise ValueError("need at least one sample")
    f = np.asarray(cdf(x), dtype=float)
    i = np.arange(1, n + 1)
    return float(max(np.max(i / n - f), np.max(f - (i - 1) / n)))


def ks_critical_value(n: int, alpha: float = 0.01) -> float:
    """Asymptotic one-sample critical distance at significance alpha."""
    return math.sqrt(-0.5 * math.log(alpha / 2.0)) / math.sqrt(n)


def _coordinate_values(ensemble: Ensemble, coordinate: str, t: float) -> np.ndarray:
    r1, r2 = ensemble.positions_at(t)
    if coordinate == "x1":
        return r1[:, 0]
    if coordinate == "x2":
        return r2[:, 0]
    if coordinate == "x1+x2":
        return r1[:, 0] + r2[:, 0]
    raise ValueError(f"coordinate must be one of {_COORDINATES}")


def marginal_histogram(ensemble: Ensemble, coordinate: str, t: float,
                       bins: int = 50, alpha: float = 0.01) -> MarginalReport:
    """Equal-width histogram of one marginal plus its exact KS distance
    against the quadrature marginal of the normalized density."""
    if len(ensemble) == 0:
        raise EmptyEnsemble("marginal histogram needs at least one trajectory")
    values = _coordinate_values(ensemble, coordinate, t)
    dist = MarginalDistribution(ensemble.model, coordinate, t)
    ks = ks_statistic(values, dist.cdf)
    n = len(values)

    lo = float(values.min())
    hi = float(values.max())
    if hi - lo < 1e-12:
        pad = max(abs(lo), 1.0) * 1e-6
        lo, hi = lo - pad, hi + pad
    edges = np.linspace(lo, hi, bins + 1)
    counts, _ = np.histogram(values, bins=edges)
    width = np.diff(edges)
    quantum = (dist.cdf(edges[1:]) - dist.cdf(edges[:-1])) / width
    return MarginalReport(coordinate=coordinate, t=float(t), n=n,
                          bin_edges=edges, counts=counts,
                          quantum_bin_density=quantum,
                          ks_distance=ks,
                          ks_critical=ks_critical_value(n, alpha))
