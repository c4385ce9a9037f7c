"""Closed-form two-particle wave functions for a mirror-symmetric two-slit device.

Each model family is built from one single-particle packet ``psi_a`` together
with its mirror image ``psi_b(r) = psi_a(Mr)``, where M flips the x axis
(x' = -x, y' = y).  The two-particle amplitude is composed either as the
exchange-symmetrized sum

    Psi(r1, r2) = psi_a(r1) psi_b(r2) + psi_a(r2) psi_b(r1)

or, for the Gaussian slit model only, as the product of single-particle sums

    Psi(r1, r2) = [psi_a(r1) + psi_b(r1)] [psi_a(r2) + psi_b(r2)].

Amplitudes are returned *unnormalized*; `normalization_constant` supplies the
factor needed whenever the squared modulus is integrated.  Velocity fields are
ratios of gradient to value and do not depend on normalization.

All evaluation methods are vectorized: positions have shape ``(..., d)`` with
``d`` the per-particle dimension (1 for the oscillator pair, 2 otherwise), and
the time may be a scalar or an array broadcastable against the leading axes.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import ClassVar

import numpy as np

from .errors import NotNormalizable

__all__ = [
    "Composition",
    "PhysicalConstants",
    "ConfigPoint",
    "WaveModel",
    "PlaneWavePair",
    "OscillatorPair",
    "GaussianSlit",
    "ScaledModel",
    "evaluate",
    "gradient",
    "norm_squared_density",
    "normalization_constant",
]

# Gaussian tails are cut where they fall below ~1e-16 of the peak density.
_SUPPORT_SIGMAS = 10.0


class Composition(enum.Enum):
    """How two single-particle packets combine into a pair amplitude."""

    SYMMETRIZED = "symmetrized"
    PRODUCT = "product"


@dataclass(frozen=True)
class PhysicalConstants:
    """Reduced Planck constant and particle mass (defaults: natural units)."""

    hbar: float = 1.0
    mass: float = 1.0

    def __post_init__(self):
        if not self.hbar > 0:
            raise ValueError("hbar must be positive")
        if not self.mass > 0:
            raise ValueError("mass must be positive")


@dataclass(frozen=True)
class ConfigPoint:
    """A point (r1, r2) in two-particle configuration space at time t."""

    r1: np.ndarray
    r2: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        r1 = np.atleast_1d(np.asarray(self.r1, dtype=float))
        r2 = np.atleast_1d(np.asarray(self.r2, dtype=float))
        if r1.shape != r2.shape or r1.ndim != 1:
            raise ValueError("r1 and r2 must be 1-d coordinate vectors of equal length")
        object.__setattr__(self, "r1", r1)
        object.__setattr__(self, "r2", r2)
        object.__setattr__(self, "t", float(self.t))

    @property
    def dim(self) -> int:
        return self.r1.shape[0]

    def swapped(self) -> "ConfigPoint":
        return ConfigPoint(self.r2.copy(), self.r1.copy(), self.t)

    def mirrored(self) -> "ConfigPoint":
        """Reflect both particles through the x = 0 plane."""
        r1 = self.r1.copy()
        r2 = self.r2.copy()
        r1[0] = -r1[0]
        r2[0] = -r2[0]
        return ConfigPoint(r1, r2, self.t)


def _mirror(r: np.ndarray) -> np.ndarray:
    out = np.array(r, dtype=float, copy=True)
    out[..., 0] = -out[..., 0]
    return out


class WaveModel:
    """Base class: composes a packet and its mirror image into a pair amplitude.

    Subclasses provide `_packet_a(r, t) -> (value, grad)` for the packet that
    exits the upper slit; the lower-slit packet is its mirror image.
    """

    dim: ClassVar[int]
    normalizable: ClassVar[bool]
    # Axes along which |Psi|^2 carries no proper distribution (plane-wave
    # factors of unit modulus); empty for fully normalizable variants.
    improper_axes: ClassVar[tuple[int, ...]] = ()

    constants: PhysicalConstants
    composition: Composition = Composition.SYMMETRIZED

    # -- single-particle packets ------------------------------------------

    def _packet_a(self, r: np.ndarray, t) -> tuple[np.ndarray, np.ndarray]:
        raise NotImplementedError

    def _packet_a_value(self, r: np.ndarray, t) -> np.ndarray:
        """Value-only fast path; subclasses override to skip gradient work."""
        return self._packet_a(r, t)[0]

    def _packet_b(self, r: np.ndarray, t) -> tuple[np.ndarray, np.ndarray]:
        value, grad = self._packet_a(_mirror(r), t)
        grad = np.array(grad, copy=True)
        grad[..., 0] = -grad[..., 0]
        return value, grad

    def _packet_b_value(self, r: np.ndarray, t) -> np.ndarray:
        return self._packet_a_value(_mirror(r), t)

    # -- pair amplitude ----------------------------------------------------

    def amplitude(self, r1, r2, t) -> np.ndarray:
        r1 = np.asarray(r1, dtype=float)
        r2 = np.asarray(r2, dtype=float)
        a1 = self._packet_a_value(r1, t)
        b1 = self._packet_b_value(r1, t)
        a2 = self._packet_a_value(r2, t)
        b2 = self._packet_b_value(r2, t)
        if self.composition is Composition.SYMMETRIZED:
            return a1 * b2 + a2 * b1
        return (a1 + b1) * (a2 + b2)

    def amplitude_and_gradients(self, r1, r2, t):
        """Return (Psi, grad_1 Psi, grad_2 Psi) with gradients shaped (..., d)."""
        r1 = np.asarray(r1, dtype=float)
        r2 = np.asarray(r2, dtype=float)
        a1, ga1 = self._packet_a(r1, t)
        b1, gb1 = self._packet_b(r1, t)
        a2, ga2 = self._packet_a(r2, t)
        b2, gb2 = self._packet_b(r2, t)
        if self.composition is Composition.SYMMETRIZED:
            psi = a1 * b2 + a2 * b1
            g1 = ga1 * b2[..., None] + gb1 * a2[..., None]
            g2 = gb2 * a1[..., None] + ga2 * b1[..., None]
        else:
            s1 = a1 + b1
            s2 = a2 + b2
            psi = s1 * s2
            g1 = (ga1 + gb1) * s2[..., None]
            g2 = (ga2 + gb2) * s1[..., None]
        return psi, g1, g2

    def density(self, r1, r2, t) -> np.ndarray:
        psi = self.amplitude(r1, r2, t)
        return psi.real**2 + psi.imag**2

    # -- x-sector helpers ----------------------------------------------------

    def embed_x(self, x1, x2) -> tuple[np.ndarray, np.ndarray]:
        """Lift x coordinates to full positions (remaining coordinates zero)."""
        x1 = np.asarray(x1, dtype=float)
        x2 = np.asarray(x2, dtype=float)
        if self.dim == 1:
            return x1[..., None], x2[..., None]
        z = np.zeros(np.broadcast_shapes(x1.shape, x2.shape))
        r1 = np.stack(np.broadcast_arrays(x1, z), axis=-1)
        r2 = np.stack(np.broadcast_arrays(x2, z), axis=-1)
        return r1, r2

    def x_density(self, x1, x2, t) -> np.ndarray:
        """|Psi|^2 as a function of the x coordinates alone.

        For two-dimensional variants the y dependence of each packet is a pure
        phase, so the density is independent of y and is evaluated at y = 0.
        """
        r1, r2 = self.embed_x(x1, x2)
        return self.density(r1, r2, t)

    # -- scales and normalization -------------------------------------------

    def packet_center(self, t) -> float:
        """x position of the upper-slit packet's center at time t."""
        raise NotImplementedError

    def packet_width(self, t) -> float:
        """Standard deviation of the single-packet position density at time t."""
        raise NotImplementedError

    def x_support(self, t) -> tuple[float, float]:
        """Interval outside which the x density is negligible (< 1e-16 of peak)."""
        c = abs(self.packet_center(t))
        w = self.packet_width(t)
        half = c + _SUPPORT_SIGMAS * w
        return (-half, half)

    def density_scale(self, t) -> float:
        """Order-of-magnitude peak of |Psi|^2 at time t, for node thresholds."""
        c = self.packet_center(t)
        return float(self.x_density(np.asarray(c), np.asarray(-c), t))

    def packet_overlap(self) -> float:
        """Single-particle overlap <psi_a|psi_b>; real and time-independent here."""
        raise NotImplementedError

    def norm_squared_integral(self) -> float:
        """Integral of the unnormalized |Psi|^2 over the proper coordinates."""
        if not self.normalizable:
            raise NotNormalizable(f"{type(self).__name__} has no normalizable density")
        s = self.packet_overlap()
        if self.composition is Composition.SYMMETRIZED:
            return 2.0 * (1.0 + s * s)
        return (2.0 * (1.0 + s)) ** 2


@dataclass(frozen=True)
class PlaneWavePair(WaveModel):
    """Counter-propagating plane waves, one tilted toward each slit.

    psi_a(r, t) = exp{i [kx x + ky y - (hbar/2m)(kx^2 + ky^2) t]} and psi_b is
    its mirror image (kx -> -kx).  The symmetrized pair amplitude reduces to
    2 cos[kx (x1 - x2)] exp{i [ky (y1 + y2) - (hbar/m)(kx^2 + ky^2) t]}, so the
    x velocities vanish identically away from the cosine nodes.
    """

    kx: float = 1.0
    ky: float = 0.0
    constants: PhysicalConstants = field(default_factory=PhysicalConstants)

    dim: ClassVar[int] = 2
    normalizable: ClassVar[bool] = False
    improper_axes: ClassVar[tuple[int, ...]] = (0, 1)
    composition: ClassVar[Composition] = Composition.SYMMETRIZED

    def _packet_a_value(self, r, t):
        hbar, m = self.constants.hbar, self.constants.mass
        x = r[..., 0]
        y = r[..., 1]
        omega = hbar * (self.kx**2 + self.ky**2) / (2.0 * m)
        return np.exp(1j * (self.kx * x + self.ky * y - omega * np.asarray(t)))

    def _packet_a(self, r, t):
        value = self._packet_a_value(r, t)
        grad = np.empty(value.shape + (2,), dtype=complex)
        grad[..., 0] = 1j * self.kx * value
        grad[..., 1] = 1j * self.ky * value
        return value, grad

    def density_scale(self, t) -> float:
        return 4.0

    def packet_overlap(self) -> float:
        raise NotNormalizable("plane waves have no single-particle overlap integral")


@dataclass(frozen=True)
class OscillatorPair(WaveModel):
    """Two coherent oscillator packets swinging in antiphase, one dimension each.

    The upper packet has width sqrt(hbar / 2 m omega) and its center follows
    a cos(omega t); the phase is the standard coherent-state phase

        -(1/2) [omega t + (m omega / 2 hbar)(4 x a sin(omega t)
                                             - a^2 sin(2 omega t))].

    The lower packet is the mirror image, and the pair is always symmetrized.
    The phase of the pair amplitude depends only on x1 - x2, so x1 + x2 is
    conserved along every trajectory and packets never cross within a pair.
    """

    omega: float = 1.0
    a: float = 1.0
    constants: PhysicalConstants = field(default_factory=PhysicalConstants)

    dim: ClassVar[int] = 1
    normalizable: ClassVar[bool] = True
    composition: ClassVar[Composition] = Composition.SYMMETRIZED

    def __post_init__(self):
        if not self.omega > 0:
            raise ValueError("omega must be positive")
        if not self.a > 0:
            raise ValueError("a must be positive")

    def _packet_a_value(self, r, t):
        hbar, m = self.constants.hbar, self.constants.mass
        x = r[..., 0]
        wt = self.omega * np.asarray(t)
        center = self.a * np.cos(wt)
        alpha = m * self.omega / (2.0 * hbar)
        prefactor = (m * self.omega / (np.pi * hbar)) ** 0.25
        phase = -0.5 * (wt + alpha * (4.0 * x * self.a * np.sin(wt)
                                      - self.a**2 * np.sin(2.0 * wt)))
        return prefactor * np.exp(-alpha * (x - center) ** 2 + 1j * phase)

    def _packet_a(self, r, t):
        hbar, m = self.constants.hbar, self.constants.mass
        x = r[..., 0]
        wt = self.omega * np.asarray(t)
        center = self.a * np.cos(wt)
        alpha = m * self.omega / (2.0 * hbar)
        value = self._packet_a_value(r, t)
        dlog = -2.0 * alpha * (x - center) - 2j * alpha * self.a * np.sin(wt)
        return value, (value * dlog)[..., None]

    def packet_center(self, t) -> float:
        return self.a * float(np.cos(self.omega * t))

    def packet_width(self, t) -> float:
        return float(np.sqrt(self.constants.hbar / (2.0 * self.constants.mass * self.omega)))

    def packet_overlap(self) -> float:
        hbar, m = self.constants.hbar, self.constants.mass
        return float(np.exp(-m * self.omega * self.a**2 / hbar))


@dataclass(frozen=True)
class GaussianSlit(WaveModel):
    """Freely spreading Gaussian packets emerging from slits at x = +/- a.

    The upper packet starts as a Gaussian of half-width sigma0 centered at
    x = a with transverse momentum hbar kx and longitudinal momentum hbar ky:

        psi_a(r, 0) = (2 pi sigma0^2)^(-1/4)
                      exp{-(x - a)^2 / 4 sigma0^2 + i [kx (x - a) + ky y]}

    and spreads under free evolution with the complex width
    sigma_t = sigma0 (1 + i hbar t / 2 m sigma0^2):

        psi_a(r, t) = (2 pi sigma_t^2)^(-1/4)
                      exp{-(x - a - (hbar kx/m) t)^2 / 4 sigma0 sigma_t
                          + i [kx (x - a - (hbar kx/2m) t)
                               + ky y - (hbar ky^2/2m) t]}.

    The y dependence is a plane-wave phase, so all position statistics live in
    the x coordinates; the composition may be symmetrized or a product of
    single-particle sums (the latter lets both particles share a slit).
    """

    sigma0: float = 1.0
    a: float = 1.0
    kx: float = 0.0
    ky: float = 0.0
    composition: Composition = Composition.SYMMETRIZED
    constants: PhysicalConstants = field(default_factory=PhysicalConstants)

    dim: ClassVar[int] = 2
    normalizable: ClassVar[bool] = True
    improper_axes: ClassVar[tuple[int, ...]] = (1,)

    def __post_init__(self):
        if not self.sigma0 > 0:
            raise ValueError("sigma0 must be positive")
        if not self.a > 0:
            raise ValueError("a must be positive")
        if not isinstance(self.composition, Composition):
            raise ValueError("composition must be a Composition value")

    def spread_ratio(self, t) -> np.ndarray:
        """Dimensionless hbar t / 2 m sigma0^2 controlling packet spreading."""
        hbar, m = self.constants.hbar, self.constants.mass
        return hbar * np.asarray(t) / (2.0 * m * self.sigma0**2)

    def sigma_t(self, t) -> np.ndarray:
        return self.sigma0 * (1.0 + 1j * self.spread_ratio(t))

    def _packet_a_value(self, r, t):
        hbar, m = self.constants.hbar, self.constants.mass
        x = r[..., 0]
        y = r[..., 1]
        t = np.asarray(t)
        vx = hbar * self.kx / m
        sig_t = self.sigma_t(t)
        center = self.a + vx * t
        prefactor = (2.0 * np.pi * sig_t**2) ** (-0.25)
        exponent = (-((x - center) ** 2) / (4.0 * self.sigma0 * sig_t)
                    + 1j * (self.kx * (x - self.a - 0.5 * vx * t)
                            + self.ky * y - hbar * self.ky**2 * t / (2.0 * m)))
        return prefactor * np.exp(exponent)

    def _packet_a(self, r, t):
        hbar, m = self.constants.hbar, self.constants.mass
        x = r[..., 0]
        t = np.asarray(t)
        vx = hbar * self.kx / m
        sig_t = self.sigma_t(t)
        center = self.a + vx * t
        value = self._packet_a_value(r, t)
        grad = np.empty(np.broadcast(x, t).shape + (2,), dtype=complex)
        grad[..., 0] = value * (-(x - center) / (2.0 * self.sigma0 * sig_t) + 1j * self.kx)
        grad[..., 1] = value * (1j * self.ky)
        return value, grad

    def packet_center(self, t) -> float:
        vx = self.constants.hbar * self.kx / self.constants.mass
        return self.a + vx * float(t)

    def packet_width(self, t) -> float:
        tau = float(self.spread_ratio(t))
        return self.sigma0 * float(np.sqrt(1.0 + tau * tau))

    def packet_overlap(self) -> float:
        return float(np.exp(-self.a**2 / (2.0 * self.sigma0**2)
                            - 2.0 * self.kx**2 * self.sigma0**2))


class ScaledModel(WaveModel):
    """A model with its amplitude multiplied by a fixed complex constant.

    Diagnostic wrapper: guidance velocities must be invariant under this
    rescaling, which property checks exploit.
    """

    def __init__(self, base: WaveModel, factor: complex):
        if factor == 0:
            raise ValueError("factor must be nonzero")
        self.base = base
        self.factor = complex(factor)
        self.constants = base.constants

    @property
    def dim(self) -> int:
        return self.base.dim

    @property
    def normalizable(self) -> bool:
        return self.base.normalizable

    @property
    def improper_axes(self) -> tuple[int, ...]:
        return self.base.improper_axes

    @property
    def composition(self) -> Composition:
        return self.base.composition

    def amplitude(self, r1, r2, t):
        return self.factor * self.base.amplitude(r1, r2, t)

    def amplitude_and_gradients(self, r1, r2, t):
        psi, g1, g2 = self.base.amplitude_and_gradients(r1, r2, t)
        return self.factor * psi, self.factor * g1, self.factor * g2

    def density(self, r1, r2, t):
        return abs(self.factor) ** 2 * self.base.density(r1, r2, t)

    def x_density(self, x1, x2, t):
        return abs(self.factor) ** 2 * self.base.x_density(x1, x2, t)

    def embed_x(self, x1, x2):
        return self.base.embed_x(x1, x2)

    def packet_center(self, t):
        return self.base.packet_center(t)

    def packet_width(self, t):
        return self.base.packet_width(t)

    def x_support(self, t):
        return self.base.x_support(t)

    def density_scale(self, t):
        return abs(self.factor) ** 2 * self.base.density_scale(t)

    def packet_overlap(self):
        return self.base.packet_overlap()

    def norm_squared_integral(self):
        return abs(self.factor) ** 2 * self.base.norm_squared_integral()


# -- point-wise operations ----------------------------------------------------


def evaluate(model: WaveModel, p: ConfigPoint) -> complex:
    """Unnormalized pair amplitude Psi(r1, r2; t) at a configuration point."""
    _check_dim(model, p)
    return complex(model.amplitude(p.r1, p.r2, p.t))


def gradient(model: WaveModel, p: ConfigPoint) -> tuple[np.ndarray, np.ndarray]:
    """Analytic (grad_1 Psi, grad_2 Psi) as complex vectors of length d."""
    _check_dim(model, p)
    _, g1, g2 = model.amplitude_and_gradients(p.r1, p.r2, p.t)
    return np.asarray(g1, dtype=complex), np.asarray(g2, dtype=complex)


def norm_squared_density(model: WaveModel, p: ConfigPoint) -> float:
    """|Psi(r1, r2; t)|^2, unnormalized."""
    _check_dim(model, p)
    return float(model.density(p.r1, p.r2, p.t))


def normalization_constant(model: WaveModel, t: float = 0.0) -> float:
    """Constant N with N^2 * integral(|Psi|^2) = 1 over the proper coordinates.

    Closed form from the single-particle overlap s = <psi_a|psi_b>:
    2 (1 + s^2) for the symmetrized composition and [2 (1 + s)]^2 for the
    product composition.  Time-independent under the models' unitary
    evolution; raises NotNormalizable for plane waves.
    """
    return float(1.0 / np.sqrt(model.norm_squared_integral()))


def _check_dim(model: WaveModel, p: ConfigPoint) -> None:
    if p.dim != model.dim:
        raise ValueError(
            f"point dimension {p.dim} does not match model dimension {model.dim}"
        )
