"""Two-particle pilot-wave trajectory simulator for double-slit devices.

Closed-form two-particle wave models (plane waves, antiphase oscillator
packets, spreading Gaussian slit packets), first-order guidance-equation
dynamics, reproducible |Psi|^2 ensembles, and quadrature/Monte-Carlo
detection statistics for verifying that trajectory ensembles reproduce the
quantum joint-detection probabilities.
"""

from .dynamics import (IntegratorSettings, Trajectory, TrajectoryStatus,
                       VelocityPair, constraint_residual, integrate,
                       integrate_batch, velocity, velocity_field,
                       velocity_sum_x)
from .ensemble import (Ensemble, SamplerSettings, SampleResult, SlitPartition,
                       different_slit_filter, propagate, sample_initial,
                       sample_positions)
from .errors import (Bohm2pError, ConfigError, EmptyEnsemble, MaxStepsExceeded,
                     NodeProximity, NotNormalizable, PoorMixingWarning,
                     QuadratureNotConverged, UnsupportedModel)
from .statistics import (CrossingSummary, DetectionReport, MarginalDistribution,
                         MarginalReport, Region, bohmian_detection,
                         crossing_statistics, joint_probability, ks_critical_value,
                         ks_statistic, marginal_histogram)
from .wavefunction import (Composition, ConfigPoint, GaussianSlit,
                           OscillatorPair, PhysicalConstants, PlaneWavePair,
                           ScaledModel, WaveModel, evaluate, gradient,
                           norm_squared_density, normalization_constant)

__version__ = "0.1.0"
