import numpy as np
import pytest
from scipy.integrate import dblquad

from bohm2p import (Composition, GaussianSlit, IntegratorSettings, OscillatorPair,
                    PlaneWavePair, Region, SamplerSettings, bohmian_detection,
                    crossing_statistics, joint_probability, ks_critical_value,
                    ks_statistic, marginal_histogram, normalization_constant,
                    propagate, sample_initial, MarginalDistribution)
from bohm2p.errors import EmptyEnsemble, NotNormalizable

SEED = 20260809
TIGHT = IntegratorSettings(rel_tol=1e-11, abs_tol=1e-13)


def slit_model(**kw):
    base = dict(sigma0=1.0, a=5.0, kx=0.0, ky=1.0)
    base.update(kw)
    return GaussianSlit(**base)


@pytest.fixture(scope="module")
def small_ensemble():
    model = slit_model()
    points = sample_initial(model, SamplerSettings(n_samples=800, seed=SEED))
    return propagate(model, points, 10.0, settings=TIGHT,
                     t_eval=np.linspace(0, 10, 11), seed=SEED)


# -- regions ----------------------------------------------------------------------


def test_region_validation_and_contains():
    with pytest.raises(ValueError):
        Region(((1.0, 0.0), (None, None)))
    r = Region(((0.0, None), (None, None)))
    assert r.dim == 2
    pts = np.array([[1.0, -5.0], [-0.1, 2.0]])
    assert list(r.contains(pts)) == [True, False]
    assert Region.all_space(1).contains(np.array([[3.0]]))[0]


def test_region_intersection():
    a = Region(((0.0, 2.0),))
    b = Region(((1.0, 5.0),))
    assert a.intersect(b).bounds == ((1.0, 2.0),)
    c = Region(((3.0, 4.0),))
    assert a.intersect(c) is None


# -- quadrature probabilities -------------------------------------------------------


@pytest.mark.parametrize("model", [
    OscillatorPair(omega=1.3, a=1.0),
    slit_model(),
    slit_model(kx=0.5, composition=Composition.PRODUCT),
])
def test_all_space_probability_is_one(model):
    full = Region.all_space(model.dim)
    for t in (0.0, 2.0):
        assert joint_probability(model, full, full, t) == pytest.approx(1.0,
                                                                        abs=1e-7)


def test_joint_probability_exchange_symmetric():
    model = slit_model()
    r1 = Region(((0.0, None), (None, None)))
    r2 = Region(((None, 1.5), (None, None)))
    assert joint_probability(model, r1, r2, 3.0) == joint_probability(model, r2,
                                                                      r1, 3.0)


def test_joint_probability_monotone_in_region():
    model = slit_model()
    small = Region(((4.0, 6.0), (None, None)))
    large = Region(((3.0, 7.0), (None, None)))
    other = Region(((None, 0.0), (None, None)))
    assert joint_probability(model, small, other, 1.0) <= joint_probability(
        model, large, other, 1.0)


def test_joint_probability_against_scipy_dblquad():
    model = slit_model()
    t = 4.0
    norm2 = normalization_constant(model, t) ** 2

    def dens(x2, x1):
        return norm2 * float(model.x_density(np.asarray(x1), np.asarray(x2), t))

    value, err = dblquad(dens, 0.0, 9.0, -9.0, 0.0, epsabs=1e-10, epsrel=1e-9)
    r1 = Region(((0.0, 9.0), (None, None)))
    r2 = Region(((-9.0, 0.0), (None, None)))
    # unordered event over disjoint boxes doubles the ordered integral
    assert joint_probability(model, r1, r2, t) == pytest.approx(2 * value,
                                                                abs=1e-7)


def test_same_side_probability_rises_with_spreading():
    model = slit_model(a=10.0)
    upper = Region.x_above(0.0, 2)
    early = joint_probability(model, upper, upper, 0.2)
    late = joint_probability(model, upper, upper, 10.0)
    assert early < 1e-6
    assert late > 0.01
    assert early < late


def test_plane_wave_probability_not_normalizable():
    model = PlaneWavePair(kx=1.0, ky=1.0)
    full = Region.all_space(2)
    with pytest.raises(NotNormalizable):
        joint_probability(model, full, full, 0.0)


def test_finite_y_bounds_rejected_for_slit_model():
    model = slit_model()
    bounded_y = Region(((None, None), (0.0, 1.0)))
    with pytest.raises(NotNormalizable):
        joint_probability(model, bounded_y, Region.all_space(2), 0.0)


# -- ensemble detection --------------------------------------------------------------


def test_detection_all_space_fraction_one(small_ensemble):
    full = Region.all_space(2)
    rep = bohmian_detection(small_ensemble, full, full, 10.0)
    assert rep.bohmian_fraction == 1.0
    assert rep.quantum_probability == pytest.approx(1.0, abs=1e-7)
    assert rep.n_effective == len(small_ensemble)


def test_detection_agreement_within_three_sigma(small_ensemble):
    upper = Region.x_above(0.0, 2)
    rep = bohmian_detection(small_ensemble, upper, upper, 10.0)
    assert rep.quantum_probability > 0.01
    assert abs(rep.bohmian_fraction - rep.quantum_probability) <= \
        3 * rep.mc_standard_error


def test_detection_early_time_both_zero(small_ensemble):
    upper = Region.x_above(0.0, 2)
    rep = bohmian_detection(small_ensemble, upper, upper, 1.0)
    assert rep.bohmian_fraction == 0.0
    assert rep.quantum_probability < 1e-4


def test_detection_symmetric_under_region_swap(small_ensemble):
    r1 = Region(((0.0, None), (None, None)))
    r2 = Region(((None, 2.0), (None, None)))
    a = bohmian_detection(small_ensemble, r1, r2, 10.0)
    b = bohmian_detection(small_ensemble, r2, r1, 10.0)
    assert a.bohmian_fraction == b.bohmian_fraction
    assert a.quantum_probability == b.quantum_probability


def test_detection_empty_ensemble():
    model = slit_model()
    ens = propagate(model, [], 1.0)
    with pytest.raises(EmptyEnsemble):
        bohmian_detection(ens, Region.all_space(2), Region.all_space(2), 1.0)


def test_detection_time_off_grid(small_ensemble):
    full = Region.all_space(2)
    with pytest.raises(ValueError):
        bohmian_detection(small_ensemble, full, full, 3.3)


# -- crossing statistics ---------------------------------------------------------------


def test_crossing_statistics_counts(small_ensemble):
    summary = crossing_statistics(small_ensemble)
    assert summary.n_pairs == len(small_ensemble)
    assert summary.both_above + summary.both_below + summary.split == summary.n_pairs
    assert summary.histogram_counts.sum() == summary.n_pairs
    # pair midpoints cluster within a few slit widths of the symmetry plane
    assert summary.midpoint_fraction_within(3.0) > 0.99


def test_crossing_statistics_empty():
    ens = propagate(slit_model(), [], 1.0)
    with pytest.raises(EmptyEnsemble):
        crossing_statistics(ens)


# -- marginals and goodness of fit --------------------------------------------------


def test_ks_statistic_hand_case():
    values = np.array([0.25, 0.75])
    assert ks_statistic(values, lambda v: np.asarray(v)) == pytest.approx(0.25)


def test_ks_critical_value_one_percent():
    assert ks_critical_value(10000, 0.01) == pytest.approx(1.6276 / 100.0,
                                                           abs=1e-4)


def test_marginal_distribution_is_normalized():
    model = slit_model()
    for coord in ("x1", "x2", "x1+x2"):
        dist = MarginalDistribution(model, coord, 3.0)
        lo, hi = dist.support
        assert dist.cdf(lo) == 0.0
        assert dist.cdf(hi) == pytest.approx(1.0, abs=1e-12)
        grid = np.linspace(lo, hi, 20001)
        total = np.trapezoid(dist.pdf(grid), grid)
        assert total == pytest.approx(1.0, abs=1e-4)


def test_marginal_histogram_ks_passes(small_ensemble):
    for t in (0.0, 10.0):
        for coord in ("x1", "x2", "x1+x2"):
            rep = marginal_histogram(small_ensemble, coord, t)
            assert rep.counts.sum() == rep.n
            assert rep.ks_distance < rep.ks_critical, (coord, t)


def test_marginal_histogram_quantum_density_matches_counts(small_ensemble):
    rep = marginal_histogram(small_ensemble, "x1", 0.0, bins=30)
    widths = np.diff(rep.bin_edges)
    expected = rep.quantum_bin_density * widths * rep.n
    # coarse shape agreement between histogram and quadrature density
    big = expected > 20
    assert np.all(np.abs(rep.counts[big] - expected[big])
                  <= 5 * np.sqrt(expected[big]) + 5)


def test_marginal_histogram_plane_wave_propagates_error():
    model = PlaneWavePair(kx=1.0, ky=1.0)
    from bohm2p import ConfigPoint
    points = [ConfigPoint([0.1, 0.0], [-0.2, 0.0], 0.0)]
    ens = propagate(model, points, 1.0)
    with pytest.raises(NotNormalizable):
        marginal_histogram(ens, "x1", 1.0)


def test_marginal_histogram_empty_ensemble():
    ens = propagate(slit_model(), [], 1.0)
    with pytest.raises(EmptyEnsemble):
        marginal_histogram(ens, "x1", 1.0)


def test_marginal_bad_coordinate(small_ensemble):
    with pytest.raises(ValueError):
        marginal_histogram(small_ensemble, "y1", 0.0)
