import math
import warnings
from dataclasses import replace

import numpy as np
import pytest
from scipy.spatial.transform import Rotation
from scipy.special import gamma

from d2line.crystal_field import tensor_basis
from d2line.ensemble import (
    BLOCK_SIZE,
    ContrastFitError,
    EnsembleConfig,
    FluctuationModel,
    OrientationDistribution,
    SpectrumHistogram,
    block_rng,
    calibrate_sigma,
    contrast_scan,
    derive_seed,
    sample_traceless_tensor,
    sample_unit_vector,
    simulate_spectrum,
)
from d2line.fitting import fit_two_gaussians
from d2line.optics import Analyzer, Depolarized, Geometry, NoAnalyzer

X, Y, Z = np.eye(3)
# mean of a chi distribution with 5 degrees of freedom
MEAN_CHI5 = math.sqrt(2) * gamma(3) / gamma(2.5)


def iso_cfg(n=100_000, seed=5, sigma=40.0, geometry=None, **kw):
    return EnsembleConfig(
        n_samples=n,
        seed=seed,
        orientation=OrientationDistribution.isotropic(),
        fluctuation=FluctuationModel(sigma, kw.pop("sigma_iso", 0.0), kw.pop("mean_shift", 0.0)),
        geometry=geometry or Geometry(Z, Analyzer(Z)),
        **kw,
    )


def test_unit_vector_moments():
    n = 100_000
    v = sample_unit_vector(np.random.default_rng(0), n)
    np.testing.assert_allclose(np.linalg.norm(v, axis=1), 1, atol=1e-14)
    assert abs(v[:, 2].mean()) < 3 / math.sqrt(n / 3)
    assert v[:, 2].var() + v[:, 2].mean() ** 2 == pytest.approx(1 / 3, abs=0.01)
    assert sample_unit_vector(np.random.default_rng(0)).shape == (3,)


def test_fixed_orientation_short_circuits():
    d = OrientationDistribution.fixed((0.0, 1.0, 0.0))
    np.testing.assert_array_equal(d.sample(np.random.default_rng(0), 4), np.tile([0.0, 1.0, 0.0], (4, 1)))
    with pytest.raises(ValueError):
        OrientationDistribution.fixed((1.0, 1.0, 0.0))
    with pytest.raises(ValueError):
        OrientationDistribution("powder")


def test_traceless_tensor_sampling():
    rng = np.random.default_rng(1)
    assert np.all(sample_traceless_tensor(rng, 0.0).q == 0)
    q = sample_traceless_tensor(rng, 3.0, 100_000)
    norms = np.linalg.norm(q, axis=(1, 2))
    assert np.all(np.abs(np.trace(q, axis1=1, axis2=2)) < 1e-12 * norms)
    coef = np.einsum("nab,mab->nm", q, tensor_basis())
    np.testing.assert_allclose(coef.var(axis=0), 9.0, rtol=0.05)
    # rotation invariance: a diagonal and an off-diagonal Cartesian entry share
    # the variances 2/3 sigma^2 and 1/2 sigma^2 in any frame
    R = Rotation.random(random_state=2).as_matrix()
    qr = np.einsum("ab,nbc,dc->nad", R, q, R)
    for arr in (q, qr):
        assert arr[:, 0, 0].var() == pytest.approx(2 / 3 * 9, rel=0.05)
        assert arr[:, 0, 1].var() == pytest.approx(9 / 2, rel=0.05)
    with pytest.raises(ValueError):
        sample_traceless_tensor(rng, -1.0)


def test_config_validation():
    with pytest.raises(ValueError):
        EnsembleConfig(n_samples=0, seed=1)
    with pytest.raises(ValueError):
        EnsembleConfig(n_samples=10, seed=-1)
    with pytest.raises(ValueError):
        EnsembleConfig(n_samples=10, seed=1, histogram=(5, 5, 10))
    with pytest.raises(ValueError):
        EnsembleConfig(n_samples=10, seed=1, histogram=(0, 5, 1))
    with pytest.raises(ValueError):
        EnsembleConfig(n_samples=10, seed=1, kernel_width=-1)
    with pytest.raises(ValueError):
        FluctuationModel(sigma_aniso=-1)
    assert EnsembleConfig(n_samples=1, seed=0, fluctuation=FluctuationModel(mean_shift=100)).binning == (-500, 700, 600)


def test_static_degenerate_limit():
    n = 20_000
    cfg = EnsembleConfig(n_samples=n, seed=1, static_B=200, fluctuation=FluctuationModel(mean_shift=11700.0))
    spec = simulate_spectrum(cfg)
    nz = np.flatnonzero(spec.intensities)
    assert nz.size == 1
    lo, hi = spec.centers[nz[0]] - 1, spec.centers[nz[0]] + 1
    assert lo <= 11600.0 < hi
    assert spec.intensities[nz[0]] == pytest.approx(4 / 9 * n, rel=1e-12)
    assert spec.stats.sum_u == pytest.approx(0, abs=1e-10)
    assert spec.stats.n_degenerate == 0


def test_unsplit_level_single_stick():
    spec = simulate_spectrum(EnsembleConfig(n_samples=100, seed=1, geometry=Geometry(Y, Analyzer(X))))
    assert spec.stats.n_degenerate == 100
    assert spec.intensities.sum() == pytest.approx(100 / 9)


def test_weight_conservation_and_kernel():
    cfg = iso_cfg(n=30_000, sigma_iso=20.0, histogram=(-150, 150, 100))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        for kw in (0.0, 15.0):
            spec = simulate_spectrum(replace(cfg, kernel_width=kw))
            total = spec.stats.sum_l + spec.stats.sum_u
            kept = spec.intensities.sum()
            assert kept + spec.metadata["clipped_weight"] == pytest.approx(total, rel=1e-9)
            assert spec.metadata["total_weight"] == pytest.approx(total, rel=1e-9)
            assert spec.clipped_fraction > 0


def test_clipping_warning():
    cfg = iso_cfg(n=5000, histogram=(-50, 50, 50))
    with pytest.warns(RuntimeWarning, match="outside the histogram"):
        spec = simulate_spectrum(cfg)
    assert spec.metadata["clipping_warning"]
    spec = simulate_spectrum(iso_cfg(n=5000))
    assert not spec.metadata["clipping_warning"]


def test_determinism_across_workers_and_runs():
    cfg = iso_cfg(n=3 * BLOCK_SIZE + 17, kernel_width=4.0)
    a = simulate_spectrum(cfg, n_workers=1)
    b = simulate_spectrum(cfg, n_workers=4)
    c = simulate_spectrum(cfg, n_workers=1)
    assert a.intensities.tobytes() == b.intensities.tobytes() == c.intensities.tobytes()
    assert a.stats == b.stats
    d = simulate_spectrum(replace(cfg, seed=6))
    assert not np.array_equal(a.intensities, d.intensities)


def test_block_streams_are_distinct():
    x0 = block_rng(1, 0).standard_normal(4)
    x1 = block_rng(1, 1).standard_normal(4)
    y0 = block_rng(2, 0).standard_normal(4)
    assert not np.array_equal(x0, x1) and not np.array_equal(x0, y0)
    np.testing.assert_array_equal(x0, block_rng(1, 0).standard_normal(4))
    assert derive_seed(1, 0, 0) != derive_seed(1, 0, 1)


def test_mean_splitting_oracle():
    sigma = 40.0
    spec = simulate_spectrum(iso_cfg(n=100_000, sigma=sigma))
    st = spec.stats
    expected = math.sqrt(6) * sigma * MEAN_CHI5
    assert abs(st.mean_splitting - expected) < 3 * st.mean_splitting_stderr


@pytest.mark.parametrize("mode", [Analyzer(Z), Analyzer(X), NoAnalyzer(), Depolarized()])
@pytest.mark.parametrize("exc", [Z, Y])
def test_pure_fluctuation_equal_weights(mode, exc):
    spec = simulate_spectrum(iso_cfg(geometry=Geometry(exc, mode)))
    st = spec.stats
    assert abs(st.ratio - 1) < 3 * st.ratio_stderr


def test_pure_fluctuation_fixed_axis_is_also_isotropic():
    # with static_B = 0 the crystal axis plays no role
    cfg = replace(iso_cfg(), orientation=OrientationDistribution.fixed())
    st = simulate_spectrum(cfg).stats
    assert abs(st.ratio - 1) < 3 * st.ratio_stderr


def test_isotropic_ensemble_rotation_invariance():
    R = Rotation.random(random_state=7).as_matrix()
    base = iso_cfg(n=100_000, sigma=30.0)
    base = replace(base, static_B=150.0, geometry=Geometry(Y, Analyzer(X)))
    rotated = replace(base, seed=99, geometry=Geometry(R @ Y, Analyzer(R @ X, R @ Y)))
    a, b = simulate_spectrum(base).stats, simulate_spectrum(rotated).stats
    for attr in ("sum_l", "sum_u"):
        # per-sample standard error of each component area
        mean_a, mean_b = getattr(a, attr) / a.n, getattr(b, attr) / b.n
        sq = "sum_ll" if attr == "sum_l" else "sum_uu"
        se = math.sqrt((getattr(a, sq) / a.n - mean_a**2) / a.n + (getattr(b, sq) / b.n - mean_b**2) / b.n)
        assert abs(mean_a - mean_b) < 3 * se


def test_static_plus_fluctuation_reduces_zz_contrast():
    cfg = EnsembleConfig(n_samples=50_000, seed=4, static_B=200, fluctuation=FluctuationModel(100.0))
    w_zz = simulate_spectrum(cfg).stats.upper_fraction
    cfg_yx = replace(cfg, geometry=Geometry(Y, Analyzer(X)))
    w_yx = simulate_spectrum(cfg_yx).stats.upper_fraction
    assert w_yx - w_zz < 0.9


def test_contrast_scan_static_and_monotone():
    base = EnsembleConfig(n_samples=40_000, seed=8)
    pts = contrast_scan(200.0, [0, 50, 100, 200, 400], base)
    assert pts[0].contrast == pytest.approx(0.9, abs=1e-12)
    assert pts[0].w_yx == pytest.approx(0.9, abs=1e-12) and pts[0].w_zz == pytest.approx(0, abs=1e-12)
    for a, b in zip(pts, pts[1:]):
        assert b.contrast <= a.contrast + 3 * math.hypot(a.stderr, b.stderr)
    assert pts[-1].contrast < pts[0].contrast
    again = contrast_scan(200.0, [0, 50, 100, 200, 400], base)
    assert again == pts


def test_contrast_vanishes_for_large_sigma():
    pts = contrast_scan(200.0, [800, 4000], EnsembleConfig(n_samples=50_000, seed=9))
    assert pts[1].contrast < pts[0].contrast
    assert abs(pts[1].contrast) < 0.02


def test_contrast_fit_method_and_failures():
    base = EnsembleConfig(n_samples=40_000, seed=10, kernel_width=10.0, histogram=(-1500, 1500, 1500))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        fit_pts = contrast_scan(200.0, [100.0], base, method="fit")
    stick_pts = contrast_scan(200.0, [100.0], base)
    assert fit_pts[0].contrast == pytest.approx(stick_pts[0].contrast, abs=0.02)
    # a zero-width static spectrum cannot be fitted
    bare = EnsembleConfig(n_samples=1000, seed=10)
    with pytest.raises(ContrastFitError) as info:
        contrast_scan(200.0, [0.0], bare, method="fit")
    assert info.value.sigma == 0.0
    rec = contrast_scan(200.0, [0.0], bare, method="fit", on_error="record")
    assert rec[0].error and math.isnan(rec[0].contrast)
    with pytest.raises(ValueError):
        contrast_scan(200.0, [0.0], bare, method="magic")


def test_calibrate_sigma_mean_observable():
    base = iso_cfg(n=50_000, sigma=1.0)
    sigma = calibrate_sigma(200.0, base, observable="mean", tol=0.01)
    # analytic inverse of mean splitting = sqrt(6) sigma E[chi_5]
    assert sigma == pytest.approx(200.0 / (math.sqrt(6) * MEAN_CHI5), rel=0.01)


def test_calibrate_sigma_fit_observable():
    base = iso_cfg(n=50_000, sigma=1.0, kernel_width=0.0)
    sigma = calibrate_sigma(200.0, base, observable="fit", tol=0.05)
    spec = simulate_spectrum(replace(base, fluctuation=replace(base.fluctuation, sigma_aniso=sigma)))
    assert fit_two_gaussians(spec.centers, spec.intensities).splitting == pytest.approx(200.0, abs=0.05)
    with pytest.raises(ValueError):
        calibrate_sigma(-1.0, base)


def test_histogram_type():
    with pytest.raises(ValueError):
        SpectrumHistogram(np.array([0.0, 0.0, 1.0]), np.zeros(3))
    with pytest.raises(ValueError):
        SpectrumHistogram(np.arange(3.0), np.array([0, -1.0, 0]))
    with pytest.raises(ValueError):
        SpectrumHistogram(np.arange(3.0), np.zeros(3), axis="eV")
    h = SpectrumHistogram(np.array([11000.0, 12000.0, 13000.0]), np.array([1.0, 2.0, 3.0]))
    nm = h.to_nm()
    assert nm.axis == "nm" and np.all(np.diff(nm.centers) > 0)
    np.testing.assert_array_equal(nm.intensities, [3.0, 2.0, 1.0])
