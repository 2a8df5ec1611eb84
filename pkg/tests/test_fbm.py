import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from semimarket.fbm import (
    HurstEstimate,
    fgn_autocovariance,
    hurst_aggregated_variance,
    hurst_split,
    hurst_variogram,
    quadratic_variation,
    sample_fbm,
    sample_fgn,
    sample_mixed,
)
from semimarket.paths import SamplePath


def test_fgn_autocovariance_values():
    assert fgn_autocovariance(0.5, 0) == pytest.approx(1.0)
    for k in (1, 2, 5):
        assert fgn_autocovariance(0.5, k) == pytest.approx(0.0, abs=1e-14)
    assert fgn_autocovariance(0.75, 1) == pytest.approx(0.5 * (2**1.5 - 2))
    assert fgn_autocovariance(0.75, 0) == pytest.approx(1.0)


def test_fgn_autocovariance_alpha_domain():
    with pytest.raises(ValueError):
        fgn_autocovariance(1.0, 1)
    with pytest.raises(ValueError):
        fgn_autocovariance(0.0, 1)


@given(st.floats(min_value=0.55, max_value=0.95), st.integers(min_value=1, max_value=200))
@settings(max_examples=40, deadline=None)
def test_fgn_autocovariance_telescoping(hurst, n):
    # Var(sum of n+1 consecutive increments) = (n+1)^{2H}, i.e. the lag sums telescope
    k = np.arange(-n, n + 1)
    total = np.sum((n + 1 - np.abs(k)) * fgn_autocovariance(hurst, np.abs(k)))
    assert total == pytest.approx((n + 1) ** (2 * hurst), rel=1e-9)


def test_fgn_matches_cholesky_covariance():
    # circulant embedding vs the dense-covariance construction, distributionally
    rng = np.random.default_rng(0)
    n, reps, hurst = 64, 4000, 0.75
    sims = np.array([sample_fgn(hurst, n, rng) for _ in range(reps)])
    emp = sims.T @ sims / reps
    exact = fgn_autocovariance(hurst, np.abs(np.subtract.outer(np.arange(n), np.arange(n))))
    se = np.sqrt((1.0 + exact**2) / reps)
    assert np.all(np.abs(emp - exact) < 5 * se)


def test_fbm_variance_selfsimilar():
    rng = np.random.default_rng(1)
    n, reps, hurst, dt = 256, 3000, 0.7, 0.125
    ends = np.array([sample_fbm(hurst, n, dt, rng).values[[64, 128, 256]] for _ in range(reps)])
    var = ends.var(axis=0)
    t = np.array([64, 128, 256]) * dt
    expected = t ** (2 * hurst)
    se = expected * np.sqrt(2.0 / reps)
    assert np.all(np.abs(var - expected) < 4 * se)


def test_fbm_increment_autocovariance():
    rng = np.random.default_rng(2)
    n, reps, hurst = 128, 5000, 0.75
    acov = np.zeros(6)
    for _ in range(reps):
        inc = np.diff(sample_fbm(hurst, n, 1.0, rng).values)
        for k in range(6):
            acov[k] += np.mean(inc[k:] * inc[: n - k] if k else inc * inc)
    acov /= reps
    expected = fgn_autocovariance(hurst, np.arange(6))
    assert np.all(np.abs(acov - expected) < 4 / np.sqrt(reps * n / 4))


def test_fbm_h_half_is_brownian():
    rng = np.random.default_rng(3)
    inc = np.diff(sample_fbm(0.5, 2**12, 1.0, rng).values)
    lag1 = np.mean(inc[1:] * inc[:-1])
    assert abs(lag1) < 4 / np.sqrt(inc.size)


def test_fbm_starts_at_zero_and_shapes():
    path = sample_fbm(0.6, 100, 0.25, np.random.default_rng(0))
    assert path.values[0] == 0.0
    assert path.n == 101
    assert path.horizon == pytest.approx(25.0)


def test_fgn_small_n_cholesky_path():
    rng = np.random.default_rng(4)
    x = sample_fgn(0.8, 8, rng)
    assert x.shape == (8,)


def test_mixed_path_delta_zero_is_pure_fbm():
    rng1 = np.random.default_rng(5)
    rng2 = np.random.default_rng(5)
    pure = sample_mixed(0.75, 0.0, 256, 1.0, rng1)
    spawned = rng2.spawn(2)[0]
    ref = sample_fbm(0.75, 256, 1.0, spawned)
    np.testing.assert_allclose(pure.values, ref.values)


def test_mixed_path_qv_tracks_wiener_component():
    rng = np.random.default_rng(6)
    n, dt, delta = 2**12, 1.0 / 2**12, 1.5
    qvs = [quadratic_variation(sample_mixed(0.75, delta, n, dt, rng)) for _ in range(40)]
    assert np.mean(qvs) == pytest.approx(delta**2, rel=0.15)  # QV ≈ delta^2 * T, T = 1


def test_mixed_small_scale_hurst_near_half():
    rng = np.random.default_rng(7)
    path = sample_mixed(0.75, 1.0, 2**14, 1.0 / 2**10, rng)
    fine, coarse = hurst_split(path)
    assert abs(fine.h_hat - 0.5) < 0.07
    assert coarse.h_hat > fine.h_hat


# -- estimators -----------------------------------------------------------------

@pytest.mark.parametrize("hurst", [0.5, 0.75])
def test_estimators_recover_hurst(hurst):
    rng = np.random.default_rng(8)
    path = sample_fbm(hurst, 2**14, 1.0, rng)
    est_v = hurst_variogram(path)
    est_a = hurst_aggregated_variance(path)
    assert abs(est_v.h_hat - hurst) < 0.05
    assert abs(est_a.h_hat - hurst) < 0.05
    assert est_v.r_squared > 0.98


def test_estimators_scale_invariant():
    rng = np.random.default_rng(9)
    path = sample_fbm(0.7, 2**12, 1.0, rng)
    scaled = SamplePath(dt=path.dt, values=-3.7 * path.values)
    assert hurst_variogram(scaled).h_hat == pytest.approx(hurst_variogram(path).h_hat, rel=1e-9)
    assert hurst_aggregated_variance(scaled).h_hat == pytest.approx(
        hurst_aggregated_variance(path).h_hat, rel=1e-9)


def test_variogram_robust_to_drift_aggvar_flags_it():
    rng = np.random.default_rng(10)
    path = sample_fbm(0.75, 2**14, 1.0, rng)
    t = path.times
    drifted = SamplePath(dt=path.dt, values=path.values + 0.1 * t)
    small = hurst_variogram(drifted, max_lag=32)
    assert abs(small.h_hat - 0.75) < 0.08  # small lags barely see the drift
    flagged = hurst_aggregated_variance(drifted)
    clean = hurst_aggregated_variance(path)
    # drift bends the aggregated-moment curve at coarse blocks: fit quality drops
    assert flagged.r_squared < clean.r_squared - 0.001


def test_estimator_rejects_short_and_degenerate():
    with pytest.raises(ValueError, match="2\\^10"):
        hurst_variogram(SamplePath(dt=1.0, values=np.random.default_rng(0).standard_normal(100)))
    flat = SamplePath(dt=1.0, values=np.zeros(2**11))
    with pytest.raises(ValueError, match="degenerate"):
        hurst_variogram(flat)


def test_hurst_estimate_invariants():
    with pytest.raises(ValueError):
        HurstEstimate(h_hat=1.2, stderr=0.01, method="x", r_squared=1.0, n_scales=5)
    with pytest.raises(ValueError):
        HurstEstimate(h_hat=0.5, stderr=-1.0, method="x", r_squared=1.0, n_scales=5)


# -- quadratic variation -----------------------------------------------------------

def test_qv_wiener_near_horizon():
    rng = np.random.default_rng(11)
    qvs = [quadratic_variation(sample_fbm(0.5, 2**12, 1.0 / 2**12, rng)) for _ in range(50)]
    assert np.mean(qvs) == pytest.approx(1.0, abs=0.02)


def test_qv_fbm_vanishes_under_refinement():
    rng = np.random.default_rng(12)
    path = sample_fbm(0.75, 2**14, 1.0 / 2**14, rng)
    qv_coarse = quadratic_variation(path, block=64)
    qv_mid = quadratic_variation(path, block=16)
    qv_fine = quadratic_variation(path, block=4)
    # QV scales like (block dt)^{2H-1}: factor 2 per two dyadic levels
    assert qv_mid < qv_coarse / 1.6
    assert qv_fine < qv_mid / 1.6


def test_qv_wiener_refinement_stable():
    rng = np.random.default_rng(13)
    path = sample_fbm(0.5, 2**14, 1.0 / 2**14, rng)
    ratios = quadratic_variation(path, block=1) / quadratic_variation(path, block=16)
    assert 0.9 < ratios < 1.1


def test_qv_smooth_path_zero():
    # QV of a C^1 path scales like dt: refining the grid drives it to zero
    def qv_at(n):
        t = np.linspace(0.0, 1.0, n + 1)
        return quadratic_variation(SamplePath(dt=t[1], values=np.sin(2 * np.pi * t)))

    assert qv_at(2**14) < 2e-3
    assert qv_at(2**14) < qv_at(2**10) / 10


def test_qv_block_must_divide():
    path = sample_fbm(0.5, 100, 0.01, np.random.default_rng(0))
    with pytest.raises(ValueError):
        quadratic_variation(path, block=7)
