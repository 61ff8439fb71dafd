import numpy as np
import pytest

from microrheo.exactsim import fgle_increment_covariance
from microrheo.spectral import fgle_filter_ghat
from microrheo.util import NumericalError, ValidationError
from microrheo.waveletsim import (
    FilterBank,
    WaveletSampler,
    _bank_from_ghat,
    build_filter_bank,
    cmf_coefficients,
    cmf_highpass,
    cmf_lowpass,
    discretization_filter,
    filter_bank_to_csv,
    ou_exact_ratio,
    refine,
    scale0_covariance,
    simulate_fgle_wavelet,
)


class TestCmf:
    @pytest.mark.parametrize("tag,vm", [("db2vm", 2), ("db4vm", 4)])
    def test_quadrature_mirror_identities(self, tag, vm):
        w = np.linspace(-np.pi, np.pi, 257)
        u = cmf_lowpass(tag, w)
        u_shift = cmf_lowpass(tag, w + np.pi)
        np.testing.assert_allclose(np.abs(u) ** 2 + np.abs(u_shift) ** 2, 2.0, atol=1e-10)
        assert cmf_lowpass(tag, 0.0) == pytest.approx(np.sqrt(2.0))
        v = cmf_highpass(tag, w)
        v_shift = cmf_highpass(tag, w + np.pi)
        np.testing.assert_allclose(np.abs(v) ** 2 + np.abs(v_shift) ** 2, 2.0, atol=1e-10)
        cross = u * np.conj(u_shift) + v * np.conj(v_shift)
        np.testing.assert_allclose(cross, 0.0, atol=1e-10)

    @pytest.mark.parametrize("tag,vm", [("db2vm", 2), ("db4vm", 4)])
    def test_vanishing_moments(self, tag, vm):
        h = cmf_coefficients(tag)
        # wavelet coefficients v[k] = (-1)^{k+1} h[1-k]
        ks = np.arange(1 - h.size + 1, 2)
        v = np.array([(-1.0) ** (k + 1) * h[1 - k] for k in ks])
        for p in range(vm):
            assert abs(np.sum(v * ks.astype(float) ** p)) < 1e-8

    def test_unknown_tag(self):
        with pytest.raises(ValidationError):
            cmf_coefficients("haar99")


class TestDiscretizationFilter:
    def test_zero_at_origin(self, fgle_params_quarter):
        assert discretization_filter(3, fgle_params_quarter, 0.0) == 0.0

    def test_periodic_extension(self, fgle_params_quarter):
        w = np.array([0.3, -1.2, 2.0])
        a = discretization_filter(2, fgle_params_quarter, w)
        b = discretization_filter(2, fgle_params_quarter, w + 2 * np.pi)
        np.testing.assert_allclose(a, b, rtol=1e-12)

    def test_ratio_converges_to_one(self, fgle_params_quarter):
        # the dyadic rescaling of the filter approaches the continuous one
        w = np.linspace(-1.0, 1.0, 41)
        w = w[w != 0]
        target = fgle_filter_ghat(fgle_params_quarter, w)
        errs = []
        for j in (4, 8, 12):
            ratio = discretization_filter(j, fgle_params_quarter, 2.0**-j * w) / target
            errs.append(np.abs(ratio - 1.0).max())
        assert errs[0] > errs[1] > errs[2]
        assert errs[-1] < 0.05

    def test_negative_scale_rejected(self, fgle_params_quarter):
        with pytest.raises(ValidationError):
            discretization_filter(-1, fgle_params_quarter, 0.5)


class TestOuExactRatio:
    def test_origin_scaling(self):
        rate = 1.0
        for levels in (6, 10, 14):
            val = ou_exact_ratio(rate, levels, 0.0)
            assert val.real * 2.0**-levels == pytest.approx(1.0, abs=2.0 ** -(levels - 1))
        assert ou_exact_ratio(rate, 20, 0.0).real * 2.0**-20 == pytest.approx(1.0, rel=1e-4)

    def test_finite_at_pi(self):
        val = ou_exact_ratio(2.0, 5, np.pi)
        assert np.isfinite(val) and abs(val) > 0

    def test_dyadic_argument_limit(self):
        # 2^-J * ratio at argument 2^-J w approaches 1 for every fixed w
        rate, w = 1.5, 2.0
        vals = [
            2.0**-j * abs(ou_exact_ratio(rate, j, 2.0**-j * w)) / abs(rate + 1j * w) * abs(rate + 1j * 2.0**-j * w)
            for j in (6, 10, 14)
        ]
        # simpler: the defining combination converges to 1
        combos = [
            abs((rate + 1j * w) * 2.0**-j / (1 - np.exp(-rate * 2.0**-j) * np.exp(-1j * 2.0**-j * w)))
            for j in (6, 10, 14)
        ]
        assert abs(combos[-1] - 1.0) < 1e-4
        assert abs(combos[0] - 1.0) > abs(combos[-1] - 1.0)

    def test_rate_validation(self):
        with pytest.raises(ValidationError):
            ou_exact_ratio(0.0, 4, 1.0)


def all_pass_bank(levels=1, trunc_lag=16, grid=2**12):
    return _bank_from_ghat(
        lambda j, w: np.ones_like(np.asarray(w, dtype=float)),
        levels,
        "db4vm",
        trunc_lag,
        1e-4,
        grid,
    )


class TestFilterBank:
    def test_all_pass_recovers_raw_cmf(self):
        bank = all_pass_bank()
        h = cmf_coefficients("db4vm")
        u = bank.low_pass[0]
        lag0 = bank.trunc_lag
        np.testing.assert_allclose(u[lag0 : lag0 + h.size], h, atol=1e-10)
        mask = np.ones(u.size, dtype=bool)
        mask[lag0 : lag0 + h.size] = False
        assert np.abs(u[mask]).max() < 1e-10
        # high-pass: v[k] = (-1)^{k+1} h[1-k], supported on k = -6..1
        v = bank.high_pass[0]
        for k in range(-6, 2):
            assert v[lag0 + k] == pytest.approx((-1) ** (k + 1) * h[1 - k], abs=1e-10)

    def test_fgle_truncation_below_threshold(self, fgle_params_quarter):
        bank = build_filter_bank(fgle_params_quarter, 13, trunc_lag=80, threshold=1e-5)
        assert bank.truncation_magnitude < 1e-5
        assert bank.levels == 13
        assert all(u.size == 161 for u in bank.low_pass)

    def test_threshold_enforced(self, fgle_params_quarter):
        with pytest.raises(NumericalError, match="truncation"):
            build_filter_bank(fgle_params_quarter, 4, trunc_lag=8, threshold=1e-7)

    def test_grid_refinement_stability(self, fgle_params_quarter):
        a = build_filter_bank(fgle_params_quarter, 3, grid_size=2**16)
        b = build_filter_bank(fgle_params_quarter, 3, grid_size=2**17)
        for j in range(3):
            assert np.abs(a.low_pass[j] - b.low_pass[j]).max() < 1e-9
            assert np.abs(a.high_pass[j] - b.high_pass[j]).max() < 1e-9

    def test_low_pass_dc_gain(self, fgle_params_quarter):
        # u_j(0) limit equals the raw CMF dc gain sqrt(2)
        bank = build_filter_bank(fgle_params_quarter, 2)
        assert bank.low_pass[0].sum() == pytest.approx(np.sqrt(2.0), abs=1e-3)

    def test_csv_export(self, tmp_path, fgle_params_quarter):
        bank = build_filter_bank(fgle_params_quarter, 2)
        path = tmp_path / "bank.csv"
        filter_bank_to_csv(bank, path)
        lines = path.read_text().splitlines()
        assert lines[0] == "scale,lag,u,v"
        assert len(lines) == 1 + 2 * 161


class TestRefine:
    def test_identity_kernel_upsamples(self, rng_factory):
        delta = np.array([1.0])
        zero = np.array([0.0])
        bank = FilterBank(
            low_pass=(delta,),
            high_pass=(zero,),
            trunc_lag=0,
            cmf="db4vm",
            vanishing_moments=4,
            truncation_magnitude=0.0,
            grid_size=0,
        )
        x = np.arange(1.0, 6.0)
        out = refine(x, bank, 0, rng_factory(0))
        expected = np.zeros(10)
        expected[0::2] = x
        np.testing.assert_allclose(out, expected, atol=1e-12)

    def test_highpass_only_moving_average(self, rng_factory):
        # u = 0: output is v * up2(noise); its parity-averaged covariance is
        # (1/2) sum_m v[m] v[m+h] (brute force over the coefficients)
        h = cmf_coefficients("db4vm")
        lag0 = 16
        v = np.zeros(2 * lag0 + 1)
        for k in range(-6, 2):
            v[lag0 + k] = (-1) ** (k + 1) * h[1 - k]
        bank = FilterBank(
            low_pass=(np.zeros(2 * lag0 + 1),),
            high_pass=(v,),
            trunc_lag=lag0,
            cmf="db4vm",
            vanishing_moments=4,
            truncation_magnitude=0.0,
            grid_size=0,
        )
        reps, n = 4000, 64
        acc = np.zeros((reps, 3))
        for r in range(reps):
            out = refine(np.zeros(n), bank, 0, rng_factory(41, r))
            for lag in range(3):
                acc[r, lag] = np.mean(out[: out.size - lag] * out[lag:])
        target = np.array([0.5 * np.sum(v * v)]
                          + [0.5 * np.sum(v[:-lag] * v[lag:]) for lag in (1, 2)])
        se = acc.std(ddof=1, axis=0) / np.sqrt(reps)
        np.testing.assert_array_less(np.abs(acc.mean(axis=0) - target), 3 * se)

    def test_all_pass_refinement_stays_white(self, rng_factory):
        # perfect-reconstruction consequence: refining white noise through
        # the all-pass bank returns white noise (flat periodogram)
        from scipy.stats import kstest

        from microrheo.inference import periodogram

        bank = all_pass_bank()
        rng = rng_factory(42)
        out = refine(rng.standard_normal(4096), bank, 0, rng)
        _, vals = periodogram(out)
        scaled = vals / (out.var() / (2 * np.pi))
        assert kstest(scaled, "expon").pvalue > 0.05

    def test_scale_out_of_range(self, rng_factory):
        bank = all_pass_bank()
        with pytest.raises(ValidationError):
            refine(np.zeros(32), bank, 5, rng_factory(0))

    def test_deterministic_replay(self, fgle_params_quarter, rng_factory):
        a = simulate_fgle_wavelet(fgle_params_quarter, 3, 32, rng_factory(7), init_len=256)
        b = simulate_fgle_wavelet(fgle_params_quarter, 3, 32, rng_factory(7), init_len=256)
        np.testing.assert_array_equal(a.positions, b.positions)


class TestScale0Covariance:
    def test_matches_fft_reference(self, fgle_params_quarter):
        cov = scale0_covariance(fgle_params_quarter, 16)
        n_grid = 1 << 20
        w = 2 * np.pi * np.arange(n_grid) / n_grid
        power = np.asarray(discretization_filter(0, fgle_params_quarter, w)) ** 2
        ref = np.fft.ifft(power).real
        np.testing.assert_allclose(cov.values, ref[:16], atol=1e-8)

    def test_extension(self, fgle_params_quarter):
        cov = scale0_covariance(fgle_params_quarter, 4)
        longer = scale0_covariance(fgle_params_quarter, 8)
        assert cov.value_at(6) == pytest.approx(longer.values[6], abs=1e-10)


class TestWaveletSampler:
    def test_track_shape_and_dt(self, fgle_params_quarter, rng_factory):
        track = simulate_fgle_wavelet(fgle_params_quarter, 4, 64, rng_factory(1), init_len=256)
        assert track.positions.size == 65
        assert track.dt == 1.0
        assert track.positions[0] == 0.0

    def test_init_too_short(self, fgle_params_quarter):
        with pytest.raises(ValidationError, match="init_len"):
            WaveletSampler(fgle_params_quarter, levels=8, horizon=512, init_len=512)

    def test_antipersistent_increments(self, fgle_params_quarter, rng_factory):
        # the lag-1 increment correlation is weakly negative (about -0.008
        # of the variance); pool replicates and reject "nonnegative" at 1%
        sampler = WaveletSampler(fgle_params_quarter, levels=6, horizon=512)
        reps = 500
        stat = np.empty(reps)
        for r in range(reps):
            y = sampler.sample_increments(rng_factory(43, r))
            stat[r] = np.mean(y[:-1] * y[1:])
        z = stat.mean() / (stat.std(ddof=1) / np.sqrt(reps))
        assert z < -2.33

    def test_increment_covariance_convergence(self, fgle_params_quarter, rng_factory):
        # the refined paths reproduce the quadrature target covariance
        sampler = WaveletSampler(fgle_params_quarter, levels=8, horizon=512)
        cov = fgle_increment_covariance(fgle_params_quarter, 11, tol=1e-8)
        reps = 400
        lags = np.arange(11)
        acc = np.zeros((reps, lags.size))
        for r in range(reps):
            y = sampler.sample_increments(rng_factory(77, r))
            for h in lags:
                acc[r, h] = np.mean(y[: y.size - h] * y[h:])
        se = acc.std(ddof=1, axis=0) / np.sqrt(reps)
        np.testing.assert_array_less(np.abs(acc.mean(axis=0) - cov.values), 3 * se)

    def test_level_insensitivity(self, fgle_params_quarter, rng_factory):
        # pooled estimates at J = 6 and J = 8 agree within two pooled SEs
        from microrheo.inference import local_whittle

        pooled = {}
        for levels in (6, 8):
            sampler = WaveletSampler(fgle_params_quarter, levels=levels, horizon=512)
            ds = np.array(
                [
                    local_whittle(
                        sampler.sample_increments(rng_factory(44, levels, r)),
                        m=40,
                        theta=(-0.49, 0.99),
                    ).d_hat
                    for r in range(250)
                ]
            )
            pooled[levels] = (ds.mean(), ds.std(ddof=1) / np.sqrt(ds.size))
        diff = abs(pooled[6][0] - pooled[8][0])
        se = np.hypot(pooled[6][1], pooled[8][1])
        assert diff < 2.5 * se
