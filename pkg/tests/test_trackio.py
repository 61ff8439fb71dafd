import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from microrheo.inference import msd_loglog_fit
from microrheo.trackio import (
    AcfCurve,
    MsdCurve,
    Track,
    acf_to_csv,
    detrend,
    ensemble_msd,
    increments,
    load_tracks,
    loads_tracks,
    msd_from_csv,
    msd_to_csv,
    pathwise_msd,
    sample_acf,
    save_tracks,
)
from microrheo.util import ValidationError


def make_track(values, dt=1.0, tid="t0"):
    return Track(id=tid, dt=dt, positions=np.asarray(values, dtype=float))


class TestLoad:
    def test_minimal_three_rows(self, tmp_path):
        path = tmp_path / "t.csv"
        path.write_text("track_id,frame,x\na,0,0.0\na,1,1.0\na,2,2.5\n")
        tracks = load_tracks(path, dt=0.5)
        assert len(tracks) == 1
        assert tracks[0].n_steps == 2
        assert tracks[0].dt == 0.5
        np.testing.assert_array_equal(tracks[0].positions, [0.0, 1.0, 2.5])

    def test_gap_error_names_track(self, tmp_path):
        path = tmp_path / "t.csv"
        path.write_text("track_id,frame,x\nbead7,0,0\nbead7,1,1\nbead7,3,2\n")
        with pytest.raises(ValidationError, match="bead7"):
            load_tracks(path, dt=1.0)

    def test_two_columns_split_per_coordinate(self):
        text = "track_id,frame,x,y\na,0,0,5\na,1,1,6\na,2,2,7\n"
        tracks = loads_tracks(text, dt=1.0)
        assert {t.coord for t in tracks} == {"x", "y"}
        assert {t.id for t in tracks} == {"a"}
        by_coord = {t.coord: t for t in tracks}
        np.testing.assert_array_equal(by_coord["y"].positions, [5.0, 6.0, 7.0])

    def test_missing_column(self):
        with pytest.raises(ValidationError, match="missing"):
            loads_tracks("track_id,x\na,0\n", dt=1.0)

    def test_non_numeric_cell(self):
        with pytest.raises(ValidationError, match="non-numeric"):
            loads_tracks("track_id,frame,x\na,0,oops\na,1,1\n", dt=1.0)

    def test_dt_from_header_comment(self):
        tracks = loads_tracks("# dt=0.125\ntrack_id,frame,x\na,0,0\na,1,1\n")
        assert tracks[0].dt == 0.125

    def test_dt_argument_wins(self):
        tracks = loads_tracks("# dt=0.125\ntrack_id,frame,x\na,0,0\na,1,1\n", dt=2.0)
        assert tracks[0].dt == 2.0

    def test_missing_dt(self):
        with pytest.raises(ValidationError, match="sampling interval"):
            loads_tracks("track_id,frame,x\na,0,0\na,1,1\n")

    def test_unsorted_frames_accepted(self):
        tracks = loads_tracks("track_id,frame,x\na,1,1\na,0,0\na,2,2\n", dt=1.0)
        np.testing.assert_array_equal(tracks[0].positions, [0.0, 1.0, 2.0])


class TestRoundTrip:
    def test_round_trip_bit_identical(self, tmp_path):
        text = "# dt=0.1\ntrack_id,frame,x\na,0,0.1\na,1,2.35\na,2,-7.25\n"
        first = loads_tracks(text)
        path = tmp_path / "out.csv"
        save_tracks(first, path)
        second = load_tracks(path)
        path2 = tmp_path / "out2.csv"
        save_tracks(second, path2)
        assert path.read_bytes() == path2.read_bytes()
        np.testing.assert_array_equal(first[0].positions, second[0].positions)

    @settings(max_examples=25, deadline=None)
    @given(
        values=st.lists(
            st.floats(min_value=-1e6, max_value=1e6, allow_nan=False, width=64),
            min_size=2,
            max_size=20,
        )
    )
    def test_round_trip_arbitrary_floats(self, values, tmp_path_factory):
        path = tmp_path_factory.mktemp("rt") / "t.csv"
        save_tracks([make_track(values)], path)
        back = load_tracks(path)
        np.testing.assert_array_equal(back[0].positions, np.asarray(values))

    def test_two_coordinate_round_trip(self, tmp_path):
        text = "# dt=1.0\ntrack_id,frame,x,y\na,0,0.25,1.5\na,1,0.5,2.5\n"
        tracks = loads_tracks(text)
        path = tmp_path / "xy.csv"
        save_tracks(tracks, path)
        again = load_tracks(path)
        assert len(again) == 2
        save_tracks(again, tmp_path / "xy2.csv")
        assert path.read_bytes() == (tmp_path / "xy2.csv").read_bytes()


class TestDetrend:
    def test_linear_removes_ols_slope(self, rng_factory):
        rng = rng_factory(0)
        n = 200
        x = 2.0 * np.arange(n + 1) + rng.standard_normal(n + 1)
        out = detrend(make_track(x), "linear")
        t = np.arange(n + 1)
        slope = np.polyfit(t, out.positions, 1)[0]
        assert abs(slope) < 1e-10

    def test_constant_track(self):
        track = make_track([3.0, 3.0, 3.0, 3.0])
        np.testing.assert_allclose(detrend(track, "linear").positions, 0.0, atol=1e-12)
        np.testing.assert_array_equal(detrend(track, "none").positions, track.positions)

    def test_mean_subtracts_average_increment(self):
        x = np.array([0.0, 2.0, 4.0, 6.0])
        out = detrend(make_track(x), "mean")
        np.testing.assert_allclose(out.positions, 0.0, atol=1e-12)

    def test_original_untouched(self):
        track = make_track([0.0, 1.0, 4.0])
        detrend(track, "linear")
        np.testing.assert_array_equal(track.positions, [0.0, 1.0, 4.0])

    def test_too_short_for_linear(self):
        with pytest.raises(ValidationError):
            detrend(make_track([0.0, 1.0]), "linear")

    def test_unknown_method(self):
        with pytest.raises(ValidationError):
            detrend(make_track([0.0, 1.0, 2.0]), "quadratic")

    def test_brownian_linear_detrend_biases_msd_exponent_down(self, rng_factory):
        # detrending a drift-free random walk removes true low-frequency
        # signal and drags the fitted exponent below 1 on average
        reps = 1000
        n = 1000
        alphas = np.empty(reps)
        for r in range(reps):
            rng = rng_factory(101, r)
            walk = np.concatenate(([0.0], np.cumsum(rng.standard_normal(n))))
            out = detrend(make_track(walk), "linear")
            alphas[r] = msd_loglog_fit(pathwise_msd(out, 100)).alpha_hat
        sem = alphas.std(ddof=1) / np.sqrt(reps)
        assert alphas.mean() + 3 * sem < 1.0


class TestIncrements:
    def test_lag_one(self):
        np.testing.assert_array_equal(increments(make_track([0, 1, 3]), 1), [1.0, 2.0])

    def test_lag_two(self):
        np.testing.assert_array_equal(increments(make_track([0, 1, 3]), 2), [3.0])

    def test_linear_track_constant(self):
        track = make_track(3.0 * np.arange(10))
        for lag in (1, 2, 5):
            np.testing.assert_allclose(increments(track, lag), 3.0 * lag)

    def test_lag_out_of_range(self):
        with pytest.raises(ValidationError):
            increments(make_track([0, 1, 3]), 3)
        with pytest.raises(ValidationError):
            increments(make_track([0, 1, 3]), 0)

    def test_length(self):
        track = make_track(np.arange(11))
        assert increments(track, 4).size == 11 - 4


def brute_force_msd(x, n_lags):
    out = np.empty(n_lags)
    n = x.size - 1
    for h in range(1, n_lags + 1):
        diffs = [(x[j + h] - x[j]) ** 2 for j in range(n - h + 1)]
        out[h - 1] = sum(diffs) / (n - h + 1)
    return out


class TestPathwiseMsd:
    def test_deterministic_line(self):
        curve = pathwise_msd(make_track(np.arange(11.0)), 5)
        np.testing.assert_allclose(curve.values, np.arange(1.0, 6.0) ** 2, rtol=1e-12)
        np.testing.assert_array_equal(curve.n_pairs, 10 - np.arange(1, 6) + 1)

    def test_constant_track(self):
        curve = pathwise_msd(make_track(np.full(20, 2.5)), 5)
        np.testing.assert_array_equal(curve.values, 0.0)

    @settings(max_examples=40, deadline=None)
    @given(
        values=st.lists(
            st.floats(min_value=-100, max_value=100, allow_nan=False),
            min_size=3,
            max_size=50,
        ),
        scale=st.floats(min_value=0.1, max_value=10.0),
        shift=st.floats(min_value=-50.0, max_value=50.0),
    )
    def test_brute_force_translation_and_scaling(self, values, scale, shift):
        x = np.asarray(values)
        n_lags = max(1, (x.size - 1) // 2)
        base = pathwise_msd(make_track(x), n_lags)
        np.testing.assert_allclose(
            base.values, brute_force_msd(x, n_lags), rtol=1e-9, atol=1e-9
        )
        shifted = pathwise_msd(make_track(x + shift), n_lags)
        np.testing.assert_allclose(shifted.values, base.values, rtol=1e-8, atol=1e-8)
        scaled = pathwise_msd(make_track(scale * x), n_lags)
        np.testing.assert_allclose(
            scaled.values, scale**2 * base.values, rtol=1e-8, atol=1e-8
        )

    def test_brownian_matches_closed_form(self, rng_factory):
        # pooled over replicates the curve approaches 2 D t with D = 1/2
        reps = 300
        n = 2000
        lags = np.array([1, 5, 20])
        pooled = np.zeros((reps, lags.size))
        for r in range(reps):
            rng = rng_factory(55, r)
            x = np.concatenate(([0.0], np.cumsum(rng.standard_normal(n))))
            curve = pathwise_msd(make_track(x), 20)
            pooled[r] = curve.values[lags - 1]
        mean = pooled.mean(axis=0)
        se = pooled.std(ddof=1, axis=0) / np.sqrt(reps)
        np.testing.assert_array_less(np.abs(mean - lags), 3 * se)

    def test_lag_budget_default(self):
        track = make_track(np.arange(1001.0))
        assert pathwise_msd(track).lags[-1] == 100

    def test_out_of_range(self):
        with pytest.raises(ValidationError):
            pathwise_msd(make_track([0.0, 1.0]), 2)


class TestEnsembleMsd:
    def test_identical_deterministic_tracks(self):
        tracks = [make_track(np.arange(6.0), tid=f"t{i}") for i in range(4)]
        for j in (1, 3, 5):
            assert ensemble_msd(tracks, j) == pytest.approx(float(j) ** 2)

    def test_single_track(self):
        track = make_track([1.0, 3.0, 7.0])
        assert ensemble_msd([track], 2) == pytest.approx(36.0)

    def test_copies_equal_single(self):
        track = make_track([0.0, 2.0, -1.0])
        many = [track] * 7
        assert ensemble_msd(many, 2) == ensemble_msd([track], 2)

    def test_heterogeneous_dt(self):
        with pytest.raises(ValidationError):
            ensemble_msd([make_track([0, 1], dt=1.0), make_track([0, 1], dt=2.0)], 1)

    def test_empty(self):
        with pytest.raises(ValidationError):
            ensemble_msd([], 0)


class TestSampleAcf:
    def test_lag_zero_is_one(self, rng_factory):
        acf = sample_acf(rng_factory(1).standard_normal(100), 10)
        assert acf.correlations[0] == 1.0

    def test_alternating_series(self):
        # biased normalization gives -(n-1)/n, approaching -1 from above
        vals = []
        for reps in (100, 2000):
            acf = sample_acf(np.tile([1.0, -1.0], reps), 1)
            vals.append(acf.correlations[1])
        assert vals[1] < vals[0]
        assert vals[1] == pytest.approx(-1.0, abs=1e-3)

    def test_iid_within_bartlett_bands(self, rng_factory):
        n = 1800
        x = rng_factory(3).standard_normal(n)
        acf = sample_acf(x, 50)
        inside = np.abs(acf.correlations[1:]) < 3.0 / np.sqrt(n)
        assert inside.mean() >= 0.95

    def test_constant_series_error(self):
        with pytest.raises(ValidationError, match="constant"):
            sample_acf(np.full(50, 1.0), 5)


class TestSerialization:
    def test_msd_csv_round_trip(self, tmp_path):
        curve = pathwise_msd(make_track(np.arange(12.0), dt=0.25), 4)
        path = tmp_path / "msd.csv"
        msd_to_csv(curve, path)
        assert path.read_text().splitlines()[0] == "lag,value,n_pairs"
        back = msd_from_csv(path, dt=0.25)
        np.testing.assert_array_equal(back.values, curve.values)
        np.testing.assert_array_equal(back.lags, curve.lags)

    def test_acf_csv(self, tmp_path):
        acf = sample_acf(np.sin(np.arange(100.0)), 5)
        path = tmp_path / "acf.csv"
        acf_to_csv(acf, path)
        assert path.read_text().splitlines()[0] == "lag,value"

    def test_curve_validation(self):
        with pytest.raises(ValidationError):
            MsdCurve(lags=np.array([2, 1]), values=np.array([1.0, 1.0]), dt=1.0,
                     n_pairs=np.array([1, 1]))
        with pytest.raises(ValidationError):
            MsdCurve(lags=np.array([1]), values=np.array([-1.0]), dt=1.0,
                     n_pairs=np.array([1]))
        with pytest.raises(ValidationError):
            AcfCurve(lags=np.array([0, 1]), correlations=np.array([0.9, 0.1]))
