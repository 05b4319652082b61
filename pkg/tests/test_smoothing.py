import csv

import numpy as np
import pytest

from svddkit.smoothing import (
    GCV_LADDER,
    Curve,
    NoLocalMaxError,
    NonUniformGridError,
    NoZeroCrossingError,
    SplineFit,
    eval_spline,
    first_difference,
    first_local_max,
    first_zero_crossing_of_band,
    fit_pspline,
    local_maxima,
    second_difference,
    spline_band,
    write_band_csv,
)


# --- curve container and difference quotients ------------------------------

def test_curve_validation():
    with pytest.raises(ValueError):
        Curve(xs=np.array([0.0, 1.0]), ys=np.array([0.0]))
    with pytest.raises(ValueError):
        Curve(xs=np.array([1.0, 1.0]), ys=np.array([0.0, 0.0]))  # not increasing
    with pytest.raises(ValueError):
        Curve(xs=np.array([0.0, 1.0]), ys=np.array([0.0, np.nan]))
    one = Curve(xs=np.array([2.0]), ys=np.array([5.0]))  # single point is fine
    assert len(one) == 1
    with pytest.raises(ValueError):
        one.ys[0] = 0.0  # read-only


def test_first_difference_hand_case():
    c = Curve(xs=np.array([0.0, 1.0, 2.0]), ys=np.array([0.0, 1.0, 4.0]))
    d = first_difference(c)
    # forward quotient anchored at the left point; last point dropped
    np.testing.assert_array_equal(d.xs, [0.0, 1.0])
    np.testing.assert_array_equal(d.ys, [1.0, 3.0])


def test_second_difference_hand_case():
    c = Curve(xs=np.array([0.0, 1.0, 2.0, 3.0]), ys=np.array([1.0, 2.0, 8.0, 20.0]))
    d = second_difference(c)
    np.testing.assert_array_equal(d.xs, [0.0, 1.0])
    np.testing.assert_allclose(d.ys, [5.0, 6.0], atol=1e-12)


def test_second_difference_needs_three_points():
    c = Curve(xs=np.array([0.0, 1.0]), ys=np.array([0.0, 1.0]))
    with pytest.raises(ValueError):
        second_difference(c)


def test_differences_reject_uneven_grid():
    c = Curve(xs=np.array([0.0, 1.0, 2.5]), ys=np.zeros(3))
    with pytest.raises(NonUniformGridError):
        first_difference(c)
    with pytest.raises(NonUniformGridError):
        second_difference(c)


def test_difference_of_quadratic_recovers_constant_curvature():
    xs = np.linspace(0.0, 3.0, 31)
    c = Curve(xs=xs, ys=3.0 * xs**2 - xs + 2.0)
    np.testing.assert_allclose(second_difference(c).ys, 6.0, atol=1e-10)


# --- penalized spline fit ---------------------------------------------------

def test_line_survives_any_penalty_weight():
    # linear trends lie in the null space of the default 2nd-order penalty
    xs = np.linspace(0.0, 5.0, 60)
    ys = 2.5 * xs - 1.0
    fit = fit_pspline(Curve(xs=xs, ys=ys), knots=20, lam=1e6)
    vals, _ = eval_spline(fit, xs)
    np.testing.assert_allclose(vals, ys, atol=1e-6)


def test_noisy_sine_is_recovered():
    rng = np.random.default_rng(0)
    xs = np.linspace(0.0, 2.0 * np.pi, 200)
    truth = np.sin(xs)
    fit = fit_pspline(Curve(xs=xs, ys=truth + rng.normal(0, 0.1, 200)), knots=30)
    assert fit.lam in GCV_LADDER
    vals, se = eval_spline(fit, xs)
    assert float(np.max(np.abs(vals - truth))) < 0.15
    assert np.all(se >= 0.0)
    # smoothing must spend fewer degrees of freedom than interpolation
    assert fit.edf < 200


def test_gcv_smooths_harder_when_noise_grows():
    rng = np.random.default_rng(3)
    xs = np.linspace(0.0, 2.0 * np.pi, 150)
    quiet = fit_pspline(Curve(xs=xs, ys=np.sin(xs) + rng.normal(0, 0.01, 150)), knots=30)
    loud = fit_pspline(Curve(xs=xs, ys=np.sin(xs) + rng.normal(0, 0.5, 150)), knots=30)
    assert loud.lam >= quiet.lam
    assert loud.edf <= quiet.edf


def test_fit_validation():
    xs = np.linspace(0.0, 1.0, 30)
    c = Curve(xs=xs, ys=xs)
    with pytest.raises(ValueError):
        fit_pspline(c, knots=2)  # fewer than penalty_order + 1
    with pytest.raises(ValueError):
        fit_pspline(Curve(xs=np.arange(3.0), ys=np.arange(3.0)))  # too few points
    with pytest.raises(ValueError):
        fit_pspline(c, lam=-1.0)
    with pytest.raises(ValueError):
        fit_pspline(c, lam="wide")


def test_spline_fit_coefficient_count_checked():
    with pytest.raises(ValueError):
        SplineFit(
            knots=5,
            degree=3,
            penalty_order=2,
            lam=1.0,
            coefficients=np.zeros(4),  # should be 5 + 3 + 1
            sigma2=0.0,
            edf=1.0,
            knot_vector=np.arange(12.0),
            coef_cov=np.zeros((4, 4)),
            x_min=0.0,
            x_max=1.0,
        )


def test_eval_outside_fit_range_rejected():
    xs = np.linspace(0.0, 1.0, 30)
    fit = fit_pspline(Curve(xs=xs, ys=xs), knots=10)
    with pytest.raises(ValueError):
        eval_spline(fit, 1.5)
    v, se = eval_spline(fit, 0.5)
    assert isinstance(v, float) and isinstance(se, float)


def test_band_brackets_the_fit():
    rng = np.random.default_rng(5)
    xs = np.linspace(0.0, 4.0, 120)
    fit = fit_pspline(Curve(xs=xs, ys=np.cos(xs) + rng.normal(0, 0.2, 120)), knots=25)
    vals, lower, upper = spline_band(fit, xs)
    assert np.all(lower <= vals) and np.all(vals <= upper)


# --- extremum location -------------------------------------------------------

def test_local_maxima_of_sine():
    xs = np.linspace(0.0, 4.0 * np.pi, 400)
    fit = fit_pspline(Curve(xs=xs, ys=np.sin(xs)), knots=50, lam=1e-6)
    peaks = local_maxima(fit, xs)
    step = xs[1] - xs[0]
    np.testing.assert_allclose(peaks, [np.pi / 2, 5 * np.pi / 2], atol=2 * step)
    assert first_local_max(fit, xs) == peaks[0]


def test_monotone_curve_has_no_peak():
    xs = np.linspace(0.0, 1.0, 50)
    fit = fit_pspline(Curve(xs=xs, ys=xs**2), knots=10, lam=1e-6)
    with pytest.raises(NoLocalMaxError):
        first_local_max(fit, xs)


def test_band_zero_crossing_location():
    rng = np.random.default_rng(1)
    xs = np.linspace(0.0, 2.0, 100)
    ys = (xs - 1.0) + rng.normal(0, 0.05, 100)
    fit = fit_pspline(Curve(xs=xs, ys=ys), knots=20)
    hit = first_zero_crossing_of_band(fit, xs)
    assert abs(hit - 1.0) < 0.2


def test_band_never_touching_zero_raises():
    rng = np.random.default_rng(2)
    xs = np.linspace(0.0, 2.0, 100)
    ys = xs + 10.0 + rng.normal(0, 0.01, 100)
    fit = fit_pspline(Curve(xs=xs, ys=ys), knots=20)
    with pytest.raises(NoZeroCrossingError):
        first_zero_crossing_of_band(fit, xs)


def test_peak_and_inflection_readings_agree_on_sigmoid():
    # saturating curve with its transition at x=1: the first-difference peak
    # and the second-difference zero crossing both mark the transition center.
    # Noise must stay well under h^2 or the double difference drowns; see the
    # band-reading caveat in the module docs.
    xs = np.arange(0.05, 4.0001, 0.05)
    rng = np.random.default_rng(0)
    curve = Curve(xs=xs, ys=np.tanh((xs - 1.0) / 0.8) + rng.normal(0, 1e-4, len(xs)))
    d1 = first_difference(curve)
    d2 = second_difference(curve)
    peak = first_local_max(fit_pspline(d1, knots=40), d1.xs)
    cross = first_zero_crossing_of_band(fit_pspline(d2, knots=40), d2.xs)
    assert abs(peak - 1.0) <= 2 * 0.05
    assert abs(cross - peak) <= 2 * 0.05


def test_band_csv_round_trip(tmp_path):
    rng = np.random.default_rng(4)
    xs = np.linspace(0.0, 1.0, 40)
    curve = Curve(xs=xs, ys=xs + rng.normal(0, 0.02, 40))
    fit = fit_pspline(curve, knots=10)
    path = tmp_path / "band.csv"
    write_band_csv(path, curve, fit)
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["s", "raw", "smoothed", "lower95", "upper95"]
    assert len(rows) == 41
    body = np.array([[float(v) for v in row] for row in rows[1:]])
    np.testing.assert_array_equal(body[:, 0], xs)
    vals, lower, upper = spline_band(fit, xs)
    np.testing.assert_array_equal(body[:, 2], vals)  # repr round-trips exactly
    np.testing.assert_array_equal(body[:, 3], lower)
    np.testing.assert_array_equal(body[:, 4], upper)
