import csv

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from svddkit.datasets import Dataset, SweepGrid, gen_star, inside_star
from svddkit.evaluation import (
    ConfusionCounts,
    confusion,
    default_bounds,
    f1,
    f1_sweep,
    grid_score_2d,
    nsv_curve,
    write_grid_csv,
    write_grid_svg,
)
from svddkit.svdd import SvddConfig, solve_dual


# --- confusion and F1 ----------------------------------------------------

def test_confusion_hand_case():
    # three points: target/in, target/out, other/in
    c = confusion([True, True, False], [True, False, True])
    assert (c.tp, c.fn, c.fp, c.tn) == (1, 1, 1, 0)
    assert c.total == 3


def test_confusion_validation():
    with pytest.raises(ValueError):
        confusion([], [])
    with pytest.raises(ValueError):
        confusion([True, False], [True])
    with pytest.raises(ValueError):
        ConfusionCounts(tp=-1, fp=0, tn=0, fn=0)


def test_confusion_is_permutation_invariant():
    rng = np.random.default_rng(0)
    t = rng.random(50) < 0.5
    p = rng.random(50) < 0.5
    perm = rng.permutation(50)
    assert confusion(t, p) == confusion(t[perm], p[perm])


def test_f1_hand_case():
    s = f1(ConfusionCounts(tp=1, fp=1, tn=0, fn=1))
    assert s.precision == 0.5 and s.recall == 0.5 and s.f1 == 0.5


def test_f1_degenerate_cases_score_zero():
    assert f1(ConfusionCounts(tp=0, fp=0, tn=5, fn=0)).f1 == 0.0
    assert f1(ConfusionCounts(tp=0, fp=3, tn=0, fn=2)).f1 == 0.0


@settings(max_examples=60, deadline=None)
@given(
    tp=st.integers(0, 40),
    fp=st.integers(0, 40),
    tn=st.integers(0, 40),
    fn=st.integers(0, 40),
)
def test_f1_is_the_harmonic_mean(tp, fp, tn, fn):
    s = f1(ConfusionCounts(tp=tp, fp=fp, tn=tn, fn=fn))
    assert 0.0 <= s.f1 <= 1.0
    assert s.f1 <= max(s.precision, s.recall) + 1e-12
    if s.precision and s.recall:
        assert s.f1 == pytest.approx(
            2 / (1 / s.precision + 1 / s.recall), abs=1e-12
        )
        # the harmonic mean sits between the two rates (up to rounding)
        assert s.f1 >= min(s.precision, s.recall) - 1e-12


# --- labeled sweep ------------------------------------------------------------

@pytest.fixture(scope="module")
def star_with_background():
    train = gen_star(150, 0)
    rng = np.random.default_rng(1)
    pts = rng.uniform(-1.3, 1.3, size=(300, 2))
    return train, Dataset(points=pts, labels=inside_star(pts))


def test_f1_sweep_tracks_grid(star_with_background):
    train, scored = star_with_background
    grid = SweepGrid(0.1, 1.0, 0.1)
    res = f1_sweep(train, scored, grid, 0.05)
    assert len(res.curve) == 10
    assert res.precision.shape == res.recall.shape == (10,)
    best = int(np.argmax(res.curve.ys))
    assert res.best_s == grid.values()[best]
    assert res.best_f1 == res.curve.ys[best]
    # a sane bandwidth describes the star far better than a tiny one
    assert res.best_f1 > 0.8
    assert res.curve.ys[0] < res.best_f1


def test_f1_sweep_orientation_flip(star_with_background):
    # when the modeled class is the anomaly, a predicted outlier is a
    # predicted target; check each grid point against a direct computation
    train, scored = star_with_background
    anomaly_labeled = Dataset(points=scored.points, labels=~scored.labels)
    grid = SweepGrid(0.2, 0.8, 0.2)
    res = f1_sweep(train, anomaly_labeled, grid, 0.05, inside_is_target=False)
    from svddkit.svdd import score_points

    for i, s in enumerate(grid.values()):
        model = solve_dual(train, SvddConfig(s=float(s), f=0.05))
        _, outlier = score_points(model, scored.points)
        expected = f1(confusion(anomaly_labeled.labels, outlier)).f1
        assert res.curve.ys[i] == expected


def test_f1_sweep_needs_labels_of_both_classes():
    train = gen_star(60, 0)
    grid = SweepGrid(0.2, 0.8, 0.2)
    with pytest.raises(ValueError):
        f1_sweep(train, Dataset(points=train.points), grid, 0.05)
    one_class = Dataset(points=train.points, labels=np.ones(60, bool))
    with pytest.raises(ValueError):
        f1_sweep(train, one_class, grid, 0.05)


# --- boundary grids -------------------------------------------------------------

def test_grid_respects_symmetry():
    # two mirrored points and a symmetric grid: verdicts mirror too
    model = solve_dual(np.array([[-1.0, 0.0], [1.0, 0.0]]), SvddConfig(s=1.0, f=0.5))
    grid = grid_score_2d(model, (-2.0, 2.0, -1.0, 1.0), 41)
    np.testing.assert_array_equal(grid.flags, grid.flags[:, ::-1])
    assert 0 < grid.inside_count < grid.flags.size


def test_grid_resolution_and_dim_checks():
    flat = solve_dual(np.array([[0.0, 0.0], [1.0, 1.0]]), SvddConfig(s=1.0, f=0.5))
    with pytest.raises(ValueError):
        grid_score_2d(flat, (0.0, 1.0, 0.0, 1.0), 1)
    with pytest.raises(ValueError):
        grid_score_2d(flat, (1.0, 0.0, 0.0, 1.0), 10)  # xhi <= xlo
    m3 = solve_dual(np.zeros((2, 3)), SvddConfig(s=1.0, f=0.5))
    with pytest.raises(ValueError):
        grid_score_2d(m3, (0.0, 1.0, 0.0, 1.0), 10)


def test_wide_bandwidth_swallows_more_of_the_plane():
    data = gen_star(120, 2)
    bounds = default_bounds(data)
    tight = grid_score_2d(solve_dual(data, SvddConfig(s=0.9, f=0.05)), bounds, 60)
    loose = grid_score_2d(solve_dual(data, SvddConfig(s=100.0, f=0.05)), bounds, 60)
    assert loose.inside_count >= tight.inside_count


def test_default_bounds_pad_by_a_fifth():
    data = Dataset(points=np.array([[0.0, -1.0], [10.0, 3.0]]))
    assert default_bounds(data) == (-2.0, 12.0, -1.8, 3.8)


def test_grid_exports(tmp_path):
    model = solve_dual(np.array([[-1.0, 0.0], [1.0, 0.0]]), SvddConfig(s=1.0, f=0.5))
    grid = grid_score_2d(model, (-2.0, 2.0, -1.0, 1.0), 8)

    csv_path = tmp_path / "grid.csv"
    write_grid_csv(csv_path, grid)
    with open(csv_path, newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["x", "y", "inside"]
    assert len(rows) == 1 + 64
    assert sum(int(r[2]) for r in rows[1:]) == grid.inside_count

    svg_path = tmp_path / "grid.svg"
    write_grid_svg(svg_path, grid)
    text = svg_path.read_text()
    assert text.startswith("<svg ") and text.rstrip().endswith("</svg>")
    # one background rect plus at least one run of inside cells
    assert text.count("<rect") >= 2


# --- support-vector counts -------------------------------------------------------

def test_every_point_supports_at_vanishing_bandwidth():
    data = gen_star(120, 6)
    d2 = np.sum(
        (data.points[:, None, :] - data.points[None, :, :]) ** 2, axis=2
    )
    np.fill_diagonal(d2, np.inf)
    s_tiny = float(np.sqrt(d2.min())) / 10.0
    grid = SweepGrid(s_tiny, 1.0, (1.0 - s_tiny) / 5)
    curve = nsv_curve(data, grid, 0.05)
    assert curve.ys[0] == 120  # isolated points must all carry weight
    assert curve.ys[-1] < 120
    assert len(curve) == len(grid.values())
