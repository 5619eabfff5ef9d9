import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dsdsc.geometry import (
    CellSpec,
    draw_count,
    kappa_sbc_samples,
    normalized_distance,
    sample_user_field,
    smallest_bounding_circle,
    trial,
    trial_rng,
    truncated_poisson_cdf,
)
from oracles import brute_force_sbc, truncated_poisson_pmf

RADII = [10.0, 50.0, 100.0, 200.0, 500.0, 1000.0, 2000.0]


def test_expected_count():
    assert CellSpec(2000, 2).expected_count == pytest.approx(math.pi * 4 * 2)
    assert CellSpec(10, 2).expected_count == pytest.approx(6.283185307e-4, rel=1e-9)
    with pytest.raises(ValueError):
        CellSpec(0, 2)


def test_truncated_poisson_table():
    table = truncated_poisson_cdf(CellSpec(10, 2).expected_count)
    mean = CellSpec(10, 2).expected_count
    assert table[0] == pytest.approx(truncated_poisson_pmf(1, mean), abs=1e-15)
    assert table[0] == pytest.approx(0.99969, abs=5e-6)
    for mean in (6.28e-4, 0.3, 3.0, 25.13):
        table = truncated_poisson_cdf(mean)
        pmf = np.diff(np.concatenate([[0.0], table]))
        expected = [truncated_poisson_pmf(k, mean) for k in range(1, len(table) + 1)]
        np.testing.assert_allclose(pmf[:-1], expected[:-1], atol=1e-14)
        assert table[-1] == 1.0


def test_count_distribution_matches_truncated_poisson():
    mean = 2.5
    table = truncated_poisson_cdf(mean)
    n = 100_000
    rng = np.random.default_rng(4)
    counts = np.bincount([draw_count(table, rng) for _ in range(n)])
    for k in range(1, 8):
        p = truncated_poisson_pmf(k, mean)
        se = math.sqrt(p * (1 - p) / n)
        assert abs(counts[k] / n - p) < 3 * se


def test_user_field_inside_disk_and_nonempty():
    cell = CellSpec(500, 2)
    for i in range(200):
        f = sample_user_field(cell, trial_rng(1, 0, i))
        assert f.count >= 1
        assert np.all(np.hypot(*f.points.T) <= cell.radius_m)


def test_uniform_disk_second_moment():
    from dsdsc.geometry import draw_points
    pts = draw_points(1_000_000, 300.0, np.random.default_rng(8))
    assert np.mean(np.sum(pts**2, axis=1)) == pytest.approx(300.0**2 / 2, rel=5e-3)


def test_sbc_singleton_and_pair():
    c = smallest_bounding_circle([(3.0, -4.0)])
    assert c.center == (3.0, -4.0) and c.radius == 0.0
    c = smallest_bounding_circle([(0.0, 0.0), (6.0, 8.0)])
    assert c.center == pytest.approx((3.0, 4.0)) and c.radius == pytest.approx(5.0)


def test_sbc_rejects_empty():
    with pytest.raises(ValueError):
        smallest_bounding_circle([])


def test_sbc_collinear_and_duplicates():
    c = smallest_bounding_circle([(0, 0), (1, 0), (2, 0), (5, 0), (5, 0), (1, 0)])
    assert c.center == pytest.approx((2.5, 0.0)) and c.radius == pytest.approx(2.5)
    c = smallest_bounding_circle([(1.0, 1.0)] * 5)
    assert c.radius == 0.0


def test_sbc_equilateral():
    pts = [(math.cos(a), math.sin(a)) for a in (0.0, 2 * math.pi / 3, 4 * math.pi / 3)]
    c = smallest_bounding_circle(pts)
    assert c.radius == pytest.approx(1.0, abs=1e-12)
    assert c.center == pytest.approx((0.0, 0.0), abs=1e-12)


def test_sbc_matches_brute_force_eight_points():
    rng = np.random.default_rng(21)
    for _ in range(300):
        pts = rng.uniform(-1000, 1000, size=(8, 2))
        c = smallest_bounding_circle(pts)
        ox, oy, r = brute_force_sbc(pts)
        assert c.radius == pytest.approx(r, abs=1e-9)
        assert c.center == pytest.approx((ox, oy), abs=1e-6)


def test_sbc_contains_every_point():
    cell = CellSpec(2000, 2)
    for i in range(2000):
        f = sample_user_field(cell, trial_rng(2, 0, i))
        c = smallest_bounding_circle(f.points)
        d = np.hypot(f.points[:, 0] - c.center[0], f.points[:, 1] - c.center[1])
        assert np.all(d <= c.radius + 1e-9)


points_strategy = st.lists(
    st.tuples(st.floats(-2000, 2000, allow_nan=False), st.floats(-2000, 2000, allow_nan=False)),
    min_size=1, max_size=12,
)


@settings(max_examples=200, deadline=None)
@given(points_strategy, st.randoms(use_true_random=False))
def test_sbc_permutation_invariant(points, rnd):
    a = smallest_bounding_circle(points)
    shuffled = list(points)
    rnd.shuffle(shuffled)
    b = smallest_bounding_circle(shuffled)
    assert b.radius == pytest.approx(a.radius, abs=1e-9)


@settings(max_examples=200, deadline=None)
@given(points_strategy, st.floats(-500, 500), st.floats(-500, 500))
def test_sbc_translation_invariant(points, dx, dy):
    a = smallest_bounding_circle(points)
    b = smallest_bounding_circle([(x + dx, y + dy) for x, y in points])
    assert b.radius == pytest.approx(a.radius, abs=1e-9)
    assert b.center[0] - dx == pytest.approx(a.center[0], abs=1e-9)
    assert b.center[1] - dy == pytest.approx(a.center[1], abs=1e-9)


@settings(max_examples=100, deadline=None)
@given(points_strategy)
def test_sbc_minimal_against_oracle(points):
    c = smallest_bounding_circle(points)
    assert c.radius == pytest.approx(brute_force_sbc(list(dict.fromkeys(points)))[2], abs=1e-9)


def test_normalized_distance_examples():
    cell = CellSpec(100, 2)
    assert normalized_distance((30, 40), (30, 40), cell) == 0.0
    assert normalized_distance((100, 0), (-100, 0), cell) == pytest.approx(2.0)
    assert normalized_distance((0, 100), (0, 0), cell) == pytest.approx(1.0)


def test_kappa_samples_tiny_cell_mostly_zero():
    k = kappa_sbc_samples(CellSpec(10, 2), 20_000, seed=3)
    assert np.mean(k == 0) >= 0.999


def test_kappa_samples_in_unit_interval_and_median_ordering():
    medians = []
    for d in RADII:
        k = kappa_sbc_samples(CellSpec(d, 2), 2000, seed=9)
        assert np.all((k >= 0) & (k <= 1))
        medians.append(np.median(k))
    assert all(b >= a for a, b in zip(medians, medians[1:]))


def test_trial_reproducible_from_seed_and_index():
    cell = CellSpec(1000, 2)
    k = kappa_sbc_samples(cell, 50, seed=17)
    for i in (0, 7, 49):
        field, circle, _ = trial(cell, 17, i)
        assert circle.radius / cell.radius_m == pytest.approx(k[i], abs=1e-12)
        again, _, _ = trial(cell, 17, i)
        np.testing.assert_array_equal(field.points, again.points)


def test_coupled_fields_across_radii():
    # same seed and index: the larger cell's field extends the smaller one's
    small, _, _ = trial(CellSpec(500, 2), 5, 3)
    large, _, _ = trial(CellSpec(1000, 2), 5, 3)
    assert large.count >= small.count
    np.testing.assert_allclose(large.points[: small.count] / 1000, small.points / 500, atol=1e-12)
