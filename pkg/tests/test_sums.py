# SPDX-License-Identifier: MIT

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import kerncoint.sums as sums
from kerncoint.exceptions import InvalidArgumentError
from kerncoint.kernels import KernelId, get_kernel
from kerncoint.processes import gen_random_walk
from kerncoint.sums import (
    BandwidthRule,
    Grid,
    GridSpec,
    GridValues,
    NormalizationProfile,
    check_moment_balance,
    inf_stat,
    kernel_sum,
    martingale_sum,
    normalized_ratios,
    shifted_kernel_sums,
    sup_stat,
    tail_condition_check,
    variance_sum,
)

KERNEL_NAMES = [k.value for k in KernelId]
N_GRID = [2**k for k in range(10, 18)]


def _random_instance(rng):
    n = int(rng.integers(1, 513))
    kernel = KERNEL_NAMES[int(rng.integers(len(KERNEL_NAMES)))]
    h = float(rng.uniform(0.05, 2.0))
    x = np.cumsum(rng.standard_normal(n)) if rng.random() < 0.5 else rng.standard_normal(n)
    grid = Grid.covering(float(rng.uniform(0.5, 5.0)), float(rng.uniform(0.05, 0.5)))
    weights = rng.standard_normal(n) if rng.random() < 0.5 else None
    return x, kernel, h, grid, weights


def test_kernel_sums_match_naive_evaluation(rng, naive_kernel_sums):
    for _ in range(200):
        x, kernel, h, grid, weights = _random_instance(rng)
        squared = weights is None and rng.random() < 0.5
        got = kernel_sum(x, kernel, h, grid, weights=weights, squared=squared).to_array()
        want = naive_kernel_sums(x, kernel, h, grid.points(), weights, squared)
        scale = 1.0 + (len(x) if weights is None else float(np.abs(weights).sum()))
        np.testing.assert_allclose(got, want, rtol=1e-12, atol=1e-13 * scale)


def test_chunking_does_not_change_sums(rng, monkeypatch):
    x = np.cumsum(rng.standard_normal(400))
    u = rng.standard_normal(400)
    grid = Grid.covering(20.0, 0.05)
    want = martingale_sum(x, u, "epanechnikov", 1.5, grid).to_array()
    monkeypatch.setattr(sums, "BLOCK_ELEMENTS", 7)
    got = martingale_sum(x, u, "epanechnikov", 1.5, grid).to_array()
    np.testing.assert_allclose(got, want, rtol=1e-14, atol=1e-14)


def test_constant_path_variance_sum():
    values = variance_sum(np.zeros(100), "epanechnikov", 0.5, Grid.from_points([0.0]))
    assert values.to_array()[0] == 56.25


def test_doubled_errors_double_martingale_sum(rng):
    x = np.cumsum(rng.standard_normal(300))
    u = rng.standard_normal(300)
    grid = Grid.covering(10.0, 0.1)
    s1 = martingale_sum(x, u, "quartic", 0.7, grid).to_array()
    s2 = martingale_sum(x, 2.0 * u, "quartic", 0.7, grid).to_array()
    np.testing.assert_array_equal(s2, 2.0 * s1)


def test_shifted_sums_agree_with_grid_sums(rng):
    x = rng.standard_normal(200)
    grid = Grid.covering(3.0, 0.25)
    want = kernel_sum(x, "triangular", 0.4, grid).to_array()
    got = shifted_kernel_sums(x, "triangular", 0.4, grid.points()[::-1])
    np.testing.assert_allclose(got[::-1], want, rtol=1e-14, atol=1e-14)


def test_length_mismatch_and_missing_errors():
    x = np.zeros(10)
    with pytest.raises(InvalidArgumentError):
        kernel_sum(x, "epanechnikov", 1.0, Grid.covering(1.0, 0.5), weights=np.ones(9))
    with pytest.raises(InvalidArgumentError):
        martingale_sum(x, None, "epanechnikov", 1.0, Grid.covering(1.0, 0.5))
    with pytest.raises(InvalidArgumentError):
        variance_sum(x, "epanechnikov", 0.0, Grid.covering(1.0, 0.5))


def test_sup_and_inf_on_plain_sequences():
    assert sup_stat([1.0, -3.0, 3.0]) == (3.0, 1, None)
    assert inf_stat([2.0, 0.0, 0.0]) == (0.0, 1, None)
    with pytest.raises(InvalidArgumentError):
        inf_stat([1.0, -1.0])
    with pytest.raises(InvalidArgumentError):
        sup_stat([])


@given(st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=50))
def test_sup_stat_matches_scan(values):
    best = max(abs(v) for v in values)
    result = sup_stat(values)
    assert result.value == best
    assert result.index == min(j for j, v in enumerate(values) if abs(v) == best)


def test_inf_of_wide_grid_is_zero_at_first_point():
    x = np.linspace(0.0, 1.0, 50)
    grid = Grid.covering(100.0, 1.0)
    result = inf_stat(variance_sum(x, "epanechnikov", 0.5, grid))
    assert result == (0.0, 0, -100.0)


def test_huge_grid_stays_lazy():
    path = gen_random_walk(1000, "gaussian", 3)
    grid = Grid.covering(1e9, 1.0)
    values = variance_sum(path, "epanechnikov", 0.5, grid)
    assert len(values) == grid.count
    assert len(values.values) < 10**4
    with pytest.raises(InvalidArgumentError):
        values.to_array()
    assert sup_stat(values).value > 0.0
    assert inf_stat(values) == (0.0, 0, grid.start)


def test_noncompact_kernel_rejects_huge_grid():
    with pytest.raises(InvalidArgumentError):
        variance_sum(np.zeros(5), "gaussian", 0.5, Grid.covering(1e8, 1.0))


def test_grid_values_outside_active_range_are_zero():
    grid = Grid(0.0, 1.0, 6)
    values = GridValues(grid, 2, [1.0, 2.0])
    np.testing.assert_array_equal(values.to_array(), [0.0, 0.0, 1.0, 2.0, 0.0, 0.0])
    assert values.hi == 4


def test_refinement_bounds_the_sup(rng):
    x = np.cumsum(rng.standard_normal(2000))
    kernel = get_kernel("epanechnikov")
    h = 0.3
    grid = Grid.covering(50.0, 0.2)
    coarse = sup_stat(variance_sum(x, kernel, h, grid)).value
    fine = sup_stat(variance_sum(x, kernel, h, grid.refine(2))).value
    bound = kernel.squared_lipschitz_const * len(x) * (grid.step / 2.0) / h
    assert coarse <= fine * (1.0 + 1e-12)
    assert fine <= coarse + bound


def test_refined_grid_contains_coarse_points():
    grid = Grid.covering(3.0, 0.7)
    fine = grid.refine(2)
    np.testing.assert_array_equal(fine.points()[::2], grid.points())


@pytest.mark.parametrize("kernel", KERNEL_NAMES)
@pytest.mark.parametrize("stride", [2, 3, 7])
def test_sub_grid_extrema_are_monotone(rng, kernel, stride):
    x = np.cumsum(rng.standard_normal(1000))
    u = rng.standard_normal(1000)
    h = 0.4
    grid = Grid.covering(20.0, 0.05)
    sub = Grid(grid.start, grid.step * stride, (grid.count - 1) // stride + 1)
    v_full = variance_sum(x, kernel, h, grid)
    v_sub = variance_sum(x, kernel, h, sub)
    assert sup_stat(v_sub).value <= sup_stat(v_full).value * (1.0 + 1e-9)
    assert inf_stat(v_sub).value >= inf_stat(v_full).value * (1.0 - 1e-9)
    s_full = sup_stat(martingale_sum(x, u, kernel, h, grid)).value
    s_sub = sup_stat(martingale_sum(x, u, kernel, h, sub)).value
    assert s_sub <= s_full * (1.0 + 1e-9) + 1e-12


def test_point_lists_must_be_arithmetic():
    x = [-1.0, 0.0, 1.0]
    values = variance_sum(x, "epanechnikov", 0.5, [-1.0, 0.0, 1.0]).to_array()
    np.testing.assert_array_equal(values, [0.5625, 0.5625, 0.5625])
    for points in ([0.0, 1.0, 5.0], [1.0, 0.0, -1.0], [0.0, 0.0], []):
        with pytest.raises(InvalidArgumentError):
            variance_sum(x, "epanechnikov", 0.5, points)
    with pytest.raises(InvalidArgumentError, match="equally spaced"):
        martingale_sum(x, [1.0, 1.0, 1.0], "epanechnikov", 0.5, [0.0, 1.0, 5.0])
    np.testing.assert_array_equal(
        shifted_kernel_sums(x, "epanechnikov", 0.5, [0.0, 1.0, 5.0]), [0.75, 0.75, 0.0]
    )


def test_covering_grid():
    grid = Grid.covering(1.0, 0.3)
    assert grid.count == 8
    assert grid.start == -1.0
    assert grid.stop == pytest.approx(1.0)
    assert grid.step <= 0.3
    assert len(Grid.covering(0.0, 0.3)) == 1


def test_grid_spec_ranges():
    rule = BandwidthRule()
    n = 10000
    h = rule(n)
    assert GridSpec("sqrt", tau=0.1).b_n(n) == pytest.approx(10.0)
    assert GridSpec("power", m=1.0).b_n(n) == n
    path = np.array([-3.0, 2.0])
    spec = GridSpec("path-range")
    assert spec.b_n(n, path=path, kernel=get_kernel("epanechnikov"), h=h) == 3.0 + h
    with pytest.raises(InvalidArgumentError):
        spec.b_n(n)
    c_n = NormalizationProfile().c_n(n, h)
    expected = min(h * math.sqrt(c_n * math.log(n)) / n, h / 10.0)
    assert GridSpec(spacing="rate").spacing_for(n, h, c_n) == expected
    assert GridSpec(spacing="bandwidth", delta=0.1).spacing_for(n, h) == 0.1 * h


def test_bandwidth_rule():
    rule = BandwidthRule(2.0, 0.5)
    assert rule(100) == pytest.approx(0.2)
    assert rule.check(N_GRID) == (True, True)
    with pytest.raises(InvalidArgumentError):
        BandwidthRule(gamma=1.0)
    with pytest.raises(InvalidArgumentError):
        BandwidthRule(c=0.0)


def test_profiles():
    assert NormalizationProfile("random-walk").a(100) == 10.0
    assert NormalizationProfile("regular", 0.25).a(16) == 2.0
    with pytest.raises(InvalidArgumentError):
        NormalizationProfile("regular")


def test_normalized_ratios():
    profile = NormalizationProfile()
    ratios = normalized_ratios(10.0, 25.0, 0.0, 100, 0.5, profile)
    assert ratios.sup_s_ratio == pytest.approx(10.0 / math.sqrt(50.0 * math.log(100.0)))
    assert ratios.sup_v_ratio == 0.5
    assert ratios.inf_v_reciprocal == math.inf
    assert ratios.inf_v_degenerate
    ratios = normalized_ratios(None, None, 5.0, 100, 0.5, profile)
    assert ratios.sup_s_ratio is None
    assert ratios.inf_v_reciprocal == 10.0
    with pytest.raises(InvalidArgumentError):
        normalized_ratios(1.0, 1.0, 1.0, 1, 0.5, profile)


def test_tail_condition_check():
    report = tail_condition_check([1.0, -2.0], 2.0, 2.0, 50.0, 100)
    target = math.sqrt(50.0 * math.log(100.0))
    assert report.statistic == 1.25
    assert report.ratio == pytest.approx(1.25 / target)
    assert report.companion is None
    report = tail_condition_check([1.0], 2.0, 2.0, 50.0, 100, kernel="epanechnikov", h=0.1)
    assert report.companion == 0.0
    report = tail_condition_check([1.0], 1.0, 2.0, 50.0, 100, kernel="epanechnikov", h=1.0)
    assert report.companion == pytest.approx(100 * 0.75 * 0.75)


def test_moment_balance_for_stationary_regressors():
    report = check_moment_balance(BandwidthRule(), NormalizationProfile(), 2, N_GRID)
    assert report.passed
    assert report.reason is None


def test_moment_balance_rejects_light_tails_for_walks():
    profile = NormalizationProfile("random-walk")
    n_grid = [2**k for k in range(10, 21)]
    report = check_moment_balance(BandwidthRule(), profile, 2, n_grid)
    assert not report.passed
    assert "increase p" in report.reason
    assert check_moment_balance(BandwidthRule(), profile, 11, n_grid).passed


def test_moment_balance_arguments():
    with pytest.raises(InvalidArgumentError):
        check_moment_balance(BandwidthRule(), NormalizationProfile(), 2, [1024])
    with pytest.raises(InvalidArgumentError):
        check_moment_balance(BandwidthRule(), NormalizationProfile(), 0, N_GRID)
