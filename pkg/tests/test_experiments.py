# SPDX-License-Identifier: MIT

import io
import math

import numpy as np
import pandas as pd
import pytest

from kerncoint.exceptions import ConfigRejectedError, FitUndefinedError, InvalidArgumentError
from kerncoint.experiments import (
    COLUMNS,
    PRESET_ALIASES,
    PRESETS,
    TAIL_STATISTIC,
    ExperimentConfig,
    fit_rate,
    n_grid_for,
    per_n_medians,
    per_n_quantile,
    preflight,
    preset,
    replicate_seeds,
    run_experiment,
    summarize,
    write_table,
)
from kerncoint.sums import ProfileKind


def _small(name=None, **overrides):
    options = {"n_min": 64, "n_max": 256, "replicates": 1, "seed": 3}
    options.update(overrides)
    return ExperimentConfig.resolve(preset=name, overrides=options)


def _synthetic_table(values_for_n, replicates=5):
    rows = []
    for n, value in values_for_n.items():
        for r in range(replicates):
            rows.append((n, r, "sup-v", value))
    return pd.DataFrame(rows, columns=COLUMNS)


@pytest.mark.parametrize("name", sorted(PRESETS))
def test_presets_resolve(name):
    config = preset(name)
    assert config.options["seed"] is None
    assert len(config.n_grid) >= 3
    assert config.replicates >= 200


def test_walk_presets():
    upper = preset("walk-upper")
    assert upper.statistic == "sup-v"
    assert upper.n_grid == [2**k for k in range(10, 18)]
    assert upper.profile.kind is ProfileKind.RANDOM_WALK
    assert preset("walk-martingale").moment_order == 11
    assert preset("walk-regression").moment_order == 4
    assert preset("walk-lower").statistic == "inf-v-reciprocal"
    assert upper.options["grid_spacing"] == "bandwidth"
    assert preset("stationary-variance").options["grid_spacing"] == "rate"
    assert preset("walk-regression").statistic == "nw-error-ratio"


def test_default_spacing_is_rate_matched():
    config = _small(n_max=4096)
    n = 4096
    h = config.bandwidth(n)
    c_n = config.c_n(n)
    grid = config.grid.build(n, h, c_n)
    assert grid.step <= min(h * math.sqrt(c_n * math.log(n)) / n, h / 10.0) * (1.0 + 1e-12)
    assert grid.step < h / 10.0
    # For c_n = n h the rate-matched spacing drops below h/10 well before n = 4096.
    assert config.grid.spacing_for(n, h, c_n) == pytest.approx(
        h * math.sqrt(c_n * math.log(n)) / n
    )


@pytest.mark.parametrize("alias", sorted(PRESET_ALIASES))
def test_preset_aliases(alias):
    assert preset(alias).options == preset(PRESET_ALIASES[alias]).options


def test_aliased_catalog_entries():
    config = preset("C2.1-lower")
    assert config.target == "inf-v"
    assert config.grid.b_n(10000) == pytest.approx(10.0)
    upper = preset("T2.3-upper")
    assert upper.replicates == 500
    assert upper.n_grid == [2**k for k in range(10, 18)]
    assert preset("T3.1").moment_order == 4


def test_unknown_preset():
    with pytest.raises(InvalidArgumentError):
        ExperimentConfig.resolve(preset="walk-sideways")


def test_n_grid():
    assert n_grid_for({"n_grid": None, "n_min": 1000, "n_max": 5000}) == [1024, 2048, 4096]
    assert n_grid_for({"n_grid": [10, 20, 40]}) == [10, 20, 40]
    with pytest.raises(InvalidArgumentError):
        n_grid_for({"n_grid": [20, 10]})
    with pytest.raises(InvalidArgumentError):
        n_grid_for({"n_grid": None, "n_min": 1025, "n_max": 2000})
    with pytest.raises(InvalidArgumentError):
        n_grid_for({"n_grid": None, "n_min": 4096, "n_max": 1024})


def test_experiment_smoke():
    table = run_experiment(_small("walk-upper"), threads=1)
    assert list(table.columns) == COLUMNS
    assert table["n"].tolist() == [64, 128, 256]
    assert (table["statistic"] == "sup-v").all()
    assert (table["value"] > 0.0).all()


def test_experiments_are_reproducible():
    config = _small("walk-martingale", replicates=2)
    first = run_experiment(config, threads=1)
    second = run_experiment(config, threads=1)
    pd.testing.assert_frame_equal(first, second)


def test_results_do_not_depend_on_workers():
    config = _small("walk-lower", replicates=3, n_min=128)
    pd.testing.assert_frame_equal(
        run_experiment(config, threads=1), run_experiment(config, threads=2)
    )


def test_replicates_are_independent():
    table = run_experiment(_small("walk-upper", replicates=4, n_max=64), threads=1)
    assert table["value"].nunique() == 4


def test_replicate_seeds_are_distinct():
    config = _small(replicates=20)
    seeds = replicate_seeds(config, 3)
    assert len(set(seeds.values())) == len(seeds) == 60
    assert replicate_seeds(config, 3) == seeds
    assert replicate_seeds(config, 4) != seeds


def test_tail_statistic_rows():
    table = run_experiment(_small("whole-space", n_max=128), threads=1)
    assert table["statistic"].tolist() == ["sup-v-ratio", TAIL_STATISTIC] * 2
    assert np.all(np.isfinite(table["value"]))


def test_regression_experiment():
    table = run_experiment(_small("walk-regression", n_min=256, n_max=512), threads=1)
    assert table["statistic"].tolist() == ["nw-error-ratio", "nw-error-ratio"]
    assert np.all(table["value"] > 0.0)
    assert np.all(np.isfinite(table["value"]))


def test_missing_seed_is_rejected():
    config = ExperimentConfig.resolve(overrides={"n_min": 64, "n_max": 128, "replicates": 1})
    with pytest.raises(InvalidArgumentError):
        run_experiment(config)


def test_collapsing_bandwidth_is_rejected():
    config = _small(bandwidth_log_exponent=-5.0, n_grid=[64, 128])
    with pytest.raises(ConfigRejectedError) as excinfo:
        run_experiment(config, threads=1)
    assert excinfo.value.assumption == "bandwidth"

    config = _small(bandwidth_log_exponent=-5.0, n_grid=[64, 128], override_checks=True)
    assert len(run_experiment(config, threads=1)) == 2


def test_light_tailed_walk_errors_fail_moment_balance():
    config = ExperimentConfig.resolve(preset="walk-martingale", overrides={"p": 2})
    checks = {c.name: c for c in preflight(config)}
    assert not checks["moment balance"].passed
    assert "increase p" in checks["moment balance"].detail
    assert checks["bandwidth"].passed
    assert checks["kernel regularity"].passed


def test_single_sample_size_skips_moment_balance():
    config = _small("walk-martingale", n_grid=[256])
    checks = {c.name: c for c in preflight(config)}
    assert checks["moment balance"].passed
    assert "skipped" in checks["moment balance"].detail


def test_expanding_threshold_map_is_rejected():
    config = _small(process="tar", a1=1.5, a2=0.2, target="sup-v")
    checks = {c.name: c for c in preflight(config)}
    assert not checks["contraction"].passed
    with pytest.raises(ConfigRejectedError):
        run_experiment(config, threads=1)


def test_regression_preflight_checks_hoelder_envelope():
    checks = {c.name: c for c in preflight(preset("walk-regression"))}
    assert checks["hoelder envelope"].passed


@pytest.mark.parametrize("name", ["stationary-variance", "whole-space"])
def test_stationary_variance_needs_compact_kernel(name):
    config = _small(name, kernel="gaussian")
    checks = {c.name: c for c in preflight(config)}
    assert not checks["compact support"].passed
    assert "gaussian" in checks["compact support"].detail
    with pytest.raises(ConfigRejectedError) as excinfo:
        run_experiment(config, threads=1)
    assert excinfo.value.assumption == "compact support"

    checks = {c.name: c for c in preflight(_small(name))}
    assert checks["compact support"].passed


def test_martingale_targets_accept_gaussian_kernel():
    for name in ("stationary-sup", "walk-martingale", "walk-upper"):
        checks = {c.name for c in preflight(_small(name, kernel="gaussian"))}
        assert "compact support" not in checks


def test_fit_rate_recovers_power_law():
    table = _synthetic_table({n: 2.0 * math.sqrt(n) for n in (100, 1000, 10000, 100000)})
    fit = fit_rate(table, "sup-v")
    assert fit.slope == pytest.approx(0.5)
    assert fit.intercept == pytest.approx(math.log(2.0))
    assert fit.r_squared == pytest.approx(1.0)
    assert fit.medians[100] == pytest.approx(20.0)

    fit = fit_rate(table, "sup-v", regressor=lambda n: n**2)
    assert fit.slope == pytest.approx(0.25)


def test_fit_rate_slope_is_scale_invariant():
    base = {100: 1.5, 200: 2.5, 400: 3.0, 800: 7.0}
    fit = fit_rate(_synthetic_table(base), "sup-v")
    scaled = fit_rate(_synthetic_table({n: 4.0 * v for n, v in base.items()}), "sup-v")
    assert scaled.slope == pytest.approx(fit.slope)
    assert scaled.intercept == pytest.approx(fit.intercept + math.log(4.0))


def test_fit_rate_of_constant_medians():
    fit = fit_rate(_synthetic_table({100: 3.0, 200: 3.0, 400: 3.0}), "sup-v")
    assert fit.slope == pytest.approx(0.0)
    assert fit.r_squared == 0.0


def test_fit_rate_preconditions():
    with pytest.raises(InvalidArgumentError):
        fit_rate(_synthetic_table({100: 1.0, 200: 2.0}), "sup-v")
    with pytest.raises(FitUndefinedError):
        fit_rate(_synthetic_table({100: 1.0, 200: 0.0, 400: 2.0}), "sup-v")
    with pytest.raises(FitUndefinedError):
        fit_rate(_synthetic_table({100: 1.0, 200: math.inf, 400: 2.0}), "sup-v")


def test_summary():
    config = _small("walk-upper", n_max=128)
    table = _synthetic_table({64: 1.0, 128: 2.0})
    summary = summarize(table, config)
    stats = summary["statistics"]["sup-v"]
    assert stats["per_n"][64] == {"median": 1.0, "quantile_90": 1.0, "infinite_fraction": 0.0}
    assert "error" in stats["fit_n"]
    assert summary["options"]["seed"] == 3


def test_table_round_trip():
    table = pd.DataFrame(
        [(64, 0, "sup-v", 1.0 / 3.0), (64, 1, "sup-v", math.pi * 1e-7)], columns=COLUMNS
    )
    buf = io.StringIO()
    write_table(table, buf)
    buf.seek(0)
    pd.testing.assert_frame_equal(pd.read_csv(buf), table)


def test_config_file(tmp_path):
    path = tmp_path / "experiment.yml"
    path.write_text("kernel: quartic\nreplicates: 10\nn_grid: [64, 128]\n")
    config = ExperimentConfig.resolve(config_path=str(path), overrides={"replicates": 20})
    assert config.kernel.name == "quartic"
    assert config.replicates == 20
    assert config.n_grid == [64, 128]


@pytest.mark.parametrize(
    "text", ["kernal: quartic\n", "replicates: -1\n", "- 1\n- 2\n", "kernel: [\n"]
)
def test_invalid_config_file(tmp_path, text):
    path = tmp_path / "experiment.yml"
    path.write_text(text)
    with pytest.raises(InvalidArgumentError):
        ExperimentConfig.resolve(config_path=str(path))


def test_config_file_and_preset_are_exclusive(tmp_path):
    path = tmp_path / "experiment.yml"
    path.write_text("{}\n")
    with pytest.raises(InvalidArgumentError):
        ExperimentConfig.resolve(preset="walk-upper", config_path=str(path))
    with pytest.raises(InvalidArgumentError):
        ExperimentConfig.resolve(config_path=str(tmp_path / "missing.yml"))


@pytest.mark.slow
@pytest.mark.parametrize("process", ["mixing-ar", "tar", "linear"])
def test_stationary_variance_identifies_nh(process):
    config = ExperimentConfig.resolve(
        preset="stationary-variance", overrides={"process": process, "seed": 17}
    )
    fit = fit_rate(run_experiment(config), "sup-v", config.c_n)
    assert 0.85 <= fit.slope <= 1.15
    assert fit.r_squared >= 0.95


@pytest.mark.slow
def test_walk_variance_grows_like_c_n():
    config = ExperimentConfig.resolve(
        preset="walk-upper", overrides={"n_max": 2**16, "replicates": 200, "seed": 11}
    )
    table = run_experiment(config)
    fit = fit_rate(table, "sup-v", config.c_n)
    assert 0.85 <= fit.slope <= 1.15
    assert fit.r_squared >= 0.9


@pytest.mark.slow
@pytest.mark.parametrize("volatility", ["none", "sine"])
@pytest.mark.parametrize("name", ["stationary-sup", "walk-martingale"])
def test_martingale_ratio_is_bounded(name, volatility):
    config = ExperimentConfig.resolve(
        preset=name, overrides={"volatility": volatility, "seed": 5}
    )
    medians = per_n_medians(run_experiment(config), "sup-s-ratio")
    assert list(medians.index) == config.n_grid
    assert medians.max() / medians.min() < 3.0


@pytest.mark.slow
def test_walk_regression_error_follows_rate():
    config = ExperimentConfig.resolve(preset="walk-regression", overrides={"seed": 8})
    fit = fit_rate(run_experiment(config), "nw-error-ratio")
    assert -0.25 <= fit.slope <= -0.08
    assert fit.r_squared >= 0.8


@pytest.mark.slow
def test_walk_lower_bound_quantile_is_stable():
    config = ExperimentConfig.resolve(
        preset="walk-lower", overrides={"n_max": 2**15, "replicates": 200, "seed": 13}
    )
    table = run_experiment(config)
    quantiles = per_n_quantile(table, "inf-v-reciprocal", 0.9)
    assert quantiles[2**15] <= 2.0 * quantiles[2**12]


@pytest.mark.slow
def test_wide_range_lower_bound_degenerates():
    config = ExperimentConfig.resolve(
        preset="walk-lower",
        overrides={"grid_tau": 3.0, "n_max": 2**13, "replicates": 100, "seed": 21},
    )
    table = run_experiment(config)
    assert np.isinf(table["value"]).mean() > 0.0
