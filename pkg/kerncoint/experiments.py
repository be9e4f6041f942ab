# SPDX-License-Identifier: MIT

import collections
import copy
import math

import numpy as np
import pandas as pd
import scipy.stats

import kerncoint.base as _base
import kerncoint.util as _util
from kerncoint.exceptions import (
    ConfigRejectedError,
    FitUndefinedError,
    GenericError,
    InvalidArgumentError,
)
from kerncoint.kernels import check_regularity, get_kernel
from kerncoint.processes import (
    ErrorSpec,
    ProcessKind,
    contraction_diagnostics,
    gen_errors,
    generate,
    get_volatility,
    moment_order_for,
)
from kerncoint.regression import check_holder, make_regression_function, nw_fit, uniform_error
from kerncoint.sums import (
    BandwidthRule,
    GridSpec,
    NormalizationProfile,
    ProfileKind,
    check_moment_balance,
    inf_stat,
    martingale_sum,
    normalized_ratios,
    sup_stat,
    tail_condition_check,
    variance_sum,
)

MIN_FIT_REPLICATES = 50
DEFAULT_MOMENT_ORDER = 2

COLUMNS = ["n", "replicate", "statistic", "value"]

# Names of the statistic column for (target, normalized).
STATISTIC_NAMES = {
    ("sup-s", True): "sup-s-ratio",
    ("sup-s", False): "sup-s",
    ("sup-v", True): "sup-v-ratio",
    ("sup-v", False): "sup-v",
    ("inf-v", True): "inf-v-reciprocal",
    ("inf-v", False): "inf-v",
    ("nw-error", True): "nw-error-ratio",
    ("nw-error", False): "nw-error",
}

TAIL_STATISTIC = "tail-ratio"

# For random walks the rate-matched spacing is thousands of times finer than h at
# these sample sizes (over 10^7 active points for |x| <= n), so walk presets use h/10.
_walk = {
    "process": "random-walk",
    "profile": "random-walk",
    "kernel": "epanechnikov",
    "bandwidth_gamma": 0.2,
    "eps0": 0.1,
    "grid_spacing": "bandwidth",
    "grid_delta": 0.1,
}

PRESETS = {
    # sup_x V_n(x) = O_P(nh) for stationary regressors.
    "stationary-variance": {
        "target": "sup-v",
        "normalize": False,
        "process": "mixing-ar",
        "profile": "stationary",
        "grid_range": "fixed",
        "grid_b": 1.0,
        "n_min": 2**10,
        "n_max": 2**16,
        "replicates": 200,
    },
    # sup |S_n| = O_P[(nh log n)^(1/2)] over a fixed range.
    "stationary-sup": {
        "target": "sup-s",
        "process": "mixing-ar",
        "profile": "stationary",
        "p": 2,
        "grid_range": "fixed",
        "grid_b": 1.0,
        "n_min": 2**10,
        "n_max": 2**16,
        "replicates": 300,
    },
    # h = (log n / n)^(1/5).
    "stationary-optimal": {
        "target": "sup-s",
        "process": "mixing-ar",
        "profile": "stationary",
        "p": 2,
        "bandwidth_gamma": 0.2,
        "bandwidth_log_exponent": 0.2,
        "grid_range": "fixed",
        "grid_b": 1.0,
        "n_min": 2**10,
        "n_max": 2**16,
        "replicates": 200,
    },
    # Supremum over the whole real line, with the tail condition reported.
    "whole-space": {
        "target": "sup-v",
        "process": "mixing-ar",
        "profile": "stationary",
        "grid_range": "path-range",
        "tail_k0": 2.0,
        "n_min": 2**10,
        "n_max": 2**16,
        "replicates": 200,
    },
    "walk-martingale": dict(
        _walk,
        target="sup-s",
        grid_range="power",
        grid_m=1.0,
        n_min=2**10,
        n_max=2**16,
        replicates=300,
    ),
    "walk-upper": dict(
        _walk,
        target="sup-v",
        normalize=False,
        grid_range="power",
        grid_m=1.0,
        n_min=2**10,
        n_max=2**17,
        replicates=500,
    ),
    "walk-lower": dict(
        _walk,
        target="inf-v",
        grid_range="sqrt",
        grid_tau=0.1,
        grid_kappa=0.0,
        n_min=2**12,
        n_max=2**17,
        replicates=500,
    ),
    "walk-regression": dict(
        _walk,
        target="nw-error",
        regression="logistic",
        reg_alpha=0.0,
        reg_beta=1.0,
        eps0=None,
        p=4,
        errors="gaussian",
        grid_range="sqrt",
        grid_tau=0.1,
        grid_kappa=0.0,
        n_min=2**11,
        n_max=2**17,
        replicates=300,
    ),
}


# Short names accepted wherever a preset is named.
PRESET_ALIASES = {
    "T2.1": "stationary-sup",
    "T2.3-upper": "walk-upper",
    "T2.3-lower": "walk-lower",
    "C2.1": "walk-upper",
    "C2.1-lower": "walk-lower",
    "T3.1": "walk-regression",
}


def preset_names():
    return sorted(PRESETS) + list(PRESET_ALIASES)


def get_preset(name):
    try:
        return copy.deepcopy(PRESETS[PRESET_ALIASES.get(name, name)])
    except KeyError:
        raise InvalidArgumentError(
            "Unknown preset {}; choose one of {}".format(name, ", ".join(preset_names()))
        ) from None


def n_grid_for(options):
    if options.get("n_grid") is not None:
        n_grid = [int(n) for n in options["n_grid"]]
        if any(b <= a for a, b in zip(n_grid, n_grid[1:])):
            raise InvalidArgumentError("n-grid must be strictly ascending")
        return n_grid
    lo, hi = options["n_min"], options["n_max"]
    if lo > hi:
        raise InvalidArgumentError("n_min {} exceeds n_max {}".format(lo, hi))
    n_grid = [2**k for k in range(lo.bit_length() - 1, hi.bit_length()) if lo <= 2**k <= hi]
    if not n_grid:
        raise InvalidArgumentError("No power of two lies in [{}, {}]".format(lo, hi))
    return n_grid


class ExperimentConfig:
    """A validated experiment configuration together with the objects it describes."""

    def __init__(self, options):
        self.options = dict(options)
        o = self.options
        self.target = o["target"]
        self.normalize = o["normalize"]
        self.process = ProcessKind(o["process"])
        self.kernel = get_kernel(o["kernel"])
        self.bandwidth = BandwidthRule(
            o["bandwidth_c"], o["bandwidth_gamma"], o["bandwidth_log_exponent"]
        )
        self.profile = NormalizationProfile(o["profile"], o["beta"])
        self.grid = GridSpec(
            o["grid_range"],
            b=o["grid_b"],
            tau=o["grid_tau"],
            kappa=o["grid_kappa"],
            m=o["grid_m"],
            spacing=o["grid_spacing"],
            delta=o["grid_delta"],
        )
        if o["p"] is not None:
            p = o["p"]
        elif o["eps0"] is not None:
            p = moment_order_for(o["eps0"])
        else:
            p = DEFAULT_MOMENT_ORDER
        self.error_spec = ErrorSpec(p, o["errors"], get_volatility(o["volatility"]))
        self.regression = make_regression_function(
            o["regression"],
            alpha=o["reg_alpha"],
            beta=o["reg_beta"],
            gamma=o["reg_gamma"],
            theta=o["reg_theta"],
        )
        self.n_grid = n_grid_for(o)
        self.replicates = o["replicates"]

    @classmethod
    def resolve(cls, *, preset=None, config_path=None, overrides=None):
        preset_options = None if preset is None else get_preset(preset)
        return cls(
            _base.resolve_options(
                preset=preset_options, config_path=config_path, overrides=overrides
            )
        )

    @property
    def moment_order(self):
        return self.error_spec.moment_order

    @property
    def statistic(self):
        return STATISTIC_NAMES[(self.target, self.normalize)]

    def process_params(self):
        o = self.options
        params = {"rho": o["rho"], "tail_tol": o["tail_tol"], "burn_in": o["burn_in"]}
        for key in ("phi", "a1", "a2"):
            if o[key] is not None:
                params[key] = o[key]
        return params

    def generate_path(self, n, seed):
        return generate(
            self.process, n, seed, dist=self.options["innovations"], **self.process_params()
        )

    def c_n(self, n):
        return self.profile.c_n(n, self.bandwidth(n))


def preset(name):
    return ExperimentConfig(_base.resolve_options(preset=get_preset(name)))


CheckResult = collections.namedtuple("CheckResult", ["name", "passed", "detail"])


def preflight(config):
    results = []
    h_ok, nh_ok = config.bandwidth.check(config.n_grid)
    results.append(
        CheckResult(
            "bandwidth",
            h_ok and nh_ok,
            "h decreasing: {}, n h increasing: {}".format(h_ok, nh_ok),
        )
    )

    report = check_regularity(config.kernel)
    results.append(
        CheckResult(
            "kernel regularity",
            report.bounded and report.lipschitz_verified and report.integrable,
            "worst Lipschitz ratio {:.6g}, integral error {:.3g}".format(
                report.worst_lipschitz_ratio, report.integral_error
            ),
        )
    )

    # Identifying c_n = nh for stationary regressors needs a compactly supported kernel.
    if config.target in ("sup-v", "inf-v") and config.profile.kind is ProfileKind.STATIONARY:
        results.append(
            CheckResult(
                "compact support",
                config.kernel.is_compact,
                "kernel {} {} compact support".format(
                    config.kernel.name, "has" if config.kernel.is_compact else "lacks"
                ),
            )
        )

    if config.target in ("sup-s", "nw-error") and len(config.n_grid) < 2:
        results.append(CheckResult("moment balance", True, "skipped for a single sample size"))
    elif config.target in ("sup-s", "nw-error"):
        balance = check_moment_balance(
            config.bandwidth, config.profile, config.moment_order, config.n_grid
        )
        detail = "p = {}, n c_n^-p log^(p-1) n from {:.4g} to {:.4g}".format(
            config.moment_order, balance.statistics[0], balance.statistics[-1]
        )
        if balance.reason:
            detail = "{}: {}".format(detail, balance.reason)
        results.append(CheckResult("moment balance", balance.passed, detail))

    if config.process in (ProcessKind.TAR, ProcessKind.ARCH):
        params = config.process_params()
        default_a = (0.3, -0.6) if config.process is ProcessKind.TAR else (1.0, 0.5)
        a1 = float(params.get("a1", default_a[0]))
        a2 = float(params.get("a2", default_a[1]))
        contraction = contraction_diagnostics(
            config.process.value, a1, a2, config.options["innovations"]
        )
        results.append(
            CheckResult(
                "contraction",
                contraction.passed,
                contraction.failed_condition
                or "E log L = {:.4g}, E L^2 = {:.4g}".format(
                    contraction.e_log_l, contraction.e_l_squared
                ),
            )
        )

    if config.target == "nw-error":
        holder = check_holder(config.regression, -10.0, 10.0)
        results.append(
            CheckResult(
                "hoelder envelope",
                holder.passed,
                "worst ratio {:.6g} over {} pairs".format(holder.worst_ratio, holder.pairs),
            )
        )
    return results


def replicate_seeds(config, base_seed):
    return {
        (n, r): _util.derive_seed(base_seed, n, r)
        for n in config.n_grid
        for r in range(config.replicates)
    }


def _replicate_rows(config, n, seed):
    h = config.bandwidth(n)
    c_n = config.profile.c_n(n, h)
    path = config.generate_path(n, _util.derive_seed(seed, 0))
    grid = config.grid.build(n, h, c_n, path=path, kernel=config.kernel)
    target = config.target

    if target == "sup-s":
        u = gen_errors(path, config.error_spec, _util.derive_seed(seed, 1))
        value = sup_stat(martingale_sum(path, u, config.kernel, h, grid)).value
        if config.normalize:
            value = normalized_ratios(value, None, None, n, h, config.profile).sup_s_ratio
    elif target == "sup-v":
        value = sup_stat(variance_sum(path, config.kernel, h, grid)).value
        if config.normalize:
            value = normalized_ratios(None, value, None, n, h, config.profile).sup_v_ratio
    elif target == "inf-v":
        value = inf_stat(variance_sum(path, config.kernel, h, grid)).value
        if config.normalize:
            value = normalized_ratios(None, None, value, n, h, config.profile).inf_v_reciprocal
    else:
        u = gen_errors(path, config.error_spec, _util.derive_seed(seed, 1))
        y = config.regression(path.values) + u
        fit = nw_fit(path, y, config.kernel, h, grid)
        value = uniform_error(fit, config.regression).sup_error
        if config.normalize:
            # The log factor of the uniform rate stays in the normalizer.
            value /= math.sqrt(math.log(n))

    rows = [(config.statistic, float(value))]
    k0 = config.options["tail_k0"]
    if k0 is not None:
        b_n = config.grid.b_n(n, path=path, kernel=config.kernel, h=h)
        tail = tail_condition_check(path, b_n, k0, c_n, n, kernel=config.kernel, h=h)
        rows.append((TAIL_STATISTIC, tail.ratio))
    return rows


def _run_replicate(task):
    options, n, replicate, seed = task
    config = ExperimentConfig(options)
    return [(n, replicate, name, value) for name, value in _replicate_rows(config, n, seed)]


# Rows are ordered by (n, replicate) whatever the number of workers.
def run_experiment(config, *, threads=None):
    if config.options["seed"] is None:
        raise InvalidArgumentError("Experiments need an explicit base seed")
    results = preflight(config)
    for result in results:
        if result.passed:
            continue
        if config.options["override_checks"]:
            _util.log_warn("Ignoring failed check {}: {}".format(result.name, result.detail))
        else:
            raise ConfigRejectedError(result.name, result.detail)
    if config.replicates < MIN_FIT_REPLICATES:
        _util.log_warn(
            "{} replicates are too few for rate fits (need {})".format(
                config.replicates, MIN_FIT_REPLICATES
            )
        )

    seeds = replicate_seeds(config, config.options["seed"])
    if threads is None:
        threads = config.options["threads"]
    rows = []
    for n in config.n_grid:
        _util.log_verbose("Running {} replicates at n = {}".format(config.replicates, n))
        tasks = [(config.options, n, r, seeds[(n, r)]) for r in range(config.replicates)]
        for replicate_rows in _util.map_replicates(_run_replicate, tasks, threads):
            rows.extend(replicate_rows)
    return pd.DataFrame(rows, columns=COLUMNS)


RateFit = collections.namedtuple(
    "RateFit", ["slope", "intercept", "r_squared", "slope_se", "medians"]
)


def per_n_medians(table, statistic):
    selected = table[table["statistic"] == statistic]
    return selected.groupby("n", sort=True)["value"].median()


def per_n_quantile(table, statistic, q):
    selected = table[table["statistic"] == statistic]
    return selected.groupby("n", sort=True)["value"].quantile(q)


# Least squares of log(median over replicates) on log n, or on log regressor(n).
def fit_rate(table, statistic, regressor=None):
    medians = per_n_medians(table, statistic)
    if len(medians) < 3:
        raise InvalidArgumentError(
            "Rate fits need at least 3 distinct n, got {}".format(len(medians))
        )
    values = medians.to_numpy(dtype=float)
    if not np.all(np.isfinite(values)) or np.any(values <= 0.0):
        raise FitUndefinedError(
            "Medians of {} must be positive and finite to fit a rate".format(statistic)
        )
    ns = medians.index.to_numpy(dtype=float)
    x = ns if regressor is None else np.array([regressor(int(n)) for n in ns], dtype=float)
    fit = scipy.stats.linregress(np.log(x), np.log(values))
    r_squared = float(fit.rvalue) ** 2
    if not math.isfinite(r_squared):
        r_squared = 0.0
    return RateFit(
        float(fit.slope),
        float(fit.intercept),
        r_squared,
        float(fit.stderr),
        {int(n): float(v) for n, v in zip(ns, values)},
    )


def _fit_summary(table, statistic, regressor=None):
    try:
        return fit_rate(table, statistic, regressor)._asdict()
    except GenericError as e:
        return {"error": str(e)}


# Per-n medians and 90% quantiles plus rate fits against n and c_n.
def summarize(table, config):
    summary = {"options": config.options, "statistics": {}}
    for statistic in table["statistic"].unique():
        values = table[table["statistic"] == statistic]
        per_n = {}
        for n, group in values.groupby("n", sort=True):
            v = group["value"].to_numpy(dtype=float)
            per_n[int(n)] = {
                "median": float(np.median(v)),
                "quantile_90": float(np.quantile(v, 0.9)),
                "infinite_fraction": float(np.mean(np.isinf(v))),
            }
        summary["statistics"][statistic] = {
            "per_n": per_n,
            "fit_n": _fit_summary(table, statistic),
            "fit_c_n": _fit_summary(table, statistic, config.c_n),
        }
    return summary


def write_table(table, f):
    table.to_csv(f, index=False, float_format="%.17g")
