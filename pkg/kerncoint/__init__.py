# SPDX-License-Identifier: MIT

import argparse
import importlib.metadata
import json
import math
import random

import colorama
import numpy as np
import pandas as pd

import kerncoint.base
import kerncoint.cli_utils
import kerncoint.experiments as _experiments
import kerncoint.util as _util
from kerncoint.exceptions import GenericError, InvalidArgumentError
from kerncoint.harris import (
    block_functionals,
    estimate_beta,
    local_time_comparison,
    occupation_floor,
    zero_crossing_record,
)
from kerncoint.processes import GaussianARChain, ProcessKind, gen_errors, gen_split_chain
from kerncoint.regression import (
    bias_bound,
    error_decomposition,
    nw_fit,
    total_rate,
    uniform_error,
)
from kerncoint.sums import (
    RangeRule,
    inf_stat,
    martingale_sum,
    normalized_ratios,
    sup_stat,
    variance_sum,
)

try:
    __version__ = importlib.metadata.version("kerncoint")
except importlib.metadata.PackageNotFoundError:
    __version__ = "unknown"

# ---------------------------------------------------------------------------------------
# Command line parsing.
# ---------------------------------------------------------------------------------------

main_parser = argparse.ArgumentParser(
    prog="kerncoint",
    description="Kernel martingale sums and Nadaraya-Watson rates for time series",
)
main_parser.add_argument("-v", dest="verbose", action="store_true", help="verbose")
main_parser.add_argument("--version", action="version", version="%(prog)s " + __version__)
main_subparsers = main_parser.add_subparsers(dest="command")


def _scalar_type(prop, definitions):
    if "$ref" in prop:
        prop = definitions[prop["$ref"].rsplit("/", 1)[1]]
    types = prop.get("type", "string")
    if isinstance(types, list):
        types = [t for t in types if t != "null"][0]
    return prop, types


def _add_config_flags(parser):
    schema = kerncoint.base.config_schema()
    definitions = schema.get("definitions", {})
    group = parser.add_argument_group("configuration keys")
    for key, prop in schema["properties"].items():
        prop, kind = _scalar_type(prop, definitions)
        flag = kerncoint.cli_utils.flag_name(key)
        default = kerncoint.base.DEFAULTS.get(key)
        helptext = "default: {}".format(default)
        if "enum" in prop:
            group.add_argument(flag, dest=key, choices=prop["enum"], help=helptext)
        elif kind == "boolean":
            group.add_argument(
                flag, dest=key, action=argparse.BooleanOptionalAction, help=helptext
            )
        elif kind == "array":
            item_type = int if prop["items"]["type"] == "integer" else float
            group.add_argument(flag, dest=key, type=item_type, nargs="+", help=helptext)
        elif kind == "integer":
            group.add_argument(flag, dest=key, type=int, help=helptext)
        else:
            group.add_argument(flag, dest=key, type=float, help=helptext)


config_parser = argparse.ArgumentParser(add_help=False)
_source_group = config_parser.add_mutually_exclusive_group()
_source_group.add_argument(
    "--preset", type=str, choices=_experiments.preset_names(), help="start from a preset"
)
_source_group.add_argument("--config", type=str, help="flat YAML configuration file")
config_parser.add_argument(
    "--out", type=str, default="-", help="output: '-', a path, path:PATH or fd:N"
)
config_parser.add_argument("--summary", type=str, help="write a JSON summary to this spec")
_add_config_flags(config_parser)

sample_parser = argparse.ArgumentParser(add_help=False)
sample_parser.add_argument("--n", type=int, help="sample size (default: n_max)")


def config_for_args(args):
    schema_keys = kerncoint.base.config_schema()["properties"]
    overrides = {key: getattr(args, key) for key in schema_keys}
    config = _experiments.ExperimentConfig.resolve(
        preset=args.preset, config_path=args.config, overrides=overrides
    )
    if config.options["seed"] is None:
        options = dict(config.options, seed=random.getrandbits(63))
        _util.log_info("Using seed {}".format(options["seed"]))
        config = _experiments.ExperimentConfig(options)
    return config


def n_for_args(args, config):
    n = args.n if args.n is not None else config.options["n_max"]
    if n < 2:
        raise InvalidArgumentError("Sample size must be at least 2, got {}".format(n))
    return n


def _to_builtin(value):
    if isinstance(value, dict):
        return {str(k): _to_builtin(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_to_builtin(v) for v in value]
    if isinstance(value, np.generic):
        return value.item()
    return value


def write_json(spec, obj):
    with kerncoint.cli_utils.open_file_from_cli(spec, "w") as f:
        json.dump(_to_builtin(obj), f, indent=2, sort_keys=True)
        f.write("\n")


def write_csv(spec, table):
    with kerncoint.cli_utils.open_file_from_cli(spec, "w", newline="") as f:
        _experiments.write_table(table, f)


def _simulate_path(config, n, seed=None):
    if seed is None:
        seed = _util.derive_seed(config.options["seed"], 0)
    if config.process is ProcessKind.SPLIT_CHAIN:
        return gen_split_chain(n, GaussianARChain(config.options["rho"]), seed)
    return config.generate_path(n, seed), None


def _errors(config, path):
    return gen_errors(path, config.error_spec, _util.derive_seed(config.options["seed"], 1))


def do_simulate(args):
    config = config_for_args(args)
    n = n_for_args(args, config)
    path, record = _simulate_path(config, n)
    columns = {"t": np.arange(1, n + 1), "x": path.values, "u": _errors(config, path)}
    if record is not None:
        columns["regen"] = record.indicators
    write_csv(args.out, pd.DataFrame(columns))
    if args.summary:
        write_json(args.summary, {"n": n, "process": path.kind.value, "params": path.params})


do_simulate.parser = main_subparsers.add_parser(
    "simulate", parents=[config_parser, sample_parser], help="simulate a regressor path"
)
do_simulate.parser.set_defaults(_impl=do_simulate)


def _grid_summary(config, n, h, grid, path):
    return {
        "n": n,
        "h": h,
        "c_n": config.profile.c_n(n, h),
        "b_n": config.grid.b_n(n, path=path, kernel=config.kernel, h=h),
        "grid_points": len(grid),
        "grid_spacing": grid.step,
    }


# Monte Carlo floor of E V_n over [-(b_n + 1), b_n + 1]; bounded ranges only.
def _occupation_floor(config, n, h, spacing, a_n):
    count = config.options["floor_replicates"]
    if not count or config.grid.range_rule not in (RangeRule.FIXED, RangeRule.SQRT):
        return None
    seed = config.options["seed"]
    paths = (
        _simulate_path(config, n, _util.derive_seed(seed, 2, r))[0] for r in range(count)
    )
    floor = occupation_floor(paths, config.kernel, h, config.grid.b_n(n), a_n, spacing=spacing)
    return floor._asdict()


def _do_sum(args, martingale):
    config = config_for_args(args)
    n = n_for_args(args, config)
    path, _ = _simulate_path(config, n)
    h = config.bandwidth(n)
    c_n = config.profile.c_n(n, h)
    grid = config.grid.build(n, h, c_n, path=path, kernel=config.kernel)
    if martingale:
        values = martingale_sum(path, _errors(config, path), config.kernel, h, grid)
    else:
        values = variance_sum(path, config.kernel, h, grid)

    # Grid points outside the active range carry exact zeros and are not listed.
    write_csv(
        args.out,
        pd.DataFrame({"y": grid.points(values.lo, values.hi), "value": values.values}),
    )
    if args.summary:
        summary = _grid_summary(config, n, h, grid, path)
        sup = sup_stat(values)
        summary["sup"] = sup._asdict()
        if martingale:
            ratios = normalized_ratios(sup.value, None, None, n, h, config.profile)
        else:
            inf = inf_stat(values)
            summary["inf"] = inf._asdict()
            ratios = normalized_ratios(None, sup.value, inf.value, n, h, config.profile)
            summary["occupation_floor"] = _occupation_floor(
                config, n, h, grid.step, config.profile.a(n)
            )
        summary["ratios"] = ratios._asdict()
        write_json(args.summary, summary)


def do_vsum(args):
    _do_sum(args, martingale=False)


def do_ssum(args):
    _do_sum(args, martingale=True)


do_vsum.parser = main_subparsers.add_parser(
    "vsum", parents=[config_parser, sample_parser], help="variance sum V_n over the grid"
)
do_vsum.parser.set_defaults(_impl=do_vsum)

do_ssum.parser = main_subparsers.add_parser(
    "ssum", parents=[config_parser, sample_parser], help="martingale sum S_n over the grid"
)
do_ssum.parser.set_defaults(_impl=do_ssum)


def do_regress(args):
    config = config_for_args(args)
    n = n_for_args(args, config)
    path, _ = _simulate_path(config, n)
    h = config.bandwidth(n)
    grid = config.grid.build(n, h, config.profile.c_n(n, h), path=path, kernel=config.kernel)
    m = config.regression
    u = _errors(config, path)
    y = m(path.values) + u
    fit = nw_fit(path, y, config.kernel, h, grid)
    write_csv(
        args.out,
        pd.DataFrame(
            {
                "y": fit.points,
                "estimate": fit.estimates,
                "truth": m(fit.points),
                "defined": fit.defined.astype(int),
            }
        ),
    )
    if args.summary:
        error = uniform_error(fit, m)
        parts = error_decomposition(path, y, u, m, config.kernel, h, grid)
        delta_n = m.delta_n(fit.points)
        try:
            bound = float(np.max(bias_bound(m, config.kernel, h, fit.points[fit.defined])))
        except InvalidArgumentError as e:
            _util.log_verbose("No bias bound: {}".format(e))
            bound = None
        summary = _grid_summary(config, n, h, grid, path)
        summary.update(
            {
                "uniform_error": error._asdict(),
                "martingale_part": float(np.nanmax(np.abs(parts.theta1))),
                "bias_part": float(np.nanmax(np.abs(parts.theta2))),
                "bias_bound": bound,
                "delta_n": delta_n,
                "rate": total_rate(n, h, m.holder_exponent, delta_n),
            }
        )
        write_json(args.summary, summary)


do_regress.parser = main_subparsers.add_parser(
    "regress", parents=[config_parser, sample_parser], help="Nadaraya-Watson fit on the grid"
)
do_regress.parser.set_defaults(_impl=do_regress)


def do_beta(args):
    config = config_for_args(args)
    n = n_for_args(args, config)
    path, record = _simulate_path(config, n)
    if record is None:
        if config.process is not ProcessKind.RANDOM_WALK:
            raise InvalidArgumentError(
                "Process {} has no regeneration structure; use split-chain or random-walk".format(
                    config.process.value
                )
            )
        record = zero_crossing_record(path)
    profile = estimate_beta(record)
    h = config.bandwidth(n)
    blocks = block_functionals(path, record, config.kernel, h, 0.0)
    write_csv(
        args.out,
        pd.DataFrame({"n": profile.checkpoints, "regenerations": profile.counts}),
    )
    if args.summary:
        spacing = config.grid.spacing_for(n, h, config.profile.c_n(n, h))
        write_json(
            args.summary,
            {
                "beta_hat": profile.beta_hat,
                "beta_se": profile.beta_se,
                "intercept": profile.intercept,
                "regenerations": record.n_of_n,
                "mean_block_functional": float(np.mean(blocks.blocks)) if record.n_of_n else None,
                "occupation_floor": _occupation_floor(config, n, h, spacing, profile.a(n)),
            },
        )


do_beta.parser = main_subparsers.add_parser(
    "beta", parents=[config_parser, sample_parser], help="estimate the regularity index beta"
)
do_beta.parser.set_defaults(_impl=do_beta)


def do_localtime(args):
    config = config_for_args(args)
    n = args.n if args.n is not None else 10**4
    h = config.bandwidth(n)
    report = local_time_comparison(
        n,
        h,
        config.kernel,
        config.replicates,
        config.options["seed"],
        level=config.options["level_scale"] * math.sqrt(n),
        threads=config.options["threads"],
    )
    write_csv(
        args.out,
        pd.DataFrame(
            {
                "replicate": np.arange(len(report.statistics)),
                "statistic": report.statistics,
                "oracle": report.oracle,
            }
        ),
    )
    if args.summary:
        summary = {
            key: value
            for key, value in report._asdict().items()
            if key not in ("statistics", "oracle")
        }
        summary.update({"n": n, "h": h})
        write_json(args.summary, summary)


do_localtime.parser = main_subparsers.add_parser(
    "localtime",
    parents=[config_parser, sample_parser],
    help="compare V_n with a Brownian local-time oracle",
)
do_localtime.parser.set_defaults(_impl=do_localtime)


def do_experiment(args):
    config = config_for_args(args)
    table = _experiments.run_experiment(config)
    write_csv(args.out, table)
    if args.summary:
        write_json(args.summary, _experiments.summarize(table, config))


do_experiment.parser = main_subparsers.add_parser(
    "experiment", parents=[config_parser], help="run a Monte Carlo experiment"
)
do_experiment.parser.set_defaults(_impl=do_experiment)


def do_check(args):
    config = config_for_args(args)
    results = _experiments.preflight(config)
    with kerncoint.cli_utils.open_file_from_cli(args.out, "w") as f:
        for result in results:
            status = "PASS" if result.passed else "FAIL"
            f.write("{} {}: {}\n".format(status, result.name, result.detail))
    if args.summary:
        write_json(args.summary, [result._asdict() for result in results])
    return 0 if all(result.passed for result in results) else 1


do_check.parser = main_subparsers.add_parser(
    "check", parents=[config_parser], help="run the assumption checks of a configuration"
)
do_check.parser.set_defaults(_impl=do_check)


def main(argv=None):
    try:
        args = main_parser.parse_args(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else 2

    colorama.just_fix_windows_console()

    if args.verbose:
        _util.verbosity = True

    if not kerncoint.base.native_yaml_available:
        _util.log_verbose("Using pure Python YAML parser")

    if args.command is None:
        main_parser.print_help()
        return 2

    try:
        status = args._impl(args)
    except InvalidArgumentError as e:
        _util.log_err(e)
        return 2
    except GenericError as e:
        _util.log_err(e)
        return 1
    except KeyboardInterrupt:
        return 1
    return status or 0
