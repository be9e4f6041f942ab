# SPDX-License-Identifier: MIT

import copy
import os

import jsonschema
import yaml

import kerncoint.util as _util
from kerncoint.exceptions import InvalidArgumentError

global_yaml_loader = yaml.SafeLoader
global_config_validator = None
native_yaml_available = False

try:
    global_yaml_loader = yaml.CSafeLoader
    native_yaml_available = True
except AttributeError:
    pass

# Built-in defaults; every key is also a schema property and a CLI flag.
DEFAULTS = {
    "target": "sup-s",
    "normalize": True,
    "process": "mixing-ar",
    "innovations": "gaussian",
    "rho": 0.5,
    "phi": None,
    "a1": None,
    "a2": None,
    "tail_tol": 1e-8,
    "burn_in": 1000,
    "p": None,
    "eps0": None,
    "errors": "gaussian",
    "volatility": "none",
    "kernel": "epanechnikov",
    "bandwidth_c": 1.0,
    "bandwidth_gamma": 0.2,
    "bandwidth_log_exponent": 0.0,
    "grid_range": "fixed",
    "grid_b": 1.0,
    "grid_tau": 0.1,
    "grid_kappa": 0.0,
    "grid_m": 1.0,
    "grid_spacing": "rate",
    "grid_delta": 0.1,
    "profile": "stationary",
    "beta": None,
    "regression": "logistic",
    "reg_alpha": 0.0,
    "reg_beta": 1.0,
    "reg_gamma": 0.5,
    "reg_theta": [0.0, 1.0],
    "tail_k0": None,
    "n_min": 1024,
    "n_max": 131072,
    "n_grid": None,
    "replicates": 200,
    "seed": None,
    "threads": None,
    "override_checks": False,
    "level_scale": 0.0,
    "floor_replicates": 20,
}


def _get_validator():
    global global_config_validator
    if not global_config_validator:
        schema_path = os.path.join(os.path.dirname(__file__), "schema.yml")
        with open(schema_path, "r") as f:
            schema_yml = yaml.load(f, Loader=global_yaml_loader)
        global_config_validator = jsonschema.Draft7Validator(schema_yml)
    return global_config_validator


# Raises InvalidArgumentError if the configuration does not validate.
def validate_config(options, origin):
    n = 0
    for e in _get_validator().iter_errors(options):
        if n == 0:
            _util.log_err("Failed to validate configuration from {}".format(origin))
        _util.log_err(
            "* Error in key: {}\n           {}".format(
                "/".join(str(elem) for elem in e.absolute_path) or "<root>", e.message
            )
        )
        n += 1
        if n >= 10:
            _util.log_err("Reporting only the first 10 errors")
            break
    if n:
        raise InvalidArgumentError("Invalid configuration in {}".format(origin))


def load_config_file(path):
    try:
        with open(path, "r") as f:
            yml = yaml.load(f, Loader=global_yaml_loader)
    except FileNotFoundError:
        raise InvalidArgumentError("Config file {} does not exist".format(path)) from None
    except yaml.YAMLError as e:
        raise InvalidArgumentError(
            "Config file {} is not valid YAML: {}".format(path, e)
        ) from None
    if yml is None:
        yml = {}
    if not isinstance(yml, dict):
        raise InvalidArgumentError("Config file {} must be a flat key/value mapping".format(path))
    validate_config(yml, path)
    return yml


# Precedence is defaults < preset < config file < overrides; None overrides are unset.
def resolve_options(*, preset=None, config_path=None, overrides=None):
    if preset is not None and config_path is not None:
        raise InvalidArgumentError("A preset and a config file are mutually exclusive")
    options = copy.deepcopy(DEFAULTS)
    origin = "defaults"
    if preset is not None:
        options.update(copy.deepcopy(preset))
        origin = "preset"
    if config_path is not None:
        options.update(load_config_file(config_path))
        origin = config_path
    if overrides:
        options.update({k: v for k, v in overrides.items() if v is not None})
        origin = "command line"
    validate_config(options, origin)
    return options


def config_schema():
    return _get_validator().schema
