# SPDX-License-Identifier: MIT

import collections
import math

import numpy as np
import scipy.stats

import kerncoint.util as _util
from kerncoint.exceptions import InvalidArgumentError, NotEnoughDataError
from kerncoint.kernels import get_kernel
from kerncoint.processes import (
    InnovationDist,
    RegenRecord,
    gen_random_walk,
    path_values,
)
from kerncoint.sums import Grid, kernel_terms, variance_sum

__all__ = [
    "RegenRecord",
    "HarrisProfile",
    "estimate_beta",
    "zero_crossing_record",
    "block_functionals",
    "local_time_comparison",
    "occupation_floor",
]

MIN_REGENERATIONS = 10
CHECKPOINT_HALVINGS = 6
MIN_LOCAL_TIME_REPLICATES = 100

# The local-time oracle walks FINE_FACTOR * n steps.
FINE_FACTOR = 10

# Half-width (in units of the Brownian scale) of the occupation window used to
# calibrate crossing counts.
OCCUPATION_WINDOW = 0.05


class HarrisProfile:
    """Fitted regeneration scale a(n) = n^beta_hat."""

    __slots__ = ["beta_hat", "beta_se", "intercept", "checkpoints", "counts"]

    def __init__(self, beta_hat, beta_se, intercept, checkpoints, counts):
        self.beta_hat = beta_hat
        self.beta_se = beta_se
        self.intercept = intercept
        self.checkpoints = checkpoints
        self.counts = counts

    def __repr__(self):
        return "HarrisProfile(beta_hat={:.4f}, beta_se={:.4f})".format(self.beta_hat, self.beta_se)

    def a(self, n):
        return float(n) ** self.beta_hat

    @property
    def plausible(self):
        return 0.0 < self.beta_hat <= 1.0 + 3.0 * self.beta_se


# Least-squares slope of log N(n_i) against log n_i.
#
# Checkpoints default to n 2^-i for i = 0..6 where n is the record length.
# Checkpoints before the first regeneration are dropped.
def estimate_beta(record, n_checkpoints=None):
    if n_checkpoints is None:
        n = len(record)
        n_checkpoints = [n >> i for i in range(CHECKPOINT_HALVINGS + 1)]
    checkpoints = np.unique(np.asarray(n_checkpoints, dtype=np.int64))
    if len(checkpoints) and checkpoints[0] < 1:
        raise InvalidArgumentError("Checkpoints must be positive")
    counts = np.array([record.count_until(n) for n in checkpoints])
    if not len(counts) or counts[-1] < MIN_REGENERATIONS:
        raise NotEnoughDataError(
            "Need at least {} regenerations at the largest checkpoint, got {}".format(
                MIN_REGENERATIONS, int(counts[-1]) if len(counts) else 0
            )
        )
    keep = counts > 0
    if np.count_nonzero(keep) < 2:
        raise NotEnoughDataError("Need at least two checkpoints with regenerations")
    fit = scipy.stats.linregress(np.log(checkpoints[keep]), np.log(counts[keep]))
    profile = HarrisProfile(
        float(fit.slope),
        float(fit.stderr),
        float(fit.intercept),
        checkpoints[keep].tolist(),
        counts[keep].tolist(),
    )
    if not profile.plausible:
        _util.log_warn(
            "Estimated beta {:.4f} (se {:.4f}) lies outside (0, 1]".format(
                profile.beta_hat, profile.beta_se
            )
        )
    return profile


# Regeneration proxy for random walks: rho_k are the times t at which x_t sits at
# zero or x_t and x_{t+1} lie on opposite sides of zero.
def zero_crossing_record(path):
    values = path_values(path)
    signs = np.sign(values)
    crossing = np.zeros(len(values), dtype=np.int8)
    if len(values) > 1:
        crossing[:-1] = (signs[:-1] * signs[1:] < 0.0) | (signs[:-1] == 0.0)
    return RegenRecord(crossing)


BlockFunctionals = collections.namedtuple("BlockFunctionals", ["blocks", "tail"])


# Z_j(x) = sum over rho_{j-1} < k <= rho_j of f^2[(x_k + x)/h], with rho_0 = 0.
# tail holds the partial block after the last regeneration.
def block_functionals(path, record, kernel, h, x):
    values = path_values(path)
    if len(record) != len(values):
        raise InvalidArgumentError(
            "Regeneration record covers {} steps, path has {}".format(len(record), len(values))
        )
    if not h > 0.0:
        raise InvalidArgumentError("Bandwidth h must be positive")
    terms = kernel_terms(values, get_kernel(kernel), h, x, squared=True)
    rho = record.rho
    if not len(rho):
        return BlockFunctionals(np.zeros(0), math.fsum(terms))
    starts = np.concatenate([[0], rho[:-1]])
    blocks = np.add.reduceat(terms[: rho[-1]], starts)
    return BlockFunctionals(blocks, math.fsum(terms[rho[-1] :]))


LocalTimeReport = collections.namedtuple(
    "LocalTimeReport",
    [
        "statistics",
        "oracle",
        "ks_distance",
        "p_value",
        "calibration",
        "zero_fraction",
        "oracle_zero_fraction",
        "oracle_zero_fraction_at_zero",
    ],
)


def _crossings(walk, level):
    above = walk > level
    return int(np.count_nonzero(above[1:] != above[:-1]))


def _local_time_replicate(task):
    n, h, kernel_name, level, seed = task
    kernel = get_kernel(kernel_name)
    walk = gen_random_walk(n, InnovationDist.GAUSSIAN, _util.derive_seed(seed, 0))
    v = variance_sum(walk, kernel, h, Grid(level, 1.0, 1)).to_array()[0]
    statistic = v / (math.sqrt(n) * h * kernel.square_integral)

    m = FINE_FACTOR * n
    fine = gen_random_walk(m, InnovationDist.GAUSSIAN, _util.derive_seed(seed, 1)).values
    fine = np.concatenate([[0.0], fine])
    scale = math.sqrt(m)
    # A level y for the coarse walk is the Brownian level -y / sqrt(n).
    shifted = -level / math.sqrt(n) * scale
    crossings_zero = _crossings(fine, 0.0)
    crossings_level = crossings_zero if level == 0.0 else _crossings(fine, shifted)
    window = OCCUPATION_WINDOW * scale
    occupation = np.count_nonzero(np.abs(fine[1:]) <= window) / (m * 2.0 * OCCUPATION_WINDOW)
    return statistic, crossings_zero, crossings_level, occupation


def local_time_comparison(
    n, h, kernel, replicates, seed, *, level=0.0, near_zero=0.05, threads=None
):
    """Compares V_n(level) / (sqrt(n) h int f^2) for Gaussian random walks with an
    independent Brownian local-time oracle.

    The oracle counts level crossings of a walk with ``FINE_FACTOR * n`` steps.
    Crossing counts are converted to local time by a single constant calibrated
    on the same fine walks: the ratio of the mean occupation-density estimate at
    0 to the mean crossing count at 0. Outcomes at most ``near_zero`` count as
    zero.
    """
    kernel = get_kernel(kernel)
    if replicates < MIN_LOCAL_TIME_REPLICATES:
        raise NotEnoughDataError(
            "Local-time comparison needs at least {} replicates".format(
                MIN_LOCAL_TIME_REPLICATES
            )
        )
    if not h > 0.0:
        raise InvalidArgumentError("Bandwidth h must be positive")
    if math.sqrt(n) * h < 10.0:
        _util.log_warn(
            "sqrt(n) h = {:.3g} < 10; the local-time limit may be a poor approximation".format(
                math.sqrt(n) * h
            )
        )
    tasks = [
        (n, h, kernel.name, float(level), _util.derive_seed(seed, r))
        for r in range(replicates)
    ]
    rows = np.array(_util.map_replicates(_local_time_replicate, tasks, threads))
    statistics = rows[:, 0]
    crossings_zero = rows[:, 1]
    crossings_level = rows[:, 2]
    occupation = rows[:, 3]
    if not crossings_zero.sum() > 0:
        raise NotEnoughDataError("Oracle walks never crossed zero; increase n")
    calibration = float(occupation.mean() / crossings_zero.mean())
    oracle = calibration * crossings_level
    ks = scipy.stats.ks_2samp(statistics, oracle)
    return LocalTimeReport(
        statistics=statistics,
        oracle=oracle,
        ks_distance=float(ks.statistic),
        p_value=float(ks.pvalue),
        calibration=calibration,
        zero_fraction=float(np.mean(statistics <= near_zero)),
        oracle_zero_fraction=float(np.mean(oracle <= near_zero)),
        oracle_zero_fraction_at_zero=float(np.mean(calibration * crossings_zero <= near_zero)),
    )


OccupationFloor = collections.namedtuple(
    "OccupationFloor", ["mean_minimum", "argmin", "c0", "replicates"]
)


# Monte Carlo estimate of C0 in inf_{|x| <= b_n + 1} E V_n(x) >= a(n) h / C0, from
# independent replicates of the regressor.
def occupation_floor(paths, kernel, h, b_n, a_n, *, spacing=None):
    paths = list(paths)
    if not paths:
        raise NotEnoughDataError("Occupation floor needs at least one path")
    if spacing is None:
        spacing = h / 10.0
    grid = Grid.covering(b_n + 1.0, spacing)
    total = np.zeros(len(grid))
    for path in paths:
        total += variance_sum(path, kernel, h, grid).to_array()
    mean = total / len(paths)
    j = int(np.argmin(mean))
    floor = float(mean[j])
    c0 = math.inf if floor == 0.0 else a_n * h / floor
    return OccupationFloor(floor, grid.point(j), c0, len(paths))
