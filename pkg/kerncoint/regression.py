# SPDX-License-Identifier: MIT

import collections
import math
from enum import Enum

import numpy as np
import scipy.special

from kerncoint.exceptions import FitFailedError, InvalidArgumentError
from kerncoint.kernels import get_kernel
from kerncoint.processes import path_values
from kerncoint.sums import MAX_DENSE_POINTS, Grid, shifted_kernel_sums

# Neighbourhood radius on which the stored Hölder envelopes are valid.
HOLDER_EPS = 0.5


class RegressionKind(Enum):
    POLYNOMIAL = "polynomial"
    POWER = "power"
    RATIONAL = "rational"
    LOGISTIC = "logistic"


# A regression function m with a local Hölder envelope.
#
# |m(y) - m(x)| <= holder_const * |y - x|^holder_exponent * envelope(x) holds
# whenever |y - x| <= HOLDER_EPS.
class RegressionFunction:
    def __init__(self, kind, params, fn, holder_exponent, holder_const, envelope):
        self.kind = kind
        self.params = dict(params)
        self._fn = fn
        self.holder_exponent = holder_exponent
        self.holder_const = holder_const
        self._envelope = envelope

    def __repr__(self):
        return "RegressionFunction({}, {})".format(self.kind.value, self.params)

    def __call__(self, x):
        return self._fn(np.asarray(x, dtype=float))

    def envelope(self, x):
        return np.broadcast_to(self._envelope(np.asarray(x, dtype=float)), np.shape(x)).astype(
            float
        )

    @property
    def bounded_envelope(self):
        return self.kind in (RegressionKind.RATIONAL, RegressionKind.LOGISTIC) or (
            self.kind is RegressionKind.POWER and self.params["gamma"] <= 1.0
        )

    # Supremum of the envelope over the evaluation points.
    def delta_n(self, points):
        return float(np.max(self.envelope(points)))


# m(x) = theta_0 + theta_1 x + ... + theta_k x^k.
def polynomial(theta):
    theta = np.asarray(theta, dtype=float)
    if theta.ndim != 1 or not len(theta):
        raise InvalidArgumentError("Polynomial needs at least one coefficient")
    powers = np.arange(1, len(theta))
    slopes = np.abs(theta[1:]) * powers

    def envelope(x):
        base = np.abs(x)[..., None] + HOLDER_EPS
        return np.sum(slopes * base ** (powers - 1), axis=-1)

    return RegressionFunction(
        RegressionKind.POLYNOMIAL,
        {"theta": theta.tolist()},
        lambda x: np.polynomial.polynomial.polyval(x, theta),
        1.0,
        1.0,
        envelope,
    )


# m(x) = alpha + beta sign(x) |x|^gamma, the odd extension of alpha + beta x^gamma.
def power(alpha, beta, gamma):
    if not gamma > 0.0:
        raise InvalidArgumentError("Power exponent gamma must be positive")

    def fn(x):
        return alpha + beta * np.sign(x) * np.abs(x) ** gamma

    params = {"alpha": alpha, "beta": beta, "gamma": gamma}
    if gamma <= 1.0:
        return RegressionFunction(
            RegressionKind.POWER,
            params,
            fn,
            gamma,
            2.0 ** (1.0 - gamma) * abs(beta),
            lambda x: np.ones_like(x),
        )
    return RegressionFunction(
        RegressionKind.POWER,
        params,
        fn,
        1.0,
        1.0,
        lambda x: gamma * abs(beta) * (np.abs(x) + HOLDER_EPS) ** (gamma - 1.0),
    )


# m(x) = x / (1 + theta x) for x >= 0 and 0 otherwise.
def rational(theta):
    if not theta > 0.0:
        raise InvalidArgumentError("Rational parameter theta must be positive")

    def fn(x):
        xp = np.maximum(x, 0.0)
        return xp / (1.0 + theta * xp)

    # |m'| <= 1 on x >= 0 and m' = 0 on x < 0.
    return RegressionFunction(
        RegressionKind.RATIONAL, {"theta": theta}, fn, 1.0, 1.0, lambda x: np.ones_like(x)
    )


# m(x) = (alpha + beta e^x) / (1 + e^x).
def logistic(alpha=0.0, beta=1.0):
    def fn(x):
        return alpha + (beta - alpha) * scipy.special.expit(x)

    return RegressionFunction(
        RegressionKind.LOGISTIC,
        {"alpha": alpha, "beta": beta},
        fn,
        1.0,
        abs(beta - alpha) / 4.0,
        lambda x: np.ones_like(x),
    )


def make_regression_function(kind, *, alpha=0.0, beta=1.0, gamma=0.5, theta=(0.0, 1.0)):
    kind = RegressionKind(kind)
    if kind is RegressionKind.POLYNOMIAL:
        return polynomial(theta)
    if kind is RegressionKind.POWER:
        return power(alpha, beta, gamma)
    if kind is RegressionKind.RATIONAL:
        return rational(theta[0] if np.ndim(theta) else theta)
    return logistic(alpha, beta)


HolderReport = collections.namedtuple("HolderReport", ["passed", "worst_ratio", "pairs"])


# Samples pairs with |y - x| <= HOLDER_EPS in [lo, hi] and checks the stored envelope.
def check_holder(fn, lo, hi, *, pairs=10**5, seed=0):
    rng = np.random.default_rng(seed)
    x = rng.uniform(lo, hi, size=pairs)
    y = x + rng.uniform(-HOLDER_EPS, HOLDER_EPS, size=pairs)
    lhs = np.abs(fn(y) - fn(x))
    rhs = fn.holder_const * np.abs(y - x) ** fn.holder_exponent * fn.envelope(x)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(rhs > 0.0, lhs / rhs, np.where(lhs > 0.0, np.inf, 0.0))
    worst = float(ratio.max())
    return HolderReport(worst <= 1.0 + 1e-9, worst, pairs)


# Nadaraya-Watson estimates on a grid.
#
# numerators and denominators hold sum y_t K_h(x_t - y_j) and
# sum K_h(x_t - y_j); grid points with a vanishing denominator are undefined and
# carry NaN estimates. Estimates are formed as anchor + sum (y_t - anchor) K_h / sum K_h
# so that a constant response is reproduced exactly.
class NWFit:
    __slots__ = ["points", "estimates", "numerators", "denominators", "defined", "h"]

    def __init__(self, points, centered, denominators, threshold, h, *, anchor=0.0):
        self.points = points
        self.numerators = anchor * denominators + centered
        self.denominators = denominators
        self.defined = denominators >= threshold
        self.h = h
        estimates = np.full(len(points), np.nan)
        np.divide(centered, denominators, out=estimates, where=self.defined)
        estimates[self.defined] += anchor
        self.estimates = estimates

    def __len__(self):
        return len(self.points)

    @property
    def undefined_fraction(self):
        return 1.0 - float(np.mean(self.defined))


def _points(grid):
    if isinstance(grid, Grid):
        if len(grid) > MAX_DENSE_POINTS:
            raise InvalidArgumentError("Grid too large for a fit ({} points)".format(len(grid)))
        return grid.points()
    return np.asarray(grid, dtype=float)


def _weighted_sums(x, weights, kernel, h, points):
    # K_h(x_t - y) = h^-1 K((x_t + (-y)) / h).
    return shifted_kernel_sums(x, kernel, h, -points, weights=weights) / h


# m_hat(y_j) = sum y_t K_h(x_t - y_j) / sum K_h(x_t - y_j).
def nw_fit(x, y, kernel, h, grid):
    kernel = get_kernel(kernel)
    values = path_values(x)
    y = np.asarray(y, dtype=float)
    if len(y) != len(values):
        raise InvalidArgumentError(
            "Length mismatch: {} responses for a path of length {}".format(len(y), len(values))
        )
    points = _points(grid)
    anchor = float(y[0]) if len(y) else 0.0
    centered = _weighted_sums(values, y - anchor, kernel, h, points)
    denominators = _weighted_sums(values, None, kernel, h, points)
    threshold = np.finfo(float).eps * len(values)
    fit = NWFit(points, centered, denominators, threshold, h, anchor=anchor)
    if not np.any(fit.defined):
        raise FitFailedError(
            "Kernel window is empty at every grid point; the grid far exceeds the visited range"
        )
    return fit


UniformError = collections.namedtuple(
    "UniformError", ["sup_error", "argmax", "undefined_fraction"]
)


# Maximum |m_hat - m| over the defined grid points.
def uniform_error(fit, truth):
    if not np.any(fit.defined):
        raise InvalidArgumentError("Fit has no defined grid points")
    points = fit.points[fit.defined]
    errors = np.abs(fit.estimates[fit.defined] - truth(points))
    j = int(np.argmax(errors))
    return UniformError(float(errors[j]), float(points[j]), fit.undefined_fraction)


Decomposition = collections.namedtuple(
    "Decomposition", ["theta1", "theta2", "total", "defined", "points"]
)


# Splits m_hat - m into the martingale part theta1 and the bias part theta2.
#
# theta1 = sum u_t K_h / sum K_h and theta2 = sum [m(x_t) - m(y_j)] K_h / sum K_h;
# both are NaN at undefined grid points.
def error_decomposition(x, y, u, truth, kernel, h, grid):
    values = path_values(x)
    y = np.asarray(y, dtype=float)
    u = np.asarray(u, dtype=float)
    if len(u) != len(values):
        raise InvalidArgumentError("Length mismatch between errors and path")
    m_x = truth(values)
    if len(y) != len(values) or not np.allclose(y, m_x + u, rtol=1e-12, atol=1e-12):
        raise InvalidArgumentError("Responses do not satisfy y_t = m(x_t) + u_t")

    fit = nw_fit(values, y, kernel, h, grid)
    kernel = get_kernel(kernel)
    u_sums = _weighted_sums(values, u, kernel, h, fit.points)
    m_sums = _weighted_sums(values, m_x, kernel, h, fit.points)

    theta1 = np.full(len(fit), np.nan)
    theta2 = np.full(len(fit), np.nan)
    d = fit.defined
    theta1[d] = u_sums[d] / fit.denominators[d]
    theta2[d] = m_sums[d] / fit.denominators[d] - truth(fit.points[d])
    total = fit.estimates - truth(fit.points)
    return Decomposition(theta1, theta2, total, d, fit.points)


# C (radius h)^alpha g(y_j), the bound on |theta2| for compact kernels.
def bias_bound(truth, kernel, h, points):
    kernel = get_kernel(kernel)
    kernel.require_compact("the bias bound")
    reach = kernel.support_radius * h
    if reach > HOLDER_EPS:
        raise InvalidArgumentError("Bias bound needs radius * h <= {}".format(HOLDER_EPS))
    return truth.holder_const * reach**truth.holder_exponent * truth.envelope(points)


# (n h^2)^(-1/4) log^(1/2) n + h^alpha delta_n, the random-walk uniform rate.
def total_rate(n, h, alpha, delta_n):
    return (n * h * h) ** -0.25 * math.sqrt(math.log(n)) + h**alpha * delta_n
