# SPDX-License-Identifier: MIT

import collections
import math
from enum import Enum

import numpy as np

from kerncoint.exceptions import InvalidArgumentError
from kerncoint.kernels import get_kernel
from kerncoint.processes import path_values

# Upper bound on the number of elements of one padded (grid point x window) block.
BLOCK_ELEMENTS = 1 << 22

# Non-compact kernels are evaluated on every grid point; refuse absurdly large grids.
MAX_DENSE_POINTS = 10**7

# Truncation radius (in bandwidths) used to size path-range grids for non-compact kernels.
NONCOMPACT_REACH = 8.0


# h(n) = c n^(-gamma) (log n)^log_exponent.
class BandwidthRule:
    __slots__ = ["c", "gamma", "log_exponent"]

    def __init__(self, c=1.0, gamma=0.2, log_exponent=0.0):
        if not c > 0.0:
            raise InvalidArgumentError("Bandwidth constant c must be positive")
        if not 0.0 < gamma < 1.0:
            raise InvalidArgumentError("Bandwidth exponent gamma must lie in (0, 1)")
        self.c = float(c)
        self.gamma = float(gamma)
        self.log_exponent = float(log_exponent)

    def __call__(self, n):
        return self.c * n ** (-self.gamma) * math.log(n) ** self.log_exponent

    def __repr__(self):
        return "BandwidthRule(c={}, gamma={}, log_exponent={})".format(
            self.c, self.gamma, self.log_exponent
        )

    # h -> 0 and n h -> infinity, checked as strict monotonicity over the grid.
    def check(self, n_grid):
        h = np.array([self(n) for n in n_grid])
        nh = np.asarray(n_grid, dtype=float) * h
        return bool(np.all(np.diff(h) < 0.0)), bool(np.all(np.diff(nh) > 0.0))


class ProfileKind(Enum):
    STATIONARY = "stationary"
    RANDOM_WALK = "random-walk"
    REGULAR = "regular"


# Normalization c_n = a(n) h with a(n) = n^beta (slowly varying factor fixed to 1).
class NormalizationProfile:
    __slots__ = ["kind", "beta"]

    def __init__(self, kind=ProfileKind.STATIONARY, beta=None):
        kind = ProfileKind(kind)
        if kind is ProfileKind.STATIONARY:
            beta = 1.0
        elif kind is ProfileKind.RANDOM_WALK:
            beta = 0.5
        elif beta is None or not 0.0 < beta <= 1.0:
            raise InvalidArgumentError(
                "Regular profile requires beta in (0, 1], got {}".format(beta)
            )
        self.kind = kind
        self.beta = float(beta)

    def __repr__(self):
        return "NormalizationProfile({}, beta={})".format(self.kind.value, self.beta)

    def a(self, n):
        if self.kind is ProfileKind.RANDOM_WALK:
            return math.sqrt(n)
        return float(n) ** self.beta

    def c_n(self, n, h):
        return self.a(n) * h

    def diverges(self, n_grid, rule):
        c = np.array([self.c_n(n, rule(n)) for n in n_grid])
        return bool(np.all(np.diff(c) > 0.0))


class RangeRule(Enum):
    FIXED = "fixed"
    SQRT = "sqrt"
    POWER = "power"
    PATH_RANGE = "path-range"


class SpacingRule(Enum):
    RATE = "rate"
    EXPLICIT = "explicit"
    BANDWIDTH = "bandwidth"


# An arithmetic grid y_j = start + j step, j = 0..count-1, covering [-b, b].
class Grid:
    __slots__ = ["start", "step", "count"]

    def __init__(self, start, step, count):
        if count < 1:
            raise InvalidArgumentError("Grid must be nonempty")
        self.start = float(start)
        self.step = float(step)
        self.count = int(count)

    @classmethod
    def covering(cls, b, spacing):
        if not spacing > 0.0:
            raise InvalidArgumentError("Grid spacing must be positive")
        if b <= 0.0:
            return cls(0.0, spacing, 1)
        m = int(math.ceil(2.0 * b / spacing))
        return cls(-b, 2.0 * b / m, m + 1)

    # Only increasing arithmetic sequences are grids; use shifted_kernel_sums for others.
    @classmethod
    def from_points(cls, points):
        points = np.asarray(points, dtype=float)
        if points.ndim != 1 or not len(points) or not np.all(np.isfinite(points)):
            raise InvalidArgumentError("Grid points must be a nonempty finite sequence")
        if len(points) == 1:
            return cls(points[0], 1.0, 1)
        grid = cls(points[0], (points[-1] - points[0]) / (len(points) - 1), len(points))
        tol = 1e-9 * abs(grid.step) + 1e-12 * float(np.max(np.abs(points)))
        if not grid.step > 0.0 or np.max(np.abs(grid.points() - points)) > tol:
            raise InvalidArgumentError(
                "Grid points must be increasing and equally spaced; "
                "evaluate irregular points with shifted_kernel_sums"
            )
        return grid

    def __len__(self):
        return self.count

    def __repr__(self):
        return "Grid(start={}, step={}, count={})".format(self.start, self.step, self.count)

    @property
    def stop(self):
        return self.start + (self.count - 1) * self.step

    def point(self, j):
        return self.start + j * self.step

    def points(self, lo=0, hi=None):
        if hi is None:
            hi = self.count
        return self.start + np.arange(lo, hi) * self.step

    def refine(self, factor=2):
        return Grid(self.start, self.step / factor, (self.count - 1) * factor + 1)

    # Index range [lo, hi) of grid points y with a window [-y - reach, -y + reach]
    # that may meet [xmin, xmax]; every other grid point has an empty window.
    def active_range(self, xmin, xmax, reach):
        if not math.isfinite(reach):
            return 0, self.count
        if self.count == 1:
            hit = -xmax - reach <= self.start <= -xmin + reach
            return (0, 1) if hit else (0, 0)
        lo = math.floor((-xmax - reach - self.start) / self.step)
        hi = math.ceil((-xmin + reach - self.start) / self.step) + 1
        lo = min(max(lo, 0), self.count)
        hi = min(max(hi, lo), self.count)
        return lo, hi


# Recipe for a covering grid of [-b_n, b_n].
#
# Range rules: fixed (b_n = b), sqrt (b_n = tau sqrt(n) n^-kappa), power
# (b_n = n^m) and path-range (every x at which the kernel window meets the
# path). Spacing rules: rate (h sqrt(c_n log n) / n capped at h/10),
# explicit (delta) and bandwidth (delta h).
class GridSpec:
    __slots__ = ["range_rule", "b", "tau", "kappa", "m", "spacing", "delta"]

    def __init__(
        self,
        range_rule=RangeRule.FIXED,
        *,
        b=1.0,
        tau=0.1,
        kappa=0.0,
        m=1.0,
        spacing=SpacingRule.RATE,
        delta=0.1,
    ):
        self.range_rule = RangeRule(range_rule)
        self.spacing = SpacingRule(spacing)
        if self.spacing is not SpacingRule.RATE and not delta > 0.0:
            raise InvalidArgumentError("Grid delta must be positive")
        self.b = float(b)
        self.tau = float(tau)
        self.kappa = float(kappa)
        self.m = float(m)
        self.delta = float(delta)

    def b_n(self, n, *, path=None, kernel=None, h=None):
        if self.range_rule is RangeRule.FIXED:
            return self.b
        if self.range_rule is RangeRule.SQRT:
            return self.tau * math.sqrt(n) * n ** (-self.kappa)
        if self.range_rule is RangeRule.POWER:
            return float(n) ** self.m
        if path is None or kernel is None or h is None:
            raise InvalidArgumentError("A path-range grid needs the path, kernel and bandwidth")
        radius = kernel.support_radius if kernel.is_compact else NONCOMPACT_REACH
        return float(np.max(np.abs(path_values(path)))) + radius * h

    def spacing_for(self, n, h, c_n=None):
        if self.spacing is SpacingRule.EXPLICIT:
            return self.delta
        if self.spacing is SpacingRule.BANDWIDTH:
            return self.delta * h
        if c_n is None:
            raise InvalidArgumentError("Rate-matched spacing needs c_n")
        return min(h * math.sqrt(c_n * math.log(n)) / n, h / 10.0)

    def build(self, n, h, c_n=None, *, path=None, kernel=None):
        if kernel is not None:
            kernel = get_kernel(kernel)
        b = self.b_n(n, path=path, kernel=kernel, h=h)
        return Grid.covering(b, self.spacing_for(n, h, c_n))


# Values on a grid; entries outside [lo, lo + len(values)) are exactly zero.
class GridValues:
    __slots__ = ["grid", "lo", "values"]

    def __init__(self, grid, lo, values):
        self.grid = grid
        self.lo = int(lo)
        self.values = np.asarray(values, dtype=float)

    @property
    def hi(self):
        return self.lo + len(self.values)

    def __len__(self):
        return self.grid.count

    def to_array(self):
        if self.grid.count > MAX_DENSE_POINTS:
            raise InvalidArgumentError(
                "Grid too large to materialize ({} points)".format(len(self))
            )
        out = np.zeros(self.grid.count)
        out[self.lo : self.hi] = self.values
        return out

    def __mul__(self, scale):
        return GridValues(self.grid, self.lo, self.values * scale)


def _compensated_row_sums(terms):
    # Neumaier summation across columns, i.e. in ascending column order per row.
    total = np.zeros(terms.shape[0])
    comp = np.zeros(terms.shape[0])
    for col in np.asfortranarray(terms).T:
        t = total + col
        comp += np.where(np.abs(total) >= np.abs(col), (total - t) + col, (col - t) + total)
        total = t
    return total + comp


# sum_t weights[t] fn((x[t] + shift) / h) for every shift.
#
# Only observations with |x_t + shift| <= reach can contribute; they are located
# by range queries on the sorted path. Each sum is accumulated in ascending t
# with compensated summation, so results do not depend on chunking.
def _kernel_sums(x, weights, fn, reach, h, shifts):
    n = len(x)
    shifts = np.asarray(shifts, dtype=float)
    out = np.zeros(len(shifts))
    if n == 0 or not len(shifts):
        return out
    if weights is None:
        weights = np.ones(n)
    x_ext = np.append(x, 0.0)
    w_ext = np.append(weights, 0.0)

    if math.isfinite(reach):
        order = np.argsort(x, kind="stable")
        xs = x[order]
        lo = np.searchsorted(xs, -shifts - reach, side="left")
        hi = np.searchsorted(xs, -shifts + reach, side="right")
    else:
        order = np.arange(n)
        lo = np.zeros(len(shifts), dtype=np.int64)
        hi = np.full(len(shifts), n, dtype=np.int64)
    width = hi - lo
    widest = int(width.max())
    if widest == 0:
        return out

    rows = max(1, BLOCK_ELEMENTS // widest)
    cols = np.arange(widest)
    for j0 in range(0, len(shifts), rows):
        sl = slice(j0, j0 + rows)
        w_max = int(width[sl].max())
        if w_max == 0:
            continue
        pos = lo[sl, None] + cols[:w_max]
        idx = np.where(cols[:w_max] < width[sl, None], order[np.minimum(pos, n - 1)], n)
        if w_max > idx.shape[0]:
            # Wide windows: exactly rounded sums are order independent.
            terms = w_ext[idx] * fn((x_ext[idx] + shifts[sl, None]) / h)
            out[sl] = [math.fsum(row) for row in terms]
        else:
            idx.sort(axis=1)
            terms = w_ext[idx] * fn((x_ext[idx] + shifts[sl, None]) / h)
            out[sl] = _compensated_row_sums(terms)
    return out


def _reach(kernel, h):
    return kernel.support_radius * h if kernel.is_compact else math.inf


def _grid_sums(values, weights, fn, kernel, h, grid):
    if not h > 0.0:
        raise InvalidArgumentError("Bandwidth h must be positive")
    if not isinstance(grid, Grid):
        grid = Grid.from_points(grid)
    reach = _reach(kernel, h)
    lo, hi = grid.active_range(float(values.min()), float(values.max()), reach)
    if hi - lo > MAX_DENSE_POINTS:
        raise InvalidArgumentError(
            "Grid has {} points to evaluate; narrow b_n or use a compact kernel".format(hi - lo)
        )
    return GridValues(grid, lo, _kernel_sums(values, weights, fn, reach, h, grid.points(lo, hi)))


# sum_t w_t g[(x_t + y_j)/h] over the grid, with g = f or f^2.
def kernel_sum(path, kernel, h, grid, *, weights=None, squared=False):
    kernel = get_kernel(kernel)
    values = path_values(path)
    if weights is not None:
        weights = np.asarray(weights, dtype=float)
        if len(weights) != len(values):
            raise InvalidArgumentError(
                "Length mismatch: {} weights for a path of length {}".format(
                    len(weights), len(values)
                )
            )
    fn = kernel.squared if squared else kernel
    return _grid_sums(values, weights, fn, kernel, h, grid)


# sum_t w_t f[(x_t + s)/h] for arbitrary, not necessarily arithmetic, shifts s.
def shifted_kernel_sums(path, kernel, h, shifts, *, weights=None):
    kernel = get_kernel(kernel)
    if not h > 0.0:
        raise InvalidArgumentError("Bandwidth h must be positive")
    values = path_values(path)
    if weights is not None:
        weights = np.asarray(weights, dtype=float)
    return _kernel_sums(values, weights, kernel, _reach(kernel, h), h, shifts)


# V(y_j) = sum_t f^2[(x_t + y_j)/h].
def variance_sum(path, kernel, h, grid):
    return kernel_sum(path, kernel, h, grid, squared=True)


# S(y_j) = sum_t u_t f[(x_t + y_j)/h].
def martingale_sum(path, u, kernel, h, grid):
    if u is None:
        raise InvalidArgumentError("Martingale sum requires an error sequence")
    return kernel_sum(path, kernel, h, grid, weights=u)


# Per-observation terms f[(x_t + y)/h] (or f^2) at a single point y.
def kernel_terms(path, kernel, h, y, *, squared=False):
    kernel = get_kernel(kernel)
    v = kernel((path_values(path) + y) / h)
    return v * v if squared else v


Extremum = collections.namedtuple("Extremum", ["value", "index", "point"])


def _as_grid_values(values):
    if isinstance(values, GridValues):
        return values
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 1 or not len(arr):
        raise InvalidArgumentError("Statistic requires a nonempty sequence")
    return None


# max_j |values_j| with ties broken by the smallest grid index.
def sup_stat(values):
    gv = _as_grid_values(values)
    if gv is None:
        arr = np.abs(np.asarray(values, dtype=float))
        j = int(np.argmax(arr))
        return Extremum(float(arr[j]), j, None)
    if not len(gv.values):
        return Extremum(0.0, 0, gv.grid.point(0))
    arr = np.abs(gv.values)
    j = int(np.argmax(arr))
    if arr[j] == 0.0:
        return Extremum(0.0, 0, gv.grid.point(0))
    return Extremum(float(arr[j]), gv.lo + j, gv.grid.point(gv.lo + j))


# min_j values_j of a variance sum with ties broken by the smallest grid index.
def inf_stat(values):
    gv = _as_grid_values(values)
    if gv is None:
        arr = np.asarray(values, dtype=float)
        if np.any(arr < 0.0):
            raise InvalidArgumentError("inf_stat applies to nonnegative variance sums only")
        j = int(np.argmin(arr))
        return Extremum(float(arr[j]), j, None)
    if np.any(gv.values < 0.0):
        raise InvalidArgumentError("inf_stat applies to nonnegative variance sums only")
    if gv.lo > 0 or not len(gv.values):
        return Extremum(0.0, 0, gv.grid.point(0))
    j = int(np.argmin(gv.values))
    if gv.values[j] > 0.0 and gv.hi < gv.grid.count:
        return Extremum(0.0, gv.hi, gv.grid.point(gv.hi))
    return Extremum(float(gv.values[j]), j, gv.grid.point(j))


NormalizedRatios = collections.namedtuple(
    "NormalizedRatios", ["sup_s_ratio", "sup_v_ratio", "inf_v_reciprocal", "inf_v_degenerate"]
)


# Returns sup_S / sqrt(c_n log n), sup_V / c_n and a(n) h / inf_V.
#
# Any of the three inputs may be None, in which case its ratio is None. A zero
# inf_V yields an infinite reciprocal ratio and sets inf_v_degenerate.
def normalized_ratios(sup_s, sup_v, inf_v, n, h, profile):
    if n < 2:
        raise InvalidArgumentError("Normalized ratios need n >= 2")
    c_n = profile.c_n(n, h)
    sup_s_ratio = None if sup_s is None else sup_s / math.sqrt(c_n * math.log(n))
    sup_v_ratio = None if sup_v is None else sup_v / c_n
    inf_v_reciprocal = None
    degenerate = False
    if inf_v is not None:
        if inf_v == 0.0:
            inf_v_reciprocal = math.inf
            degenerate = True
        else:
            inf_v_reciprocal = profile.a(n) * h / inf_v
    return NormalizedRatios(sup_s_ratio, sup_v_ratio, inf_v_reciprocal, degenerate)


TailReport = collections.namedtuple(
    "TailReport", ["statistic", "ratio", "companion", "companion_ratio"]
)


# Reports b_n^-k0 sum |x_t|^k0 and n sup_{|x| > b_n/2} |f(x/h)| against sqrt(c_n log n).
def tail_condition_check(path, b_n, k0, c_n, n, *, kernel=None, h=None):
    if not k0 > 0.0:
        raise InvalidArgumentError("Tail exponent k0 must be positive")
    values = path_values(path)
    target = math.sqrt(c_n * math.log(n))
    statistic = float(np.sum(np.abs(values) ** k0) / b_n**k0)
    companion = None
    companion_ratio = None
    if kernel is not None and h is not None:
        kernel = get_kernel(kernel)
        # Catalog kernels are non-increasing in |s|, so the sup sits at the boundary.
        edge = b_n / (2.0 * h)
        companion = 0.0 if edge >= kernel.support_radius else n * abs(float(kernel(edge)))
        companion_ratio = companion / target
    return TailReport(statistic, statistic / target, companion, companion_ratio)


MomentBalanceReport = collections.namedtuple(
    "MomentBalanceReport",
    [
        "passed",
        "n_grid",
        "statistics",
        "bandwidth_vanishes",
        "sample_grows",
        "c_n_diverges",
        "reason",
    ],
)


# Checks h -> 0, nh -> infinity and n c_n^-p (log n)^(p-1) = O(1) over n_grid.
#
# The statistic passes if it is non-increasing over the upper half of the grid
# or never exceeds 10 times its value at the smallest n.
def check_moment_balance(rule, profile, p, n_grid):
    if int(p) != p or p < 1:
        raise InvalidArgumentError("Moment order p must be an integer >= 1")
    n_grid = sorted(int(n) for n in n_grid)
    if len(n_grid) < 2 or n_grid[0] < 2:
        raise InvalidArgumentError("Moment balance check needs at least two sample sizes >= 2")
    stats = []
    for n in n_grid:
        c_n = profile.c_n(n, rule(n))
        stats.append(n * c_n ** (-p) * math.log(n) ** (p - 1))
    stats = np.array(stats)
    tail = stats[len(stats) // 2 :]
    non_increasing = bool(np.all(np.diff(tail) <= 0.0))
    bounded = bool(np.all(stats <= 10.0 * stats[0]))
    h_vanishes, nh_grows = rule.check(n_grid)
    diverges = profile.diverges(n_grid, rule)

    reason = None
    if not h_vanishes:
        reason = "h does not decrease to 0 over the n-grid"
    elif not nh_grows:
        reason = "n h does not grow over the n-grid"
    elif not diverges:
        reason = "c_n does not grow over the n-grid"
    elif not (non_increasing or bounded):
        reason = "n c_n^-p log^(p-1) n grows from {:.4g} to {:.4g}; increase p".format(
            stats[0], stats[-1]
        )
    return MomentBalanceReport(
        passed=reason is None,
        n_grid=n_grid,
        statistics=stats.tolist(),
        bandwidth_vanishes=h_vanishes,
        sample_grows=nh_grows,
        c_n_diverges=diverges,
        reason=reason,
    )
