# SPDX-License-Identifier: MIT

import collections
import functools
import math
from enum import Enum

import numpy as np
import scipy.signal
import scipy.special
import scipy.stats

from kerncoint.exceptions import InternalError, InvalidArgumentError

DEFAULT_BURN_IN = 1000
DEFAULT_TAIL_TOL = 1e-8
CONTRACTION_DRAWS = 10**6

# Volatility maps whose sampled values exceed this bound are treated as unbounded.
VOLATILITY_BOUND = 1e6


# Innovation laws, all standardized to mean 0 and variance 1.
#
# Each has an absolutely integrable characteristic function.
class InnovationDist(Enum):
    GAUSSIAN = "gaussian"
    LAPLACE = "laplace"
    LOGISTIC = "logistic"

    def sample(self, rng, size):
        if self is InnovationDist.GAUSSIAN:
            return rng.standard_normal(size)
        if self is InnovationDist.LAPLACE:
            return rng.laplace(0.0, 1.0 / math.sqrt(2.0), size)
        return rng.logistic(0.0, math.sqrt(3.0) / math.pi, size)

    def characteristic_function(self, t):
        t = np.asarray(t, dtype=float)
        if self is InnovationDist.GAUSSIAN:
            return np.exp(-0.5 * t * t)
        if self is InnovationDist.LAPLACE:
            b = 1.0 / math.sqrt(2.0)
            return 1.0 / (1.0 + b * b * t * t)
        # Scale s = sqrt(3)/pi, so pi s t = sqrt(3) t.
        u = math.sqrt(3.0) * t
        with np.errstate(over="ignore", invalid="ignore"):
            return np.where(u == 0.0, 1.0, u / np.sinh(u))


def get_dist(name):
    if isinstance(name, InnovationDist):
        return name
    try:
        return InnovationDist(name)
    except ValueError:
        raise InvalidArgumentError(
            "Unknown innovation distribution {}; choose one of {}".format(
                name, ", ".join(d.value for d in InnovationDist)
            )
        ) from None


class ProcessKind(Enum):
    RANDOM_WALK = "random-walk"
    LINEAR = "linear"
    TAR = "tar"
    ARCH = "arch"
    MIXING_AR = "mixing-ar"
    SPLIT_CHAIN = "split-chain"
    EXTERNAL = "external"


# A simulated trajectory x_1..x_n together with its provenance.
class Path:
    __slots__ = ["values", "kind", "params", "seed"]

    def __init__(self, values, kind, params, seed):
        values = np.array(values, dtype=float)
        values.flags.writeable = False
        self.values = values
        self.kind = kind
        self.params = dict(params)
        self.seed = seed

    def __len__(self):
        return len(self.values)

    def __repr__(self):
        return "Path({}, n={}, seed={})".format(self.kind.value, len(self), self.seed)


def path_values(path):
    if isinstance(path, Path):
        return path.values
    return np.asarray(path, dtype=float)


def _check_count(n):
    if int(n) != n or n < 1:
        raise InvalidArgumentError("Path length must be a positive integer, got {}".format(n))
    return int(n)


# x_t = eps_1 + ... + eps_t with i.i.d. standardized innovations.
#
# innovations replaces the random draws (used to construct degenerate walks).
def gen_random_walk(n, dist, seed, *, innovations=None):
    n = _check_count(n)
    dist = get_dist(dist)
    if innovations is None:
        eps = dist.sample(np.random.default_rng(seed), n)
    else:
        eps = np.asarray(innovations, dtype=float)
        if len(eps) != n:
            raise InvalidArgumentError("Expected {} innovations, got {}".format(n, len(eps)))
    return Path(np.cumsum(eps), ProcessKind.RANDOM_WALK, {"dist": dist.value}, seed)


# Returns phi_0..phi_K where K is the smallest index with discarded tail mass < tail_tol.
#
# A scalar phi denotes the geometric family phi_k = phi^k; a sequence is an
# explicit finite list.
def truncate_coefficients(phi, tail_tol=DEFAULT_TAIL_TOL):
    if tail_tol <= 0:
        raise InvalidArgumentError("tail_tol must be positive")
    if np.ndim(phi) == 0:
        rho = float(phi)
        if not abs(rho) < 1.0:
            raise InvalidArgumentError(
                "Geometric coefficients phi_k = {}^k are not absolutely summable".format(rho)
            )
        if rho == 0.0:
            return np.array([1.0])
        k = 0
        # Tail beyond K is |rho|^(K+1) / (1 - |rho|).
        while abs(rho) ** (k + 1) / (1.0 - abs(rho)) >= tail_tol:
            k += 1
        coeffs = rho ** np.arange(k + 1)
    else:
        coeffs = np.asarray(phi, dtype=float)
        if coeffs.ndim != 1 or not len(coeffs):
            raise InvalidArgumentError("Explicit coefficient list must be a nonempty sequence")
        if not np.all(np.isfinite(coeffs)):
            raise InvalidArgumentError("Coefficient list is not absolutely summable")
        tails = np.concatenate([np.cumsum(np.abs(coeffs)[::-1])[::-1][1:], [0.0]])
        k = int(np.argmax(tails < tail_tol))
        coeffs = coeffs[: k + 1]
    if coeffs.sum() == 0.0:
        raise InvalidArgumentError("Coefficients violate phi = sum(phi_k) != 0")
    return coeffs


def gen_linear_process(n, phi, dist, seed, *, tail_tol=DEFAULT_TAIL_TOL):
    n = _check_count(n)
    dist = get_dist(dist)
    coeffs = truncate_coefficients(phi, tail_tol)
    k = len(coeffs) - 1
    # The first K draws are the burn-in pre-samples eps_{1-K}..eps_0.
    eps = dist.sample(np.random.default_rng(seed), n + k)
    values = np.convolve(eps, coeffs, mode="valid")
    params = {
        "phi": phi if np.ndim(phi) == 0 else list(phi),
        "truncation": k,
        "tail_tol": tail_tol,
        "dist": dist.value,
    }
    return Path(values, ProcessKind.LINEAR, params, seed)


ContractionReport = collections.namedtuple(
    "ContractionReport", ["e_log_l", "e_l_squared", "passed", "failed_condition"]
)


# Evaluates E log L_eps < 0 and E L_eps^2 < 1 for the iterated maps.
#
# L_eps is the Lipschitz constant of x -> R(x, eps): max(|a1|, |a2|) for the
# TAR map with threshold 0, |a2 eps| for the ARCH map.
@functools.lru_cache(maxsize=64)
def contraction_diagnostics(kind, a1, a2, dist, draws=CONTRACTION_DRAWS):
    kind = ProcessKind(kind)
    dist = get_dist(dist)
    if kind is ProcessKind.TAR:
        lip = np.full(draws, max(abs(a1), abs(a2)))
    elif kind is ProcessKind.ARCH:
        lip = abs(a2) * np.abs(dist.sample(np.random.default_rng(0), draws))
    else:
        raise InvalidArgumentError("No contraction diagnostics for {}".format(kind.value))
    with np.errstate(divide="ignore"):
        e_log_l = float(np.mean(np.log(lip)))
    e_l_squared = float(np.mean(lip * lip))
    failed = None
    if not e_log_l < 0.0:
        failed = "E log L < 0 (got {:.6g})".format(e_log_l)
    elif not e_l_squared < 1.0:
        failed = "E L^2 < 1 (got {:.6g})".format(e_l_squared)
    return ContractionReport(e_log_l, e_l_squared, failed is None, failed)


# Threshold autoregression with threshold 0, started at x_0 = 0.
def gen_tar(n, a1, a2, dist, seed, *, burn_in=DEFAULT_BURN_IN):
    n = _check_count(n)
    dist = get_dist(dist)
    if not max(abs(a1), abs(a2)) < 1.0:
        raise InvalidArgumentError(
            "TAR contraction violated: max(|a1|, |a2|) = {} must be < 1".format(
                max(abs(a1), abs(a2))
            )
        )
    report = contraction_diagnostics(ProcessKind.TAR.value, float(a1), float(a2), dist.value)
    if not report.passed:
        raise InvalidArgumentError("TAR contraction violated: {}".format(report.failed_condition))

    eps = dist.sample(np.random.default_rng(seed), burn_in + n).tolist()
    out = [0.0] * len(eps)
    x = 0.0
    for k, e in enumerate(eps):
        x = (a1 if x < 0.0 else a2) * x + e
        out[k] = x
    params = {"a1": a1, "a2": a2, "burn_in": burn_in, "dist": dist.value}
    return Path(out[burn_in:], ProcessKind.TAR, params, seed)


# ARCH(1) recursion x_k = eps_k sqrt(a1^2 + a2^2 x_{k-1}^2), started at x_0 = 0.
def gen_arch(n, a1, a2, dist, seed, *, burn_in=DEFAULT_BURN_IN):
    n = _check_count(n)
    dist = get_dist(dist)
    if not a1 > 0.0:
        raise InvalidArgumentError("ARCH requires a1 > 0, got {}".format(a1))
    if not a2 * a2 < 1.0:
        raise InvalidArgumentError(
            "ARCH variance condition violated: a2^2 E eps^2 = {} must be < 1".format(a2 * a2)
        )
    report = contraction_diagnostics(ProcessKind.ARCH.value, float(a1), float(a2), dist.value)
    if not report.passed:
        raise InvalidArgumentError("ARCH contraction violated: {}".format(report.failed_condition))

    eps = dist.sample(np.random.default_rng(seed), burn_in + n).tolist()
    out = [0.0] * len(eps)
    x = 0.0
    s1 = a1 * a1
    s2 = a2 * a2
    for k, e in enumerate(eps):
        x = e * math.sqrt(s1 + s2 * x * x)
        out[k] = x
    params = {"a1": a1, "a2": a2, "burn_in": burn_in, "dist": dist.value}
    return Path(out[burn_in:], ProcessKind.ARCH, params, seed)


# Stationary AR(1) x_t = rho x_{t-1} + eps_t.
#
# Gaussian paths start from the stationary law; other laws use a burn-in.
def gen_mixing_ar(n, rho, dist, seed, *, burn_in=DEFAULT_BURN_IN):
    n = _check_count(n)
    dist = get_dist(dist)
    if not abs(rho) < 1.0:
        raise InvalidArgumentError("Mixing AR(1) requires |rho| < 1, got {}".format(rho))
    rng = np.random.default_rng(seed)
    params = {"rho": rho, "dist": dist.value}
    if dist is InnovationDist.GAUSSIAN:
        eps = dist.sample(rng, n)
        x0 = rng.standard_normal() / math.sqrt(1.0 - rho * rho)
        values, _ = scipy.signal.lfilter([1.0], [1.0, -rho], eps, zi=[rho * x0])
    else:
        eps = dist.sample(rng, burn_in + n)
        values = scipy.signal.lfilter([1.0], [1.0, -rho], eps)[burn_in:]
        params["burn_in"] = burn_in
    return Path(values, ProcessKind.MIXING_AR, params, seed)


# Regeneration structure of a split chain.
#
# indicators[t - 1] holds Y_t; rho holds the 1-based regeneration times
# rho_1 < rho_2 < ...; n_of_n is N(n) = #{k: rho_k <= n}.
class RegenRecord:
    __slots__ = ["indicators", "rho", "n_of_n"]

    def __init__(self, indicators, rho=None):
        indicators = np.asarray(indicators, dtype=np.int8)
        if rho is None:
            rho = np.flatnonzero(indicators) + 1
        rho = np.asarray(rho, dtype=np.int64)
        if len(rho) and (np.any(np.diff(rho) <= 0) or rho[0] < 1):
            raise InvalidArgumentError("Regeneration times must be strictly increasing and >= 1")
        if len(rho) and rho[-1] > len(indicators):
            raise InvalidArgumentError("Regeneration time beyond the indicator sequence")
        if len(rho) and not np.all(indicators[rho - 1] == 1):
            raise InvalidArgumentError("Indicator sequence is zero at a regeneration time")
        self.indicators = indicators
        self.rho = rho
        self.n_of_n = len(rho)

    @classmethod
    def from_times(cls, rho, n):
        indicators = np.zeros(n, dtype=np.int8)
        rho = np.asarray(rho, dtype=np.int64)
        indicators[rho - 1] = 1
        return cls(indicators, rho)

    def __len__(self):
        return len(self.indicators)

    def count_until(self, n):
        return np.searchsorted(self.rho, n, side="right")


# A Markov chain with a minorization P(x, .) >= b 1_C(x) nu(.).
#
# Subclasses provide samplers for the transition kernel, for nu and for the
# residual kernel (P(x, .) - b 1_C(x) nu(.)) / (1 - h(x)).
class MinorizedChain:
    name = None
    small_set = (-math.inf, math.inf)
    b = 1.0

    def h(self, x):
        lo, hi = self.small_set
        return self.b if lo <= x <= hi else 0.0

    def sample_transition(self, x, rng):
        raise NotImplementedError()

    def sample_nu(self, rng):
        raise NotImplementedError()

    def sample_residual(self, x, rng):
        raise NotImplementedError()

    def params(self):
        return {"chain": self.name, "b": self.b, "small_set": list(self.small_set)}


# The kernel equals nu identically; every step regenerates.
class IIDChain(MinorizedChain):
    name = "iid"

    def __init__(self, dist=InnovationDist.GAUSSIAN):
        self.dist = get_dist(dist)

    def sample_transition(self, x, rng):
        return float(self.dist.sample(rng, None))

    def sample_nu(self, rng):
        return float(self.dist.sample(rng, None))

    def sample_residual(self, x, rng):
        raise InternalError("Residual kernel of a fully regenerating chain is never sampled")


# Gaussian AR(1) x' = rho x + N(0, 1) with small set C = [-c, c].
#
# For x in C the transition density phi(y - rho x) is bounded below by
# phi(|y| + |rho| c), whose mass is b = 2 Phi(-|rho| c); nu is that minorant
# normalized.
class GaussianARChain(MinorizedChain):
    name = "gaussian-ar"
    max_rejections = 10**4

    def __init__(self, rho=0.5, c=1.0):
        if not abs(rho) < 1.0:
            raise InvalidArgumentError("Gaussian AR chain requires |rho| < 1, got {}".format(rho))
        if not c > 0.0:
            raise InvalidArgumentError("Small set half-width must be positive")
        self.rho = rho
        self.small_set = (-c, c)
        self._shift = abs(rho) * c
        self.b = 2.0 * scipy.stats.norm.cdf(-self._shift)
        self._tail = scipy.stats.norm.sf(self._shift)

    def params(self):
        params = super().params()
        params["rho"] = self.rho
        return params

    def sample_transition(self, x, rng):
        return self.rho * x + rng.standard_normal()

    def sample_nu(self, rng):
        # |y| + shift is a standard normal truncated to [shift, inf).
        z = -scipy.special.ndtri((1.0 - rng.random()) * self._tail)
        sign = 1.0 if rng.random() < 0.5 else -1.0
        return sign * (z - self._shift)

    def sample_residual(self, x, rng):
        if self.h(x) == 0.0:
            return self.sample_transition(x, rng)
        mean = self.rho * x
        for _ in range(self.max_rejections):
            y = mean + rng.standard_normal()
            # phi(|y| + shift) / phi(y - mean)
            ratio = math.exp(0.5 * ((y - mean) ** 2 - (abs(y) + self._shift) ** 2))
            if rng.random() >= ratio:
                return y
        raise InternalError("Residual kernel rejection sampler did not terminate")


# Simulates the split chain and returns (Path, RegenRecord).
#
# The first state is drawn from nu. Given x_t, Y_t ~ Bernoulli(h(x_t)); the next
# state is drawn from nu if Y_t = 1 and from the residual kernel otherwise, so
# the x-marginal keeps the transition law P(x, .).
def gen_split_chain(n, chain, seed):
    n = _check_count(n)
    if not 0.0 < chain.b <= 1.0:
        raise InvalidArgumentError(
            "Minorization constant b must lie in (0, 1], got {}".format(chain.b)
        )
    rng = np.random.default_rng(seed)
    values = np.empty(n)
    indicators = np.zeros(n, dtype=np.int8)
    x = chain.sample_nu(rng)
    for t in range(n):
        values[t] = x
        hx = chain.h(x)
        if hx > 0.0 and rng.random() < hx:
            indicators[t] = 1
            x = chain.sample_nu(rng)
        else:
            x = chain.sample_residual(x, rng)
        if not math.isfinite(x):
            raise InternalError("Split chain produced a value outside the state space")
    path = Path(values, ProcessKind.SPLIT_CHAIN, chain.params(), seed)
    return path, RegenRecord(indicators)


# Martingale-difference errors u_t = sigma(x_t) eta_t with eta_t i.i.d.
class ErrorSpec:
    __slots__ = ["moment_order", "dist", "volatility"]

    def __init__(self, moment_order=2, dist=InnovationDist.GAUSSIAN, volatility=None):
        if int(moment_order) != moment_order or moment_order < 1:
            raise InvalidArgumentError("Moment order p must be an integer >= 1")
        self.moment_order = int(moment_order)
        self.dist = get_dist(dist)
        self.volatility = volatility


def sine_volatility(x):
    return 1.0 + 0.5 * np.sin(x)


VOLATILITY_MAPS = {
    "none": None,
    "sine": sine_volatility,
}


def get_volatility(name):
    try:
        return VOLATILITY_MAPS[name]
    except KeyError:
        raise InvalidArgumentError(
            "Unknown volatility map {}; choose one of {}".format(name, ", ".join(VOLATILITY_MAPS))
        ) from None


def _checked_volatility(volatility, values):
    far = np.geomspace(1.0, 1e8, 33)
    sample = np.concatenate([values, far, -far])
    sigma = np.asarray(volatility(sample), dtype=float)
    if not np.all(np.isfinite(sigma)) or np.any(sigma <= 0.0):
        raise InvalidArgumentError("Volatility map must be finite and strictly positive")
    if sigma.max() > VOLATILITY_BOUND or sigma.min() < 1.0 / VOLATILITY_BOUND:
        raise InvalidArgumentError("Volatility map is not bounded by positive constants")
    return sigma[: len(values)]


def gen_errors(path, spec, seed):
    values = path_values(path)
    eta = spec.dist.sample(np.random.default_rng(seed), len(values))
    if spec.volatility is None:
        return eta
    return _checked_volatility(spec.volatility, values) * eta


# Smallest admissible moment order p >= 1 + 1/eps0.
def moment_order_for(eps0):
    if not eps0 > 0.0:
        raise InvalidArgumentError("eps0 must be positive")
    return int(math.ceil(1.0 + 1.0 / eps0))


# Dispatches to the generator for kind; split chains also yield a RegenRecord.
def generate(kind, n, seed, *, dist=InnovationDist.GAUSSIAN, **params):
    kind = ProcessKind(kind)
    burn_in = params.get("burn_in", DEFAULT_BURN_IN)
    if kind is ProcessKind.RANDOM_WALK:
        return gen_random_walk(n, dist, seed)
    if kind is ProcessKind.LINEAR:
        phi = params.get("phi")
        if phi is None:
            phi = params.get("rho", 0.5)
        return gen_linear_process(
            n, phi, dist, seed, tail_tol=params.get("tail_tol", DEFAULT_TAIL_TOL)
        )
    if kind is ProcessKind.TAR:
        a1, a2 = params.get("a1", 0.3), params.get("a2", -0.6)
        return gen_tar(n, a1, a2, dist, seed, burn_in=burn_in)
    if kind is ProcessKind.ARCH:
        a1, a2 = params.get("a1", 1.0), params.get("a2", 0.5)
        return gen_arch(n, a1, a2, dist, seed, burn_in=burn_in)
    if kind is ProcessKind.MIXING_AR:
        return gen_mixing_ar(n, params.get("rho", 0.5), dist, seed, burn_in=burn_in)
    if kind is ProcessKind.SPLIT_CHAIN:
        path, _ = gen_split_chain(n, GaussianARChain(params.get("rho", 0.5)), seed)
        return path
    raise InvalidArgumentError("Cannot generate paths of kind {}".format(kind.value))
