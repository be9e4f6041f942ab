# SPDX-License-Identifier: MIT

import collections
import math
from enum import Enum

import numpy as np
import scipy.integrate

from kerncoint.exceptions import InvalidArgumentError


class KernelId(Enum):
    EPANECHNIKOV = "epanechnikov"
    TRIANGULAR = "triangular"
    QUARTIC = "quartic"
    GAUSSIAN = "gaussian"


def _epanechnikov(s):
    return np.where(np.abs(s) <= 1.0, 0.75 * (1.0 - s * s), 0.0)


def _triangular(s):
    return np.where(np.abs(s) <= 1.0, 1.0 - np.abs(s), 0.0)


def _quartic(s):
    return np.where(np.abs(s) <= 1.0, (15.0 / 16.0) * (1.0 - s * s) ** 2, 0.0)


def _gaussian(s):
    return np.exp(-0.5 * s * s) / math.sqrt(2.0 * math.pi)


class Kernel:
    """A nonnegative, symmetric, bounded and Lipschitz kernel.

    All constants are stored as exact analytic values. ``lipschitz_const`` bounds
    ``|K(x) - K(y)| / |x - y|``; ``support_radius`` is ``inf`` for kernels without
    compact support.
    """

    __slots__ = [
        "id",
        "sup_value",
        "lipschitz_const",
        "support_radius",
        "integral",
        "square_integral",
        "_fn",
    ]

    def __init__(
        self,
        kernel_id,
        fn,
        *,
        sup_value,
        lipschitz_const,
        support_radius,
        integral,
        square_integral,
    ):
        self.id = kernel_id
        self._fn = fn
        self.sup_value = sup_value
        self.lipschitz_const = lipschitz_const
        self.support_radius = support_radius
        self.integral = integral
        self.square_integral = square_integral

    def __repr__(self):
        return "Kernel({})".format(self.id.value)

    def __call__(self, s):
        return self._fn(np.asarray(s, dtype=float))

    def squared(self, s):
        v = self(s)
        return v * v

    @property
    def name(self):
        return self.id.value

    @property
    def is_compact(self):
        return math.isfinite(self.support_radius)

    # Lipschitz constant of K^2; 2 sup|K| Lip(K) bounds it for every catalog kernel.
    @property
    def squared_lipschitz_const(self):
        return 2.0 * self.sup_value * self.lipschitz_const

    def require_compact(self, context):
        if not self.is_compact:
            raise InvalidArgumentError(
                "Kernel {} has no compact support, which {} requires".format(self.name, context)
            )


_catalog = {
    KernelId.EPANECHNIKOV: Kernel(
        KernelId.EPANECHNIKOV,
        _epanechnikov,
        sup_value=0.75,
        lipschitz_const=1.5,
        support_radius=1.0,
        integral=1.0,
        square_integral=0.6,
    ),
    KernelId.TRIANGULAR: Kernel(
        KernelId.TRIANGULAR,
        _triangular,
        sup_value=1.0,
        lipschitz_const=1.0,
        support_radius=1.0,
        integral=1.0,
        square_integral=2.0 / 3.0,
    ),
    KernelId.QUARTIC: Kernel(
        KernelId.QUARTIC,
        _quartic,
        sup_value=15.0 / 16.0,
        # |K'(s)| = (15/4)|s|(1 - s^2), maximal at s = 1/sqrt(3).
        lipschitz_const=5.0 / (2.0 * math.sqrt(3.0)),
        support_radius=1.0,
        integral=1.0,
        square_integral=5.0 / 7.0,
    ),
    KernelId.GAUSSIAN: Kernel(
        KernelId.GAUSSIAN,
        _gaussian,
        sup_value=1.0 / math.sqrt(2.0 * math.pi),
        lipschitz_const=math.exp(-0.5) / math.sqrt(2.0 * math.pi),
        support_radius=math.inf,
        integral=1.0,
        square_integral=1.0 / (2.0 * math.sqrt(math.pi)),
    ),
}


def get_kernel(name):
    if isinstance(name, Kernel):
        return name
    try:
        return _catalog[KernelId(name)]
    except ValueError:
        raise InvalidArgumentError(
            "Unknown kernel {}; choose one of {}".format(
                name, ", ".join(k.value for k in KernelId)
            )
        ) from None


def all_kernels():
    return list(_catalog.values())


# Scalar in, float out.
def eval(kernel, s):
    v = get_kernel(kernel)(s)
    if np.ndim(v) == 0:
        return float(v)
    return v


RegularityReport = collections.namedtuple(
    "RegularityReport",
    [
        "kernel",
        "bounded",
        "lipschitz_verified",
        "integrable",
        "compact_support",
        "worst_lipschitz_ratio",
        "integral_error",
        "square_integral_error",
    ],
)


def _quad(fn, radius):
    if math.isfinite(radius):
        # Split at 0 so that the kink of the triangular kernel is a breakpoint.
        left, _ = scipy.integrate.quad(fn, -radius, 0.0, epsabs=1e-12, epsrel=1e-12)
        right, _ = scipy.integrate.quad(fn, 0.0, radius, epsabs=1e-12, epsrel=1e-12)
        return left + right
    value, _ = scipy.integrate.quad(fn, -np.inf, np.inf, epsabs=1e-12, epsrel=1e-12)
    return value


# Lipschitz ratios are sampled on random pairs; integrals of K and K^2 are compared
# against the stored analytic values by adaptive quadrature.
def check_regularity(kernel, *, pairs=10**5, seed=0):
    kernel = get_kernel(kernel)
    rng = np.random.default_rng(seed)
    reach = kernel.support_radius if kernel.is_compact else 6.0

    x = rng.uniform(-reach - 0.5, reach + 0.5, size=pairs)
    delta = rng.uniform(1e-4, 0.5, size=pairs) * rng.choice([-1.0, 1.0], size=pairs)
    y = x + delta
    kx = kernel(x)
    ratios = np.abs(kx - kernel(y)) / np.abs(delta)
    worst = float(ratios.max())

    bounded = bool(np.all(kx <= kernel.sup_value) and np.all(kx >= 0.0))
    integral = _quad(lambda s: float(kernel(s)), kernel.support_radius)
    square_integral = _quad(lambda s: float(kernel.squared(s)), kernel.support_radius)
    integral_error = abs(integral - kernel.integral)
    square_integral_error = abs(square_integral - kernel.square_integral)

    return RegularityReport(
        kernel=kernel.name,
        bounded=bounded,
        lipschitz_verified=worst <= kernel.lipschitz_const * (1.0 + 1e-9),
        integrable=bool(math.isfinite(integral) and integral_error < 1e-6),
        compact_support=kernel.is_compact,
        worst_lipschitz_ratio=worst,
        integral_error=integral_error,
        square_integral_error=square_integral_error,
    )
