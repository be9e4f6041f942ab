# SPDX-License-Identifier: MIT

import math

import numpy as np
import pytest

from kerncoint.kernels import get_kernel


# O(n |grid|) reference: every term is evaluated and summed exactly rounded.
def _naive_kernel_sums(x, kernel, h, points, weights=None, squared=False):
    kernel = get_kernel(kernel)
    x = np.asarray(x, dtype=float)
    if weights is None:
        weights = np.ones(len(x))
    out = np.empty(len(points))
    for j, y in enumerate(points):
        v = kernel((x + y) / h)
        out[j] = math.fsum(weights * (v * v if squared else v))
    return out


def _naive_nw(x, y, kernel, h, points):
    kernel = get_kernel(kernel)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    out = np.empty(len(points))
    for j, p in enumerate(points):
        k = kernel((x - p) / h) / h
        den = math.fsum(k)
        out[j] = math.fsum(y * k) / den if den > 0.0 else math.nan
    return out


@pytest.fixture
def naive_kernel_sums():
    return _naive_kernel_sums


@pytest.fixture
def naive_nw():
    return _naive_nw


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)
