import numpy as np
import pytest
from scipy.special import logsumexp

from sdedit import GmmSpec, VeSchedule, VpSchedule


@pytest.fixture
def ve_toy():
    return VeSchedule(0.01, 25.0)


@pytest.fixture
def ve_church():
    return VeSchedule(0.01, 380.0)


@pytest.fixture
def vp_default():
    return VpSchedule(0.1, 20.0)


@pytest.fixture
def gmm3_2d():
    return GmmSpec(
        weights=[0.5, 0.3, 0.2],
        means=[[0.0, 2.0], [-2.0, -1.0], [2.0, -1.0]],
        stds=[0.30, 0.25, 0.35],
    )


def perturbed_logpdf(weights, means, stds, schedule, x, t):
    """Independent oracle: log density of the mixture after the time-t kernel.

    Built directly from the closed-form perturbed parameters; shares no code
    with the score path under test.
    """
    weights = np.asarray(weights, dtype=float)
    means = np.atleast_2d(np.asarray(means, dtype=float))
    stds = np.asarray(stds, dtype=float)
    a = float(schedule.alpha(t))
    var = a * a * stds**2 + float(schedule.sigma2(t))
    d = means.shape[1]
    sq = ((np.asarray(x, dtype=float) - a * means) ** 2).sum(axis=1)
    logs = np.log(weights) - 0.5 * d * np.log(2 * np.pi * var) - sq / (2 * var)
    return logsumexp(logs)


def fd_gradient(f, x, h=1e-5):
    """Central finite differences of a scalar function of a vector."""
    x = np.asarray(x, dtype=float)
    g = np.zeros_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (f(x + e) - f(x - e)) / (2 * h)
    return g
