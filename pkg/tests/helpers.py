import json

import numpy as np

from mbinv.models.matrices import ScalarGeneratorForm


def random_scalar_generator(rng, n, low=-2.0, high=2.0, symmetric=False):
    gamma = rng.uniform(low, high, size=n - 1)
    lam = gamma.copy() if symmetric else rng.uniform(low, high, size=n - 1)
    return ScalarGeneratorForm(diag=rng.uniform(low, high, size=n), gamma=gamma, lam=lam)


def random_grid(rng, n, low=0.1, high=10.0):
    """n sorted points in [low, high], neighbours at least 0.05 apart"""
    while True:
        points = np.sort(rng.uniform(low, high, size=n))
        if n == 1 or np.min(np.diff(points)) >= 0.05:
            return points


def relative_error(actual, expected):
    return float(np.max(np.abs(np.asarray(actual) - np.asarray(expected))) / np.max(np.abs(expected)))


def last_json_line(text):
    for line in reversed(text.strip().splitlines()):
        if line.startswith("{"):
            return json.loads(line)
    raise AssertionError(f"no JSON line in: {text!r}")
