"""Monte Carlo oracle: count events of the SUE process path by path.

Interarrival times are drawn directly, ``X_k ~ Exp(alpha * rate)`` for
``k == gamma_event`` and ``Exp(rate)`` otherwise, and events with
``S_k <= t`` are counted. Nothing here calls the closed-form pmf, so the
histograms are an independent check on it.

Random numbers come from the Philox4x64 counter-based generator. Paths are
split into fixed-size chunks and chunk ``c`` uses the key
``seed + c * 2**64``, so every path sees the same stream regardless of how
chunks are scheduled across threads.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .distributions import SueParams
from .inference import num_threads

CHUNK = 1 << 16
_U53 = 2.0**-53


@dataclass(frozen=True)
class SimSettings:
    paths: int
    seed: int = 0
    n_cap: int = 10_000

    def __post_init__(self):
        if int(self.paths) != self.paths or self.paths < 1:
            raise ValueError(f"paths must be a positive integer, got {self.paths}")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")
        if self.n_cap < 1:
            raise ValueError("n_cap must be positive")


@dataclass(frozen=True)
class EmpiricalPmf:
    """Histogram of simulated counts.

    ``counts_histogram`` maps ``n`` to the number of paths that ended with
    ``n`` events. ``truncated_paths`` counts paths stopped at ``n_cap``.
    """

    counts_histogram: dict
    paths: int
    mean: float
    variance: float
    truncated_paths: int = 0

    def frequencies(self, n_max=None):
        """Relative frequencies for ``n = 0..n_max`` (default: largest observed)."""
        top = max(self.counts_histogram) if n_max is None else int(n_max)
        out = np.zeros(top + 1)
        for n, c in self.counts_histogram.items():
            if n <= top:
                out[n] = c
        return out / self.paths


def _uniform_open(rng, size):
    # (k + 0.5) / 2^53 lies strictly inside (0, 1)
    raw = rng.bit_generator.random_raw(size)
    return ((raw >> np.uint64(11)).astype(float) + 0.5) * _U53


def _chunk_counts(params, seed, chunk, size, n_cap):
    rng = np.random.Generator(np.random.Philox(key=int(seed) + (int(chunk) << 64)))
    counts = np.zeros(size, dtype=np.int64)
    clock = np.zeros(size)
    active = np.arange(size)
    k = 1
    while active.size and k <= n_cap:
        rate = params.rate * (params.alpha if k == params.gamma_event else 1.0)
        clock[active] += -np.log(_uniform_open(rng, active.size)) / rate
        hit = clock[active] <= params.exposure
        counts[active[hit]] = k
        active = active[hit]
        k += 1
    return np.bincount(counts), int(active.size)


def simulate_sue(params, settings):
    """Simulate ``settings.paths`` independent counts of the SUE process."""
    if not isinstance(params, SueParams):
        raise TypeError("params must be a SueParams instance")
    sizes = [CHUNK] * (settings.paths // CHUNK)
    if settings.paths % CHUNK:
        sizes.append(settings.paths % CHUNK)

    def one(c):
        return _chunk_counts(params, settings.seed, c, sizes[c], settings.n_cap)

    workers = min(num_threads(), len(sizes))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(one, range(len(sizes))))
    else:
        parts = [one(c) for c in range(len(sizes))]

    total = np.zeros(max(p[0].size for p in parts), dtype=np.int64)
    truncated = 0
    for hist, cut in parts:
        total[: hist.size] += hist
        truncated += cut
    ns = np.nonzero(total)[0]
    histogram = {int(n): int(total[n]) for n in ns}
    mean, var = _hist_moments(ns.astype(float), total[ns].astype(float))
    return EmpiricalPmf(histogram, settings.paths, mean, var, truncated)


def _hist_moments(values, weights):
    m = weights.sum()
    mean = float(np.dot(weights, values) / m)
    var = float(np.dot(weights, (values - mean) ** 2) / (m - 1)) if m > 1 else 0.0
    return mean, var


def _jackknife(values, weights, stat):
    """Jackknife standard error of ``stat`` using the histogram grouping."""
    m = weights.sum()
    if m < 3:
        return math.nan
    leave = np.empty(values.size)
    for i in range(values.size):
        w = weights.copy()
        w[i] -= 1.0
        leave[i] = stat(values, w)
    avg = np.dot(weights, leave) / m
    return float(math.sqrt((m - 1) / m * np.dot(weights, (leave - avg) ** 2)))


@dataclass(frozen=True)
class MeanVariance:
    mean: float
    variance: float
    mean_se: float
    variance_se: float
    paths: int


def simulate_mean_variance(params, settings):
    """Sample mean and variance of simulated counts with jackknife standard errors."""
    emp = simulate_sue(params, settings)
    values = np.array(sorted(emp.counts_histogram), dtype=float)
    weights = np.array([emp.counts_histogram[int(v)] for v in values], dtype=float)
    mean_se = _jackknife(values, weights, lambda v, w: _hist_moments(v, w)[0])
    var_se = _jackknife(values, weights, lambda v, w: _hist_moments(v, w)[1])
    return MeanVariance(emp.mean, emp.variance, mean_se, var_se, emp.paths)
