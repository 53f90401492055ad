"""Monte Carlo density experiments built on the stabilizer chain."""

from __future__ import annotations

import time
from typing import Callable

import numpy as np

from ..errors import DomainError
from ..stochastic import ExperimentReport, RngConfig, _map_chunks, haar_random
from ..treealg import PermGroupSpec, TreeAutomorphism
from .chain import DEFAULT_MAX_POINTS, density_sequence


def random_generation_dimension_experiment(
        j: int, p: int, n: int, samples: int, rng: RngConfig, threshold: float = 0.9,
        sampler: Callable[[int, PermGroupSpec, np.random.Generator], TreeAutomorphism] | None = None,
        max_points: int = DEFAULT_MAX_POINTS) -> ExperimentReport:
    """gamma_n of the group generated by j Haar elements of Gamma_n(p).

    Generator i of sample s comes from substream (s, i). ``sampler`` replaces
    the Haar sampler (used for degenerate overrides such as the identity).
    """
    if j < 1 or samples < 1:
        raise DomainError("need j >= 1 and samples >= 1")
    start = time.perf_counter()
    H = PermGroupSpec.cyclic(p)
    draw = sampler or haar_random

    def one(s, _size):
        gens = [draw(n, H, rng.generator(s, i)) for i in range(j)]
        seq = density_sequence(gens, n, max_points=max_points)
        return seq.floats

    rows = np.array(_map_chunks(one, samples, 1), dtype=float).reshape(samples, n)
    final = rows[:, -1]
    frac = float((final > threshold).mean())
    levels = list(range(1, n + 1))
    return ExperimentReport(
        "random_generation_dimension",
        {"fraction_above_threshold": frac, "mean_gamma_n": float(final.mean()),
         "min_gamma_n": float(final.min()), "gamma_n": final.tolist(),
         "mean_gamma_by_level": rows.mean(axis=0).tolist(),
         "exploratory": j < 3},
        samples,
        {"fraction_above_threshold": float(np.sqrt(frac * (1 - frac) / samples)),
         "mean_gamma_n": float(final.std(ddof=1) / np.sqrt(samples)) if samples > 1 else 0.0},
        {"j": j, "p": p, "n": n, "samples": samples, "threshold": threshold},
        rng, time.perf_counter() - start,
        series={"mean_gamma": {"x": levels, "y": rows.mean(axis=0).tolist()}})
