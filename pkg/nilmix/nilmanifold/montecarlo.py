"""Seeded Monte-Carlo estimation on X = G/Λ.

Samples are drawn in fixed-size chunks; chunk k always uses the Philox stream
keyed by (seed, k), and chunk sums are merged in chunk order. Estimates are
therefore identical for every number of workers.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from nilmix.conf import get_setting
from nilmix.exceptions import BudgetExceeded
from nilmix.nilmanifold.bumps import HolderFunction
from nilmix.nilmanifold.heisenberg import HeisAuto, reduce_array

logger = logging.getLogger(__name__)

MIN_SAMPLES = 1000

Word = Union[HeisAuto, Sequence[HeisAuto]]
Kernel = Callable[[np.random.Generator, int], np.ndarray]


@dataclass
class MonteCarloEstimate:
    estimate: float
    stderr: float
    samples: int
    seed: int

    def within(self, value: float, sigmas: float = 3.0) -> bool:
        return abs(self.estimate - value) <= sigmas * self.stderr

    def to_json(self) -> Dict[str, Any]:
        return {
            "estimate": self.estimate,
            "stderr": self.stderr,
            "samples": self.samples,
            "seed": self.seed,
        }


def stream(seed: int, chunk: int, purpose: int = 0) -> np.random.Generator:
    """Counter-based stream for one chunk; ``purpose`` separates independent uses of a seed."""
    key = np.random.SeedSequence(seed, spawn_key=(purpose, chunk))
    return np.random.Generator(np.random.Philox(key))


def run_chunks(
    kernel: Kernel,
    samples: int,
    seed: Optional[int] = None,
    jobs: Optional[int] = None,
    chunk_size: Optional[int] = None,
) -> MonteCarloEstimate:
    """Mean and standard error of ``kernel`` values over ``samples`` draws."""
    seed = int(get_setting("SEED") if seed is None else seed)
    jobs = int(jobs or get_setting("JOBS"))
    chunk_size = int(chunk_size or get_setting("MC_CHUNK_SIZE"))
    budget = int(get_setting("SAMPLE_BUDGET"))
    if samples < MIN_SAMPLES:
        raise ValueError(f"Monte-Carlo estimates need at least {MIN_SAMPLES} samples")
    if samples > budget:
        raise BudgetExceeded(
            "The sample count exceeds the sample budget", {"samples": samples, "budget": budget}
        )
    sizes = [chunk_size] * (samples // chunk_size)
    if samples % chunk_size:
        sizes.append(samples % chunk_size)

    def work(index: int) -> Tuple[float, float]:
        values = kernel(stream(seed, index), sizes[index])
        return float(np.sum(values)), float(np.dot(values, values))

    with ThreadPoolExecutor(max_workers=jobs) as pool:
        sums: List[Tuple[float, float]] = list(pool.map(work, range(len(sizes))))
    first = second = 0.0
    for s1, s2 in sums:
        first += s1
        second += s2
    mean = first / samples
    variance = max(0.0, (second - first * mean) / (samples - 1))
    logger.debug("Merged %d chunks of at most %d samples", len(sizes), chunk_size)
    return MonteCarloEstimate(mean, math.sqrt(variance / samples), samples, seed)


def _steps(word: Word) -> Tuple[HeisAuto, ...]:
    return (word,) if isinstance(word, HeisAuto) else tuple(word)


def apply_word(word: Word, points: np.ndarray) -> np.ndarray:
    """Apply the automorphisms of ``word`` in order, reducing to [0,1)³ after each one."""
    for step in _steps(word):
        points = reduce_array(step.apply_array(points))
    return points


def mc_correlation(
    f_list: Sequence[HolderFunction],
    words: Sequence[Word],
    samples: int,
    seed: Optional[int] = None,
    jobs: Optional[int] = None,
    chunk_size: Optional[int] = None,
) -> MonteCarloEstimate:
    """Monte-Carlo estimate of ∫ ∏_i f_i(α(z_i)x) dμ(x) with Haar = Lebesgue on [0,1)³."""
    if not f_list or len(f_list) != len(words):
        raise ValueError(f"{len(f_list)} functions but {len(words)} automorphism words")
    words = [_steps(word) for word in words]

    def kernel(rng: np.random.Generator, size: int) -> np.ndarray:
        points = rng.random((size, 3))
        values = np.ones(size)
        for f, word in zip(f_list, words):
            values *= f.evaluate(apply_word(word, points))
        return values

    result = run_chunks(kernel, samples, seed, jobs, chunk_size)
    logger.info(
        "MC correlation over %d samples: %.6g ± %.2g", samples, result.estimate, result.stderr
    )
    return result
