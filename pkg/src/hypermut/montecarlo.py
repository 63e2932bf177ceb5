"""Genotype-level simulation of the mutation walk on ``{0,1}^N``.

Genotypes are packed into little-endian uint64 words (site ``s`` lives in
bit ``s % 64`` of word ``s // 64``). Every site draws one uniform per step
from the trial's counter-based stream (:mod:`hypermut.rng`), laid out as:

* draws ``0 .. N-1``: choice of the start genotype;
* draws ``n*N .. n*N + N-1``: the coin flips of step ``n >= 1``.

All trials of a chunk advance in lockstep as numpy arrays. A trial's
outcome depends only on ``(seed, trial_index)``, so chunking and thread
count never change the numbers.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np

from .chain import ModelParams, _check_class, class_distribution
from .errors import AllCensored, DomainError
from .rng import CounterStream, trial_keys, uniforms

_Z95 = 1.959963984540054
DEFAULT_CHUNK = 2048


def n_words(n_sites: int) -> int:
    return (n_sites + 63) // 64


def pack_bits(bits: np.ndarray) -> np.ndarray:
    """Pack a ``(..., N)`` boolean array into ``(..., ceil(N/64))`` uint64 words."""
    bits = np.asarray(bits, dtype=bool)
    N = bits.shape[-1]
    W = n_words(N)
    padded = np.zeros(bits.shape[:-1] + (W * 64,), dtype=bool)
    padded[..., :N] = bits
    packed = np.packbits(padded, axis=-1, bitorder="little")
    return np.ascontiguousarray(packed).view("<u8").astype(np.uint64)


def unpack_bits(words: np.ndarray, n_sites: int) -> np.ndarray:
    words = np.ascontiguousarray(np.asarray(words, dtype="<u8"))
    raw = np.unpackbits(words.view(np.uint8), axis=-1, bitorder="little")
    return raw[..., :n_sites].astype(bool)


def popcount(words: np.ndarray) -> np.ndarray:
    return np.bitwise_count(np.asarray(words, dtype=np.uint64)).sum(axis=-1, dtype=np.int64)


@dataclass(frozen=True, eq=False)
class Genotype:
    """A binary string of ``n_sites`` sites stored as packed words."""

    n_sites: int
    words: np.ndarray

    def __post_init__(self):
        words = np.array(self.words, dtype=np.uint64).reshape(-1)
        if words.size != n_words(self.n_sites):
            raise DomainError(f"{self.n_sites} sites need {n_words(self.n_sites)} words")
        spare = n_words(self.n_sites) * 64 - self.n_sites
        if spare and int(words[-1]) >> (64 - spare):
            raise DomainError("bits set beyond the last site")
        words.setflags(write=False)
        object.__setattr__(self, "words", words)

    @classmethod
    def from_bits(cls, bits) -> "Genotype":
        bits = np.asarray(bits, dtype=bool)
        return cls(bits.size, pack_bits(bits))

    @classmethod
    def zeros(cls, n_sites: int) -> "Genotype":
        return cls(n_sites, np.zeros(n_words(n_sites), dtype=np.uint64))

    def bits(self) -> np.ndarray:
        return unpack_bits(self.words, self.n_sites)

    @property
    def hamming_class(self) -> int:
        return int(popcount(self.words))

    def __eq__(self, other):
        if not isinstance(other, Genotype):
            return NotImplemented
        return self.n_sites == other.n_sites and np.array_equal(self.words, other.words)

    def __hash__(self):
        return hash((self.n_sites, self.words.tobytes()))

    def __str__(self):
        return "".join("1" if b else "0" for b in self.bits())


def _start_bits(u: np.ndarray, start_class: int | None) -> np.ndarray:
    """Start genotypes from one row of ``N`` uniforms per trial.

    A class start puts ones at the ``start_class`` sites with the smallest
    draws, which is a uniform subset; ``None`` gives a uniform genotype.
    """
    if start_class is None:
        return u < 0.5
    order = np.argsort(u, axis=-1, kind="stable")
    bits = np.zeros(u.shape, dtype=bool)
    np.put_along_axis(bits, order[..., :start_class], True, axis=-1)
    return bits


def sample_genotype(n_sites: int, start_class: int | None, stream: CounterStream) -> Genotype:
    """Uniform genotype within Hamming class ``start_class`` (anywhere if None)."""
    u = stream.uniforms(n_sites)
    return Genotype.from_bits(_start_bits(u, start_class))


def step_genotype(g: Genotype, params: ModelParams, rng_state: CounterStream) -> Genotype:
    """One mutation step: every site flips with probability ``p``, one draw per site."""
    if g.n_sites != params.n_sites:
        raise DomainError("genotype length does not match params.n_sites")
    flips = rng_state.uniforms(g.n_sites) < float(params.mut_prob)
    return Genotype(g.n_sites, g.words ^ pack_bits(flips))


@dataclass(frozen=True)
class SimConfig:
    """Everything the simulated numbers depend on besides the model."""

    seed: int
    n_trials: int
    max_steps_per_trial: int

    def __post_init__(self):
        if self.n_trials < 1:
            raise DomainError("n_trials must be positive")
        if self.max_steps_per_trial < 1:
            raise DomainError("max_steps_per_trial must be positive")

    @classmethod
    def recommended(cls, params: ModelParams, seed: int, n_trials: int) -> "SimConfig":
        """Step cap of ``100 * 2**N``, far beyond any mean passage time."""
        return cls(seed, n_trials, 100 * 2 ** params.n_sites)

    def trial_stream(self, trial_index: int) -> CounterStream:
        """The stream owned by one trial (``key = mix(seed, trial_index)``)."""
        return CounterStream.for_trial(self.seed, trial_index)


@dataclass(frozen=True)
class EstimateReport:
    mean: float
    std_error: float
    n_trials: int
    n_censored: int
    ci95_low: float
    ci95_high: float

    def z_score(self, reference: float) -> float:
        if self.std_error == 0:
            return 0.0 if self.mean == reference else math.copysign(math.inf, self.mean - reference)
        return (self.mean - reference) / self.std_error

    def to_dict(self) -> dict:
        return asdict(self)


def _init_chunk(params, start_class, keys):
    N = params.n_sites
    sites = np.arange(N, dtype=np.uint64)
    u = uniforms(keys[:, None], sites[None, :])
    return pack_bits(_start_bits(u, start_class))


def _flip_masks(params, keys, step):
    N = params.n_sites
    ctr = np.uint64(step * N) + np.arange(N, dtype=np.uint64)
    return pack_bits(uniforms(keys[:, None], ctr[None, :]) < float(params.mut_prob))


def _hitting_chunk(params, start_class, target_class, keys, max_steps):
    """First ``n >= 1`` with popcount ``target_class``; -1 marks censored trials."""
    times = np.full(keys.size, -1, dtype=np.int64)
    words = _init_chunk(params, start_class, keys)
    active = np.arange(keys.size)
    for n in range(1, max_steps + 1):
        words = words ^ _flip_masks(params, keys, n)
        hit = popcount(words) == target_class
        if hit.any():
            times[active[hit]] = n
            keep = ~hit
            active, words, keys = active[keep], words[keep], keys[keep]
            if active.size == 0:
                break
    return times


def _classes_chunk(params, start_class, keys, n_steps):
    words = _init_chunk(params, start_class, keys)
    for n in range(1, n_steps + 1):
        words = words ^ _flip_masks(params, keys, n)
    return popcount(words)


def _map_chunks(fn, cfg: SimConfig, n_jobs: int, chunk_size: int) -> np.ndarray:
    bounds = [(lo, min(lo + chunk_size, cfg.n_trials)) for lo in range(0, cfg.n_trials, chunk_size)]

    def run(b):
        return fn(trial_keys(cfg.seed, np.arange(b[0], b[1])))

    if n_jobs <= 1:
        parts = [run(b) for b in bounds]
    else:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            parts = list(pool.map(run, bounds))
    return np.concatenate(parts)


def simulate_hitting_times(params: ModelParams, start_class: int | None, target_class: int,
                           cfg: SimConfig, *, n_jobs: int = 1,
                           chunk_size: int = DEFAULT_CHUNK) -> np.ndarray:
    """Per-trial hitting times in trial-index order (``-1`` when censored)."""
    if start_class is not None:
        start_class = _check_class(params, start_class)
    target_class = _check_class(params, target_class, "target_class")
    return _map_chunks(
        lambda keys: _hitting_chunk(params, start_class, target_class, keys, cfg.max_steps_per_trial),
        cfg, n_jobs, chunk_size)


def summarize(times: np.ndarray) -> EstimateReport:
    done = times[times >= 0]
    n_censored = int(times.size - done.size)
    if done.size == 0:
        raise AllCensored(f"all {times.size} trials hit the step cap; raise max_steps")
    mean = float(done.mean())
    se = float(done.std(ddof=1) / math.sqrt(done.size)) if done.size > 1 else 0.0
    return EstimateReport(mean, se, int(times.size), n_censored, mean - _Z95 * se, mean + _Z95 * se)


def estimate_hitting_time(params: ModelParams, start_class: int | None, target_class: int,
                          cfg: SimConfig, *, n_jobs: int = 1,
                          chunk_size: int = DEFAULT_CHUNK) -> EstimateReport:
    """Monte Carlo mean of ``tau_target`` from a uniform genotype of ``start_class``.

    ``start_class=None`` starts from a uniform genotype over all of
    ``{0,1}^N``. Censored trials are left out of the mean and counted in
    ``n_censored``.
    """
    times = simulate_hitting_times(params, start_class, target_class, cfg,
                                   n_jobs=n_jobs, chunk_size=chunk_size)
    return summarize(times)


def empirical_class_distribution(params: ModelParams, start_class: int, n: int, cfg: SimConfig,
                                 *, n_jobs: int = 1, chunk_size: int = 8192) -> np.ndarray:
    start_class = _check_class(params, start_class)
    if n < 0:
        raise DomainError("n must be non-negative")
    classes = _map_chunks(lambda keys: _classes_chunk(params, start_class, keys, n),
                          cfg, n_jobs, chunk_size)
    return np.bincount(classes, minlength=params.n_sites + 1) / classes.size


def lumping_consistency(params: ModelParams, start_class: int, n: int, cfg: SimConfig,
                        *, n_jobs: int = 1) -> float:
    """Total-variation gap between simulated popcounts and the lumped law after ``n`` steps."""
    emp = empirical_class_distribution(params, start_class, n, cfg, n_jobs=n_jobs)
    exact = class_distribution(params.as_float(), start_class, n).probs
    return 0.5 * float(np.abs(emp - exact).sum())
