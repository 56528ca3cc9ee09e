# -*- coding: utf-8 -*-
"""
Binary-encoded genetic algorithm for the retailer's day-ahead price vector.

Each hourly price is a 10-bit gene (MSB first). Constraints on capacity and
revenue are handled by feasibility-first comparison instead of penalties.
"""
from __future__ import annotations

import functools
import logging
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from tqdm import tqdm

from dynprice.errors import FitnessError, InputError
from dynprice.retailer import MarketEvaluation, MarketLimits

logger = logging.getLogger(__name__)

# ====== Defaults ======
BITS = 10
POPULATION = 300
MUTATION = 0.005
GENERATIONS = 300
CROSSOVER = 0.9
TOURNAMENT = 2
ELITISM = 1


@dataclass(frozen=True)
class GaConfig:
    bits: int = BITS
    population: int = POPULATION
    mutation: float = MUTATION
    generations: int = GENERATIONS
    crossover: float = CROSSOVER
    tournament: int = TOURNAMENT
    elitism: int = ELITISM
    seed: int = 0
    seed_floor: bool = True

    def __post_init__(self):
        if self.population < 2 or self.population % 2:
            raise InputError(f"population size must be even and >= 2, got {self.population}")
        if self.population % self.tournament:
            raise InputError(f"population {self.population} is not a multiple of tournament size {self.tournament}")
        for name in ("mutation", "crossover"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise InputError(f"{name} probability {value} outside [0, 1]")
        if self.bits < 1 or self.generations < 0 or self.tournament < 1:
            raise InputError("bits and tournament size must be positive, generations non-negative")
        if not 0 <= self.elitism <= self.population:
            raise InputError(f"elitism {self.elitism} outside [0, population]")


@dataclass
class GaResult:
    prices: np.ndarray
    evaluation: MarketEvaluation
    trace: list[dict] = field(default_factory=list)
    bits: np.ndarray | None = None
    evaluations: int = 0
    cache_hits: int = 0
    seconds: float = 0.0
    method: str = "ga"


def decode(bits, limits: MarketLimits, bits_per_price: int = BITS) -> np.ndarray:
    """Each gene g in [0, 2^b - 1] maps to p_min + round(g * (p_max - p_min) / (2^b - 1), 2)."""
    b = np.asarray(bits, dtype=np.int64).ravel()
    H = limits.horizon
    if b.size != H * bits_per_price:
        raise InputError(f"chromosome has {b.size} bits, expected {H * bits_per_price}")
    weights = 1 << np.arange(bits_per_price - 1, -1, -1, dtype=np.int64)
    genes = b.reshape(H, bits_per_price) @ weights
    top = (1 << bits_per_price) - 1
    step = np.round(genes * (limits.p_max - limits.p_min) / top, 2)
    return np.round(limits.p_min + step, 2)


def encode(prices, limits: MarketLimits, bits_per_price: int = BITS) -> np.ndarray:
    """Chromosome of the largest genes whose decoded prices do not exceed `prices`."""
    p = np.asarray(prices, dtype=float).ravel()
    H = limits.horizon
    if p.size != H:
        raise InputError(f"price vector has {p.size} slots, expected {H}")
    top = (1 << bits_per_price) - 1
    grid = np.arange(top + 1)
    genes = np.empty(H, dtype=np.int64)
    for h in range(H):
        decoded = np.round(limits.p_min[h] + np.round(grid * (limits.p_max[h] - limits.p_min[h]) / top, 2), 2)
        below = np.flatnonzero(decoded <= p[h] + 1e-12)
        genes[h] = below[-1] if below.size else 0
    shifts = np.arange(bits_per_price - 1, -1, -1)
    return ((genes[:, None] >> shifts[None, :]) & 1).astype(np.uint8).ravel()


def deb_compare(a: MarketEvaluation, b: MarketEvaluation) -> int:
    """-1 if a ranks first (ties included), +1 if b does."""
    if a.feasible != b.feasible:
        return -1 if a.feasible else 1
    if a.feasible:
        return -1 if a.profit >= b.profit else 1
    return -1 if a.violation <= b.violation else 1


_deb_key = functools.cmp_to_key(deb_compare)


class _FitnessCache:
    """Memoises evaluations by chromosome bytes and fans misses out to a thread pool."""

    def __init__(self, fitness, limits, bits_per_price, workers):
        self.fitness = fitness
        self.limits = limits
        self.bits_per_price = bits_per_price
        self.workers = workers
        self.store: dict[bytes, MarketEvaluation] = {}
        self.evaluations = 0
        self.hits = 0

    def _one(self, chromosome):
        return self.fitness(decode(chromosome, self.limits, self.bits_per_price))

    def __call__(self, population: np.ndarray, generation: int) -> list[MarketEvaluation]:
        keys = [row.tobytes() for row in population]
        missing = {}
        for key, row in zip(keys, population):
            if key not in self.store and key not in missing:
                missing[key] = row
        self.hits += len(keys) - len(missing)
        try:
            if self.workers > 1 and len(missing) > 1:
                with ThreadPoolExecutor(max_workers=self.workers) as pool:
                    results = list(pool.map(self._one, missing.values()))
            else:
                results = [self._one(row) for row in missing.values()]
        except Exception as e:
            raise FitnessError(f"fitness evaluation failed: {e}", generation=generation) from e
        self.store.update(zip(missing.keys(), results))
        self.evaluations += len(missing)
        return [self.store[key] for key in keys]


def _select(population, evals, tournament, rng) -> np.ndarray:
    """Deterministic tournament without replacement: one shuffled pass per tournament slot."""
    PN = population.shape[0]
    winners = []
    for _ in range(tournament):
        perm = rng.permutation(PN)
        for start in range(0, PN, tournament):
            group = perm[start:start + tournament]
            best = group[0]
            for challenger in group[1:]:
                if deb_compare(evals[best], evals[challenger]) > 0:
                    best = challenger
            winners.append(best)
    return population[np.array(winners)]


def _crossover(parents, probability, rng) -> np.ndarray:
    children = parents.copy()
    L = parents.shape[1]
    for i in range(0, parents.shape[0], 2):
        if rng.random() < probability:
            mask = rng.random(L) < 0.5
            a, b = children[i].copy(), children[i + 1].copy()
            children[i, mask], children[i + 1, mask] = b[mask], a[mask]
    return children


def _mutate(children, probability, rng) -> np.ndarray:
    flips = rng.random(children.shape) < probability
    return children ^ flips.astype(children.dtype)


def evolve(config: GaConfig, fitness: Callable[[np.ndarray], MarketEvaluation], limits: MarketLimits,
           progress: bool = True, workers: int | None = None,
           initial_population: np.ndarray | None = None, seeds: np.ndarray | None = None) -> GaResult:
    """Maximise profit over binary price chromosomes.

    `seeds` are chromosomes copied into the first rows of the random
    initial population; with elitism the result ranks no worse than any of them.
    """
    started = time.perf_counter()
    workers = workers or os.cpu_count() or 1
    PN, L = config.population, config.bits * limits.horizon
    streams = np.random.SeedSequence(config.seed).spawn(config.generations + 1)
    cache = _FitnessCache(fitness, limits, config.bits, workers)

    rng = np.random.default_rng(streams[0])
    population = rng.integers(0, 2, size=(PN, L), dtype=np.uint8)
    if initial_population is not None:
        population = np.asarray(initial_population, dtype=np.uint8).copy()
        if population.shape != (PN, L):
            raise InputError(f"initial population has shape {population.shape}, expected {(PN, L)}")
    else:
        extra = np.zeros((0, L), dtype=np.uint8) if seeds is None else np.atleast_2d(np.asarray(seeds, dtype=np.uint8))
        if extra.shape[1:] != (L,) or extra.shape[0] > PN:
            raise InputError(f"seed chromosomes have shape {extra.shape}, expected at most {PN} rows of {L} bits")
        population[:extra.shape[0]] = extra
        if config.seed_floor and extra.shape[0] < PN:
            population[extra.shape[0]] = 0
    evals = cache(population, 0)

    best_idx = min(range(PN), key=lambda i: _deb_key(evals[i]))
    best_bits, best_eval = population[best_idx].copy(), evals[best_idx]
    trace = []

    for generation in tqdm(range(1, config.generations + 1), desc="GA generations", disable=not progress):
        rng = np.random.default_rng(streams[generation])
        parents = _select(population, evals, config.tournament, rng)
        children = _mutate(_crossover(parents, config.crossover, rng), config.mutation, rng)
        child_evals = cache(children, generation)

        if config.elitism:
            elite = sorted(range(PN), key=lambda i: _deb_key(evals[i]))[:config.elitism]
            worst = sorted(range(PN), key=lambda i: _deb_key(child_evals[i]))[-config.elitism:]
            for e, w in zip(elite, worst):
                children[w] = population[e]
                child_evals[w] = evals[e]
        population, evals = children, child_evals

        for i in range(PN):
            if deb_compare(best_eval, evals[i]) > 0:
                best_bits, best_eval = population[i].copy(), evals[i]

        profits = np.array([e.profit for e in evals])
        feasible = np.array([e.feasible for e in evals])
        row = {
            "generation": generation,
            "best_profit": best_eval.profit if best_eval.feasible else float("nan"),
            "mean_profit": float(profits.mean()),
            "feasible_fraction": float(feasible.mean()),
        }
        trace.append(row)
        logger.debug("generation %d: best %.4f, mean %.4f, feasible %.2f",
                     generation, row["best_profit"], row["mean_profit"], row["feasible_fraction"])

    if not best_eval.feasible:
        logger.warning("GA found no feasible price vector; best violation %.4g", best_eval.violation)
    seconds = time.perf_counter() - started
    logger.info("GA finished: profit %.2f cents, %d evaluations, %d cache hits, %.1fs",
                best_eval.profit, cache.evaluations, cache.hits, seconds)
    return GaResult(prices=decode(best_bits, limits, config.bits), evaluation=best_eval, trace=trace,
                    bits=best_bits, evaluations=cache.evaluations, cache_hits=cache.hits, seconds=seconds)


def solve(market, settings: GaConfig, progress: bool = True, workers: int | None = None,
          seeds: np.ndarray | None = None) -> GaResult:
    return evolve(settings, market.evaluate, market.limits, progress=progress, workers=workers, seeds=seeds)
