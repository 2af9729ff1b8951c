"""Warm-started genetic algorithm over hybrid chromosomes.

A chromosome is a placement segment (K distinct satellite ids, permutation
style) followed by an assignment segment (N genes in 1..K, each pointing at a
placement gene). Slots are chained: the best strategy and a sample of the
final generation seed the next slot's initial population, so consecutive
solutions stay close and strategy-shifting costs stay visible to the search.

Operators keep every individual feasible by construction: partially matched
crossover and reversal on the placement segment preserve distinctness,
two-point crossover and clamped breeder-style mutation keep assignment genes
in range.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .constellation import DistanceMatrix
from .costs import CostBreakdown, SlotContext, Strategy, Weights, evaluate_arrays, objective, validate
from .errors import CodecError, ConfigurationError


@dataclass(frozen=True)
class Chromosome:
    placement: tuple[int, ...]
    assignment: tuple[int, ...]


def decode(chromosome: Chromosome) -> Strategy:
    """Map a chromosome to a concrete strategy; assignment gene k selects the
    satellite in placement slot k."""
    place = chromosome.placement
    k = len(place)
    if len(set(place)) != k:
        raise CodecError("placement genes must be distinct")
    if any(g < 1 for g in place):
        raise CodecError("placement genes must be positive satellite ids")
    if any(not 1 <= g <= k for g in chromosome.assignment):
        raise CodecError(f"assignment genes must be in 1..{k}")
    assignment = tuple(place[g - 1] for g in chromosome.assignment)
    return Strategy(place, assignment)


def encode(strategy: Strategy) -> Chromosome:
    place = strategy.controllers
    if len(set(place)) != len(place):
        raise CodecError("controller satellites must be distinct")
    lookup = {sat: i + 1 for i, sat in enumerate(place)}
    try:
        genes = tuple(lookup[sat] for sat in strategy.assignment)
    except KeyError as exc:
        raise CodecError(f"assignment names non-controller satellite {exc.args[0]}") from exc
    return Chromosome(tuple(place), genes)


@dataclass(frozen=True)
class GAParams:
    """Search knobs. ``mutation_prob_assignment=None`` mutates one assignment
    gene per chromosome on average (rate 1/N). ``audit_fraction`` of each
    generation is decoded and constraint-checked as a self-test."""

    population_size: int = 200
    max_generations: int = 500
    stall_limit: int = 300
    stall_epsilon: float = 1e-9
    crossover_prob_placement: float = 0.9
    crossover_prob_assignment: float = 0.7
    mutation_prob_placement: float = 0.3
    mutation_prob_assignment: float | None = None
    breeder_shrink: float = 0.5
    breeder_gradient: int = 20
    tournament_size: int = 3
    prior_pool_size: int = 50
    audit_fraction: float = 0.01
    use_cluster_seed: bool = True
    use_prior_population: bool = True
    cluster_max_iters: int = 100
    rng_seed: int | None = None

    def __post_init__(self) -> None:
        if self.population_size < 2:
            raise ConfigurationError("population_size: must be >= 2")
        if self.max_generations < 1:
            raise ConfigurationError("max_generations: must be >= 1")
        if not 1 <= self.stall_limit <= self.max_generations:
            raise ConfigurationError("stall_limit: must be in 1..max_generations")
        if self.stall_epsilon < 0:
            raise ConfigurationError("stall_epsilon: must be >= 0")
        for name in (
            "crossover_prob_placement",
            "crossover_prob_assignment",
            "mutation_prob_placement",
            "audit_fraction",
        ):
            if not 0 <= getattr(self, name) <= 1:
                raise ConfigurationError(f"{name}: must be in [0, 1]")
        if self.mutation_prob_assignment is not None and not 0 <= self.mutation_prob_assignment <= 1:
            raise ConfigurationError("mutation_prob_assignment: must be in [0, 1]")
        if not 0 <= self.breeder_shrink:
            raise ConfigurationError("breeder_shrink: must be >= 0")
        if self.breeder_gradient < 1:
            raise ConfigurationError("breeder_gradient: must be >= 1")
        if self.tournament_size < 1:
            raise ConfigurationError("tournament_size: must be >= 1")
        if not 0 < self.prior_pool_size < self.population_size:
            raise ConfigurationError("prior_pool_size: must be in 1..population_size-1")
        if self.cluster_max_iters < 1:
            raise ConfigurationError("cluster_max_iters: must be >= 1")


@dataclass(frozen=True)
class PriorPopulation:
    """Warm-start material carried between slots."""

    best: Strategy | None
    pool: tuple[Chromosome, ...]


@dataclass(frozen=True)
class SlotSolution:
    best_strategy: Strategy
    best_cost: CostBreakdown
    elite_pool: tuple[Chromosome, ...]
    generations_run: int
    convergence_trace: tuple[float, ...]
    audit_checked: int = 0
    audit_violations: int = 0


def cluster_seed(
    k: int,
    dm: DistanceMatrix,
    rng: np.random.Generator,
    max_iters: int = 100,
) -> Chromosome:
    """Medoid clustering on shortest-path distances, encoded as a chromosome.

    Random initial centres; every satellite joins the nearest centre (ties to
    the lowest id); each cluster re-centres on the member minimising total
    in-cluster distance; stop at a fixed point or after ``max_iters``.
    """
    n = dm.num_satellites
    if not 1 <= k <= n:
        raise ConfigurationError("k: must be in 1..num_satellites")
    centers = np.sort(rng.choice(n, size=k, replace=False))
    for _ in range(max_iters):
        member_of = np.argmin(dm.dist_km[:, centers], axis=1)
        new_centers = centers.copy()
        for idx in range(k):
            members = np.flatnonzero(member_of == idx)
            totals = dm.dist_km[np.ix_(members, members)].sum(axis=1)
            new_centers[idx] = members[np.argmin(totals)]
        new_centers = np.sort(new_centers)
        if np.array_equal(new_centers, centers):
            break
        centers = new_centers
    member_of = np.argmin(dm.dist_km[:, centers], axis=1)
    return Chromosome(
        tuple(int(c) + 1 for c in centers),
        tuple(int(m) + 1 for m in member_of),
    )


def tournament_select(
    objectives: np.ndarray,
    count: int,
    size: int,
    rng: np.random.Generator,
) -> np.ndarray:
    """Indices of ``count`` parents, each the best of ``size`` uniform draws
    with replacement. Lower objective wins; ties go to the earliest draw, so
    equal-fitness populations are sampled uniformly."""
    draws = rng.integers(0, len(objectives), size=(count, size))
    winners = np.argmin(objectives[draws], axis=1)
    return draws[np.arange(count), winners]


def _pmx_child(
    recipient: np.ndarray,
    donor: np.ndarray,
    lo: int,
    hi: int,
    num_satellites: int,
    rng: np.random.Generator,
) -> np.ndarray:
    child = recipient.copy()
    child[lo : hi + 1] = donor[lo : hi + 1]
    window_vals = {int(v) for v in donor[lo : hi + 1]}
    mapping = {int(donor[i]): int(recipient[i]) for i in range(lo, hi + 1)}
    unresolved: list[int] = []
    for pos in (*range(lo), *range(hi + 1, len(child))):
        v: int | None = int(recipient[pos])
        seen: set[int] = set()
        while v in window_vals:
            if v in seen:  # mapping cycle; defer to random repair
                unresolved.append(pos)
                v = None
                break
            seen.add(v)
            v = mapping[v]
        if v is not None:
            child[pos] = v
    if unresolved:
        used = {int(child[i]) for i in range(len(child)) if i not in unresolved}
        free = [s for s in range(1, num_satellites + 1) if s not in used]
        picks = rng.choice(len(free), size=len(unresolved), replace=False)
        for pos, pick in zip(unresolved, picks):
            child[pos] = free[int(pick)]
    return child


def pmx_crossover(
    a: np.ndarray,
    b: np.ndarray,
    num_satellites: int,
    rng: np.random.Generator,
) -> tuple[np.ndarray, np.ndarray]:
    """Partially matched crossover on placement segments.

    A random gene window is swapped between the parents; duplicates outside
    the window are repaired by following the window's value mapping. Children
    are always distinct-valued.
    """
    a = np.asarray(a, dtype=np.int64)
    b = np.asarray(b, dtype=np.int64)
    lo, hi = sorted(int(x) for x in rng.integers(0, len(a), size=2))
    return (
        _pmx_child(a, b, lo, hi, num_satellites, rng),
        _pmx_child(b, a, lo, hi, num_satellites, rng),
    )


def two_point_crossover(
    a: np.ndarray,
    b: np.ndarray,
    rng: np.random.Generator,
) -> tuple[np.ndarray, np.ndarray]:
    """Swap the gene run between two random cut points."""
    a = np.asarray(a, dtype=np.int64)
    b = np.asarray(b, dtype=np.int64)
    c1, c2 = sorted(int(x) for x in rng.integers(0, len(a) + 1, size=2))
    child_a, child_b = a.copy(), b.copy()
    child_a[c1:c2], child_b[c1:c2] = b[c1:c2], a[c1:c2]
    return child_a, child_b


def reverse_mutation(segment: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Reverse a random contiguous run; the value set is unchanged."""
    seg = np.asarray(segment, dtype=np.int64).copy()
    lo, hi = sorted(int(x) for x in rng.integers(0, len(seg), size=2))
    seg[lo : hi + 1] = seg[lo : hi + 1][::-1]
    return seg


def _breeder_block(
    rows: np.ndarray,
    k: int,
    params: GAParams,
    rate: float,
    rng: np.random.Generator,
) -> np.ndarray:
    """Breeder-style mutation over a block of assignment segments.

    A mutated gene moves by ``+-range * sum(alpha_i * 2^-i)`` with
    ``alpha_i ~ Bernoulli(1/gradient)`` and ``range = shrink * (K - 1)``,
    rounded half up and clamped into 1..K.
    """
    out = rows.copy()
    if k < 2 or rate <= 0:
        return out
    mask = rng.random(rows.shape) < rate
    count = int(mask.sum())
    if count == 0:
        return out
    signs = np.where(rng.random(count) < 0.5, -1.0, 1.0)
    g = params.breeder_gradient
    alphas = rng.random((count, g)) < (1.0 / g)
    deltas = alphas @ (2.0 ** -np.arange(g))
    steps = params.breeder_shrink * (k - 1) * deltas * signs
    mutated = np.floor(out[mask] + steps + 0.5)
    out[mask] = np.clip(mutated, 1, k).astype(np.int64)
    return out


def breeder_mutation(
    segment: np.ndarray,
    k: int,
    params: GAParams,
    rng: np.random.Generator,
) -> np.ndarray:
    """Single-segment breeder mutation (see :func:`_breeder_block`)."""
    seg = np.asarray(segment, dtype=np.int64)
    rate = params.mutation_prob_assignment
    if rate is None:
        rate = 1.0 / len(seg)
    return _breeder_block(seg[None, :], k, params, rate, rng)[0]


def _random_individuals(
    count: int, n: int, k: int, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    place = np.empty((count, k), dtype=np.int64)
    for i in range(count):
        place[i] = rng.choice(n, size=k, replace=False) + 1
    assign = rng.integers(1, k + 1, size=(count, n), dtype=np.int64)
    return place, assign


class _Memo:
    """Per-slot objective cache; evaluation is pure, so hits are exact."""

    def __init__(self, ctx: SlotContext, weights: Weights) -> None:
        self.ctx = ctx
        self.weights = weights
        self.cache: dict[bytes, float] = {}

    def evaluate(self, place_rows: np.ndarray, assign_rows: np.ndarray) -> np.ndarray:
        objs = np.empty(len(place_rows))
        for i in range(len(place_rows)):
            key = place_rows[i].tobytes() + assign_rows[i].tobytes()
            cached = self.cache.get(key)
            if cached is None:
                cached = evaluate_arrays(
                    place_rows[i], assign_rows[i] - 1, self.ctx, self.weights
                ).objective
                self.cache[key] = cached
            objs[i] = cached
        return objs


def evolve_slot(
    ctx: SlotContext,
    k: int,
    weights: Weights,
    params: GAParams,
    rng: np.random.Generator,
    prior: PriorPopulation | None = None,
) -> SlotSolution:
    """Run the per-slot search and return the best strategy found.

    The initial population is the prior pool plus the encoded previous best
    (when given) topped up with random individuals. Each generation keeps the
    best individual, tournament-selects the rest, and applies segment-wise
    crossover and mutation. The loop ends after ``stall_limit`` consecutive
    generations without an improvement of at least ``stall_epsilon``, or at
    ``max_generations``.
    """
    n = ctx.num_satellites
    if not 1 <= k <= n:
        raise ConfigurationError("k: must be in 1..num_satellites")
    npop = params.population_size

    seeds: list[Chromosome] = []
    seen: set[tuple] = set()
    if prior is not None:
        candidates = list(prior.pool)
        if prior.best is not None:
            candidates.append(encode(prior.best))
        for ch in candidates:
            key = (ch.placement, ch.assignment)
            if key not in seen:
                seen.add(key)
                seeds.append(ch)
    if len(seeds) > npop:
        raise ConfigurationError("prior population exceeds population_size")
    place_rows = np.empty((npop, k), dtype=np.int64)
    assign_rows = np.empty((npop, n), dtype=np.int64)
    for i, ch in enumerate(seeds):
        if len(ch.placement) != k or len(ch.assignment) != n:
            raise ConfigurationError("prior chromosome shape does not match scenario")
        place_rows[i] = ch.placement
        assign_rows[i] = ch.assignment
    fill_place, fill_assign = _random_individuals(npop - len(seeds), n, k, rng)
    place_rows[len(seeds) :] = fill_place
    assign_rows[len(seeds) :] = fill_assign

    memo = _Memo(ctx, weights)
    objs = memo.evaluate(place_rows, assign_rows)
    best_i = int(np.argmin(objs))
    best_obj = float(objs[best_i])
    best_place = place_rows[best_i].copy()
    best_assign = assign_rows[best_i].copy()
    trace = [best_obj]

    assign_rate = params.mutation_prob_assignment
    if assign_rate is None:
        assign_rate = 1.0 / n
    n_audit = max(1, math.ceil(params.audit_fraction * npop)) if params.audit_fraction > 0 else 0
    audit_checked = 0
    audit_violations = 0

    generations = 0
    stall = 0
    while generations < params.max_generations and stall < params.stall_limit:
        parents = tournament_select(objs, npop - 1, params.tournament_size, rng)
        child_place = place_rows[parents].copy()
        child_assign = assign_rows[parents].copy()
        for a in range(0, npop - 2, 2):
            b = a + 1
            if rng.random() < params.crossover_prob_placement:
                child_place[a], child_place[b] = pmx_crossover(
                    child_place[a], child_place[b], n, rng
                )
            if rng.random() < params.crossover_prob_assignment:
                child_assign[a], child_assign[b] = two_point_crossover(
                    child_assign[a], child_assign[b], rng
                )
        for i in range(npop - 1):
            if rng.random() < params.mutation_prob_placement:
                child_place[i] = reverse_mutation(child_place[i], rng)
        child_assign = _breeder_block(child_assign, k, params, assign_rate, rng)

        place_rows = np.vstack([child_place, best_place[None, :]])
        assign_rows = np.vstack([child_assign, best_assign[None, :]])
        objs = memo.evaluate(place_rows, assign_rows)
        generations += 1

        gen_best_i = int(np.argmin(objs))
        gen_best = float(objs[gen_best_i])
        if best_obj - gen_best >= params.stall_epsilon:
            stall = 0
        else:
            stall += 1
        if gen_best < best_obj:
            best_obj = gen_best
            best_place = place_rows[gen_best_i].copy()
            best_assign = assign_rows[gen_best_i].copy()
        trace.append(gen_best)

        for i in range(n_audit):
            idx = (generations * 7 + i) % npop
            audit_checked += 1
            try:
                strat = decode(
                    Chromosome(
                        tuple(int(x) for x in place_rows[idx]),
                        tuple(int(x) for x in assign_rows[idx]),
                    )
                )
            except CodecError:
                audit_violations += 1
                continue
            if validate(strat, n, k):
                audit_violations += 1

    pool = min(params.prior_pool_size, npop)
    elite_idx = rng.choice(npop, size=pool, replace=False)
    elite_pool = tuple(
        Chromosome(
            tuple(int(x) for x in place_rows[i]),
            tuple(int(x) for x in assign_rows[i]),
        )
        for i in elite_idx
    )
    best_strategy = decode(
        Chromosome(tuple(int(x) for x in best_place), tuple(int(x) for x in best_assign))
    )
    best_cost = objective(best_strategy, ctx, weights)
    return SlotSolution(
        best_strategy=best_strategy,
        best_cost=best_cost,
        elite_pool=elite_pool,
        generations_run=generations,
        convergence_trace=tuple(trace),
        audit_checked=audit_checked,
        audit_violations=audit_violations,
    )


class GaSolver:
    """Per-slot GA with warm-start chaining across slots."""

    name = "ga"

    def __init__(self, k: int, params: GAParams) -> None:
        self.k = k
        self.params = params
        self._prior: PriorPopulation | None = None
        self._first = True
        self._own_rng = (
            np.random.default_rng(params.rng_seed) if params.rng_seed is not None else None
        )

    def solve_slot(
        self,
        slot: int,
        ctx: SlotContext,
        weights: Weights,
        rng: np.random.Generator,
    ) -> SlotSolution:
        rng = self._own_rng if self._own_rng is not None else rng
        if self._first:
            self._first = False
            prior = None
            if self.params.use_cluster_seed:
                seed = cluster_seed(self.k, ctx.dm, rng, self.params.cluster_max_iters)
                prior = PriorPopulation(best=None, pool=(seed,))
        else:
            prior = self._prior if self.params.use_prior_population else None
        solution = evolve_slot(ctx, self.k, weights, self.params, rng, prior)
        self._prior = PriorPopulation(solution.best_strategy, solution.elite_pool)
        return solution
