"""On-board style (1+1)-Evolution Strategy.

One champion, one offspring per evaluation. Offspring are accepted when
their fitness is at least the champion's (neutral drift allowed); the
step-size follows the 1/5th success rule; after 30 evaluations without a
strict improvement the champion is replaced by a fresh random genotype and
the step-size resets. Every evaluation, initial champions included, burns
budget and is logged.
"""

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import controller, fitness, sim
from .controller import Genotype

SIGMA_MIN = 1e-6
SIGMA_MAX = 10.0
DEFAULT_RESTART_AFTER = 30
ADAPT_FACTOR = 1.5  # accept: *a, reject: *a**(-1/4) -> equilibrium at 1/5


@dataclass
class EsState:
    """Mutable loop state of one (1+1)-ES lineage."""

    champion: Genotype
    champion_fitness: float
    sigma: float
    evals_done: int = 0
    evals_since_improvement: int = 0
    success_window: list = field(default_factory=list)


def one_fifth_update(state, accepted, factor=ADAPT_FACTOR, mode="per_eval", window_size=10):
    """Step-size adaptation; returns a new EsState.

    per_eval: multiplicative rule, sigma *= factor on acceptance and
    *= factor**(-1/4) on rejection, equilibrium exactly at a 1/5 success
    rate. window: classical windowed variant, adjusting once per full
    window by comparing the success rate to 1/5. Sigma is clamped to
    [1e-6, 10] either way.
    """
    window = state.success_window + [bool(accepted)]
    sigma = state.sigma
    if mode == "per_eval":
        sigma *= factor if accepted else factor ** (-1.0 / 4.0)
        window = []
    elif mode == "window":
        if len(window) >= window_size:
            rate = sum(window) / len(window)
            if rate > 0.2:
                sigma *= factor
            elif rate < 0.2:
                sigma /= factor
            window = []
    else:
        raise ValueError(f"unknown adaptation mode {mode!r}")
    sigma = min(max(sigma, SIGMA_MIN), SIGMA_MAX)
    return replace(state, sigma=sigma, success_window=window)


@dataclass
class Evaluation:
    """What one fitness evaluation produced (robot extras optional)."""

    fitness: float
    end_point: tuple = (0.0, 0.0)
    max_distance: float = 0.0
    visits: np.ndarray = None  # (H, W) uint16 per-cell counts


@dataclass
class EvalRecord:
    eval_index: int  # dense, 1-based
    fitness: float
    accepted: bool
    sigma: float  # step-size the individual was generated with
    end_point: tuple
    restart: bool
    max_distance: float = 0.0
    genotype: Genotype = None  # kept for accepted records (and inits)
    visits: np.ndarray = field(default=None, repr=False)


@dataclass
class RunLog:
    fitness_kind: str
    seed: int
    config_hash: str
    records: list

    def __len__(self):
        return len(self.records)


def evolve(
    spawn,
    evaluate,
    budget,
    rng,
    sigma0=controller.DEFAULT_SIGMA,
    restart_after=DEFAULT_RESTART_AFTER,
    adapt_mode="per_eval",
    mutate=controller.mutate,
):
    """Generic (1+1)-ES loop; returns the list of EvalRecords.

    spawn(rng, sigma) -> Genotype draws a fresh individual; evaluate(g) ->
    Evaluation scores it. The loop never re-evaluates the champion: under
    archive-driven fitnesses the champion keeps the value recorded when it
    was evaluated.
    """
    if budget < 1:
        raise ValueError("budget must be >= 1")
    records = []

    def log(genotype, ev, accepted, sigma_used, restart):
        records.append(
            EvalRecord(
                eval_index=len(records) + 1,
                fitness=ev.fitness,
                accepted=accepted,
                sigma=sigma_used,
                end_point=ev.end_point,
                restart=restart,
                max_distance=ev.max_distance,
                genotype=genotype if accepted else None,
                visits=ev.visits,
            )
        )

    champion = spawn(rng, sigma0)
    ev = evaluate(champion)
    log(champion, ev, True, sigma0, False)
    state = EsState(
        champion=champion, champion_fitness=ev.fitness, sigma=sigma0, evals_done=len(records)
    )

    while len(records) < budget:
        if state.evals_since_improvement >= restart_after:
            champion = spawn(rng, sigma0)
            ev = evaluate(champion)
            log(champion, ev, True, sigma0, True)
            state = EsState(
                champion=champion, champion_fitness=ev.fitness, sigma=sigma0, evals_done=len(records)
            )
            continue

        child = mutate(replace(state.champion, sigma=state.sigma), rng)
        ev = evaluate(child)
        accepted = ev.fitness >= state.champion_fitness
        improved = ev.fitness > state.champion_fitness
        log(child, ev, accepted, state.sigma, False)
        if accepted:
            state.champion = child
            state.champion_fitness = ev.fitness
        state = one_fifth_update(state, accepted, mode=adapt_mode)
        state.evals_done = len(records)
        state.evals_since_improvement = 0 if improved else state.evals_since_improvement + 1

    return records


def make_robot_evaluator(arena, spec, episode_cfg):
    """Bind a FitnessSpec to (arena, episode config); returns (evaluate, context).

    context exposes the archives so the caller can dump them after the run.
    """

    class _Context:
        novelty_archive = fitness.NoveltyArchive(sentinel=arena.diagonal)
        discovery_archive = fitness.DiscoveryArchive.empty(
            dim=sim.STREAM_DIM, epsilon=spec.epsilon
        )

    ctx = _Context()

    def evaluate(genotype):
        result = sim.run_episode(arena, genotype, episode_cfg)
        if spec.kind == fitness.CURIOSITY:
            value, _ = fitness.curiosity_fitness(result.stream, spec.epsilon)
        elif spec.kind == fitness.DISCOVERY:
            value, updated = fitness.discovery_fitness(
                ctx.discovery_archive, result.stream, spec.epsilon
            )
            if spec.discovery_commit_every:
                ctx.discovery_archive = updated
        elif spec.kind == fitness.NOVELTY:
            value = fitness.novelty_fitness(result.end_point, ctx.novelty_archive, spec.novelty_k)
            if spec.novelty_add_every:
                ctx.novelty_archive.add(result.end_point)
        elif spec.kind == fitness.DISPLACEMENT:
            value = fitness.displacement_fitness(result.stream)
        else:  # pragma: no cover - FitnessSpec validates
            raise ValueError(spec.kind)
        return Evaluation(
            fitness=value,
            end_point=result.end_point,
            max_distance=result.max_distance_from_start,
            visits=result.patrol.counts.astype(np.uint16),
        )

    return evaluate, ctx


def es_run(arena, spec, budget, episode_cfg, seed, config_hash="", adapt_mode="per_eval"):
    """One seeded ES run of the robot experiment; returns (RunLog, context).

    Deterministic: the RNG is derived from the seed alone, episodes are
    noise-free, and the archives evolve serially with the lineage.
    """
    rng = np.random.default_rng(seed)
    evaluate, ctx = make_robot_evaluator(arena, spec, episode_cfg)

    def spawn(r, sigma):
        return controller.random_genotype(r, sigma=sigma)

    records = evolve(spawn, evaluate, budget, rng, adapt_mode=adapt_mode)
    log = RunLog(fitness_kind=spec.kind, seed=seed, config_hash=config_hash, records=records)
    return log, ctx


def select_best(records, n):
    """The n records with highest fitness; ties keep the earlier record.

    For multi-run aggregation pass the pooled record list (stable sort, so
    pool order breaks cross-run ties).
    """
    if n > len(records):
        raise ValueError(f"asked for {n} best of {len(records)} records")
    ranked = sorted(records, key=lambda r: -r.fitness)
    return ranked[:n]
