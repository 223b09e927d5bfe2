"""Batch experiment runner: seeded ES runs, patrolling metrics, file outputs.

An experiment is one fitness kind on one arena over `runs` independent
seeded ES runs. Outputs land in the configured directory:

  config.txt, arena.txt, meta.json     reproducibility envelope
  runlog_<seed>.csv                    one row per evaluation
  maxdist_<seed>.csv                   max distance from start per evaluation
  genotypes_<seed>/eval_NNNNN.csv      accepted champions, replayable
  visits_<seed>.bin                    per-evaluation visit-count grids
  clusters_<seed>.csv                  sensori-motor states for inspection
  metrics.csv                          p(ell) mean/std per selection mode
  heatmap_<selection>_<ell>.pgm        three-level coverage images
  fig_*.png                            matplotlib renderings (report module)

Everything is derived from explicit seeds; no wall-clock state anywhere, so
repeated runs produce byte-identical files.
"""

import hashlib
import json
import math
import os
import zlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import controller, report
from .arena import Arena, load_arena_file
from .clustering import epsilon_means, kmeans, write_clusters_csv
from .evolution import RunLog, EvalRecord, es_run, select_best
from .fitness import DISCOVERY, KINDS, FitnessSpec, entropy
from .sim import EpisodeConfig, run_episode

PATROL_THRESHOLDS = (2, 5, 10)
_ARENA_DIR = Path(__file__).parent / "arenas"


class ConfigError(ValueError):
    """Bad experiment configuration; raised before any simulation starts."""


@dataclass
class ExperimentConfig:
    arena: str
    fitness: FitnessSpec
    runs: int = 11
    budget: int = 2000
    steps: int = 2000
    seeds: list = None
    output_dir: str = "out"
    selections: tuple = ("best_100", "all")
    best_n: int = 100
    adapt_mode: str = "per_eval"
    cluster_algo: str = "epsilon"  # "kmeans" scores entropy on k clusters instead
    kmeans_k: int = 20
    save_genotypes: bool = True
    figures: bool = True
    episode_overrides: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.seeds is None:
            self.seeds = list(range(1, self.runs + 1))
        if len(self.seeds) != self.runs:
            raise ConfigError(f"{len(self.seeds)} seeds for {self.runs} runs")
        if len(set(self.seeds)) != len(self.seeds):
            raise ConfigError("seeds must be distinct")
        bad = [s for s in self.selections if s not in ("best_100", "all")]
        if bad:
            raise ConfigError(f"unknown selection mode(s) {bad}")
        if self.cluster_algo not in ("epsilon", "kmeans"):
            raise ConfigError(f"unknown cluster_algo {self.cluster_algo!r}")

    def episode_config(self):
        return EpisodeConfig(steps=self.steps, **self.episode_overrides)


@dataclass
class PatrolMetrics:
    """p(ell) mean/std in percent across runs, plus the per-run values."""

    p_of_ell: dict  # ell -> (mean, std)
    per_run: dict  # ell -> list of per-run percents


def resolve_arena_path(name):
    """Builtin arena name ('medium', 'hard') or a path to an arena file."""
    builtin = _ARENA_DIR / f"{name}.txt"
    if builtin.exists():
        return builtin
    p = Path(name)
    if p.exists():
        return p
    raise ConfigError(f"arena {name!r} is neither a builtin nor an existing file")


_BOOL = {"true": True, "yes": True, "1": True, "false": False, "no": False, "0": False}


def parse_config(text):
    """Line-based `key = value` config, '#' comments, UTF-8."""
    raw = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"config line {lineno}: expected 'key = value', got {line!r}")
        key, value = (part.strip() for part in body.split("=", 1))
        if not key or not value:
            raise ConfigError(f"config line {lineno}: empty key or value")
        if key in raw:
            raise ConfigError(f"config line {lineno}: duplicate key {key!r}")
        raw[key] = value

    if "arena" not in raw or "fitness" not in raw:
        raise ConfigError("config must set at least 'arena' and 'fitness'")

    def geti(key, default):
        return int(raw.pop(key)) if key in raw else default

    def getf(key, default):
        return float(raw.pop(key)) if key in raw else default

    def getb(key, default):
        if key not in raw:
            return default
        token = raw.pop(key).lower()
        if token not in _BOOL:
            raise ConfigError(f"config key {key!r}: not a boolean: {token!r}")
        return _BOOL[token]

    arena = raw.pop("arena")
    kind = raw.pop("fitness").lower()
    if kind not in KINDS:
        raise ConfigError(f"unknown fitness kind {kind!r}")
    spec = FitnessSpec(
        kind=kind,
        epsilon=getf("epsilon", None),
        novelty_k=geti("novelty_k", 15),
        novelty_add_every=getb("novelty_add_every", True),
        discovery_commit_every=getb("discovery_commit_every", True),
    )
    runs = geti("runs", 11)
    seeds = None
    if "seeds" in raw:
        seeds = [int(tok) for tok in raw.pop("seeds").split(",") if tok.strip()]
    selections = tuple(
        tok.strip() for tok in raw.pop("selection", "best_100,all").split(",") if tok.strip()
    )
    overrides = {}
    for key in ("dt", "max_speed", "axle", "sensor_range"):
        if key in raw:
            overrides[key] = float(raw.pop(key))

    cfg = ExperimentConfig(
        arena=arena,
        fitness=spec,
        runs=runs,
        budget=geti("budget", 2000),
        steps=geti("steps", 2000),
        seeds=seeds,
        output_dir=raw.pop("output_dir", "out"),
        selections=selections,
        best_n=geti("best_n", 100),
        adapt_mode=raw.pop("adapt", "per_eval"),
        cluster_algo=raw.pop("cluster_algo", "epsilon"),
        kmeans_k=geti("kmeans_k", 20),
        save_genotypes=getb("save_genotypes", True),
        figures=getb("figures", True),
        episode_overrides=overrides,
    )
    if raw:
        raise ConfigError(f"unknown config key(s): {sorted(raw)}")
    return cfg


def parse_config_file(path):
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


def canonical_config_text(cfg):
    """Stable key=value rendering; hashed into every run log."""
    spec = cfg.fitness
    pairs = {
        "arena": cfg.arena,
        "fitness": spec.kind,
        "epsilon": repr(spec.epsilon),
        "novelty_k": spec.novelty_k,
        "novelty_add_every": spec.novelty_add_every,
        "discovery_commit_every": spec.discovery_commit_every,
        "runs": cfg.runs,
        "budget": cfg.budget,
        "steps": cfg.steps,
        "seeds": ",".join(str(s) for s in cfg.seeds),
        "selection": ",".join(cfg.selections),
        "best_n": cfg.best_n,
        "adapt": cfg.adapt_mode,
        "cluster_algo": cfg.cluster_algo,
        "kmeans_k": cfg.kmeans_k,
    }
    for key, value in sorted(cfg.episode_overrides.items()):
        pairs[key] = repr(value)
    return "\n".join(f"{k} = {v}" for k, v in pairs.items()) + "\n"


def config_hash(cfg):
    return hashlib.sha256(canonical_config_text(cfg).encode()).hexdigest()[:12]


# ---------------------------------------------------------------- metrics


def patrol_percentage(grid, ell):
    """Percent of free cells visited at least ell times."""
    if ell < 1:
        raise ValueError("ell must be >= 1")
    free = int(grid.free.sum())
    hit = int(((grid.counts >= ell) & grid.free).sum())
    return 100.0 * hit / free


def heatmap(grid, ell):
    """Three-level uint8 image: walls 0, count >= ell 255, other free 128."""
    img = np.full(grid.counts.shape, 128, dtype=np.uint8)
    img[~grid.free] = 0
    img[grid.free & (grid.counts >= ell)] = 255
    return img


def write_pgm(path, img):
    """P2 ASCII PGM, one pixel per cell."""
    height, width = img.shape
    lines = [f"P2", f"{width} {height}", "255"]
    for row in img:
        lines.append(" ".join(str(int(v)) for v in row))
    _atomic_write_text(path, "\n".join(lines) + "\n")


def read_pgm(path):
    tokens = []
    with open(path, encoding="ascii") as fh:
        for line in fh:
            tokens.extend(line.split())
    if tokens[0] != "P2":
        raise ValueError(f"{path}: not a P2 PGM")
    width, height, maxval = int(tokens[1]), int(tokens[2]), int(tokens[3])
    data = np.array([int(t) for t in tokens[4 : 4 + width * height]], dtype=np.uint8)
    return data.reshape(height, width)


# ------------------------------------------------------------- file I/O


def _atomic_write_text(path, text):
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


def _atomic_write_bytes(path, blob):
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(blob)
    os.replace(tmp, path)


_VISITS_MAGIC = b"CURIOSIMVIS1\n"


def write_visits(path, stack):
    """Per-evaluation visit grids, shape (n_evals, H, W) uint16, zlib packed."""
    stack = np.ascontiguousarray(stack, dtype="<u2")
    header = _VISITS_MAGIC + f"{stack.shape[0]} {stack.shape[1]} {stack.shape[2]}\n".encode()
    _atomic_write_bytes(path, header + zlib.compress(stack.tobytes(), 6))


def read_visits(path):
    blob = Path(path).read_bytes()
    if not blob.startswith(_VISITS_MAGIC):
        raise ValueError(f"{path}: not a visits file")
    rest = blob[len(_VISITS_MAGIC) :]
    nl = rest.index(b"\n")
    n, h, w = (int(t) for t in rest[:nl].split())
    data = np.frombuffer(zlib.decompress(rest[nl + 1 :]), dtype="<u2")
    return data.reshape(n, h, w)


def write_runlog_csv(path, log):
    lines = [
        f"# fitness={log.fitness_kind} seed={log.seed} config={log.config_hash}",
        "eval,fitness,accepted,sigma,end_x,end_y,restart",
    ]
    for r in log.records:
        lines.append(
            f"{r.eval_index},{r.fitness!r},{int(r.accepted)},{r.sigma!r},"
            f"{float(r.end_point[0])!r},{float(r.end_point[1])!r},{int(r.restart)}"
        )
    _atomic_write_text(path, "\n".join(lines) + "\n")


def read_runlog_csv(path):
    """Rebuild a RunLog (without genotypes/visits) from its CSV."""
    meta = {}
    records = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                for token in line[1:].split():
                    if "=" in token:
                        k, v = token.split("=", 1)
                        meta[k] = v
                continue
            if line.startswith("eval,"):
                continue
            parts = line.split(",")
            records.append(
                EvalRecord(
                    eval_index=int(parts[0]),
                    fitness=float(parts[1]),
                    accepted=bool(int(parts[2])),
                    sigma=float(parts[3]),
                    end_point=(float(parts[4]), float(parts[5])),
                    restart=bool(int(parts[6])),
                )
            )
    return RunLog(
        fitness_kind=meta.get("fitness", "?"),
        seed=int(meta.get("seed", -1)),
        config_hash=meta.get("config", ""),
        records=records,
    )


def write_maxdist_csv(path, log):
    lines = ["eval,max_distance"]
    for r in log.records:
        lines.append(f"{r.eval_index},{r.max_distance!r}")
    _atomic_write_text(path, "\n".join(lines) + "\n")


# ------------------------------------------------------------ the runner


def _grid_from_counts(arena, counts):
    from .arena import PatrolGrid

    return PatrolGrid(
        counts=counts.astype(np.int64), free=arena.free_mask, cell_size=arena.cell_size
    )


def _dump_clusters(path, cfg, arena, ctx, log):
    """Designer-inspection dump: the cumulative archive for Discovery, the
    best individual's clustered stream otherwise (replayed, deterministic)."""
    spec = cfg.fitness
    if spec.kind == DISCOVERY:
        write_clusters_csv(path, ctx.discovery_archive.clusters)
        return
    best = select_best(log.records, 1)[0]
    if best.genotype is None:  # pragma: no cover - best records are accepted ones
        return
    result = run_episode(arena, best.genotype, cfg.episode_config())
    if cfg.cluster_algo == "kmeans":
        clusters = kmeans(result.stream, cfg.kmeans_k, np.random.default_rng(log.seed))
    else:
        clusters = epsilon_means(result.stream, spec.epsilon)
    write_clusters_csv(path, clusters)


def run_single(cfg, arena, seed, chash):
    """One seeded run plus its per-run artifacts; returns (RunLog, visits stack)."""
    out = Path(cfg.output_dir)
    log, ctx = es_run(
        arena,
        cfg.fitness,
        cfg.budget,
        cfg.episode_config(),
        seed,
        config_hash=chash,
        adapt_mode=cfg.adapt_mode,
    )
    stack = np.stack([r.visits for r in log.records])
    write_runlog_csv(out / f"runlog_{seed}.csv", log)
    write_maxdist_csv(out / f"maxdist_{seed}.csv", log)
    write_visits(out / f"visits_{seed}.bin", stack)
    _dump_clusters(out / f"clusters_{seed}.csv", cfg, arena, ctx, log)
    if cfg.save_genotypes:
        gdir = out / f"genotypes_{seed}"
        gdir.mkdir(exist_ok=True)
        for r in log.records:
            if r.accepted and r.genotype is not None:
                controller.save_genotype(gdir / f"eval_{r.eval_index:05d}.csv", r.genotype)
    return log, stack


def aggregate(arena, run_logs, run_stacks, selections, best_n):
    """Patrol metrics and merged grids per selection mode.

    Per run, the selected evaluations' visit grids are summed, p(ell) is
    computed per run, and mean/std (sample std) are taken across runs. The
    cross-run merged grid feeds the heatmaps.
    """
    stats = {}
    merged = {}
    for selection in selections:
        if selection == "all":
            chosen = {log.seed: np.arange(len(log.records)) for log in run_logs}
        else:
            pooled = []
            for log in run_logs:
                for i, r in enumerate(log.records):
                    pooled.append((r.fitness, log.seed, i))
            take = min(best_n, len(pooled))
            ranked = sorted(pooled, key=lambda t: -t[0])[:take]
            chosen = {log.seed: [] for log in run_logs}
            for _, seed, i in ranked:
                chosen[seed].append(i)
            chosen = {seed: np.array(sorted(idx), dtype=int) for seed, idx in chosen.items()}

        per_run = {ell: [] for ell in PATROL_THRESHOLDS}
        total = np.zeros((arena.height, arena.width), dtype=np.int64)
        for log in run_logs:
            stack = run_stacks[log.seed]
            idx = chosen[log.seed]
            counts = (
                stack[idx].astype(np.int64).sum(axis=0)
                if len(idx)
                else np.zeros_like(total)
            )
            total += counts
            grid = _grid_from_counts(arena, counts)
            values = [patrol_percentage(grid, ell) for ell in PATROL_THRESHOLDS]
            assert values[0] >= values[1] >= values[2], "p(ell) must be non-increasing in ell"
            for ell, value in zip(PATROL_THRESHOLDS, values):
                per_run[ell].append(value)

        p_of_ell = {}
        for ell in PATROL_THRESHOLDS:
            arr = np.array(per_run[ell])
            std = float(arr.std(ddof=1)) if len(arr) > 1 else 0.0
            p_of_ell[ell] = (float(arr.mean()), std)
        stats[selection] = PatrolMetrics(p_of_ell=p_of_ell, per_run=per_run)
        merged[selection] = _grid_from_counts(arena, total)

    if "all" in stats and "best_100" in stats:
        for ell in PATROL_THRESHOLDS:
            a = stats["all"].per_run[ell]
            b = stats["best_100"].per_run[ell]
            assert all(x >= y for x, y in zip(a, b)), "all-individuals coverage below best-100"
    return stats, merged


def write_metrics_csv(path, arena_name, fitness_kind, stats):
    lines = ["fitness_kind,arena,selection,ell,mean,std"]
    for selection in sorted(stats):
        for ell in PATROL_THRESHOLDS:
            mean, std = stats[selection].p_of_ell[ell]
            lines.append(f"{fitness_kind},{arena_name},{selection},{ell},{mean:.2f},{std:.2f}")
    _atomic_write_text(path, "\n".join(lines) + "\n")


def run_experiment(cfg):
    """Execute all runs and write every output file; returns the stats dict.

    Config problems (missing arena, seed/run mismatch) raise ConfigError
    before any simulation starts.
    """
    arena_path = resolve_arena_path(cfg.arena)
    arena = load_arena_file(arena_path)
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    chash = config_hash(cfg)

    _atomic_write_text(out / "config.txt", canonical_config_text(cfg))
    _atomic_write_text(out / "arena.txt", arena_path.read_text(encoding="utf-8"))

    run_logs = []
    run_stacks = {}
    for seed in cfg.seeds:
        log, stack = run_single(cfg, arena, seed, chash)
        run_logs.append(log)
        run_stacks[seed] = stack

    stats, merged = aggregate(arena, run_logs, run_stacks, cfg.selections, cfg.best_n)

    arena_name = Path(cfg.arena).stem
    write_metrics_csv(out / "metrics.csv", arena_name, cfg.fitness.kind, stats)
    for selection, grid in merged.items():
        for ell in PATROL_THRESHOLDS:
            write_pgm(out / f"heatmap_{selection}_{ell}.pgm", heatmap(grid, ell))

    meta = {
        "config_hash": chash,
        "arena": arena_name,
        "arena_file": "arena.txt",
        "fitness_kind": cfg.fitness.kind,
        "epsilon": cfg.fitness.epsilon,
        "seeds": list(cfg.seeds),
        "entropy_log_base": "e",
        "patrol_cell_granularity": "arena grid cells",
        "std_dev": "sample (ddof=1) across runs",
        "free_cells": int(arena.free_mask.sum()),
    }
    _atomic_write_text(out / "meta.json", json.dumps(meta, indent=2, sort_keys=True) + "\n")

    if cfg.figures:
        report.render_experiment_figures(out, arena, cfg.fitness.kind, run_logs, merged)
    return stats


# ----------------------------------------------- reload & recomputation


def load_run_dir(run_dir):
    """Reload arena, run logs and visit stacks written by run_experiment."""
    run_dir = Path(run_dir)
    arena = load_arena_file(run_dir / "arena.txt")
    logs = []
    stacks = {}
    for logpath in sorted(run_dir.glob("runlog_*.csv"), key=lambda p: int(p.stem.split("_")[1])):
        log = read_runlog_csv(logpath)
        logs.append(log)
        stacks[log.seed] = read_visits(run_dir / f"visits_{log.seed}.bin")
    if not logs:
        raise ValueError(f"{run_dir}: no runlog_<seed>.csv files found")
    return arena, logs, stacks


def recompute_metrics(run_dir, selections=("best_100", "all"), best_n=100):
    """Re-aggregate metrics from the raw per-run artifacts on disk."""
    arena, logs, stacks = load_run_dir(run_dir)
    stats, merged = aggregate(arena, logs, stacks, selections, best_n)
    return arena, logs, stats, merged
