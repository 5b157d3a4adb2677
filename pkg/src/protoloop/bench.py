"""Benchmark sweeps over synthetic targets and the tables derived from their logs.

Every sweep runs all episodes first (optionally in worker processes), then
writes one line-delimited trajectory log plus a small meta record per
episode. Tables are always recomputed from those files, never from the
in-memory results, so a table can be regenerated from logs alone.
"""

from __future__ import annotations

import csv
import io
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

from .control import LoopConfig, Mode, run_episode
from .memory import Budgets, quality_score
from .protocol import MetricField, RequirementSet, load_requirements, observation_from_residual
from .synthetic import DIFFICULTY_DOCKING_MEAN, HeuristicPlanner, SyntheticExecutor, make_target

CUTOFF_CAPS = (2, 4, 6, 8, 10)
EPISODE_CSV_HEADER = ("mode", "seed", "success", "iterations", "pool_size", "state_chars_mean")
SENSITIVITY_SETTINGS: tuple[tuple[str, Budgets], ...] = (
    ("default", Budgets(4, 3, 3, 1400, 1800, 1200)),
    ("tight_chars", Budgets(4, 3, 3, 900, 1200, 700)),
    ("compact_counts", Budgets(2, 2, 2, 1400, 1800, 1200)),
    ("wide_counts", Budgets(6, 5, 5, 1400, 1800, 1200)),
    ("rebalanced_chars", Budgets(4, 3, 3, 1000, 2200, 1000)),
)
MEMCURVE_MODES = (Mode.CACM, Mode.RAW)


def parse_seeds(text: str) -> tuple[int, ...]:
    """``"7"``, ``"1..30"`` or ``"1,4,9"``."""
    text = text.strip()
    if ".." in text:
        lo, hi = text.split("..", 1)
        a, b = int(lo), int(hi)
        if b < a:
            raise ValueError(f"empty seed range {text!r}")
        return tuple(range(a, b + 1))
    seeds = tuple(int(s) for s in text.split(",") if s.strip())
    if not seeds:
        raise ValueError("no seeds given")
    return seeds


@dataclass(frozen=True)
class BenchmarkConfig:
    seeds: tuple[int, ...] = tuple(range(1, 31))
    difficulty: str = "hard"
    modes: tuple[Mode, ...] = tuple(Mode)
    budgets: Budgets = field(default_factory=Budgets)
    out: Path = Path("runs")
    jobs: int = 1
    max_iterations: int = 10
    requirements: Mapping[str, Any] | None = None

    def __post_init__(self) -> None:
        if not self.seeds:
            raise ValueError("seed list is empty")
        if not self.modes:
            raise ValueError("mode list is empty")
        if self.difficulty not in DIFFICULTY_DOCKING_MEAN:
            raise ValueError(f"unknown difficulty {self.difficulty!r}")
        if self.jobs < 1:
            raise ValueError("jobs must be at least 1")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")

    @classmethod
    def from_dict(cls, doc: Mapping[str, Any]) -> "BenchmarkConfig":
        kw: dict[str, Any] = {}
        unknown = set(doc) - {"seeds", "difficulty", "modes", "budgets", "out", "jobs", "max_iterations", "requirements"}
        if unknown:
            raise ValueError(f"unknown config keys {sorted(unknown)}")
        if "seeds" in doc:
            s = doc["seeds"]
            kw["seeds"] = parse_seeds(s) if isinstance(s, str) else tuple(int(x) for x in s)
        if "difficulty" in doc:
            kw["difficulty"] = str(doc["difficulty"])
        if "modes" in doc:
            kw["modes"] = tuple(Mode(m) for m in doc["modes"])
        if "budgets" in doc:
            b = doc["budgets"]
            kw["budgets"] = Budgets.parse(b) if isinstance(b, str) else Budgets(**b) if isinstance(b, Mapping) else Budgets(*b)
        if "out" in doc:
            kw["out"] = Path(doc["out"])
        for key in ("jobs", "max_iterations"):
            if key in doc:
                kw[key] = int(doc[key])
        if doc.get("requirements") is not None:
            r = doc["requirements"]
            kw["requirements"] = r if isinstance(r, Mapping) else json.loads(Path(r).read_text())
        return cls(**kw)


# ---------------------------------------------------------------- running

@dataclass(frozen=True)
class EpisodeSpec:
    seed: int
    difficulty: str
    mode: str
    budgets: tuple[int, ...]
    max_iterations: int = 10
    stop_on_success: bool = True
    requirements: Mapping[str, Any] | None = None


@dataclass
class EpisodeOutput:
    meta: dict[str, Any]
    lines: list[str]


def run_spec(spec: EpisodeSpec) -> EpisodeOutput:
    """Run one episode; any failure is returned as data, never raised."""
    meta: dict[str, Any] = {
        "seed": spec.seed,
        "difficulty": spec.difficulty,
        "mode": spec.mode,
        "budgets": list(spec.budgets),
        "max_iterations": spec.max_iterations,
        "stop_on_success": spec.stop_on_success,
    }
    try:
        reqs = load_requirements(spec.requirements) if spec.requirements is not None else None
        target = make_target(spec.seed, spec.difficulty, reqs)
        config = LoopConfig(
            max_iterations=spec.max_iterations,
            budgets=Budgets(*spec.budgets),
            mode=Mode(spec.mode),
            seed=spec.seed,
            stop_on_success=spec.stop_on_success,
        )
        res = run_episode(target, target.requirements, HeuristicPlanner(target.requirements), SyntheticExecutor(target), config)
    except Exception as exc:  # noqa: BLE001 - per-seed failures are data
        meta.update(
            requirements=None, success=False, returned_pool_id=None, iterations_used=0, error=f"{type(exc).__name__}: {exc}",
            pool_sizes={},
        )
        return EpisodeOutput(meta, [])
    meta.update(
        requirements=target.requirements.to_dict(),
        success=res.success,
        returned_pool_id=res.returned_pool.id if res.returned_pool else None,
        iterations_used=res.iterations_used,
        error=res.error,
        pool_sizes={r.pool_id: r.summary.size for r in res.trajectory},
    )
    return EpisodeOutput(meta, res.log_lines())


def run_specs(specs: Sequence[EpisodeSpec], jobs: int = 1) -> list[EpisodeOutput]:
    if jobs <= 1 or len(specs) <= 1:
        return [run_spec(s) for s in specs]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(run_spec, specs, chunksize=max(1, len(specs) // (4 * jobs))))


def episode_stem(mode: str, seed: int) -> str:
    return f"{mode}/seed{seed:03d}"


def write_episode(log_dir: Path, out: EpisodeOutput) -> Path:
    path = log_dir / f"{episode_stem(out.meta['mode'], out.meta['seed'])}.jsonl"
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("".join(line + "\n" for line in out.lines))
    path.with_suffix(".meta.json").write_text(json.dumps(out.meta, indent=1, sort_keys=True) + "\n")
    return path


def sweep(
    config: BenchmarkConfig,
    log_dir: Path,
    modes: Iterable[Mode] | None = None,
    budgets: Budgets | None = None,
    stop_on_success: bool = True,
) -> None:
    """Run every (mode, seed) episode, then write all logs."""
    budgets = budgets or config.budgets
    specs = [
        EpisodeSpec(
            seed, config.difficulty, mode.value, budgets.as_tuple(), config.max_iterations, stop_on_success,
            config.requirements,
        )
        for mode in (modes or config.modes)
        for seed in config.seeds
    ]
    for out in run_specs(specs, config.jobs):
        write_episode(log_dir, out)


# ---------------------------------------------------------------- reading logs

@dataclass(frozen=True)
class EpisodeLog:
    meta: Mapping[str, Any]
    records: tuple[Mapping[str, Any], ...]

    @property
    def requirements(self) -> RequirementSet | None:
        doc = self.meta.get("requirements")
        return load_requirements(doc) if doc else None

    def pool_size(self, pool_id: str) -> int:
        return int(self.meta["pool_sizes"][pool_id])

    def quality(self, rec: Mapping[str, Any], reqs: RequirementSet) -> float:
        """Pool quality rebuilt from the logged residuals."""
        stats: dict[MetricField, float] = {}
        for req in reqs:
            if req.field not in stats and req.field is not MetricField.CUSTOM:
                stats[req.field] = observation_from_residual(rec["residuals"][req.label], req)
        return quality_score(stats, reqs)

    def outcome_at(self, cap: int | None = None) -> tuple[bool, int, int]:
        """(success, termination iteration, returned pool size) had the episode been capped at ``cap``.

        The first passing pool is returned if there is one; otherwise the
        best pool under the dynamic-memory ranking (quality, then recency).
        """
        recs = [r for r in self.records if cap is None or r["iteration"] <= cap]
        if not recs:
            return False, 0, 0
        for r in recs:
            if r["passed"]:
                return True, r["iteration"], self.pool_size(r["pool_id"])
        reqs = self.requirements
        best = min(recs, key=lambda r: (-self.quality(r, reqs), -r["iteration"]))
        return False, recs[-1]["iteration"], self.pool_size(best["pool_id"])

    def state_chars_mean(self, key: str | None = None) -> float:
        if not self.records:
            return 0.0
        if key is None:
            vals = [r["state_chars"] for r in self.records]
        else:
            vals = [r["channel_chars"][key] for r in self.records]
        return sum(vals) / len(vals)


def load_episode(path: Path) -> EpisodeLog:
    path = Path(path)
    meta = json.loads(path.with_suffix(".meta.json").read_text())
    records = tuple(json.loads(line) for line in path.read_text().splitlines() if line.strip())
    return EpisodeLog(meta, records)


def load_mode(log_dir: Path, mode: Mode | str, seeds: Iterable[int]) -> list[EpisodeLog]:
    m = mode.value if isinstance(mode, Mode) else mode
    return [load_episode(log_dir / f"{episode_stem(m, s)}.jsonl") for s in seeds]


# ---------------------------------------------------------------- tables

def _mean(xs: Sequence[float]) -> float:
    return sum(xs) / len(xs) if xs else 0.0


def _tsr(n_ok: int, n: int) -> str:
    return f"{100.0 * n_ok / n:.1f} / {n_ok}" if n else "0.0 / 0"


def episode_rows(mode: str, logs: Sequence[EpisodeLog]) -> list[list[Any]]:
    rows = []
    for ep in logs:
        ok, iters, size = ep.outcome_at()
        rows.append([mode, ep.meta["seed"], int(ok), iters, size, f"{ep.state_chars_mean():.1f}"])
    return rows


def summary_row(label: str, logs: Sequence[EpisodeLog], cap: int | None = None) -> list[Any]:
    outs = [ep.outcome_at(cap) for ep in logs]
    n_ok = sum(o[0] for o in outs)
    return [
        label,
        _tsr(n_ok, len(outs)),
        f"{_mean([o[2] for o in outs]):.2f}",
        f"{_mean([o[1] for o in outs]):.2f}",
        f"{_mean([ep.state_chars_mean() for ep in logs]):.1f}",
    ]


def cutoff_rows(mode: str, logs: Sequence[EpisodeLog]) -> list[list[Any]]:
    rows = []
    for cap in CUTOFF_CAPS:
        outs = [ep.outcome_at(cap) for ep in logs]
        n_ok = sum(o[0] for o in outs)
        rows.append(
            [mode, cap, _tsr(n_ok, len(outs)), f"{_mean([o[2] for o in outs]):.2f}", f"{_mean([o[1] for o in outs]):.2f}"]
        )
    return rows


def channel_row(label: str, logs: Sequence[EpisodeLog]) -> list[Any]:
    return [label] + [f"{_mean([ep.state_chars_mean(k) for ep in logs]):.1f}" for k in ("static", "dynamic", "corrective")]


def format_table(headers: Sequence[str], rows: Sequence[Sequence[Any]]) -> str:
    cells = [[str(h) for h in headers]] + [[str(c) for c in row] for row in rows]
    widths = [max(len(r[i]) for r in cells) for i in range(len(headers))]
    lines = []
    for k, row in enumerate(cells):
        parts = [c.ljust(w) if i == 0 else c.rjust(w) for i, (c, w) in enumerate(zip(row, widths))]
        lines.append("  ".join(parts).rstrip())
        if k == 0:
            lines.append("  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"


def to_csv(headers: Sequence[str], rows: Sequence[Sequence[Any]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(headers)
    w.writerows(rows)
    return buf.getvalue()


SUMMARY_HEADERS = ("mode", "TSR (%/#)", "avg_pool_size", "avg_term_iters", "avg_state_chars")
CUTOFF_HEADERS = ("mode", "cap", "TSR (%/#)", "avg_pool_size", "avg_term_iters")
SENSITIVITY_HEADERS = ("setting", "TSR (%/#)", "avg_pool_size", "avg_term_iters", "avg_state_chars")
CHANNEL_HEADERS = ("setting", "static_chars", "dynamic_chars", "corrective_chars")


def bench_tables(log_dir: Path, modes: Sequence[Mode], seeds: Sequence[int]) -> dict[str, str]:
    """All bench outputs keyed by file name, rebuilt from the logs in ``log_dir``."""
    per_seed, summary, cutoff = [], [], []
    for mode in modes:
        logs = load_mode(log_dir, mode, seeds)
        per_seed += episode_rows(mode.value, logs)
        summary.append(summary_row(mode.value, logs))
        cutoff += cutoff_rows(mode.value, logs)
    text = (
        "Benchmark summary (state chars are planner-input characters, a proxy for token cost)\n"
        + format_table(SUMMARY_HEADERS, summary)
        + "\nCutoff statistics\n"
        + format_table(CUTOFF_HEADERS, cutoff)
    )
    return {
        "bench.txt": text,
        "episodes.csv": to_csv(EPISODE_CSV_HEADER, per_seed),
        "summary.csv": to_csv(SUMMARY_HEADERS, summary),
        "cutoff.csv": to_csv(CUTOFF_HEADERS, cutoff),
    }


def sensitivity_tables(root: Path, seeds: Sequence[int]) -> dict[str, str]:
    main, channels = [], []
    for name, _ in SENSITIVITY_SETTINGS:
        logs = load_mode(root / name, Mode.CACM, seeds)
        main.append(summary_row(name, logs))
        channels.append(channel_row(name, logs))
    text = (
        "Budget sensitivity (CACM)\n"
        + format_table(SENSITIVITY_HEADERS, main)
        + "\nChannel-wise mean characters\n"
        + format_table(CHANNEL_HEADERS, channels)
    )
    return {
        "sensitivity.txt": text,
        "sensitivity.csv": to_csv(SENSITIVITY_HEADERS, main),
        "sensitivity_channels.csv": to_csv(CHANNEL_HEADERS, channels),
    }


MEMCURVE_HEADERS = ("iteration", "cacm_mean_chars", "cacm_active", "raw_mean_chars", "raw_active")


def memcurve_rows(log_dir: Path, seeds: Sequence[int]) -> list[list[Any]]:
    """Mean planner-input length per iteration over episodes still running at that iteration."""
    by_mode = {m: load_mode(log_dir, m, seeds) for m in MEMCURVE_MODES}
    horizon = max((len(ep.records) for logs in by_mode.values() for ep in logs), default=0)
    rows = []
    for k in range(1, horizon + 1):
        row: list[Any] = [k]
        for m in MEMCURVE_MODES:
            vals = [ep.records[k - 1]["state_chars"] for ep in by_mode[m] if len(ep.records) >= k]
            row += [f"{_mean(vals):.1f}" if vals else "", len(vals)]
        rows.append(row)
    return rows


def memcurve_tables(log_dir: Path, seeds: Sequence[int]) -> dict[str, str]:
    rows = memcurve_rows(log_dir, seeds)
    return {
        "memcurve.csv": to_csv(MEMCURVE_HEADERS, rows),
        "memcurve.txt": "Planner-input characters per iteration (active episodes)\n" + format_table(MEMCURVE_HEADERS, rows),
    }


def write_outputs(out_dir: Path, files: Mapping[str, str]) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    for name, text in files.items():
        (out_dir / name).write_text(text)


def run_bench(config: BenchmarkConfig) -> dict[str, str]:
    log_dir = config.out / "logs"
    sweep(config, log_dir)
    files = bench_tables(log_dir, config.modes, config.seeds)
    write_outputs(config.out, files)
    return files


def run_sensitivity(config: BenchmarkConfig) -> dict[str, str]:
    root = config.out / "sensitivity"
    for name, budgets in SENSITIVITY_SETTINGS:
        sweep(config, root / name, modes=(Mode.CACM,), budgets=budgets)
    files = sensitivity_tables(root, config.seeds)
    write_outputs(config.out, files)
    return files


def run_memcurve(config: BenchmarkConfig, stop_on_success: bool = True) -> dict[str, str]:
    log_dir = config.out / "memcurve"
    sweep(config, log_dir, modes=MEMCURVE_MODES, stop_on_success=stop_on_success)
    files = memcurve_tables(log_dir, config.seeds)
    write_outputs(config.out, files)
    return files

