"""Command-line entry points: run, bench, sensitivity, memcurve.

Exit status: 0 success, 1 execution error, 2 protocol failure (the episode
ended without a passing pool), 64 usage error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path
from typing import Any, Sequence

from . import bench
from .control import Mode
from .memory import Budgets
from .protocol import load_requirements, observation_from_residual

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_PROTOCOL = 2
EXIT_USAGE = 64

MODE_TOKENS = [m.value for m in Mode]
DIFFICULTIES = ["easy", "medium", "hard"]


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # type: ignore[override]
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _budgets(text: str) -> Budgets:
    try:
        return Budgets.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _seeds(text: str) -> tuple[int, ...]:
    try:
        return bench.parse_seeds(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _positive(text: str) -> int:
    try:
        n = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if n < 1:
        raise argparse.ArgumentTypeError("must be at least 1")
    return n


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="protoloop", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true", help="log episode progress to stderr")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp: argparse.ArgumentParser) -> None:
        sp.add_argument("--difficulty", choices=DIFFICULTIES)
        sp.add_argument("--budgets", type=_budgets, metavar="Kd,Wd,Kc,Bs,Bd,Bc")
        sp.add_argument("--out", type=Path, metavar="DIR")
        sp.add_argument("--max-iterations", type=_positive)
        sp.add_argument("--requirements", type=Path, metavar="JSON", help="requirement config replacing the KIT defaults")

    run = sub.add_parser("run", help="run one episode")
    run.add_argument("--seed", type=int, default=1)
    run.add_argument("--mode", choices=MODE_TOKENS, default=Mode.CACM.value)
    common(run)

    for name, text in (
        ("bench", "mode sweep with summary and cutoff tables"),
        ("sensitivity", "CACM under the five budget settings"),
        ("memcurve", "planner-input length per iteration, CACM vs raw history"),
    ):
        sp = sub.add_parser(name, help=text)
        sp.add_argument("--config", type=Path, metavar="JSON", help="benchmark config; flags override it")
        sp.add_argument("--seeds", type=_seeds, metavar="A..B")
        sp.add_argument("--seed", type=int, help="single seed")
        if name == "bench":
            sp.add_argument("--mode", choices=MODE_TOKENS, action="append", help="repeatable; default all modes")
        sp.add_argument("--jobs", type=_positive)
        if name == "memcurve":
            sp.add_argument(
                "--no-early-stop", action="store_true", help="keep iterating after a passing pool (fixed-length curves)"
            )
        common(sp)
    return p


def config_from_args(args: argparse.Namespace) -> bench.BenchmarkConfig:
    doc: dict[str, Any] = {}
    if getattr(args, "config", None) is not None:
        try:
            doc = json.loads(args.config.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}") from None
        if not isinstance(doc, dict):
            raise UsageError("config must be a JSON object")
    try:
        cfg = bench.BenchmarkConfig.from_dict(doc)
    except (ValueError, TypeError, OSError) as exc:
        raise UsageError(f"invalid config: {exc}") from None
    over: dict[str, Any] = {}
    if getattr(args, "seeds", None):
        over["seeds"] = args.seeds
    if getattr(args, "seed", None) is not None:
        over["seeds"] = (args.seed,)
    if getattr(args, "mode", None):
        modes = args.mode if isinstance(args.mode, list) else [args.mode]
        over["modes"] = tuple(dict.fromkeys(Mode(m) for m in modes))
    for key in ("difficulty", "budgets", "out", "jobs", "max_iterations"):
        v = getattr(args, key, None)
        if v is not None:
            over[key] = v
    if args.requirements is not None:
        try:
            over["requirements"] = json.loads(args.requirements.read_text())
            load_requirements(over["requirements"])
        except (OSError, json.JSONDecodeError, ValueError) as exc:
            raise UsageError(f"invalid requirements {args.requirements}: {exc}") from None
    try:
        return replace(cfg, **over)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


# ---------------------------------------------------------------- run

def _run_summary(ep: bench.EpisodeLog) -> str:
    meta = ep.meta
    lines = [
        f"seed {meta['seed']}  difficulty {meta['difficulty']}  mode {meta['mode']}",
        f"success: {meta['success']}",
        f"iterations: {meta['iterations_used']}",
    ]
    if meta.get("error"):
        lines.append(f"error: {meta['error']}")
    pid = meta.get("returned_pool_id")
    if pid is not None:
        rec = next(r for r in ep.records if r["pool_id"] == pid)
        reqs = ep.requirements
        lines.append(f"returned pool: {pid} ({ep.pool_size(pid)} molecules)")
        for req in reqs:
            res = rec["residuals"][req.label]
            obs = observation_from_residual(res, req)
            mark = "fail" if req.label in rec["failed_labels"] else "ok"
            lines.append(
                f"  {req.label:<12} {obs:>10.4f} {req.comparison.symbol:>2} {req.threshold:<8g} residual {res:+.4f}  {mark}"
            )
    lines.append("per-iteration planner-input characters:")
    for r in ep.records:
        ch = r["channel_chars"]
        lines.append(
            f"  {r['iteration']:>2} {r['action_kind']:<10} {r['pool_id']:<7} state {r['state_chars']:>6}"
            f"  static {ch['static']:>5} dynamic {ch['dynamic']:>5} corrective {ch['corrective']:>5}"
            f"  {'pass' if r['passed'] else 'fail'}"
        )
    return "\n".join(lines) + "\n"


def cmd_run(args: argparse.Namespace) -> int:
    cfg = config_from_args(args)
    spec = bench.EpisodeSpec(
        args.seed, cfg.difficulty, args.mode, cfg.budgets.as_tuple(), cfg.max_iterations, True, cfg.requirements
    )
    out = bench.run_spec(spec)
    path = bench.write_episode(cfg.out / "logs", out)
    ep = bench.load_episode(path)
    summary = _run_summary(ep)
    path.with_suffix(".summary.txt").write_text(summary)
    sys.stdout.write(summary)
    sys.stdout.write(f"trajectory: {path}\n")
    if ep.meta.get("error"):
        return EXIT_ERROR
    return EXIT_OK if ep.meta["success"] else EXIT_PROTOCOL


def cmd_bench(args: argparse.Namespace) -> int:
    files = bench.run_bench(config_from_args(args))
    sys.stdout.write(files["bench.txt"])
    return EXIT_OK


def cmd_sensitivity(args: argparse.Namespace) -> int:
    files = bench.run_sensitivity(config_from_args(args))
    sys.stdout.write(files["sensitivity.txt"])
    return EXIT_OK


def cmd_memcurve(args: argparse.Namespace) -> int:
    files = bench.run_memcurve(config_from_args(args), stop_on_success=not args.no_early_stop)
    sys.stdout.write(files["memcurve.txt"])
    return EXIT_OK


COMMANDS = {"run": cmd_run, "bench": cmd_bench, "sensitivity": cmd_sensitivity, "memcurve": cmd_memcurve}


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        sys.stderr.write(f"protoloop: error: {exc}\n")
        return EXIT_USAGE
    except Exception as exc:  # noqa: BLE001
        sys.stderr.write(f"protoloop: {type(exc).__name__}: {exc}\n")
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
