"""The closed loop: plan, execute, audit, diagnose, write back, adapt.

One episode is a strict chain of iterations. Each iteration the planner
reads the current planner-facing text, the executor turns the chosen action
into a fresh candidate pool, and the pool is audited. A passing pool ends
the episode immediately; a failing one is diagnosed and written back to
memory according to the configured mode.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Any, Callable, Mapping, Protocol, Sequence

from .diagnosis import ActionBias, CorrectiveRecord, diagnose
from .memory import (
    ActionRecord,
    AgentState,
    Budgets,
    CorrectiveMemory,
    DynamicMemory,
    PoolSummary,
    adapt,
    build_static,
    corrective_entry_lines,
    pool_rank_key,
    render_channel,
    requirement_condition,
    summarize_pool,
    update_corrective,
    update_dynamic,
)
from .protocol import AuditReport, CandidatePool, Molecule, ProtocolError, RequirementSet, gate
from .rng import derive_seed

log = logging.getLogger(__name__)

BLOCK_SEPARATOR = "--- Iteration {k} ---"


class ExecutorFailure(RuntimeError):
    """Raised by an executor that cannot produce a pool; aborts the episode."""


class InvalidAction(ValueError):
    pass


class Mode(Enum):
    CACM = "cacm"
    RAW = "raw"
    REPAIR_ONLY = "repair-only"
    NO_CORR_SELECT = "no-corr-select"
    NO_DYN_COMPRESS = "no-dyn-compress"

    @property
    def structured(self) -> bool:
        """Modes that build the three-channel agent state."""
        return self in (Mode.CACM, Mode.NO_CORR_SELECT, Mode.NO_DYN_COMPRESS)


@dataclass(frozen=True)
class Action:
    kind: ActionBias
    pools: tuple[str, ...] = ()
    params: Mapping[str, Any] = field(default_factory=dict)
    reason: str = ""

    def validate(self, registry: Mapping[str, CandidatePool]) -> None:
        if self.kind is ActionBias.GENERATE:
            if self.pools:
                raise InvalidAction("Generate takes no input pools")
            return
        if not self.pools:
            raise InvalidAction(f"{self.kind.value} needs at least one input pool")
        missing = [p for p in self.pools if p not in registry]
        if missing:
            raise InvalidAction(f"unknown pools {missing}")

    def describe(self) -> str:
        text = self.kind.value
        if self.pools:
            text += " on " + ", ".join(self.pools)
        if "objective" in self.params:
            text += f" with {self.params['objective']} objective"
        if "n" in self.params and self.kind is ActionBias.CODE_SCREEN:
            text += f" (subset of {self.params['n']})"
        return text


class Planner(Protocol):
    def __call__(self, state_text: str, registry: Mapping[str, CandidatePool], seed: int) -> Action: ...


class Executor(Protocol):
    def __call__(
        self, action: Action, registry: Mapping[str, CandidatePool], context: Any, seed: int
    ) -> CandidatePool: ...


@dataclass(frozen=True)
class LoopConfig:
    max_iterations: int = 10
    budgets: Budgets = field(default_factory=Budgets)
    mode: Mode = Mode.CACM
    seed: int = 0
    # measurement-only switch: keep iterating after a pass (memory-growth curves)
    stop_on_success: bool = True

    def __post_init__(self) -> None:
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be positive")


@dataclass(frozen=True)
class IterationRecord:
    iteration: int
    action: Action
    pool_id: str
    report: AuditReport
    summary: PoolSummary
    corrective: CorrectiveRecord | None
    state_chars: int
    channel_chars: Mapping[str, int]
    corrective_after: tuple[CorrectiveRecord, ...] = ()
    dynamic_pools_after: tuple[str, ...] = ()

    def to_log(self) -> dict[str, Any]:
        """The line-delimited JSON record for the trajectory log."""
        rec: dict[str, Any] = {
            "iteration": self.iteration,
            "action_kind": self.action.kind.value,
            "pool_id": self.pool_id,
            "passed": self.report.passed,
            "failed_labels": list(self.report.failed_labels),
            "residuals": dict(self.report.residuals.items()),
        }
        if self.corrective is not None:
            rec["severity"] = self.corrective.severity
            rec["family"] = self.corrective.family.value
            rec["bias"] = self.corrective.bias.value
        rec["state_chars"] = self.state_chars
        rec["channel_chars"] = dict(self.channel_chars)
        return rec


@dataclass
class EpisodeResult:
    success: bool
    returned_pool: CandidatePool | None
    iterations_used: int
    trajectory: list[IterationRecord]
    error: str | None = None

    def log_lines(self) -> list[str]:
        return [json.dumps(r.to_log(), separators=(",", ":")) for r in self.trajectory]


# ---------------------------------------------------------------- raw history

def task_restatement(target_id: str, reqs: RequirementSet) -> str:
    conds = "; ".join(requirement_condition(r) for r in reqs)
    return (
        f"Initial task: design a set of molecules for {target_id}. Requirements: {conds}. "
        f"Available actions: Generate, Optimize, CodeScreen."
    )


def raw_history_append(
    history: str,
    record: IterationRecord,
    reqs: RequirementSet,
    include_diagnosis: bool = False,
) -> str:
    """Append one iteration block to the planner-facing raw history. Never truncates."""
    parts = [BLOCK_SEPARATOR.format(k=record.iteration)]
    parts.append(f"Planner response: {record.action.reason or 'no rationale given'}")
    parts.append(f"Action: {record.action.describe()} -> {record.pool_id}.")
    if record.report.passed:
        parts.append(f"Evaluation after iteration {record.iteration}: all requirements satisfied.")
    else:
        failed = ", ".join(requirement_condition(reqs[lab]) for lab in record.report.failed_labels)
        parts.append(
            f"Evaluation after iteration {record.iteration}: requirements not satisfied. "
            f"Failed constraints: {failed}. Pool size {record.summary.size}."
        )
    if include_diagnosis and record.corrective is not None:
        parts.append("Diagnosis: " + " ".join(corrective_entry_lines(record.corrective, reqs)))
    block = "\n".join(parts)
    return f"{history}\n{block}" if history else block


# ---------------------------------------------------------------- loop

def _best_pool(trajectory: Sequence[IterationRecord], registry: Mapping[str, CandidatePool]) -> CandidatePool | None:
    if not trajectory:
        return None
    best = min(trajectory, key=lambda r: pool_rank_key(r.summary))
    return registry[best.pool_id]


def run_episode(
    context: Any,
    reqs: RequirementSet,
    planner: Planner | Callable[..., Action],
    executor: Executor | Callable[..., CandidatePool],
    config: LoopConfig,
) -> EpisodeResult:
    """Run one closed-loop episode.

    ``context`` must expose ``target_id`` and ``pocket`` and may expose
    ``reference`` (the novelty reference library).
    """
    mode = config.mode
    budgets = config.budgets
    reference: Sequence[Molecule] | None = getattr(context, "reference", None)
    static = build_static(context.target_id, reqs, getattr(context, "pocket", None))
    static_text = render_channel(static, budgets.B_s, "static")
    dynamic = DynamicMemory()
    corrective = CorrectiveMemory()
    history = task_restatement(context.target_id, reqs)
    registry: dict[str, CandidatePool] = {}
    trajectory: list[IterationRecord] = []

    dyn_budget = None if mode is Mode.NO_DYN_COMPRESS else budgets.B_d

    for k in range(1, config.max_iterations + 1):
        if mode.structured:
            state: AgentState = adapt(
                static_text,
                render_channel(dynamic, dyn_budget, "dynamic"),
                render_channel(corrective, budgets.B_c, "corrective", reqs),
            )
            planner_text = state.text
            channel_chars = {
                "static": len(state.static_text),
                "dynamic": len(state.dynamic_text),
                "corrective": len(state.corrective_text),
            }
        else:
            planner_text = history
            channel_chars = {"static": 0, "dynamic": 0, "corrective": 0}

        step_seed = derive_seed(config.seed, k)
        try:
            action = planner(planner_text, registry, step_seed)
            action.validate(registry)
            pool = executor(action, registry, context, derive_seed(step_seed, 1))
            if pool.id in registry:
                raise ExecutorFailure(f"executor reused pool id {pool.id}")
            if not pool.molecules:
                raise ExecutorFailure(f"executor returned an empty pool {pool.id}")
            pool = replace(pool, created_at_iteration=k)
            report = gate(pool, reqs, reference)
        except (ExecutorFailure, InvalidAction, ProtocolError) as exc:
            log.info("episode aborted at iteration %d: %s", k, exc)
            return EpisodeResult(False, _best_pool(trajectory, registry), len(trajectory), trajectory, str(exc))
        registry[pool.id] = pool

        summary = summarize_pool(pool, reqs, k, reference)
        record = None if report.passed else diagnose(reqs, pool, report, k, reference)

        if mode.structured:
            if record is not None:
                corrective = update_corrective(corrective, record, budgets, select=mode is not Mode.NO_CORR_SELECT)
            dynamic = update_dynamic(
                dynamic,
                summary,
                ActionRecord(k, action.kind, pool.id, report.passed),
                budgets,
                select=mode is not Mode.NO_DYN_COMPRESS,
            )

        it = IterationRecord(
            iteration=k,
            action=action,
            pool_id=pool.id,
            report=report,
            summary=summary,
            corrective=record,
            state_chars=len(planner_text),
            channel_chars=channel_chars,
            corrective_after=corrective.records,
            dynamic_pools_after=tuple(s.pool_id for s in dynamic.pools),
        )
        trajectory.append(it)
        if not mode.structured:
            history = raw_history_append(history, it, reqs, include_diagnosis=mode is Mode.REPAIR_ONLY)

        if report.passed and config.stop_on_success:
            return EpisodeResult(True, pool, k, trajectory)

    passing = [r for r in trajectory if r.report.passed]
    if passing:
        # only reachable with stop_on_success disabled
        return EpisodeResult(True, registry[passing[0].pool_id], passing[0].iteration, trajectory)
    return EpisodeResult(False, _best_pool(trajectory, registry), len(trajectory), trajectory)
