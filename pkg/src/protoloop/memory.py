"""Three-channel planner memory.

Static memory holds the task and pocket description and never changes
within an episode. Dynamic memory holds ranked pool summaries plus a short
window of recent actions. Corrective memory holds diagnosed failures. Each
channel is selected under a count budget, rendered with a fixed template,
truncated under a character budget, and the three are concatenated into
the planner-facing agent state.

All updates return new values; nothing is mutated in place.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Mapping, Sequence

from .diagnosis import ActionBias, CorrectiveRecord
from .protocol import (
    AggregationKind,
    CandidatePool,
    Comparison,
    MetricField,
    Molecule,
    Requirement,
    RequirementSet,
    diversity,
    molecule_values,
)

TRUNCATION_MARKER = "[truncated]"
MIN_BUDGET = 64
LABELS = ("== STATIC ==", "== DYNAMIC ==", "== CORRECTIVE ==")
# three label lines plus the newline that ends each of them and two channel separators
LABEL_OVERHEAD = sum(len(lab) + 1 for lab in LABELS) + 2


class BudgetTooSmall(ValueError):
    pass


@dataclass(frozen=True)
class Budgets:
    K_d: int = 4
    W_d: int = 3
    K_c: int = 3
    B_s: int = 1400
    B_d: int = 1800
    B_c: int = 1200

    def __post_init__(self) -> None:
        for name in ("K_d", "W_d", "K_c", "B_s", "B_d", "B_c"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"{name} must be a positive integer")

    @classmethod
    def parse(cls, text: str) -> "Budgets":
        """Parse ``"Kd,Wd,Kc,Bs,Bd,Bc"``."""
        parts = [p.strip() for p in text.split(",")]
        if len(parts) != 6:
            raise ValueError("budgets need six comma-separated integers: Kd,Wd,Kc,Bs,Bd,Bc")
        return cls(*(int(p) for p in parts))

    def as_tuple(self) -> tuple[int, ...]:
        return (self.K_d, self.W_d, self.K_c, self.B_s, self.B_d, self.B_c)

    @property
    def char_bound(self) -> int:
        return self.B_s + self.B_d + self.B_c + LABEL_OVERHEAD


# ---------------------------------------------------------------- static

@dataclass(frozen=True)
class StaticMemory:
    target_id: str
    requirements: RequirementSet
    pocket: tuple[tuple[str, Any], ...] = ()


def build_static(target_id: str, requirements: RequirementSet, pocket: Mapping[str, Any] | None = None) -> StaticMemory:
    if not target_id:
        raise ValueError("target id is required")
    if requirements is None or len(requirements) == 0:
        raise ValueError("requirement set is required")
    frozen = tuple((k, _freeze(v)) for k, v in (pocket or {}).items())
    return StaticMemory(target_id, requirements, frozen)


def _freeze(v: Any) -> Any:
    if isinstance(v, (list, tuple)):
        return tuple(_freeze(x) for x in v)
    return v


# ---------------------------------------------------------------- dynamic

@dataclass(frozen=True)
class PoolSummary:
    pool_id: str
    iteration: int
    size: int
    diversity: float
    worst_docking: float
    min_novelty: float
    min_qed: float
    max_sas: float
    min_lipinski: float
    quality_score: float

    def indicators(self) -> dict[MetricField, float]:
        return {
            MetricField.POOL_SIZE: float(self.size),
            MetricField.DIVERSITY: self.diversity,
            MetricField.NOVELTY: self.min_novelty,
            MetricField.QED: self.min_qed,
            MetricField.LIPINSKI: self.min_lipinski,
            MetricField.DOCKING: self.worst_docking,
            MetricField.SAS: self.max_sas,
        }


@dataclass(frozen=True)
class ActionRecord:
    iteration: int
    kind: ActionBias
    pool_id: str
    passed: bool


@dataclass(frozen=True)
class DynamicMemory:
    pools: tuple[PoolSummary, ...] = ()
    actions: tuple[ActionRecord, ...] = ()


@dataclass(frozen=True)
class CorrectiveMemory:
    records: tuple[CorrectiveRecord, ...] = ()


QUALITY_FIELDS = (
    MetricField.POOL_SIZE,
    MetricField.DIVERSITY,
    MetricField.NOVELTY,
    MetricField.QED,
    MetricField.LIPINSKI,
    MetricField.DOCKING,
    MetricField.SAS,
)


def _clip(x: float) -> float:
    return 0.0 if x < 0.0 else 1.0 if x > 1.0 else x


def satisfaction_ratio(value: float, req: Requirement) -> float:
    """How far ``value`` goes towards ``req``'s threshold, clipped to [0, 1].

    Exactly at the threshold the ratio is 1. Ratios are taken so that both
    signs of threshold orient correctly (docking thresholds are negative).
    """
    b = req.threshold
    if b == 0.0:
        b_eff = 1.0
        return _clip(1.0 + value / b_eff) if req.comparison.larger_is_better else _clip(1.0 - value / b_eff)
    if req.comparison.larger_is_better:
        if b > 0:
            return _clip(value / b)
        return 1.0 if value >= 0 else _clip(b / value)
    if b > 0:
        return 1.0 if value <= 0 else _clip(b / value)
    return _clip(value / b)


def quality_score(stats: Mapping[MetricField, float], reqs: RequirementSet) -> float:
    """Equal-weight mean of the satisfaction ratios of the seven pool indicators.

    Indicators without a matching requirement are left out of the mean.
    """
    total = 0.0
    count = 0
    for f in QUALITY_FIELDS:
        req = reqs.first(f)
        if req is None or f not in stats:
            continue
        total += satisfaction_ratio(stats[f], req)
        count += 1
    return total / count if count else 0.0


def summarize_pool(
    pool: CandidatePool,
    reqs: RequirementSet,
    iteration: int,
    reference: Sequence[Molecule] | None = None,
) -> PoolSummary:
    """Pool statistics computed with the same aggregations as the audit."""

    def worst(f: MetricField, agg: AggregationKind) -> float:
        cmp = Comparison.GE if agg is AggregationKind.WORST_MIN else Comparison.LE
        probe = Requirement(
            f, AggregationKind.SET_FUNCTIONAL if f is MetricField.NOVELTY else agg, cmp, 0.0, f.value
        )
        vals = molecule_values(pool, probe, reference)
        return min(vals) if agg is AggregationKind.WORST_MIN else max(vals)

    stats = dict(
        size=len(pool),
        diversity=diversity(pool) if len(pool) >= 2 else 0.0,
        worst_docking=worst(MetricField.DOCKING, AggregationKind.WORST_MAX),
        min_novelty=worst(MetricField.NOVELTY, AggregationKind.WORST_MIN),
        min_qed=worst(MetricField.QED, AggregationKind.WORST_MIN),
        max_sas=worst(MetricField.SAS, AggregationKind.WORST_MAX),
        min_lipinski=worst(MetricField.LIPINSKI, AggregationKind.WORST_MIN),
    )
    partial = PoolSummary(pool.id, iteration, quality_score=0.0, **stats)
    return PoolSummary(
        pool.id, iteration, quality_score=quality_score(partial.indicators(), reqs), **stats
    )


def pool_rank_key(s: PoolSummary) -> tuple:
    return (-s.quality_score, -s.iteration)


def update_dynamic(
    prev: DynamicMemory,
    summary: PoolSummary,
    action: ActionRecord,
    budgets: Budgets,
    select: bool = True,
) -> DynamicMemory:
    """Append one pool summary and one action, then re-select.

    Pools are ranked by (quality desc, iteration desc) and cut to ``K_d``;
    actions keep the ``W_d`` most recent. With ``select=False`` every pool is
    kept (still ranked).
    """
    pools = sorted(prev.pools + (summary,), key=pool_rank_key)
    if select:
        pools = pools[: budgets.K_d]
    actions = sorted(prev.actions + (action,), key=lambda a: a.iteration)[-budgets.W_d :]
    return DynamicMemory(tuple(pools), tuple(actions))


def corrective_rank_key(r: CorrectiveRecord) -> tuple:
    return (-r.severity, -r.iteration)


def update_corrective(
    prev: CorrectiveMemory,
    record: CorrectiveRecord,
    budgets: Budgets,
    select: bool = True,
) -> CorrectiveMemory:
    """Write back one diagnosed failure.

    Records with identical (family, failed labels, repair hint) are merged,
    keeping the (severity, iteration)-greater copy; the survivors are ranked
    by (severity desc, iteration desc) and cut to ``K_c``. With
    ``select=False`` records are only appended, oldest first.
    """
    if not select:
        return CorrectiveMemory(prev.records + (record,))
    winners: dict[tuple, CorrectiveRecord] = {}
    for r in prev.records + (record,):
        key = r.content_key
        cur = winners.get(key)
        if cur is None or (r.severity, r.iteration) > (cur.severity, cur.iteration):
            winners[key] = r
    ranked = sorted(winners.values(), key=corrective_rank_key)
    return CorrectiveMemory(tuple(ranked[: budgets.K_c]))


# ---------------------------------------------------------------- rendering

_FIELD_NAMES = {
    MetricField.DOCKING: "Vina score",
    MetricField.NOVELTY: "Novelty",
    MetricField.DIVERSITY: "Diversity",
    MetricField.QED: "QED",
    MetricField.SAS: "SAScore",
    MetricField.LIPINSKI: "Lipinski",
}
_CMP_WORDS = {
    Comparison.GE: "at least",
    Comparison.GT: "greater than",
    Comparison.LE: "at most",
    Comparison.LT: "lower than",
}


def _num(x: float) -> str:
    return f"{x:.2f}" if x != int(x) else str(int(x))


def requirement_sentence(req: Requirement) -> str:
    if req.field is MetricField.POOL_SIZE:
        return f"Pool size must be {_CMP_WORDS[req.comparison]} {_num(req.threshold)} molecules."
    name = _FIELD_NAMES.get(req.field, req.property_name)
    return f"{name} must be {_CMP_WORDS[req.comparison]} {_num(req.threshold)}."


def requirement_condition(req: Requirement) -> str:
    name = _FIELD_NAMES.get(req.field, "Pool size" if req.field is MetricField.POOL_SIZE else req.property_name)
    return f"{name} {req.comparison.symbol} {_num(req.threshold)}"


def _vec(v: Any) -> str:
    return "[" + ", ".join(f"{x:.3f}" if isinstance(x, float) else str(x) for x in v) + "]"


def _pocket_lines(pocket: Sequence[tuple[str, Any]]) -> list[str]:
    p = dict(pocket)
    lines: list[str] = []
    counts = [
        f"{name}: {p.pop(key)}"
        for key, name in (("atom_count", "Atom count"), ("residue_count", "residue count"), ("chain_count", "chain count"))
        if key in p
    ]
    if counts:
        lines.append("; ".join(counts) + ".")
    if "box_size" in p:
        lines.append(f"Bounding-box size: {_vec(p.pop('box_size'))}.")
    if "center" in p:
        lines.append(f"Pocket center: {_vec(p.pop('center'))}.")
    if "top_residues" in p:
        lines.append("Top residue types: " + ", ".join(f"{n}({c})" for n, c in p.pop("top_residues")) + ".")
    ratios = [
        f"{key.split('_')[0]} ratio: {p.pop(key):.3f}"
        for key in ("hydrophobic_ratio", "positive_ratio", "negative_ratio", "aromatic_ratio")
        if key in p
    ]
    if ratios:
        lines.append("; ".join(ratios).capitalize() + ".")
    for key, v in p.items():
        lines.append(f"{key}: {_vec(v) if isinstance(v, tuple) else v}.")
    return lines


def static_lines(mem: StaticMemory) -> list[str]:
    lines = [f"Target: {mem.target_id}", "Task requirements:"]
    lines += [requirement_sentence(r) for r in mem.requirements]
    pocket = _pocket_lines(mem.pocket)
    if pocket:
        lines.append("Pocket summary:")
        lines += pocket
    return lines


def pool_line(s: PoolSummary) -> str:
    return (
        f"{s.pool_id}: score {s.quality_score:.4f}; size {s.size}; diversity {s.diversity:.4f}; "
        f"worst Vina {s.worst_docking:.3f}; minimum novelty {s.min_novelty:.3f}; "
        f"minimum QED {s.min_qed:.3f}; maximum SAS {s.max_sas:.3f}; minimum Lipinski {s.min_lipinski:.3f}."
    )


def action_line(a: ActionRecord) -> str:
    return f"Iteration {a.iteration}: {a.kind.value} -> {a.pool_id}; strict protocol pass = {a.passed}."


def dynamic_lines(mem: DynamicMemory) -> list[str]:
    lines = ["Current selected molecule pools:"]
    lines += [pool_line(s) for s in mem.pools] or ["(none yet)"]
    lines.append("Recent actions:")
    lines += [action_line(a) for a in mem.actions] or ["(none yet)"]
    return lines


def corrective_entry_lines(r: CorrectiveRecord, reqs: RequirementSet | None = None) -> list[str]:
    if reqs is not None:
        failed = ", ".join(requirement_condition(reqs[lab]) for lab in r.failed_labels)
    else:
        failed = ", ".join(r.failed_labels)
    return [
        f"Iteration {r.iteration}; pool {r.pool_id}; failure family: {r.family.value}; "
        f"severity: {r.severity:.4f}; focus: {r.focus}; recommended bias: {r.bias.value}.",
        f"Failed requirements: {failed}.",
        f"Rationale: {r.rationale}",
        f"Repair hint: {r.repair_hint}",
    ]


def corrective_lines(mem: CorrectiveMemory, reqs: RequirementSet | None = None) -> list[str]:
    lines = ["Selected corrective entries:"]
    if not mem.records:
        lines.append("(none yet)")
    # newest first, so that character truncation drops the oldest guidance
    for r in sorted(mem.records, key=lambda r: -r.iteration):
        lines += corrective_entry_lines(r, reqs)
    return lines


def truncate_lines(lines: Sequence[str], budget: int | None) -> str:
    """Join lines; if over budget, keep whole leading lines and append the marker."""
    text = "\n".join(lines)
    if budget is None or len(text) <= budget:
        return text
    if budget < MIN_BUDGET:
        raise BudgetTooSmall(f"budget {budget} is below the {MIN_BUDGET}-character floor")
    room = budget - len(TRUNCATION_MARKER) - 1
    kept: list[str] = []
    used = -1
    for line in lines:
        if used + 1 + len(line) > room:
            break
        kept.append(line)
        used += 1 + len(line)
    return "\n".join(kept + [TRUNCATION_MARKER])


def render_channel(content: Any, budget: int | None, template: str, reqs: RequirementSet | None = None) -> str:
    """Render one memory channel with its fixed template under ``budget`` characters.

    ``template`` is one of ``"static"``, ``"dynamic"``, ``"corrective"``;
    ``budget=None`` disables truncation.
    """
    if budget is not None and budget < MIN_BUDGET:
        raise BudgetTooSmall(f"budget {budget} is below the {MIN_BUDGET}-character floor")
    if template == "static":
        lines = static_lines(content)
    elif template == "dynamic":
        lines = dynamic_lines(content)
    elif template == "corrective":
        lines = corrective_lines(content, reqs)
    elif template == "lines":
        lines = list(content)
    else:
        raise ValueError(f"unknown template {template!r}")
    return truncate_lines(lines, budget)


@dataclass(frozen=True)
class AgentState:
    static_text: str
    dynamic_text: str
    corrective_text: str
    text: str = field(repr=False)
    total_chars: int


def adapt(static_text: str, dynamic_text: str, corrective_text: str) -> AgentState:
    s_lab, d_lab, c_lab = LABELS
    text = f"{s_lab}\n{static_text}\n{d_lab}\n{dynamic_text}\n{c_lab}\n{corrective_text}"
    return AgentState(static_text, dynamic_text, corrective_text, text, len(text))
