"""Rule-based corrective diagnosis of a failed audit.

Given the residuals of a failed pool, produce a ``CorrectiveRecord``: which
failure family dominates, how severe the violation is, a templated repair
hint and the action the planner should lean towards next.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Sequence

from .protocol import (
    AuditReport,
    CandidatePool,
    MetricField,
    Molecule,
    ProtocolError,
    Requirement,
    RequirementSet,
    ResidualVector,
    compliant_mask,
    molecule_values,
)

# a strict comparison failing exactly at its threshold still counts as a violation
BOUNDARY_EPS = 1e-9
DOMINANCE_SHARE = 0.5


class NoViolation(ProtocolError):
    pass


class PassedAuditNoDiagnosis(ProtocolError):
    pass


class FailureFamily(Enum):
    SIZE_DEFICIT = "size deficit"
    DIVERSITY_COLLAPSE = "diversity collapse"
    BINDING_BOTTLENECK = "binding bottleneck"
    DEVELOPABILITY_VIOLATION = "developability violation"
    NOVELTY_DEFICIT = "novelty deficit"
    MIXED = "mixed"


FAMILY_ORDER = tuple(FailureFamily)


class ActionBias(Enum):
    GENERATE = "Generate"
    OPTIMIZE = "Optimize"
    CODE_SCREEN = "CodeScreen"


FIELD_FAMILY = {
    MetricField.POOL_SIZE: FailureFamily.SIZE_DEFICIT,
    MetricField.DIVERSITY: FailureFamily.DIVERSITY_COLLAPSE,
    MetricField.DOCKING: FailureFamily.BINDING_BOTTLENECK,
    MetricField.QED: FailureFamily.DEVELOPABILITY_VIOLATION,
    MetricField.SAS: FailureFamily.DEVELOPABILITY_VIOLATION,
    MetricField.LIPINSKI: FailureFamily.DEVELOPABILITY_VIOLATION,
    MetricField.NOVELTY: FailureFamily.NOVELTY_DEFICIT,
}

FAMILY_BIAS = {
    FailureFamily.SIZE_DEFICIT: ActionBias.GENERATE,
    FailureFamily.NOVELTY_DEFICIT: ActionBias.GENERATE,
    FailureFamily.DIVERSITY_COLLAPSE: ActionBias.GENERATE,
    FailureFamily.BINDING_BOTTLENECK: ActionBias.OPTIMIZE,
    FailureFamily.DEVELOPABILITY_VIOLATION: ActionBias.OPTIMIZE,
    FailureFamily.MIXED: ActionBias.OPTIMIZE,
}


@dataclass(frozen=True)
class CorrectiveRecord:
    iteration: int
    pool_id: str
    family: FailureFamily
    severity: float
    failed_labels: tuple[str, ...]
    focus: str
    rationale: str
    repair_hint: str
    bias: ActionBias

    def __post_init__(self) -> None:
        if not self.failed_labels:
            raise ValueError("corrective records exist only for failed audits")
        if not self.severity > 0:
            raise ValueError("severity must be positive")

    @property
    def content_key(self) -> tuple:
        return (self.family, self.failed_labels, self.repair_hint)


def _check_aligned(residuals: ResidualVector, reqs: RequirementSet) -> None:
    if residuals.labels != tuple(r.label for r in reqs):
        raise ValueError("residual vector is not aligned with the requirement set")


def _scale(req: Requirement) -> float:
    return max(abs(req.threshold), 1.0)


def violation_weights(residuals: ResidualVector, reqs: RequirementSet) -> list[tuple[Requirement, float]]:
    """Normalized severity contribution of every violated requirement, in order."""
    _check_aligned(residuals, reqs)
    out = []
    for req, res in zip(reqs, residuals.values):
        violated = res < 0 or (res == 0 and req.comparison.strict)
        if violated:
            out.append((req, max(-res, BOUNDARY_EPS) / _scale(req)))
    return out


def severity(residuals: ResidualVector, reqs: RequirementSet) -> float:
    total = 0.0
    for _, w in violation_weights(residuals, reqs):
        total += w
    return total


def family_sums(residuals: ResidualVector, reqs: RequirementSet) -> dict[FailureFamily, float]:
    sums: dict[FailureFamily, float] = {}
    for req, w in violation_weights(residuals, reqs):
        fam = FIELD_FAMILY.get(req.field)
        if fam is not None:
            sums[fam] = sums.get(fam, 0.0) + w
    return sums


def classify_family(residuals: ResidualVector, reqs: RequirementSet) -> FailureFamily:
    weights = violation_weights(residuals, reqs)
    if not weights:
        raise NoViolation("no requirement is violated")
    total = 0.0
    for _, w in weights:
        total += w
    sums = family_sums(residuals, reqs)
    best = None
    for fam in FAMILY_ORDER:
        if fam in sums and (best is None or sums[fam] > sums[best]):
            best = fam
    # custom-field violations count towards the total but belong to no family
    if best is not None and sums[best] / total >= DOMINANCE_SHARE:
        return best
    return FailureFamily.MIXED


def _fmt(x: float) -> str:
    return f"{x:.3f}"


def dominant_molecule_field(residuals: ResidualVector, reqs: RequirementSet) -> Requirement | None:
    """The per-molecule requirement with the largest normalized violation."""
    best: tuple[Requirement, float] | None = None
    for req, w in violation_weights(residuals, reqs):
        if req.per_molecule and (best is None or w > best[1]):
            best = (req, w)
    return best[0] if best else None


def diagnose(
    reqs: RequirementSet,
    pool: CandidatePool,
    report: AuditReport,
    iteration: int,
    reference: Sequence[Molecule] | None = None,
) -> CorrectiveRecord:
    if report.passed:
        raise PassedAuditNoDiagnosis(f"pool {pool.id} passed the audit")
    res = report.residuals
    family = classify_family(res, reqs)
    sev = severity(res, reqs)
    need = reqs.required_size()
    n_ok = sum(compliant_mask(pool, reqs, reference)) if pool.molecules else 0
    focus_req = dominant_molecule_field(res, reqs)
    focus = focus_req.property_name if focus_req else MetricField.DOCKING.value
    bias = FAMILY_BIAS[family]

    filters = ", ".join(r.label for r in reqs.per_molecule)
    if family is FailureFamily.BINDING_BOTTLENECK:
        dock = reqs.first(MetricField.DOCKING)
        worst = report.observation(dock.label) if dock else float("nan")
        if n_ok >= need:
            bias = ActionBias.CODE_SCREEN
            focus = dock.property_name if dock else focus
            hint = (
                f"the current pool already contains {n_ok} molecules that satisfy all per-molecule "
                f"thresholds; filter by {filters} constraints, then construct a diverse subset "
                f"of at least {need} molecules."
            )
        else:
            focus = dock.property_name if dock else focus
            hint = (
                f"only {n_ok} molecules satisfy all per-molecule thresholds (need {need}); "
                f"optimize toward docking, worst {_fmt(worst)} against {_fmt(dock.threshold) if dock else '?'}."
            )
        rationale = "worst-case docking dominates the protocol gap."
    elif family is FailureFamily.SIZE_DEFICIT:
        hint = f"pool holds {len(pool)} molecules but at least {need} are required; generate new candidates."
        rationale = "too few molecules in the returned pool."
    elif family is FailureFamily.DIVERSITY_COLLAPSE:
        div = reqs.first(MetricField.DIVERSITY)
        hint = (
            f"pool diversity {_fmt(report.observation(div.label))} misses {_fmt(div.threshold)}; "
            f"generate fresh candidates to widen coverage."
        )
        rationale = "candidates are too similar to each other."
    elif family is FailureFamily.NOVELTY_DEFICIT:
        nov = reqs.first(MetricField.NOVELTY)
        hint = (
            f"minimum novelty {_fmt(report.observation(nov.label))} misses {_fmt(nov.threshold)}; "
            f"generate candidates further from the reference library."
        )
        rationale = "some molecules are too close to known references."
    elif family is FailureFamily.DEVELOPABILITY_VIOLATION:
        worst = report.observation(focus_req.label)
        hint = (
            f"worst {focus_req.label} {_fmt(worst)} violates {focus_req.comparison.symbol} "
            f"{_fmt(focus_req.threshold)}; optimize toward {focus}."
        )
        rationale = "per-molecule developability properties fail on the weakest molecules."
    else:
        fams = sorted(
            (f.value for f in family_sums(res, reqs)), key=lambda v: [f.value for f in FAMILY_ORDER].index(v)
        )
        worst = f"worst {focus_req.label} {_fmt(report.observation(focus_req.label))}; " if focus_req else ""
        hint = (
            f"violations spread over {', '.join(fams) or 'custom fields'}; {worst}"
            f"{n_ok} molecules satisfy all per-molecule thresholds (need {need}); optimize toward {focus}."
        )
        rationale = "no single failure family dominates."
    return CorrectiveRecord(
        iteration=iteration,
        pool_id=pool.id,
        family=family,
        severity=sev,
        failed_labels=report.failed_labels,
        focus=focus,
        rationale=rationale,
        repair_hint=hint,
        bias=bias,
    )

