"""Deterministic returned-set audit.

A requirement is a ``(field, aggregation, comparison, threshold)`` tuple.
The audit turns a candidate pool into one observation per requirement,
a signed residual per requirement (negative means violated), and a single
pass/fail verdict that is the conjunction of all comparisons.

Everything here is a pure function of its arguments.
"""

from __future__ import annotations

import json
import math
import operator
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Callable, Iterable, Mapping, Sequence

from . import kernels


class ProtocolError(Exception):
    """Base class for audit errors."""


class MissingProperty(ProtocolError):
    def __init__(self, molecule_id: str, field_name: str) -> None:
        super().__init__(f"molecule {molecule_id!r} lacks property {field_name!r}")
        self.molecule_id = molecule_id
        self.field_name = field_name


class EmptyPool(ProtocolError):
    pass


class SingletonPool(ProtocolError):
    pass


class EmptyReference(ProtocolError):
    pass


class ConfigError(ProtocolError):
    """Malformed requirement document or invalid requirement."""


class MetricField(Enum):
    POOL_SIZE = "pool_size"
    DIVERSITY = "diversity"
    NOVELTY = "novelty"
    QED = "qed"
    SAS = "sas"
    LIPINSKI = "lipinski"
    DOCKING = "docking"
    CUSTOM = "custom"


class AggregationKind(Enum):
    CARDINALITY = "cardinality"
    SET_FUNCTIONAL = "set"
    WORST_MIN = "worst_min"
    WORST_MAX = "worst_max"


class Comparison(Enum):
    GE = "ge"
    GT = "gt"
    LE = "le"
    LT = "lt"

    @property
    def larger_is_better(self) -> bool:
        return self in (Comparison.GE, Comparison.GT)

    @property
    def strict(self) -> bool:
        return self in (Comparison.GT, Comparison.LT)

    @property
    def symbol(self) -> str:
        return _SYMBOLS[self]

    def holds(self, value: float, threshold: float) -> bool:
        return _OPS[self](value, threshold)


_OPS: dict[Comparison, Callable[[float, float], bool]] = {
    Comparison.GE: operator.ge,
    Comparison.GT: operator.gt,
    Comparison.LE: operator.le,
    Comparison.LT: operator.lt,
}
_SYMBOLS = {Comparison.GE: ">=", Comparison.GT: ">", Comparison.LE: "<=", Comparison.LT: "<"}

PER_MOLECULE_FIELDS = frozenset(
    {MetricField.QED, MetricField.SAS, MetricField.LIPINSKI, MetricField.DOCKING, MetricField.CUSTOM}
)
_LOWER_BOUNDED = frozenset({MetricField.QED, MetricField.LIPINSKI})
_UPPER_BOUNDED = frozenset({MetricField.SAS, MetricField.DOCKING})


def _pairing_ok(f: MetricField, agg: AggregationKind, cmp: Comparison) -> bool:
    if f is MetricField.POOL_SIZE:
        return agg is AggregationKind.CARDINALITY
    if f in (MetricField.DIVERSITY, MetricField.NOVELTY):
        return agg is AggregationKind.SET_FUNCTIONAL
    if agg is AggregationKind.WORST_MIN:
        return cmp.larger_is_better and (f in _LOWER_BOUNDED or f is MetricField.CUSTOM)
    if agg is AggregationKind.WORST_MAX:
        return not cmp.larger_is_better and (f in _UPPER_BOUNDED or f is MetricField.CUSTOM)
    return False


@dataclass(frozen=True)
class Requirement:
    field: MetricField
    aggregation: AggregationKind
    comparison: Comparison
    threshold: float
    label: str
    custom_name: str | None = None

    def __post_init__(self) -> None:
        if not math.isfinite(self.threshold):
            raise ConfigError(f"{self.label}: threshold must be finite")
        if not _pairing_ok(self.field, self.aggregation, self.comparison):
            raise ConfigError(
                f"{self.label}: {self.field.value}/{self.aggregation.value}/"
                f"{self.comparison.value} is not a valid pairing"
            )
        if (self.field is MetricField.CUSTOM) != bool(self.custom_name):
            raise ConfigError(f"{self.label}: custom_name is required exactly for custom fields")

    @property
    def property_name(self) -> str:
        """Molecule property key read by per-molecule aggregations."""
        return self.custom_name if self.field is MetricField.CUSTOM else self.field.value

    @property
    def per_molecule(self) -> bool:
        """True when the requirement constrains every molecule individually."""
        return self.field in PER_MOLECULE_FIELDS or self.field is MetricField.NOVELTY

    def satisfied_by(self, value: float) -> bool:
        return self.comparison.holds(value, self.threshold)

    def to_dict(self) -> dict[str, Any]:
        fld = f"custom:{self.custom_name}" if self.field is MetricField.CUSTOM else self.field.value
        return {
            "label": self.label,
            "field": fld,
            "agg": self.aggregation.value,
            "cmp": self.comparison.value,
            "threshold": self.threshold,
        }


@dataclass(frozen=True)
class RequirementSet:
    requirements: tuple[Requirement, ...]
    target: str = ""

    def __post_init__(self) -> None:
        if not self.requirements:
            raise ConfigError("requirement set is empty")
        labels = [r.label for r in self.requirements]
        if len(set(labels)) != len(labels):
            raise ConfigError("requirement labels must be unique")

    def __iter__(self):
        return iter(self.requirements)

    def __len__(self) -> int:
        return len(self.requirements)

    def __getitem__(self, label: str) -> Requirement:
        for r in self.requirements:
            if r.label == label:
                return r
        raise KeyError(label)

    def first(self, f: MetricField) -> Requirement | None:
        for r in self.requirements:
            if r.field is f:
                return r
        return None

    @property
    def per_molecule(self) -> tuple[Requirement, ...]:
        return tuple(r for r in self.requirements if r.per_molecule)

    def required_size(self) -> int:
        """Smallest pool size allowed by the lower-bound cardinality requirements (at least 1)."""
        n = 1
        for r in self.requirements:
            if r.field is MetricField.POOL_SIZE and r.comparison.larger_is_better:
                need = math.ceil(r.threshold) if r.comparison is Comparison.GE else math.floor(r.threshold) + 1
                n = max(n, need)
        return n

    def to_dict(self) -> dict[str, Any]:
        return {"target": self.target, "requirements": [r.to_dict() for r in self.requirements]}


def parse_requirement(doc: Mapping[str, Any], known_properties: Iterable[str] | None = None) -> Requirement:
    try:
        label = str(doc["label"])
        field_tok = str(doc["field"])
        agg_tok = str(doc["agg"])
        cmp_tok = str(doc["cmp"])
        threshold = float(doc["threshold"])
    except KeyError as exc:
        raise ConfigError(f"requirement missing key {exc.args[0]!r}") from None
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad requirement value: {exc}") from None
    custom = None
    if field_tok.startswith("custom:"):
        custom = field_tok.split(":", 1)[1]
        if not custom.isidentifier() or custom in {m.value for m in MetricField}:
            raise ConfigError(f"bad custom field name {custom!r}")
        if known_properties is not None and custom not in set(known_properties):
            raise ConfigError(f"custom field {custom!r} is not a registered property")
        fld = MetricField.CUSTOM
    else:
        try:
            fld = MetricField(field_tok)
        except ValueError:
            raise ConfigError(f"unknown field token {field_tok!r}") from None
        if fld is MetricField.CUSTOM:
            raise ConfigError("custom fields are written as 'custom:<name>'")
    try:
        agg = AggregationKind(agg_tok)
    except ValueError:
        raise ConfigError(f"unknown aggregation token {agg_tok!r}") from None
    try:
        cmp = Comparison(cmp_tok)
    except ValueError:
        raise ConfigError(f"unknown comparison token {cmp_tok!r}") from None
    return Requirement(fld, agg, cmp, threshold, label, custom)


def load_requirements(
    source: str | Path | Mapping[str, Any], known_properties: Iterable[str] | None = None
) -> RequirementSet:
    """Load a requirement set from a JSON file path or an already-parsed document."""
    if isinstance(source, Mapping):
        doc = source
    else:
        try:
            doc = json.loads(Path(source).read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON: {exc}") from None
    if not isinstance(doc, Mapping) or "requirements" not in doc:
        raise ConfigError("document must be an object with a 'requirements' list")
    reqs = doc["requirements"]
    if not isinstance(reqs, list):
        raise ConfigError("'requirements' must be a list")
    return RequirementSet(
        tuple(parse_requirement(r, known_properties) for r in reqs), str(doc.get("target", ""))
    )


def signature_mask(features: Iterable[int]) -> int:
    m = 0
    for t in features:
        if t < 0:
            raise ValueError("feature tags must be non-negative")
        m |= 1 << t
    return m


@dataclass(frozen=True, eq=False)
class Molecule:
    id: str
    properties: Mapping[str, float]
    features: frozenset[int]
    mask: int = field(init=False, repr=False)

    def __post_init__(self) -> None:
        if not self.features:
            raise ValueError(f"molecule {self.id!r} has an empty feature signature")
        object.__setattr__(self, "features", frozenset(self.features))
        object.__setattr__(self, "mask", signature_mask(self.features))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Molecule):
            return NotImplemented
        return (self.id, dict(self.properties), self.features) == (
            other.id,
            dict(other.properties),
            other.features,
        )

    def get(self, name: str) -> float:
        try:
            return self.properties[name]
        except KeyError:
            raise MissingProperty(self.id, name) from None


@dataclass(frozen=True)
class CandidatePool:
    id: str
    molecules: tuple[Molecule, ...]
    created_at_iteration: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "molecules", tuple(self.molecules))
        ids = [m.id for m in self.molecules]
        if len(set(ids)) != len(ids):
            raise ValueError(f"pool {self.id}: duplicate molecule ids")
        if self.created_at_iteration < 0:
            raise ValueError("created_at_iteration must be non-negative")

    def __len__(self) -> int:
        return len(self.molecules)

    @property
    def masks(self) -> list[int]:
        return [m.mask for m in self.molecules]


@dataclass(frozen=True)
class Observation:
    label: str
    value: float


@dataclass(frozen=True)
class ResidualVector:
    labels: tuple[str, ...]
    values: tuple[float, ...]

    def __len__(self) -> int:
        return len(self.values)

    def __getitem__(self, label: str) -> float:
        return self.values[self.labels.index(label)]

    def items(self) -> list[tuple[str, float]]:
        return list(zip(self.labels, self.values))


@dataclass(frozen=True)
class AuditReport:
    observations: tuple[Observation, ...]
    residuals: ResidualVector
    passed: bool
    failed_labels: tuple[str, ...]

    def observation(self, label: str) -> float:
        for o in self.observations:
            if o.label == label:
                return o.value
        raise KeyError(label)


def diversity(pool: CandidatePool | Sequence[Molecule]) -> float:
    """One minus the mean pairwise Jaccard similarity of feature signatures."""
    mols = pool.molecules if isinstance(pool, CandidatePool) else tuple(pool)
    if not mols:
        raise EmptyPool("diversity of an empty pool")
    if len(mols) < 2:
        raise SingletonPool("diversity needs at least two molecules")
    return 1.0 - kernels.mean_pairwise_jaccard([m.mask for m in mols])


def novelty(mol: Molecule, reference: Sequence[Molecule]) -> float:
    """One minus the largest Jaccard similarity to any reference molecule."""
    if not reference:
        raise EmptyReference("novelty needs a non-empty reference library")
    return 1.0 - kernels.max_jaccard(mol.mask, [r.mask for r in reference])


def molecule_values(
    pool: CandidatePool, req: Requirement, reference: Sequence[Molecule] | None = None
) -> list[float]:
    """Per-molecule values for a per-molecule requirement, in pool order.

    Novelty is computed against ``reference`` when given; otherwise each
    molecule must carry a precomputed ``novelty`` property.
    """
    if req.field is MetricField.NOVELTY:
        if reference is not None:
            if not reference:
                raise EmptyReference("novelty needs a non-empty reference library")
            return kernels.novelties(pool.masks, [r.mask for r in reference])
        return [m.get("novelty") for m in pool.molecules]
    if req.field not in PER_MOLECULE_FIELDS:
        raise ValueError(f"{req.label} is not a per-molecule requirement")
    name = req.property_name
    return [m.get(name) for m in pool.molecules]


def aggregate(
    pool: CandidatePool, req: Requirement, reference: Sequence[Molecule] | None = None
) -> Observation:
    agg = req.aggregation
    if agg is AggregationKind.CARDINALITY:
        return Observation(req.label, float(len(pool)))
    if not pool.molecules:
        raise EmptyPool(f"{req.label}: cannot aggregate over an empty pool")
    if req.field is MetricField.DIVERSITY:
        # pairwise diversity is undefined below two molecules; observe 0.0 so the gate stays total
        value = diversity(pool) if len(pool) >= 2 else 0.0
        return Observation(req.label, value)
    values = molecule_values(pool, req, reference)
    if agg is AggregationKind.WORST_MAX:
        return Observation(req.label, max(values))
    # WORST_MIN and set-level novelty are both worst-case minima
    return Observation(req.label, min(values))


def residual(observation: Observation | float, req: Requirement) -> float:
    o = observation.value if isinstance(observation, Observation) else observation
    if req.comparison.larger_is_better:
        return o - req.threshold
    return req.threshold - o


def observation_from_residual(res: float, req: Requirement) -> float:
    """Invert ``residual`` (exact up to one rounding)."""
    if req.comparison.larger_is_better:
        return req.threshold + res
    return req.threshold - res


def gate(
    pool: CandidatePool, reqs: RequirementSet, reference: Sequence[Molecule] | None = None
) -> AuditReport:
    observations = tuple(aggregate(pool, r, reference) for r in reqs)
    values = tuple(residual(o, r) for o, r in zip(observations, reqs))
    failed = tuple(r.label for o, r in zip(observations, reqs) if not r.satisfied_by(o.value))
    return AuditReport(
        observations=observations,
        residuals=ResidualVector(tuple(r.label for r in reqs), values),
        passed=not failed,
        failed_labels=failed,
    )


def residual_vector(
    pool: CandidatePool, reqs: RequirementSet, reference: Sequence[Molecule] | None = None
) -> ResidualVector:
    return gate(pool, reqs, reference).residuals


def compliant_mask(
    pool: CandidatePool, reqs: RequirementSet, reference: Sequence[Molecule] | None = None
) -> list[bool]:
    """Which molecules individually satisfy every per-molecule requirement."""
    ok = [True] * len(pool)
    for r in reqs.per_molecule:
        for i, v in enumerate(molecule_values(pool, r, reference)):
            if ok[i] and not r.satisfied_by(v):
                ok[i] = False
    return ok
