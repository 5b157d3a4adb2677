"""Independent oracles and random-instance builders shared by the tests.

The oracles evaluate requirements straight from their definitions on
Python frozensets and lists; they never call into protoloop's kernels or
aggregation code.
"""

from __future__ import annotations

import random
from typing import Any

from protoloop.protocol import (
    AggregationKind,
    CandidatePool,
    Comparison,
    MetricField,
    Molecule,
    Requirement,
    RequirementSet,
)

TAGS = 12
GRID = [round(0.05 * i, 2) for i in range(21)]
DOCK_GRID = [round(-10.0 + 0.5 * i, 1) for i in range(17)]

VALID_TRIPLES = (
    [(MetricField.POOL_SIZE, AggregationKind.CARDINALITY, c) for c in Comparison]
    + [(MetricField.DIVERSITY, AggregationKind.SET_FUNCTIONAL, c) for c in Comparison]
    + [(MetricField.NOVELTY, AggregationKind.SET_FUNCTIONAL, c) for c in Comparison]
    + [(f, AggregationKind.WORST_MIN, c) for f in (MetricField.QED, MetricField.LIPINSKI) for c in (Comparison.GE, Comparison.GT)]
    + [(f, AggregationKind.WORST_MAX, c) for f in (MetricField.SAS, MetricField.DOCKING) for c in (Comparison.LE, Comparison.LT)]
    + [(MetricField.CUSTOM, AggregationKind.WORST_MIN, c) for c in (Comparison.GE, Comparison.GT)]
    + [(MetricField.CUSTOM, AggregationKind.WORST_MAX, c) for c in (Comparison.LE, Comparison.LT)]
)


def jaccard_sets(a: frozenset, b: frozenset) -> float:
    u = len(a | b)
    return len(a & b) / u if u else 1.0


def oracle_diversity(feats: list[frozenset]) -> float:
    if len(feats) < 2:
        return 0.0
    total = 0.0
    pairs = 0
    for i in range(len(feats)):
        for j in range(i + 1, len(feats)):
            total += jaccard_sets(feats[i], feats[j])
            pairs += 1
    return 1.0 - total / pairs


def oracle_novelty(feat: frozenset, refs: list[frozenset]) -> float:
    return 1.0 - max(jaccard_sets(feat, r) for r in refs)


def oracle_observation(pool: CandidatePool, req: Requirement, reference: list[Molecule] | None) -> float:
    mols = list(pool.molecules)
    field = req.field.value
    if field == "pool_size":
        return float(len(mols))
    if field == "diversity":
        return oracle_diversity([frozenset(m.features) for m in mols])
    if field == "novelty":
        if reference is None:
            return min(m.properties["novelty"] for m in mols)
        refs = [frozenset(r.features) for r in reference]
        return min(oracle_novelty(frozenset(m.features), refs) for m in mols)
    name = req.custom_name if field == "custom" else field
    vals = [m.properties[name] for m in mols]
    return min(vals) if req.aggregation.value == "worst_min" else max(vals)


def oracle_holds(cmp: str, o: float, b: float) -> bool:
    if cmp == "ge":
        return o >= b
    if cmp == "gt":
        return o > b
    if cmp == "le":
        return o <= b
    return o < b


def oracle_gate(pool: CandidatePool, reqs: RequirementSet, reference: list[Molecule] | None) -> tuple[bool, list[str]]:
    failed = [
        r.label for r in reqs if not oracle_holds(r.comparison.value, oracle_observation(pool, r, reference), r.threshold)
    ]
    return not failed, failed


# ---------------------------------------------------------------- random builders

def random_features(rng: random.Random, tags: int = TAGS) -> frozenset[int]:
    k = rng.randint(1, tags // 2)
    return frozenset(rng.sample(range(tags), k))


def random_molecule(rng: random.Random, mid: str) -> Molecule:
    props = {
        "qed": rng.choice(GRID),
        "sas": rng.choice([1.0 + 0.25 * i for i in range(17)]),
        "lipinski": float(rng.randint(0, 4)),
        "docking": rng.choice(DOCK_GRID),
        "novelty": rng.choice(GRID),
        "logp": rng.choice([-1.0, 0.0, 0.5, 1.0, 2.5]),
    }
    return Molecule(mid, props, random_features(rng))


def random_pool(rng: random.Random, n_min: int = 1, n_max: int = 8, pid: str = "P") -> CandidatePool:
    n = rng.randint(n_min, n_max)
    return CandidatePool(pid, tuple(random_molecule(rng, f"{pid}-{i}") for i in range(n)))


def random_requirements(
    rng: random.Random,
    pool: CandidatePool,
    reference: list[Molecule] | None,
    k_min: int = 3,
    k_max: int = 7,
    boundary_p: float = 0.3,
) -> RequirementSet:
    """A random valid set; some thresholds land exactly on the observed value."""
    reqs = []
    for i in range(rng.randint(k_min, k_max)):
        f, agg, cmp = rng.choice(VALID_TRIPLES)
        custom = "logp" if f is MetricField.CUSTOM else None
        probe = Requirement(f, agg, cmp, 0.0, f"r{i}", custom)
        if rng.random() < boundary_p:
            thr = oracle_observation(pool, probe, reference)
        elif f is MetricField.POOL_SIZE:
            thr = float(rng.randint(0, 9))
        elif f is MetricField.DOCKING:
            thr = rng.choice(DOCK_GRID)
        elif f in (MetricField.SAS, MetricField.LIPINSKI):
            thr = rng.choice([0.5 * j for j in range(11)])
        else:
            thr = rng.choice(GRID)
        reqs.append(Requirement(f, agg, cmp, thr, f"r{i}", custom))
    return RequirementSet(tuple(reqs), "T")


def random_reference(rng: random.Random) -> list[Molecule] | None:
    if rng.random() < 0.5:
        return None
    return [Molecule(f"R{i}", {}, random_features(rng)) for i in range(rng.randint(1, 5))]


def random_instance(rng: random.Random) -> tuple[CandidatePool, RequirementSet, Any]:
    pool = random_pool(rng)
    ref = random_reference(rng)
    return pool, random_requirements(rng, pool, ref), ref


def make_pool(pid: str, props_list: list[dict[str, float]], features: list[set[int]] | None = None) -> CandidatePool:
    mols = []
    for i, props in enumerate(props_list):
        feats = features[i] if features else {i, i + 100}
        mols.append(Molecule(f"{pid}-{i + 1:03d}", dict(props), frozenset(feats)))
    return CandidatePool(pid, tuple(mols))


# ---------------------------------------------------------------- memory builders

def random_summary(rng: random.Random, iteration: int):
    from protoloop.memory import PoolSummary

    return PoolSummary(
        pool_id=f"MOL{iteration:03d}",
        iteration=iteration,
        size=rng.randint(1, 100),
        diversity=0.8,
        worst_docking=-7.0,
        min_novelty=0.8,
        min_qed=0.5,
        max_sas=2.5,
        min_lipinski=3.5,
        # coarse grid so that ties on quality are common
        quality_score=rng.choice([0.5, 0.6, 0.7, 0.8, 0.9, 1.0]),
    )


def random_record(rng: random.Random, iteration: int):
    from protoloop.diagnosis import ActionBias, CorrectiveRecord, FailureFamily

    fam = rng.choice([FailureFamily.BINDING_BOTTLENECK, FailureFamily.SIZE_DEFICIT, FailureFamily.MIXED])
    return CorrectiveRecord(
        iteration=iteration,
        pool_id=f"MOL{iteration:03d}",
        family=fam,
        severity=rng.choice([0.05, 0.1, 0.2, 0.4, 1.0]),
        failed_labels=tuple(rng.sample(["vina", "qed", "size"], rng.randint(1, 2))),
        focus="docking",
        rationale="r",
        repair_hint=rng.choice(["hint a", "hint b"]),
        bias=ActionBias.OPTIMIZE,
    )


def oracle_top_pools(summaries, k: int):
    """Full sort by quality descending, then iteration descending."""
    ordered = sorted(summaries, key=lambda s: (s.quality_score, s.iteration), reverse=True)
    return ordered[:k]


def oracle_top_records(records, k: int):
    """Content dedup keeping the greater (severity, iteration), then full sort."""
    best = {}
    for r in records:
        key = (r.family, r.failed_labels, r.repair_hint)
        if key not in best or (r.severity, r.iteration) > (best[key].severity, best[key].iteration):
            best[key] = r
    ordered = sorted(best.values(), key=lambda r: (r.severity, r.iteration), reverse=True)
    return ordered[:k]


# (criterion number, printed line), filled by the acceptance suite
ACCEPTANCE_LINES: list[tuple[int, str]] = []
