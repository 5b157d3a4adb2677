"""Seeded synthetic environment: targets, executors and a heuristic planner.

Molecules are property records plus a feature signature drawn from an
80-tag universe. The reference library lives in tags 0..39; a generated
molecule takes between 0 and 9 of its 16 tags from that region, which puts
roughly a fifth of fresh molecules under a 0.8 novelty bar and gives fresh
pools a diversity near 0.85.

Difficulty moves the docking distribution away from the threshold:
easy targets already contain enough individually compliant molecules after
one generation, hard targets need several docking-optimization rounds
before a filter-and-subset repair can succeed.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Any, Mapping, Sequence

from . import kernels
from .control import Action, ExecutorFailure
from .diagnosis import ActionBias
from .protocol import (
    CandidatePool,
    MetricField,
    Molecule,
    RequirementSet,
    compliant_mask,
    load_requirements,
)
from .rng import SplitMix64, derive_seed

TAG_UNIVERSE = 80
REFERENCE_TAGS = 40
TAGS_PER_MOLECULE = 16
MAX_REFERENCE_OVERLAP = 9
REFERENCE_SIZE = 40
GENERATE_SIZE = 100

OPTIMIZE_PROB = 0.8
# (objective step range, penalized property, penalty range)
OPTIMIZE_STEPS = {
    "docking": ((0.2, 0.8), "sas", (0.0, 0.06)),
    "qed": ((0.01, 0.05), "docking", (0.0, 0.15)),
    "sas": ((0.05, 0.2), "qed", (0.0, 0.01)),
    "lipinski": ((0.05, 0.25), "sas", (0.0, 0.05)),
    "novelty": ((0.0, 0.0), "docking", (0.0, 0.15)),
}
# direction in which each optimizable property improves
_IMPROVES = {"docking": -1.0, "qed": 1.0, "sas": -1.0, "lipinski": 1.0}
_RANGES = {"qed": (0.0, 1.0), "sas": (1.0, 10.0), "lipinski": (0.0, 4.0), "docking": (-15.0, 0.0)}

DIFFICULTY_DOCKING_MEAN = {"easy": -7.6, "medium": -6.6, "hard": -5.4}
# a wider docking spread on easy targets keeps binding the dominant failure
DIFFICULTY_DOCKING_SD = {"easy": 1.4, "medium": 1.2, "hard": 1.1}

KIT_REQUIREMENTS = {
    "target": "KIT",
    "requirements": [
        {"label": "size", "field": "pool_size", "agg": "cardinality", "cmp": "ge", "threshold": 5},
        {"label": "vina", "field": "docking", "agg": "worst_max", "cmp": "lt", "threshold": -7.77},
        {"label": "novelty", "field": "novelty", "agg": "set", "cmp": "ge", "threshold": 0.80},
        {"label": "diversity", "field": "diversity", "agg": "set", "cmp": "ge", "threshold": 0.80},
        {"label": "qed", "field": "qed", "agg": "worst_min", "cmp": "gt", "threshold": 0.43},
        {"label": "sas", "field": "sas", "agg": "worst_max", "cmp": "lt", "threshold": 2.77},
        {"label": "lipinski", "field": "lipinski", "agg": "worst_min", "cmp": "ge", "threshold": 3.19},
    ],
}

_RESIDUES = ("LEU", "VAL", "THR", "ILE", "LYS", "ALA", "GLY", "PHE", "SER", "ASP", "GLU", "TYR")


def _clamp(name: str, v: float) -> float:
    lo, hi = _RANGES[name]
    return lo if v < lo else hi if v > hi else v


def _signature(rng: SplitMix64) -> frozenset[int]:
    k_ref = rng.below(MAX_REFERENCE_OVERLAP + 1)
    tags = rng.sample(k_ref, REFERENCE_TAGS)
    tags += [REFERENCE_TAGS + t for t in rng.sample(TAGS_PER_MOLECULE - k_ref, TAG_UNIVERSE - REFERENCE_TAGS)]
    return frozenset(tags)


@dataclass(frozen=True)
class PropertyModel:
    docking_mean: float
    docking_sd: float = 1.1
    qed_mean: float = 0.62
    qed_sd: float = 0.07
    sas_mean: float = 2.30
    sas_sd: float = 0.13
    lipinski_sd: float = 0.4


@dataclass(frozen=True)
class SyntheticTarget:
    seed: int
    difficulty: str
    target_id: str
    requirements: RequirementSet
    reference: tuple[Molecule, ...]
    model: PropertyModel
    pocket: Mapping[str, Any] = field(default_factory=dict)


def make_target(seed: int, difficulty: str = "hard", requirements: RequirementSet | None = None) -> SyntheticTarget:
    if difficulty not in DIFFICULTY_DOCKING_MEAN:
        raise ValueError(f"unknown difficulty {difficulty!r}")
    rng = SplitMix64(derive_seed(seed, 0x7A46))
    reqs = requirements or load_requirements(KIT_REQUIREMENTS)
    reqs = RequirementSet(reqs.requirements, f"SYN{seed:03d}")
    reference = tuple(
        Molecule(f"REF{i:03d}", {}, frozenset(rng.sample(TAGS_PER_MOLECULE, REFERENCE_TAGS)))
        for i in range(REFERENCE_SIZE)
    )
    model = PropertyModel(
        docking_mean=DIFFICULTY_DOCKING_MEAN[difficulty] + rng.uniform(-0.2, 0.2),
        docking_sd=DIFFICULTY_DOCKING_SD[difficulty],
    )
    top = rng.sample(5, len(_RESIDUES))
    counts = sorted((rng.below(4) + 2 for _ in top), reverse=True)
    pocket = {
        "atom_count": 200 + rng.below(150),
        "residue_count": 25 + rng.below(20),
        "chain_count": 1,
        "box_size": [round(rng.uniform(16.0, 26.0), 3) for _ in range(3)],
        "center": [round(rng.uniform(0.0, 50.0), 3) for _ in range(3)],
        "top_residues": [[_RESIDUES[i], c] for i, c in zip(top, counts)],
        "hydrophobic_ratio": round(rng.uniform(0.35, 0.6), 3),
        "positive_ratio": round(rng.uniform(0.05, 0.15), 3),
        "negative_ratio": round(rng.uniform(0.05, 0.15), 3),
        "aromatic_ratio": round(rng.uniform(0.05, 0.15), 3),
    }
    return SyntheticTarget(seed, difficulty, reqs.target, reqs, reference, model, pocket)


def next_pool_id(registry: Mapping[str, CandidatePool]) -> str:
    return f"MOL{len(registry) + 1:03d}"


def generate_executor(n: int, target: SyntheticTarget, seed: int, pool_id: str = "MOL001") -> CandidatePool:
    if n < 1:
        raise ValueError("n must be at least 1")
    rng = SplitMix64(seed)
    m = target.model
    mols = []
    for i in range(n):
        props = {
            "docking": _clamp("docking", rng.normal(m.docking_mean, m.docking_sd)),
            "qed": _clamp("qed", rng.normal(m.qed_mean, m.qed_sd)),
            "sas": _clamp("sas", rng.normal(m.sas_mean, m.sas_sd)),
            "lipinski": _clamp("lipinski", 4.0 - abs(rng.normal(0.0, m.lipinski_sd))),
        }
        mols.append(Molecule(f"{pool_id}-{i + 1:03d}", props, _signature(rng)))
    return CandidatePool(pool_id, tuple(mols))


def _swap_tags(features: frozenset[int], rng: SplitMix64, toward_novel: bool = False) -> frozenset[int]:
    tags = sorted(features)
    for _ in range(rng.below(3)):
        drop_pool = [t for t in tags if t < REFERENCE_TAGS] if toward_novel else tags
        if not drop_pool:
            break
        drop = rng.choice(drop_pool)
        lo = REFERENCE_TAGS if toward_novel else 0
        free = [t for t in range(lo, TAG_UNIVERSE) if t not in tags]
        if not free:
            break
        tags.remove(drop)
        tags.append(rng.choice(free))
        tags.sort()
    return frozenset(tags)


def optimize_executor(
    pool_id: str,
    objective: str,
    target: SyntheticTarget,
    seed: int,
    registry: Mapping[str, CandidatePool],
    new_id: str | None = None,
    step_scale: float = 1.0,
) -> CandidatePool:
    """Perturb every molecule of ``pool_id`` toward ``objective``.

    With probability 0.8 a molecule improves the objective by a random step
    and pays a small penalty on one other property; every molecule may swap
    up to two feature tags. ``step_scale=0`` leaves properties unchanged.
    """
    if pool_id not in registry:
        raise ExecutorFailure(f"unknown pool {pool_id}")
    if objective not in OPTIMIZE_STEPS:
        raise ExecutorFailure(f"cannot optimize toward {objective!r}")
    (step_lo, step_hi), penalized, (pen_lo, pen_hi) = OPTIMIZE_STEPS[objective]
    rng = SplitMix64(seed)
    new_id = new_id or next_pool_id(registry)
    out = []
    for i, mol in enumerate(registry[pool_id].molecules):
        props = dict(mol.properties)
        improve = rng.random() < OPTIMIZE_PROB
        step = rng.uniform(step_lo, step_hi) * step_scale
        penalty = rng.uniform(pen_lo, pen_hi) * step_scale
        if improve and step_scale > 0:
            if objective in _IMPROVES:
                props[objective] = _clamp(objective, props[objective] + _IMPROVES[objective] * step)
            props[penalized] = _clamp(penalized, props[penalized] - _IMPROVES[penalized] * penalty)
        features = _swap_tags(mol.features, rng, toward_novel=improve and objective == "novelty")
        out.append(Molecule(f"{new_id}-{i + 1:03d}", props, features))
    return CandidatePool(new_id, tuple(out))


def screen_executor(
    pool_ids: Sequence[str],
    reqs: RequirementSet,
    n: int,
    target: SyntheticTarget,
    registry: Mapping[str, CandidatePool],
    new_id: str | None = None,
) -> CandidatePool:
    """Filter the union of pools by every per-molecule requirement, then pick a
    farthest-point diverse subset of ``n`` (all survivors if fewer)."""
    if n < 2:
        raise ValueError("subset size must be at least 2")
    missing = [p for p in pool_ids if p not in registry]
    if missing:
        raise ExecutorFailure(f"unknown pools {missing}")
    seen: dict[str, Molecule] = {}
    for pid in pool_ids:
        for m in registry[pid].molecules:
            seen.setdefault(m.id, m)
    union = CandidatePool("union", tuple(sorted(seen.values(), key=lambda m: m.id)))
    ok = compliant_mask(union, reqs, target.reference)
    survivors = [m for m, good in zip(union.molecules, ok) if good]
    new_id = new_id or next_pool_id(registry)
    if not survivors:
        raise ExecutorFailure(f"no molecule in {list(pool_ids)} passes the per-molecule filters")
    order = kernels.farthest_point_order([m.mask for m in survivors], n, 0)
    return CandidatePool(new_id, tuple(survivors[i] for i in order))


class SyntheticExecutor:
    """Executor contract over a synthetic target: dispatch by action kind."""

    def __init__(self, target: SyntheticTarget) -> None:
        self.target = target

    def __call__(self, action: Action, registry: Mapping[str, CandidatePool], context: Any, seed: int) -> CandidatePool:
        pid = next_pool_id(registry)
        if action.kind is ActionBias.GENERATE:
            return generate_executor(int(action.params.get("n", GENERATE_SIZE)), self.target, seed, pid)
        if action.kind is ActionBias.OPTIMIZE:
            return optimize_executor(
                action.pools[0], str(action.params.get("objective", "docking")), self.target, seed, registry, pid
            )
        n = int(action.params.get("n", self.target.requirements.required_size()))
        return screen_executor(action.pools, self.target.requirements, max(n, 2), self.target, registry, pid)


# ---------------------------------------------------------------- planner

ENTRY_RE = re.compile(
    r"Iteration (?P<iteration>\d+); pool (?P<pool>\S+); failure family: [^;]+; severity: [^;]+; "
    r"focus: (?P<focus>[^;]+); recommended bias: (?P<bias>\w+)\."
)
POOL_RE = re.compile(r"^(?P<pool>MOL\d+): score (?P<score>[-0-9.]+);", re.MULTILINE)


def parse_corrective_entries(text: str) -> list[dict[str, Any]]:
    return [
        {
            "iteration": int(m["iteration"]),
            "pool": m["pool"],
            "focus": m["focus"],
            "bias": ActionBias(m["bias"]),
        }
        for m in ENTRY_RE.finditer(text)
    ]


def parse_pool_scores(text: str) -> list[tuple[str, float]]:
    return [(m["pool"], float(m["score"])) for m in POOL_RE.finditer(text)]


class HeuristicPlanner:
    """Deterministic stand-in planner that follows the latest recommended bias.

    Without any parseable corrective entry it generates a fresh pool.
    """

    def __init__(self, reqs: RequirementSet, generate_size: int = GENERATE_SIZE) -> None:
        self.reqs = reqs
        self.generate_size = generate_size

    def __call__(self, state_text: str, registry: Mapping[str, CandidatePool], seed: int) -> Action:
        entries = [e for e in parse_corrective_entries(state_text) if e["pool"] in registry]
        if not entries:
            return Action(
                ActionBias.GENERATE,
                params={"n": self.generate_size},
                reason="no corrective guidance available; sample a fresh pool.",
            )
        latest = max(entries, key=lambda e: e["iteration"])
        bias = latest["bias"]
        if bias is ActionBias.GENERATE:
            return Action(
                ActionBias.GENERATE,
                params={"n": self.generate_size},
                reason=f"corrective entry from iteration {latest['iteration']} recommends fresh generation.",
            )
        if bias is ActionBias.OPTIMIZE:
            objective = latest["focus"] if latest["focus"] in OPTIMIZE_STEPS else MetricField.DOCKING.value
            source = latest["pool"]
            return Action(
                ActionBias.OPTIMIZE,
                (source,),
                {"objective": objective},
                reason=f"optimize {source} toward {objective}, the dominant violated field.",
            )
        scored = [(p, s) for p, s in parse_pool_scores(state_text) if p in registry]
        pools = [latest["pool"]]
        if scored:
            best = max(scored, key=lambda ps: ps[1])[0]
            if best not in pools:
                pools.insert(0, best)
        need = max(self.reqs.required_size(), 2)
        return Action(
            ActionBias.CODE_SCREEN,
            tuple(pools),
            {"n": need, "filters": [r.label for r in self.reqs.per_molecule]},
            reason=f"filter {', '.join(pools)} by the per-molecule thresholds and keep a diverse subset of {need}.",
        )
