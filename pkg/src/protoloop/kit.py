"""The KIT worked example as a loadable fixture.

Three 100-molecule pools are built so that their worst-case statistics
match the KIT snapshot exactly (worst docking, minimum novelty, minimum
QED, maximum SAS). Novelty is stored as a precomputed molecule property.
The JSON file in ``data/`` is the frozen output of ``build_kit_document``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Any, Mapping

from .protocol import CandidatePool, Molecule, RequirementSet, load_requirements
from .rng import SplitMix64
from .synthetic import KIT_REQUIREMENTS, TAG_UNIVERSE, TAGS_PER_MOLECULE

KIT_POCKET = {
    "atom_count": 277,
    "residue_count": 36,
    "chain_count": 1,
    "box_size": [20.348, 24.401, 24.296],
    "center": [34.162, 14.721, 39.277],
    "top_residues": [["LEU", 5], ["VAL", 5], ["THR", 4], ["ILE", 4], ["LYS", 3]],
    "hydrophobic_ratio": 0.528,
    "positive_ratio": 0.111,
    "negative_ratio": 0.083,
    "aromatic_ratio": 0.111,
}

# pool id -> (worst docking, min novelty, min qed, max sas, min lipinski, compliant molecules)
# lipinski minima are not part of the snapshot and are chosen here
KIT_POOL_STATS = {
    "MOL001": (-3.932, 0.695, 0.343, 5.229, 2.8, 6),
    "MOL002": (-7.358, 0.685, 0.212, 4.682, 2.9, 0),
    "MOL003": (-3.676, 0.685, 0.306, 2.769, 3.0, 24),
}
POOL_SIZE = 100
FIXTURE_SEED = 0x4B4954


def _pool_records(pool_id: str, stats: tuple, rng: SplitMix64) -> list[dict[str, Any]]:
    worst_dock, min_nov, min_qed, max_sas, min_lip, n_ok = stats
    mols = []
    for i in range(POOL_SIZE):
        if i < n_ok:
            props = {
                "docking": rng.uniform(-10.5, -7.9),
                "novelty": rng.uniform(0.80, 0.95),
                "qed": rng.uniform(0.45, 0.80),
                "sas": rng.uniform(1.8, min(2.75, max_sas)),
                "lipinski": rng.uniform(3.2, 4.0),
            }
        else:
            # docking misses the -7.77 bar, so none of these are compliant
            props = {
                "docking": rng.uniform(-7.7, worst_dock),
                "novelty": rng.uniform(min_nov, 0.95),
                "qed": rng.uniform(min_qed, 0.80),
                "sas": rng.uniform(1.8, max_sas),
                "lipinski": rng.uniform(min_lip, 4.0),
            }
        mols.append(props)
    # pin the snapshot extremes on the non-compliant tail
    for offset, (name, value) in enumerate(
        (("docking", worst_dock), ("novelty", min_nov), ("qed", min_qed), ("sas", max_sas), ("lipinski", min_lip))
    ):
        mols[n_ok + offset][name] = value
    out = []
    for i, props in enumerate(mols):
        tags = sorted(rng.sample(TAGS_PER_MOLECULE, TAG_UNIVERSE))
        rounded = {k: round(v, 4) for k, v in props.items()}
        out.append({"id": f"{pool_id}-{i + 1:03d}", "properties": rounded, "features": tags})
    return out


def build_kit_document(seed: int = FIXTURE_SEED) -> dict[str, Any]:
    rng = SplitMix64(seed)
    return {
        "target": KIT_REQUIREMENTS["target"],
        "requirements": KIT_REQUIREMENTS["requirements"],
        "pocket": KIT_POCKET,
        "pools": {pid: _pool_records(pid, stats, rng) for pid, stats in KIT_POOL_STATS.items()},
    }


@dataclass(frozen=True)
class KitFixture:
    requirements: RequirementSet
    pocket: Mapping[str, Any]
    pools: Mapping[str, CandidatePool]
    target_id: str = "KIT"
    reference: None = None


def pools_from_document(doc: Mapping[str, Any]) -> dict[str, CandidatePool]:
    pools = {}
    for k, (pid, mols) in enumerate(doc["pools"].items()):
        pools[pid] = CandidatePool(
            pid,
            tuple(Molecule(m["id"], dict(m["properties"]), frozenset(m["features"])) for m in mols),
            created_at_iteration=k + 1,
        )
    return pools


def load_kit(path: str | Path | None = None) -> KitFixture:
    if path is None:
        text = resources.files("protoloop").joinpath("data/kit.json").read_text()
    else:
        text = Path(path).read_text()
    doc = json.loads(text)
    reqs = load_requirements(doc)
    return KitFixture(reqs, doc["pocket"], pools_from_document(doc), doc["target"])


def write_kit_fixture(path: str | Path) -> None:
    Path(path).write_text(json.dumps(build_kit_document(), indent=1) + "\n")
