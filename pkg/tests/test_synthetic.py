import random

import pytest

from protoloop import kernels
from protoloop.control import Action, ExecutorFailure, LoopConfig, Mode, run_episode
from protoloop.diagnosis import ActionBias
from protoloop.memory import Budgets, CorrectiveMemory, render_channel
from protoloop.protocol import CandidatePool, compliant_mask, diversity
from protoloop.synthetic import (
    HeuristicPlanner,
    SyntheticExecutor,
    generate_executor,
    make_target,
    optimize_executor,
    parse_corrective_entries,
    screen_executor,
)
from helpers import make_pool


def episode(seed, difficulty, mode=Mode.CACM, **kw):
    t = make_target(seed, difficulty)
    cfg = LoopConfig(seed=seed, mode=mode, **kw)
    return run_episode(t, t.requirements, HeuristicPlanner(t.requirements), SyntheticExecutor(t), cfg)


def test_target_is_deterministic():
    a, b = make_target(7), make_target(7)
    assert a == b
    assert make_target(8).reference != a.reference
    with pytest.raises(ValueError):
        make_target(1, "extreme")


def test_fresh_pools_are_diverse():
    for seed in range(1, 51):
        t = make_target(seed)
        d = diversity(generate_executor(100, t, seed))
        assert 0.75 <= d <= 0.95


def test_generate_is_seeded():
    t = make_target(3)
    assert generate_executor(20, t, 11) == generate_executor(20, t, 11)
    assert generate_executor(20, t, 11) != generate_executor(20, t, 12)


def test_optimize_improves_objective():
    t = make_target(2)
    pool = generate_executor(100, t, 5)
    reg = {pool.id: pool}
    out = optimize_executor(pool.id, "docking", t, 9, reg)
    mean = lambda p: sum(m.properties["docking"] for m in p.molecules) / len(p)
    assert mean(out) < mean(pool)
    assert abs(diversity(out) - diversity(pool)) <= 0.1
    assert out.id == "MOL002" and len(out) == len(pool)


def test_optimize_zero_step_is_identity_on_properties():
    t = make_target(2)
    pool = generate_executor(50, t, 5)
    out = optimize_executor(pool.id, "qed", t, 9, {pool.id: pool}, step_scale=0.0)
    assert [m.properties for m in out.molecules] == [m.properties for m in pool.molecules]


def test_optimize_unknown_inputs():
    t = make_target(2)
    pool = generate_executor(5, t, 5)
    with pytest.raises(ExecutorFailure):
        optimize_executor("MOL404", "qed", t, 1, {pool.id: pool})
    with pytest.raises(ExecutorFailure):
        optimize_executor(pool.id, "colour", t, 1, {pool.id: pool})


def _screen_pool(n_ok, n_bad, reqs):
    good = {"docking": -9.0, "novelty": 0.9, "qed": 0.6, "sas": 2.0, "lipinski": 4.0}
    bad = dict(good, docking=-5.0)
    rng = random.Random(n_ok)
    feats = [set(rng.sample(range(80), 16)) for _ in range(n_ok + n_bad)]
    return make_pool("MOL001", [dict(good) for _ in range(n_ok)] + [dict(bad) for _ in range(n_bad)], feats)


def test_screen_selects_required_subset():
    t = make_target(1)
    reqs = t.requirements
    pool = _screen_pool(24, 76, reqs)
    t = type(t)(t.seed, t.difficulty, t.target_id, reqs, None, t.model)
    out = screen_executor([pool.id], reqs, 5, t, {pool.id: pool})
    assert len(out) == 5
    assert all(compliant_mask(out, reqs))


def test_screen_returns_all_when_few_survive():
    t = make_target(1)
    reqs = t.requirements
    pool = _screen_pool(3, 20, reqs)
    t = type(t)(t.seed, t.difficulty, t.target_id, reqs, None, t.model)
    assert len(screen_executor([pool.id], reqs, 5, t, {pool.id: pool})) == 3
    none = _screen_pool(0, 10, reqs)
    with pytest.raises(ExecutorFailure):
        screen_executor([none.id], reqs, 5, t, {none.id: none})


def test_greedy_subset_beats_random():
    rng = random.Random(0)
    wins = 0
    for trial in range(100):
        masks = [sum(1 << b for b in rng.sample(range(80), 16)) for _ in range(30)]
        order = kernels.farthest_point_order(masks, 5, 0)
        greedy = kernels.mean_pairwise_jaccard([masks[i] for i in order])
        rand = kernels.mean_pairwise_jaccard(rng.sample(masks, 5))
        wins += greedy <= rand
    assert wins >= 90


def test_planner_generates_without_guidance(kit_reqs):
    a = HeuristicPlanner(kit_reqs)("", {}, 1)
    assert a.kind is ActionBias.GENERATE and a.params["n"] == 100


def test_planner_follows_latest_entry(kit, kit_reqs):
    from protoloop.diagnosis import diagnose
    from protoloop.memory import update_corrective
    from protoloop.protocol import gate

    mem = CorrectiveMemory()
    for k, pid in enumerate(("MOL001", "MOL002", "MOL003"), start=1):
        pool = kit.pools[pid]
        mem = update_corrective(mem, diagnose(kit_reqs, pool, gate(pool, kit_reqs), k), Budgets())
    text = render_channel(mem, 1200, "corrective", kit_reqs)
    entries = parse_corrective_entries(text)
    assert max(e["iteration"] for e in entries) == 3
    action = HeuristicPlanner(kit_reqs)(text, kit.pools, 1)
    assert action.kind is ActionBias.CODE_SCREEN
    assert "MOL003" in action.pools and action.params["n"] == 5


def test_executor_dispatch():
    t = make_target(4)
    ex = SyntheticExecutor(t)
    reg = {}
    p1 = ex(Action(ActionBias.GENERATE, params={"n": 100}), reg, t, 1)
    reg[p1.id] = p1
    p2 = ex(Action(ActionBias.OPTIMIZE, (p1.id,), {"objective": "docking"}), reg, t, 2)
    assert (p1.id, p2.id) == ("MOL001", "MOL002")


def test_easy_targets_pass_quickly():
    for seed in range(1, 11):
        res = episode(seed, "easy")
        assert res.success and res.iterations_used <= 3


def test_hard_targets_separate_cacm_from_raw():
    cacm = sum(episode(s, "hard").success for s in range(1, 11))
    raw = sum(episode(s, "hard", Mode.RAW).success for s in range(1, 11))
    assert raw <= 5
    assert cacm > raw
