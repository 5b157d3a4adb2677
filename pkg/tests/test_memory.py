import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from protoloop.diagnosis import ActionBias
from protoloop.memory import (
    LABELS,
    MIN_BUDGET,
    TRUNCATION_MARKER,
    ActionRecord,
    BudgetTooSmall,
    Budgets,
    CorrectiveMemory,
    DynamicMemory,
    adapt,
    build_static,
    quality_score,
    render_channel,
    satisfaction_ratio,
    summarize_pool,
    update_corrective,
    update_dynamic,
)
from protoloop.protocol import MetricField, gate
from helpers import make_pool, oracle_top_pools, oracle_top_records, random_record, random_summary

seeds = st.integers(min_value=0, max_value=2**32)


def test_default_budgets():
    assert Budgets().as_tuple() == (4, 3, 3, 1400, 1800, 1200)


def test_budget_parse():
    assert Budgets.parse("2, 2, 2, 1400, 1800, 1200") == Budgets(2, 2, 2, 1400, 1800, 1200)
    for bad in ("1,2,3", "0,3,3,1400,1800,1200", "a,3,3,1400,1800,1200"):
        with pytest.raises(ValueError):
            Budgets.parse(bad)


PASSING = {
    MetricField.POOL_SIZE: 5.0,
    MetricField.DIVERSITY: 0.85,
    MetricField.NOVELTY: 0.82,
    MetricField.QED: 0.5,
    MetricField.LIPINSKI: 3.5,
    MetricField.DOCKING: -8.0,
    MetricField.SAS: 2.5,
}


def test_quality_score_all_satisfied(kit_reqs):
    assert quality_score(PASSING, kit_reqs) == 1.0


def test_quality_score_zero_diversity(kit_reqs):
    stats = {**PASSING, MetricField.DIVERSITY: 0.0}
    assert quality_score(stats, kit_reqs) == pytest.approx(6 / 7, abs=1e-12)


def test_satisfaction_ratio_orientation(kit_reqs):
    vina = kit_reqs["vina"]
    assert satisfaction_ratio(-7.77, vina) == 1.0
    assert satisfaction_ratio(-3.885, vina) == pytest.approx(0.5)
    assert satisfaction_ratio(1.0, vina) == 0.0
    sas = kit_reqs["sas"]
    assert satisfaction_ratio(5.54, sas) == pytest.approx(0.5)
    assert satisfaction_ratio(2.0, sas) == 1.0


def test_summarize_matches_audit(kit):
    pool = kit.pools["MOL002"]
    s = summarize_pool(pool, kit.requirements, 2)
    rep = gate(pool, kit.requirements)
    assert s.worst_docking == rep.observation("vina")
    assert s.min_qed == rep.observation("qed")
    assert s.max_sas == rep.observation("sas")
    assert s.min_novelty == rep.observation("novelty")
    assert s.diversity == rep.observation("diversity")
    assert s.size == 100
    assert 0 <= s.quality_score < 1


def test_update_dynamic_keeps_best_and_recent():
    rng = random.Random(3)
    b = Budgets(K_d=2, W_d=2)
    mem = DynamicMemory()
    sums = []
    for k in range(1, 6):
        s = random_summary(rng, k)
        sums.append(s)
        mem = update_dynamic(mem, s, ActionRecord(k, ActionBias.GENERATE, s.pool_id, False), b)
    assert [a.iteration for a in mem.actions] == [4, 5]
    assert list(mem.pools) == oracle_top_pools(sums, 2)


def test_update_dynamic_without_selection_keeps_everything():
    rng = random.Random(4)
    mem = DynamicMemory()
    for k in range(1, 8):
        s = random_summary(rng, k)
        mem = update_dynamic(mem, s, ActionRecord(k, ActionBias.GENERATE, s.pool_id, False), Budgets(), select=False)
    assert len(mem.pools) == 7
    assert len(mem.actions) == 3


def test_update_corrective_merges_duplicates():
    rng = random.Random(5)
    r1 = random_record(rng, 1)
    r2 = random_record(rng, 2)
    from dataclasses import replace

    twin = replace(r1, iteration=4, pool_id="MOL004")
    mem = CorrectiveMemory()
    for r in (r1, r2, twin):
        mem = update_corrective(mem, r, Budgets())
    keys = [r.content_key for r in mem.records]
    assert len(keys) == len(set(keys))
    assert twin in mem.records and r1 not in mem.records


def test_update_corrective_without_selection_appends():
    rng = random.Random(6)
    mem = CorrectiveMemory()
    recs = [random_record(rng, k) for k in range(1, 7)]
    for r in recs:
        mem = update_corrective(mem, r, Budgets(), select=False)
    assert list(mem.records) == recs


@given(seeds)
def test_selection_matches_full_sort(seed):
    rng = random.Random(seed)
    b = Budgets(K_d=rng.randint(1, 5), W_d=rng.randint(1, 4), K_c=rng.randint(1, 4))
    dyn, cor = DynamicMemory(), CorrectiveMemory()
    sums, recs = [], []
    for k in range(1, rng.randint(1, 12) + 1):
        s = random_summary(rng, k)
        sums.append(s)
        dyn = update_dynamic(dyn, s, ActionRecord(k, ActionBias.OPTIMIZE, s.pool_id, False), b)
        if rng.random() < 0.7:
            r = random_record(rng, k)
            recs.append(r)
            cor = update_corrective(cor, r, b)
        assert list(dyn.pools) == oracle_top_pools(sums, b.K_d)
        assert list(cor.records) == oracle_top_records(recs, b.K_c)
        assert len(dyn.actions) <= b.W_d


# ---------------------------------------------------------------- rendering

def test_static_render_kit_length(kit):
    text = render_channel(build_static(kit.target_id, kit.requirements, kit.pocket), 1400, "static")
    assert abs(len(text) - 601.2) <= 0.15 * 601.2
    assert "KIT" in text and TRUNCATION_MARKER not in text


@given(seeds, st.integers(min_value=MIN_BUDGET, max_value=900))
def test_render_respects_budget(seed, budget):
    rng = random.Random(seed)
    mem = CorrectiveMemory()
    for k in range(1, 6):
        mem = update_corrective(mem, random_record(rng, k), Budgets(K_c=5), select=False)
    text = render_channel(mem, budget, "corrective")
    assert len(text) <= budget
    full = render_channel(mem, None, "corrective")
    if len(full) > budget:
        assert text.endswith(TRUNCATION_MARKER)
        assert full.startswith(text[: -len(TRUNCATION_MARKER)].rstrip("\n"))
    else:
        assert text == full


def test_budget_floor():
    with pytest.raises(BudgetTooSmall):
        render_channel(CorrectiveMemory(), MIN_BUDGET - 1, "corrective")
    with pytest.raises(ValueError):
        render_channel(CorrectiveMemory(), 500, "nonsense")


def test_render_is_pure(kit):
    static = build_static(kit.target_id, kit.requirements, kit.pocket)
    assert render_channel(static, 300, "static") == render_channel(static, 300, "static")


def test_adapt_layout():
    state = adapt("s", "d", "c")
    assert state.text == f"{LABELS[0]}\ns\n{LABELS[1]}\nd\n{LABELS[2]}\nc"
    assert state.total_chars == len(state.text)
    assert len(adapt("", "", "").text) <= Budgets().char_bound


def test_build_static_requires_inputs(kit_reqs):
    with pytest.raises(ValueError):
        build_static("", kit_reqs)


def test_corrective_entries_render_newest_first():
    rng = random.Random(8)
    mem = CorrectiveMemory()
    for k in range(1, 7):
        mem = update_corrective(mem, random_record(rng, k), Budgets())
    text = render_channel(mem, None, "corrective")
    shown = [int(line.split(";")[0].split()[1]) for line in text.splitlines() if line.startswith("Iteration ")]
    assert shown == sorted((r.iteration for r in mem.records), reverse=True)
    # a tight budget keeps the newest retained entry visible
    newest = max(r.iteration for r in mem.records)
    assert f"Iteration {newest};" in render_channel(mem, 300, "corrective")
