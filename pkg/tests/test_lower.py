import numpy as np
import pytest
from conftest import separable_dataset

from flipbound.dataset import Dataset, TestTarget
from flipbound.exact import ExactStatus, brute_force_robustness
from flipbound.lower import K_PRESETS, MilpParams, default_k, lower_bound, partition


def test_block_sizes_remainder_in_last():
    plan = partition(10, 3, seed=1)
    assert [len(b) for b in plan.block_indices] == [3, 3, 4]
    assert sorted(i for b in plan.block_indices for i in b) == list(range(10))


def test_single_and_singleton_blocks():
    assert partition(7, 1, 0).block_indices == (tuple(range(7)),)
    plan = partition(5, 5, 0)
    assert all(len(b) == 1 for b in plan.block_indices)


def test_partition_rejects_bad_k():
    with pytest.raises(ValueError):
        partition(4, 0, 0)
    with pytest.raises(ValueError):
        partition(4, 5, 0)


def test_partition_deterministic():
    assert partition(50, 4, 9) == partition(50, 4, 9)
    assert partition(50, 4, 9) != partition(50, 4, 10)


def test_singleton_blocks_are_zero_or_one(instances):
    for data, target in instances[:20]:
        rep = lower_bound(data, target, partition(data, data.m, 3))
        assert all(b.r in (0, 1) for b in rep.per_block)


def test_separable_dataset_gives_zero():
    data = separable_dataset(30, 2, seed=2)
    w = np.linalg.lstsq(data.features, data.labels, rcond=None)[0]
    target = TestTarget(2 * w / np.linalg.norm(w), 1)
    rep = lower_bound(data, target, partition(data, 3, 0))
    assert rep.lower == 0 and rep.complete


def test_sandwich_and_k1_equality(instances):
    for data, target in instances[:40]:
        r = brute_force_robustness(data, target).robustness
        one = lower_bound(data, target, partition(data, 1, 0))
        assert one.complete and one.lower == r
        three = lower_bound(data, target, partition(data, min(3, data.m), 0))
        assert three.lower <= r
        assert three.lower == sum(b.r for b in three.per_block if b.status == ExactStatus.PROVEN.value)


def test_budget_exhausted_blocks_contribute_zero(instances):
    for data, target in instances:
        rep = lower_bound(data, target, partition(data, 1, 0), MilpParams(node_budget=1))
        if not rep.complete:
            assert rep.lower == 0
            assert rep.per_block[0].status == ExactStatus.BUDGET_EXHAUSTED.value
            return
    pytest.skip("no instance exhausted a one-node budget")


def test_report_json_shape_and_determinism(instances):
    data, target = instances[5]
    a = lower_bound(data, target, partition(data, 2, 4)).to_dict(timing=False)
    b = lower_bound(data, target, partition(data, 2, 4)).to_dict(timing=False)
    assert a == b
    assert set(a) == {"lower", "k", "seed", "blocks"}
    full = lower_bound(data, target, partition(data, 2, 4)).to_dict()
    assert {"id", "size", "r", "status", "millis"} <= set(full["blocks"][0])


def test_threads_do_not_change_result(instances):
    data, target = instances[8]
    plan = partition(data, min(3, data.m), 1)
    one = lower_bound(data, target, plan, threads=1).to_dict(timing=False)
    two = lower_bound(data, target, plan, threads=2).to_dict(timing=False)
    assert one == two


def test_upper_flip_set_hint_is_harmless(instances):
    from flipbound.exact import encode, solve_bnb
    for data, target in instances[:15]:
        best = solve_bnb(encode(data, target))
        plan = partition(data, min(2, data.m), 0)
        assert (lower_bound(data, target, plan, upper_flip_set=best.flip_set).lower
                == lower_bound(data, target, plan).lower)


def test_default_k():
    assert default_k(100, 4) == 10
    assert default_k(5, 4) == 1
    assert default_k(25, 4) == 2
    assert 20 in K_PRESETS and 1000 in K_PRESETS


def test_plan_must_cover_dataset():
    data = Dataset(np.arange(4.0)[:, None], [1, -1, 1, -1])
    plan = partition(3, 1, 0)
    with pytest.raises(ValueError):
        lower_bound(data, TestTarget([0.5], 1), plan)
