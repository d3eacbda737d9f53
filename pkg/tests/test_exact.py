import numpy as np
import pytest
from conftest import random_instance

from flipbound.dataset import Dataset, TestTarget
from flipbound.exact import (
    BRUTE_FORCE_LIMIT,
    BruteForceLimitError,
    ExactStatus,
    TargetUnreachableError,
    brute_force_robustness,
    dump_instance,
    encode,
    solve_bnb,
    verify_certificate,
)
from flipbound.linsep import check_consistency, feasible_labeling
from flipbound.reduction import Graph, reduce


def _one(x, y):
    return Dataset(np.array([[float(x)]]), [y])


def test_encode_counts():
    data = Dataset(np.arange(6.0).reshape(3, 2), [1, -1, 1])
    inst = encode(data, TestTarget([0.0, 1.0], 1))
    assert inst.base.A.shape == (7, 6)
    assert inst.binary_indices == (3, 4, 5)
    assert inst.base.senses == (">=",) * 4 + ("<=",) * 3


def test_encode_validates():
    data = _one(1, 1)
    with pytest.raises(ValueError):
        encode(data, TestTarget([1.0], 1), bigM=1e-12, eps=1e-10)
    with pytest.raises(ValueError):
        encode(data, TestTarget([1.0, 2.0], 1))


def test_identical_point_forces_flip():
    res = solve_bnb(encode(_one(1, 1), TestTarget([1.0], -1)))
    assert res.robustness == 1 and res.flip_set == (0,)
    assert res.status == ExactStatus.PROVEN


def test_separable_one_dimensional():
    res = solve_bnb(encode(_one(1, 1), TestTarget([2.0], -1)))
    assert res.robustness == 0 and res.flip_set == ()


def test_k3_needs_two_flips_through_origin():
    data, target = reduce(Graph.complete(3))
    res = solve_bnb(encode(data, target, bias=False))
    assert res.robustness == 2
    assert verify_certificate(data, target, res.flip_set, res.witness, bias=False)
    assert brute_force_robustness(data, target, bias=False).robustness == 2


def test_k3_with_free_bias_is_not_robust():
    # the biased class can already reach the target: b = -1, w = (0.9, 0.9, 0.9, 0)
    data, target = reduce(Graph.complete(3))
    assert solve_bnb(encode(data, target)).robustness == 0


def test_brute_force_examples():
    assert brute_force_robustness(_one(1, 1), TestTarget([2.0], -1)).robustness == 0
    assert brute_force_robustness(_one(1, 1), TestTarget([1.0], -1)).robustness == 1


def test_brute_force_limit():
    m = BRUTE_FORCE_LIMIT + 1
    data = Dataset(np.arange(float(m))[:, None], [1] * m)
    with pytest.raises(BruteForceLimitError):
        brute_force_robustness(data, TestTarget([0.5], 1))


def test_unreachable_target_is_an_error():
    # a zero target can never have a strictly positive margin through the origin
    with pytest.raises(TargetUnreachableError):
        solve_bnb(encode(_one(1, 1), TestTarget([0.0], 1), bias=False))
    with pytest.raises(TargetUnreachableError):
        brute_force_robustness(_one(1, 1), TestTarget([0.0], 1), bias=False)


def test_bnb_matches_brute_force_and_certificates(instances):
    for data, target in instances[:40]:
        res = solve_bnb(encode(data, target))
        assert res.status == ExactStatus.PROVEN
        assert res.robustness == brute_force_robustness(data, target).robustness
        assert verify_certificate(data, target, res.flip_set, res.witness)
        flipped = data.flipped(res.flip_set)
        fw = feasible_labeling((flipped.features, flipped.labels), target)
        assert fw.feasible and fw.margin >= 1e-10 - 1e-7


def test_homogeneous_bnb_matches_brute_force():
    for s in range(30):
        data, target = random_instance(1000 + s)
        try:
            ref = brute_force_robustness(data, target, bias=False).robustness
        except TargetUnreachableError:
            with pytest.raises(TargetUnreachableError):
                solve_bnb(encode(data, target, bias=False))
            continue
        assert solve_bnb(encode(data, target, bias=False)).robustness == ref


def test_adding_a_point_never_decreases_robustness():
    rng = np.random.default_rng(4)
    for s in range(25):
        data, target = random_instance(200 + s)
        r = solve_bnb(encode(data, target)).robustness
        x = rng.integers(-2, 3, size=data.d)
        bigger = Dataset(np.vstack([data.features, x]), np.append(data.labels, rng.choice([-1, 1])))
        assert solve_bnb(encode(bigger, target)).robustness >= r


def test_budget_exhaustion_keeps_a_valid_upper_answer():
    hits = 0
    for s in range(40):
        data, target = random_instance(s)
        full = solve_bnb(encode(data, target))
        part = solve_bnb(encode(data, target), node_budget=1)
        if part.status == ExactStatus.BUDGET_EXHAUSTED:
            hits += 1
            assert part.best_bound <= full.robustness <= part.robustness
            flipped = data.flipped(part.flip_set)
            mis, ok = check_consistency(part.witness, (flipped.features, flipped.labels), target)
            assert not mis and ok
        else:
            assert part.robustness == full.robustness
    assert hits > 0


def test_incumbent_hints():
    data, target = random_instance(13)
    plain = solve_bnb(encode(data, target))
    assert solve_bnb(encode(data, target), incumbent_hint=plain.robustness).robustness == plain.robustness
    assert solve_bnb(encode(data, target), incumbent_hint=plain.flip_set).robustness == plain.robustness
    # a bogus flip-set hint is verified and ignored
    bogus = solve_bnb(encode(data, target), incumbent_hint=[])
    assert bogus.robustness == plain.robustness


def test_verify_certificate_rejects_bad_witness():
    data, target = reduce(Graph.complete(3))
    res = solve_bnb(encode(data, target, bias=False))
    assert not verify_certificate(data, target, res.flip_set[:1], res.witness, bias=False)


def test_dump_instance_text():
    inst = encode(_one(1, 1), TestTarget([2.0], -1))
    text = dump_instance(inst)
    assert text.startswith("Minimize\n obj: 1 delta1\n")
    assert "Subject To" in text and "Binaries\n delta1" in text and text.endswith("End\n")
    assert text.count(" c") == 3
