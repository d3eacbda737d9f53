import numpy as np
import pytest
from conftest import separable_dataset

from flipbound.dataset import Dataset, TestTarget
from flipbound.exact import brute_force_robustness
from flipbound.linsep import LinearClassifier
from flipbound.trainer import LossKind, TrainConfig
from flipbound.upper import augment, certify_upper, upper_bound


def test_augment_default_size():
    data = Dataset(np.arange(10.0).reshape(5, 2), [1, -1, 1, -1, 1])
    t = TestTarget([9.0, 9.0], -1)
    aug = augment(data, t, data.m + 1)
    assert aug.m == 11
    assert np.array_equal(aug.features[:5], data.features)
    assert np.all(aug.features[5:] == [9.0, 9.0]) and np.all(aug.labels[5:] == -1)
    assert augment(data, t, 1).m == 6
    with pytest.raises(ValueError):
        augment(data, t, 0)


def test_separable_target_gives_zero():
    data = separable_dataset(40, 2, seed=8)
    w = np.linalg.lstsq(data.features, data.labels, rcond=None)[0]
    target = TestTarget(3 * w / np.linalg.norm(w), 1)
    rep = upper_bound(data, target, TrainConfig())
    assert rep.certified and rep.upper == 0


def test_identical_point_costs_one():
    data = Dataset(np.array([[1.0]]), [1])
    rep = upper_bound(data, TestTarget([1.0], -1), TrainConfig())
    assert rep.certified and rep.upper == 1 and rep.flip_set == (0,)


def test_minimum_over_trials_and_report_shape(instances):
    data, target = instances[3]
    rep = upper_bound(data, target, TrainConfig(seed=4), n_trials=10)
    assert len(rep.trials) == 10
    assert len({t.seed for t in rep.trials}) == 10
    ok = [t.misclassified for t in rep.trials if t.target_ok]
    if ok:
        assert rep.upper == min(ok)
    d = rep.to_dict()
    assert {"upper", "certified", "flip_set", "witness", "trials"} <= set(d)


def test_all_fail_falls_back_uncertified(caplog):
    # one target copy against three identical opposite points: the bias sides with the majority
    data = Dataset(np.zeros((3, 1)), [1, 1, 1])
    target = TestTarget([0.0], -1)
    rep = upper_bound(data, target, TrainConfig(epochs_max=1), n_trials=2, k_prime=1)
    if rep.certified:
        pytest.skip("training happened to reach the target")
    assert rep.upper == data.m and rep.witness is None
    assert "falling back" in caplog.text


def test_certify_rejects_zero_witness(instances):
    data, target = instances[0]
    rep = upper_bound(data, target, TrainConfig())
    rep.witness = LinearClassifier(np.zeros(data.d), 0.0)
    assert not certify_upper(rep, data, target)


@pytest.mark.parametrize("loss", list(LossKind))
def test_certified_reports_sound(instances, loss):
    for s, (data, target) in enumerate(instances):
        rep = upper_bound(data, target, TrainConfig(loss=loss, seed=s), n_trials=3)
        if not rep.certified:
            continue
        assert certify_upper(rep, data, target)
        if s < 30:
            assert rep.upper >= brute_force_robustness(data, target).robustness


def test_determinism(instances):
    data, target = instances[11]
    a = upper_bound(data, target, TrainConfig(seed=9)).to_dict()
    b = upper_bound(data, target, TrainConfig(seed=9)).to_dict()
    assert a == b
