"""Acceptance criteria 1-9, one test each.

Every test records a PASS/FAIL line; the lines are printed in the terminal
summary (see conftest.py) and directly when run as a script.
"""

import json
import time

import numpy as np
import pytest
from conftest import random_instance, separable_dataset

from flipbound.cli import main
from flipbound.dataset import Dataset, SplitSpec, TestTarget, save_csv, split
from flipbound.exact import ExactStatus, brute_force_robustness, encode, solve_bnb, verify_certificate
from flipbound.harness import evaluate_grid
from flipbound.linsep import DEFAULT_EPS, check_consistency, feasible_labeling
from flipbound.lower import lower_bound, partition
from flipbound.reduction import Graph, min_vertex_cover, random_graph, reduced_robustness
from flipbound.seeds import derive_seed
from flipbound.trainer import LossKind, TrainConfig, loss_value, subgradient
from flipbound.upper import certify_upper, upper_bound

RESULTS: dict[int, str] = {}
SEED = 20240601


def _record(n: int, ok: bool, detail: str) -> None:
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'} - {detail}"
    RESULTS[n] = line
    print(line)


@pytest.fixture(scope="module")
def corpus():
    return [random_instance(derive_seed(SEED, "instance", i)) for i in range(100)]


@pytest.fixture(scope="module")
def exact_results(corpus):
    t0 = time.perf_counter()
    out = [solve_bnb(encode(d, t)) for d, t in corpus]
    return out, time.perf_counter() - t0


@pytest.fixture(scope="module")
def upper_reports(corpus):
    return {loss: [upper_bound(d, t, TrainConfig(loss=loss, seed=derive_seed(SEED, "upper", loss.value, i)))
                   for i, (d, t) in enumerate(corpus)]
            for loss in LossKind}


def test_criterion_1_bnb_equals_brute_force(corpus, exact_results):
    results, t_bnb = exact_results
    t0 = time.perf_counter()
    brute = [brute_force_robustness(d, t) for d, t in corpus]
    elapsed = t_bnb + time.perf_counter() - t0
    equal = sum(r.robustness == b.robustness and r.status == ExactStatus.PROVEN for r, b in zip(results, brute))
    certs = sum(verify_certificate(d, t, r.flip_set, r.witness) for (d, t), r in zip(corpus, results))
    ok = equal == 100 and certs == 100 and elapsed < 60
    _record(1, ok, f"{equal}/100 equal, {certs}/100 certificates verified, {elapsed:.1f}s (< 60s)")
    assert ok


def test_criterion_2_vertex_cover_equivalence():
    t0 = time.perf_counter()
    graphs = [random_graph(2 + i % 6, 0.4, derive_seed(SEED, "graph", i)) for i in range(50)]
    named = {"K2": Graph.complete(2), "K3": Graph.complete(3), "P4": Graph.path(4), "K1,4": Graph.star(4)}
    graphs += list(named.values())
    bad = [g for g in graphs if reduced_robustness(g) != min_vertex_cover(g)[0]]
    k3 = reduced_robustness(named["K3"])
    elapsed = time.perf_counter() - t0
    ok = not bad and k3 == 2 and elapsed < 120
    _record(2, ok, f"{len(graphs) - len(bad)}/{len(graphs)} graphs match, K3 -> {k3}, {elapsed:.1f}s (< 120s)")
    assert ok


def test_criterion_3_bound_sandwich(corpus, exact_results, upper_reports):
    results, _ = exact_results
    t0 = time.perf_counter()
    lowers = {}
    for k in (1, 2, 3):
        lowers[k] = [lower_bound(d, t, partition(d, min(k, d.m), derive_seed(SEED, "partition", k, i)))
                     for i, (d, t) in enumerate(corpus)]
    elapsed = time.perf_counter() - t0
    checks = fails = 0
    k1_exact = 0
    for i, r in enumerate(results):
        for k in (1, 2, 3):
            lo = lowers[k][i]
            for loss in LossKind:
                up = upper_reports[loss][i]
                checks += 1
                if not (lo.lower <= r.robustness and (not up.certified or r.robustness <= up.upper)):
                    fails += 1
        one = lowers[1][i]
        if one.complete and one.lower == r.robustness:
            k1_exact += 1
    ok = fails == 0 and k1_exact == 100 and elapsed < 300
    _record(3, ok, f"{checks - fails}/{checks} (instance, k, loss) sandwiches hold, "
                   f"k=1 exact on {k1_exact}/100, lower bounds {elapsed:.1f}s (< 300s)")
    assert ok


def test_criterion_4_witness_validity(corpus, exact_results, upper_reports):
    results, _ = exact_results
    n_up = ok_up = 0
    for loss in LossKind:
        for (d, t), rep in zip(corpus, upper_reports[loss]):
            if rep.certified:
                n_up += 1
                ok_up += certify_upper(rep, d, t)
    ok_ex = 0
    for (d, t), r in zip(corpus, results):
        flipped = d.flipped(r.flip_set)
        mis, tgt = check_consistency(r.witness, (flipped.features, flipped.labels), t)
        fw = feasible_labeling((flipped.features, flipped.labels), t)
        ok_ex += (not mis) and tgt is True and fw.feasible and fw.margin >= DEFAULT_EPS - 1e-7
    ok = ok_up == n_up and n_up > 0 and ok_ex == len(results)
    _record(4, ok, f"{ok_up}/{n_up} certified upper reports and {ok_ex}/{len(results)} exact results re-check")
    assert ok


def test_criterion_5_milp_semantics():
    rng = np.random.default_rng(derive_seed(SEED, "milp-semantics"))
    data = Dataset(rng.integers(-2, 3, size=(5, 2)), [1, -1, 1, 1, -1])
    target = TestTarget([1.0, 0.5], 1)
    inst = encode(data, target)
    A, rhs, senses = inst.base.A, inst.base.rhs, inst.base.senses
    ge = np.array([s == ">=" for s in senses])
    y = data.labels
    found = bad = 0
    while found < 1000:
        wb = rng.uniform(-3, 3, size=3)
        delta = rng.integers(0, 2, size=5).astype(float)
        x = np.concatenate([wb, delta])
        act = A @ x
        if not (np.all(act[ge] >= rhs[ge]) and np.all(act[~ge] <= rhs[~ge])):
            continue
        found += 1
        margin = y * (data.features @ wb[:2] + wb[2])
        for i in range(5):
            if delta[i] == 0 and not margin[i] >= inst.eps:
                bad += 1
            if delta[i] == 1 and not margin[i] <= -inst.eps:
                bad += 1
    ok = bad == 0
    _record(5, ok, f"{found} feasible assignments, {bad} indicator/margin violations")
    assert ok


def test_criterion_6_loss_gradients():
    kinks = {LossKind.HINGE: (1.0,), LossKind.LOG: (), LossKind.MODIFIED_HUBER: (-1.0, 1.0)}
    h = 1e-6
    worst = 0.0
    n = 0
    for kind in LossKind:
        rng = np.random.default_rng(derive_seed(SEED, "fd", kind.value))
        done = 0
        while done < 100:
            z = float(rng.uniform(-5, 5))
            if any(abs(z - k) < 1e-3 for k in kinks[kind]):
                continue
            fd = (loss_value(kind, z + h) - loss_value(kind, z - h)) / (2 * h)
            worst = max(worst, abs(fd - subgradient(kind, z)))
            done += 1
        n += done
    ok = worst <= 1e-5
    _record(6, ok, f"{n} margins over 3 losses, max |fd - subgradient| = {worst:.2e} (<= 1e-5)")
    assert ok


def test_criterion_7_poisoning_shape():
    t0 = time.perf_counter()
    data = separable_dataset(200, 5, derive_seed(SEED, "poisoning"))
    train_set, test = split(data, SplitSpec(0.1, derive_seed(SEED, "poisoning-split")))
    grids = evaluate_grid(train_set, test, seed=SEED)
    elapsed = time.perf_counter() - t0
    rho_ok = sum(g.rho(1.0) >= g.rho(0.0) for g in grids)
    acc_ok = sum(g.accuracy(4.0) <= g.accuracy(0.0) for g in grids)
    ok = test.m == 20 and rho_ok == 9 and acc_ok == 9 and elapsed < 300
    _record(7, ok, f"rho(1) >= rho(0) in {rho_ok}/9 cells, acc(4) <= acc(0) in {acc_ok}/9 cells, "
                   f"{test.m} targets, {elapsed:.1f}s (< 300s)")
    assert ok


def test_criterion_8_public_dataset_smoke(tmp_path):
    from sklearn.datasets import load_breast_cancer

    X, y = load_breast_cancer(return_X_y=True)
    save_csv(Dataset(X, np.where(y == 1, 1, -1)), tmp_path / "wdbc.csv")
    t0 = time.perf_counter()
    rc = main(["bounds", "--train", str(tmp_path / "wdbc.csv"), "--target-index", ",".join(map(str, range(10))),
               "--standardize", "--seed", str(SEED), "--out", str(tmp_path / "out"), "--log-level", "WARNING"])
    elapsed = time.perf_counter() - t0
    report = json.loads((tmp_path / "out" / "report.json").read_text())
    done = [t for t in report["targets"] if "error" not in t]
    certified = [t for t in done if t["upper_certified"]]
    sandwich = all(t["lower"] <= t["upper"] for t in certified)
    ok = rc == 0 and len(done) == 10 and sandwich and elapsed < 1800
    _record(8, ok, f"{len(done)}/10 targets on {X.shape[0]}x{X.shape[1]} data, {len(certified)} certified, "
                   f"lower <= upper: {sandwich}, {elapsed:.1f}s (< 1800s)")
    assert ok


def test_criterion_9_determinism(tmp_path):
    data = separable_dataset(40, 3, derive_seed(SEED, "det"))
    save_csv(data, tmp_path / "d.csv")
    argv = ["bounds", "--train", str(tmp_path / "d.csv"), "--target-index", "all", "--k", "3",
            "--trials", "4", "--seed", "7", "--out", str(tmp_path / "run")]
    blobs = []
    manifests = []
    for _ in range(2):
        assert main(argv + ["--threads", "1", "--log-level", "WARNING"]) == 0
        blobs.append((tmp_path / "run" / "report.json").read_bytes())
        manifests.append(json.loads((tmp_path / "run" / "manifest.json").read_text()))
    assert main(["replay", str(tmp_path / "run" / "manifest.json"), "--out", str(tmp_path / "replay"),
                 "--log-level", "WARNING"]) == 0
    blobs.append((tmp_path / "replay" / "report.json").read_bytes())
    ok = manifests[0] == manifests[1] and len(set(blobs)) == 1
    _record(9, ok, f"{len(blobs)} runs from identical manifests, {len(set(blobs))} distinct report.json")
    assert ok


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q", "-s"]))
