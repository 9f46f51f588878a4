"""The ten acceptance criteria, each at its stated tolerance and time budget.

Every test records a one-line PASS/FAIL verdict, printed in the terminal
summary (see conftest.py) and echoed with ``-s``.
"""
import hashlib
import math
import time

import numpy as np
import pytest

from conftest import ACCEPTANCE
from segan import cli
from segan.data import Dataset, encode, inject_mcar, load_csv
from segan.evaluation import (
    downstream_compare,
    evaluate_dataset,
    hint_accuracy,
    run_ablation,
    sweep_missing_rate,
)
from segan.model import (
    build_model,
    classifier_loss,
    classifier_step,
    discriminator_loss,
    discriminator_step,
    generator_forward,
    generator_step,
    impute_combine,
    noise_fill,
    reconstruction_loss,
    sample_hint,
)
from segan.numerics import mlp_backward, mlp_forward, named_grads, named_params
from segan.synthetic import separable_binary, write_table
from segan.training import TrainConfig, impute, train
from test_numerics import _check_fd, _random_net

SEEDS = [0, 1, 2, 3, 4]
MCAR = 0.3


def _report(number, ok, detail):
    ACCEPTANCE[number] = (bool(ok), detail)
    print(f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}")
    assert ok, detail


@pytest.fixture(scope="module")
def ablation(gaussian):
    t0 = time.perf_counter()
    table = run_ablation(gaussian, TrainConfig(), SEEDS, missing_rate=MCAR)
    return table, time.perf_counter() - t0


def test_criterion_01_gradients():
    t0 = time.perf_counter()
    worst_layer = 0.0
    for seed in range(20):
        rng = np.random.default_rng(seed)
        layers = _random_net(rng)
        x = rng.normal(size=(layers[0].in_dim, 5))
        w = rng.normal(size=(layers[-1].out_dim, 5))
        _, cache = mlp_forward(layers, x)
        grads, _ = mlp_backward(layers, cache, w)
        worst_layer = max(worst_layer, _check_fd(
            lambda: float(np.sum(w * mlp_forward(layers, x)[0])),
            named_params("net", layers), named_grads("net", grads), rtol=1e-4))

    rng = np.random.default_rng(42)
    model = build_model(3, 2, rng, hidden=5)
    for layer in model.disc_head + model.clf_head:
        layer.weight *= 3.0
    mask = np.array([[1, 0, 1, 1], [0, 1, 1, 0], [1, 1, 0, 1]], dtype=float)
    x = np.where(mask == 1, rng.random((3, 4)), np.nan)
    x_noisy = noise_fill(x, mask, rng)
    hint = sample_hint(mask, 0.5, rng).hint
    labels = np.array([0, 1, -1, 1])
    x_hat = impute_combine(np.nan_to_num(x), generator_forward(model, x_noisy, mask), mask)

    _, g_grads = generator_step(model, x, x_noisy, mask, hint, labels)
    worst_full = _check_fd(lambda: generator_step(model, x, x_noisy, mask, hint, labels)[0].total,
                           model.generator_params(), g_grads, rtol=1e-3)
    for step, args in ((discriminator_step, (x_hat, mask, hint)), (classifier_step, (x_hat, labels))):
        _, grads = step(model, *args)
        params = {k: v for k, v in model.critic_params().items() if k in grads}
        worst_full = max(worst_full, _check_fd(lambda: step(model, *args)[0], params, grads,
                                               rtol=1e-3))
    elapsed = time.perf_counter() - t0
    _report(1, worst_layer < 1e-4 and worst_full < 1e-3 and elapsed < 10,
            f"worst rel err layers {worst_layer:.2e} (<1e-4), full losses {worst_full:.2e} "
            f"(<1e-3), {elapsed:.1f}s (<10s)")


def test_criterion_02_mask_preservation():
    t0 = time.perf_counter()
    rng = np.random.default_rng(2024)
    violations = 0
    for i in range(1000):
        d, n = int(rng.integers(1, 9)), int(rng.integers(1, 40))
        mask = (rng.random((d, n)) >= rng.uniform(0, 0.9)).astype(float)
        values = np.where(mask == 1, rng.normal(size=(d, n)), np.nan)
        ds = Dataset(values, mask, np.full(n, -1))
        model = build_model(d, 0, rng, hidden=16, with_classifier=False)
        out = impute(model, ds, seed=i)
        obs = mask == 1
        if not np.array_equal(out[obs], values[obs]) or np.isnan(out).any():
            violations += 1
    elapsed = time.perf_counter() - t0
    _report(2, violations == 0 and elapsed < 5,
            f"{violations}/1000 instances violated M*X_hat = M*X, {elapsed:.2f}s (<5s)")


def test_criterion_03_hint_law():
    t0 = time.perf_counter()
    rng = np.random.default_rng(3)
    mask = (rng.random((100, 100)) < 0.7).astype(float)
    details, ok = [], True
    for rate in (0.0, 0.5, 0.8, 1.0):
        h = sample_hint(mask, rate, rng)
        k = h.reveal == 1
        table_ok = np.array_equal(h.hint[k], mask[k]) and bool((h.hint[~k] == 0.5).all())
        frac = float(np.mean(h.hint == 0.5))
        ok &= table_ok and abs(frac - (1 - rate)) <= 0.02
        details.append(f"rate {rate}: R=0.5 frac {frac:.4f}")
    ok &= np.array_equal(sample_hint(mask, 1.0, rng).hint, mask)
    elapsed = time.perf_counter() - t0
    _report(3, ok and elapsed < 1, "; ".join(details) + f"; {elapsed:.3f}s (<1s)")


def test_criterion_04_loss_identities():
    rng = np.random.default_rng(4)
    mask = (rng.random((5, 7)) < 0.5).astype(float)
    ld = discriminator_loss(mask, np.full_like(mask, 0.5))
    labels = rng.integers(0, 3, size=7)
    lc = classifier_loss(labels, np.full((3, 7), 1 / 3))
    x = rng.random((5, 7))
    rec_equal = reconstruction_loss(x, x.copy(), mask)
    rec_nomask = reconstruction_loss(x, rng.random((5, 7)), np.zeros_like(mask))
    ok = (abs(ld - math.log(2)) < 1e-9 and abs(lc - math.log(3)) < 1e-9
          and rec_equal == 0.0 and rec_nomask == 0.0)
    _report(4, ok, f"|L_D - ln2| {abs(ld - math.log(2)):.1e}, |L_C - ln3| "
                   f"{abs(lc - math.log(3)):.1e}, L_rec(X_bar=X) {rec_equal}, L_rec(M=0) {rec_nomask}")


def test_criterion_05_imputation_gain(gaussian, ablation):
    table, elapsed = ablation
    t0 = time.perf_counter()
    baseline = evaluate_dataset(gaussian, TrainConfig(), SEEDS, "mean", MCAR)
    segan = table["full"]
    elapsed = elapsed / 4 + time.perf_counter() - t0  # one of the four variants is this run
    gain = 1 - segan.rmse / baseline.rmse
    _report(5, gain >= 0.10 and elapsed < 300,
            f"SEGAN rmse {segan.rmse:.4f} vs mean {baseline.rmse:.4f}: {gain:.1%} lower "
            f"(>=10%), ~{elapsed:.0f}s (<300s)")


def test_criterion_06_ablation_trend(ablation):
    table, elapsed = ablation
    full = table["full"].rmse
    others = {k: v.rmse for k, v in table.items() if k != "full"}
    ok = all(full <= r + 0.005 for r in others.values()) and elapsed < 900
    listing = ", ".join(f"{k} {v:.4f}" for k, v in others.items())
    _report(6, ok, f"full {full:.4f}; {listing} (slack 0.005), {elapsed:.0f}s (<900s)")


def test_criterion_07_missing_rate_trend(gaussian):
    t0 = time.perf_counter()
    (_, low), (_, high) = sweep_missing_rate(gaussian, TrainConfig(), [0.2, 0.8], SEEDS)
    elapsed = time.perf_counter() - t0
    _report(7, low.rmse < high.rmse and elapsed < 900,
            f"rmse at 0.2 {low.rmse:.4f} < at 0.8 {high.rmse:.4f}, {elapsed:.0f}s (<900s)")


# Frozen after the first baseline run (seeds 0-4): hinted accuracy >0.999 and
# unhinted 0.653-0.670, against an observed-entry base rate of 0.70.
HINTED_MIN = 0.95
UNHINTED_BAND = (0.45, 0.70)


def test_criterion_08_hint_accuracy(gaussian):
    hinted, unhinted = [], []
    for seed in SEEDS:
        ds = inject_mcar(gaussian, MCAR, np.random.default_rng(seed), gaussian.groups)
        model, rep = train(ds, TrainConfig(seed=seed))
        assert len(rep.epochs) == 30
        h, u = hint_accuracy(model, ds, impute(model, ds, seed), 0.8, seed)
        hinted.append(h)
        unhinted.append(u)
    lo, hi = UNHINTED_BAND
    ok = min(hinted) > HINTED_MIN and all(lo <= u <= hi for u in unhinted)
    _report(8, ok, f"hinted acc min {min(hinted):.4f} (>{HINTED_MIN}); unhinted acc "
                   f"{', '.join(f'{u:.3f}' for u in unhinted)} (in [{lo}, {hi}])")


def _sha(path):
    return hashlib.sha256(path.read_bytes()).hexdigest()


def test_criterion_09_cli_determinism(tmp_path):
    src = tmp_path / "toy.csv"
    x, y = separable_binary(n=300, d=4, seed=9)
    write_table(src, x, y, missing_rate=0.2, seed=9)
    common = ["--input", str(src), "--label-col", "label", "--epochs", "3"]
    runs = {
        "impute": ["impute", *common, "--seed", "5"],
        "eval": ["eval", *common, "--seeds", "0,1"],
        "sweep": ["sweep", *common, "--seeds", "0", "--rates", "0.2,0.6"],
        "ablate": ["ablate", *common, "--seeds", "0"],
        "downstream": ["downstream", *common, "--seeds", "0", "--missing-rate", "0.3"],
    }
    mismatched = []
    for name, argv in runs.items():
        first = tmp_path / f"{name}.out"
        assert cli.main([*argv, "--out", str(first)]) == 0
        second = tmp_path / f"{name}.replay"
        assert cli.main(["replay", f"{first}.manifest.json", "--out", str(second)]) == 0
        pairs = [(first, second)]
        if name == "impute":
            pairs.append((tmp_path / "impute.out.model", tmp_path / "impute.replay.model"))
        if any(_sha(a) != _sha(b) for a, b in pairs):
            mismatched.append(name)
    _report(9, not mismatched,
            f"{len(runs) - len(mismatched)}/{len(runs)} commands reproduced byte-identically"
            + (f"; mismatched: {mismatched}" if mismatched else ""))


def test_criterion_10_downstream(tmp_path):
    t0 = time.perf_counter()
    path = tmp_path / "separable.csv"
    # correlated features: with independent ones the column mean is already the
    # best possible fill and no imputer can beat it
    write_table(path, *separable_binary(n=2000, d=8, seed=10, rho=0.8))
    table, schema = load_csv(path, "label")
    ds = encode(table, schema)
    target = ds.labels.copy()
    segan = downstream_compare(ds, target, "classification", TrainConfig(), SEEDS, "segan", MCAR)
    mean = downstream_compare(ds, target, "classification", TrainConfig(), SEEDS, "mean", MCAR)
    elapsed = time.perf_counter() - t0
    _report(10, segan.auc >= mean.auc and elapsed < 600,
            f"AUC SEGAN {segan.auc:.4f} >= mean-imputed {mean.auc:.4f}, {elapsed:.0f}s (<600s)")
