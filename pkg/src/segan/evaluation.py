"""Holdout RMSE protocol, missing-rate sweeps, ablations and downstream scoring."""
from __future__ import annotations

import logging
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.stats import rankdata

from .data import Dataset, encode, holdout_known, inject_mcar, load_csv, mask_labels
from .errors import ConfigError, DivergenceError, EvaluationError
from .model import discriminator_forward, sample_hint
from .numerics import AdamState, adam_step, init_layer, mlp_backward, mlp_forward, named_grads, named_params
from .training import VARIANTS, TrainConfig, build_variant, impute, train

log = logging.getLogger(__name__)

METHODS = ("segan", "mean", "mode")
DEFAULT_RATES = (0.2, 0.4, 0.6, 0.8)
HOLDOUT_FRACTION = 0.2


@dataclass
class EvalResult:
    rmse: float  # mean over surviving seeds
    per_seed: list
    seeds: list
    std: float
    config: dict = field(default_factory=dict)
    failures: dict = field(default_factory=dict)  # seed -> error message

    @property
    def mean(self) -> float:
        return self.rmse


@dataclass
class DownstreamResult:
    task: str
    seeds: list
    auc: float | None = None
    mae: float | None = None
    per_seed_auc: list | None = None
    per_seed_mae: list | None = None


def rmse(imputed, truth, holdout) -> float:
    """Root mean squared error over the entries flagged in ``holdout``."""
    holdout = np.asarray(holdout, dtype=bool)
    if not holdout.any():
        raise EvaluationError("holdout set is empty")
    diff = imputed[holdout] - truth[holdout]
    return float(np.sqrt(np.mean(diff * diff)))


def mean_impute(dataset: Dataset) -> np.ndarray:
    """Fill each feature row with its observed mean (0 if nothing observed)."""
    obs = dataset.mask == 1
    counts = obs.sum(axis=1, keepdims=True)
    sums = np.where(obs, dataset.values, 0.0).sum(axis=1, keepdims=True)
    means = np.divide(sums, counts, out=np.zeros_like(sums), where=counts > 0)
    return np.where(obs, dataset.values, means)


def mode_impute(dataset: Dataset) -> np.ndarray:
    """Fill each feature row with its most frequent observed value."""
    out = np.nan_to_num(dataset.values, nan=0.0).copy()
    for j in range(dataset.d):
        obs = dataset.mask[j] == 1
        if not obs.any():
            continue
        vals, counts = np.unique(dataset.values[j, obs], return_counts=True)
        out[j, ~obs] = vals[np.argmax(counts)]
    return out


def _split_rng(seed, purpose):
    return np.random.default_rng(np.random.SeedSequence([seed & 0xFFFFFFFFFFFFFFFF, purpose]))


def prepare_split(dataset: Dataset, seed: int, missing_rate: float | None = None,
                  label_rate: float = 1.0):
    """Seeded MCAR injection, 20% holdout and label masking.

    Depends only on ``seed`` so every method and variant sees the same split.
    Returns ``(training_dataset, holdout, truth)``.
    """
    rng = _split_rng(seed, 0x5B17)
    if missing_rate is not None:
        dataset = inject_mcar(dataset, missing_rate, rng, dataset.groups)
    train_mask, holdout = holdout_known(dataset.mask, HOLDOUT_FRACTION, rng, dataset.groups)
    training = dataset.with_mask(train_mask)
    if label_rate < 1.0 and np.any(training.labels >= 0):
        training.labels = mask_labels(training.labels, label_rate, rng)
    return training, holdout, dataset.values


def complete(training: Dataset, method: str, config: TrainConfig, seed: int) -> np.ndarray:
    if method == "mean":
        return mean_impute(training)
    if method == "mode":
        return mode_impute(training)
    if method != "segan":
        raise ConfigError(f"unknown method {method!r}; expected one of {METHODS}")
    config = resolve_for_dataset(config, training)
    model, _ = train(training, replace(config, seed=seed))
    return impute(model, training, seed)


def resolve_for_dataset(config: TrainConfig, dataset: Dataset) -> TrainConfig:
    """Drop the classifier term when the dataset carries no usable labels."""
    if config.beta > 0 and (dataset.n_classes < 2 or not np.any(dataset.labels >= 0)):
        return replace(config, beta=0.0)
    return config


def _run_cell(args):
    dataset, config, seed, method, missing_rate = args
    training, holdout, truth = prepare_split(dataset, seed, missing_rate, config.label_rate)
    completed = complete(training, method, config, seed)
    return rmse(completed, truth, holdout)


def _map(fn, cells, jobs):
    if jobs <= 1:
        return [_guard(fn, c) for c in cells]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_guard, [fn] * len(cells), cells))


def _guard(fn, cell):
    try:
        return fn(cell)
    except DivergenceError as exc:
        return exc


def evaluate_dataset(dataset: Dataset, config: TrainConfig, seeds, method: str = "segan",
                     missing_rate: float | None = None, jobs: int = 1) -> EvalResult:
    """Per seed: split, train/complete, score the holdout; then aggregate."""
    seeds = list(seeds)
    if not seeds:
        raise ConfigError("at least one seed is required")
    outcomes = _map(_run_cell, [(dataset, config, s, method, missing_rate) for s in seeds], jobs)
    per_seed, kept, failures = [], [], {}
    for s, out in zip(seeds, outcomes):
        if isinstance(out, Exception):
            log.warning("seed %s failed: %s", s, out)
            failures[s] = str(out)
        else:
            per_seed.append(out)
            kept.append(s)
    if not per_seed:
        raise EvaluationError(f"every seed failed: {failures}")
    mean = float(np.mean(per_seed))
    std = statistics.stdev(per_seed) if len(per_seed) > 1 else 0.0
    snapshot = {**config.to_dict(), "method": method, "missing_rate": missing_rate}
    return EvalResult(mean, per_seed, kept, std, snapshot, failures)


def load_dataset(path, label_column=None):
    table, schema = load_csv(path, label_column)
    return encode(table, schema)


def run_experiment(path, config: TrainConfig, seeds, label_column=None, method="segan",
                   missing_rate: float | None = None, jobs: int = 1) -> EvalResult:
    """load -> encode -> [MCAR] -> holdout 20% -> train -> impute -> RMSE, per seed."""
    dataset = load_dataset(path, label_column)
    return evaluate_dataset(dataset, config, seeds, method, missing_rate, jobs)


def sweep_missing_rate(dataset: Dataset, config: TrainConfig, rates=DEFAULT_RATES, seeds=(0,),
                       method="segan", jobs: int = 1):
    rates = list(rates)
    if any(not 0 < r < 1 for r in rates) or rates != sorted(rates):
        raise ConfigError(f"rates must be ascending and inside (0, 1): {rates}")
    return [(r, evaluate_dataset(dataset, config, seeds, method, r, jobs)) for r in rates]


def run_ablation(dataset: Dataset, config: TrainConfig, seeds, missing_rate=None, jobs: int = 1):
    """All four variants on identical per-seed splits."""
    return {
        v: evaluate_dataset(dataset, build_variant(config, v), seeds, "segan", missing_rate, jobs)
        for v in VARIANTS
    }


def hint_accuracy(model, dataset: Dataset, completed: np.ndarray, hint_rate: float, seed: int = 0):
    """Discriminator accuracy (threshold 0.5) on revealed vs hidden hint entries."""
    hint = sample_hint(dataset.mask, hint_rate, _split_rng(seed, 0x41C7))
    m_hat = discriminator_forward(model, completed, hint.hint)
    correct = (m_hat > 0.5) == (dataset.mask == 1)
    revealed = hint.reveal == 1
    hinted = float(correct[revealed].mean()) if revealed.any() else float("nan")
    unhinted = float(correct[~revealed].mean()) if (~revealed).any() else float("nan")
    return hinted, unhinted


# -- downstream prediction ----------------------------------------------------

def auc(scores, labels) -> float:
    """Rank-statistic ROC AUC; ties count one half."""
    labels = np.asarray(labels).astype(bool)
    n_pos, n_neg = int(labels.sum()), int((~labels).sum())
    if n_pos == 0 or n_neg == 0:
        raise EvaluationError("AUC needs both classes present")
    ranks = rankdata(scores)
    return float((ranks[labels].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


@dataclass
class PredictorConfig:
    hidden: tuple = (64, 64)
    epochs: int = 30
    learning_rate: float = 0.005
    dropout_rate: float = 0.5
    batch_size: int = 128
    test_fraction: float = 0.2


def _fit_predictor(x, target, task, n_out, cfg: PredictorConfig, rng):
    """Three fully connected layers trained with Adam; returns the layer list."""
    dims = [x.shape[0], *cfg.hidden]
    head = "softmax" if task == "classification" else "identity"
    layers = [init_layer(a, b, "relu", rng) for a, b in zip(dims[:-1], dims[1:])]
    layers.append(init_layer(dims[-1], n_out, head, rng))
    params, state = named_params("predictor", layers), AdamState()
    n = x.shape[1]
    for _ in range(cfg.epochs):
        order = rng.permutation(n)
        for start in range(0, n, cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            out, cache = mlp_forward(layers, x[:, idx], cfg.dropout_rate, rng)
            if task == "classification":
                grad = np.zeros_like(out)
                p = np.clip(out[target[idx], np.arange(idx.size)], 1e-7, 1.0)
                grad[target[idx], np.arange(idx.size)] = -1.0 / (p * idx.size)
            else:
                grad = 2.0 * (out - target[idx][None, :]) / idx.size
            grads, _ = mlp_backward(layers, cache, grad)
            adam_step(params, named_grads("predictor", grads), state, cfg.learning_rate)
    return layers


def downstream_split(n: int, seed: int, test_fraction: float = 0.2):
    """Seeded 80/20 permutation split; returns ``(train_idx, test_idx)``."""
    order = _split_rng(seed, 0xD0E5).permutation(n)
    n_test = max(1, int(round(test_fraction * n)))
    return order[n_test:], order[:n_test]


def downstream_eval(completed: np.ndarray, target, task: str, seeds,
                    cfg: PredictorConfig | None = None) -> DownstreamResult:
    """Train/test the downstream predictor on an 80/20 split per seed.

    Binary classification reports AUC, regression reports MAE in target units.
    """
    cfg = cfg or PredictorConfig()
    target = np.asarray(target)
    if task not in ("classification", "regression"):
        raise ConfigError(f"unknown task {task!r}")
    n = completed.shape[1]
    aucs, maes = [], []
    for seed in seeds:
        tr, test = downstream_split(n, seed, cfg.test_fraction)
        rng = _split_rng(seed, 0xD0E6)
        if task == "classification":
            y = target.astype(int)
            if np.unique(y[tr]).size < 2 or np.unique(y[test]).size < 2:
                raise EvaluationError(f"seed {seed}: split contains a single class")
            if y.max() > 1:
                raise EvaluationError("AUC scoring supports binary targets only")
            layers = _fit_predictor(completed[:, tr], y[tr], task, 2, cfg, rng)
            probs, _ = mlp_forward(layers, completed[:, test])
            aucs.append(auc(probs[1], y[test]))
        else:
            y = target.astype(float)
            lo, hi = y[tr].min(), y[tr].max()
            span = hi - lo if hi > lo else 1.0
            layers = _fit_predictor(completed[:, tr], (y[tr] - lo) / span, task, 1, cfg, rng)
            pred, _ = mlp_forward(layers, completed[:, test])
            pred = lo + pred[0] * (hi - lo)
            maes.append(float(np.mean(np.abs(pred - y[test]))))
    seeds = list(seeds)
    if task == "classification":
        return DownstreamResult(task, seeds, auc=float(np.mean(aucs)), per_seed_auc=aucs)
    return DownstreamResult(task, seeds, mae=float(np.mean(maes)), per_seed_mae=maes)


def downstream_compare(dataset: Dataset, target, task: str, config: TrainConfig, seeds,
                       method: str = "segan", missing_rate: float | None = None) -> DownstreamResult:
    """Per seed: optional MCAR, complete with ``method``, then downstream_eval.

    Labels of the downstream test rows are hidden from the imputer.
    """
    aucs, maes = [], []
    for seed in seeds:
        data = dataset
        if missing_rate is not None:
            data = inject_mcar(dataset, missing_rate, _split_rng(seed, 0x5B17), dataset.groups)
        else:
            data = dataset.with_mask(dataset.mask)
        _, test = downstream_split(data.n, seed)
        data.labels[test] = -1
        completed = complete(data, method, config, seed)
        res = downstream_eval(completed, target, task, [seed])
        (aucs if task == "classification" else maes).extend(res.per_seed_auc or res.per_seed_mae)
    seeds = list(seeds)
    if task == "classification":
        return DownstreamResult(task, seeds, auc=float(np.mean(aucs)), per_seed_auc=aucs)
    return DownstreamResult(task, seeds, mae=float(np.mean(maes)), per_seed_mae=maes)
