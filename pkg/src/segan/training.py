"""Alternating minimax training: discriminator, classifier, then generator."""
from __future__ import annotations

import logging
import time
from dataclasses import asdict, dataclass, field, fields, replace

import numpy as np

from .data import Dataset
from .errors import ConfigError, DivergenceError, SchemaError
from .model import (
    SeganModel,
    build_model,
    classifier_forward,
    classifier_step,
    discriminator_step,
    generator_forward,
    generator_step,
    impute_combine,
    noise_fill,
    pseudo_label,
    sample_hint,
)
from .numerics import AdamState, adam_step

log = logging.getLogger(__name__)

VARIANTS = ("full", "no_classifier", "no_discriminator", "no_hint")


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.001
    epochs: int = 30
    batch_size: int = 128
    dropout_rate: float = 0.5
    hint_rate: float = 0.8
    label_rate: float = 1.0
    alpha: float = 0.1
    beta: float = 1.0
    pseudo_label_threshold: float = 0.9
    warmup_epochs: int = 5
    hidden: int = 128
    seed: int = 0
    variant: str = "full"

    def __post_init__(self):
        checks = [
            ("learning_rate", self.learning_rate > 0),
            ("epochs", self.epochs >= 1),
            ("batch_size", self.batch_size >= 1),
            ("dropout_rate", 0 <= self.dropout_rate < 1),
            ("hint_rate", 0 <= self.hint_rate <= 1),
            ("label_rate", 0 < self.label_rate <= 1),
            ("alpha", self.alpha >= 0),
            ("beta", self.beta >= 0),
            ("pseudo_label_threshold", 0.5 < self.pseudo_label_threshold < 1),
            ("warmup_epochs", self.warmup_epochs >= 0),
            ("hidden", self.hidden >= 1),
            ("variant", self.variant in VARIANTS),
        ]
        for name, ok in checks:
            if not ok:
                raise ConfigError(f"invalid {name}: {getattr(self, name)!r}")

    @classmethod
    def from_dict(cls, obj: dict) -> "TrainConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(obj) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        return cls(**obj)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class EpochRecord:
    epoch: int
    generator_loss: float
    discriminator_loss: float | None
    classifier_loss: float | None
    reconstruction_loss: float
    pseudo_labels: int
    seconds: float


@dataclass
class TrainReport:
    epochs: list = field(default_factory=list)

    def losses(self) -> list:
        """Per-epoch loss tuples without wall-clock, for reproducibility checks."""
        return [
            (e.epoch, e.generator_loss, e.discriminator_loss, e.classifier_loss,
             e.reconstruction_loss, e.pseudo_labels)
            for e in self.epochs
        ]


def build_variant(config: TrainConfig, variant: str) -> TrainConfig:
    """Resolve an ablation variant into the config ``train`` runs with."""
    if variant not in VARIANTS:
        raise ConfigError(f"unknown variant {variant!r}; expected one of {VARIANTS}")
    changes = {"variant": variant}
    if variant == "no_classifier":
        changes["beta"] = 0.0
    elif variant == "no_discriminator":
        changes["alpha"] = 0.0
    elif variant == "no_hint":
        changes["hint_rate"] = 0.0
    return replace(config, **changes)


def _rng_streams(seed):
    ss = np.random.SeedSequence([seed & 0xFFFFFFFFFFFFFFFF, 0x5E6A])
    init, loop = ss.spawn(2)
    return np.random.default_rng(init), np.random.default_rng(loop)


def train(dataset: Dataset, config: TrainConfig, log_every: int = 0):
    """Train a model on ``dataset``; returns ``(SeganModel, TrainReport)``.

    ``dataset.values`` is never modified.
    """
    if dataset.n < 1 or dataset.d < 1:
        raise ConfigError("dataset is empty")
    use_disc = config.variant != "no_discriminator" and config.alpha > 0
    has_labels = bool(np.any(dataset.labels >= 0))
    use_clf = config.variant != "no_classifier" and config.beta > 0
    if use_clf and (dataset.n_classes < 2 or not has_labels):
        raise ConfigError("beta > 0 requires labels with at least 2 classes")

    init_rng, rng = _rng_streams(config.seed)
    model = build_model(
        dataset.d, dataset.n_classes, init_rng, hidden=config.hidden,
        alpha=config.alpha if use_disc else 0.0, beta=config.beta if use_clf else 0.0,
        hint_rate=config.hint_rate, threshold=config.pseudo_label_threshold,
        with_classifier=use_clf,
    )
    model.fingerprint = dataset.fingerprint
    model.config = config.to_dict()

    g_params, c_params = model.generator_params(), model.critic_params()
    g_state, c_state = AdamState(), AdamState()

    x_all = np.nan_to_num(dataset.values, nan=0.0)
    mask_all = dataset.mask
    true_labels = dataset.labels
    pseudo = np.full(dataset.n, -1, dtype=int)
    report = TrainReport()
    lr, drop = config.learning_rate, config.dropout_rate

    for epoch in range(config.epochs):
        t0 = time.perf_counter()
        order = rng.permutation(dataset.n)
        sums = {"g": 0.0, "d": 0.0, "c": 0.0, "rec": 0.0}
        counts = {"g": 0, "d": 0, "c": 0}
        effective = np.where(true_labels >= 0, true_labels, pseudo)
        for start in range(0, dataset.n, config.batch_size):
            idx = order[start:start + config.batch_size]
            x, m = x_all[:, idx], mask_all[:, idx]
            y = effective[idx]
            try:
                x_noisy = noise_fill(x, m, rng)
                hint = sample_hint(m, config.hint_rate, rng).hint

                if use_disc or use_clf:
                    xbar = generator_forward(model, x_noisy, m, drop, rng)
                    x_hat = impute_combine(x, xbar, m)
                if use_disc:
                    d_loss, d_grads = discriminator_step(model, x_hat, m, hint, drop, rng)
                    adam_step(c_params, d_grads, c_state, lr)
                    sums["d"] += d_loss
                    counts["d"] += 1
                if use_clf and np.any(y >= 0):
                    c_loss, c_grads = classifier_step(model, x_hat, y, drop, rng)
                    adam_step(c_params, c_grads, c_state, lr)
                    sums["c"] += c_loss
                    counts["c"] += 1

                terms, g_grads = generator_step(
                    model, x, x_noisy, m, hint, y, drop, rng,
                    use_discriminator=use_disc, use_classifier=use_clf,
                )
                adam_step(g_params, g_grads, g_state, lr)
            except DivergenceError as exc:
                raise DivergenceError(f"epoch {epoch} batch {start // config.batch_size}: {exc}") from exc
            sums["g"] += terms.total
            sums["rec"] += terms.reconstruction
            counts["g"] += 1

        if use_clf and epoch + 1 >= config.warmup_epochs:
            pseudo = _refresh_pseudo_labels(model, x_all, mask_all, true_labels, rng)

        record = EpochRecord(
            epoch=epoch,
            generator_loss=sums["g"] / counts["g"],
            discriminator_loss=sums["d"] / counts["d"] if counts["d"] else None,
            classifier_loss=sums["c"] / counts["c"] if counts["c"] else None,
            reconstruction_loss=sums["rec"] / counts["g"],
            pseudo_labels=int(np.sum((pseudo >= 0) & (true_labels < 0))),
            seconds=time.perf_counter() - t0,
        )
        report.epochs.append(record)
        if log_every and (epoch + 1) % log_every == 0:
            log.info("epoch %d: L_G=%.4f L_D=%s L_C=%s", epoch, record.generator_loss,
                     record.discriminator_loss, record.classifier_loss)
    return model, report


def _refresh_pseudo_labels(model, x, mask, true_labels, rng):
    if np.all(true_labels >= 0):
        return np.full_like(true_labels, -1)
    x_hat = impute_combine(x, generator_forward(model, noise_fill(x, mask, rng), mask), mask)
    probs = classifier_forward(model, x_hat)
    labels = pseudo_label(probs, model.threshold, true_labels)
    return np.where(true_labels >= 0, -1, labels)


def impute(model: SeganModel, dataset: Dataset, seed: int = 0) -> np.ndarray:
    """Complete ``dataset``: observed entries pass through bit-exactly."""
    if dataset.d != model.d:
        raise ConfigError(f"dataset has {dataset.d} features, model expects {model.d}")
    if model.fingerprint and dataset.fingerprint and model.fingerprint != dataset.fingerprint:
        raise SchemaError("dataset schema does not match the model's schema")
    rng = np.random.default_rng(np.random.SeedSequence([seed & 0xFFFFFFFFFFFFFFFF, 0x1A7E]))
    x = np.nan_to_num(dataset.values, nan=0.0)
    xbar = generator_forward(model, noise_fill(x, dataset.mask, rng), dataset.mask)
    return impute_combine(x, xbar, dataset.mask)


def predict_labels(model: SeganModel, completed: np.ndarray) -> np.ndarray:
    return np.argmax(classifier_forward(model, completed), axis=0)
