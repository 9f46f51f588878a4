"""Generator / discriminator / classifier triad, hint sampling and losses.

The discriminator and classifier share a trunk (one rectifier layer over the
feature-wise concatenation ``[X_hat; R]``) and own a single linear head each.
The classifier sees the trunk with an uninformative hint of 0.5 everywhere.
"""
from __future__ import annotations

import json
import logging
import struct
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import ConfigError, DivergenceError, SchemaError, ShapeError
from .numerics import MlpLayer, init_layer, mlp_backward, mlp_forward, named_grads, named_params

log = logging.getLogger(__name__)

CLAMP = 1e-7
NOISE_SCALE = 0.01


@dataclass
class SeganModel:
    generator: list
    trunk: list
    disc_head: list
    clf_head: list | None
    alpha: float = 0.1
    beta: float = 1.0
    hint_rate: float = 0.8
    threshold: float = 0.9
    fingerprint: str | None = None
    config: dict = field(default_factory=dict)

    @property
    def d(self) -> int:
        return self.disc_head[-1].out_dim

    @property
    def n_classes(self) -> int:
        return self.clf_head[-1].out_dim if self.clf_head else 0

    def generator_params(self) -> dict:
        return named_params("generator", self.generator)

    def critic_params(self) -> dict:
        """Trunk and both heads: the second optimizer group."""
        params = named_params("trunk", self.trunk)
        params.update(named_params("disc_head", self.disc_head))
        if self.clf_head:
            params.update(named_params("clf_head", self.clf_head))
        return params

    def all_params(self) -> dict:
        return {**self.generator_params(), **self.critic_params()}


def build_model(d: int, n_classes: int, rng: np.random.Generator, hidden: int = 128,
                alpha: float = 0.1, beta: float = 1.0, hint_rate: float = 0.8,
                threshold: float = 0.9, with_classifier: bool = True,
                zero_heads: bool = False) -> SeganModel:
    if with_classifier and n_classes < 2:
        raise ConfigError(f"classifier needs at least 2 classes, got {n_classes}")
    generator = [init_layer(2 * d, hidden, "relu", rng), init_layer(hidden, d, "sigmoid", rng)]
    trunk = [init_layer(2 * d, hidden, "relu", rng)]
    disc_head = [init_layer(hidden, d, "sigmoid", rng, zero=zero_heads)]
    clf_head = None
    if with_classifier:
        clf_head = [init_layer(hidden, n_classes, "softmax", rng, zero=zero_heads)]
    return SeganModel(generator, trunk, disc_head, clf_head, alpha, beta, hint_rate, threshold)


def _check_same(*arrays):
    shape = arrays[0].shape
    for a in arrays[1:]:
        if a.shape != shape:
            raise ShapeError(f"shape mismatch: {shape} vs {a.shape}")


def noise_fill(x, mask, rng):
    """Missing slots get independent U(0, 0.01) noise; observed pass through."""
    z = rng.uniform(0.0, NOISE_SCALE, size=x.shape)
    return kernels.masked_combine(np.nan_to_num(x, nan=0.0), z, mask)


def generator_forward(model, x_noisy, mask, dropout_rate=0.0, rng=None, return_cache=False):
    _check_same(x_noisy, mask)
    if x_noisy.shape[0] != model.d:
        raise ShapeError(f"data has {x_noisy.shape[0]} features, model expects {model.d}")
    out, cache = mlp_forward(model.generator, np.vstack([x_noisy, mask]), dropout_rate, rng)
    return (out, cache) if return_cache else out


def impute_combine(x, xbar, mask):
    """X_hat = M*X + (1-M)*X_bar, selected per entry."""
    _check_same(x, xbar, mask)
    return kernels.masked_combine(x, xbar, mask)


@dataclass
class HintMatrix:
    hint: np.ndarray  # R, values in {0, 0.5, 1}
    reveal: np.ndarray  # K, values in {0, 1}


def sample_hint(mask, hint_rate: float, rng) -> HintMatrix:
    if not 0.0 <= hint_rate <= 1.0:
        raise ConfigError(f"hint rate must lie in [0, 1], got {hint_rate}")
    k = (rng.random(mask.shape) < hint_rate).astype(float)
    return HintMatrix(k * mask + 0.5 * (1.0 - k), k)


def _trunk_forward(model, x_hat, hint, dropout_rate, rng):
    return mlp_forward(model.trunk, np.vstack([x_hat, hint]), dropout_rate, rng)


def discriminator_forward(model, x_hat, hint, dropout_rate=0.0, rng=None, return_cache=False):
    _check_same(x_hat, hint)
    h, tcache = _trunk_forward(model, x_hat, hint, dropout_rate, rng)
    m_hat, hcache = mlp_forward(model.disc_head, h)
    return (m_hat, (tcache, hcache)) if return_cache else m_hat


def classifier_forward(model, x_hat, dropout_rate=0.0, rng=None, return_cache=False):
    if model.clf_head is None:
        raise ConfigError("model was built without a classifier")
    h, tcache = _trunk_forward(model, x_hat, np.full_like(x_hat, 0.5), dropout_rate, rng)
    probs, hcache = mlp_forward(model.clf_head, h)
    return (probs, (tcache, hcache)) if return_cache else probs


def reconstruction_loss(x, xbar, mask):
    """Masked absolute error summed over observed entries (not averaged)."""
    _check_same(x, xbar, mask)
    total, _ = kernels.masked_abs_error(np.nan_to_num(x, nan=0.0), xbar, mask)
    return total


def discriminator_loss(mask, m_hat):
    """Mean entrywise binary cross-entropy of M_hat against M."""
    _check_same(mask, m_hat)
    total, _ = kernels.bce(mask, m_hat, CLAMP, 1.0 - CLAMP)
    return total / mask.size


def classifier_loss(labels, probs):
    """Mean -log p(true class) over samples with a label (>= 0)."""
    known = np.flatnonzero(labels >= 0)
    if known.size == 0:
        log.warning("classifier loss requested with no labeled samples")
        return 0.0
    p = np.clip(probs[labels[known], known], CLAMP, 1.0 - CLAMP)
    return float(-np.mean(np.log(p)))


def _classifier_loss_grad(labels, probs):
    grad = np.zeros_like(probs)
    known = np.flatnonzero(labels >= 0)
    if known.size == 0:
        return 0.0, grad
    raw = probs[labels[known], known]
    p = np.clip(raw, CLAMP, 1.0 - CLAMP)
    inside = (raw >= CLAMP) & (raw <= 1.0 - CLAMP)
    grad[labels[known], known] = np.where(inside, -1.0 / (p * known.size), 0.0)
    return float(-np.mean(np.log(p))), grad


def adversarial_term(mask, m_hat):
    """Mean of log(1 - M_hat) over missing entries; 0 when none are missing."""
    missing = 1.0 - mask
    count = missing.sum()
    if count == 0:
        return 0.0, np.zeros_like(m_hat)
    p = np.clip(m_hat, CLAMP, 1.0 - CLAMP)
    inside = (m_hat >= CLAMP) & (m_hat <= 1.0 - CLAMP)
    value = float(np.sum(missing * np.log(1.0 - p)) / count)
    grad = np.where(inside, -missing / ((1.0 - p) * count), 0.0)
    return value, grad


def pseudo_label(probs, threshold: float, labels=None):
    """Argmax label where max probability >= threshold, else -1.

    True labels (>= 0 in ``labels``) always take precedence.
    """
    if not 0.5 < threshold < 1.0:
        raise ConfigError(f"pseudo-label threshold must lie in (0.5, 1), got {threshold}")
    out = np.where(probs.max(axis=0) >= threshold, probs.argmax(axis=0), -1)
    if labels is not None:
        out = np.where(labels >= 0, labels, out)
    return out


def _finite(value, what):
    if not np.isfinite(value):
        raise DivergenceError(f"non-finite {what}: {value}")
    return value


# -- per-step losses with gradients -----------------------------------------

def discriminator_step(model, x_hat, mask, hint, dropout_rate=0.0, rng=None):
    """L_D and its gradients for the trunk and discriminator head."""
    m_hat, (tcache, hcache) = discriminator_forward(model, x_hat, hint, dropout_rate, rng, True)
    total, g = kernels.bce(mask, m_hat, CLAMP, 1.0 - CLAMP)
    loss = _finite(total / mask.size, "discriminator loss")
    hgrads, gh = mlp_backward(model.disc_head, hcache, g / mask.size)
    tgrads, _ = mlp_backward(model.trunk, tcache, gh)
    grads = named_grads("disc_head", hgrads)
    grads.update(named_grads("trunk", tgrads))
    return loss, grads


def classifier_step(model, x_hat, labels, dropout_rate=0.0, rng=None):
    """L_C and its gradients for the trunk and classifier head."""
    probs, (tcache, hcache) = classifier_forward(model, x_hat, dropout_rate, rng, True)
    loss, g = _classifier_loss_grad(labels, probs)
    _finite(loss, "classifier loss")
    hgrads, gh = mlp_backward(model.clf_head, hcache, g)
    tgrads, _ = mlp_backward(model.trunk, tcache, gh)
    grads = named_grads("clf_head", hgrads)
    grads.update(named_grads("trunk", tgrads))
    return loss, grads


@dataclass
class GeneratorTerms:
    total: float
    reconstruction: float
    adversarial: float
    classification: float


def generator_step(model, x, x_noisy, mask, hint, labels, dropout_rate=0.0, rng=None,
                   use_discriminator=True, use_classifier=True):
    """L_G and its gradients for the generator only.

    L_G = (1/n) * masked MAE + alpha * mean_missing log(1 - D) + beta * L_C.
    Discriminator and classifier parameters receive no gradient.
    """
    n = x.shape[1]
    x_obs = np.nan_to_num(x, nan=0.0)
    xbar, gcache = generator_forward(model, x_noisy, mask, dropout_rate, rng, True)
    x_hat = impute_combine(x_obs, xbar, mask)

    rec_sum, g_xbar = kernels.masked_abs_error(x_obs, xbar, mask)
    rec = rec_sum / n
    g_xbar = g_xbar / n
    g_xhat = np.zeros_like(x_hat)

    adv = 0.0
    if use_discriminator and model.alpha != 0.0:
        m_hat, (tcache, hcache) = discriminator_forward(model, x_hat, hint, dropout_rate, rng, True)
        adv, g_mhat = adversarial_term(mask, m_hat)
        _, gh = mlp_backward(model.disc_head, hcache, model.alpha * g_mhat)
        _, gin = mlp_backward(model.trunk, tcache, gh)
        g_xhat += gin[: model.d]

    cls = 0.0
    if use_classifier and model.beta != 0.0 and model.clf_head is not None:
        probs, (tcache, hcache) = classifier_forward(model, x_hat, dropout_rate, rng, True)
        cls, g_probs = _classifier_loss_grad(labels, probs)
        _, gh = mlp_backward(model.clf_head, hcache, model.beta * g_probs)
        _, gin = mlp_backward(model.trunk, tcache, gh)
        g_xhat += gin[: model.d]

    g_xbar = g_xbar + (1.0 - mask) * g_xhat
    total = _finite(rec + model.alpha * adv + model.beta * cls, "generator loss")
    ggrads, _ = mlp_backward(model.generator, gcache, g_xbar)
    return GeneratorTerms(total, rec, adv, cls), named_grads("generator", ggrads)


def generator_loss(model, x, xbar, x_hat, mask, hint, labels):
    """Value of L_G for precomputed X_bar / X_hat (no dropout)."""
    n = x.shape[1]
    rec = reconstruction_loss(x, xbar, mask) / n
    adv = 0.0
    if model.alpha != 0.0:
        adv, _ = adversarial_term(mask, discriminator_forward(model, x_hat, hint))
    cls = 0.0
    if model.beta != 0.0 and model.clf_head is not None:
        cls = classifier_loss(labels, classifier_forward(model, x_hat))
    return _finite(rec + model.alpha * adv + model.beta * cls, "generator loss")


# -- serialization ------------------------------------------------------------

MAGIC = b"SEGANMODEL1\n"


def _layer_groups(model):
    groups = {"generator": model.generator, "trunk": model.trunk, "disc_head": model.disc_head}
    if model.clf_head is not None:
        groups["clf_head"] = model.clf_head
    return groups


def save_model(model: SeganModel, path) -> None:
    """Write a self-describing file: magic, header length, JSON header, raw float64."""
    layout, blobs, offset = {}, [], 0
    for name, layers in _layer_groups(model).items():
        entries = []
        for layer in layers:
            for arr in (layer.weight, layer.bias):
                blobs.append(np.ascontiguousarray(arr, dtype="<f8").tobytes())
            entries.append({
                "activation": layer.activation,
                "weight_shape": list(layer.weight.shape),
                "offset": offset,
            })
            offset += layer.weight.size + layer.bias.size
        layout[name] = entries
    header = json.dumps({
        "layout": layout,
        "alpha": model.alpha,
        "beta": model.beta,
        "hint_rate": model.hint_rate,
        "threshold": model.threshold,
        "fingerprint": model.fingerprint,
        "config": model.config,
    }, sort_keys=True).encode()
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<Q", len(header)))
        fh.write(header)
        for b in blobs:
            fh.write(b)


def load_model(path) -> SeganModel:
    with open(path, "rb") as fh:
        if fh.read(len(MAGIC)) != MAGIC:
            raise SchemaError(f"{path} is not a model file")
        (size,) = struct.unpack("<Q", fh.read(8))
        header = json.loads(fh.read(size))
        flat = np.frombuffer(fh.read(), dtype="<f8").astype(np.float64)
    groups = {}
    for name, entries in header["layout"].items():
        layers = []
        for e in entries:
            rows, cols = e["weight_shape"]
            start = e["offset"]
            w = flat[start:start + rows * cols].reshape(rows, cols).copy()
            b = flat[start + rows * cols:start + rows * cols + rows].reshape(rows, 1).copy()
            layers.append(MlpLayer(w, b, e["activation"]))
        groups[name] = layers
    return SeganModel(
        groups["generator"], groups["trunk"], groups["disc_head"], groups.get("clf_head"),
        header["alpha"], header["beta"], header["hint_rate"], header["threshold"],
        header["fingerprint"], header["config"],
    )
