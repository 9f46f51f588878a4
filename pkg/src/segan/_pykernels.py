"""Pure-numpy versions of the compiled kernels in ``_ckernels.pyx``.

Signatures and in-place semantics match the compiled module exactly; all
arrays are flat, contiguous float64.
"""
import numpy as np


def adam_update(param, grad, m, v, lr, beta1, beta2, eps, bc1, bc2):
    bad = np.flatnonzero(~np.isfinite(grad))
    if bad.size:
        return int(bad[0])
    m *= beta1
    m += (1.0 - beta1) * grad
    v *= beta2
    v += ((1.0 - beta2) * grad) * grad
    param -= lr * (m / bc1) / (np.sqrt(v / bc2) + eps)
    return -1


def masked_combine(x, xbar, mask, out):
    np.copyto(out, np.where(mask != 0.0, x, xbar))


def masked_abs_error(x, xbar, mask, grad):
    diff = xbar - x
    np.copyto(grad, np.where(mask != 0.0, mask * np.sign(diff), 0.0))
    return float(np.sum(np.where(mask != 0.0, mask * np.abs(diff), 0.0)))


def bce(target, prob, grad, lo, hi):
    p = np.clip(prob, lo, hi)
    inside = (prob >= lo) & (prob <= hi)
    np.copyto(grad, np.where(inside, (1.0 - target) / (1.0 - p) - target / p, 0.0))
    return float(-np.sum(target * np.log(p) + (1.0 - target) * np.log(1.0 - p)))


def relu_dropout(pre, uniform, rate, act, drop, post):
    np.maximum(pre, 0.0, out=act)
    np.multiply(1.0 / (1.0 - rate), uniform >= rate, out=drop)
    np.multiply(act, drop, out=post)


def sigmoid(z, out):
    with np.errstate(under="ignore"):  # exp(-|z|) -> 0 is the right limit
        e = np.exp(-np.abs(z))
    r = 1.0 / (1.0 + e)
    np.copyto(out, np.where(z >= 0.0, r, e * r))


def relu_backward(grad, pre, out):
    np.multiply(grad, pre > 0.0, out=out)


def relu_dropout_backward(grad, pre, drop, out):
    np.multiply(grad * drop, pre > 0.0, out=out)


def sigmoid_backward(grad, s, out):
    np.copyto(out, grad * s * (1.0 - s))
