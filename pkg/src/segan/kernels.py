"""Backend selection for the elementwise hot kernels.

The compiled extension is used when it imports; otherwise the numpy fallback.
Set ``SEGAN_PURE_PYTHON=1`` to force the fallback.

Under the compiled backend only the kernels in ``COMPILED_KERNELS`` run from
the extension. The rest measured slower than numpy, whose vectorized
exp/log/sqrt beat scalar libm calls (see benchmarks/bench_kernels.py), so
they stay on numpy under both backends.
"""
import os

import numpy as np

from . import _pykernels

COMPILED_KERNELS = frozenset({
    "masked_combine",
    "masked_abs_error",
    "relu_backward",
    "relu_dropout_backward",
    "sigmoid_backward",
})

BACKEND = "python"
_impl = {}


def _select(module):
    global _impl
    _impl = {
        name: getattr(module if (module is not _pykernels and name in COMPILED_KERNELS)
                      else _pykernels, name)
        for name in ("adam_update", "masked_combine", "masked_abs_error", "bce", "relu_dropout",
                     "sigmoid", "relu_backward", "relu_dropout_backward", "sigmoid_backward")
    }


_select(_pykernels)
if os.environ.get("SEGAN_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels
    except ImportError:
        pass
    else:
        _select(_ckernels)
        BACKEND = "cython"


def use_backend(name):
    """Switch backend at runtime ("cython" or "python"). Returns the previous name."""
    global BACKEND
    previous = BACKEND
    if name == "python":
        _select(_pykernels)
    elif name == "cython":
        from . import _ckernels

        _select(_ckernels)
    else:
        raise ValueError(f"unknown kernel backend {name!r}")
    BACKEND = name
    return previous


def _flat(a):
    if not (a.dtype == np.float64 and a.flags.c_contiguous):
        raise TypeError("kernels require C-contiguous float64 arrays")
    return a.reshape(-1)


def adam_update(param, grad, m, v, lr, beta1, beta2, eps, bc1, bc2):
    return _impl["adam_update"](
        _flat(param), _flat(np.ascontiguousarray(grad, dtype=np.float64)), _flat(m), _flat(v),
        lr, beta1, beta2, eps, bc1, bc2,
    )


def masked_combine(x, xbar, mask):
    x = np.ascontiguousarray(x, dtype=np.float64)
    out = np.empty_like(x)
    _impl["masked_combine"](
        _flat(x),
        _flat(np.ascontiguousarray(xbar, dtype=np.float64)),
        _flat(np.ascontiguousarray(mask, dtype=np.float64)),
        _flat(out),
    )
    return out


def masked_abs_error(x, xbar, mask):
    """Return (sum of mask*|x - xbar|, gradient w.r.t. xbar)."""
    xbar = np.ascontiguousarray(xbar, dtype=np.float64)
    grad = np.empty_like(xbar)
    total = _impl["masked_abs_error"](
        _flat(np.ascontiguousarray(x, dtype=np.float64)),
        _flat(xbar),
        _flat(np.ascontiguousarray(mask, dtype=np.float64)),
        _flat(grad),
    )
    return float(total), grad


def bce(target, prob, lo, hi):
    """Return (summed clamped binary cross-entropy, gradient w.r.t. prob)."""
    prob = np.ascontiguousarray(prob, dtype=np.float64)
    grad = np.empty_like(prob)
    total = _impl["bce"](
        _flat(np.ascontiguousarray(target, dtype=np.float64)), _flat(prob), _flat(grad), lo, hi
    )
    return float(total), grad


def _c(a):
    return np.ascontiguousarray(a, dtype=np.float64)


def relu_dropout(pre, uniform, rate):
    """Return ``(act, drop, post)`` for a rectifier layer with inverted dropout."""
    pre = _c(pre)
    act, drop, post = np.empty_like(pre), np.empty_like(pre), np.empty_like(pre)
    _impl["relu_dropout"](_flat(pre), _flat(_c(uniform)), rate, _flat(act), _flat(drop), _flat(post))
    return act, drop, post


def sigmoid(z):
    z = _c(z)
    out = np.empty_like(z)
    _impl["sigmoid"](_flat(z), _flat(out))
    return out


def relu_backward(grad, pre, drop=None):
    grad = _c(grad)
    out = np.empty_like(grad)
    if drop is None:
        _impl["relu_backward"](_flat(grad), _flat(_c(pre)), _flat(out))
    else:
        _impl["relu_dropout_backward"](_flat(grad), _flat(_c(pre)), _flat(_c(drop)), _flat(out))
    return out


def sigmoid_backward(grad, s):
    grad = _c(grad)
    out = np.empty_like(grad)
    _impl["sigmoid_backward"](_flat(grad), _flat(_c(s)), _flat(out))
    return out
