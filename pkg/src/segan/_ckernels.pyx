# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled elementwise kernels.

Each routine performs the same floating-point operations, in the same order,
as its counterpart in ``_pykernels`` so both backends agree bit for bit
(the log-based ones agree to libm rounding).
"""
from libc.math cimport sqrt, log, exp, isfinite, fabs


def adam_update(double[::1] param, const double[::1] grad, double[::1] m, double[::1] v,
                double lr, double beta1, double beta2, double eps, double bc1, double bc2):
    """In-place bias-corrected Adam step. Returns the index of the first
    non-finite gradient entry, or -1. Nothing is modified when non-finite."""
    cdef Py_ssize_t i, n = param.shape[0]
    cdef double g, mi, vi
    cdef double c1 = 1.0 - beta1
    cdef double c2 = 1.0 - beta2
    cdef double probe = 0.0
    with nogil:
        # g * 0 is NaN exactly when g is inf or NaN; the sum vectorizes
        for i in range(n):
            probe += grad[i] * 0.0
    if probe != 0.0 or probe != probe:
        for i in range(n):
            if not isfinite(grad[i]):
                return i
    with nogil:
        for i in range(n):
            g = grad[i]
            mi = beta1 * m[i] + c1 * g
            vi = beta2 * v[i] + (c2 * g) * g
            m[i] = mi
            v[i] = vi
            param[i] = param[i] - lr * (mi / bc1) / (sqrt(vi / bc2) + eps)
    return -1


def masked_combine(const double[::1] x, const double[::1] xbar, const double[::1] mask,
                   double[::1] out):
    cdef Py_ssize_t i, n = x.shape[0]
    with nogil:
        for i in range(n):
            out[i] = x[i] if mask[i] != 0.0 else xbar[i]


def masked_abs_error(const double[::1] x, const double[::1] xbar, const double[::1] mask,
                     double[::1] grad):
    """Sum of mask*|x - xbar|; writes d/dxbar into ``grad``."""
    cdef Py_ssize_t i, n = x.shape[0]
    cdef double total = 0.0, diff
    with nogil:
        for i in range(n):
            diff = xbar[i] - x[i]
            if mask[i] != 0.0:
                total += mask[i] * fabs(diff)
                if diff > 0.0:
                    grad[i] = mask[i]
                elif diff < 0.0:
                    grad[i] = -mask[i]
                else:
                    grad[i] = 0.0
            else:
                grad[i] = 0.0
    return total


def bce(const double[::1] target, const double[::1] prob, double[::1] grad,
        double lo, double hi):
    """Summed binary cross-entropy with clamped probabilities; writes d/dprob
    (zero where the clamp is active) into ``grad``."""
    cdef Py_ssize_t i, n = target.shape[0]
    cdef double total = 0.0, p, t
    with nogil:
        for i in range(n):
            p = prob[i]
            t = target[i]
            if p < lo:
                p = lo
                grad[i] = 0.0
            elif p > hi:
                p = hi
                grad[i] = 0.0
            else:
                grad[i] = (1.0 - t) / (1.0 - p) - t / p
            total -= t * log(p) + (1.0 - t) * log(1.0 - p)
    return total


def relu_dropout(const double[::1] pre, const double[::1] uniform, double rate,
                 double[::1] act, double[::1] drop, double[::1] post):
    """Rectifier followed by inverted dropout driven by pre-drawn uniforms."""
    cdef Py_ssize_t i, n = pre.shape[0]
    cdef double scale = 1.0 / (1.0 - rate)
    cdef double a, k, p
    # ternaries compile to branch-free select instructions; fmax and a
    # bool-times-double product did not
    with nogil:
        for i in range(n):
            p = pre[i]
            a = p if p > 0.0 else 0.0
            k = scale if uniform[i] >= rate else 0.0
            act[i] = a
            drop[i] = k
            post[i] = a * k


def sigmoid(const double[::1] z, double[::1] out):
    cdef Py_ssize_t i, n = z.shape[0]
    cdef double e, r
    # exp(-|z|) never overflows; the sign only picks r or e*r
    with nogil:
        for i in range(n):
            e = exp(-fabs(z[i]))
            r = 1.0 / (1.0 + e)
            out[i] = r if z[i] >= 0.0 else e * r


def relu_backward(const double[::1] grad, const double[::1] pre, double[::1] out):
    cdef Py_ssize_t i, n = grad.shape[0]
    with nogil:
        for i in range(n):
            out[i] = grad[i] * (pre[i] > 0.0)


def relu_dropout_backward(const double[::1] grad, const double[::1] pre,
                          const double[::1] drop, double[::1] out):
    cdef Py_ssize_t i, n = grad.shape[0]
    with nogil:
        for i in range(n):
            out[i] = (grad[i] * drop[i]) * (pre[i] > 0.0)


def sigmoid_backward(const double[::1] grad, const double[::1] s, double[::1] out):
    cdef Py_ssize_t i, n = grad.shape[0]
    with nogil:
        for i in range(n):
            out[i] = grad[i] * s[i] * (1.0 - s[i])
