import os
import sys

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

import numpy as np

from pgadyn import tensor as T


def numeric_grad(fn, x, step=1e-5):
    """Central-difference gradient of scalar fn w.r.t. array x."""
    x = np.asarray(x, dtype=np.float64)
    g = np.zeros_like(x)
    flat = x.reshape(-1)
    gflat = g.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + step
        hi = fn(x)
        flat[i] = orig - step
        lo = fn(x)
        flat[i] = orig
        gflat[i] = (hi - lo) / (2.0 * step)
    return g


def check_param_grad(loss_fn, param, step=1e-5, rtol=1e-4):
    """Finite-difference check for a parameter Tensor living in a store.

    loss_fn() rebuilds the scalar loss from current parameter values.
    """
    param.zero_grad()
    T.backward(loss_fn())
    analytic = param.grad.copy()
    flat = param.data.reshape(-1)
    numeric = np.zeros_like(flat)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + step
        hi = float(loss_fn().data)
        flat[i] = orig - step
        lo = float(loss_fn().data)
        flat[i] = orig
        numeric[i] = (hi - lo) / (2.0 * step)
    numeric = numeric.reshape(param.data.shape)
    denom = np.maximum(np.abs(numeric), 1.0)
    err = np.max(np.abs(analytic - numeric) / denom)
    assert err < rtol, f"parameter gradient mismatch: max rel error {err:.3g}"
    return err


def check_grad(fn, x, step=1e-5, rtol=1e-4):
    """Compare reverse-mode gradient of scalar fn against finite differences.

    fn maps a Tensor to a scalar Tensor; returns max relative error.
    """
    xt = T.tensor(np.array(x, dtype=np.float64), requires_grad=True)
    loss = fn(xt)
    T.backward(loss)
    analytic = xt.grad.copy()
    numeric = numeric_grad(lambda arr: float(fn(T.tensor(arr)).data), np.array(x), step)
    denom = np.maximum(np.abs(numeric), 1.0)
    err = np.max(np.abs(analytic - numeric) / denom)
    assert err < rtol, f"gradient mismatch: max rel error {err:.3g}"
    return err
