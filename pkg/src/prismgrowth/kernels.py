"""Explicit drift-diffusion stencil on a padded cell-centred grid.

Arrays are padded by one cell on every side; the padding carries the
outer Dirichlet values.  Mask codes: 0 exterior (active), 1 crystal,
2 Dirichlet padding.  Both implementations accumulate in the same order
(-x, +x, -y, +y, -z, +z) so they agree to rounding.
"""
import numpy as np

from ._accel import HAS_NUMBA, njit

EXTERIOR, CRYSTAL, DIRICHLET = 0, 1, 2


@njit
def _upwind(c, fwd, bwd, fwd_open, bwd_open, f, inv_h):
    # sigma_t = f . grad(sigma): one-sided difference on the side f points to,
    # falling back to the other side when that neighbour is crystal
    if f > 0.0:
        if fwd_open:
            return f * (fwd - c) * inv_h
        if bwd_open:
            return f * (c - bwd) * inv_h
        return 0.0
    if f < 0.0:
        if bwd_open:
            return f * (c - bwd) * inv_h
        if fwd_open:
            return f * (fwd - c) * inv_h
    return 0.0


@njit
def _step_numba(sig, mask, src, drift, use_drift, h, dt, out):
    n0, n1, n2 = sig.shape
    inv_h2 = 1.0 / (h * h)
    inv_h = 1.0 / h
    for i in range(1, n0 - 1):
        for j in range(1, n1 - 1):
            for k in range(1, n2 - 1):
                if mask[i, j, k] != 0:
                    continue
                c = sig[i, j, k]
                lap = 0.0
                if mask[i - 1, j, k] != 1:
                    lap += sig[i - 1, j, k] - c
                if mask[i + 1, j, k] != 1:
                    lap += sig[i + 1, j, k] - c
                if mask[i, j - 1, k] != 1:
                    lap += sig[i, j - 1, k] - c
                if mask[i, j + 1, k] != 1:
                    lap += sig[i, j + 1, k] - c
                if mask[i, j, k - 1] != 1:
                    lap += sig[i, j, k - 1] - c
                if mask[i, j, k + 1] != 1:
                    lap += sig[i, j, k + 1] - c
                rate = lap * inv_h2 + src[i, j, k]
                if use_drift:
                    adv = _upwind(c, sig[i + 1, j, k], sig[i - 1, j, k], mask[i + 1, j, k] != 1,
                                  mask[i - 1, j, k] != 1, drift[0, i, j, k], inv_h)
                    adv += _upwind(c, sig[i, j + 1, k], sig[i, j - 1, k], mask[i, j + 1, k] != 1,
                                   mask[i, j - 1, k] != 1, drift[1, i, j, k], inv_h)
                    adv += _upwind(c, sig[i, j, k + 1], sig[i, j, k - 1], mask[i, j, k + 1] != 1,
                                   mask[i, j, k - 1] != 1, drift[2, i, j, k], inv_h)
                    rate += adv
                out[i, j, k] = c + dt * rate


_SHIFTS = [(0, -1), (0, 1), (1, -1), (1, 1), (2, -1), (2, 1)]


def _view(a, axis, s):
    """Interior block of the padded array shifted by ``s`` along ``axis``."""
    sl = [slice(1, -1)] * 3
    sl[axis] = slice(1 + s, a.shape[axis] - 1 + s)
    return a[tuple(sl)]


def _upwind_numpy(sig, mask, axis, f, inv_h):
    c = _view(sig, axis, 0)
    fwd_open = _view(mask, axis, 1) != 1
    bwd_open = _view(mask, axis, -1) != 1
    fwd = (_view(sig, axis, 1) - c) * inv_h
    bwd = (c - _view(sig, axis, -1)) * inv_h
    pos = np.where(fwd_open, fwd, np.where(bwd_open, bwd, 0.0))
    neg = np.where(bwd_open, bwd, np.where(fwd_open, fwd, 0.0))
    return np.where(f > 0.0, f * pos, np.where(f < 0.0, f * neg, 0.0))


def _step_numpy(sig, mask, src, drift, use_drift, h, dt, out):
    inner = (slice(1, -1),) * 3
    c = sig[inner]
    active = mask[inner] == 0
    lap = np.zeros_like(c)
    for axis, s in _SHIFTS:
        lap += np.where(_view(mask, axis, s) != 1, _view(sig, axis, s) - c, 0.0)
    rate = lap * (1.0 / (h * h)) + src[inner]
    if use_drift:
        adv = _upwind_numpy(sig, mask, 0, drift[0][inner], 1.0 / h)
        adv += _upwind_numpy(sig, mask, 1, drift[1][inner], 1.0 / h)
        adv += _upwind_numpy(sig, mask, 2, drift[2][inner], 1.0 / h)
        rate = rate + adv
    out[inner] = np.where(active, c + dt * rate, c)


def diffusion_step(sig, mask, src, drift, h, dt, backend=None):
    """One explicit Euler step; returns a new padded array (``sig`` is untouched)."""
    use_drift = drift is not None
    if drift is None:
        drift = np.zeros((3, 1, 1, 1))
    out = sig.copy()
    if backend is None:
        backend = "numba" if HAS_NUMBA else "numpy"
    if backend == "numba":
        if not HAS_NUMBA:
            raise RuntimeError("numba backend requested but numba is unavailable")
        _step_numba(sig, mask, src, drift, use_drift, float(h), float(dt), out)
    else:
        _step_numpy(sig, mask, src, drift, use_drift, float(h), float(dt), out)
    return out


def drift_rate(sig, mask, drift, h):
    """The upwind ``f . grad(sigma)`` term on active cells (zeros elsewhere)."""
    inner = (slice(1, -1),) * 3
    if drift is None:
        return np.zeros(tuple(s - 2 for s in sig.shape))
    adv = sum(_upwind_numpy(sig, mask, ax, drift[ax][inner], 1.0 / h) for ax in range(3))
    return np.where(mask[inner] == 0, adv, 0.0)
