"""Logarithmic tensor nuclear norm and its proximal map.

For ``t`` of shape ``I1 x I2 x I3`` the norm is
``(1/I3) * sum_k sum_j log(sigma_j(fft(t)[:, :, k]) + eps)``.  The proximal
map thresholds each singular value of each Fourier-domain frontal slice with
the closed-form minimiser of ``0.5 * (x - sigma)**2 + tau * log(x + eps)``
over ``x >= 0``.
"""

import numpy as np

from .tensor import _is_self_conjugate, as_tensor, fft_mode3, ifft_mode3, n_unique_slices


def ltnn_value(t, eps):
    t = as_tensor(t)
    n3 = t.shape[2]
    s = np.linalg.svd(np.moveaxis(fft_mode3(t), 2, 0), compute_uv=False)
    return float(np.sum(np.log(s + eps)) / n3)


def _scalar_objective(x, sigma, tau, eps):
    return 0.5 * (x - sigma) ** 2 + tau * np.log(x + eps)


def ltnn_threshold_scalar(sigma, tau, eps):
    """Shrink singular value(s) ``sigma``; vectorised over numpy arrays.

    ``c1 = sigma - eps``, ``c2 = c1**2 - 4 * (tau - eps * sigma)``.  When
    ``c2 <= 0`` there is no interior stationary point and the result is 0.
    Otherwise the larger root ``(c1 + sqrt(c2)) / 2`` is a local minimum
    and is kept only if its objective does not exceed the one at ``x = 0``.
    """
    sigma = np.asarray(sigma, dtype=np.float64)
    c1 = sigma - eps
    c2 = c1 * c1 - 4.0 * (tau - eps * sigma)
    root = np.maximum(0.5 * (c1 + np.sqrt(np.maximum(c2, 0.0))), 0.0)
    # the log penalty is nonconvex: the boundary x = 0 can beat the interior minimum
    keep = (c2 > 0) & (_scalar_objective(root, sigma, tau, eps) <= _scalar_objective(0.0, sigma, tau, eps))
    out = np.where(keep, root, 0.0)
    return out if out.ndim else float(out)


def ltnn_prox(t, tau, eps):
    """Slice-wise LTNN thresholding in the Fourier domain along mode 3."""
    t = as_tensor(t)
    if tau == 0:
        return t.copy()
    n3 = t.shape[2]
    tb = fft_mode3(t)
    out = np.empty_like(tb)
    m = n_unique_slices(n3)
    # batched SVD over the non-redundant slices; self-conjugate ones stay real
    slices = np.moveaxis(tb[:, :, :m], 2, 0).copy()
    for k in range(m):
        if _is_self_conjugate(k, n3):
            slices[k] = slices[k].real
    u, s, vh = np.linalg.svd(slices, full_matrices=False)
    s = ltnn_threshold_scalar(s, tau, eps)
    rec = np.einsum("kij,kj,kjl->kil", u, s, vh)
    for k in range(m):
        out[:, :, k] = rec[k].real if _is_self_conjugate(k, n3) else rec[k]
        if not _is_self_conjugate(k, n3):
            out[:, :, n3 - k] = rec[k].conj()
    return ifft_mode3(out)
