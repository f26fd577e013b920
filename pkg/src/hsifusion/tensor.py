"""Third-order tensor kernels.

A tensor is a float64 ``numpy.ndarray`` of shape ``(I1, I2, I3)``.  Whenever
entries are linearised (unfoldings, files) the first index runs fastest, so
element ``(i1, i2, i3)`` sits at offset ``i1 + I1 * (i2 + I2 * i3)``.  Modes are
numbered 1, 2, 3 as in the usual tensor notation.
"""

from typing import NamedTuple

import numpy as np

from .errors import DimensionError, ParameterError


def _check_mode(mode):
    if mode not in (1, 2, 3):
        raise ParameterError(f"mode must be 1, 2 or 3, got {mode!r}")
    return mode - 1


def as_tensor(t):
    """Return ``t`` as a float64 3-way array, rejecting other orders."""
    t = np.asarray(t, dtype=np.float64)
    if t.ndim != 3:
        raise DimensionError(f"expected a 3rd-order tensor, got ndim={t.ndim}")
    return t


def unfold(t, mode):
    """Mode-``mode`` unfolding, shape ``(I_mode, prod(other dims))``.

    Columns enumerate the remaining indices with the lower-numbered mode
    fastest, e.g. for mode 3 entry ``(k, i + I1*j)`` is ``t[i, j, k]``.
    """
    ax = _check_mode(mode)
    t = np.asarray(t)
    return np.moveaxis(t, ax, 0).reshape(t.shape[ax], -1, order="F")


def fold(m, mode, dims):
    """Inverse of :func:`unfold`."""
    ax = _check_mode(mode)
    dims = tuple(int(d) for d in dims)
    m = np.asarray(m)
    rest = [d for i, d in enumerate(dims) if i != ax]
    if m.shape != (dims[ax], rest[0] * rest[1]):
        raise DimensionError(f"matrix of shape {m.shape} cannot be folded along mode {mode} into {dims}")
    t = m.reshape([dims[ax]] + rest, order="F")
    return np.moveaxis(t, 0, ax)


def mode_n_product(a, b, mode):
    """Mode-n product ``a x_n b`` for a matrix ``b`` of shape ``(K, I_n)``."""
    ax = _check_mode(mode)
    a = np.asarray(a)
    b = np.asarray(b)
    if b.ndim != 2 or b.shape[1] != a.shape[ax]:
        raise DimensionError(
            f"matrix of shape {b.shape} incompatible with mode {mode} of tensor {a.shape}"
        )
    out = np.tensordot(b, a, axes=(1, ax))
    return np.moveaxis(out, 0, ax)


def fft_mode3(t):
    """Unnormalised FFT along the third mode."""
    return np.fft.fft(t, axis=2)


def ifft_mode3(c, check=True):
    """Inverse of :func:`fft_mode3` (carries the 1/I3 factor); returns the real part.

    With ``check`` the discarded imaginary part is verified to be negligible.
    """
    z = np.fft.ifft(c, axis=2)
    if check:
        scale = max(np.linalg.norm(z.real), np.finfo(float).tiny)
        resid = np.linalg.norm(z.imag)
        if resid > 1e-10 * scale and resid > 1e-300:
            raise ValueError(f"inverse FFT is not real: imaginary residue {resid:.3e}")
    return np.ascontiguousarray(z.real)


def n_unique_slices(n3):
    """Frequency slices not recoverable by conjugate symmetry: ceil((n3 + 1) / 2)."""
    return n3 // 2 + 1


def _is_self_conjugate(k, n3):
    return k == 0 or (n3 % 2 == 0 and k == n3 // 2)


class TSvdFactors(NamedTuple):
    U: np.ndarray
    S: np.ndarray
    V: np.ndarray


def tsvd(t):
    """Full t-SVD ``t = U * S * V^T`` (t-product).

    Only the first ``ceil((I3+1)/2)`` Fourier slices are decomposed; the rest
    follow from conjugate symmetry of the FFT of real data, which also keeps
    the three factors exactly real.
    """
    t = as_tensor(t)
    n1, n2, n3 = t.shape
    tb = fft_mode3(t)
    ub = np.zeros((n1, n1, n3), dtype=complex)
    sb = np.zeros((n1, n2, n3), dtype=complex)
    vb = np.zeros((n2, n2, n3), dtype=complex)
    r = min(n1, n2)
    for k in range(n_unique_slices(n3)):
        sl = tb[:, :, k].real if _is_self_conjugate(k, n3) else tb[:, :, k]
        u, s, vh = np.linalg.svd(sl, full_matrices=True)
        ub[:, :, k] = u
        sb[np.arange(r), np.arange(r), k] = s
        vb[:, :, k] = vh.conj().T
        if not _is_self_conjugate(k, n3):
            ub[:, :, n3 - k] = u.conj()
            sb[np.arange(r), np.arange(r), n3 - k] = s
            vb[:, :, n3 - k] = vh.T
    return TSvdFactors(ifft_mode3(ub), ifft_mode3(sb), ifft_mode3(vb))


def t_transpose(t):
    """Tensor transpose: transpose every frontal slice and reverse slices 2..I3."""
    t = np.asarray(t)
    tt = np.transpose(t, (1, 0, 2))
    return np.concatenate([tt[:, :, :1], tt[:, :, :0:-1]], axis=2)


def t_product(a, b):
    """t-product of ``a`` (n1 x n2 x n3) and ``b`` (n2 x n4 x n3)."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape[1] != b.shape[0] or a.shape[2] != b.shape[2]:
        raise DimensionError(f"t-product of {a.shape} and {b.shape} is undefined")
    ab = np.einsum("ijk,jlk->ilk", fft_mode3(a), fft_mode3(b))
    return ifft_mode3(ab)


def grad(t, mode):
    """Periodic forward difference ``t(i+1) - t(i)`` along ``mode``."""
    ax = _check_mode(mode)
    return np.roll(t, -1, axis=ax) - t


def grad_adjoint(t, mode):
    """Adjoint of :func:`grad`: ``t(i-1) - t(i)`` along ``mode``."""
    ax = _check_mode(mode)
    return np.roll(t, 1, axis=ax) - t


def difference_matrix(n):
    """Dense circulant difference matrix whose rows are shifts of (-1, 1, 0, ..., 0)."""
    d = -np.eye(n)
    d[np.arange(n), (np.arange(n) + 1) % n] += 1.0
    return d


def grad_gram_eigenvalues(n):
    """Eigenvalues of ``D^T D`` in FFT order: ``2 - 2 cos(2 pi k / n)``."""
    return 2.0 - 2.0 * np.cos(2.0 * np.pi * np.arange(n) / n)
