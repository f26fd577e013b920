"""Observation model: spatial blur, decimation, spectral response and noise.

The blur is a circular (periodic) 2-D convolution applied identically to
every band; decimation keeps the samples at indices 0, d, 2d, ... along both
spatial axes.  Both choices make the forward operators and their adjoints
exact and FFT-friendly.

Noise fields are ``numpy.random.default_rng(seed).standard_normal(shape)``
scaled to the requested SNR, i.e. a pure function of (seed, shape).
"""

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, ParameterError
from .tensor import mode_n_product


def gaussian_kernel(size=7, sigma=2.0):
    """Normalised ``size x size`` Gaussian on an integer grid centred at ``size // 2``."""
    if size < 1 or size % 2 == 0:
        raise ParameterError(f"kernel size must be a positive odd integer, got {size}")
    if sigma <= 0:
        raise ParameterError(f"sigma must be positive, got {sigma}")
    r = np.arange(size) - size // 2
    g = np.exp(-(r[:, None] ** 2 + r[None, :] ** 2) / (2.0 * sigma**2))
    return g / g.sum()


def delta_kernel():
    return np.ones((1, 1))


def parse_kernel(spec):
    """Parse ``"gaussian:<k>:<sigma>"`` or ``"delta"``."""
    spec = spec.strip().lower()
    if spec == "delta":
        return delta_kernel()
    parts = spec.split(":")
    if len(parts) == 3 and parts[0] == "gaussian":
        try:
            size, sigma = int(parts[1]), float(parts[2])
        except ValueError:
            raise ParameterError(f"bad kernel spec {spec!r}") from None
        return gaussian_kernel(size, sigma)
    raise ParameterError(f"kernel spec must be 'delta' or 'gaussian:<k>:<sigma>', got {spec!r}")


@dataclass(frozen=True)
class DegradationModel:
    """PSF kernel, decimation factor and spectral response matrix (s x S)."""

    kernel: np.ndarray
    factor: int
    srf: np.ndarray

    def __post_init__(self):
        k = np.asarray(self.kernel, dtype=np.float64)
        srf = np.atleast_2d(np.asarray(self.srf, dtype=np.float64))
        if k.ndim != 2 or k.shape[0] != k.shape[1] or k.shape[0] % 2 == 0:
            raise ParameterError(f"kernel must be square with odd size, got shape {k.shape}")
        if abs(k.sum() - 1.0) > 1e-12:
            raise ParameterError(f"kernel must sum to 1, sums to {k.sum()!r}")
        if int(self.factor) != self.factor or self.factor < 1:
            raise ParameterError(f"decimation factor must be a positive integer, got {self.factor}")
        if np.any(srf < 0):
            raise ParameterError("spectral response must be nonnegative")
        if np.any(np.abs(srf.sum(axis=1) - 1.0) > 1e-12):
            raise ParameterError("each spectral response row must sum to 1")
        object.__setattr__(self, "kernel", k)
        object.__setattr__(self, "srf", srf)
        object.__setattr__(self, "factor", int(self.factor))

    def check_hr_dims(self, shape):
        w, h = shape[:2]
        if w % self.factor or h % self.factor:
            raise DimensionError(f"decimation factor {self.factor} does not divide spatial dims {w}x{h}")

    def otf(self, w, h):
        """2-D FFT of the kernel embedded in a ``w x h`` grid with its centre at (0, 0)."""
        k = self.kernel
        r = k.shape[0] // 2
        psf = np.zeros((w, h))
        idx = (np.arange(k.shape[0]) - r)
        psf[np.ix_(idx % w, idx % h)] += k
        return np.fft.fft2(psf)


def blur_apply(z, model):
    w, h = z.shape[:2]
    otf = model.otf(w, h)
    zf = np.fft.fft2(z, axes=(0, 1))
    return np.fft.ifft2(zf * otf[:, :, None], axes=(0, 1)).real


def blur_adjoint(z, model):
    w, h = z.shape[:2]
    otf = model.otf(w, h)
    zf = np.fft.fft2(z, axes=(0, 1))
    return np.fft.ifft2(zf * otf.conj()[:, :, None], axes=(0, 1)).real


def downsample(z, d):
    if z.shape[0] % d or z.shape[1] % d:
        raise DimensionError(f"factor {d} does not divide spatial dims {z.shape[:2]}")
    return np.ascontiguousarray(z[::d, ::d])


def upsample_zero(x, d):
    """Zero insertion onto the phase-0 grid: adjoint of :func:`downsample`."""
    out = np.zeros((x.shape[0] * d, x.shape[1] * d) + x.shape[2:])
    out[::d, ::d] = x
    return out


def upsample_nearest(x, d):
    return np.repeat(np.repeat(x, d, axis=0), d, axis=1)


def spectral_apply(z, srf):
    return mode_n_product(z, np.atleast_2d(srf), 3)


def spectral_adjoint(y, srf):
    return mode_n_product(y, np.atleast_2d(srf).T, 3)


def spatial_degrade(z, model):
    """``Z B S``: blur then decimate each band."""
    return downsample(blur_apply(z, model), model.factor)


def spatial_degrade_adjoint(x, model):
    """``(B S)^T``: zero-insert then apply the adjoint blur."""
    return blur_adjoint(upsample_zero(x, model.factor), model)


def noise_sigma(t, snr_db):
    power = float(np.mean(np.square(t)))
    if power == 0.0:
        raise ParameterError("SNR is undefined for an all-zero signal")
    return np.sqrt(power / 10.0 ** (snr_db / 10.0))


def add_noise_snr(t, snr_db, seed):
    """Add white Gaussian noise with variance ``mean(t**2) / 10**(snr_db/10)``.

    ``snr_db=None`` (or +inf) returns an unchanged copy.
    """
    t = np.asarray(t, dtype=np.float64)
    if snr_db is None or snr_db == np.inf:
        return t.copy()
    sigma = noise_sigma(t, snr_db)
    rng = np.random.default_rng(seed)
    return t + sigma * rng.standard_normal(t.shape)


def realized_snr(clean, noisy):
    """Empirical SNR in dB; +inf when the two are identical."""
    err = float(np.mean(np.square(np.asarray(noisy) - clean)))
    if err == 0.0:
        return np.inf
    return 10.0 * np.log10(float(np.mean(np.square(clean))) / err)


def simulate_observations(z, model, snr_hsi=None, snr_msi=None, seed=0):
    """Return the noisy low-resolution HSI and high-resolution MSI of ``z``.

    The two noise fields use independent child seeds spawned from ``seed``.
    """
    model.check_hr_dims(z.shape)
    if model.srf.shape[1] != z.shape[2]:
        raise DimensionError(f"SRF has {model.srf.shape[1]} columns but image has {z.shape[2]} bands")
    s_hsi, s_msi = np.random.SeedSequence(seed).spawn(2)
    x = add_noise_snr(spatial_degrade(z, model), snr_hsi, s_hsi)
    y = add_noise_snr(spectral_apply(z, model.srf), snr_msi, s_msi)
    return x, y
