"""Full-reference quality indices for hyperspectral reconstructions.

All functions take ``(ref, test)`` arrays of shape ``W x H x S``.  Peaks are
per-band maxima of the reference, which keeps PSNR and SSIM meaningful on
unclipped, noisy data.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np
from skimage.metrics import structural_similarity

from .errors import DimensionError

PSNR_CAP = 99.0


def _pair(ref, test):
    ref = np.asarray(ref, dtype=np.float64)
    test = np.asarray(test, dtype=np.float64)
    if ref.shape != test.shape:
        raise DimensionError(f"reference {ref.shape} and test {test.shape} differ in shape")
    if ref.ndim == 2:
        ref, test = ref[:, :, None], test[:, :, None]
    if ref.ndim != 3:
        raise DimensionError(f"expected W x H x S images, got ndim={ref.ndim}")
    return ref, test


def psnr(ref, test, cap=PSNR_CAP):
    """Mean and per-band PSNR in dB, capped at ``cap`` (also for exact matches)."""
    ref, test = _pair(ref, test)
    mse = np.mean((ref - test) ** 2, axis=(0, 1))
    peak = ref.max(axis=(0, 1))
    with np.errstate(divide="ignore"):
        per_band = 10.0 * np.log10(peak**2 / mse)
    per_band = np.where(mse == 0, cap, np.minimum(per_band, cap))
    return float(per_band.mean()), per_band


def sam(ref, test, return_skipped=False):
    """Mean spectral angle in degrees; pixels where either spectrum is zero are skipped."""
    ref, test = _pair(ref, test)
    r = ref.reshape(-1, ref.shape[2])
    t = test.reshape(-1, test.shape[2])
    nr = np.linalg.norm(r, axis=1)
    nt = np.linalg.norm(t, axis=1)
    ok = (nr > 0) & (nt > 0)
    # half-angle form: exact zero for identical spectra, no arccos cancellation near 0
    u = r[ok] / nr[ok, None]
    v = t[ok] / nt[ok, None]
    ang = np.degrees(2.0 * np.arctan2(np.linalg.norm(u - v, axis=1), np.linalg.norm(u + v, axis=1)))
    skipped = int((~ok).sum())
    value = float(ang.mean()) if ang.size else 0.0
    return (value, skipped) if return_skipped else value


def ergas(ref, test, ratio):
    """``(100 / ratio) * sqrt(mean_b (RMSE_b / mean_b)^2)``; zero-mean bands are excluded."""
    ref, test = _pair(ref, test)
    rmse = np.sqrt(np.mean((ref - test) ** 2, axis=(0, 1)))
    mean = ref.mean(axis=(0, 1))
    ok = mean != 0
    if not ok.all():
        warnings.warn(f"ERGAS: excluding {int((~ok).sum())} band(s) with zero mean", RuntimeWarning)
    if not ok.any():
        return float("nan")
    return float(100.0 / ratio * np.sqrt(np.mean((rmse[ok] / mean[ok]) ** 2)))


def _ssim_single_window(a, b, peak, k1, k2):
    c1, c2 = (k1 * peak) ** 2, (k2 * peak) ** 2
    ma, mb = a.mean(), b.mean()
    cab = np.mean((a - ma) * (b - mb))
    return float((2 * ma * mb + c1) * (2 * cab + c2) / ((ma**2 + mb**2 + c1) * (a.var() + b.var() + c2)))


def ssim(ref, test, sigma=1.5, k1=0.01, k2=0.03):
    """Mean SSIM with an 11x11 Gaussian window (sigma 1.5) over valid windows and bands.

    Bands smaller than the window are scored as one uniform window.
    """
    ref, test = _pair(ref, test)
    win = 2 * int(3.5 * sigma + 0.5) + 1
    vals = []
    for b in range(ref.shape[2]):
        peak = ref[:, :, b].max()
        if peak <= 0:
            peak = float(np.ptp(ref[:, :, b])) or 1.0
        if min(ref.shape[:2]) < win:
            vals.append(_ssim_single_window(ref[:, :, b], test[:, :, b], peak, k1, k2))
            continue
        vals.append(structural_similarity(
            ref[:, :, b], test[:, :, b], data_range=peak, gaussian_weights=True,
            sigma=sigma, use_sample_covariance=False, K1=k1, K2=k2,
        ))
    return float(np.mean(vals))


def _ratio(num, den):
    # 0/0 is treated as a perfect match of the two factors
    return np.where(den == 0, np.where(num == 0, 1.0, 0.0), num / np.where(den == 0, 1.0, den))


def _q_index(a, b):
    mx, my = a.mean(), b.mean()
    vx, vy = a.var(), b.var()
    cxy = np.mean((a - mx) * (b - my))
    sx, sy = np.sqrt(vx), np.sqrt(vy)
    corr = _ratio(cxy, sx * sy)
    lum = _ratio(2.0 * mx * my, mx**2 + my**2)
    con = _ratio(2.0 * sx * sy, vx + vy)
    return float(corr * lum * con)


def uiqi(ref, test, block=32):
    """Mean and per-band universal quality index over non-overlapping ``block``-sized tiles.

    Images smaller than ``block`` are evaluated as a single tile.
    """
    ref, test = _pair(ref, test)
    w, h, n = ref.shape
    bw, bh = min(block, w), min(block, h)
    per_band = np.empty(n)
    for b in range(n):
        qs = [
            _q_index(ref[i:i + bw, j:j + bh, b], test[i:i + bw, j:j + bh, b])
            for i in range(0, w - bw + 1, bw)
            for j in range(0, h - bh + 1, bh)
        ]
        per_band[b] = np.mean(qs)
    return float(per_band.mean()), per_band


@dataclass
class MetricReport:
    psnr_db: float
    ssim: float
    ergas: float
    sam_deg: float
    uiqi: float
    psnr_band: np.ndarray = field(repr=False)
    uiqi_band: np.ndarray = field(repr=False)

    def rows(self):
        yield "psnr", self.psnr_db
        yield "ssim", self.ssim
        yield "ergas", self.ergas
        yield "sam", self.sam_deg
        yield "uiqi", self.uiqi
        for b, v in enumerate(self.psnr_band):
            yield f"psnr_band_{b}", float(v)
        for b, v in enumerate(self.uiqi_band):
            yield f"uiqi_band_{b}", float(v)

    def summary(self):
        return (f"PSNR {self.psnr_db:.3f} dB  SSIM {self.ssim:.4f}  ERGAS {self.ergas:.4f}  "
                f"SAM {self.sam_deg:.4f} deg  UIQI {self.uiqi:.4f}")


def evaluate(ref, test, ratio):
    p, pb = psnr(ref, test)
    u, ub = uiqi(ref, test)
    return MetricReport(p, ssim(ref, test), ergas(ref, test, ratio), sam(ref, test), u, pb, ub)
