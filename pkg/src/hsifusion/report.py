"""Matplotlib figures written next to the CSV outputs.

Figures are built on :class:`matplotlib.figure.Figure` directly, so no
pyplot state or interactive backend is involved.
"""

import numpy as np
from matplotlib.figure import Figure

PNG_META = {"Software": None}


def _figure(ncols=1, width=4.0, height=3.0):
    fig = Figure(figsize=(width * ncols, height), dpi=100)
    axes = fig.subplots(1, ncols, squeeze=False)[0]
    for ax in axes:
        ax.grid(True, which="both", lw=0.3, alpha=0.6)
        ax.tick_params(labelsize=8)
    return fig, axes


def plot_convergence(rows, path, psnr_trace=None):
    """Relative change and feasibility residuals per iteration; PSNR panel when given."""
    it = np.array([r.iter for r in rows])
    rel = np.array([r.rel_change for r in rows])
    fg = np.array([r.feas_g for r in rows])
    fh = np.array([r.feas_h for r in rows])
    ncols = 3 if psnr_trace is not None else 2
    fig, axes = _figure(ncols)
    axes[0].semilogy(it, np.maximum(rel, 1e-300), "k-")
    axes[0].set_xlabel("iteration")
    axes[0].set_ylabel("relative change of C")
    for t in range(3):
        axes[1].semilogy(it, np.maximum(fg[:, t], 1e-300), label=f"|G{t + 1} - C|")
        axes[1].semilogy(it, np.maximum(fh[:, t], 1e-300), "--", label=f"|H{t + 1} - grad G{t + 1}|")
    axes[1].set_xlabel("iteration")
    axes[1].set_ylabel("feasibility residual")
    axes[1].legend(fontsize=7, ncol=2)
    if psnr_trace is not None:
        axes[2].plot(it[: len(psnr_trace)], psnr_trace, "b-")
        axes[2].set_xlabel("iteration")
        axes[2].set_ylabel("PSNR (dB)")
    fig.tight_layout()
    fig.savefig(path, metadata=PNG_META)
    return path


def plot_band_curves(report, path):
    """Per-band PSNR and UIQI of a :class:`~hsifusion.metrics.MetricReport`."""
    fig, axes = _figure(2)
    bands = np.arange(len(report.psnr_band))
    axes[0].plot(bands, report.psnr_band, "r.-")
    axes[0].set_xlabel("band")
    axes[0].set_ylabel("PSNR (dB)")
    axes[1].plot(bands, report.uiqi_band, "b.-")
    axes[1].set_xlabel("band")
    axes[1].set_ylabel("UIQI")
    fig.tight_layout()
    fig.savefig(path, metadata=PNG_META)
    return path


def plot_error_map(err, path, vmax=0.1, title=None):
    """Absolute error image with a fixed ``[0, vmax]`` colour scale."""
    fig, axes = _figure(1, width=4.0, height=3.4)
    im = axes[0].imshow(err, cmap="jet", vmin=0.0, vmax=vmax, interpolation="nearest")
    axes[0].grid(False)
    axes[0].set_xticks([])
    axes[0].set_yticks([])
    if title:
        axes[0].set_title(title)
    fig.colorbar(im, ax=axes[0])
    fig.tight_layout()
    fig.savefig(path, metadata=PNG_META)
    return path
