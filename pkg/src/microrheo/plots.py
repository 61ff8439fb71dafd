"""Figure rendering for the CLI report path.

Every figure goes straight to a file (Agg backend, fixed metadata, no
timestamps) so repeated runs with the same data produce identical bytes.
The numeric library never imports this module.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

_RC = {
    "figure.figsize": (5.5, 3.6),
    "figure.dpi": 110,
    "font.size": 9,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "savefig.bbox": "tight",
}

_METADATA = {"Software": "microrheo"}


def _save(fig, path):
    fig.savefig(path, metadata=_METADATA)
    plt.close(fig)
    return path


def plot_tracks(tracks, path, max_tracks=8):
    with plt.rc_context(_RC):
        fig, ax = plt.subplots()
        for t in tracks[:max_tracks]:
            time = np.arange(t.positions.size) * t.dt
            ax.plot(time, t.positions, lw=0.8, label=f"{t.id}:{t.coord}")
        ax.set_xlabel("time [s]")
        ax.set_ylabel("position")
        if len(tracks) <= max_tracks:
            ax.legend(fontsize=7)
        return _save(fig, path)


def plot_msd(curves, labels, path):
    with plt.rc_context(_RC):
        fig, ax = plt.subplots()
        for curve, label in zip(curves, labels):
            ax.loglog(curve.times, curve.values, lw=0.9, label=label)
        ax.set_xlabel("lag time [s]")
        ax.set_ylabel("pathwise MSD")
        if len(labels) <= 10:
            ax.legend(fontsize=7)
        return _save(fig, path)


def plot_acf(curves, labels, path, n_obs=None):
    with plt.rc_context(_RC):
        fig, ax = plt.subplots()
        for curve, label in zip(curves, labels):
            ax.plot(curve.lags, curve.correlations, lw=0.9, label=label)
        if n_obs:
            band = 1.96 / np.sqrt(n_obs)
            ax.axhline(band, color="k", ls="--", lw=0.7)
            ax.axhline(-band, color="k", ls="--", lw=0.7)
        ax.axhline(0.0, color="k", lw=0.5)
        ax.set_xlabel("lag")
        ax.set_ylabel("sample ACF")
        if len(labels) <= 10:
            ax.legend(fontsize=7)
        return _save(fig, path)


def plot_modulus(curve, path):
    with plt.rc_context(_RC):
        fig, ax = plt.subplots()
        ax.loglog(curve.frequencies, np.abs(curve.storage), label="G' (storage)")
        ax.loglog(curve.frequencies, np.abs(curve.loss), label="G'' (loss)")
        ax.set_xlabel("angular frequency [rad/s]")
        ax.set_ylabel("modulus [Pa]")
        ax.legend(fontsize=8)
        return _save(fig, path)


def plot_distribution(result, path):
    from scipy.stats import gaussian_kde, norm

    with plt.rc_context(_RC):
        fig, ax = plt.subplots()
        est = result.estimates
        ax.hist(est, bins=40, density=True, alpha=0.45, label="per-path estimates")
        grid = np.linspace(est.min(), est.max(), 300)
        if est.std() > 0:
            ax.plot(grid, gaussian_kde(est)(grid), lw=1.2, label="kernel density")
        overlay = norm.pdf(grid, loc=result.pooled_alpha, scale=result.overlay_sd)
        ax.plot(grid, overlay, "r-", lw=1.2, label="asymptotic normal")
        ax.set_xlabel(r"$\hat\alpha$")
        ax.set_ylabel("density")
        ax.legend(fontsize=8)
        return _save(fig, path)


def plot_comparison(result, path):
    with plt.rc_context(_RC):
        fig, ax = plt.subplots()
        labels = [r.method for r in result.rows]
        means = [r.d_hat for r in result.rows]
        spreads = [r.s for r in result.rows]
        x = np.arange(len(labels))
        ax.errorbar(x, means, yerr=spreads, fmt="o", capsize=4)
        ax.axhline(result.config["d"], color="r", ls="--", lw=0.8, label="target d")
        ax.set_xticks(x)
        ax.set_xticklabels(labels, rotation=20, ha="right", fontsize=7)
        ax.set_ylabel(r"pooled $\hat d$ (bars: sample SD)")
        ax.legend(fontsize=8)
        return _save(fig, path)
