"""Figure rendering for the command-line reports.

Every writer takes already-computed results and a target path; nothing here
recomputes physics.  The Agg backend is forced so the CLI works headless.
"""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def save_budget_figure(budget, path) -> None:
    """Bar chart of the link budget magnitudes on a log scale."""
    names = ["|mean_I|", "|mean_II|", "|mean_III|", "sqrt(var)"]
    vals = [
        abs(budget.mean_I),
        abs(budget.mean_II),
        abs(budget.mean_III),
        np.sqrt(budget.variance),
    ]
    fig, ax = plt.subplots(figsize=(5.0, 3.2))
    shown = [max(v, 1e-300) for v in vals]
    ax.bar(names, shown, color=["#777777", "#aaaaaa", "#2c7fb8", "#d95f0e"])
    ax.set_yscale("log")
    ax.set_ylabel("ECSD units")
    ax.set_title("link budget: signal vs fluctuation (snr %.2f)" % budget.snr_ratio)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_series_figure(series, levels, path) -> None:
    """Slot ECSD values against time, colored by the modulation level."""
    levels = np.asarray(levels)
    fig, axes = plt.subplots(2, 1, sharex=True, figsize=(6.4, 4.2))
    for ax, part, name in [(axes[0], series.values.real, "Re S"),
                           (axes[1], series.values.imag, "Im S")]:
        for lvl, color in [(0, "#555555"), (1, "#d62728")]:
            pick = levels == lvl
            ax.plot(series.centers[pick], part[pick], "o", ms=4, color=color,
                    label="level %d" % lvl)
        ax.axhline(0.0, lw=0.5, color="k")
        ax.set_ylabel(name)
    axes[0].legend(loc="best", fontsize=8)
    axes[1].set_xlabel("slot center time [s]")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_ber_figure(axis_name, values, stats_list, path) -> None:
    """BER with Wilson intervals against the sweep axis (log BER scale)."""
    values = np.asarray(values, dtype=float)
    ber = np.array([s.ber for s in stats_list])
    lo = np.array([s.wilson_low for s in stats_list])
    hi = np.array([s.wilson_high for s in stats_list])
    floor = 1e-5
    fig, ax = plt.subplots(figsize=(5.2, 3.4))
    shown = np.maximum(ber, floor)
    yerr = np.stack([shown - np.maximum(lo, floor), np.maximum(hi, floor) - shown])
    ax.errorbar(values, shown, yerr=yerr, fmt="o-", capsize=3, color="#2c7fb8")
    ax.set_yscale("log")
    ax.set_xlabel(axis_name)
    ax.set_ylabel("bit error rate")
    ax.set_title("measured BER (95% Wilson)")
    ax.grid(True, which="both", lw=0.3, alpha=0.5)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
