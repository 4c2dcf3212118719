"""Report figures written next to the CSV outputs (PNG, Agg backend, fixed metadata)."""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "figure.figsize": (5.0, 3.4),
    "figure.dpi": 100,
    "font.size": 9,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "legend.frameon": False,
    "svg.hashsalt": "convfilter",
}

COLORS = {"SYM": "#1b9e77", "MED": "#d95f02", "COM": "#7570b3", "mr": "#444444", "category": "#d95f02"}


def _save(fig, path) -> str:
    # no Software/creation stamp so identical inputs give identical bytes
    fig.savefig(path, metadata={"Software": None})
    plt.close(fig)
    return str(path)


def plot_pr_curves(curves: dict, path) -> str:
    """``curves``: class name -> PRCurve."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        for name, c in curves.items():
            r = np.concatenate([[0.0], c.recall])
            p = np.concatenate([[c.precision[0]], c.precision])
            ax.step(r, p, where="pre", color=COLORS.get(name), label=f"{name} (AP {c.average_precision:.3f})")
        ax.set_xlim(0, 1)
        ax.set_ylim(0, 1.02)
        ax.set_xlabel("recall")
        ax.set_ylabel("precision")
        ax.legend(loc="upper right")
        fig.tight_layout()
        return _save(fig, path)


def plot_sweep(rows, path, baseline: float | None = None) -> str:
    """Micro F1 against tau for each filter mode; ``baseline`` draws the all-text score."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        for mode in dict.fromkeys(r.mode for r in rows):
            pts = [(r.tau, r.score.micro_f1) for r in rows if r.mode == mode]
            ax.plot(*zip(*pts), marker=".", color=COLORS.get(mode), label=mode)
        if baseline is not None:
            ax.axhline(baseline, color="#999999", ls="--", lw=1, label="all text")
        ax.set_xlabel("threshold")
        ax.set_ylabel("micro F1")
        ax.set_ylim(0, 1.02)
        ax.legend(loc="lower left")
        fig.tight_layout()
        return _save(fig, path)


def plot_training(report, path) -> str:
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        epochs = np.arange(1, len(report.train_loss) + 1)
        ax.plot(epochs, report.train_loss, color="#444444", label="train loss")
        ax.set_xlabel("epoch")
        ax.set_ylabel("train loss")
        ax2 = ax.twinx()
        ax2.plot(epochs, report.val_auc, color="#d95f02", label="val mean PR-AUC")
        ax2.axvline(report.best_epoch, color="#d95f02", ls=":", lw=1)
        ax2.set_ylabel("val mean PR-AUC")
        ax2.grid(False)
        lines = ax.get_lines()[:1] + ax2.get_lines()[:1]
        ax.legend(lines, [ln.get_label() for ln in lines], loc="center right")
        fig.tight_layout()
        return _save(fig, path)


def plot_length_histogram(convs, path) -> str:
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        ax.hist([len(c) for c in convs], bins=30, color="#7570b3")
        ax.set_xlabel("utterances per conversation")
        ax.set_ylabel("conversations")
        fig.tight_layout()
        return _save(fig, path)
