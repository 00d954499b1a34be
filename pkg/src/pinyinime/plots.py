"""Figure rendering for the report paths; every CSV gets a PNG sibling."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt


def save_loss_curve(history, path):
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot([h["epoch"] for h in history], [h["loss"] for h in history],
            marker="o", lw=1.5)
    ax.set_xlabel("epoch")
    ax.set_ylabel("cross-entropy per word")
    ax.set_title("training loss")
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_interlace_figure(results, path):
    fig, ax = plt.subplots(figsize=(8, 4))
    for mode, style in (("online", "-o"), ("frozen", "--s")):
        rows = results[mode]
        ax.plot([r[0] for r in rows], [r[2] for r in rows], style,
                label=mode, ms=4)
    rows = results["online"]
    last = None
    for idx, label, _ in rows:
        if label != last:
            ax.axvline(idx - 0.5, color="gray", alpha=0.4, lw=0.8)
            ax.text(idx, 1.04, label, ha="center", fontsize=8)
            last = label
    ax.set_ylim(-0.05, 1.1)
    ax.set_xlabel("group")
    ax.set_ylabel("top-1 accuracy")
    ax.set_title("adaptation on an interlaced two-domain stream")
    ax.legend(loc="lower right")
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_bench_figure(rows, path):
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 4))
    fr = [r["fraction"] for r in rows]
    ax1.plot(fr, [r["ms_per_miu"] for r in rows], "-o")
    ax1.set_xlabel("kept fraction of target vocabulary")
    ax1.set_ylabel("decode ms per MIU (median)")
    ax1.grid(alpha=0.3)
    ax2.plot(fr, [r["top5"] for r in rows], "-s", color="tab:orange")
    ax2.set_xlabel("kept fraction of target vocabulary")
    ax2.set_ylabel("top-5 accuracy")
    ax2.set_ylim(0, 1.05)
    ax2.grid(alpha=0.3)
    fig.suptitle("accuracy versus decoding time under vocabulary pruning")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_sweep_figure(rows, path):
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot([r["ratio"] for r in rows], [r["top5"] for r in rows], "-o")
    ax.set_xlabel("word-embedding filter ratio")
    ax.set_ylabel("top-5 accuracy")
    ax.set_ylim(0, 1.05)
    ax.set_title("effect of word filtering on conversion quality")
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
