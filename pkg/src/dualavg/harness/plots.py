"""Log-log gap curves with the closed-form bound overlaid."""
from __future__ import annotations

import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def curve_data(summary):
    """Rows (x, mean gap, bound) of a sweep; x is N, or the mean call count in eps mode."""
    rows = []
    for pt in summary["points"]:
        x = pt["N"] if "N" in pt else pt["oracle_calls"]["mean"]
        gap = (pt["f_gap"] or {}).get("mean")
        rows.append((x, gap, pt["bound"]))
    return rows


def emit_plots(summary, out_dir):
    """Write gap_vs_N.png and gap_vs_N.csv; returns their paths."""
    rows = curve_data(summary)
    if not rows:
        raise ValueError("empty sweep: nothing to plot")
    os.makedirs(out_dir, exist_ok=True)
    csv_path = os.path.join(out_dir, "gap_vs_N.csv")
    with open(csv_path, "w", encoding="utf-8", newline="") as fh:
        fh.write("N,mean_gap,bound\n")
        for x, g, b in rows:
            fh.write(",".join("" if v is None else "%.17g" % v for v in (x, g, b)) + "\n")
    fig, ax = plt.subplots(figsize=(5, 4))
    xs = [r[0] for r in rows]
    ax.loglog(xs, [r[1] if r[1] and r[1] > 0 else float("nan") for r in rows], "o-", label="measured gap")
    if any(r[2] is not None for r in rows):
        ax.loglog(xs, [float("nan") if r[2] is None else r[2] for r in rows], "k--", label="bound")
    ax.set_xlabel("oracle calls N")
    ax.set_ylabel("f(x) - f*")
    ax.legend()
    fig.tight_layout()
    png_path = os.path.join(out_dir, "gap_vs_N.png")
    fig.savefig(png_path, dpi=100, metadata={"Software": None})
    plt.close(fig)
    return png_path, csv_path
