"""Render report documents to matplotlib figures on disk.

Used by the eval and srtp report paths; figures land next to the delimited
outputs so a run leaves both machine-readable and visual artifacts.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402


def render_report_figures(report: dict, out_dir: str | Path) -> list[Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []

    per_bucket = report.get("per_bucket") or []
    if per_bucket:
        ks = [str(row["k"]) for row in per_bucket]

        fig, ax = plt.subplots(figsize=(6, 3.5))
        width = 0.4
        xs = range(len(ks))
        ax.bar([x - width / 2 for x in xs], [row["f1"] for row in per_bucket],
               width=width, label="token F1", color="#4878cf")
        ax.bar([x + width / 2 for x in xs], [row["exact"] for row in per_bucket],
               width=width, label="exact match", color="#d65f5f")
        ax.set_xticks(list(xs))
        ax.set_xticklabels(ks)
        ax.set_xlabel("turn bucket")
        ax.set_ylabel("score")
        ax.set_ylim(0, 1.05)
        ax.legend()
        fig.tight_layout()
        path = out_dir / "accuracy_by_bucket.png"
        fig.savefig(path)
        plt.close(fig)
        written.append(path)

        fig, ax = plt.subplots(figsize=(6, 3.5))
        ax.bar(ks, [row["latency_ms"] for row in per_bucket], color="#6acc65")
        ax.set_xlabel("turn bucket")
        ax.set_ylabel("mean latency (ms)")
        fig.tight_layout()
        path = out_dir / "latency_by_bucket.png"
        fig.savefig(path)
        plt.close(fig)
        written.append(path)

    distribution = report.get("error_distribution") or {}
    if distribution:
        fig, ax = plt.subplots(figsize=(6, 3.5))
        labels = sorted(distribution)
        ax.bar(labels, [distribution[k] for k in labels], color="#956cb4")
        ax.set_ylabel("% of bad cases")
        ax.set_xlabel("error type")
        fig.tight_layout()
        path = out_dir / "error_distribution.png"
        fig.savefig(path)
        plt.close(fig)
        written.append(path)

    return written
