"""QQ figures written to PNG files."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def plot_qq(columns: dict, out_dir, title: str = "") -> list[Path]:
    """One figure per statistic, every model against the real quantiles."""
    out_dir = Path(out_dir)
    by_stat: dict[str, list[str]] = {}
    for name in columns:
        stat, _, model = name.partition("_quantiles_")
        if model != "real":
            by_stat.setdefault(stat, []).append(model)
    paths = []
    for stat, models in by_stat.items():
        real = columns[f"{stat}_quantiles_real"]
        fig, ax = plt.subplots(figsize=(4, 4))
        for m in models:
            ax.plot(real, columns[f"{stat}_quantiles_{m}"], "o", ms=3, label=m)
        lo = min(real.min(), *(columns[f"{stat}_quantiles_{m}"].min() for m in models))
        hi = max(real.max(), *(columns[f"{stat}_quantiles_{m}"].max() for m in models))
        ax.plot([lo, hi], [lo, hi], "k--", lw=0.8)
        ax.set_xlabel(f"{stat} (real)")
        ax.set_ylabel(f"{stat} (sampled)")
        ax.set_title(f"{title} {stat}".strip())
        ax.legend(fontsize=7)
        fig.tight_layout()
        path = out_dir / f"qq_{stat.lower()}.png"
        fig.savefig(path, dpi=100)
        plt.close(fig)
        paths.append(path)
    return paths
