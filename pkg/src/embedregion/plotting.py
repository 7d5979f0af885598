"""PNG rendering of rate regions (headless)."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

STYLES = ("-", "--", ":", "-.")


def plot_regions(regions, path, title: str | None = None) -> None:
    """Draw each ``(label, RateRegion)`` boundary and save to ``path``."""
    fig, ax = plt.subplots(figsize=(5, 4.5))
    for k, (label, region) in enumerate(regions):
        v = region.as_array()
        closed = v if len(v) < 3 else v[list(range(len(v))) + [0]]
        ax.plot(closed[:, 0], closed[:, 1], STYLES[k % len(STYLES)], marker=".", label=label)
    ax.set_xlabel("R1 (bits/symbol)")
    ax.set_ylabel("R2 (bits/symbol)")
    ax.set_xlim(left=0)
    ax.set_ylim(bottom=0)
    ax.grid(alpha=0.3)
    ax.legend(loc="upper right", fontsize="small")
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=120, metadata={"Software": None})
    plt.close(fig)
