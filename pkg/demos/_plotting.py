"""Optional matplotlib helper shared by the demos.

Figures are written next to the demo outputs when matplotlib is installed
(``pip install -e .[plot]``); otherwise the demos only print numbers.
"""

from pathlib import Path

try:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
except ImportError:  # pragma: no cover - depends on the environment
    plt = None

OUT = Path(__file__).resolve().parent / "out"


def save_lines(stem, t, series, ylabel, title):
    """Plot named series against time and save ``out/<stem>.png``."""
    if plt is None:
        return None
    OUT.mkdir(exist_ok=True)
    fig, ax = plt.subplots(figsize=(7, 3.5))
    for label, values in series.items():
        ax.plot(t, values, label=label, lw=1.2)
    ax.set_xlabel("t [s]")
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    ax.grid(alpha=0.3)
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    path = OUT / f"{stem}.png"
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
