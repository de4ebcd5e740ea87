"""Optional PNG figures rendered from report curves (matplotlib, Agg backend)."""
from __future__ import annotations

from pathlib import Path

from .reports import ExperimentReport


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def _columns(curve):
    return {h: [row[i] for row in curve.rows] for i, h in enumerate(curve.header)}


def _tube_scan(ax, rep):
    cols = _columns(rep.curves["width"])
    for h in cols:
        if h.startswith("ratio_t"):
            ax.loglog(cols["width"], cols[h], marker="o", label=f"t = {h[7:]}")
    ax.set_xlabel("tube width w")
    ax.set_ylabel("max mu(E cap T) / w^t")
    ax.invert_xaxis()


def _tail(ax, rep):
    cols = _columns(rep.curves["tail"])
    ax.errorbar(cols["n"], cols["frequency"], yerr=[3 * s for s in cols["frequency_se"]], marker="o", label="frequency")
    ax.plot(cols["n"], cols["bound"], "k--", label="exp(-r_n^-eps)")
    ax.set_xlabel("level n")
    ax.set_ylabel("P(Y_n > R r_n^(t-k))")


def _box_dim(ax, rep):
    cols = _columns(rep.curves["box"])
    for direction in sorted(set(cols["direction"])):
        xs = [x for x, dd in zip(cols["log_inv_delta"], cols["direction"]) if dd == direction]
        ys = [y for y, dd in zip(cols["log_count"], cols["direction"]) if dd == direction]
        ax.plot(xs, ys, color="C0", alpha=0.3, lw=0.8)
    ax.set_xlabel("log(1/delta)")
    ax.set_ylabel("log N(delta)")


def _ahlfors(ax, rep):
    cols = _columns(rep.curves["balls"])
    ratio = [e / r ** rep.params["exponent"] for e, r in zip(cols["estimate"], cols["r"])]
    ax.loglog(cols["r"], ratio, ".", alpha=0.2)
    ax.set_xlabel("radius r")
    ax.set_ylabel("mu(B(x, r)) / r^exponent")


def _samples(ax, rep):
    cols = _columns(rep.curves["samples"])
    ax.hist(cols["Y_n"], bins=50)
    ax.axvline(rep.statistics["y_prev"], color="k", ls="--", label="Y_(n-1)")
    ax.set_xlabel("Y_n^W")
    ax.set_ylabel("trials")


_RENDERERS = {
    "tube-scan": _tube_scan,
    "tail": _tail,
    "box-dim": _box_dim,
    "ahlfors": _ahlfors,
    "martingale": _samples,
}


def render_report(rep: ExperimentReport, out_dir: Path) -> list[Path]:
    """Write `<experiment>.png` next to the CSV output; experiments without a curve are skipped."""
    draw = _RENDERERS.get(rep.experiment)
    if draw is None:
        return []
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(6, 4))
    try:
        draw(ax, rep)
        if ax.get_legend_handles_labels()[0]:
            ax.legend()
        ax.set_title(rep.experiment)
        fig.tight_layout()
        path = Path(out_dir) / f"{rep.experiment.replace('-', '_')}.png"
        path.parent.mkdir(parents=True, exist_ok=True)
        fig.savefig(path, dpi=120)
    finally:
        plt.close(fig)
    return [path]
