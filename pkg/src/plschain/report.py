"""Simulation output writing: delimited report, trace log, chain manifest,
and rendered figures summarising the run."""

from __future__ import annotations

import os


def write_outputs(report, outdir: str, chain=None, figures: bool = True) -> list[str]:
    """Write report.txt / trace.log (and chain.txt when a chain is given)
    under ``outdir``, plus PNG figures; returns the paths written."""
    os.makedirs(outdir, exist_ok=True)
    written = []

    path = os.path.join(outdir, "report.txt")
    with open(path, "w") as fh:
        for line in report.config.lines():
            fh.write(line + "\n")
        for line in report.report_lines():
            fh.write(line + "\n")
    written.append(path)

    path = os.path.join(outdir, "trace.log")
    with open(path, "w") as fh:
        for line in report.trace_lines():
            fh.write(line + "\n")
    written.append(path)

    if chain is not None:
        path = os.path.join(outdir, "chain.txt")
        with open(path, "w") as fh:
            for block in chain.blocks:
                fh.write(f"{block.index} {block.block_hash.hex()}\n")
        written.append(path)

    if figures:
        written += render_figures(report, os.path.join(outdir, "figures"))
    return written


def render_figures(report, figdir: str) -> list[str]:
    """Two overview plots: event mix per interval and chain progress per thing."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    os.makedirs(figdir, exist_ok=True)
    intervals = list(range(1, report.config.intervals + 2))
    written = []

    kinds = ("accept", "reject", "trigger-fire", "trigger-expire", "alarm")
    series = {kind: [0] * len(intervals) for kind in kinds}
    for ev in report.trace:
        if ev.kind in series and 1 <= ev.interval <= len(intervals):
            series[ev.kind][ev.interval - 1] += 1
    fig, ax = plt.subplots(figsize=(8, 4))
    bottom = [0] * len(intervals)
    for kind in kinds:
        ax.bar(intervals, series[kind], bottom=bottom, label=kind)
        bottom = [b + v for b, v in zip(bottom, series[kind])]
    ax.set_xlabel("interval")
    ax.set_ylabel("events")
    ax.set_title("validator and trigger events per interval")
    ax.legend(loc="upper left", fontsize=8)
    path = os.path.join(figdir, "events.png")
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)
    written.append(path)

    progress: dict[str, dict[int, int]] = {}
    for ev in report.trace:
        if ev.kind == "validate" and ev.actor.startswith("thing"):
            fields = dict(part.split("=") for part in ev.detail.split())
            per = progress.setdefault(ev.actor, {})
            per[ev.interval] = max(per.get(ev.interval, 0), int(fields["block"]))
    fig, ax = plt.subplots(figsize=(8, 4))
    for name in sorted(progress):
        xs, ys, best = [], [], 0
        for t in intervals:
            best = max(best, progress[name].get(t, 0))
            xs.append(t)
            ys.append(best)
        ax.plot(xs, ys, label=name)
    ax.set_xlabel("interval")
    ax.set_ylabel("highest verified block")
    ax.set_title("per-thing verified chain progress")
    if progress:
        ax.legend(loc="upper left", fontsize=8)
    path = os.path.join(figdir, "progress.png")
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)
    written.append(path)
    return written
