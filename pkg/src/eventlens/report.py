"""Report rendering: plain-text tables, CSV, and matplotlib figures.

Summaries are grouped into one section per weight profile; the event column
only appears for profiles that score events. Percentages are shown at one
decimal, ties rounded away from zero, matching how the scorer aggregates.
Alongside the delimited output the report writes a grouped bar chart per
profile so a run's component scores can be eyeballed at a glance.
"""

from __future__ import annotations

import csv
import io
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from .metrics import COMBOS, PROFILES


class ReportError(Exception):
    """A summary is inconsistent with its declared profile."""


_COLUMNS = {True: ("Geo", "Temp", "Event", "Total"), False: ("Geo", "Temp", "Total")}


def _row_values(summary: dict) -> dict[str, float | None]:
    means = summary.get("means", {})
    return {
        "Geo": means.get("geo"),
        "Temp": means.get("temporal"),
        "Event": means.get("event"),
        "Total": means.get("overall"),
    }


def _check_summary(summary: dict) -> str:
    profile = summary.get("profile")
    if profile not in PROFILES:
        raise ReportError(f"summary {summary.get('label')!r} has unknown profile {profile!r}")
    scores_events = PROFILES[profile].scores_events
    has_event = _row_values(summary)["Event"] is not None
    if scores_events and not has_event:
        raise ReportError(
            f"summary {summary.get('label')!r}: profile {profile!r} scores events "
            "but the event mean is absent"
        )
    if not scores_events and has_event:
        raise ReportError(
            f"summary {summary.get('label')!r}: profile {profile!r} does not score "
            "events but an event mean is present"
        )
    return profile


def _group_by_profile(summaries: list[dict]) -> dict[str, list[dict]]:
    grouped: dict[str, list[dict]] = {}
    for summary in summaries:
        grouped.setdefault(_check_summary(summary), []).append(summary)
    return grouped


def render_report_text(summaries: list[dict]) -> str:
    """One aligned table section per profile."""
    if not summaries:
        raise ReportError("nothing to report")
    lines: list[str] = []
    for profile, group in _group_by_profile(summaries).items():
        columns = _COLUMNS[PROFILES[profile].scores_events]
        label_width = max(len("Run"), *(len(str(s.get("label", ""))) for s in group))
        header = f"{'Run':<{label_width}}  " + "  ".join(f"{c:>7}" for c in columns)
        lines.append(f"[{profile}]")
        lines.append(header)
        lines.append("-" * len(header))
        for summary in group:
            values = _row_values(summary)
            cells = "  ".join(f"{values[c]:>7.1f}" for c in columns)
            lines.append(f"{str(summary.get('label', '')):<{label_width}}  {cells}")
        lines.append("")
    return "\n".join(lines)


def render_report_csv(summaries: list[dict]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer)
    writer.writerow(["profile", "label", "geo", "temp", "event", "total"])
    for profile, group in _group_by_profile(summaries).items():
        for summary in group:
            values = _row_values(summary)
            writer.writerow([
                profile,
                summary.get("label", ""),
                values["Geo"],
                values["Temp"],
                "" if values["Event"] is None else values["Event"],
                values["Total"],
            ])
    return buffer.getvalue()


def render_report_figure(summaries: list[dict], out_path: Path) -> None:
    """Grouped bars of component means, one panel per profile."""
    grouped = _group_by_profile(summaries)
    fig, axes = plt.subplots(
        1, len(grouped), figsize=(1.5 + 3.5 * len(grouped), 3.6), squeeze=False
    )
    for ax, (profile, group) in zip(axes[0], grouped.items()):
        columns = _COLUMNS[PROFILES[profile].scores_events]
        width = 0.8 / len(group)
        for i, summary in enumerate(group):
            values = _row_values(summary)
            positions = [j + i * width for j in range(len(columns))]
            ax.bar(
                positions,
                [values[c] for c in columns],
                width=width,
                label=str(summary.get("label", "")),
            )
        ax.set_xticks([j + 0.4 - width / 2 for j in range(len(columns))])
        ax.set_xticklabels(columns)
        ax.set_ylim(0, 100)
        ax.set_ylabel("score (%)")
        ax.set_title(profile)
        ax.legend(fontsize="small")
    fig.tight_layout()
    fig.savefig(out_path, dpi=150)
    plt.close(fig)


def write_report(
    summaries: list[dict], out_dir: str | Path, figures: bool = True
) -> list[Path]:
    """Write report.txt, report.csv and (optionally) report.png."""
    from .runner import atomic_write_text  # local import to avoid a cycle

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    text = render_report_text(summaries)
    atomic_write_text(out_dir / "report.txt", text)
    written.append(out_dir / "report.txt")
    atomic_write_text(out_dir / "report.csv", render_report_csv(summaries))
    written.append(out_dir / "report.csv")
    if figures:
        render_report_figure(summaries, out_dir / "report.png")
        written.append(out_dir / "report.png")
    return written


# ---------------------------------------------------------------------------
# Comparison tables
# ---------------------------------------------------------------------------

def render_compare_text(row: dict[str, float], label_a: str, label_b: str) -> str:
    header = "  ".join(f"{'+'.join(c):>8}" for c in COMBOS if "+".join(c) in row)
    values = "  ".join(f"{row['+'.join(c)]:>8.1f}" for c in COMBOS if "+".join(c) in row)
    return (
        f"Net error change (%) of {label_a} over {label_b}\n"
        f"(positive: {label_a} wins on more samples)\n\n{header}\n{values}\n"
    )


def render_compare_csv(row: dict[str, float], label_a: str, label_b: str) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer)
    writer.writerow(["run_a", "run_b"] + list(row))
    writer.writerow([label_a, label_b] + [f"{v:.1f}" for v in row.values()])
    return buffer.getvalue()


def render_compare_figure(row: dict[str, float], out_path: Path) -> None:
    fig, ax = plt.subplots(figsize=(1.0 + 0.9 * len(row), 3.2))
    positions = range(len(row))
    ax.bar(positions, list(row.values()))
    ax.axhline(0.0, color="black", linewidth=0.8)
    ax.set_xticks(list(positions))
    ax.set_xticklabels(list(row), rotation=30, ha="right")
    ax.set_ylabel("net error change (%)")
    fig.tight_layout()
    fig.savefig(out_path, dpi=150)
    plt.close(fig)


def write_compare(
    row: dict[str, float],
    out_dir: str | Path,
    label_a: str,
    label_b: str,
    figures: bool = True,
) -> list[Path]:
    from .runner import atomic_write_text

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    atomic_write_text(out_dir / "compare.txt", render_compare_text(row, label_a, label_b))
    written.append(out_dir / "compare.txt")
    atomic_write_text(out_dir / "compare.csv", render_compare_csv(row, label_a, label_b))
    written.append(out_dir / "compare.csv")
    if figures:
        render_compare_figure(row, out_dir / "compare.png")
        written.append(out_dir / "compare.png")
    return written
