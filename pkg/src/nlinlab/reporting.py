"""Result emission: delimited tables, structured records and figures.

Emission is deterministic: fixed column order, fixed float formatting,
no timestamps, and figure files are written without software metadata,
so re-running an identical configuration reproduces every output byte
for byte.
"""

import json
import math
from pathlib import Path
from typing import Optional, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from .errors import ReportError
from .scenario import ResultRow

_FLOAT_FMT = "{:.12e}"


def _fmt(value) -> str:
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        return _FLOAT_FMT.format(value)
    return str(value)


def _row_dict(row: ResultRow) -> dict:
    return {c: getattr(row, c) for c in ResultRow.COLUMNS}


def emit_report(
    rows: Sequence[ResultRow],
    destination,
    format: str = "csv",
    acf_records: Optional[Sequence[dict]] = None,
    figures: bool = True,
) -> list:
    """Write the result table, plot-ready per-figure data and figures.

    Returns the list of written paths.  ``format`` selects ``csv``
    (delimited table) or ``records`` (JSON lines).  Figure data files
    (power vs distance, CNR vs distance, ACF vs lag) are always
    delimited; the rendered PNG figures can be switched off.
    """
    if not rows:
        raise ReportError("no result rows to emit")
    dest = Path(destination)
    try:
        dest.mkdir(parents=True, exist_ok=True)
        written = []
        if format == "csv":
            written.append(_write_csv(dest / "results.csv", ResultRow.COLUMNS,
                                      [_row_dict(r) for r in rows]))
        elif format == "records":
            written.append(_write_records(dest / "results.jsonl", [_row_dict(r) for r in rows]))
        else:
            raise ReportError(f"unknown output format {format!r}")

        power_cols = ("scenario", "distance_km", "p_nli_w", "p_nli_db", "gn_w", "egn_w", "egn_adapted_w")
        cnr_cols = ("scenario", "distance_km", "cnr_pct", "n_opt")
        written.append(_write_csv(dest / "power_vs_distance.csv", power_cols,
                                  [_row_dict(r) for r in rows]))
        written.append(_write_csv(dest / "cnr_vs_distance.csv", cnr_cols,
                                  [_row_dict(r) for r in rows]))
        if acf_records:
            written.append(_write_csv(dest / "acf_vs_lag.csv", ("scenario", "span", "lag", "acf"),
                                      acf_records))
        if figures:
            written.extend(render_figures(rows, acf_records, dest))
        return written
    except OSError as exc:
        raise ReportError(f"failed to write report: {exc}") from exc


def _write_csv(path: Path, columns: Sequence[str], records: Sequence[dict]) -> Path:
    lines = [",".join(columns)]
    for rec in records:
        lines.append(",".join(_fmt(rec[c]) for c in columns))
    path.write_text("\n".join(lines) + "\n")
    return path


def _write_records(path: Path, records: Sequence[dict]) -> Path:
    lines = []
    for rec in records:
        clean = {k: (None if isinstance(v, float) and math.isnan(v) else v) for k, v in rec.items()}
        lines.append(json.dumps(clean, sort_keys=True))
    path.write_text("\n".join(lines) + "\n")
    return path


def _save(fig, path: Path) -> Path:
    fig.savefig(path, dpi=120, metadata={"Software": None})
    plt.close(fig)
    return path


def _by_scenario(rows: Sequence[ResultRow]) -> dict:
    out = {}
    for row in rows:
        out.setdefault(row.scenario, []).append(row)
    return out


def render_figures(rows, acf_records, dest: Path) -> list:
    """Render power, CNR and ACF figures next to the data files."""
    written = []
    groups = _by_scenario(rows)

    fig, ax = plt.subplots(figsize=(7, 4.5))
    for name, group in groups.items():
        pts = [(r.distance_km, r.p_nli_db) for r in group if not math.isnan(r.p_nli_db)]
        if pts:
            ax.plot(*zip(*pts), "o-", label=name)
        for attr, style in (("gn_w", "--"), ("egn_w", ":"), ("egn_adapted_w", "-.")):
            ref = [r for r in group if not math.isnan(getattr(r, attr)) and r.p_nli_w > 0]
            mpts = [
                (r.distance_km, 10.0 * math.log10(getattr(r, attr) / r.p_nli_w) + r.p_nli_db)
                for r in ref
            ]
            mall = [r for r in group if not math.isnan(getattr(r, attr))]
            if mall and not ref:
                continue
            if mpts:
                ax.plot(*zip(*mpts), style, alpha=0.7, label=f"{name} [{attr[:-2]}]")
    ax.set_xlabel("distance [km]")
    ax.set_ylabel("noise power rel. channel [dB]")
    ax.grid(True, alpha=0.3)
    ax.legend(fontsize=7)
    written.append(_save(fig, dest / "power_vs_distance.png"))

    fig, ax = plt.subplots(figsize=(7, 4.5))
    for name, group in groups.items():
        pts = [(r.distance_km, r.cnr_pct) for r in group if not math.isnan(r.cnr_pct)]
        if pts:
            ax.plot(*zip(*pts), "s-", label=name)
    ax.set_xlabel("distance [km]")
    ax.set_ylabel("circular noise ratio [%]")
    ax.set_ylim(0, 100)
    ax.grid(True, alpha=0.3)
    ax.legend(fontsize=7)
    written.append(_save(fig, dest / "cnr_vs_distance.png"))

    if acf_records:
        fig, ax = plt.subplots(figsize=(7, 4.5))
        series = {}
        for rec in acf_records:
            series.setdefault((rec["scenario"], rec["span"]), []).append((rec["lag"], rec["acf"]))
        spans = sorted({s for _, s in series})
        show = {spans[0], spans[-1]}
        for (name, span), pts in series.items():
            if span in show:
                ax.plot(*zip(*sorted(pts)), label=f"{name} span {span}")
        ax.set_xlabel("lag [symbols]")
        ax.set_ylabel("phase-noise ACF")
        ax.grid(True, alpha=0.3)
        ax.legend(fontsize=7)
        written.append(_save(fig, dest / "acf_vs_lag.png"))
    return written


def emit_collision_report(table: dict, curves: dict, destination, figures: bool = True) -> list:
    """Write a collision-coefficient table and accumulation curves.

    ``table`` maps (h, k, m) to complex coefficients; ``curves`` maps
    (h, k, m) to (z array, running integral array).
    """
    from .collisions import CollisionIndex, classify

    if not table:
        raise ReportError("empty collision table")
    dest = Path(destination)
    dest.mkdir(parents=True, exist_ok=True)
    written = []
    records = []
    for (h, k, m), value in sorted(table.items()):
        kind = classify(CollisionIndex(h, k, m, 0.0))
        records.append(
            {"h": h, "k": k, "m": m, "type": kind.value,
             "re": value.real, "im": value.imag, "abs": abs(value)}
        )
    written.append(_write_csv(dest / "collision_coefficients.csv",
                              ("h", "k", "m", "type", "re", "im", "abs"), records))
    curve_rows = []
    for (h, k, m), (z, acc) in sorted(curves.items()):
        for zi, ai in zip(z, acc):
            curve_rows.append({"h": h, "k": k, "m": m, "z_km": zi / 1e3,
                               "re": ai.real, "im": ai.imag, "abs": abs(ai)})
    if curve_rows:
        written.append(_write_csv(dest / "collision_accumulation.csv",
                                  ("h", "k", "m", "z_km", "re", "im", "abs"), curve_rows))
    if figures and curves:
        fig, ax = plt.subplots(figsize=(7, 4.5))
        for (h, k, m), (z, acc) in sorted(curves.items()):
            kind = classify(CollisionIndex(h, k, m, 0.0)).value
            ax.plot(z / 1e3, abs(acc) / max(abs(acc[-1]), 1e-300),
                    label=f"({h},{k},{m}) {kind}")
        ax.set_xlabel("z [km]")
        ax.set_ylabel("|accumulated| / |final|")
        ax.grid(True, alpha=0.3)
        ax.legend(fontsize=7)
        written.append(_save(fig, dest / "collision_accumulation.png"))
    return written
