"""Report assembly and rendering.

One invocation produces one self-describing report document.  The
structured rendering is JSON (schema in ``schemas/report.schema.json``);
the text rendering carries the same data for humans.  When a report
directory is requested, the report path also drops a delimited (CSV)
table of the alias facts or sampled frequencies next to a rendered
figure, which is the quickest way to eyeball whether the analysed
probabilities line up with observed behaviour.

Timing is off by default so that repeated invocations stay
byte-identical; pass ``timing`` explicitly to include wall-clock stages.
"""

from __future__ import annotations

import csv
import json
import os
from typing import Optional

from .analysis import AnalysisResult
from .domain import AliasType, AnalysisConfig, format_alias_type
from .pcc import program_digest
from .syntax import Program

REPORT_VERSION = 1


def build_report(path: str, program: Program, cfg: AnalysisConfig,
                 diagnostics: list, result: Optional[AnalysisResult],
                 timing: Optional[dict] = None) -> dict:
    doc = {
        "version": REPORT_VERSION,
        "command": "analyze",
        "file": path,
        "digest": program_digest(program),
        "config": cfg.to_dict(),
        "diagnostics": [d.to_dict() for d in diagnostics],
        "per_point": {},
        "final": {},
        "timing": timing,
    }
    if result is not None:
        doc["per_point"] = {span: format_alias_type(alias)
                            for span, alias in sorted(result.per_point.items(),
                                                      key=_span_sort_key)}
        doc["final"] = format_alias_type(result.final)
        doc["diagnostics"].extend(d.to_dict() for d in result.warnings)
    return doc


def _span_sort_key(item):
    text = item[0]
    line, _, col = text.partition(":")
    return (int(line), int(col))


def _alias_lines(alias_doc: dict, indent: str = "  ") -> list[str]:
    lines = []
    for key, pairs in alias_doc.items():
        rendered = ", ".join(f"({p['to']}, {p['p']})" for p in pairs)
        lines.append(f"{indent}{key} -> {{{rendered}}}")
    return lines or [f"{indent}(empty)"]


def render_text(report: dict) -> str:
    lines = [
        f"file:    {report['file']}",
        f"digest:  {report['digest']}",
        "config:  " + ", ".join(f"{k}={v}" for k, v in report["config"].items()),
    ]
    if report.get("timing"):
        lines.append("timing:  " + ", ".join(
            f"{k}={v}" for k, v in report["timing"].items()))
    diags = report.get("diagnostics", [])
    lines.append(f"diagnostics: {len(diags)}")
    for d in diags:
        lines.append(f"  {d['line']}:{d['col']}: {d['severity']}: {d['code']}: {d['message']}")
    if report.get("per_point"):
        lines.append("per-point alias tables (pre-state):")
        for span, alias_doc in report["per_point"].items():
            lines.append(f" at {span}:")
            lines.extend(_alias_lines(alias_doc, indent="   "))
    lines.append("final alias type:")
    lines.extend(_alias_lines(report.get("final", {})))
    return "\n".join(lines) + "\n"


def render_structured(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True) + "\n"


# ---------------------------------------------------------------------------
# Sample reports
# ---------------------------------------------------------------------------


def build_sample_report(path: str, program: Program, cfg: AnalysisConfig,
                        final: AliasType, dist, violations: list,
                        expectation: Optional[dict]) -> dict:
    return {
        "version": REPORT_VERSION,
        "command": "sample",
        "file": path,
        "digest": program_digest(program),
        "config": cfg.to_dict(),
        "sample": dist.to_dict(),
        "final": format_alias_type(final),
        "conformance": {
            "conforms": not violations,
            "violations": [
                {"seed": seed, "key": key, "value": value}
                for seed, key, value in violations[:50]
            ],
            "violation_count": len(violations),
        },
        "expectation": expectation,
    }


def render_sample_text(report: dict) -> str:
    sample = report["sample"]
    lines = [
        f"file:    {report['file']}",
        f"runs:    {sample['runs']} ({sample['ok_runs']} ok)",
    ]
    if sample["errors"]:
        lines.append("errors:  " + ", ".join(
            f"{code}x{n}" for code, n in sample["errors"].items()))
    lines.append("frequencies:")
    for key, targets in sample["frequencies"].items():
        for target, freq in targets.items():
            lines.append(f"  {key} -> {target}: {freq:.4f}")
    conf = report["conformance"]
    if conf["conforms"]:
        lines.append("conformance: ok")
    else:
        lines.append(f"conformance: {conf['violation_count']} violation(s)")
        for v in conf["violations"]:
            lines.append(f"  seed {v['seed']}: {v['key']} held {v['value']} without witness")
    if report.get("expectation"):
        exp = report["expectation"]
        status = "ok" if exp["ok"] else "FAILED"
        lines.append(f"expectation (tol {exp['tolerance']}): {status}")
        for row in exp["checks"]:
            lines.append(
                f"  {row['key']} -> {row['target']}: analyzed {row['analyzed']}, "
                f"empirical {row['empirical']:.4f}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Delimited output and figures
# ---------------------------------------------------------------------------


def write_report_dir(report: dict, out_dir: str) -> list[str]:
    """Drop the delimited table and the matching figure for a report into
    `out_dir`; returns the paths written."""
    os.makedirs(out_dir, exist_ok=True)
    written = []
    if report["command"] == "analyze":
        csv_path = os.path.join(out_dir, "alias_facts.csv")
        _write_alias_csv(report, csv_path)
        written.append(csv_path)
        fig_path = os.path.join(out_dir, "alias_probabilities.png")
        _plot_final(report, fig_path)
        written.append(fig_path)
    else:
        csv_path = os.path.join(out_dir, "frequencies.csv")
        _write_frequency_csv(report, csv_path)
        written.append(csv_path)
        fig_path = os.path.join(out_dir, "frequencies.png")
        _plot_frequencies(report, fig_path)
        written.append(fig_path)
    return written


def _write_alias_csv(report: dict, path: str) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["point", "key", "target", "probability"])
        for span, alias_doc in report.get("per_point", {}).items():
            for key, pairs in alias_doc.items():
                for pair in pairs:
                    writer.writerow([span, key, pair["to"], pair["p"]])
        for key, pairs in report.get("final", {}).items():
            for pair in pairs:
                writer.writerow(["final", key, pair["to"], pair["p"]])


def _write_frequency_csv(report: dict, path: str) -> None:
    analyzed = _analyzed_lookup(report)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["key", "target", "frequency", "analyzed"])
        for key, targets in report["sample"]["frequencies"].items():
            for target, freq in targets.items():
                writer.writerow([key, target, freq, analyzed.get((key, target), "")])


def _analyzed_lookup(report: dict) -> dict:
    out = {}
    for key, pairs in report.get("final", {}).items():
        for pair in pairs:
            out[(key, pair["to"])] = pair["p"]
    return out


def _figure():
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    return plt


def _plot_final(report: dict, path: str) -> None:
    plt = _figure()
    labels, probs = [], []
    for key, pairs in report.get("final", {}).items():
        for pair in pairs:
            labels.append(f"{key}→{pair['to']}")
            probs.append(float(pair["p"]))
    fig, ax = plt.subplots(figsize=(max(4, 0.6 * len(labels) + 2), 3.5))
    if labels:
        ax.bar(range(len(labels)), probs, color="#4878a8")
        ax.set_xticks(range(len(labels)))
        ax.set_xticklabels(labels, rotation=45, ha="right", fontsize=7)
    ax.set_ylabel("probability")
    ax.set_ylim(0, 1.05)
    ax.set_title("final alias probabilities")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def _plot_frequencies(report: dict, path: str) -> None:
    plt = _figure()
    analyzed = _analyzed_lookup(report)
    labels, freqs, probs = [], [], []
    for key, targets in report["sample"]["frequencies"].items():
        for target, freq in targets.items():
            labels.append(f"{key}→{target}")
            freqs.append(freq)
            p = analyzed.get((key, target))
            probs.append(float(p) if p is not None else float("nan"))
    fig, ax = plt.subplots(figsize=(max(4, 0.8 * len(labels) + 2), 3.5))
    if labels:
        xs = range(len(labels))
        ax.bar([x - 0.2 for x in xs], freqs, width=0.4, label="empirical", color="#4878a8")
        ax.bar([x + 0.2 for x in xs], probs, width=0.4, label="analyzed", color="#d1885c")
        ax.set_xticks(list(xs))
        ax.set_xticklabels(labels, rotation=45, ha="right", fontsize=7)
        ax.legend(fontsize=8)
    ax.set_ylabel("frequency / probability")
    ax.set_ylim(0, 1.05)
    ax.set_title("observed frequencies vs analyzed probabilities")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
