"""Evaluation reports: versioned JSON, a delimited summary, and figures.

The JSON document is the machine-readable record; the CSV carries one row
per method for spreadsheet use; the figures render the same numbers as
PNGs (accuracy with subsample error bars, corrected/corrupted percentages,
per-augmentation agreement).
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .metrics import ChangeReport, SignificanceResult, SubsampleEval

REPORT_SCHEMA_VERSION = 1

CSV_FIELDS = (
    "method",
    "accuracy",
    "corrected_pct",
    "corrupted_pct",
    "net_pct",
    "subsample_mean",
    "subsample_std",
)


def change_report_dict(r: ChangeReport) -> dict:
    return {
        "corrected_pct": r.corrected_pct,
        "corrupted_pct": r.corrupted_pct,
        "net_pct": r.net_pct,
        "corrected_indices": list(r.corrected_indices),
        "corrupted_indices": list(r.corrupted_indices),
    }


def significance_dict(s: SignificanceResult) -> dict:
    return {
        "t_statistic": s.t_statistic,
        "p_value": s.p_value,
        "dof": s.dof,
        "mean_a": s.mean_a,
        "mean_b": s.mean_b,
        "std_diff": s.std_diff,
    }


def build_report(
    method: str,
    accuracies: dict,
    changes: ChangeReport,
    agreement_vector,
    subsamples: SubsampleEval,
    significance: SignificanceResult | None = None,
    extra: dict | None = None,
) -> dict:
    """Assemble the evaluation document for one method-vs-raw comparison."""
    doc = {
        "schema_version": REPORT_SCHEMA_VERSION,
        "method": method,
        "accuracy": dict(accuracies),
        "changes_vs_raw": change_report_dict(changes),
        "agreement": [float(x) for x in agreement_vector],
        "subsamples": {
            "k": subsamples.k,
            "frac": subsamples.frac,
            "seed": subsamples.seed,
            "accuracies": {k: list(v) for k, v in subsamples.accuracies.items()},
            "mean": {k: subsamples.mean(k) for k in subsamples.accuracies},
            "std": {k: subsamples.std(k) for k in subsamples.accuracies},
        },
        "significance_vs_raw": significance_dict(significance) if significance else None,
    }
    if extra:
        doc.update(extra)
    return doc


def write_report_json(path, doc: dict) -> None:
    Path(path).write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")


def write_report_csv(path, doc: dict) -> None:
    """One row per method; change columns apply to the evaluated method."""
    subs = doc["subsamples"]
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.DictWriter(f, fieldnames=CSV_FIELDS)
        writer.writeheader()
        for name, acc in doc["accuracy"].items():
            row = {
                "method": name,
                "accuracy": acc,
                "subsample_mean": subs["mean"].get(name, ""),
                "subsample_std": subs["std"].get(name, ""),
                "corrected_pct": "",
                "corrupted_pct": "",
                "net_pct": "",
            }
            if name == doc["method"]:
                ch = doc["changes_vs_raw"]
                row.update(
                    corrected_pct=ch["corrected_pct"],
                    corrupted_pct=ch["corrupted_pct"],
                    net_pct=ch["net_pct"],
                )
            writer.writerow(row)


def render_figures(doc: dict, out_dir) -> list:
    """Render the report's figures as PNGs; returns the written paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    subs = doc["subsamples"]
    methods = list(doc["accuracy"])
    fig, ax = plt.subplots(figsize=(5, 3.2))
    xs = np.arange(len(methods))
    accs = [doc["accuracy"][m] for m in methods]
    errs = [subs["std"].get(m, 0.0) for m in methods]
    ax.bar(xs, accs, yerr=errs, capsize=4, color="#4878a8")
    ax.set_xticks(xs, methods)
    ax.set_ylabel("accuracy")
    ax.set_title(f"Accuracy ({subs['k']} subsamples, frac {subs['frac']})")
    fig.tight_layout()
    p = out / "accuracy.png"
    fig.savefig(p, dpi=120)
    plt.close(fig)
    written.append(p)

    ch = doc["changes_vs_raw"]
    fig, ax = plt.subplots(figsize=(4.2, 3.2))
    ax.bar(
        ["corrected", "corrupted", "net"],
        [ch["corrected_pct"], ch["corrupted_pct"], ch["net_pct"]],
        color=["#e8882d", "#4878a8", "#58a066"],
    )
    ax.axhline(0.0, color="black", linewidth=0.8)
    ax.set_ylabel("% of test predictions")
    ax.set_title(f"Changes vs raw ({doc['method']})")
    fig.tight_layout()
    p = out / "changes.png"
    fig.savefig(p, dpi=120)
    plt.close(fig)
    written.append(p)

    agr = doc["agreement"]
    fig, ax = plt.subplots(figsize=(max(4.0, 0.16 * len(agr)), 3.2))
    ax.plot(range(len(agr)), agr, marker="o", markersize=3, linewidth=0.8)
    ax.set_xlabel("augmentation index")
    ax.set_ylabel("agreement with identity view")
    ax.set_ylim(0.0, 1.05)
    fig.tight_layout()
    p = out / "agreement.png"
    fig.savefig(p, dpi=120)
    plt.close(fig)
    written.append(p)

    return written
