"""
Reporting module for horocat
Assembles run reports and writes them as JSON, with the sampled series
they carry exported as CSV, JSON point lists and PNG plots.
"""
import hashlib
import json
import logging
import os
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import pandas as pd

from ..core.errors import NothingToPlot

LOGGER = logging.getLogger(__name__)

SCHEMA_VERSION = 1


def canonical_json(data):
    return json.dumps(data, sort_keys=True, indent=2, default=str)


def config_hash(config: dict):
    return hashlib.sha256(json.dumps(config, sort_keys=True, default=str).encode("utf-8")).hexdigest()[:16]


@dataclass
class Series:
    """Columns of equal length plus a hint for how to draw them"""
    columns: Dict[str, list]
    kind: str = "line"

    def frame(self):
        return pd.DataFrame(self.columns)


@dataclass
class RunReport:
    command: str
    config: dict
    seed: Optional[int] = None
    checks: List[dict] = field(default_factory=list)
    results: dict = field(default_factory=dict)
    series: Dict[str, Series] = field(default_factory=dict)
    timings: Optional[Dict[str, float]] = None
    error: Optional[dict] = None

    def add_check(self, name, passed, residual=None, **details):
        entry = {"name": name, "passed": bool(passed)}
        if residual is not None:
            entry["residual"] = float(residual)
        entry.update(details)
        self.checks.append(entry)
        if not passed:
            LOGGER.warning("check %s failed", name)

    def add_series(self, name, kind="line", **columns):
        self.series[name] = Series({k: list(v) for k, v in columns.items()}, kind)

    @property
    def passed(self):
        return self.error is None and all(c["passed"] for c in self.checks)

    def to_json(self):
        data = {
            "schema_version": SCHEMA_VERSION,
            "command": self.command,
            "config": self.config,
            "config_hash": config_hash(self.config),
            "seed": self.seed,
            "passed": self.passed,
            "checks": self.checks,
            "results": self.results,
        }
        if self.series:
            data["series"] = {name: {"kind": s.kind, "columns": s.columns} for name, s in self.series.items()}
        if self.timings is not None:
            data["timings"] = self.timings
        if self.error is not None:
            data["error"] = self.error
        return data

    def dumps(self):
        return canonical_json(self.to_json())


class ReportGenerator:
    """
    Writes a RunReport to disk: the JSON report itself and, when the
    report carries sampled series, CSV and PNG plot data next to it
    """
    def __init__(self, report: RunReport, reports_dir="reports"):
        self.report = report
        self.reports_dir = reports_dir

    def create_base_filename(self):
        """Deterministic name from the command and config hash"""
        return os.path.join(self.reports_dir,
                            f"horocat_{self.report.command}_{config_hash(self.report.config)}")

    def save_report(self, path=None):
        path = path or f"{self.create_base_filename()}.json"
        directory = os.path.dirname(path)
        if directory:
            os.makedirs(directory, exist_ok=True)
        with open(path, "w") as f:
            f.write(self.report.dumps())
        LOGGER.info("report written to %s", path)
        return path

    def save_reports(self):
        """Save the JSON report and any plot data"""
        os.makedirs(self.reports_dir, exist_ok=True)
        files = {"json": self.save_report()}
        if self.report.series:
            files.update(emit_plot_data(self.report, self.reports_dir))
        return files

    def generate_plots(self):
        """One panel per series"""
        series = self.report.series
        fig, axes = plt.subplots(1, len(series), figsize=(5 * len(series), 4), dpi=100, squeeze=False)
        for ax, (name, s) in zip(axes[0], sorted(series.items())):
            df = s.frame()
            columns = list(df.columns)
            if s.kind == "hist":
                ax.hist(df[columns[0]], bins=20, color="skyblue", edgecolor="black")
                ax.set_xlabel(columns[0])
                ax.set_ylabel("Frequency")
            elif s.kind == "scatter":
                ax.scatter(df[columns[0]], df[columns[1]], s=4)
                ax.set_aspect("equal")
                ax.set_xlabel(columns[0])
                ax.set_ylabel(columns[1])
            else:
                ax.plot(df[columns[0]], df[columns[1]], marker="o", markersize=3)
                ax.set_xlabel(columns[0])
                ax.set_ylabel(columns[1])
            ax.set_title(name)
        plt.tight_layout()
        return fig

    def save_plots(self, filename_base):
        fig = self.generate_plots()
        fig.savefig(f"{filename_base}.png", dpi=150, bbox_inches="tight")
        plt.close(fig)


def emit_plot_data(report: RunReport, reports_dir, render=True):
    """Flat CSV per series and a JSON point list; PNG rendering is optional"""
    if not report.series or not any(len(next(iter(s.columns.values()), [])) for s in report.series.values()):
        raise NothingToPlot("report carries no sampled series")
    os.makedirs(reports_dir, exist_ok=True)
    generator = ReportGenerator(report, reports_dir)
    base = generator.create_base_filename()
    files = {}
    for name, s in sorted(report.series.items()):
        path = f"{base}_{name}.csv"
        s.frame().to_csv(path, index=False)
        files[f"csv:{name}"] = path
    points = f"{base}_series.json"
    with open(points, "w") as f:
        f.write(canonical_json({name: s.frame().to_dict(orient="records") for name, s in report.series.items()}))
    files["series"] = points
    if render:
        generator.save_plots(base)
        files["png"] = f"{base}.png"
    return files
