"""Experiment runner: sweep scenario grids, run replicated audits, summarize
mean sample sizes and full-count fractions, and emit table / plot data.

One instance is generated per grid point and reused across replications;
only the sampling permutation varies between replications.  Replication r
of grid point g is seeded from (master_seed, g, r), so results do not
depend on how replications are distributed over workers.  Full counts
contribute n = N to the mean; the full-count fraction is reported
separately.
"""

from __future__ import annotations

import csv
import gzip
import io
import json
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from .errormodels import GeneratedScenario, ScenarioSpec, generate
from .riskengine import (
    AuditConfig,
    Cobra,
    EstimatorConfig,
    comparison_audit_specs,
    mismatch_audit_spec,
    run_audit,
)
from .socialchoice import tabulate_plurality

METHODS = ("mismatch", "comparison")


class ExperimentError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    grid: tuple[ScenarioSpec, ...]
    methods: tuple[str, ...] = ("mismatch",)
    replications: int = 1000
    alpha: float = 0.05
    master_seed: int = 0
    mismatch_estimator: Optional[EstimatorConfig] = None  # default: shrink-trunc per scenario
    comparison_estimator: EstimatorConfig = field(default_factory=lambda: Cobra(adapt=True))
    jobs: int = 1

    def __post_init__(self):
        if self.replications < 1:
            raise ExperimentError("replications must be >= 1")
        for m in self.methods:
            if m not in METHODS:
                raise ExperimentError(f"unknown method {m!r}")

    @classmethod
    def from_json(cls, obj: dict) -> "ExperimentConfig":
        grid = tuple(
            ScenarioSpec(
                kind=g.get("kind", "plurality"),
                N=int(g["N"]),
                v_target=float(g["v"]),
                m_target=float(g.get("m", 0.0)),
                model=g.get("model", "random_100_0"),
                seed=int(g.get("seed", 0)),
            )
            for g in obj["grid"]
        )
        return cls(
            grid=grid,
            methods=tuple(obj.get("methods", ["mismatch"])),
            replications=int(obj.get("replications", 1000)),
            alpha=float(obj.get("alpha", 0.05)),
            master_seed=int(obj.get("master_seed", 0)),
            jobs=int(obj.get("jobs", 1)),
        )


@dataclass
class CellResult:
    """Summary of one (grid point, method) cell."""

    spec: ScenarioSpec
    method: str
    mean_n: float
    full_count_fraction: float
    n_draws: list[int]
    decisions: list[str] = field(default_factory=list)
    skipped: Optional[str] = None


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    cells: list[CellResult]

    def cell(self, spec: ScenarioSpec, method: str) -> CellResult:
        for c in self.cells:
            if c.spec == spec and c.method == method:
                return c
        raise KeyError((spec, method))


def replication_seed(master_seed: int, point_id: str, r: int) -> int:
    """Deterministic per-replication seed from (master seed, grid point, r)."""
    ss = np.random.SeedSequence([master_seed, zlib.crc32(point_id.encode()), r])
    return int(ss.generate_state(1, np.uint64)[0])


def _run_point(args) -> list[CellResult]:
    config, spec = args
    try:
        scenario = generate(spec)
    except Exception as e:  # infeasible grid point: mark skipped, keep the sweep going
        return [
            CellResult(spec=spec, method=m, mean_n=float("nan"), full_count_fraction=float("nan"),
                       n_draws=[], skipped=str(e))
            for m in config.methods
        ]
    cells = []
    for method in config.methods:
        if method == "mismatch":
            specs = [mismatch_audit_spec(scenario.instance, scenario.margin, config.mismatch_estimator)]
        else:
            contest = scenario.instance.contest
            tallies, outcome = tabulate_plurality(scenario.instance.cvr_votes(), contest)
            winner = max(outcome.winners, key=lambda c: tallies[c])
            losers = [c for c in contest.candidates if c != winner]
            specs = comparison_audit_specs(scenario.instance, winner, losers, config.comparison_estimator)
        draws = []
        decisions = []
        for r in range(config.replications):
            seed = replication_seed(config.master_seed, spec.point_id(), r)
            result = run_audit(
                scenario.instance.n,
                specs,
                AuditConfig(alpha=config.alpha, seed=seed),
                record_trajectory=False,
            )
            draws.append(result.n_draws)
            decisions.append(result.decision)
        cells.append(
            CellResult(
                spec=spec,
                method=method,
                mean_n=float(np.mean(draws)),
                full_count_fraction=decisions.count("full_count") / config.replications,
                n_draws=draws,
                decisions=decisions,
            )
        )
    return cells


def run_experiment(config: ExperimentConfig, out_dir: Optional[Union[str, Path]] = None) -> ExperimentResult:
    """Run every (grid point, method) cell; optionally persist raw and summary output.

    Output layout under ``out_dir``: ``summary.csv``, ``table2.txt`` (for
    mismatch sweeps), ``diffplot.csv`` (when both methods ran), and
    ``raw/<point>.<method>.ndjson.gz`` with one line per replication.
    """
    tasks = [(config, spec) for spec in config.grid]
    if config.jobs > 1:
        with ProcessPoolExecutor(max_workers=config.jobs) as pool:
            per_point = list(pool.map(_run_point, tasks))
    else:
        per_point = [_run_point(t) for t in tasks]
    result = ExperimentResult(config=config, cells=[c for cells in per_point for c in cells])

    if out_dir is not None:
        out = Path(out_dir)
        (out / "raw").mkdir(parents=True, exist_ok=True)
        for cell in result.cells:
            raw_path = out / "raw" / f"{cell.spec.point_id()}.{cell.method}.ndjson.gz"
            with gzip.open(raw_path, "wt") as f:
                for r, (n, d) in enumerate(zip(cell.n_draws, cell.decisions)):
                    f.write(json.dumps({
                        "r": r,
                        "seed": replication_seed(config.master_seed, cell.spec.point_id(), r),
                        "n_draws": n,
                        "decision": d,
                    }) + "\n")
        (out / "summary.csv").write_text(summary_csv(result))
        if "mismatch" in config.methods:
            (out / "table2.txt").write_text(emit_table2(result))
        if set(config.methods) >= {"mismatch", "comparison"}:
            (out / "diffplot.csv").write_text(emit_comparison_plotdata(result))
    return result


def summary_csv(result: ExperimentResult) -> str:
    buf = io.StringIO()
    w = csv.writer(buf)
    w.writerow(["kind", "N", "v", "m", "model", "method", "mean_n", "full_count_fraction", "skipped"])
    for c in result.cells:
        w.writerow([
            c.spec.kind, c.spec.N, c.spec.v_target, c.spec.m_target, c.spec.model,
            c.method, f"{c.mean_n:.1f}", f"{c.full_count_fraction:.3f}", c.skipped or "",
        ])
    return buf.getvalue()


def emit_table2(result: ExperimentResult, method: str = "mismatch") -> str:
    """Aligned text table: rows (v, N), columns m; 'F' when every run was a full count."""
    cells = [c for c in result.cells if c.method == method]
    if not cells:
        raise ExperimentError(f"no {method!r} cells in the result")
    vs = sorted({c.spec.v_target for c in cells})
    ns = sorted({c.spec.N for c in cells})
    ms = sorted({c.spec.m_target for c in cells})
    lines = []
    header = ["v", "N"] + [f"m={m:g}" for m in ms]
    rows = [header]
    for v in vs:
        for n in ns:
            row = [f"{v:g}", str(n)]
            found = False
            for m in ms:
                entry = "-"
                for c in cells:
                    if (c.spec.v_target, c.spec.N, c.spec.m_target) == (v, n, m):
                        if c.skipped:
                            entry = "skip"
                        elif c.full_count_fraction == 1.0:
                            entry = "F"
                        else:
                            entry = f"{c.mean_n:,.0f}"
                        found = True
                row.append(entry)
            if found:
                rows.append(row)
    widths = [max(len(r[i]) for r in rows) for i in range(len(header))]
    for r in rows:
        lines.append("  ".join(s.rjust(w) for s, w in zip(r, widths)))
    return "\n".join(lines) + "\n"


def emit_comparison_plotdata(result: ExperimentResult) -> str:
    """CSV of (mismatch mean - comparison mean)/N per grid point."""
    buf = io.StringIO()
    w = csv.writer(buf)
    w.writerow(["v", "N", "m", "model", "diff_over_N"])
    specs = {c.spec for c in result.cells}
    for spec in sorted(specs, key=lambda s: (s.v_target, s.N, s.m_target, s.model)):
        try:
            mm = result.cell(spec, "mismatch")
            cc = result.cell(spec, "comparison")
        except KeyError:
            raise ExperimentError(f"grid point {spec.point_id()} missing a method")
        diff = (mm.mean_n - cc.mean_n) / spec.N
        w.writerow([spec.v_target, spec.N, spec.m_target, spec.model, f"{diff:.6f}"])
    return buf.getvalue()
