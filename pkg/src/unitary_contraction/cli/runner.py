"""Run scenarios over seeds, persist artifacts, and replay prior runs."""
from __future__ import annotations

import csv
import io
import json
import logging
import os
import platform
import tempfile
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .. import __version__
from ..matrix_model import STREAMS
from .config import ConfigError, ExperimentConfig, load_config
from .scenarios import SCENARIOS, freeconv_mean_table, paper_tail_table
from .svg import traces_svg

log = logging.getLogger(__name__)

EXIT_OK, EXIT_ASSERTION, EXIT_CONFIG, EXIT_IO = 0, 1, 2, 3
OUTPUT_ROOT_ENV = "UNITARY_CONTRACTION_OUT"


@dataclass
class RunResult:
    config: ExperimentConfig
    results: list
    assertions: list
    elapsed: float

    @property
    def passed(self) -> bool:
        return all(a.passed for a in self.assertions if a.kind == "assert")


def _seed_task(args):
    config_dict, seed = args
    config = ExperimentConfig.from_dict(config_dict)
    worker, _ = SCENARIOS[config.scenario]
    return worker(config, seed)


def execute(config: ExperimentConfig, workers: int | None = None) -> RunResult:
    """Run every seed (in a bounded process pool when ``workers > 1``) and summarize."""
    workers = config.workers if workers is None else int(workers)
    _, summarize = SCENARIOS[config.scenario]
    tasks = [(config.to_dict(), seed) for seed in config.seeds]
    start = time.perf_counter()
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_seed_task, tasks))
    else:
        results = [_seed_task(t) for t in tasks]
    assertions = summarize(config, results)
    return RunResult(config, results, assertions, time.perf_counter() - start)


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue()


def lineage(config: ExperimentConfig) -> dict:
    return {
        "package_version": __version__,
        "scenario": config.scenario,
        "master_seeds": list(config.seeds),
        "stream_scheme": "numpy SeedSequence(entropy=seed, spawn_key=(STREAMS[name], *counters))",
        "streams": STREAMS,
        "numpy": np.__version__,
        "python": platform.python_version(),
    }


def write_artifacts(run: RunResult, out_dir) -> Path:
    out = Path(out_dir)
    (out / "seeds").mkdir(parents=True, exist_ok=True)
    cfg = run.config
    (out / "config.yaml").write_text(cfg.to_yaml())
    (out / "lineage.json").write_text(json.dumps(lineage(cfg), indent=2, sort_keys=True))

    merged: dict = {}
    for r in run.results:
        for name, (header, rows) in r.tables.items():
            (out / "seeds" / f"seed_{r.seed}_{name}.csv").write_text(_csv_text(header, rows))
            m = merged.setdefault(name, (["seed", *header], []))
            m[1].extend([r.seed, *row] for row in rows)
        if r.details:
            (out / "seeds" / f"seed_{r.seed}.json").write_text(json.dumps(r.details, indent=2, sort_keys=True))
        if r.traces:
            (out / "traces").mkdir(exist_ok=True)
            for tr in r.traces:
                stem = out / "traces" / f"seed_{r.seed}_{tr.label}"
                stem.with_suffix(".csv").write_text(tr.to_csv())
                stem.with_suffix(".json").write_text(tr.to_json())
    for name, (header, rows) in merged.items():
        (out / f"{name}.csv").write_text(_csv_text(header, rows))

    if cfg.scenario == "freeconv_validate":
        (out / "moments_mean.csv").write_text(_csv_text(*freeconv_mean_table(run.results)))
    if cfg.scenario == "lemma32_bounds":
        (out / "paper_tail.csv").write_text(_csv_text(*paper_tail_table(run.results)))
    traces = [tr for r in run.results for tr in r.traces]
    if traces:
        (out / "plot.svg").write_text(traces_svg(traces, f"{cfg.scenario}, N={cfg.N}"))

    summary = {
        "scenario": cfg.scenario,
        "passed": run.passed,
        "elapsed_seconds": round(run.elapsed, 3),
        "assertions": [a.to_dict() for a in run.assertions],
    }
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True))
    return out


def default_output_dir(config: ExperimentConfig) -> Path:
    if config.output_dir:
        return Path(config.output_dir)
    root = os.environ.get(OUTPUT_ROOT_ENV, "runs")
    return Path(root) / config.scenario


def report(run: RunResult) -> str:
    lines = []
    for a in run.assertions:
        status = "PASS" if a.passed else ("FAIL" if a.kind == "assert" else "NOTE")
        lines.append(
            f"[{status}] {a.name}: measured={a.measured:.6g} threshold={a.threshold:.6g} "
            f"margin={a.margin:.3g} ({a.invariant})"
        )
        if not a.passed and a.witness:
            lines.append(f"        witness: {json.dumps(a.witness, default=str)[:300]}")
    return "\n".join(lines)


def run(config: ExperimentConfig, out_dir=None, workers: int | None = None) -> int:
    out_dir = Path(out_dir) if out_dir else default_output_dir(config)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        probe = out_dir / ".write_test"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        log.error("output directory %s is not writable: %s", out_dir, exc)
        return EXIT_IO
    result = execute(config, workers)
    try:
        write_artifacts(result, out_dir)
    except OSError as exc:
        log.error("failed writing artifacts: %s", exc)
        return EXIT_IO
    print(report(result))
    print(f"artifacts: {out_dir}")
    return EXIT_OK if result.passed else EXIT_ASSERTION


def _csv_files(root: Path) -> dict:
    return {p.relative_to(root).as_posix(): p for p in sorted(root.rglob("*.csv"))}


def compare_csv_trees(old_root: Path, new_root: Path):
    """Return None if every CSV matches byte for byte, else a description of the first mismatch."""
    old, new = _csv_files(old_root), _csv_files(new_root)
    if set(old) != set(new):
        return f"CSV file sets differ: missing={sorted(set(old) - set(new))} extra={sorted(set(new) - set(old))}"
    for name in sorted(old):
        a, b = old[name].read_bytes(), new[name].read_bytes()
        if a != b:
            la, lb = a.decode().splitlines(), b.decode().splitlines()
            for i, (x, y) in enumerate(zip(la, lb)):
                if x != y:
                    return f"{name}: first differing row {i}:\n  recorded: {x}\n  replayed: {y}"
            return f"{name}: row counts differ ({len(la)} vs {len(lb)})"
    return None


def replay(artifact_dir, workers: int | None = None) -> int:
    artifact_dir = Path(artifact_dir)
    try:
        config = load_config(artifact_dir / "config.yaml")
    except ConfigError as exc:
        log.error("%s", exc)
        return EXIT_CONFIG
    if not (artifact_dir / "lineage.json").exists():
        log.error("%s has no lineage.json; not a run directory", artifact_dir)
        return EXIT_CONFIG
    result = execute(config, workers)
    with tempfile.TemporaryDirectory() as tmp:
        try:
            write_artifacts(result, tmp)
        except OSError as exc:
            log.error("failed writing replay artifacts: %s", exc)
            return EXIT_IO
        mismatch = compare_csv_trees(artifact_dir, Path(tmp))
    if mismatch:
        print(f"replay mismatch: {mismatch}")
        return EXIT_ASSERTION
    print(f"replay identical: {len(_csv_files(artifact_dir))} CSV files")
    return EXIT_OK
