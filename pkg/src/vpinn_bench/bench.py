"""
Experiment runner: trains every seed of a configuration and writes artifacts.

For an output directory ``out`` a run writes

- ``out/loss_seed<s>.csv``   iteration, loss
- ``out/error_seed<s>.csv``  x[, y], u_exact, u_nn, abs_error (row-major grid)
- ``out/error_mean.csv``     x[, y], u_exact, mean_abs_error over usable seeds
- ``out/summary.cfg``        the configuration echo plus [result] and [seed.<s>]

A sweep runs one experiment per cell of the axis product in
``out/<axis>=<value>,...`` and tabulates the cells in ``out/sweep.csv``.
"""

import itertools
import logging
import os
from dataclasses import replace
from pathlib import Path
from typing import Dict, NamedTuple

import numpy as np
import pandas as pd

from vpinn_bench.config import (
    ExperimentConfig,
    dump_config,
    load_config,
    override,
    parse_value,
    resolve_axis,
)
from vpinn_bench.training import multi_seed_error

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.17g"


class RunArtifacts(NamedTuple):
    output_dir: Path
    loss_files: Dict[int, Path]
    error_files: Dict[int, Path]
    mean_error_file: Path
    summary_file: Path
    summary: dict


def _grid_columns(points):
    if points.ndim == 1:
        return {"x": points}
    return {"x": points[:, 0], "y": points[:, 1]}


def _write_csv(frame, path):
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT)
    logger.info("wrote %s", path)


def _best(records):
    usable = [r for r in records if r.metrics is not None]
    return min(usable, key=lambda r: (r.metrics.linf, r.seed))


def _summary_text(config, result, seeds):
    out = [dump_config(config), "[result]"]
    out.extend(f"{k} = {v!r}" for k, v in result.items())
    for seed, values in seeds.items():
        out.append("")
        out.append(f"[seed.{seed}]")
        out.extend(f"{k} = {v!r}" for k, v in values.items())
    return "\n".join(out) + "\n"


def run_experiment(config, seeds=None, output_dir=None, workers=1, max_iters=None):
    """Run every seed of an experiment and write its artifacts.

    Args:
      config: ExperimentConfig or a path to a configuration file.
      seeds, output_dir, max_iters: Override the corresponding [run] values.
      workers: Process pool size for the seeds (None: one per CPU).
    Returns:
      RunArtifacts.
    Raises:
      ExperimentConfigError: invalid configuration.
      AllSeedsDivergedError: no seed trained successfully.
      OSError: artifacts could not be written.
    """
    if not isinstance(config, ExperimentConfig):
        config = load_config(config)
    changes = {}
    if seeds is not None:
        changes["run.seeds"] = tuple(int(s) for s in seeds)
    if max_iters is not None:
        changes["run.max_iters"] = int(max_iters)
    if output_dir is not None:
        changes["run.output_dir"] = str(output_dir)
    if changes:
        config = replace(override(config, changes), source=config.source)

    problem = config.problem.build()
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    logger.info("running %s with seeds %s into %s", config.source, list(config.seeds), out)

    average = multi_seed_error(
        problem,
        config.network,
        config.loss,
        config.init,
        config.seeds,
        config.max_iters,
        workers=workers,
        learning_rate=config.learning_rate,
        record_every=config.record_every,
    )

    loss_files, error_files, per_seed = {}, {}, {}
    for record in average.records:
        path = out / f"loss_seed{record.seed}.csv"
        _write_csv(pd.DataFrame(record.history, columns=["iteration", "loss"]), path)
        loss_files[record.seed] = path
        values = {
            "iterations": record.iterations,
            "final_loss": float(record.final_loss),
            "diverged": record.diverged,
            "reason": record.reason,
            "wall_time": record.wall_time,
        }
        if record.metrics is not None:
            m = record.metrics
            path = out / f"error_seed{record.seed}.csv"
            frame = pd.DataFrame(
                {**_grid_columns(m.points), "u_exact": m.exact, "u_nn": m.predicted, "abs_error": m.pointwise}
            )
            _write_csv(frame, path)
            error_files[record.seed] = path
            values.update(linf=m.linf, l2=m.l2, boundary_error=m.boundary_error)
            logger.info("seed %d: L-inf %.3e, L2 %.3e", record.seed, m.linf, m.l2)
        per_seed[record.seed] = values

    best = _best(average.records)
    mean_file = out / "error_mean.csv"
    exact = best.metrics.exact
    _write_csv(
        pd.DataFrame(
            {**_grid_columns(average.points), "u_exact": exact, "mean_abs_error": average.mean_pointwise}
        ),
        mean_file,
    )

    usable = [r for r in average.records if r.metrics is not None]
    summary = {
        "best_seed": best.seed,
        "linf": best.metrics.linf,
        "l2": best.metrics.l2,
        "boundary_error": best.metrics.boundary_error,
        "final_loss": float(best.final_loss),
        "mean_linf": float(np.max(average.mean_pointwise)),
        "mean_seed_l2": float(np.mean([r.metrics.l2 for r in usable])),
        "diverged_seeds": sum(r.diverged for r in average.records),
        "wall_time": float(sum(r.wall_time for r in average.records)),
    }
    summary_file = out / "summary.cfg"
    summary_file.write_text(_summary_text(config, summary, per_seed), encoding="utf-8")
    logger.info("wrote %s", summary_file)
    return RunArtifacts(out, loss_files, error_files, mean_file, summary_file, summary)


def _cell_name(cell):
    if not cell:
        return "base"
    return ",".join(f"{name}={value}" for name, value in cell.items())


def run_sweep(config, axes=None, seeds=None, output_dir=None, workers=1, max_iters=None):
    """Run the experiment for every combination of axis values.

    Args:
      config: ExperimentConfig or a path to a configuration file.
      axes: Mapping of axis name (dotted field or alias N, K, tau, L) to the
        values to sweep. When empty the configuration's [sweep] section is
        used; with neither the configuration runs once.
    Returns:
      (path of sweep.csv, the table as a DataFrame)
    """
    if not isinstance(config, ExperimentConfig):
        config = load_config(config)
    axes = dict(axes or config.sweep)
    dotted = {resolve_axis(name): list(values) for name, values in axes.items()}
    out = Path(output_dir or config.output_dir)
    out.mkdir(parents=True, exist_ok=True)

    rows = []
    for combo in itertools.product(*dotted.values()):
        cell = dict(zip(dotted, combo))
        cell_config = replace(override(config, cell) if cell else config, source=config.source, sweep=())
        label = dict(zip(axes, combo))
        artifacts = run_experiment(
            cell_config,
            seeds=seeds,
            output_dir=out / _cell_name(label),
            workers=workers,
            max_iters=max_iters,
        )
        rows.append({**label, **artifacts.summary})

    table = pd.DataFrame(rows)
    path = out / "sweep.csv"
    _write_csv(table, path)
    return path, table


def parse_axis(text):
    """Parse ``name=v1,v2,...`` into (name, [values])."""
    name, sep, values = text.partition("=")
    if not sep or not name.strip() or not values.strip():
        raise ValueError(f"axis must look like name=v1,v2,..., got {text!r}")
    parsed = []
    for raw in values.split(","):
        raw = raw.strip()
        if raw.startswith("(") or raw.endswith(")"):
            raise ValueError(f"pair values are not supported on the command line: {text!r}")
        parsed.append(parse_value(raw))
    return name.strip(), parsed


def default_workers():
    return os.cpu_count() or 1

