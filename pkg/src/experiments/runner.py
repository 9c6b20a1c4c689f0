#!/usr/bin/env python3
"""
Experiment runner for HybridCI
Prepares data, dispatches the configured task and writes run.json,
history.csv and predictions.csv into the run's output directory.
"""

import logging
import os
import time
from dataclasses import asdict, dataclass, replace
from typing import Optional

import numpy as np

from src.config.experiment import ExperimentConfig, config_to_dict
from src.core.datasets import (Dataset, MinMaxScaling, embed_series, fingerprint_arrays, gen_mackey_glass,
                               load_csv, normalize_minmax, split, write_csv)
from src.core.errors import TrainingDivergedError
from src.core.numeric import RngStream
from src.core.records import HISTORY_FILE, PREDICTIONS_FILE, RunRecord
from src.evolution.engine import Adapter, GenerationStats, Genome, GenomeLayout, evolve, sphere
from src.fuzzy.inference import SystemKind, grid_partition, predict as predict_fuzzy, uniform_variable
from src.fuzzy.neurofuzzy import gradient_train_mamdani, hybrid_train_ts
from src.fuzzy.serialization import system_from_dict, system_to_dict
from src.hybrids.evonf import data_universes, evonf_run
from src.hybrids.mleann import mleann_run, split_errors
from src.neural.mlp import MLPNetwork, predict as predict_network
from src.neural.trainers import train
from src.ui.display import display

logger = logging.getLogger(__name__)

SERIES_FILE = "series.csv"
EPOCH_COLUMNS = ("epoch", "sse")


@dataclass(frozen=True)
class PreparedData:
    """Normalized dataset, its splits and the scaling that produced it."""

    full: Dataset
    train: Dataset
    valid: Optional[Dataset]
    test: Optional[Dataset]
    scaling: Optional[MinMaxScaling]

    @property
    def fingerprint(self):
        return self.full.fingerprint()


def generate_series(cfg: ExperimentConfig):
    return gen_mackey_glass(**asdict(cfg.dataset.mackey_glass))


def prepare_data(cfg: ExperimentConfig):
    """
    Build, normalize and split the configured dataset.

    Raises:
        ParseError / InvalidSplitError / NumericBlowupError: From the dataset layer
    """
    section = cfg.dataset
    if section.source == "csv":
        ds = load_csv(section.csv.path, section.csv.has_header, section.csv.target_cols)
    else:
        ds = embed_series(generate_series(cfg), section.embedding.lags, section.embedding.horizon, "mackey_glass")
    scaling = None
    if section.normalize:
        ds, scaling = normalize_minmax(ds)
    train_ds, valid_ds, test_ds = split(ds, cfg.split_spec())
    logger.info("Dataset %s: %d rows, %d inputs, %d targets", ds.name, ds.n_rows, ds.n_inputs, ds.n_targets)
    return PreparedData(ds, train_ds, valid_ds, test_ds, scaling)


def report_generation(stats: GenerationStats):
    display.add_line(f"🧬 Generation {stats.generation:3d}: best {stats.best:.6g}  avg {stats.average:.6g}  "
                     f"pop {stats.population_size}")


def _epoch_rows(curve):
    return [[epoch, float(loss)] for epoch, loss in enumerate(curve)]


def run_gen_series(cfg: ExperimentConfig, out_dir):
    started = time.perf_counter()
    series = generate_series(cfg)
    section = cfg.dataset.mackey_glass
    times = (section.washout + np.arange(series.size)) * section.sample_every * section.dt
    write_csv(os.path.join(out_dir, SERIES_FILE), [times, series], header=["t", "x"])
    display.add_line(f"📈 Generated {series.size} Mackey-Glass samples")
    return RunRecord(task=cfg.task, name=cfg.run_name, seed=cfg.seed, config={},
                     dataset_fingerprint=fingerprint_arrays(series), model=None,
                     duration_seconds=time.perf_counter() - started,
                     extra={"samples": int(series.size), "min": float(series.min()), "max": float(series.max())})


def run_train_nn(cfg: ExperimentConfig, data: PreparedData):
    started = time.perf_counter()
    network = cfg.network
    sizes = (data.train.n_inputs, *network.hidden, data.train.n_targets)
    net = MLPNetwork.initialize(sizes, network.transfer, RngStream.derive(cfg.seed, "network"), network.init_scale)
    diverged = False
    try:
        report = train(net, data.train, cfg.trainer)
        net, curve = report.final_net, report.loss_curve
        display.add_line(f"🧠 {cfg.trainer.algorithm.value}: {report.epochs_run} epochs, "
                         f"sse {curve[0]:.6g} -> {curve[-1]:.6g}")
    except TrainingDivergedError as exc:
        logger.warning("Training diverged: %s", exc)
        diverged = True
        net, curve = exc.network or net, exc.loss_curve
    errors = split_errors(lambda x: predict_network(net, x), data.train, data.valid, data.test)
    return RunRecord(task=cfg.task, name=cfg.run_name, seed=cfg.seed, config={},
                     history_columns=EPOCH_COLUMNS, history=_epoch_rows(curve),
                     model={"network": net.to_dict(), "trainer": cfg.trainer.to_dict()},
                     train_rmse=errors[0], valid_rmse=errors[1], test_rmse=errors[2],
                     parameter_count=net.parameter_count, duration_seconds=time.perf_counter() - started,
                     diverged=diverged)


def run_anfis(cfg: ExperimentConfig, data: PreparedData):
    started = time.perf_counter()
    fuzzy = cfg.fuzzy
    input_universes, output_universe = data_universes(data.train, data.valid, data.test)
    variables = [uniform_variable(f"x{j + 1}", universe, 2) for j, universe in enumerate(input_universes)]
    output = None
    if fuzzy.kind is SystemKind.MAMDANI:
        output = uniform_variable("y", output_universe, fuzzy.terms_per_var, fuzzy.shape)
    fs = grid_partition(variables, fuzzy.terms_per_var, fuzzy.kind, RngStream.derive(cfg.seed, "rules"),
                        output, fuzzy.shape, fuzzy.tnorm, fuzzy.tconorm, fuzzy.defuzz)
    if fs.kind is SystemKind.TAKAGI_SUGENO:
        result = hybrid_train_ts(fs, data.train, cfg.neurofuzzy)
    else:
        result = gradient_train_mamdani(fs, data.train, cfg.neurofuzzy)
    fs = result.system
    if result.loss_curve:
        message = (f"🌫️ {fs.kind.value}: {len(fs.rules)} rules, "
                   f"sse {result.loss_curve[0]:.6g} -> {result.final_loss:.6g}")
    else:
        message = "🌫️ training diverged at the start"
    display.add_line(message)
    with np.errstate(over="ignore", invalid="ignore"):
        errors = split_errors(lambda x: predict_fuzzy(fs, x).reshape(-1, 1), data.train, data.valid, data.test)
    return RunRecord(task=cfg.task, name=cfg.run_name, seed=cfg.seed, config={},
                     history_columns=EPOCH_COLUMNS, history=_epoch_rows(result.loss_curve),
                     model={"system": system_to_dict(fs), "learning": asdict(cfg.neurofuzzy)},
                     train_rmse=errors[0], valid_rmse=errors[1], test_rmse=errors[2],
                     parameter_count=fs.parameter_count, duration_seconds=time.perf_counter() - started,
                     diverged=result.diverged)


def run_mleann(cfg: ExperimentConfig, data: PreparedData):
    return mleann_run(cfg.mleann, data.train, data.valid, data.test, cfg.run_name, report_generation)


def run_evonf(cfg: ExperimentConfig, data: PreparedData):
    return evonf_run(cfg.evonf, data.train, data.valid, data.test, cfg.run_name, report_generation)


def run_ea_bench(cfg: ExperimentConfig, _data=None):
    """Sphere benchmark without and with the fuzzy controller; history rows are tagged by a controlled column."""
    started = time.perf_counter()
    bench = cfg.bench
    layout = GenomeLayout.build([("x", [-bench.bound] * bench.dimensions, [bench.bound] * bench.dimensions)])

    def init(stream):
        return Genome.random(layout, stream)

    rows, extra, model = [], {}, {}
    for controlled, adapter in ((0, Adapter.NONE), (1, Adapter.FUZZY_CONTROLLER)):
        label = "controlled" if controlled else "uncontrolled"
        result = evolve(init, sphere, replace(cfg.ea, adapter=adapter))
        rows += [[controlled, *stats.as_row()] for stats in result.history]
        extra[f"{label}_best"] = float(result.best_fitness)
        extra[f"{label}_final_population"] = result.final_config.population_size
        model[label] = result.best.genes.tolist()
        display.add_line(f"🎯 Sphere {label}: best {result.best_fitness:.6g}")
    return RunRecord(task=cfg.task, name=cfg.run_name, seed=cfg.seed, config={},
                     dataset_fingerprint=fingerprint_arrays(np.array([bench.dimensions, bench.bound])),
                     history_columns=("controlled",) + GenerationStats.COLUMNS, history=rows, model=model,
                     parameter_count=bench.dimensions, duration_seconds=time.perf_counter() - started,
                     extra=extra)


DATA_TASKS = {
    "train-nn": run_train_nn,
    "anfis": run_anfis,
    "mleann": run_mleann,
    "evonf": run_evonf,
}


def model_predictor(record: RunRecord):
    """Prediction function for the model serialized in a run record (None if it has none)."""
    model = record.model or {}
    if "network" in model:
        net = MLPNetwork.from_dict(model["network"])
        return lambda x: predict_network(net, x)
    if "system" in model:
        fs = system_from_dict(model["system"])
        return lambda x: predict_fuzzy(fs, x).reshape(-1, 1)
    return None


def write_predictions(path, record: RunRecord, ds: Dataset):
    """Write the test inputs, targets and the record's model predictions."""
    predictor = model_predictor(record)
    with np.errstate(over="ignore", invalid="ignore"):
        predicted = predictor(ds.inputs)
    m = ds.n_targets
    header = [f"x{j + 1}" for j in range(ds.n_inputs)]
    header += ["target"] if m == 1 else [f"target{k + 1}" for k in range(m)]
    header += ["prediction"] if m == 1 else [f"prediction{k + 1}" for k in range(m)]
    write_csv(path, [ds.inputs, ds.targets, predicted], header)


def run_experiment(cfg: ExperimentConfig):
    """
    Execute one configured run and write its files.

    Returns:
        RunRecord: The record written to run.json

    Raises:
        HybridCIError: If data preparation or the task fails before a record exists
    """
    out_dir = cfg.output_dir
    os.makedirs(out_dir, exist_ok=True)
    display.set_header(f"HybridCI {cfg.task}: {cfg.run_name}")
    display.print_header()
    started = time.perf_counter()

    if cfg.task == "gen-series":
        record = run_gen_series(cfg, out_dir)
    elif cfg.task == "ea-bench":
        record = run_ea_bench(cfg)
    else:
        data = prepare_data(cfg)
        record = DATA_TASKS[cfg.task](cfg, data)
        record = replace(record, dataset_fingerprint=data.fingerprint)
        if data.test is not None and record.model is not None:
            write_predictions(os.path.join(out_dir, PREDICTIONS_FILE), record, data.test)
        if data.scaling is not None:
            record.extra["scaling"] = data.scaling.to_dict()

    record = replace(record, config=config_to_dict(cfg))
    if record.history:
        write_csv(os.path.join(out_dir, HISTORY_FILE), [np.array(record.history, dtype=np.float64)],
                  header=list(record.history_columns))
    record.save(out_dir)
    logger.info("Run %s finished in %.2f s", cfg.run_name, time.perf_counter() - started)

    if record.test_rmse is not None:
        display.add_line(f"✅ test RMSE {record.test_rmse:.6g} ({record.parameter_count} parameters)")
    if record.diverged:
        display.add_line("⚠️ training diverged; the record is partial")
    display.set_footer(f"Results in {out_dir}")
    display.print_footer()
    return record


def exit_status(record: RunRecord):
    return 1 if record.diverged else 0
