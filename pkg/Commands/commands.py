"""Command dispatch: every mode writes its artifacts under paths.out_dir and
returns the one-line summary printed on stdout."""
import os
from typing import Callable, Dict, Optional, Tuple

import click

from Commands.filter_grid import export_filter_grid
from Evaluation.benchmarks import hsi_benchmark, texture_benchmark
from Evaluation.reports import write_bench_csv, write_confusion_csv, write_json, write_utility_csv
from Evaluation.transfer_utility import utility_curves
from Models.models import ConvFeatureBank
from Network.bank_io import read_bank, write_bank
from Sampling.loaders import load_hsi, load_rgb_dataset, load_texture_images
from Schemas.schemas import RunConfig, RunMode, SamplerMode
from Training.em_trainer import train_cgcnn, write_trace_csv
from run_config.run_config import require_paths
from src import logger
from src.exceptions import CGCNNError, NumericalError

BANK_FILE = "bank.cgcn"


def _out(config: RunConfig, name: str) -> str:
    return os.path.join(config.paths.out_dir, name)


def _train(config: RunConfig, source, initial_bank: Optional[ConvFeatureBank] = None
           ) -> Tuple[ConvFeatureBank, str]:
    bank, trace = train_cgcnn(source, config.sampler, config.trainer, config.bank,
                              initial_bank=initial_bank, checkpoint_dir=_out(config, "checkpoints"))
    write_bank(bank, _out(config, BANK_FILE))
    write_trace_csv(trace, _out(config, "trace.csv"))
    export_filter_grid(bank, _out(config, "filters.png"))
    last = trace.records[-1]
    return bank, f"final A={last.accuracy:.4f} after {len(trace)} EM iterations"


def run_train(config: RunConfig) -> str:
    if config.sampler.mode == SamplerMode.HSI:
        source = load_hsi(config.paths.cube, config.paths.labels)
    else:
        source = load_rgb_dataset(config.paths.dataset_dir)
    initial_bank = None
    if config.paths.bank:
        logger.info(f"Resuming from the bank at {config.paths.bank}")
        initial_bank = read_bank(config.paths.bank)
    _, summary = _train(config, source, initial_bank)
    return summary


def run_utility(config: RunConfig) -> str:
    bank = read_bank(config.paths.bank)
    source = load_rgb_dataset(config.paths.heldout_dir)
    report = utility_curves(bank, source, config.sampler, config.trainer, config.evaluation, config.seed)
    write_json(report, _out(config, "report.json"))
    write_utility_csv(report, _out(config, "report.csv"))
    if report.utility is None:
        raise NumericalError("transfer utility undefined: specific and random curves enclose no area "
                             "(curves written to report.json)")
    return f"U={report.utility:.4f}"


def run_texture(config: RunConfig) -> str:
    bank = read_bank(config.paths.bank)
    textures = load_texture_images(config.paths.texture_dir)
    result = texture_benchmark(bank, textures, config.evaluation, config.trainer, config.seed)
    results = {"cg": result}
    write_bench_csv(result, _out(config, "report.csv"))
    write_confusion_csv(result, _out(config, "confusion.csv"))
    summary = f"accuracy={result.accuracy:.4f} +- {result.accuracy_std:.4f}"
    if config.evaluation.raw_baseline:
        raw = texture_benchmark(None, textures, config.evaluation, config.trainer, config.seed,
                                classifier="knn", patch_size=bank.window)
        results["raw"] = raw
        write_bench_csv(raw, _out(config, "raw_report.csv"))
        write_confusion_csv(raw, _out(config, "raw_confusion.csv"))
        summary += f" (raw 1-NN {raw.accuracy:.4f})"
    write_json(results, _out(config, "report.json"))
    return summary


def run_hsi(config: RunConfig) -> str:
    hsi = load_hsi(config.paths.cube, config.paths.labels)
    if config.paths.bank:
        bank = read_bank(config.paths.bank)
    else:
        logger.info("No bank given: training one on the unlabeled cube first")
        bank, _ = _train(config, hsi)
    result = hsi_benchmark(bank, hsi, config.evaluation, config.seed)
    results = {"cg": result}
    write_bench_csv(result, _out(config, "report.csv"))
    write_confusion_csv(result, _out(config, "confusion.csv"))
    summary = f"accuracy={result.accuracy:.4f} +- {result.accuracy_std:.4f}"
    if config.evaluation.raw_baseline:
        raw = hsi_benchmark(None, hsi, config.evaluation, config.seed)
        results["raw"] = raw
        write_bench_csv(raw, _out(config, "raw_report.csv"))
        write_confusion_csv(raw, _out(config, "raw_confusion.csv"))
        summary += f" (raw bands {raw.accuracy:.4f})"
    write_json(results, _out(config, "report.json"))
    return summary


def run_export(config: RunConfig) -> str:
    image = export_filter_grid(read_bank(config.paths.bank), _out(config, "filters.png"))
    return f"wrote {len(image.paths)} filter grid(s), {image.rows}x{image.cols} tiles"


HANDLERS: Dict[RunMode, Callable[[RunConfig], str]] = {
    RunMode.TRAIN: run_train,
    RunMode.UTILITY: run_utility,
    RunMode.TEXTURE: run_texture,
    RunMode.HSI: run_hsi,
    RunMode.EXPORT: run_export,
}


def run_command(config: RunConfig) -> int:
    """Run one mode end to end. Returns the process exit status."""
    try:
        require_paths(config)
        write_json(config, _out(config, "manifest.json"))
        summary = HANDLERS[config.mode](config)
    except CGCNNError as e:
        logger.error(f"{config.mode.value} failed: {e.detail}")
        click.echo(f"error: {e.detail}", err=True)
        return e.exit_code
    except Exception as e:
        logger.exception(e)
        click.echo(f"error: {e}", err=True)
        return 1
    click.echo(summary)
    return 0
