import sys

import click

from Commands.commands import run_command
from run_config.run_config import parse_config
from src import logger
from src.exceptions import ConfigurationError


def _common_options(command):
    command = click.option("--set", "overrides", multiple=True, metavar="KEY=VALUE",
                           help="Override one dotted config key, e.g. trainer.max_iterations=5.")(command)
    command = click.option("--bank", "bank", default=None, help="Path to a saved feature bank.")(command)
    command = click.option("--out", "out_dir", default=None, help="Output directory for artifacts.")(command)
    command = click.option("--seed", type=int, default=None, help="Run seed.")(command)
    command = click.option("--config", "config_file", default=None,
                           type=click.Path(dir_okay=False), help="INI or JSON run configuration.")(command)
    return command


def _run(mode: str, config_file, seed, out_dir, bank, overrides) -> None:
    try:
        config = parse_config(config_file, overrides, mode=mode, seed=seed, out_dir=out_dir, bank=bank)
    except ConfigurationError as e:
        logger.error(f"Configuration rejected: {e.detail}")
        click.echo(f"error: {e.detail}", err=True)
        sys.exit(e.exit_code)
    logger.info(f"Starting {mode} run with seed {config.seed}, writing to {config.paths.out_dir}")
    sys.exit(run_command(config))


@click.group()
def cli():
    """Contextual-group feature learning: train a transferable conv bank and evaluate it."""


@cli.command()
@_common_options
def train(config_file, seed, out_dir, bank, overrides):
    """Run EM training on an unlabeled image directory (or HSI cube)."""
    _run("train", config_file, seed, out_dir, bank, overrides)


@cli.command()
@_common_options
def utility(config_file, seed, out_dir, bank, overrides):
    """Random / CG / specific accuracy curves and the transfer utility U."""
    _run("utility", config_file, seed, out_dir, bank, overrides)


@cli.command()
@_common_options
def texture(config_file, seed, out_dir, bank, overrides):
    """Texture benchmark with a frozen bank."""
    _run("texture", config_file, seed, out_dir, bank, overrides)


@cli.command()
@_common_options
def hsi(config_file, seed, out_dir, bank, overrides):
    """Pixel classification on a hyperspectral cube, 1-NN with k-fold CV."""
    _run("hsi", config_file, seed, out_dir, bank, overrides)


@cli.command("export-weights")
@_common_options
def export_weights(config_file, seed, out_dir, bank, overrides):
    """Render a saved bank's filters as a PNG grid."""
    _run("export", config_file, seed, out_dir, bank, overrides)
