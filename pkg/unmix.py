#!/usr/bin/env python3
"""
unmix - Blind source separation with GP priors and adversarial independence
Main CLI entry point
"""
import sys
import time
from pathlib import Path

import click

# Add current directory to path
sys.path.insert(0, str(Path(__file__).parent))

from core.config import load_experiment_config
from core.exceptions import EXIT_OK, UnmixError, exit_code_for
from core.experiment import ExperimentRunner, evaluate_run, find_seed_dirs, run_experiment
from core.logger import logger, resolve_level, setup_logger
from evaluation.reference import reference_key
from output.cli_reporter import CLIReporter
from training.trainer import VARIANTS


def experiment_options(fn):
    """--config / --set / --out / --seed, shared by every data-producing command"""
    fn = click.option('--seed', type=int, help='Run a single seed (replaces the seeds list)')(fn)
    fn = click.option('--out', '-o', help='Output directory (replaces output_dir)')(fn)
    fn = click.option('--set', 'overrides', multiple=True, metavar='KEY=VALUE',
                      help='Override a config value, e.g. --set training.epochs=500 (repeatable)')(fn)
    fn = click.option('--config', '-c', 'config_path', help='Config file (JSON or YAML)')(fn)
    return fn


def _fail(reporter: CLIReporter, exc: BaseException, verbose: bool):
    code = exit_code_for(exc)
    if isinstance(exc, KeyboardInterrupt):
        logger.warning("Interrupted by user")
    else:
        reporter.print_error(str(exc), code)
        if verbose and not isinstance(exc, UnmixError):
            import traceback
            traceback.print_exc()
    sys.exit(code)


@click.group()
@click.option('--verbose', '-v', is_flag=True, help='Verbose output')
@click.option('--quiet', '-q', is_flag=True, help='Minimal output')
@click.pass_context
def main(ctx, verbose, quiet):
    """
    unmix - Blind source separation with GP priors and adversarial independence

    Trains GP-AVAE, Half-GP-VAE and Half-GP-AVAE on synthetic mixtures and
    reports permutation/sign-matched RMSE against the true sources.

    Examples:
        unmix.py generate --out runs/demo
        unmix.py train --variant half-gp-avae --set training.epochs=500
        unmix.py reproduce --seed 3 --parallel
        unmix.py evaluate --run-dir runs/seed_0
    """
    setup_logger(level=resolve_level(verbose, quiet))
    ctx.obj = {'verbose': verbose, 'quiet': quiet, 'reporter': CLIReporter(verbose=verbose)}


@main.command()
@experiment_options
@click.pass_context
def generate(ctx, config_path, overrides, out, seed):
    """Generate sources and observations only"""
    reporter = ctx.obj['reporter']
    try:
        config = load_experiment_config(config_path, overrides, out, seed)
        seeds = ExperimentRunner(config).generate()
    except (Exception, KeyboardInterrupt) as e:
        _fail(reporter, e, ctx.obj['verbose'])

    if not ctx.obj['quiet']:
        for data in seeds:
            click.echo(str(data.run_dir))
    sys.exit(EXIT_OK)


def _run(ctx, config_path, overrides, out, seed, parallel, variants=None):
    reporter = ctx.obj['reporter']
    quiet = ctx.obj['quiet']
    try:
        config = load_experiment_config(config_path, overrides, out, seed)
    except (Exception, KeyboardInterrupt) as e:
        _fail(reporter, e, ctx.obj['verbose'])

    if not quiet:
        reporter.print_banner()

    start_time = time.time()
    outcome = run_experiment(config, variants=variants, parallel=parallel, progress=not quiet)
    if not outcome.ok:
        reporter.print_error(outcome.error or "experiment failed", outcome.exit_code)
        sys.exit(outcome.exit_code)

    if not quiet:
        chosen = list(variants or config.models)
        for start in range(0, len(outcome.reports), len(chosen)):
            reporter.print_report(outcome.reports[start:start + len(chosen)])
        reporter.print_reference(reference_key(config.scenario, config.ee.enabled), outcome.reports)
        reporter.print_summary(outcome.artifact_dir, outcome.seed_dirs, time.time() - start_time)
    sys.exit(EXIT_OK)


@main.command('train')
@click.option('--variant', required=True, type=click.Choice(VARIANTS), help='Model variant to train')
@experiment_options
@click.option('--parallel', is_flag=True, help='Accepted for symmetry; one variant runs alone')
@click.pass_context
def train_command(ctx, variant, config_path, overrides, out, seed, parallel):
    """Train and evaluate one model variant"""
    _run(ctx, config_path, overrides, out, seed, parallel, variants=[variant])


@main.command()
@experiment_options
@click.option('--parallel', is_flag=True, help='Train the model variants concurrently')
@click.pass_context
def reproduce(ctx, config_path, overrides, out, seed, parallel):
    """Full pipeline: data, all configured variants, reports"""
    _run(ctx, config_path, overrides, out, seed, parallel)


@main.command()
@click.option('--run-dir', '-r', required=True, type=click.Path(exists=True, file_okay=False),
              help='A seed directory, or an output directory holding seed_* directories')
@click.option('--variant', 'variants', multiple=True, type=click.Choice(VARIANTS),
              help='Restrict to these variants (repeatable)')
@click.pass_context
def evaluate(ctx, run_dir, variants):
    """Recompute reports from saved checkpoints"""
    reporter = ctx.obj['reporter']
    try:
        seed_dirs = find_seed_dirs(run_dir)
        if not seed_dirs:
            raise UnmixError(f"no run directories under {run_dir}")
        for seed_dir in seed_dirs:
            reports = evaluate_run(seed_dir, list(variants) or None)
            if not ctx.obj['quiet']:
                reporter.print_report(reports)
    except (Exception, KeyboardInterrupt) as e:
        _fail(reporter, e, ctx.obj['verbose'])
    sys.exit(EXIT_OK)


if __name__ == '__main__':
    main()
