"""Experiment orchestrator: data, training, evaluation and artifacts per seed"""
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

from core.config import ExperimentConfig, config_from_dict, write_resolved_config
from core.exceptions import EXIT_OK, UnmixError, exit_code_for
from core.logger import logger
from evaluation.metrics import EvalReport, identity_rmse, match_components
from models.checkpoint import load_checkpoint, restore_parameters, save_checkpoint
from output.csv_exporter import CSVExporter
from output.json_exporter import JSONExporter
from output.report_writer import read_report, write_report
from synthesis.mixing import MixingSpec, make_mixing_spec, mix
from synthesis.signals import read_signals, write_signals
from synthesis.sources import SourceSet, generate_sources
from training.trainer import Trainer, train

CONFIG_FILE = "config.json"
SOURCES_FILE = "sources.csv"
OBSERVATIONS_FILE = "observations.csv"
MIXING_FILE = "mixing.json"
REPORT_FILE = "report.csv"


def seed_dir_name(seed: int) -> str:
    return f"seed_{seed}"


@dataclass
class SeedData:
    """Everything one seed's models train and are evaluated on"""

    seed: int
    run_dir: Path
    config: ExperimentConfig
    sources: SourceSet
    mixing: MixingSpec
    observations: np.ndarray


@dataclass
class VariantOutcome:
    variant: str
    report: EvalReport
    final_total: Optional[float]
    elapsed: float
    artifacts: Dict[str, str] = field(default_factory=dict)


@dataclass
class RunOutcome:
    """Exit code, artifact root and every report produced (all seeds)"""

    exit_code: int
    artifact_dir: str
    reports: List[EvalReport] = field(default_factory=list)
    seed_dirs: List[str] = field(default_factory=list)
    error: Optional[str] = None

    @property
    def ok(self) -> bool:
        return self.exit_code == EXIT_OK


def _train_and_evaluate(seed_config: ExperimentConfig, variant: str, run_dir: Path,
                        observations: np.ndarray, sources: np.ndarray,
                        progress: bool = False) -> VariantOutcome:
    """Train one variant, match it against the sources and write its artifacts"""
    start_time = time.time()
    seed = seed_config.seeds[0]
    train_cfg = seed_config.train_config(variant, seed)
    result = train(train_cfg, observations, progress=progress)

    report = match_components(result.inferred_means, sources, model_variant=variant,
                              scenario=seed_config.scenario, seed=seed,
                              config_hash=seed_config.config_hash())

    artifacts = {
        'inferred': write_signals(run_dir / f"inferred_{variant}.csv", report.align(result.inferred_means), "ic"),
        'history': CSVExporter().export_history(result.history, run_dir / f"history_{variant}.csv"),
        'checkpoint': save_checkpoint(
            run_dir / f"checkpoint_{variant}.json", result.named_parameters(), variant,
            metadata={
                'seed': seed,
                'scenario': seed_config.scenario,
                'config_hash': seed_config.config_hash(),
                'epochs': train_cfg.epochs,
                'length_scales': result.priors.length_scale_values.tolist(),
            }),
    }

    final_total = result.history[-1].total if result.history else None
    logger.info(f"{variant} (seed {seed}): matched average RMSE {report.average_rmse:.4f}")
    logger.debug(f"{variant} (seed {seed}): unmatched average RMSE "
                 f"{np.mean(identity_rmse(result.inferred_means, sources)):.4f}")
    return VariantOutcome(variant=variant, report=report, final_total=final_total,
                          elapsed=time.time() - start_time, artifacts=artifacts)


def _variant_job(config_dict: Dict[str, Any], variant: str, run_dir: str,
                 observations: np.ndarray, sources: np.ndarray) -> VariantOutcome:
    """Process-pool entry point; rebuilds the config from plain data"""
    return _train_and_evaluate(config_from_dict(config_dict), variant, Path(run_dir),
                               observations, sources)


class ExperimentRunner:
    """Runs every configured seed and model variant"""

    def __init__(self, config: ExperimentConfig, parallel: bool = False, progress: bool = False):
        self.config = config
        self.parallel = parallel
        self.progress = progress
        self.output_root = Path(config.output_dir)

    def prepare_seed(self, seed: int) -> SeedData:
        """Generate sources and observations for one seed and write them out"""
        data = self.config.data
        run_dir = self.output_root / seed_dir_name(seed)
        run_dir.mkdir(parents=True, exist_ok=True)

        source_seed = data.seed if data.seed is not None else seed
        sources = generate_sources(data.T, source_seed, data.source_spec())
        mixing = make_mixing_spec(data.n, self.config.m, data.mixing, seed)
        observations = mix(sources, mixing)
        seed_config = self.config.for_seed(seed, sources.seed)

        write_resolved_config(seed_config, run_dir / CONFIG_FILE)
        write_signals(run_dir / SOURCES_FILE, sources.sources, "src")
        write_signals(run_dir / OBSERVATIONS_FILE, observations, "obs")
        JSONExporter().export({'mixing': mixing.to_dict(), 'sources': sources.to_dict()},
                              run_dir / MIXING_FILE)

        logger.info(f"Seed {seed}: {sources.n} sources (source seed {sources.seed}), "
                    f"{mixing.m} {mixing.mode} mixtures over T={data.T}")
        return SeedData(seed=seed, run_dir=run_dir, config=seed_config, sources=sources,
                        mixing=mixing, observations=observations)

    def generate(self) -> List[SeedData]:
        return [self.prepare_seed(seed) for seed in self.config.seeds]

    def _run_variants(self, seed_data: SeedData, variants: Sequence[str]) -> List[VariantOutcome]:
        if self.parallel and len(variants) > 1:
            logger.info(f"Training {len(variants)} variants in parallel")
            with ProcessPoolExecutor(max_workers=len(variants)) as pool:
                futures = [
                    pool.submit(_variant_job, seed_data.config.to_dict(), variant, str(seed_data.run_dir),
                                seed_data.observations, seed_data.sources.sources)
                    for variant in variants
                ]
                return [f.result() for f in futures]

        return [
            _train_and_evaluate(seed_data.config, variant, seed_data.run_dir, seed_data.observations,
                                seed_data.sources.sources, progress=self.progress)
            for variant in variants
        ]

    def run(self, variants: Optional[Sequence[str]] = None) -> List[EvalReport]:
        chosen = list(variants or self.config.models)
        all_reports = []
        for seed in self.config.seeds:
            seed_data = self.prepare_seed(seed)
            outcomes = self._run_variants(seed_data, chosen)
            reports = [o.report for o in outcomes]
            write_report(reports, seed_data.run_dir / REPORT_FILE)
            logger.info(f"Report written to: {seed_data.run_dir / REPORT_FILE}")
            all_reports.extend(reports)
        return all_reports


def run_experiment(config: ExperimentConfig, variants: Optional[Sequence[str]] = None,
                   parallel: bool = False, progress: bool = False) -> RunOutcome:
    """Run everything, mapping failures to exit codes instead of raising"""
    runner = ExperimentRunner(config, parallel=parallel, progress=progress)
    seed_dirs = [str(runner.output_root / seed_dir_name(s)) for s in config.seeds]
    try:
        reports = runner.run(variants)
    except (Exception, KeyboardInterrupt) as e:
        code = exit_code_for(e)
        logger.error(f"Experiment failed: {e}")
        return RunOutcome(exit_code=code, artifact_dir=str(runner.output_root), seed_dirs=seed_dirs,
                          error=str(e))
    return RunOutcome(exit_code=EXIT_OK, artifact_dir=str(runner.output_root), reports=reports,
                      seed_dirs=seed_dirs)


def load_seed_config(run_dir: Path) -> ExperimentConfig:
    return config_from_dict(JSONExporter().load(Path(run_dir) / CONFIG_FILE))


def _compare_with_saved(reports: Sequence[EvalReport], report_path: Path) -> None:
    """Log whether recomputed averages agree with the report already on disk"""
    if not report_path.with_suffix('.json').exists():
        return
    saved = {r.model_variant: r.average_rmse for r in read_report(report_path)}
    for report in reports:
        previous = saved.get(report.model_variant)
        if previous is None:
            continue
        if abs(previous - report.average_rmse) > 1e-9:
            logger.warning(f"{report.model_variant}: average RMSE {report.average_rmse:.6f} differs "
                           f"from the saved report ({previous:.6f})")
        else:
            logger.debug(f"{report.model_variant}: matches the saved report")


def evaluate_run(run_dir, variants: Optional[Sequence[str]] = None) -> List[EvalReport]:
    """Recompute reports of one seed directory from its checkpoints"""
    run_dir = Path(run_dir)
    config = load_seed_config(run_dir)
    sources, _ = read_signals(run_dir / SOURCES_FILE)
    observations, _ = read_signals(run_dir / OBSERVATIONS_FILE)
    seed = config.seeds[0]

    reports = []
    for variant in variants or config.models:
        checkpoint_path = run_dir / f"checkpoint_{variant}.json"
        if not checkpoint_path.exists():
            logger.warning(f"No checkpoint for {variant} in {run_dir}, skipping")
            continue
        trainer = Trainer(config.train_config(variant, seed), observations)
        restore_parameters(trainer.named_parameters(), load_checkpoint(checkpoint_path))
        reports.append(match_components(trainer.inferred_means(), sources, model_variant=variant,
                                        scenario=config.scenario, seed=seed,
                                        config_hash=config.config_hash()))

    if not reports:
        raise UnmixError(f"no checkpoints found in {run_dir}")
    _compare_with_saved(reports, run_dir / REPORT_FILE)
    write_report(reports, run_dir / REPORT_FILE)
    logger.info(f"Report written to: {run_dir / REPORT_FILE}")
    return reports


def find_seed_dirs(root) -> List[Path]:
    """Seed directories under an output root, or the directory itself if it is one"""
    root = Path(root)
    if (root / CONFIG_FILE).exists():
        return [root]
    return sorted(p for p in root.glob("seed_*") if (p / CONFIG_FILE).exists())
