from __future__ import annotations

import json
import logging
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional

import numpy as np
import typer

try:  # typer >= 0.26 vendors click; its exceptions come from the bundled copy
    from typer import _click as click
except ImportError:  # pragma: no cover
    import click
from rich.console import Console
from rich.logging import RichHandler

from . import __version__
from .aec import erle, misalignment_db, nlms_process
from .audio.corpus import ToyBabblePool, ToyMusicPool, playback_pool, speech_pool
from .audio.wav import read_wav, write_wav
from .config import Config
from .errors import BargeBenchError, StorageError
from .evaluate import evaluate
from .hook import JsonlLogHook, LoggingHook, PrintHook
from .model.config import ModelConfig, TrainConfig
from .model.train import LOG_NAME, train
from .paths import RESOLVED_CONFIG_NAME, ensure_within
from .report import load_report, print_report_table, report_names, write_comparison, write_report
from .room.dataset import DatasetPlan, SourcePools, build_dataset, read_manifest

LOG_ENV = "BARGEBENCH_LOG"
EXIT_OK = 0
EXIT_IO = 3

logger = logging.getLogger("bargebench")

app = typer.Typer(
    name="bargebench",
    help="bargebench: barge-in simulation, NLMS baseline and echo-aware keyword spotting.",
    no_args_is_help=True,
)


@dataclass
class GlobalOptions:
    config: Optional[Path] = None
    seed: Optional[int] = None
    out: Optional[Path] = None
    threads: Optional[int] = None


def setup_logging() -> None:
    """Route package logs to stderr through rich; level from BARGEBENCH_LOG."""
    level_name = os.environ.get(LOG_ENV, "WARNING").upper()
    level = getattr(logging, level_name, logging.WARNING)
    if not any(isinstance(h, RichHandler) for h in logger.handlers):
        handler = RichHandler(console=Console(stderr=True), show_path=False)
        handler.setFormatter(logging.Formatter("%(name)s: %(message)s"))
        logger.addHandler(handler)
        logger.propagate = False
    logger.setLevel(level)


def emit(**pairs: Any) -> None:
    """Machine-readable stdout: one key=value per line."""
    for k, v in pairs.items():
        typer.echo(f"{k}={v}")


def _load_config(opts: GlobalOptions, overrides: Optional[Dict[str, Any]] = None) -> Config:
    base = {
        "seed": opts.seed,
        "out": str(opts.out.resolve()) if opts.out else None,
        "threads": opts.threads,
    }
    base.update(overrides or {})
    return Config(opts.config, base)


def _prepare(cfg: Config, scope: str) -> Path:
    """Materialize the seed, validate, echo and persist the resolved config; return the output directory."""
    cfg.materialize_seed()
    cfg.validate(scope)
    out_dir = cfg.resolve_path("out")
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise StorageError(str(out_dir), f"cannot create output directory: {e}") from e
    typer.echo(f"config={json.dumps(cfg.resolved(), sort_keys=True, separators=(',', ':'))}")
    cfg.save(ensure_within(out_dir, RESOLVED_CONFIG_NAME))
    return out_dir


def _abs(p: Optional[Path]) -> Optional[str]:
    return str(Path(p).resolve()) if p is not None else None


def _guarded(fn: Callable[[], int]) -> int:
    """Run a command body and map failures to stable exit codes."""
    try:
        return fn()
    except BargeBenchError as e:
        logger.debug(f"{type(e).__name__}: {e}", exc_info=True)
        typer.echo(f"Error: {e}", err=True)
        return e.exit_code
    except OSError as e:
        typer.echo(f"Error: {e}", err=True)
        return EXIT_IO


def cmd_simulate(opts: GlobalOptions) -> int:
    def body() -> int:
        cfg = _load_config(opts)
        out_dir = _prepare(cfg, "simulate")
        keywords = list(cfg.get("dataset.keywords"))
        sources = cfg.section("dataset")["sources"]
        pools = SourcePools(
            speech=speech_pool(sources["speech"], keywords, cfg.base_dir),
            music=playback_pool(sources["music"], ToyMusicPool(), cfg.base_dir, "dataset.sources.music"),
            playback_speech=playback_pool(
                sources["playback_speech"], ToyBabblePool(), cfg.base_dir, "dataset.sources.playback_speech"
            ),
        )
        plan = DatasetPlan(
            seed=int(cfg.get("dataset.seed")),
            counts=dict(cfg.get("dataset.counts")),
            keywords=keywords,
            positive_fraction=float(cfg.get("dataset.positive_fraction")),
            max_duration_s=cfg.get("dataset.max_duration_s"),
            max_order=int(cfg.get("dataset.max_order")),
        )
        manifest = build_dataset(plan, pools, out_dir, threads=int(cfg.get("threads")))
        records = read_manifest(manifest)
        emit(manifest=manifest, n=len(records))
        counts: Dict[str, int] = {}
        for r in records:
            counts[r.kind.value] = counts.get(r.kind.value, 0) + 1
        for kind, n in counts.items():
            typer.echo(f"kind.{kind}={n}")
        return EXIT_OK

    return _guarded(body)


def cmd_aec(
    opts: GlobalOptions,
    mic: Path,
    ref: Path,
    residual_name: str = "residual.wav",
    taps: Optional[int] = None,
    step: Optional[float] = None,
    eps: Optional[float] = None,
    true_path: Optional[Path] = None,
) -> int:
    def body() -> int:
        cfg = _load_config(opts, {"aec.taps": taps, "aec.step": step, "aec.eps": eps})
        out_dir = _prepare(cfg, "aec")
        mic_w = read_wav(mic)
        ref_w = read_wav(ref)
        residual, state = nlms_process(
            mic_w, ref_w, taps=int(cfg.get("aec.taps")), step=float(cfg.get("aec.step")), eps=float(cfg.get("aec.eps"))
        )
        target = ensure_within(out_dir, residual_name)
        write_wav(target, residual)
        emit(residual=target)
        if np.any(mic_w.samples):
            # steady state: final quarter of the signal
            emit(erle_db=erle(mic_w, residual, start=3 * len(mic_w) // 4), erle_full_db=erle(mic_w, residual))
        else:
            emit(erle_db="nan", erle_full_db="nan")
        if true_path is not None:
            try:
                w_true = np.loadtxt(true_path, ndmin=1)
            except OSError as e:
                raise StorageError(str(true_path), f"cannot read true path: {e}") from e
            emit(misalignment_db=misalignment_db(state.weights, w_true))
        return EXIT_OK

    return _guarded(body)


def cmd_train(opts: GlobalOptions, manifest: Optional[Path] = None, progress: Optional[int] = None) -> int:
    def body() -> int:
        cfg = _load_config(opts, {"train.manifest": _abs(manifest)})
        out_dir = _prepare(cfg, "train")
        t = cfg.section("train")
        model_config = ModelConfig.from_dict(cfg.section("model"))
        train_config = TrainConfig(
            epochs=t["epochs"],
            max_steps=t.get("max_steps"),
            batch_size=t["batch_size"],
            learning_rate=float(t["learning_rate"]),
            validation_fraction=float(t["validation_fraction"]),
            phoneme_weight=float(t["phoneme_weight"]),
            seed=int(cfg.get("seed")),
            aec=cfg.section("aec"),
        )
        hooks = [JsonlLogHook(ensure_within(out_dir, LOG_NAME)), LoggingHook()]
        if progress:
            hooks.append(PrintHook(every=progress))
        try:
            summary = train(
                cfg.resolve_path("train.manifest"), model_config, train_config, out_dir, hooks, int(cfg.get("threads"))
            )
        finally:
            for h in hooks:
                h.close()
        emit(
            best_epoch=summary.best_epoch,
            best_val_loss=summary.best_val_loss,
            best_val_mae=summary.best_val_mae,
            steps=summary.steps,
            checkpoint=summary.checkpoint,
            digest=summary.digest,
        )
        return EXIT_OK

    return _guarded(body)


def cmd_eval(opts: GlobalOptions, checkpoint: Optional[Path] = None, manifest: Optional[Path] = None) -> int:
    def body() -> int:
        cfg = _load_config(opts, {"eval.checkpoint": _abs(checkpoint), "eval.manifest": _abs(manifest)})
        out_dir = _prepare(cfg, "eval")
        report = evaluate(
            cfg.resolve_path("eval.checkpoint"),
            cfg.resolve_path("eval.manifest"),
            aec=cfg.section("aec"),
            threads=int(cfg.get("threads")),
        )
        written = write_report(report, out_dir, with_roc=bool(cfg.get("eval.roc_svg")))
        print_report_table(report)
        emit(**written)
        return EXIT_OK

    return _guarded(body)


def cmd_report(opts: GlobalOptions, reports: List[Path]) -> int:
    def body() -> int:
        cfg = _load_config(opts)
        out_dir = _prepare(cfg, "report")
        names = report_names(reports)
        loaded = {name: load_report(p) for name, p in zip(names, reports)}
        written = write_comparison(loaded, out_dir)
        for name, r in loaded.items():
            print_report_table(r, title=name)
        emit(**written)
        return EXIT_OK

    return _guarded(body)


@app.callback()
def main_callback(
    ctx: typer.Context,
    config: Optional[Path] = typer.Option(None, "--config", "-c", help="YAML run configuration"),
    seed: Optional[int] = typer.Option(None, "--seed", min=0, help="Run seed (drawn from OS entropy if omitted)"),
    out: Optional[Path] = typer.Option(None, "--out", "-o", help="Output directory"),
    threads: Optional[int] = typer.Option(None, "--threads", min=1, help="Worker threads"),
):
    setup_logging()
    ctx.obj = GlobalOptions(config=config, seed=seed, out=out, threads=threads)


def _opts(ctx: typer.Context) -> GlobalOptions:
    return ctx.obj if isinstance(ctx.obj, GlobalOptions) else GlobalOptions()


@app.command("simulate", help="Synthesize the four-scenario barge-in dataset and its manifest")
def simulate_command(ctx: typer.Context):
    raise typer.Exit(cmd_simulate(_opts(ctx)))


@app.command("aec", help="Run the NLMS echo canceller on a mic/reference WAV pair")
def aec_command(
    ctx: typer.Context,
    mic: Path = typer.Argument(..., help="Microphone WAV (16 kHz mono PCM16)"),
    ref: Path = typer.Argument(..., help="Playback reference WAV"),
    residual: str = typer.Option("residual.wav", "--residual", help="Residual file name inside --out"),
    nlms_taps: Optional[int] = typer.Option(None, "--nlms-taps", help="Filter length L"),
    nlms_step: Optional[float] = typer.Option(None, "--nlms-step", help="Step size mu in (0, 2]"),
    nlms_eps: Optional[float] = typer.Option(None, "--nlms-eps", help="Regularizer epsilon"),
    true_path: Optional[Path] = typer.Option(None, "--true-path", help="Text file of true echo-path taps"),
):
    raise typer.Exit(cmd_aec(_opts(ctx), mic, ref, residual, nlms_taps, nlms_step, nlms_eps, true_path))


@app.command("train", help="Train the keyword spotter on a manifest")
def train_command(
    ctx: typer.Context,
    manifest: Optional[Path] = typer.Option(None, "--manifest", "-m", help="Training manifest (overrides train.manifest)"),
    progress: Optional[int] = typer.Option(None, "--progress", min=1, help="Print progress to stderr every N steps"),
):
    raise typer.Exit(cmd_train(_opts(ctx), manifest, progress))


@app.command("eval", help="Score a checkpoint on a manifest and write JSON/CSV/SVG reports")
def eval_command(
    ctx: typer.Context,
    checkpoint: Optional[Path] = typer.Option(None, "--checkpoint", help="Checkpoint (overrides eval.checkpoint)"),
    manifest: Optional[Path] = typer.Option(None, "--manifest", "-m", help="Manifest (overrides eval.manifest)"),
):
    raise typer.Exit(cmd_eval(_opts(ctx), checkpoint, manifest))


@app.command("report", help="Merge evaluation reports into a comparison table and MAE chart")
def report_command(
    ctx: typer.Context,
    reports: List[Path] = typer.Argument(..., help="report.json files"),
):
    raise typer.Exit(cmd_report(_opts(ctx), reports))


@app.command("version", help="Print the package version")
def version_command():
    typer.echo(__version__)


def main(argv: list[str] | None = None) -> int:
    try:
        # non-standalone click returns the code of typer.Exit instead of raising it
        rv = app(args=argv, prog_name="bargebench", standalone_mode=False)
        return rv if isinstance(rv, int) else 0
    except typer.Exit as e:
        return int(e.exit_code or 0)
    except click.ClickException as e:
        e.show()
        return e.exit_code
    except click.exceptions.Abort:
        return 1
    except SystemExit as e:
        return int(e.code or 0)
    except Exception as e:  # Fallback safety
        if str(e):
            typer.echo(f"Unexpected error: {e}", err=True)
        return 1


if __name__ == "__main__":  # pragma: no cover
    raise SystemExit(main())
