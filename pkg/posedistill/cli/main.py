"""
``posedistill`` command line.

Hyperparameters come only from the run config file (``--config``); flags
select the verb and the paths. Every output directory receives the
resolved config snapshot, and failures exit with the code of their error
family (2 config, 3 dataset I/O, 4 checkpoint compatibility, 5 numerical).
"""

from __future__ import annotations

import argparse
import logging
import os
import shutil
import sys
from collections.abc import Sequence
from pathlib import Path
from typing import Any

from posedistill import __version__
from posedistill.config import SNAPSHOT_NAME, RunConfig, load_run_config
from posedistill.datagen import Dataset, build_dataset, generate_dataset, read_dataset
from posedistill.errors import CheckpointError, ConfigError, PosedistillError
from posedistill.evalharness import (
    ABLATION_CSV,
    METRICS_NAME,
    SUMMARY_CSV,
    MetricsReport,
    default_ablation_spec,
    evaluate,
    run_ablation,
    run_fewshot,
    visualize,
)
from posedistill.models import ModelBundle, Role
from posedistill.posemath import EmptyEvaluationError
from posedistill.trainer import (
    BEST_DIR,
    Strategy,
    TrainResult,
    train_stage1_teacher,
    train_stage2_student,
)

logger = logging.getLogger(__name__)

THREADS_ENV = "POSEDISTILL_THREADS"

_STAGES = ("teacher", "student")
_SPLITS = ("train", "val", "all")


# ── Shared helpers ────────────────────────────────────────────────────────────


def worker_count() -> int:
    """CPU count, capped by ``POSEDISTILL_THREADS`` when set."""
    available = os.cpu_count() or 1
    raw = os.environ.get(THREADS_ENV)
    if raw is None or raw == "":
        return available
    try:
        cap = int(raw)
    except ValueError:
        cap = 0
    if cap < 1:
        raise ConfigError(f"{THREADS_ENV} must be a positive integer, got {raw!r}")
    return min(available, cap)


def _load_config(args: argparse.Namespace) -> RunConfig:
    return load_run_config(args.config)


def _load_data(args: argparse.Namespace, config: RunConfig | None = None) -> Dataset:
    if args.data is not None:
        return read_dataset(args.data)
    if config is None:
        raise ConfigError("--data is required")
    logger.info("no --data given; generating the configured dataset in memory")
    return build_dataset(config.dataset_config(), workers=worker_count())


def checkpoint_dir(path: str | Path) -> Path:
    """Accept a checkpoint directory or a stage output directory holding one."""
    p = Path(path)
    return p / BEST_DIR if (p / BEST_DIR).is_dir() else p


def _load_bundle(path: str | Path) -> tuple[ModelBundle, dict[str, Any]]:
    return ModelBundle.load(checkpoint_dir(path))


def _role(args: argparse.Namespace, header: dict[str, Any]) -> Role:
    """The --role flag, else the role recorded in the checkpoint header."""
    if args.role:
        return Role(args.role)
    kind = header.get("kind", Role.STUDENT.value)
    try:
        return Role(kind)
    except ValueError:
        raise CheckpointError(f"checkpoint header has unknown kind {kind!r}") from None


def _print_report(report: MetricsReport) -> None:
    print(
        f"{report.split} ({report.role}, {report.count} samples): "
        f"Acc30 {report.acc30:.4f}  MedErr {report.mederr:.2f}°"
    )
    for row in report.categories:
        print(f"  {row.category:<10} n={row.count:<5} Acc30 {row.acc30:.4f}  MedErr {row.mederr:.2f}°")


# ── Verbs ─────────────────────────────────────────────────────────────────────


def cmd_generate(args: argparse.Namespace) -> int:
    config = _load_config(args)
    summary = generate_dataset(config.dataset_config(), args.out, workers=worker_count())
    config.snapshot(args.out)
    print(f"wrote {summary.count} samples to {summary.path}")
    for name, count in summary.per_category.items():
        print(f"  {name:<10} {count}")
    print(f"train {summary.train}  val {summary.val}  crc32 {summary.crc32:08x}")
    return 0


def cmd_train(args: argparse.Namespace) -> int:
    config = _load_config(args)
    dataset = _load_data(args, config)
    train = config.train_config()
    encoder = config.encoder_config()
    out = Path(args.out)
    config.snapshot(out)

    result: TrainResult
    if args.stage == "teacher":
        strategy = Strategy(args.strategy or Strategy.TEACHER)
        result = train_stage1_teacher(
            dataset,
            train,
            encoder,
            strategy=strategy,
            out_dir=out,
            resume=args.resume,
            config_hash=config.hash,
        )
    else:
        strategy = Strategy(args.strategy or Strategy.THREE_D_AUG)
        teacher = _load_bundle(args.teacher_ckpt)[0] if args.teacher_ckpt else None
        result = train_stage2_student(
            dataset,
            train,
            strategy,
            teacher=teacher,
            encoder=encoder,
            out_dir=out,
            resume=args.resume,
            config_hash=config.hash,
        )

    best = "n/a" if result.best_acc30 is None else f"{result.best_acc30:.4f}"
    print(
        f"stage {result.stage} ({result.strategy.value}): best epoch {result.best_epoch}, "
        f"val Acc30 {best}; checkpoint in {out / BEST_DIR}"
    )
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    ckpt = checkpoint_dir(args.ckpt)
    bundle, header = ModelBundle.load(ckpt)
    dataset = read_dataset(args.data)
    role = _role(args, header)
    report = evaluate(
        bundle,
        dataset,
        args.split,
        role=role,
        strategy=str(header.get("strategy", "")),
        config_hash=str(header.get("config_hash", "")),
    )
    target = Path(args.report) if args.report else ckpt.parent / METRICS_NAME
    path = report.write(target)
    snapshot = ckpt.parent / SNAPSHOT_NAME
    if snapshot.is_file() and snapshot.parent != path.parent:
        shutil.copyfile(snapshot, path.parent / SNAPSHOT_NAME)
    _print_report(report)
    print(f"report written to {path}")
    return 0


def cmd_ablate(args: argparse.Namespace) -> int:
    config = _load_config(args)
    if args.seeds < 1:
        raise ConfigError(f"--seeds must be >= 1, got {args.seeds}")
    dataset = _load_data(args, config)
    out = Path(args.out)
    config.snapshot(out)
    spec = default_ablation_spec(config, seeds=range(args.seeds))
    table = run_ablation(spec, dataset, config, out, workers=worker_count())
    print(f"{'configuration':<16} {'Acc30 med':>9} {'MedErr med':>10}")
    for name in table.configurations():
        agg = table.aggregate(name)
        print(f"{name:<16} {agg['acc30_median']:>9.4f} {agg['mederr_median']:>10.2f}")
    print(f"tables written to {out / ABLATION_CSV} and {out / SUMMARY_CSV}")
    return 0


def cmd_fewshot(args: argparse.Namespace) -> int:
    config = _load_config(args)
    dataset = _load_data(args, config)
    out = Path(args.out)
    config.snapshot(out)
    teacher = _load_bundle(args.teacher_ckpt)[0] if args.teacher_ckpt else None
    outcome = run_fewshot(
        dataset,
        config.train_config(),
        config.encoder_config(),
        strategy=args.strategy or Strategy.THREE_D_AUG,
        teacher=teacher,
        out_dir=out,
        config_hash=config.hash,
    )
    for name, report in (("zero_shot", outcome.zero_shot), ("few_shot", outcome.few_shot)):
        report.write(out / name / METRICS_NAME)
        print(f"{name} (k={outcome.k}):")
        _print_report(report)
    return 0


def cmd_visualize(args: argparse.Namespace) -> int:
    ckpt = checkpoint_dir(args.ckpt)
    bundle, header = ModelBundle.load(ckpt)
    dataset = read_dataset(args.data)
    role = _role(args, header)
    written = visualize(
        bundle, dataset, args.n, args.out, indices=dataset.indices(args.split), role=role
    )
    print(f"wrote {len(written)} files to {args.out}")
    return 0


# ── Parser ────────────────────────────────────────────────────────────────────


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="posedistill",
        description="3D-augmented contrastive distillation for object pose estimation.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)
    strategies = [s.value for s in Strategy]

    gen = sub.add_parser("generate", help="generate a synthetic dataset")
    gen.add_argument("--config", type=Path, default=None)
    gen.add_argument("--out", type=Path, required=True)
    gen.set_defaults(func=cmd_generate)

    tr = sub.add_parser("train", help="train the teacher (stage 1) or a student (stage 2)")
    tr.add_argument("--stage", choices=_STAGES, required=True)
    tr.add_argument("--strategy", choices=strategies, default=None)
    tr.add_argument("--data", type=Path, default=None)
    tr.add_argument("--config", type=Path, default=None)
    tr.add_argument("--teacher-ckpt", type=Path, default=None)
    tr.add_argument("--out", type=Path, required=True)
    tr.add_argument("--resume", action="store_true", help="continue from <out>/last")
    tr.set_defaults(func=cmd_train)

    ev = sub.add_parser("eval", help="score a checkpoint on a dataset split")
    ev.add_argument("--ckpt", type=Path, required=True)
    ev.add_argument("--data", type=Path, required=True)
    ev.add_argument("--split", choices=_SPLITS, default="val")
    ev.add_argument("--role", choices=[r.value for r in Role], default=None)
    ev.add_argument("--report", type=Path, default=None)
    ev.set_defaults(func=cmd_eval)

    ab = sub.add_parser("ablate", help="run every strategy and ablation over several seeds")
    ab.add_argument("--config", type=Path, default=None)
    ab.add_argument("--data", type=Path, default=None)
    ab.add_argument("--seeds", type=int, default=5)
    ab.add_argument("--out", type=Path, required=True)
    ab.set_defaults(func=cmd_ablate)

    fs = sub.add_parser("fewshot", help="zero-shot and k-shot scores on unseen categories")
    fs.add_argument("--config", type=Path, default=None)
    fs.add_argument("--data", type=Path, default=None)
    fs.add_argument("--strategy", choices=strategies, default=None)
    fs.add_argument("--teacher-ckpt", type=Path, default=None)
    fs.add_argument("--out", type=Path, required=True)
    fs.set_defaults(func=cmd_fewshot)

    vis = sub.add_parser("visualize", help="write input/gt/pred renders as PGM files")
    vis.add_argument("--ckpt", type=Path, required=True)
    vis.add_argument("--data", type=Path, required=True)
    vis.add_argument("--n", type=int, default=8)
    vis.add_argument("--split", choices=_SPLITS, default="val")
    vis.add_argument("--role", choices=[r.value for r in Role], default=None)
    vis.add_argument("--out", type=Path, required=True)
    vis.set_defaults(func=cmd_visualize)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    try:
        return int(args.func(args))
    except PosedistillError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except EmptyEvaluationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return ConfigError.exit_code


if __name__ == "__main__":
    sys.exit(main())
