#!/usr/bin/env python3
"""
Command-line surface for MinusFace: data generation, both training stages,
protection, enrollment and verification, the recovery attacks, ablations,
invariant suites and report aggregation.

Usage:
    python run.py gen-data --ids 10 --per-id 20 --size 32 --seed 7 --out data/
    python run.py train-stage1 --data data/ --out runs/desk
    python run.py protect --image a.png --gen runs/desk/g.mfck --seed 0xDEAD --out a_p.mfrp
    python run.py check-invariants --mapping dct8
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np

from config.config import active_config as Config
from minusface.attack import attack_protected, fixed_seed_experiment, reencode_distance
from minusface.data import SPLIT_DEFENDER_TEST, SPLIT_DEFENDER_TRAIN, generate_toy_dataset, load_dataset, load_image, save_dataset
from minusface.errors import FormatError, InvalidArgumentError, MinusFaceError
from minusface.evaluation import (
    ABLATIONS,
    baseline_evaluation,
    placeholder_generator,
    run_ablation,
    stage1_evaluation,
    stage2_evaluation,
    summarize_logs,
)
from minusface.invariants import PERTURB_SEEDS, SUITES, check_invariants
from minusface.models import AttackConfig, MappingSpec, ProtectorConfig, TrainConfig
from minusface.perturb import derive_seed
from minusface.pipeline import Protector
from minusface.service import ProtectionService
from minusface.storage import (
    load_model,
    read_epoch_logs,
    read_report,
    read_representation,
    save_model,
    write_epoch_logs,
    write_report,
)
from minusface.train import Stage1Result, train_recognizer, train_recovery, train_stage1, train_stage2
from minusface.utils import (
    format_comparison,
    format_invariant_table,
    format_key_values,
    format_summary,
    load_config_file,
    parse_seed,
    recovery_csv,
    recovery_summary,
    split_overrides,
)

logger = logging.getLogger(__name__)

LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'

# argparse dests that map onto config-file keys
CONFIG_FLAGS = (
    "epochs", "batch_size", "lr_initial", "augment_copies", "flip_augment",
    "init_seed", "data_seed", "shuffle_seed",
    "generator_width", "generator_input_skip", "recognizer_width", "embedding_dim",
    "arc_scale", "arc_margin", "margin_type",
    "mapping", "alpha", "beta", "perturbation", "mask_ratio", "feature_subtraction",
    "mode", "fixed_seed", "patience", "attack_epochs", "attack_batch_size", "attack_lr",
    "recovery_width", "seed_base",
)


def configure_logging(level: Optional[str] = None, log_file: Optional[str] = None) -> None:
    """Root logging to stderr and, unless log_file is empty, to a file."""
    log_file = Config.LOG_FILE if log_file is None else log_file
    handlers: List[logging.Handler] = [logging.StreamHandler()]
    if log_file:
        handlers.insert(0, logging.FileHandler(log_file))
    logging.basicConfig(
        level=getattr(logging, (level or Config.LOG_LEVEL).upper()),
        format=LOG_FORMAT,
        handlers=handlers,
    )


# ----------------------------------------------------------------------
# Argument parsing
# ----------------------------------------------------------------------

def _config_parent() -> argparse.ArgumentParser:
    """Shared schedule / pipeline / attacker flags; unset flags fall back to --config, then env."""
    parent = argparse.ArgumentParser(add_help=False)
    group = parent.add_argument_group("configuration")
    group.add_argument("--config", help="flat JSON file of config overrides")
    group.add_argument("--epochs", type=int, help=f"training epochs (default: {Config.EPOCHS})")
    group.add_argument("--batch-size", type=int, help=f"batch size (default: {Config.BATCH_SIZE})")
    group.add_argument("--lr-initial", type=float, help=f"initial learning rate (default: {Config.LR_INITIAL})")
    group.add_argument("--augment-copies", type=int,
                       help=f"protected copies per image in stage 2 (default: {Config.AUGMENT_COPIES})")
    group.add_argument("--no-flip", dest="flip_augment", action="store_const", const=False,
                       help="disable horizontal-flip augmentation (default: on)")
    group.add_argument("--init-seed", type=parse_seed, help=f"weight init seed (default: {Config.INIT_SEED})")
    group.add_argument("--data-seed", type=parse_seed, help=f"batch order seed (default: {Config.DATA_SEED})")
    group.add_argument("--shuffle-seed", type=parse_seed,
                       help=f"stage-2 shuffle seed base (default: {Config.SHUFFLE_SEED})")
    group.add_argument("--generator-width", type=int, help=f"g base width (default: {Config.GENERATOR_WIDTH})")
    group.add_argument("--no-input-skip", dest="generator_input_skip", action="store_const", const=False,
                       help="g(x) = U(x) instead of x + U(x)")
    group.add_argument("--recognizer-width", type=int,
                       help=f"recognizer base width (default: {Config.RECOGNIZER_WIDTH})")
    group.add_argument("--embedding-dim", type=int, help=f"embedding size (default: {Config.EMBEDDING_DIM})")
    group.add_argument("--arc-scale", type=float, help=f"angular-margin scale (default: {Config.ARC_SCALE})")
    group.add_argument("--arc-margin", type=float, help=f"angular margin (default: {Config.ARC_MARGIN})")
    group.add_argument("--margin-type", choices=("arc", "cosine"), help=f"(default: {Config.MARGIN_TYPE})")
    group.add_argument("--mapping", choices=("dct8", "haar2", "dwt"), help="frequency mapping (default: dct8)")
    group.add_argument("--alpha", type=float, help=f"weight of L_gen (default: {Config.ALPHA})")
    group.add_argument("--beta", type=float, help=f"weight of L_fr (default: {Config.BETA})")
    group.add_argument("--perturbation", choices=("shuffle", "mask", "none"), help="(default: shuffle)")
    group.add_argument("--mask-ratio", type=float, help=f"masked channel ratio (default: {Config.MASK_RATIO})")
    group.add_argument("--no-subtraction", dest="feature_subtraction", action="store_const", const=False,
                       help="perturb e(X) directly instead of the residue")
    group.add_argument("--mode", choices=("random", "fixed", "identity"), help="attacker mode (default: random)")
    group.add_argument("--fixed-seed", type=parse_seed, help="seed for fixed-mode attackers")
    group.add_argument("--patience", type=int, help=f"attacker early-stop patience (default: {Config.ATTACK_PATIENCE})")
    group.add_argument("--attack-epochs", type=int, help=f"attacker epochs (default: {Config.ATTACK_EPOCHS})")
    group.add_argument("--attack-batch-size", type=int,
                       help=f"attacker batch size (default: {Config.ATTACK_BATCH_SIZE})")
    group.add_argument("--attack-lr", type=float, help=f"attacker learning rate (default: {Config.ATTACK_LR})")
    group.add_argument("--recovery-width", type=int, help=f"attacker base width (default: {Config.RECOVERY_WIDTH})")
    group.add_argument("--seed-base", type=parse_seed, help="attacker per-sample seed base (default: 3)")
    return parent


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="minusface", description="MinusFace privacy-preserving face toolkit")
    parser.add_argument("--log-level", help=f"logging level (default: {Config.LOG_LEVEL})")
    parser.add_argument("--log-file", help=f"log file, empty to disable (default: {Config.LOG_FILE})")
    sub = parser.add_subparsers(dest="command", metavar="command")
    sub.required = True
    cfg = _config_parent()

    p = sub.add_parser("gen-data", help="generate a synthetic face dataset")
    p.add_argument("--ids", type=int, default=Config.TOY_IDENTITIES,
                   help=f"identities (default: {Config.TOY_IDENTITIES})")
    p.add_argument("--per-id", type=int, default=Config.TOY_PER_IDENTITY,
                   help=f"images per identity (default: {Config.TOY_PER_IDENTITY})")
    p.add_argument("--size", type=int, default=Config.IMAGE_SIZE, help=f"image size (default: {Config.IMAGE_SIZE})")
    p.add_argument("--seed", type=parse_seed, default=Config.DATA_SEED, help=f"(default: {Config.DATA_SEED})")
    p.add_argument("--test-fraction", type=float, default=Config.TEST_FRACTION,
                   help=f"defender images held out per identity (default: {Config.TEST_FRACTION})")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(handler=cmd_gen_data)

    p = sub.add_parser("train-stage1", parents=[cfg], help="jointly train g and f on the residue")
    p.add_argument("--data", required=True, help="dataset directory")
    p.add_argument("--out", required=True, help="run directory (g.mfck, f.mfck, logs, report)")
    p.add_argument("--pairs", type=int, default=Config.VERIFY_PAIRS, help=f"(default: {Config.VERIFY_PAIRS})")
    p.set_defaults(handler=cmd_train_stage1)

    p = sub.add_parser("train-stage2", parents=[cfg], help="train f_p on protective images from a frozen g")
    p.add_argument("--data", required=True)
    p.add_argument("--gen", required=True, help="stage-1 generator checkpoint")
    p.add_argument("--out", required=True, help="run directory (fp.mfck, logs, report)")
    p.add_argument("--baseline", action="store_true", help="also train the unprotected baseline recognizer")
    p.add_argument("--pairs", type=int, default=Config.VERIFY_PAIRS, help=f"(default: {Config.VERIFY_PAIRS})")
    p.set_defaults(handler=cmd_train_stage2)

    p = sub.add_parser("protect", parents=[cfg], help="write the protective representation of one image")
    p.add_argument("--image", required=True, help="PNG or PPM face image")
    p.add_argument("--gen", required=True, help="generator checkpoint")
    p.add_argument("--seed", type=parse_seed, required=True, help="shuffle seed (decimal or 0x-hex)")
    p.add_argument("--out", required=True, help="output .mfrp file")
    p.add_argument("--preview", help="optional clamped 8-bit PNG/PPM of X_p")
    p.set_defaults(handler=cmd_protect)

    p = sub.add_parser("enroll", help="enroll an identity from protective representations")
    p.add_argument("--recognizer", required=True, help="f_p checkpoint")
    p.add_argument("--identity", required=True)
    p.add_argument("--inputs", nargs="+", required=True, help="spatial .mfrp files")
    p.add_argument("--templates", required=True, help="template archive (.npz), updated in place")
    p.set_defaults(handler=cmd_enroll)

    p = sub.add_parser("verify", help="verify a protected probe against an enrolled identity")
    p.add_argument("--recognizer", required=True)
    p.add_argument("--templates", required=True)
    p.add_argument("--identity", required=True)
    p.add_argument("--probe", required=True, help="spatial .mfrp file")
    p.add_argument("--threshold", type=float, default=Config.VERIFY_THRESHOLD,
                   help=f"cosine threshold (default: {Config.VERIFY_THRESHOLD})")
    p.set_defaults(handler=cmd_verify)

    p = sub.add_parser("train-attack", parents=[cfg], help="train a recovery attacker f^-1")
    p.add_argument("--data", required=True)
    p.add_argument("--gen", help="generator checkpoint (not needed in identity mode or with --no-subtraction)")
    p.add_argument("--out", required=True, help="attacker checkpoint (.mfck)")
    p.set_defaults(handler=cmd_train_attack)

    p = sub.add_parser("attack-eval", parents=[cfg], help="score an attacker on defender-test images")
    p.add_argument("--data", required=True)
    p.add_argument("--gen")
    p.add_argument("--attacker", required=True)
    p.add_argument("--seed", type=parse_seed, default=0, help="per-image seed base (default: 0)")
    p.add_argument("--out", required=True, help="report file")
    p.add_argument("--csv", help="per-image SSIM/PSNR CSV")
    p.set_defaults(handler=cmd_attack_eval)

    p = sub.add_parser("fixed-seed-attack", parents=[cfg], help="test a fixed-seed attacker on other seeds")
    p.add_argument("--data", required=True)
    p.add_argument("--gen")
    p.add_argument("--attacker", required=True, help="attacker trained with --mode fixed")
    p.add_argument("--theta", type=parse_seed, required=True)
    p.add_argument("--theta-prime", type=parse_seed, nargs="+", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(handler=cmd_fixed_seed_attack)

    p = sub.add_parser("ablate", parents=[cfg], help="run one ablation variant")
    p.add_argument("--data", required=True)
    p.add_argument("--variant", choices=ABLATIONS, required=True)
    p.add_argument("--stage1", help="run directory with g.mfck and f.mfck to reuse")
    p.add_argument("--attack", action="store_true", help="also train an attacker (no-subtraction, dwt)")
    p.add_argument("--pairs", type=int, default=Config.VERIFY_PAIRS, help=f"(default: {Config.VERIFY_PAIRS})")
    p.add_argument("--out", required=True)
    p.set_defaults(handler=cmd_ablate)

    p = sub.add_parser("check-invariants", help="run the codec / perturb / nn property suites")
    p.add_argument("--mapping", choices=("dct8", "haar2", "dwt"), default="dct8", help="(default: dct8)")
    p.add_argument("--suites", default=",".join(SUITES), help=f"comma-separated (default: {','.join(SUITES)})")
    p.add_argument("--samples", type=int, default=100, help="random images for the codec suite (default: 100)")
    p.add_argument("--seeds", type=int, default=PERTURB_SEEDS,
                   help=f"seeds drawn by the perturb suite (default: {PERTURB_SEEDS})")
    p.add_argument("--out", help="also write the table to this file")
    p.set_defaults(handler=cmd_check_invariants)

    p = sub.add_parser("report", help="aggregate run reports and logs into one summary")
    p.add_argument("--runs", required=True, help="directory searched for *_report.txt and *_log.txt")
    p.add_argument("--out", help="summary file (printed when omitted)")
    p.set_defaults(handler=cmd_report)
    return parser


def resolve_configs(args: argparse.Namespace) -> Tuple[TrainConfig, ProtectorConfig, AttackConfig]:
    """Flags override --config file values, which override environment defaults."""
    file_values = load_config_file(args.config) if getattr(args, "config", None) else {}
    flag_values = {k: getattr(args, k) for k in CONFIG_FLAGS if getattr(args, k, None) is not None}

    merged = [{}, {}, {}]
    for values in (file_values, flag_values):
        for target, part in zip(merged, split_overrides(values)):
            for key, value in part.items():
                if key == "seeds":
                    target["seeds"] = {**target.get("seeds", {}), **value}
                else:
                    target[key] = value
    train, protector, attack = merged
    return (
        TrainConfig.from_config(**train),
        ProtectorConfig.from_config(**protector),
        AttackConfig.from_config(**attack),
    )


# ----------------------------------------------------------------------
# Helpers
# ----------------------------------------------------------------------

def _load_protector(gen_path, protector_cfg: ProtectorConfig, train_cfg: TrainConfig) -> Protector:
    """Protector from a checkpoint; a placeholder g when feature subtraction is off."""
    if gen_path:
        return ProtectionService.from_files(generator_path=gen_path, protector_cfg=protector_cfg).protector
    if protector_cfg.feature_subtraction:
        raise InvalidArgumentError("--gen is required unless --no-subtraction is set")
    return Protector(placeholder_generator(protector_cfg, train_cfg), protector_cfg)


def _load_stage1(directory, dataset, protector_cfg: ProtectorConfig) -> Tuple[Stage1Result, ProtectorConfig]:
    directory = Path(directory)
    g, _, mapping = load_model(directory / "g.mfck")
    f, head, _ = load_model(directory / "f.mfck")
    if head is None:
        raise FormatError(directory / "f.mfck", "stage-1 recognizer has no head")
    if mapping is not None:
        protector_cfg = protector_cfg.model_copy(update={"mapping": mapping})
    classes = np.unique(dataset.arrays(SPLIT_DEFENDER_TRAIN)[1])
    return Stage1Result(g.freeze(), f.freeze(), head, [], classes), protector_cfg


def _emit(text: str, path=None) -> None:
    print(text, end="" if text.endswith("\n") else "\n")
    if path:
        out = Path(path)
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(text, encoding="utf-8")


# ----------------------------------------------------------------------
# Commands
# ----------------------------------------------------------------------

def cmd_gen_data(args) -> int:
    dataset = generate_toy_dataset(args.ids, args.per_id, args.size, args.seed, args.test_fraction)
    manifest = save_dataset(dataset, args.out)
    print(f"{len(dataset)} images, {dataset.identities} identities -> {manifest}")
    return 0


def cmd_train_stage1(args) -> int:
    train_cfg, protector_cfg, _ = resolve_configs(args)
    dataset = load_dataset(args.data)
    out = Path(args.out)
    result = train_stage1(dataset, train_cfg, protector_cfg)
    save_model(out / "g.mfck", result.g, mapping=protector_cfg.mapping)
    save_model(out / "f.mfck", result.f, result.head, mapping=protector_cfg.mapping)
    write_epoch_logs(out / "stage1_log.txt", result.logs)
    metrics = stage1_evaluation(dataset, result, protector_cfg, args.pairs, train_cfg.seeds.data)
    values = {"mapping": protector_cfg.mapping.kind.value, "alpha": protector_cfg.alpha,
              "beta": protector_cfg.beta, **metrics}
    write_report(out / "stage1_report.txt", values)
    print(format_key_values(values, "Stage 1"), end="")
    return 0


def cmd_train_stage2(args) -> int:
    train_cfg, protector_cfg, _ = resolve_configs(args)
    dataset = load_dataset(args.data)
    out = Path(args.out)
    protector = _load_protector(args.gen, protector_cfg, train_cfg)
    result = train_stage2(dataset, protector.g, train_cfg, protector.cfg)
    save_model(out / "fp.mfck", result.model, result.head)
    write_epoch_logs(out / "stage2_log.txt", result.logs)
    values = {"perturbation": protector.cfg.perturbation,
              **stage2_evaluation(dataset, protector, result.model, args.pairs, train_cfg.seeds.data)}
    if args.baseline:
        baseline = train_recognizer(dataset, train_cfg, tag="Baseline")
        write_epoch_logs(out / "baseline_log.txt", baseline.logs)
        base = baseline_evaluation(dataset, baseline.model, n_pairs=args.pairs, seed=train_cfg.seeds.data)
        values.update({f"baseline_{k}": v for k, v in base.items()})
        values["utility_gap"] = base["accuracy"] - values["protected_accuracy"]
    write_report(out / "stage2_report.txt", values)
    print(format_key_values(values, "Stage 2"), end="")
    return 0


def cmd_protect(args) -> int:
    _, protector_cfg, _ = resolve_configs(args)
    service = ProtectionService.from_files(generator_path=args.gen, protector_cfg=protector_cfg)
    image = load_image(args.image)
    size = service.protect_to_file(image, args.seed, args.out, args.preview)
    residue_bytes = service.protector.spec.channels * image.shape[1] * image.shape[2] * 4
    print(f"{args.out}: {size} bytes (a {service.protector.spec.channels}-channel residue would be "
          f"{residue_bytes} bytes)")
    return 0


def _read_protected(path) -> np.ndarray:
    rep = read_representation(path)
    if not rep.spatial:
        raise FormatError(path, "expected a spatial protective representation (3, H, W)")
    return rep.data


def cmd_enroll(args) -> int:
    service = ProtectionService.from_files(recognizer_path=args.recognizer)
    if Path(args.templates).exists():
        service.load_templates(args.templates)
    batch = np.stack([_read_protected(p) for p in args.inputs])
    service.enroll(args.identity, batch)
    service.save_templates(args.templates)
    print(f"enrolled {args.identity!r} from {len(batch)} protected images -> {args.templates}")
    return 0


def cmd_verify(args) -> int:
    service = ProtectionService.from_files(recognizer_path=args.recognizer, threshold=args.threshold)
    service.load_templates(args.templates)
    decision = service.verify(args.identity, _read_protected(args.probe))
    verdict = "MATCH" if decision.match else "NO MATCH"
    print(f"{verdict} identity={decision.identity} score={decision.score:.4f} threshold={decision.threshold:.4f}")
    return 0


def cmd_train_attack(args) -> int:
    train_cfg, protector_cfg, attack_cfg = resolve_configs(args)
    dataset = load_dataset(args.data)
    protector = None
    if attack_cfg.mode != "identity":
        protector = _load_protector(args.gen, protector_cfg, train_cfg)
    result = train_recovery(dataset, protector, attack_cfg)
    out = Path(args.out)
    save_model(out, result.model)
    write_epoch_logs(out.with_name(f"{out.stem}_log.txt"), result.logs)
    print(f"attacker ({attack_cfg.mode}) trained for {len(result.logs)} epochs"
          f"{' (early stop)' if result.stopped_early else ''} -> {out}")
    return 0


def cmd_attack_eval(args) -> int:
    train_cfg, protector_cfg, attack_cfg = resolve_configs(args)
    dataset = load_dataset(args.data)
    images, _ = dataset.arrays(SPLIT_DEFENDER_TEST)
    f_inv, _, _ = load_model(args.attacker)
    protector = None
    if attack_cfg.mode != "identity":
        protector = _load_protector(args.gen, protector_cfg, train_cfg)
    fixed = attack_cfg.fixed_seed if attack_cfg.mode == "fixed" else None
    report = attack_protected(f_inv.freeze(), protector, images, seed_base=args.seed, fixed_seed=fixed)
    values = {"mode": attack_cfg.mode, **recovery_summary(report)}
    if protector is not None:
        seeds = [derive_seed(args.seed, i) for i in range(len(images))]
        values["reencode_distance"] = float(reencode_distance(protector, images, seeds).mean())
    write_report(args.out, values)
    if args.csv:
        _emit(recovery_csv(report), args.csv)
    print(format_key_values(values, "Recovery attack"), end="")
    return 0


def cmd_fixed_seed_attack(args) -> int:
    train_cfg, protector_cfg, _ = resolve_configs(args)
    dataset = load_dataset(args.data)
    images, _ = dataset.arrays(SPLIT_DEFENDER_TEST)
    f_inv, _, _ = load_model(args.attacker)
    protector = _load_protector(args.gen, protector_cfg, train_cfg)
    report = fixed_seed_experiment(f_inv.freeze(), protector, images, args.theta, args.theta_prime)
    values = {
        "theta": report.theta,
        "theta_primes": " ".join(str(t) for t in report.theta_primes),
        **recovery_summary(report.same_seed, "same_"),
        "different_ssim_mean": report.different_seed_mean,
        "same_exceeds_different": report.same_exceeds_different,
    }
    write_report(args.out, values)
    print(format_key_values(values, "Fixed-seed attack"), end="")
    return 0


def cmd_ablate(args) -> int:
    train_cfg, protector_cfg, attack_cfg = resolve_configs(args)
    dataset = load_dataset(args.data)
    stage1 = None
    if args.stage1:
        stage1, protector_cfg = _load_stage1(args.stage1, dataset, protector_cfg)
    metrics = run_ablation(
        args.variant, dataset, train_cfg, protector_cfg,
        stage1=stage1,
        attack_cfg=attack_cfg if args.attack else None,
        n_pairs=args.pairs,
        seed=train_cfg.seeds.data,
    )
    write_report(args.out, metrics)
    print(format_key_values(metrics, f"Ablation {args.variant}"), end="")
    return 0


def cmd_check_invariants(args) -> int:
    suites = [s.strip() for s in args.suites.split(",") if s.strip()]
    results = check_invariants(MappingSpec.parse(args.mapping), suites, args.samples, args.seeds)
    _emit(format_invariant_table(results), args.out)
    return 0 if all(r.passed for r in results) else 1


def cmd_report(args) -> int:
    runs = Path(args.runs)
    if not runs.is_dir():
        raise FormatError(runs, "not a directory")
    reports = {path.relative_to(runs).as_posix(): read_report(path) for path in sorted(runs.rglob("*_report.txt"))}
    sections: Dict[str, Dict[str, object]] = dict(reports)
    for path in sorted(runs.rglob("*_log.txt")):
        sections[path.relative_to(runs).as_posix()] = summarize_logs(read_epoch_logs(path))
    if not sections:
        raise InvalidArgumentError(f"no reports or logs under {runs}")
    comparison = format_comparison(reports)
    _emit((comparison + "\n" if comparison else "") + format_summary(sections), args.out)
    return 0


# ----------------------------------------------------------------------
# Entry point
# ----------------------------------------------------------------------

def run_command(argv: Optional[List[str]] = None) -> int:
    """
    Parse argv and run one subcommand.

    Returns:
        0 on success, 1 on a runtime failure, 2 on a usage error
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)

    configure_logging(args.log_level, args.log_file)
    try:
        return args.handler(args)
    except (MinusFaceError, ValueError, OSError) as e:
        logger.error(f"{args.command} failed: {e}", exc_info=logger.isEnabledFor(logging.DEBUG))
        print(f"error: {e}", file=sys.stderr)
        return 1
    except Exception as e:
        logger.error(f"Unhandled exception in {args.command}: {e}", exc_info=True)
        print(f"error: unexpected failure: {e}", file=sys.stderr)
        return 1


if __name__ == '__main__':
    sys.exit(run_command(sys.argv[1:]))
