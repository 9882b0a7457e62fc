"""Command-line entry points tying the pipeline together.

Verbs: synth, pretrain, personalize, score, bench, plot. Every command
is reproducible from (config, seed) alone; checkpoints embed the config
snapshot they were generated with. Exit codes: 0 success, 1 usage,
2 data/compatibility, 3 numeric failure.
"""

import argparse
import json
import logging
import os
import sys

import numpy as np

from . import bench as bench_mod
from . import checkpoint as ckpt
from .config import ExperimentConfig, preset
from .errors import (
    CompatibilityError,
    ConfigurationError,
    CorruptionError,
    DomainError,
    ExprAuthError,
    GridError,
    InputError,
    NumericError,
    ShapeError,
    TrainingError,
)
from .schedule import make_linear_schedule
from .scorer import authenticate, fit_decision_rule
from .synthdata import make_pretraining_clips, read_corpus, write_corpus
from .trainer import Dataset, ReferenceSet, personalize, run_pretraining

log = logging.getLogger("exprauth")

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3

_DATA_ERRORS = (ConfigurationError, InputError, ShapeError, DomainError,
                GridError, CorruptionError, CompatibilityError, OSError)
_NUMERIC_ERRORS = (NumericError, TrainingError)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _load_config(args):
    if args.config:
        cfg = ExperimentConfig.load(args.config)
    elif args.preset:
        cfg = preset(args.preset)
    else:
        cfg = ExperimentConfig()
    if args.seed is not None:
        cfg.seed = args.seed
    return cfg


def _setup_logging(out_dir=None):
    handlers = [logging.StreamHandler(sys.stderr)]
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
        handlers.append(logging.FileHandler(os.path.join(out_dir, "run.log")))
    logging.basicConfig(
        level=logging.INFO,
        format="%(asctime)s %(name)s %(levelname)s %(message)s",
        handlers=handlers,
        force=True,
    )


def _schedule(cfg):
    return make_linear_schedule(cfg.schedule.T, cfg.schedule.beta_start,
                                cfg.schedule.beta_end)


def _check_base_config(base_config, cfg, path):
    current = cfg.to_dict()["model"]
    stored = {k: base_config.get(k) for k in current}
    if stored != current:
        raise CompatibilityError(
            f"{path}: checkpoint model config digest "
            f"{ckpt.config_digest(stored)} does not match current config "
            f"digest {ckpt.config_digest(current)}"
        )


def cmd_synth(args):
    cfg = _load_config(args)
    # no run.log inside the corpus: its bytes must be a pure function of
    # the configuration
    _setup_logging()
    _, clips = make_pretraining_clips(
        cfg.synth.num_personas, cfg.synth.clips_per_persona, cfg.model.L,
        audio_dim=cfg.model.audio_dim,
        base_seed=cfg.synth.base_seed + cfg.seed,
        noise_level=cfg.synth.noise_level,
    )
    n = write_corpus(clips, args.out)
    log.info("wrote %d clips to %s", n, args.out)
    return EXIT_OK


def cmd_pretrain(args):
    cfg = _load_config(args)
    _setup_logging(os.path.dirname(args.out) or ".")
    clips = read_corpus(args.corpus)
    dataset = Dataset.from_clips(clips)
    from dataclasses import replace
    train_cfg = replace(cfg.training, seed=cfg.training.seed + cfg.seed)
    model, curve = run_pretraining(dataset, cfg.model, train_cfg, _schedule(cfg))
    ckpt.save_base(model, args.out)
    log.info("saved base checkpoint to %s (final loss %.6f)",
             args.out, curve[-1] if curve else float("nan"))
    return EXIT_OK


def cmd_personalize(args):
    cfg = _load_config(args)
    _setup_logging(os.path.dirname(args.out) or ".")
    base, base_config = ckpt.load_base(args.base)
    _check_base_config(base_config, cfg, args.base)
    clips = [c for c in read_corpus(args.corpus)
             if c.persona_id == args.subject and not c.is_fake]
    if not clips:
        raise InputError(f"no reference clips for subject {args.subject!r}")
    refs = ReferenceSet(subject_id=args.subject, clips=clips,
                        frame_rate=cfg.model.frame_rate)
    from dataclasses import replace
    train_cfg = replace(cfg.training, seed=cfg.training.seed + cfg.seed)
    adapter = personalize(base, refs, train_cfg, _schedule(cfg))
    ckpt.save_adapter(adapter, args.out, base.config)
    log.info("saved adapter checkpoint to %s (%d parameters)",
             args.out, adapter.num_params())
    return EXIT_OK


def cmd_score(args):
    cfg = _load_config(args)
    _setup_logging()
    base, base_config = ckpt.load_base(args.base)
    _check_base_config(base_config, cfg, args.base)
    adapter = ckpt.load_adapter(args.adapter, base.config)
    audio = np.load(args.clip + ".audio.npy")
    expr = np.load(args.clip + ".expr.npy")
    score = authenticate(expr, audio, base, adapter, cfg.scoring,
                         cfg.guidance, _schedule(cfg))
    record = {
        "clip": args.clip,
        "score": score.value,
        "d1": score.denominator_mean,
        "d2": score.numerator_mean,
        "timesteps": score.timesteps,
    }
    payload = json.dumps(record, indent=2, sort_keys=True)
    if args.out:
        with open(args.out, "w") as f:
            f.write(payload + "\n")
    print(payload)
    return EXIT_OK


def cmd_bench(args):
    cfg = _load_config(args)
    _setup_logging(args.out)
    base, base_config = ckpt.load_base(args.base)
    _check_base_config(base_config, cfg, args.base)
    from .synthdata import generate_persona

    bc = cfg.benchmark
    pool = [
        generate_persona(cfg.synth.base_seed + cfg.seed + i,
                         audio_dim=cfg.model.audio_dim,
                         noise_level=cfg.synth.noise_level)
        for i in range(cfg.synth.num_personas)
    ]
    split = bench_mod.make_evaluation_split(
        pool[: bc.num_subjects], pool, cfg.model.L,
        n_ref=bc.ref_clips, n_val=bc.val_clips,
        n_test_real=bc.test_real, n_test_fake=bc.test_fake,
        seed=cfg.seed,
        reference_seconds=bc.reference_seconds or None,
        frame_rate=cfg.model.frame_rate,
    )
    plan = None
    if bc.sweep_kinds:
        plan = {"kinds": list(bc.sweep_kinds),
                "severities": list(bc.sweep_severities),
                "seed": cfg.seed}
    from dataclasses import replace
    train_cfg = replace(cfg.training, seed=cfg.training.seed + cfg.seed)
    scoring = replace(cfg.scoring, seed=cfg.scoring.seed + cfg.seed)
    report, _ = bench_mod.run_benchmark(
        split, base, scoring, cfg.guidance, _schedule(cfg), train_cfg,
        perturbation_plan=plan, out_dir=args.out,
    )
    log.info("benchmark pooled AUC: %s", report.pooled_auc)
    return EXIT_OK


def cmd_plot(args):
    _setup_logging(args.out)
    with open(args.report) as f:
        data = json.load(f)
    report = bench_mod.BenchReport(
        pooled_auc=data["pooled_auc"],
        per_subject_auc=data["per_subject_auc"],
        accuracy=data["accuracy"],
        decision_rules=data["decision_rules"],
        sweep=data["sweep"],
        clip_records=data["clip_records"],
        metadata=data["metadata"],
    )
    os.makedirs(args.out, exist_ok=True)
    bench_mod.plot_report(report, args.out)
    log.info("figures written to %s", args.out)
    return EXIT_OK


def build_parser():
    parser = _Parser(prog="exprauth",
                     description="audio-to-expression diffusion forensics")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, out_required=True, out_help="output path"):
        p.add_argument("--config", help="experiment config JSON")
        p.add_argument("--preset", choices=["paper", "desk"],
                       help="named configuration preset")
        p.add_argument("--seed", type=int, default=None, help="global seed")
        p.add_argument("--out", required=out_required, help=out_help)

    p = sub.add_parser("synth", help="generate the synthetic corpus")
    common(p, out_help="corpus output directory")
    p.set_defaults(fn=cmd_synth)

    p = sub.add_parser("pretrain", help="pre-train the base model")
    common(p, out_help="base checkpoint path")
    p.add_argument("--corpus", required=True, help="corpus directory")
    p.set_defaults(fn=cmd_pretrain)

    p = sub.add_parser("personalize", help="train a subject adapter")
    common(p, out_help="adapter checkpoint path")
    p.add_argument("--base", required=True, help="base checkpoint")
    p.add_argument("--corpus", required=True, help="reference corpus directory")
    p.add_argument("--subject", required=True, help="subject persona id")
    p.set_defaults(fn=cmd_personalize)

    p = sub.add_parser("score", help="score a single clip")
    common(p, out_required=False, out_help="score record JSON path")
    p.add_argument("--base", required=True, help="base checkpoint")
    p.add_argument("--adapter", required=True, help="adapter checkpoint")
    p.add_argument("--clip", required=True,
                   help="clip path prefix ({prefix}.audio.npy / .expr.npy)")
    p.set_defaults(fn=cmd_score)

    p = sub.add_parser("bench", help="run the synthetic benchmark")
    common(p, out_help="report output directory")
    p.add_argument("--base", required=True, help="base checkpoint")
    p.set_defaults(fn=cmd_bench)

    p = sub.add_parser("plot", help="render figures from a report")
    common(p, out_help="figure output directory")
    p.add_argument("--report", required=True, help="report.json path")
    p.set_defaults(fn=cmd_plot)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return e.code if e.code is not None else EXIT_USAGE
    try:
        return args.fn(args)
    except _NUMERIC_ERRORS as e:
        log.error("numeric failure: %s", e)
        return EXIT_NUMERIC
    except _DATA_ERRORS as e:
        log.error("%s", e)
        return EXIT_DATA
    except ExprAuthError as e:
        log.error("%s", e)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
