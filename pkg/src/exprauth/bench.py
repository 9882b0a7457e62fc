"""Evaluation harness: AUC, feature-level corruption sweeps, and reports.

Scores are oriented so that forged clips are the positive class with
HIGHER values. Video-level AUC is the Mann-Whitney pairwise statistic;
the report carries both the pooled-over-subjects AUC and per-subject
AUCs, plus per-subject accuracy under the mu + k*sigma decision rules.

Corruptions are feature-level analogues of common video perturbations
(the raw pixel-space versions need real footage): additive noise on
expressions or audio, temporal blur, coefficient quantization, and
frame dropout-and-hold, each with a monotone severity schedule that is
recorded in the report.
"""

import csv
import json
import os
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.stats import rankdata

from .errors import ConfigurationError, InputError
from .scorer import authenticate, fit_decision_rule, decide
from .synthdata import Clip, forge_clip, generate_persona, synthesize_clip
from .trainer import ReferenceSet, personalize


def auc(real_scores, fake_scores):
    """Fraction of (real, fake) pairs with fake > real; ties count 0.5."""
    real = np.asarray(real_scores, dtype=np.float64)
    fake = np.asarray(fake_scores, dtype=np.float64)
    if real.size == 0 or fake.size == 0:
        raise InputError("auc requires nonempty real and fake score lists")
    ranks = rankdata(np.concatenate([real, fake]))
    r_fake = ranks[real.size:].sum()
    u = r_fake - fake.size * (fake.size + 1) / 2.0
    return float(u / (real.size * fake.size))


def average_auc(per_dataset):
    """Unweighted mean AUC over datasets."""
    if not per_dataset:
        raise InputError("empty AUC map")
    return float(np.mean(list(per_dataset.values())))


# severity -> noise std as a fraction of the per-channel std
NOISE_LEVELS = (0.01, 0.02, 0.05, 0.1, 0.2)
BLUR_WIDTHS = (3, 5, 7, 9, 11)
QUANT_STEPS = (0.1, 0.2, 0.4, 0.8, 1.6)
DROP_FRACTIONS = (0.05, 0.1, 0.2, 0.3, 0.4)

PERTURB_KINDS = ("expr_noise", "audio_noise", "temporal_blur",
                 "quantize", "frame_dropout")


def _temporal_blur(x, width):
    kernel = np.ones(width) / width
    pad = width // 2
    padded = np.pad(x, ((pad, pad), (0, 0)), mode="edge")
    return np.stack(
        [np.convolve(padded[:, c], kernel, mode="valid") for c in range(x.shape[1])],
        axis=1,
    )


def perturb(clip, kind, severity, rng):
    """Feature-level corruption at severities 0 (identity) through 5."""
    if severity not in range(6):
        raise ConfigurationError(f"severity must be in 0..5, got {severity}")
    if kind not in PERTURB_KINDS:
        raise ConfigurationError(f"unknown perturbation kind {kind!r}")
    if severity == 0:
        return clip
    expr = clip.expressions.copy()
    audio = clip.audio.copy()
    i = severity - 1
    if kind == "expr_noise":
        sigma = NOISE_LEVELS[i] * expr.std(axis=0, keepdims=True)
        expr = expr + sigma * rng.standard_normal(expr.shape)
    elif kind == "audio_noise":
        sigma = NOISE_LEVELS[i] * audio.std(axis=0, keepdims=True)
        audio = audio + sigma * rng.standard_normal(audio.shape)
    elif kind == "temporal_blur":
        expr = _temporal_blur(expr, BLUR_WIDTHS[i])
    elif kind == "quantize":
        step = QUANT_STEPS[i] * np.maximum(expr.std(axis=0, keepdims=True), 1e-8)
        expr = np.round(expr / step) * step
    elif kind == "frame_dropout":
        L = expr.shape[0]
        n_drop = max(1, int(round(DROP_FRACTIONS[i] * L)))
        drop = rng.choice(np.arange(1, L), size=min(n_drop, L - 1), replace=False)
        for l in sorted(drop):
            expr[l] = expr[l - 1]
    return Clip(audio=audio, expressions=expr, clip_id=clip.clip_id,
                persona_id=clip.persona_id, actor_id=clip.actor_id,
                is_fake=clip.is_fake)


@dataclass
class SubjectSplit:
    """Reference, validation, and labeled test clips for one subject."""

    subject_id: str
    references: ReferenceSet
    validation: list   # real clips only
    test: list         # labeled real + fake clips


@dataclass
class EvaluationSplit:
    subjects: list

    def __post_init__(self):
        if not self.subjects:
            raise InputError("evaluation split has no subjects")
        for s in self.subjects:
            ids = {c.clip_id for c in s.references.clips}
            ids_v = {c.clip_id for c in s.validation}
            ids_t = {c.clip_id for c in s.test}
            if ids & ids_v or ids & ids_t or ids_v & ids_t:
                raise InputError(
                    f"reference/validation/test overlap for subject {s.subject_id}"
                )


def make_evaluation_split(subject_personas, actor_pool, L, n_ref=8, n_val=8,
                          n_test_real=8, n_test_fake=8, seed=0,
                          reference_seconds=None, frame_rate=25):
    """Build a synthetic evaluation split.

    Forged test clips reuse each subject's audio content but are rendered
    by actors drawn from the pool. reference_seconds, when given,
    overrides n_ref with the clip count closest to that duration.
    """
    if reference_seconds is not None:
        n_ref = max(1, int(round(reference_seconds * frame_rate / L)))
    rng = np.random.default_rng([seed, 11])
    others = [a for a in actor_pool]
    subjects = []
    audio_seed = 500_000 + 1_000_000 * seed
    for subj in subject_personas:
        refs, val, test = [], [], []
        for _ in range(n_ref):
            refs.append(synthesize_clip(subj, audio_seed, L)); audio_seed += 1
        for _ in range(n_val):
            val.append(synthesize_clip(subj, audio_seed, L)); audio_seed += 1
        for _ in range(n_test_real):
            test.append(synthesize_clip(subj, audio_seed, L)); audio_seed += 1
        actors = [a for a in others if a.persona_id != subj.persona_id]
        for _ in range(n_test_fake):
            actor = actors[rng.integers(len(actors))]
            test.append(forge_clip(subj, actor, audio_seed, L)); audio_seed += 1
        subjects.append(SubjectSplit(
            subject_id=subj.persona_id,
            references=ReferenceSet(subject_id=subj.persona_id, clips=refs,
                                    frame_rate=frame_rate),
            validation=val,
            test=test,
        ))
    return EvaluationSplit(subjects=subjects)


@dataclass
class BenchReport:
    """Aggregated benchmark results plus run metadata."""

    pooled_auc: dict            # criterion -> AUC over all subjects' test clips
    per_subject_auc: dict       # subject -> {criterion -> AUC}
    accuracy: dict              # subject -> {"k=1": acc, "k=2": ..., "k=3": ...}
    decision_rules: dict        # subject -> {"mu": .., "sigma": ..}
    sweep: dict                 # kind -> {severity -> AUC of the ratio score}
    clip_records: list          # per-clip score rows
    metadata: dict

    def to_dict(self):
        return {
            "pooled_auc": self.pooled_auc,
            "per_subject_auc": self.per_subject_auc,
            "accuracy": self.accuracy,
            "decision_rules": self.decision_rules,
            "sweep": self.sweep,
            "clip_records": self.clip_records,
            "metadata": self.metadata,
        }


def _score_clips(clips, base, adapter, scoring_cfg, guidance_cfg, schedule,
                 scorer_fn):
    out = []
    for clip in clips:
        s = scorer_fn(clip, base, adapter, scoring_cfg, guidance_cfg, schedule)
        out.append(s)
    return out


def _default_scorer(clip, base, adapter, scoring_cfg, guidance_cfg, schedule):
    return authenticate(clip.expressions, clip.audio, base, adapter,
                        scoring_cfg, guidance_cfg, schedule)


def run_benchmark(split, base, scoring_cfg, guidance_cfg, schedule,
                  train_cfg, perturbation_plan=None, out_dir=None,
                  scorer_fn=None, personalize_fn=None, temporal_examples=0):
    """Personalize, threshold, score, and aggregate over the split.

    perturbation_plan: optional {"kinds": [...], "severities": [...],
    "seed": int}; each (kind, severity) rescores the test clips after
    corruption and records the ratio-score AUC.
    """
    scorer_fn = scorer_fn or _default_scorer
    personalize_fn = personalize_fn or (
        lambda b, refs, cfg: personalize(b, refs, cfg, schedule)
    )

    adapters = {}
    rules = {}
    per_subject_auc = {}
    accuracy = {}
    clip_records = []
    pooled = {"ratio": {"real": [], "fake": []},
              "d1": {"real": [], "fake": []},
              "d2": {"real": [], "fake": []}}

    for si, subj in enumerate(split.subjects):
        cfg_s = replace(train_cfg, seed=train_cfg.seed + 1000 + si)
        adapter = personalize_fn(base, subj.references, cfg_s)
        adapters[subj.subject_id] = adapter

        val_scores = _score_clips(subj.validation, base, adapter,
                                  scoring_cfg, guidance_cfg, schedule, scorer_fn)
        rule = fit_decision_rule([s.value for s in val_scores], k=2.0)
        rules[subj.subject_id] = rule

        test_scores = _score_clips(subj.test, base, adapter,
                                   scoring_cfg, guidance_cfg, schedule, scorer_fn)
        by_label = {"real": {"ratio": [], "d1": [], "d2": []},
                    "fake": {"ratio": [], "d1": [], "d2": []}}
        for clip, s in zip(subj.test, test_scores):
            label = "fake" if clip.is_fake else "real"
            by_label[label]["ratio"].append(s.value)
            by_label[label]["d1"].append(s.denominator_mean)
            by_label[label]["d2"].append(s.numerator_mean)
            pooled[ "ratio"][label].append(s.value)
            pooled["d1"][label].append(s.denominator_mean)
            pooled["d2"][label].append(s.numerator_mean)
            clip_records.append({
                "subject_id": subj.subject_id,
                "clip_id": clip.clip_id,
                "label": label,
                "ratio": s.value,
                "d1": s.denominator_mean,
                "d2": s.numerator_mean,
            })
        per_subject_auc[subj.subject_id] = {
            crit: auc(by_label["real"][crit], by_label["fake"][crit])
            for crit in ("ratio", "d1", "d2")
        }
        accuracy[subj.subject_id] = {}
        for k in (1.0, 2.0, 3.0):
            rule_k = replace(rule, k=k)
            correct = sum(
                1 for clip, s in zip(subj.test, test_scores)
                if decide(s, rule_k) == ("fake" if clip.is_fake else "real")
            )
            accuracy[subj.subject_id][f"k={int(k)}"] = correct / len(subj.test)

    pooled_auc = {
        crit: auc(pooled[crit]["real"], pooled[crit]["fake"])
        for crit in ("ratio", "d1", "d2")
    }

    sweep = {}
    if perturbation_plan:
        p_rng_seed = perturbation_plan.get("seed", 0)
        for kind in perturbation_plan.get("kinds", []):
            sweep[kind] = {}
            for severity in perturbation_plan.get("severities", range(6)):
                rng = np.random.default_rng([p_rng_seed, severity, 13])
                real, fake = [], []
                for subj in split.subjects:
                    adapter = adapters[subj.subject_id]
                    for clip in subj.test:
                        pc = perturb(clip, kind, severity, rng)
                        s = scorer_fn(pc, base, adapter, scoring_cfg,
                                      guidance_cfg, schedule)
                        (fake if clip.is_fake else real).append(s.value)
                sweep[kind][str(severity)] = auc(real, fake)

    report = BenchReport(
        pooled_auc=pooled_auc,
        per_subject_auc=per_subject_auc,
        accuracy=accuracy,
        decision_rules={
            sid: {"mu": r.mu, "sigma": r.sigma} for sid, r in rules.items()
        },
        sweep=sweep,
        clip_records=clip_records,
        metadata={
            "num_subjects": len(split.subjects),
            "scoring": {
                "t_start": scoring_cfg.t_start,
                "t_end": scoring_cfg.t_end,
                "num_timesteps": scoring_cfg.num_timesteps,
                "noise_count": scoring_cfg.noise_count,
                "seed": scoring_cfg.seed,
            },
            "guidance": {"s_a": guidance_cfg.s_a, "s_c": guidance_cfg.s_c},
            "train_seed": train_cfg.seed,
            "severity_schedules": {
                "noise_levels": list(NOISE_LEVELS),
                "blur_widths": list(BLUR_WIDTHS),
                "quant_steps": list(QUANT_STEPS),
                "drop_fractions": list(DROP_FRACTIONS),
            },
        },
    )
    if out_dir is not None:
        write_report(report, out_dir)
    return report, adapters


def write_report(report, out_dir):
    """report.json, a flat CSV of per-clip scores, and figures."""
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "report.json"), "w") as f:
        json.dump(report.to_dict(), f, indent=2, sort_keys=True)
    with open(os.path.join(out_dir, "scores.csv"), "w", newline="") as f:
        writer = csv.DictWriter(
            f, fieldnames=["subject_id", "clip_id", "label", "ratio", "d1", "d2"]
        )
        writer.writeheader()
        writer.writerows(report.clip_records)
    plot_report(report, out_dir)


def _roc_points(real, fake):
    scores = np.concatenate([real, fake])
    labels = np.concatenate([np.zeros(len(real)), np.ones(len(fake))])
    order = np.argsort(-scores, kind="stable")
    labels = labels[order]
    tpr = np.concatenate([[0.0], np.cumsum(labels) / max(labels.sum(), 1)])
    fpr = np.concatenate([[0.0], np.cumsum(1 - labels) / max((1 - labels).sum(), 1)])
    return fpr, tpr


def plot_report(report, out_dir, temporal_series=None):
    """ROC curve, score histograms, severity curves, optional temporal traces."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    real = [r["ratio"] for r in report.clip_records if r["label"] == "real"]
    fake = [r["ratio"] for r in report.clip_records if r["label"] == "fake"]

    if real and fake:
        fpr, tpr = _roc_points(np.array(real), np.array(fake))
        fig, ax = plt.subplots(figsize=(4, 4))
        ax.plot(fpr, tpr, label=f"ratio (AUC={report.pooled_auc['ratio']:.3f})")
        ax.plot([0, 1], [0, 1], "k--", lw=0.5)
        ax.set_xlabel("false positive rate")
        ax.set_ylabel("true positive rate")
        ax.legend()
        fig.tight_layout()
        fig.savefig(os.path.join(out_dir, "roc.png"))
        plt.close(fig)

        fig, axes = plt.subplots(1, 3, figsize=(10, 3))
        for ax, crit in zip(axes, ("d1", "d2", "ratio")):
            r = [rec[crit] for rec in report.clip_records if rec["label"] == "real"]
            k = [rec[crit] for rec in report.clip_records if rec["label"] == "fake"]
            ax.hist(r, bins=20, alpha=0.6, label="real")
            ax.hist(k, bins=20, alpha=0.6, label="fake")
            ax.set_title(f"{crit} (AUC={report.pooled_auc[crit]:.3f})")
            ax.legend()
        fig.tight_layout()
        fig.savefig(os.path.join(out_dir, "score_hist.png"))
        plt.close(fig)

    if report.sweep:
        fig, ax = plt.subplots(figsize=(5, 3.5))
        for kind, table in report.sweep.items():
            sev = sorted(int(s) for s in table)
            ax.plot(sev, [table[str(s)] for s in sev], marker="o", label=kind)
        ax.set_xlabel("severity")
        ax.set_ylabel("AUC (ratio)")
        ax.set_ylim(0, 1.02)
        ax.legend()
        fig.tight_layout()
        fig.savefig(os.path.join(out_dir, "severity.png"))
        plt.close(fig)

    if temporal_series:
        fig, ax = plt.subplots(figsize=(6, 3))
        for label, series, mean in temporal_series:
            color = "tab:red" if label == "fake" else "tab:blue"
            ax.plot(series, color=color, label=label)
            ax.axhline(mean, color=color, ls=":", lw=1)
        ax.set_xlabel("frame")
        ax.set_ylabel("per-frame ratio")
        ax.legend()
        fig.tight_layout()
        fig.savefig(os.path.join(out_dir, "temporal.png"))
        plt.close(fig)
