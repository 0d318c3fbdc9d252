"""Command-line entry point: ``promptabsa <command> ...``."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from .core import SubtaskKind
from .dataio import (
    DATA_ROOT_ENV,
    DatasetSplit,
    FewShotSpec,
    dataset_stats,
    few_shot_sample,
    load_bundle,
    load_dataset,
    resolve_path,
    save_jsonl,
)
from .errors import AbsaError

log = logging.getLogger("promptabsa")

EXIT_DATA = 3
EXIT_IO = 4


@dataclass
class RunManifest:
    command: str
    config: dict = field(default_factory=dict)
    datasets: dict = field(default_factory=dict)
    seed: int | None = None
    output_dir: str | None = None
    argv: list = field(default_factory=list)
    started_at: str = field(default_factory=lambda: datetime.now(timezone.utc).isoformat())

    def write(self, directory: Path) -> Path:
        directory.mkdir(parents=True, exist_ok=True)
        path = directory / "manifest.json"
        path.write_text(json.dumps(asdict(self), indent=2, sort_keys=True), encoding="utf-8")
        return path


def _split_from(path, fmt=None, name=None) -> DatasetSplit:
    return load_dataset(path, fmt, name)


def _dataset_arg(args):
    if args.dataset is None:
        root = os.environ.get(DATA_ROOT_ENV)
        if not root:
            raise ValueError(f"--dataset is required (or set ${DATA_ROOT_ENV})")
        return Path(root)
    return resolve_path(args.dataset)


def cmd_import(args) -> int:
    split = load_dataset(args.src, args.format)
    count = save_jsonl(split.sentences, args.dst)
    stats = dataset_stats(split)
    if split.empty_warning:
        print(f"warning: {args.src} holds no sentences", file=sys.stderr)
    print(json.dumps({"written": count, **stats.as_dict()}))
    return 0


def cmd_stats(args) -> int:
    split = load_dataset(_dataset_arg(args), args.format)
    stats = dataset_stats(split)
    if args.json:
        print(json.dumps(stats.as_dict()))
    else:
        for k, v in stats.as_dict().items():
            print(f"{k}={v}")
    return 0


def cmd_fewshot(args) -> int:
    spec = FewShotSpec(args.few_shot, args.seed)
    bundle = load_bundle(_dataset_arg(args))
    out = Path(args.output_dir)
    RunManifest("fewshot", {"fraction": spec.fraction}, {"dataset": str(args.dataset)}, spec.seed, str(out), sys.argv).write(out)
    summary = {}
    for name in ("train", "dev"):
        split = bundle.get(name)
        if split is None:
            continue
        sub = few_shot_sample(split, spec)
        save_jsonl(sub.sentences, out / f"{name}.jsonl")
        summary[name] = len(sub)
    if bundle.get("test") is not None:
        save_jsonl(bundle["test"].sentences, out / "test.jsonl")
    print(json.dumps(summary))
    return 0


def _train_config(args):
    from .training import TrainConfig

    base = TrainConfig.from_file(args.config).to_dict() if args.config else {}
    overrides = {
        "seed": args.seed,
        "template": args.template,
        "beam_size": args.beam_size,
        "subtask": getattr(args, "subtask", None),
    }
    base.update({k: v for k, v in overrides.items() if v is not None})
    if args.ablate_prompt_encoder:
        base["ablate_prompt_encoder"] = True
    return TrainConfig.from_dict(base)


def _load_train_dev(args, config):
    bundle = load_bundle(_dataset_arg(args))
    train, dev = bundle["train"], bundle.get("dev")
    if args.few_shot is not None:
        spec = FewShotSpec(args.few_shot, config.seed)
        train = few_shot_sample(train, spec)
        if dev is not None and len(dev):
            dev = few_shot_sample(dev, spec)
    return train, dev


def _run_training(config, train, dev, out: Path):
    from .training import Trainer

    trainer = Trainer(config, train, dev, out)
    history = trainer.fit()
    summary = {
        "epochs_run": trainer.epoch,
        "best_epoch": trainer.best_epoch,
        "best_dev_f1": trainer.best_f1 if trainer.best_f1 >= 0 else None,
        "final": history[-1].as_dict() if history else None,
    }
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True), encoding="utf-8")
    return summary


def cmd_train(args) -> int:
    config = _train_config(args)
    out = Path(args.output_dir)
    RunManifest(
        "train", config.to_dict(), {"dataset": str(args.dataset), "few_shot": args.few_shot},
        config.seed, str(out), sys.argv,
    ).write(out)
    train, dev = _load_train_dev(args, config)
    summary = _run_training(config, train, dev, out)
    print(json.dumps(summary["final"]))
    return 0


def cmd_sweep(args) -> int:
    base = _train_config(args)
    out = Path(args.output_dir)
    templates = args.templates.split(",")
    RunManifest("sweep", {**base.to_dict(), "templates": templates}, {"dataset": str(args.dataset)}, base.seed, str(out), sys.argv).write(out)
    train, dev = _load_train_dev(args, base)
    results = {}
    for name in templates:
        cfg = type(base).from_dict({**base.to_dict(), "template": name})
        summary = _run_training(cfg, train, dev, out / name)
        results[name] = summary["best_dev_f1"]
    (out / "sweep.json").write_text(json.dumps(results, indent=2, sort_keys=True), encoding="utf-8")
    print(json.dumps(results))
    return 0


def _load_model(path):
    from .model import load_checkpoint
    from .training import TrainConfig

    model, cfg = load_checkpoint(path)
    return model, TrainConfig.from_dict(cfg)


def cmd_predict(args) -> int:
    from .dataio import sentence_to_record
    from .training import predict
    from .training.trainer import default_max_len

    model, config = _load_model(args.checkpoint)
    split = _split_from(_dataset_arg(args), args.format)
    out = Path(args.output_dir)
    RunManifest("predict", config.to_dict(), {"dataset": str(args.dataset), "checkpoint": str(args.checkpoint)}, config.seed, str(out), sys.argv).write(out)
    beam = args.beam_size or config.beam_size
    preds = predict(model, split.sentences, config.subtask, beam, config.max_len or default_max_len(split.sentences))
    with open(out / "predictions.jsonl", "w", encoding="utf-8") as fh:
        for s, p in zip(split.sentences, preds):
            rec = sentence_to_record(s)
            rec["sequence"] = list(p.sequence.indices)
            rec["truncated"] = p.sequence.truncated
            rec["predicted"] = [
                {
                    "aspect": t.aspect.as_list(),
                    "opinion": t.opinion.as_list() if t.opinion else None,
                    "polarity": t.polarity.value if t.polarity else None,
                }
                for t in sorted(p.triplets, key=lambda t: t.sort_key())
            ]
            fh.write(json.dumps(rec) + "\n")
    print(json.dumps({"predicted": len(preds)}))
    return 0


def cmd_evaluate(args) -> int:
    from .evaluation import build_report
    from .training import predict
    from .training.trainer import default_max_len

    model, config = _load_model(args.checkpoint)
    trained = SubtaskKind.parse(config.subtask)
    wanted = [SubtaskKind.parse(s) for s in args.subtasks.split(",")]
    for st in wanted:
        if trained is not SubtaskKind.TRIPLET and st is not trained:
            raise AbsaError(f"a {trained.value} model cannot be scored on {st.value}")
    split = _split_from(_dataset_arg(args), args.format)
    out = Path(args.output_dir)
    RunManifest("evaluate", config.to_dict(), {"dataset": str(args.dataset), "checkpoint": str(args.checkpoint)}, config.seed, str(out), sys.argv).write(out)
    beam = args.beam_size or config.beam_size
    preds = predict(model, split.sentences, trained, beam, config.max_len or default_max_len(split.sentences))
    report = build_report(
        [p.triplets for p in preds], list(split.sentences), wanted,
        [p.sequence for p in preds], [p.diagnostics for p in preds],
        multi=args.multi_triplet, invalid=args.invalid_rates,
    )
    (out / "metrics.json").write_text(report.to_json(), encoding="utf-8")
    (out / "metrics.txt").write_text(report.to_text(), encoding="utf-8")
    print(report.to_text(), end="")
    return 0


def _add_training_flags(p):
    p.add_argument("--config", help="json file with TrainConfig fields")
    p.add_argument("--dataset", help="directory holding train/dev/test files")
    p.add_argument("--seed", type=int)
    p.add_argument("--few-shot", type=float, dest="few_shot")
    p.add_argument("--template")
    p.add_argument("--beam-size", type=int, dest="beam_size")
    p.add_argument("--subtask", choices=[s.value for s in SubtaskKind])
    p.add_argument("--ablate-prompt-encoder", action="store_true", dest="ablate_prompt_encoder")
    p.add_argument("--output-dir", required=True, dest="output_dir")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="promptabsa", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("import", help="convert a dataset file to canonical jsonl")
    p.add_argument("src")
    p.add_argument("dst")
    p.add_argument("--format", choices=["legacy", "jsonl"], default="legacy")
    p.set_defaults(func=cmd_import)

    p = sub.add_parser("stats", help="sentence / triplet / multi-triplet counts")
    p.add_argument("--dataset")
    p.add_argument("--format", choices=["legacy", "jsonl"])
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("fewshot", help="write a seeded few-shot subset of train and dev")
    p.add_argument("--dataset")
    p.add_argument("--few-shot", type=float, default=0.1, dest="few_shot")
    p.add_argument("--seed", type=int, default=544)
    p.add_argument("--output-dir", required=True, dest="output_dir")
    p.set_defaults(func=cmd_fewshot)

    p = sub.add_parser("train", help="joint prompt + generation training")
    _add_training_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("sweep", help="train once per prompt template")
    _add_training_flags(p)
    p.add_argument("--templates", default="auto1,auto2,auto3,manual")
    p.set_defaults(func=cmd_sweep)

    for name, func, helptext in (
        ("predict", cmd_predict, "write predictions for a dataset file"),
        ("evaluate", cmd_evaluate, "score a checkpoint on a dataset file"),
    ):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--checkpoint", required=True)
        p.add_argument("--dataset")
        p.add_argument("--format", choices=["legacy", "jsonl"])
        p.add_argument("--beam-size", type=int, dest="beam_size")
        p.add_argument("--output-dir", required=True, dest="output_dir")
        if name == "evaluate":
            p.add_argument("--subtasks", default="triplet")
            p.add_argument("--multi-triplet", action="store_true", dest="multi_triplet")
            p.add_argument("--invalid-rates", action="store_true", dest="invalid_rates")
        p.set_defaults(func=func)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    if hasattr(args, "output_dir") and args.output_dir:
        Path(args.output_dir).mkdir(parents=True, exist_ok=True)
    try:
        return args.func(args)
    except AbsaError as exc:
        print(f"error[{exc.category}]: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (OSError, ValueError) as exc:
        kind = "io" if isinstance(exc, OSError) else "argument"
        print(f"error[{kind}]: {exc}", file=sys.stderr)
        return EXIT_IO if kind == "io" else EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
