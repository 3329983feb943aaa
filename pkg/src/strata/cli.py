"""Command-line entry point.

Every subcommand writes its outputs plus ``manifest.json`` into ``--out``.
Exit status: 0 on success, 1 for invalid input, 2 when the work itself fails.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
from dataclasses import asdict
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Sequence

from strata import __version__

log = logging.getLogger("strata")

MANIFEST = "manifest.json"


class ValidationError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # argparse would exit with status 2
        raise ValidationError(f"{self.prog}: {message}")


# -- helpers ---------------------------------------------------------------------


def _u64(text: str) -> int:
    value = int(text, 0)
    if not 0 <= value < 1 << 64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def _positive(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return value


def _int_list(text: str) -> list[int]:
    try:
        values = [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not values or min(values) < 1:
        raise argparse.ArgumentTypeError("cutoffs must be positive integers")
    return values


def _float_list(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def read_config(path: Path) -> dict[str, str]:
    """Flat ``key = value`` file; ``#`` starts a comment."""
    out: dict[str, str] = {}
    for lineno, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValidationError(f"{path}:{lineno}: expected key=value")
        key, value = (part.strip() for part in line.split("=", 1))
        out[key.replace("-", "_")] = value
    return out


def sha256_file(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def digest_inputs(paths: Sequence[Path]) -> dict[str, str]:
    out = {}
    for p in paths:
        if p.is_dir():
            for f in sorted(q for q in p.rglob("*") if q.is_file()):
                out[str(f)] = sha256_file(f)
        else:
            out[str(p)] = sha256_file(p)
    return out


class Output:
    """Write-once output directory."""

    def __init__(self, root: Path) -> None:
        self.root = root
        self.written: list[str] = []

    def path(self, name: str) -> Path:
        p = self.root / name
        if p.exists():
            raise ValidationError(f"refusing to overwrite {p}")
        self.written.append(name)
        return p

    def check_free(self, names: Sequence[str]) -> None:
        taken = [n for n in names if (self.root / n).exists()]
        if taken:
            raise ValidationError(f"output already exists in {self.root}: {', '.join(taken)}")


def _need(path: Path | None, what: str) -> Path:
    if path is None:
        raise ValidationError(f"missing required input: {what}")
    if not path.exists():
        raise ValidationError(f"{what} not found: {path}")
    return path


def _jobs(args) -> int:
    return args.jobs if args.jobs else (os.cpu_count() or 1)


# -- subcommands -------------------------------------------------------------------
# each writes its outputs and returns a config snapshot for the manifest


def cmd_gen_synth(args, out: Output):
    from strata.corpus import write_methods_jsonl
    from strata.synth import SynthConfig, generate

    cfg = SynthConfig(n_methods=args.n, seed=args.seed, universe_seed=args.universe_seed)
    write_methods_jsonl(generate(cfg, args.split), out.path("methods.jsonl"))
    return asdict(cfg) | {"split": args.split}


def cmd_ingest(args, out: Output):
    from strata.corpus import IngestConfig, IngestReport, ingest_corpus, methods_to_records, write_methods_jsonl

    cfg = IngestConfig(java_glob=args.glob, analyze=True, limit=args.limit)
    report = IngestReport()
    methods = ingest_corpus(args.root, cfg, report)
    write_methods_jsonl(methods_to_records(methods), out.path("methods.jsonl"))
    summary = asdict(report) | {"attackable": sum(m.attackable for m in methods)}
    out.path("ingest.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return asdict(cfg)


def _load_methods(path: Path, analyze: bool = True):
    from strata.corpus import IngestConfig, ingest_corpus

    return ingest_corpus(path, IngestConfig(analyze=analyze))


def cmd_stats(args, out: Output):
    from strata.corpus import compute_stats, write_stats

    write_stats(compute_stats(_load_methods(args.input, analyze=False)), out.path("stats.csv"))
    return {}


def cmd_train(args, out: Output):
    from strata.embedding import save_embeddings
    from strata.surrogate import TrainConfig, save_model, train

    cfg = TrainConfig(dim=args.dim, init_range=args.init_range, learning_rate=args.lr,
                      epochs=args.epochs, threshold=args.threshold, seed=args.seed)
    result = train(_load_methods(args.input, analyze=False), cfg)
    save_model(result.model, out.path("model.txt"))
    save_embeddings(result.pre, out.path("pre.emb"))
    save_embeddings(result.post, out.path("post.emb"))
    _write_log(result.log, out.path("train_log.csv"))
    return asdict(cfg)


def _write_log(rows, path: Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("epoch,loss,train_f1\n")
        for epoch, loss, f1 in rows:
            fh.write(f"{epoch},{loss:.6f},{f1:.4f}\n")


def cmd_drift(args, out: Output):
    from strata.corpus import read_stats
    from strata.embedding import drift, fmt, load_embeddings

    report = drift(load_embeddings(args.pre), load_embeddings(args.post), read_stats(args.stats),
                   args.thresholds or ())
    with open(out.path("drift.csv"), "w", encoding="utf-8", newline="\n") as fh:
        fh.write("subtoken,count,l2_distance,pre_norm,post_norm\n")
        for s, count, dist, pre_n, post_n in report.rows():
            fh.write(f"{s},{count},{fmt(dist)},{fmt(pre_n)},{fmt(post_n)}\n")
    summary = {"fraction_below": {format(k, "g"): v for k, v in sorted(report.fraction_below.items())},
               "subtokens": len(report.per_subtoken)}
    out.path("drift_summary.json").write_text(json.dumps(summary, indent=2) + "\n", encoding="utf-8")
    if args.svg:
        from strata.charts import drift_scatter

        rows = report.rows()
        drift_scatter([r[1] for r in rows], [r[2] for r in rows], out.path("drift.svg"))
    return {"thresholds": args.thresholds}


def _table_and_stats(args):
    from strata.corpus import read_stats
    from strata.embedding import load_embeddings
    from strata.surrogate import load_model

    table = stats = None
    if args.model is not None:
        table = load_model(_need(args.model, "model")).embeddings
    elif args.embeddings is not None:
        table = load_embeddings(_need(args.embeddings, "embeddings"))
    if args.stats is not None:
        stats = read_stats(_need(args.stats, "stats"))
    if args.mode == "l2" and table is None:
        raise ValidationError("--mode l2 needs --model or --embeddings")
    if args.mode == "frequency" and stats is None:
        raise ValidationError("--mode frequency needs --stats")
    if args.mode == "all" and table is None and stats is None:
        raise ValidationError("--mode all needs --model, --embeddings or --stats")
    return table, stats


def cmd_vocab(args, out: Output):
    from strata.vocab import build_vocabulary, write_vocabulary

    if args.mode != "all" and args.n is None:
        raise ValidationError(f"--mode {args.mode} needs --n")
    table, stats = _table_and_stats(args)
    write_vocabulary(build_vocabulary(args.mode, args.n, table=table, stats=stats), out.path("vocab.txt"))
    return {"mode": args.mode, "n": args.n}


def cmd_sweep(args, out: Output):
    from strata.attack import AttackConfig, attack_corpus
    from strata.metrics import evaluate_attack
    from strata.surrogate import load_model
    from strata.vocab import best_cutoff, geometric_grid, sweep_cutoffs, write_sweep

    if args.model is None:
        raise ValidationError("sweep needs --model")
    table, stats = _table_and_stats(args)
    model = load_model(args.model)
    methods = [m for m in _load_methods(_need(args.input, "--in methods")) if m.attackable]
    if not methods:
        raise ValidationError("no attackable methods in evaluation set")
    population = len(stats) if args.mode == "frequency" else len(table)
    n_values = args.n_values or geometric_grid(population)

    def evaluate(vocab):
        records = attack_corpus(methods, AttackConfig("5-same", vocab, args.seed))
        return evaluate_attack(model, methods, records).f1

    rows = sweep_cutoffs(args.mode, n_values, evaluate, table=table, stats=stats, jobs=_jobs(args))
    write_sweep(rows, out.path("sweep.csv"))
    if args.svg:
        from strata.charts import sweep_line

        ok = [r for r in rows if r.f1 is not None]
        sweep_line([r.n for r in ok], [r.f1 for r in ok], args.mode, out.path("sweep.svg"))
    failed = [r for r in rows if r.f1 is None]
    for r in failed:
        log.error("n=%d failed: %s", r.n, r.error)
    if len(failed) == len(rows):
        raise RuntimeError("every sweep point failed")
    log.info("argmin n = %d", best_cutoff(rows))
    return {"mode": args.mode, "n_values": list(n_values)}


def _attack_inputs(args):
    from strata.vocab import read_vocabulary

    vocab = read_vocabulary(_need(args.vocab, "--vocab")) if args.vocab is not None else None
    if vocab is None and getattr(args, "target", None) is None:
        raise ValidationError("untargeted attacks need --vocab")
    methods = _load_methods(_need(args.input, "--in methods"))
    return vocab, methods


def _write_attack(records, report, out: Output, name: str) -> None:
    from strata.attack import write_records

    write_records(records, out.path(name))
    summary = {"records": len(report.records), "skipped": len(report.skipped),
               "errors": [{"id": i, "error": e} for i, e in report.errors]}
    stem = name.rsplit(".", 1)[0]
    out.path(f"{stem}_summary.json").write_text(json.dumps(summary, indent=2) + "\n", encoding="utf-8")


def cmd_attack(args, out: Output):
    from strata.attack import AttackConfig, AttackReport, attack_corpus

    vocab, methods = _attack_inputs(args)
    cfg = AttackConfig(args.strategy, vocab, args.seed, args.target, allow_single_target=args.single_target)
    report = AttackReport()
    records = attack_corpus(methods, cfg, args.per_method, report, jobs=_jobs(args))
    _write_attack(records, report, out, "perturbations.jsonl")
    return {"strategy": cfg.strategy, "target": args.target, "per_method": args.per_method}


def cmd_advgen(args, out: Output):
    from strata.attack import STRATEGIES, AttackConfig, AttackReport, attack_corpus

    vocab, methods = _attack_inputs(args)
    report = AttackReport()
    for strategy in STRATEGIES:
        attack_corpus(methods, AttackConfig(strategy, vocab, args.seed), args.per_method,
                      report, jobs=_jobs(args))
    records = list(report.records)
    _write_attack(records, report, out, "adversarial.jsonl")
    return {"strategies": list(STRATEGIES), "per_method": args.per_method}


def cmd_finetune(args, out: Output):
    from strata.attack import read_records
    from strata.surrogate import finetune_adversarial, load_model, save_model

    model = load_model(_need(args.model, "--model"))
    records = read_records(_need(args.adversarial, "--adv"))
    tuned = finetune_adversarial(model, records, epochs=args.epochs, learning_rate=args.lr, seed=args.seed)
    save_model(tuned, out.path("model.txt"))
    _write_log(tuned.history, out.path("finetune_log.csv"))
    return {"epochs": args.epochs, "lr": args.lr}


def cmd_eval(args, out: Output):
    from strata.attack import read_records
    from strata.metrics import EvalReport, evaluate_attack
    from strata.surrogate import load_model

    model = load_model(_need(args.model, "--model"))
    methods = _load_methods(_need(args.input, "--in methods"))
    records = read_records(_need(args.perturbations, "--perturbations"))
    report = evaluate_attack(model, methods, records)
    out.path("report.json").write_text(report.to_json(), encoding="utf-8")
    out.path("report.csv").write_text(EvalReport.CSV_HEADER + "\n" + report.csv_row() + "\n", encoding="utf-8")
    return {}


# -- parser ------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--out", type=Path, required=True, help="output directory")
    common.add_argument("--seed", type=_u64, default=0)
    common.add_argument("--config", type=Path, help="key=value defaults file")
    common.add_argument("--jobs", type=_positive, default=None, help="worker cap (default: all cores)")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = _Parser(prog="strata", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"strata {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name: str, func: Callable, help: str) -> argparse.ArgumentParser:
        p = sub.add_parser(name, parents=[common], help=help)
        p.set_defaults(func=func)
        return p

    p = add("gen-synth", cmd_gen_synth, "generate a synthetic methods file")
    p.add_argument("--n", type=_positive, default=2000)
    p.add_argument("--split", default="train")
    p.add_argument("--universe-seed", type=_u64, default=2021)

    p = add("ingest", cmd_ingest, "extract methods from Java sources or JSONL")
    p.add_argument("--in", dest="root", type=Path, required=True)
    p.add_argument("--glob", default="**/*.java")
    p.add_argument("--limit", type=_positive)

    p = add("stats", cmd_stats, "subtoken counts")
    p.add_argument("--in", dest="input", type=Path, required=True)

    p = add("train", cmd_train, "train the surrogate model")
    p.add_argument("--in", dest="input", type=Path, required=True)
    p.add_argument("--dim", type=_positive, default=64)
    p.add_argument("--epochs", type=int, default=10)
    p.add_argument("--lr", type=float, default=0.05)
    p.add_argument("--init-range", type=float, default=0.1)
    p.add_argument("--threshold", type=float, default=0.5)

    p = add("drift", cmd_drift, "embedding drift between two snapshots")
    p.add_argument("--pre", type=Path, required=True)
    p.add_argument("--post", type=Path, required=True)
    p.add_argument("--stats", type=Path, required=True)
    p.add_argument("--thresholds", type=_float_list)
    p.add_argument("--svg", action="store_true")

    for name, func, help in (("vocab", cmd_vocab, "build an attack vocabulary"),
                             ("sweep", cmd_sweep, "F1 across vocabulary cutoffs")):
        p = add(name, func, help)
        p.add_argument("--mode", choices=["all", "l2", "frequency"], required=True)
        p.add_argument("--model", type=Path)
        p.add_argument("--embeddings", type=Path)
        p.add_argument("--stats", type=Path)
        if name == "vocab":
            p.add_argument("--n", type=_positive)
        else:
            p.add_argument("--n", dest="n_values", type=_int_list)
            p.add_argument("--in", dest="input", type=Path, required=True)
            p.add_argument("--svg", action="store_true")

    p = add("attack", cmd_attack, "rename one local variable per method")
    p.add_argument("--in", dest="input", type=Path, required=True)
    p.add_argument("--strategy", choices=["single", "5diff", "5same"], default="5same")
    p.add_argument("--vocab", type=Path)
    p.add_argument("--target")
    p.add_argument("--single-target", action="store_true",
                   help="with --target and --strategy single, use the bare target instead of 5-same")
    p.add_argument("--per-method", type=_positive, default=1)

    p = add("advgen", cmd_advgen, "adversarial training set, every strategy")
    p.add_argument("--in", dest="input", type=Path, required=True)
    p.add_argument("--vocab", type=Path, required=True)
    p.add_argument("--per-method", type=_positive, default=5)

    p = add("finetune", cmd_finetune, "fine-tune a model on adversarial examples")
    p.add_argument("--model", type=Path, required=True)
    p.add_argument("--adv", dest="adversarial", type=Path, required=True)
    p.add_argument("--epochs", type=_positive, default=1)
    p.add_argument("--lr", type=float)

    p = add("eval", cmd_eval, "clean and perturbed F1")
    p.add_argument("--model", type=Path, required=True)
    p.add_argument("--in", dest="input", type=Path, required=True)
    p.add_argument("--perturbations", type=Path, required=True)
    return parser


_INPUT_FIELDS = ("root", "input", "pre", "post", "stats", "model", "embeddings", "vocab",
                 "adversarial", "perturbations", "config")


def _with_config(parser: argparse.ArgumentParser, argv: list[str]) -> argparse.Namespace:
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config", type=Path)
    known_args, _ = pre.parse_known_args(argv)
    command = next((a for a in argv if not a.startswith("-")), None)
    subparsers = parser._subparsers._group_actions[0].choices
    if known_args.config is None or command not in subparsers:
        return parser.parse_args(argv)
    if not known_args.config.is_file():
        raise ValidationError(f"config file not found: {known_args.config}")
    values = read_config(known_args.config)
    subparser = subparsers[command]
    # keys may name either the destination or the long option (dashes become underscores)
    by_key: dict[str, argparse.Action] = {}
    for action in subparser._actions:
        by_key[action.dest] = action
        for opt in action.option_strings:
            if opt.startswith("--"):
                by_key[opt[2:].replace("-", "_")] = action
    unknown = sorted(set(values) - set(by_key))
    if unknown:
        raise ValidationError(f"unknown config keys for {command}: {', '.join(unknown)}")
    defaults = {}
    for key, text in values.items():
        action = by_key[key]
        if isinstance(action, argparse._StoreTrueAction):
            defaults[action.dest] = text.lower() in ("1", "true", "yes", "on")
        else:
            defaults[action.dest] = text  # argparse converts string defaults with the action's type
        action.required = False
    subparser.set_defaults(**defaults)
    return parser.parse_args(argv)


def _snapshot(args) -> dict:
    skip = {"func", "verbose", "config", "out", "jobs"}
    return {k: (str(v) if isinstance(v, Path) else v) for k, v in sorted(vars(args).items()) if k not in skip}


def run(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = _with_config(parser, argv)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    out = Output(args.out)
    try:
        inputs = [getattr(args, f) for f in _INPUT_FIELDS if getattr(args, f, None) is not None]
        for p in inputs:
            _need(p, "input")
        out.check_free([MANIFEST])
        args.out.mkdir(parents=True, exist_ok=True)
        digests = digest_inputs(inputs)
        config = args.func(args, out)
    except (ValidationError, FileNotFoundError, FileExistsError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:
        log.debug("runtime failure", exc_info=True)
        print(f"runtime error: {exc}", file=sys.stderr)
        return 2
    manifest = {
        "command": ["strata", *argv],
        "subcommand": args.command,
        "args": _snapshot(args),
        "config": config,
        "seed": args.seed,
        "inputs": digests,
        "outputs": {name: sha256_file(args.out / name) for name in out.written},
        "version": __version__,
        "timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds"),
    }
    (args.out / MANIFEST).write_text(json.dumps(manifest, indent=2, sort_keys=True, default=str) + "\n",
                                     encoding="utf-8")
    return 0


def main() -> int:
    return run()


if __name__ == "__main__":
    raise SystemExit(main())
