"""Command line entry point: ``swrnli <command> [options]``.

Every command accepts ``--config FILE`` (INI), repeated ``--set section.key=value``
overrides and ``--seed``; explicit flags win over both.  Relative input paths
that do not exist are looked up under ``$SWRNLI_DATA_DIR``.  Each run writes a
JSON manifest next to its output.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
from pathlib import Path

from . import __version__
from .ablation import ablation_suite, ablation_table, ablation_tsv, align, read_ablation_tsv
from .checkpoint import load_model, load_nli, load_parser, save_nli, save_parser
from .config import apply_overrides, config_hash, estimator_kwargs, load_config
from .data import load_conllu, load_nli_jsonl, resolve_label_set, write_conllu, write_nli_jsonl
from .exceptions import SwrnliError
from .nli.estimator import ESTIMATORS, evaluate_accuracy
from .parser import BiaffineParser
from .parser.metrics import corpus_attachment_scores
from .probes import (DEFAULT_LEXICON, Lexicon, evaluate_probes, generate_probes, read_probe_tsv,
                     read_probes, summarize_table, write_probes)
from .search import DEFAULT_TRIALS, SPACES, Range, random_search, trials_tsv
from .synthetic import make_order_task, make_treebank

DATA_DIR_ENV = "SWRNLI_DATA_DIR"
logger = logging.getLogger("swrnli")


class UsageError(Exception):
    """Bad invocation that argparse itself cannot detect; exits with status 2."""


def git_blob_hash(path) -> str:
    data = Path(path).read_bytes()
    return hashlib.sha1(b"blob %d\0" % len(data) + data).hexdigest()


def resolve_input(path: str) -> Path:
    p = Path(path)
    if p.exists():
        return p
    root = os.environ.get(DATA_DIR_ENV)
    if root and not p.is_absolute() and (Path(root) / p).exists():
        return Path(root) / p
    where = f" (also looked in ${DATA_DIR_ENV}={root})" if root else ""
    raise FileNotFoundError(f"input not found: {path}{where}")


class Run:
    """Resolved configuration, input hashes and the manifest for one invocation."""

    def __init__(self, args):
        self.args = args
        config = {}
        if args.config:
            if not Path(args.config).is_file():
                raise UsageError(f"config file not found: {args.config}")
            config = load_config(args.config)
        self.config = apply_overrides(config, args.set or [])
        run = self.config.get("run", {})
        self.seed = args.seed if args.seed is not None else int(run.get("seed", 0))
        self.inputs: dict[str, str] = {}
        self.outputs: dict[str, str] = {}

    def section(self, name: str) -> dict:
        return dict(self.config.get(name, {}))

    def input(self, path: str) -> Path:
        resolved = resolve_input(path)
        if resolved.is_file():
            self.inputs[str(path)] = git_blob_hash(resolved)
        return resolved

    def output(self, path) -> Path:
        p = Path(path)
        p.parent.mkdir(parents=True, exist_ok=True)
        return p

    def finish(self, outputs=()) -> None:
        for path in outputs:
            self.outputs[str(path)] = git_blob_hash(path)
        target = self.args.manifest
        if target is None:
            anchor = getattr(self.args, "out", None)
            target = f"{anchor}.manifest.json" if anchor else f"{self.args.command}.manifest.json"
        manifest = {"command": self.args.command, "version": __version__, "seed": self.seed,
                    "config": self.config, "config_hash": config_hash(self.config),
                    "inputs": self.inputs, "outputs": self.outputs}
        self.output(target).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


# -- commands ----------------------------------------------------------------------------

def cmd_synth(run: Run) -> None:
    a = run.args
    if a.kind == "treebank":
        out = run.output(a.out)
        write_conllu(make_treebank(a.n, seed=run.seed), out)
        run.finish([out])
        return
    task = make_order_task(a.n, seed=run.seed)
    out_dir = Path(a.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    files = []
    for split, examples in task.items():
        files.append(out_dir / f"{split}.jsonl")
        write_nli_jsonl(examples, files[-1])
    run.finish(files)


def cmd_train_parser(run: Run) -> None:
    a = run.args
    kwargs = estimator_kwargs(BiaffineParser, run.section("parser"))
    if a.epochs is not None:
        kwargs["epochs"] = a.epochs
    kwargs["random_state"] = run.seed
    treebank = load_conllu(run.input(a.train))
    parser = BiaffineParser(**kwargs).fit(treebank).freeze()
    print(f"train_uas={parser.history_[-1].get('uas', float('nan')):.4f}")
    if a.dev:
        dev = load_conllu(run.input(a.dev))
        uas, las = corpus_attachment_scores(parser.predict(dev), dev)
        print(f"dev_uas={uas:.4f} dev_las={las:.4f}")
    out = run.output(a.out)
    save_parser(parser, out, {"seed": run.seed})
    run.finish([out])


def _nli_estimator(run: Run, architecture: str | None, parser_path: str | None, fusion=None):
    a = run.args
    common = run.section("nli")
    arch = architecture or common.pop("architecture", "da")
    common.pop("architecture", None)
    if arch not in ESTIMATORS:
        raise UsageError(f"unknown architecture {arch!r}; choose from {sorted(ESTIMATORS)}")
    cls = ESTIMATORS[arch]
    kwargs = estimator_kwargs(cls, {**common, **run.section(arch)})
    if fusion is not None:
        kwargs["fusion"] = fusion
    for flag in ("epochs", "label_set"):
        if getattr(a, flag, None) is not None:
            kwargs[flag] = getattr(a, flag)
    if parser_path:
        kwargs["parser"] = load_parser(run.input(parser_path))
    kwargs["random_state"] = run.seed
    return cls(**kwargs)


def _load_split(run: Run, path, label_set):
    return load_nli_jsonl(run.input(path), resolve_label_set(label_set))


def cmd_train_nli(run: Run) -> None:
    a = run.args
    model = _nli_estimator(run, a.architecture, a.parser, a.fusion)
    train = _load_split(run, a.train, model.label_set)
    dev = _load_split(run, a.dev, model.label_set) if a.dev else None
    model.fit(train, validation_data=dev)
    if dev:
        print(f"dev_accuracy={evaluate_accuracy(model, dev):.4f}")
    out = run.output(a.out)
    save_nli(model, out, {"seed": run.seed})
    run.finish([out])


def cmd_eval(run: Run) -> None:
    a = run.args
    model = load_nli(run.input(a.checkpoint))
    data = _load_split(run, a.data, model.label_set)
    print(f"accuracy={evaluate_accuracy(model, data):.4f}")
    run.finish()


def cmd_ablate(run: Run) -> None:
    a = run.args
    model = _nli_estimator(run, a.architecture, None)
    parser = load_parser(run.input(a.parser))
    splits = [_load_split(run, p, model.label_set) for p in (a.train, a.dev, a.test)]
    reports = ablation_suite(model, *splits, parser=parser, seed=run.seed, dataset=a.dataset)
    out = run.output(a.out)
    out.write_text(ablation_tsv(reports))
    print(ablation_table(reports), end="")
    run.finish([out])


def cmd_search(run: Run) -> None:
    a = run.args
    model = _nli_estimator(run, a.architecture, a.parser, a.fusion)
    settings = run.section("search")
    k = a.k or int(settings.pop("k", DEFAULT_TRIALS[model.architecture]))
    settings.pop("k", None)
    space = SPACES[model.architecture].with_ranges(
        **{name: Range.parse(spec) for name, spec in settings.items()})
    train = _load_split(run, a.train, model.label_set)
    dev = _load_split(run, a.dev, model.label_set)
    test = _load_split(run, a.test, model.label_set) if a.test else None
    result = random_search(model, space, k, train, dev, test, seed=run.seed)
    out = run.output(a.out)
    out.write_text(trials_tsv(result))
    outputs = [out]
    if result.best is None:
        raise SwrnliError(f"all {k} trials failed")
    print(f"best_trial={result.best.index} dev_accuracy={result.best.dev_accuracy:.4f}")
    if a.save_best:
        save_nli(result.best_model, run.output(a.save_best), {"seed": result.best.seed})
        outputs.append(a.save_best)
    run.finish(outputs)


def cmd_probe_gen(run: Run) -> None:
    a = run.args
    lexicon = DEFAULT_LEXICON
    if a.lexicon:
        lexicon = Lexicon.from_json(run.input(a.lexicon))
    n = a.n_per_cell or int(run.section("probes").get("n_per_cell", 500))
    out = run.output(a.out)
    write_probes(generate_probes(lexicon, n, seed=run.seed), out)
    run.finish([out])


def cmd_probe_eval(run: Run) -> None:
    a = run.args
    model = load_model(run.input(a.checkpoint))
    probes = read_probes(run.input(a.probes))
    name = a.name or (model.architecture.upper() + model.fusion_.label)
    report = evaluate_probes(model, probes, name, a.train_data)
    out = run.output(a.out)
    out.write_text(summarize_table([report], "tsv"))
    print(summarize_table([report]), end="")
    run.finish([out])


def cmd_report(run: Run) -> None:
    a = run.args
    ablation_rows, probe_reports = [], []
    for path in a.inputs:
        text = run.input(path).read_text()
        if text.startswith("model\t"):
            ablation_rows.extend(read_ablation_tsv(text))
        else:
            probe_reports.extend(read_probe_tsv(text))
    chunks = []
    if ablation_rows:
        if a.format == "tsv":
            cols = list(ablation_rows[0])
            chunks.append("\n".join(["\t".join(cols)] + ["\t".join(r[c] for c in cols)
                                                         for r in ablation_rows]) + "\n")
        else:
            rows = [("Model", "Dataset", "dev", "test", "vs base", "vs SWR")]
            for r in ablation_rows:
                rows.append((r["model"], r["dataset"], f"{100 * float(r['dev']):.1f}",
                             f"{100 * float(r['test']):.1f}",
                             *(f"({100 * float(r[c]):+.1f})" if r[c] else ""
                               for c in ("delta_vs_baseline", "delta_vs_swr"))))
            chunks.append(align(rows))
    if probe_reports:
        chunks.append(summarize_table(probe_reports, a.format))
    text = "\n".join(chunks)
    if a.out:
        out = run.output(a.out)
        out.write_text(text)
        run.finish([out])
    else:
        run.finish()
    print(text, end="")


# -- argument parsing ------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI configuration file")
    common.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE",
                        help="override one configuration value (repeatable)")
    common.add_argument("--seed", type=int, help="seed for all randomness (default: [run] seed or 0)")
    common.add_argument("--manifest", help="manifest path (default: <out>.manifest.json)")
    common.add_argument("-v", "--verbose", action="store_true")

    top = argparse.ArgumentParser(prog="swrnli", description=__doc__.splitlines()[0])
    top.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = top.add_subparsers(dest="command", required=True, metavar="command")

    def add(name, func, help_text):
        p = sub.add_parser(name, parents=[common], help=help_text)
        p.set_defaults(func=func)
        return p

    p = add("synth", cmd_synth, "write a synthetic treebank or word-order NLI task")
    p.add_argument("--kind", choices=("treebank", "order"), required=True)
    p.add_argument("--n", type=int, required=True, help="sentences (treebank) or pairs (order)")
    p.add_argument("--out", required=True, help="CoNLL-U file, or directory for the task splits")

    p = add("train-parser", cmd_train_parser, "train and freeze a dependency parser")
    p.add_argument("--train", required=True)
    p.add_argument("--dev")
    p.add_argument("--epochs", type=int)
    p.add_argument("--out", required=True)

    def nli_flags(p, fusion=True):
        p.add_argument("--architecture", choices=sorted(ESTIMATORS))
        if fusion:
            p.add_argument("--fusion", choices=("baseline", "lf", "sa", "lf_noise", "sa_noise"))
        p.add_argument("--label-set", dest="label_set")
        p.add_argument("--epochs", type=int)

    p = add("train-nli", cmd_train_nli, "train an NLI classifier")
    nli_flags(p)
    p.add_argument("--parser", help="frozen parser checkpoint")
    p.add_argument("--train", required=True)
    p.add_argument("--dev")
    p.add_argument("--out", required=True)

    p = add("eval", cmd_eval, "accuracy of an NLI checkpoint on a JSONL split")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)

    p = add("ablate", cmd_ablate, "baseline / LF / SA and their noise variants")
    nli_flags(p, fusion=False)
    p.add_argument("--parser", required=True)
    p.add_argument("--train", required=True)
    p.add_argument("--dev", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--dataset", default="data")
    p.add_argument("--out", required=True)

    p = add("search", cmd_search, "random hyperparameter search")
    nli_flags(p)
    p.add_argument("--parser")
    p.add_argument("--train", required=True)
    p.add_argument("--dev", required=True)
    p.add_argument("--test")
    p.add_argument("--k", type=int)
    p.add_argument("--out", required=True)
    p.add_argument("--save-best", dest="save_best")

    p = add("probe-gen", cmd_probe_gen, "generate heuristic probe pairs")
    p.add_argument("--n-per-cell", dest="n_per_cell", type=int)
    p.add_argument("--lexicon", help="JSON lexicon replacing the built-in word lists")
    p.add_argument("--out", required=True)

    p = add("probe-eval", cmd_probe_eval, "score a checkpoint on probe pairs")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--probes", required=True)
    p.add_argument("--name")
    p.add_argument("--train-data", dest="train_data", default="")
    p.add_argument("--out", required=True)

    p = add("report", cmd_report, "render ablation or probe TSVs as tables")
    p.add_argument("inputs", nargs="+")
    p.add_argument("--format", choices=("text", "tsv"), default="text")
    p.add_argument("--out")
    return top


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(Run(args))
    except UsageError as exc:
        print(f"swrnli {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except (SwrnliError, OSError, ValueError, KeyError) as exc:
        msg = str(exc).splitlines()[0] if str(exc) else type(exc).__name__
        print(f"swrnli {args.command}: {type(exc).__name__}: {msg}", file=sys.stderr)
        return 1
    return 0


run_cli = main


if __name__ == "__main__":
    sys.exit(main())
