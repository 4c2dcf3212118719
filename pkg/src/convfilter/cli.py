"""Command-line pipeline: gen-data, split, train, eval, extract.

Exit codes: 0 success, 1 usage or configuration error, 2 data error,
3 numeric failure.
"""
from __future__ import annotations

import argparse
import contextlib
import json
import logging
import os
import sys

from . import __version__
from .config import ConfigError, RunConfig, dump_config, load_config, parse_taus
from .corpus import CorpusError, compute_stats, parse_corpus, split_corpus, write_corpus
from .extract.dictionary import default_dictionary, load_dictionary
from .extract.labels import EXTRACTION_LABELS, label_map
from .extract.pipeline import MODES, FilterSpec, best_rows, run_extraction, threshold_sweep, write_sweep_csv
from .features import HashedTextEncoder, load_precomputed_embeddings
from .metrics import export_pr_curves, fmt, mean_pr_auc, pr_curve
from .nn.checkpoint import CheckpointError, load_model, save_model
from .nn.gradcheck import NumericError
from .synth import load_profile, synth_generate
from .train import TrainConfig, predict_corpus, prepare_corpus, train

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3
ABLATIONS = {"no-hierarchy": "no_hierarchy", "plain-bilstm": "plain_bilstm", "no-context": "no_context"}
MODEL_FILE = "model.msbl"

log = logging.getLogger("convfilter")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _d(value) -> str:
    return f"(default: {value})"


def _common(p, config=True, threads=True, figures=True):
    if config:
        p.add_argument("--config", default=None, help="ini file with [features] [train] [profile] [filter] "
                                                         "[paths] sections " + _d("none"))
    if threads:
        p.add_argument("--threads", type=int, default=None, help="cap BLAS worker threads, 0 = no cap " + _d(0))
    if figures:
        p.add_argument("--no-figures", action="store_true", help="skip PNG figures " + _d(False))
    p.add_argument("--verbose", action="store_true", help="log progress to stderr " + _d(False))


def _text_flags(p):
    p.add_argument("--dict", default=None, help="concept dictionary TSV " + _d("bundled synthetic dictionary"))
    p.add_argument("--embeddings", default=None,
                   help="precomputed utterance embeddings TSV " + _d("hashed text encoder"))


def build_parser() -> argparse.ArgumentParser:
    tc = TrainConfig()
    parser = _Parser(prog="convfilter", description="Speaker-aware utterance filtering for conversation "
                                                    "concept extraction.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("gen-data", help="generate a seeded synthetic corpus")
    p.add_argument("--out", required=True, help="output corpus JSONL " + _d("required"))
    p.add_argument("--n-convs", type=int, default=300, help="number of conversations " + _d(300))
    p.add_argument("--seed", type=int, default=0, help="generator seed " + _d(0))
    p.add_argument("--profile", default=None,
                   help="built-in profile (desk, full, clean) or ini file with [profile] " + _d("desk"))
    p.add_argument("--decoy-fraction", type=float, default=None,
                   help="share of irrelevant utterances that mention a concept " + _d(0.05))
    p.add_argument("--dict", default=None, help="concept dictionary TSV " + _d("bundled synthetic dictionary"))
    _common(p, threads=False)

    p = sub.add_parser("split", help="seeded train/val/test split of a corpus")
    p.add_argument("--corpus", required=True, help="input corpus JSONL " + _d("required"))
    p.add_argument("--n-val", type=int, required=True, help="validation conversations " + _d("required"))
    p.add_argument("--n-test", type=int, required=True, help="test conversations " + _d("required"))
    p.add_argument("--seed", type=int, default=0, help="split seed " + _d(0))
    p.add_argument("--out-dir", required=True, help="directory for train/val/test.jsonl " + _d("required"))
    _common(p, config=False, threads=False, figures=False)

    p = sub.add_parser("train", help="train the utterance classifier")
    p.add_argument("--corpus", required=True, help="training corpus JSONL " + _d("required"))
    p.add_argument("--val", required=True, help="validation corpus JSONL " + _d("required"))
    p.add_argument("--out", required=True, help="output directory " + _d("required"))
    p.add_argument("--ablate", action="append", choices=sorted(ABLATIONS), default=None,
                   help="ablation switch, repeatable " + _d("none"))
    p.add_argument("--seed", type=int, default=None, help="initialization and shuffling seed " + _d(tc.seed))
    p.add_argument("--lr", type=float, default=None, help="Adam learning rate " + _d(tc.learning_rate))
    p.add_argument("--batch-size", type=int, default=None, help="windows per batch " + _d(tc.batch_size))
    p.add_argument("--window", type=int, default=None, help="utterances per window " + _d(tc.window_len))
    p.add_argument("--beta", type=float, default=None, help="weight of the coarse loss " + _d(tc.beta))
    p.add_argument("--hidden", type=int, default=None, help="LSTM hidden size " + _d(tc.hidden_dim))
    p.add_argument("--epochs", type=int, default=None, help="maximum epochs " + _d(tc.max_epochs))
    p.add_argument("--patience", type=int, default=None, help="early-stopping patience " + _d(tc.patience))
    p.add_argument("--gate", choices=("scalar", "vector"), default=None,
                   help="speaker gate: one logit per role or per dimension " + _d(tc.gate_mode))
    _text_flags(p)
    _common(p)

    p = sub.add_parser("eval", help="PR curves and mean PR-AUC of a trained model")
    p.add_argument("--checkpoint", required=True, help="model checkpoint " + _d("required"))
    p.add_argument("--corpus", required=True, help="evaluation corpus JSONL " + _d("required"))
    p.add_argument("--out", required=True, help="output directory " + _d("required"))
    p.add_argument("--window", type=int, default=None, help="utterances per window " + _d(tc.window_len))
    _text_flags(p)
    _common(p)

    p = sub.add_parser("extract", help="filtered dictionary extraction and threshold sweeps")
    p.add_argument("--corpus", required=True, help="corpus JSONL " + _d("required"))
    p.add_argument("--out", required=True, help="output directory " + _d("required"))
    p.add_argument("--task", choices=sorted(EXTRACTION_LABELS), required=True, help="extraction task " + _d("required"))
    p.add_argument("--checkpoint", default=None, help="model checkpoint, needed by mr and category " + _d("none"))
    p.add_argument("--mode", choices=MODES, default=None, help="utterance filter " + _d("all-text"))
    p.add_argument("--tau", type=float, default=None, help="probability threshold " + _d(0.5))
    p.add_argument("--category", choices=sorted(EXTRACTION_LABELS), default=None,
                   help="category filtered on by category modes " + _d("the task"))
    p.add_argument("--mr-source", choices=("coarse", "union"), default=None,
                   help="relevance score for mr: coarse head or max fine probability " + _d("coarse"))
    p.add_argument("--sweep", action="store_true", help="sweep tau for mr and category modes " + _d(False))
    p.add_argument("--taus", default=None, help="sweep grid, start:stop:step or a comma list " + _d("0:1:0.05"))
    p.add_argument("--window", type=int, default=None, help="utterances per window " + _d(tc.window_len))
    _text_flags(p)
    _common(p)
    return parser


def _dictionary(path):
    if not path:
        return default_dictionary()
    if not os.path.exists(path):
        raise FileNotFoundError(f"dictionary not found: {path}")
    return load_dictionary(path)


def _corpus(path):
    if not os.path.exists(path):
        raise FileNotFoundError(f"corpus not found: {path}")
    return parse_corpus(path, label_map())


def _text_source(cfg: RunConfig, convs):
    if cfg.paths.embeddings:
        emb = load_precomputed_embeddings(cfg.paths.embeddings, convs)
        return emb, cfg.override("features", text_dim=emb.dim)
    return HashedTextEncoder(cfg.features.text_dim), cfg


def _mkdir(path):
    os.makedirs(path, exist_ok=True)
    return path


def cmd_gen_data(args, cfg: RunConfig) -> int:
    profile = load_profile(args.profile) if args.profile else cfg.profile
    if args.decoy_fraction is not None:
        profile = profile.replace(decoy_fraction=args.decoy_fraction)
    if args.n_convs < 1:
        raise UsageError("--n-convs must be >= 1")
    convs = synth_generate(profile, args.n_convs, args.seed, _dictionary(args.dict or cfg.paths.dictionary))
    out_dir = os.path.dirname(os.path.abspath(args.out))
    _mkdir(out_dir)
    write_corpus(convs, args.out)
    stem = os.path.splitext(args.out)[0]
    stats = compute_stats(convs)
    stats.write_csv(stem + ".stats.csv")
    print("metric,value")
    for name, value in stats.rows():
        print(f"{name},{fmt(value) if isinstance(value, float) else value}")
    if cfg.paths.figures:
        from .plotting import plot_length_histogram

        plot_length_histogram(convs, stem + ".lengths.png")
    return EXIT_OK


def cmd_split(args, cfg: RunConfig) -> int:
    convs = _corpus(args.corpus)
    parts = split_corpus(convs, args.n_val, args.n_test, args.seed)
    _mkdir(args.out_dir)
    for name, part in zip(("train", "val", "test"), parts):
        write_corpus(part, os.path.join(args.out_dir, f"{name}.jsonl"))
        print(f"{name},{len(part)}")
    return EXIT_OK


def cmd_train(args, cfg: RunConfig) -> int:
    ablations = {ABLATIONS[a]: True for a in (args.ablate or [])}
    cfg = cfg.override("train", seed=args.seed, learning_rate=args.lr, batch_size=args.batch_size,
                       window_len=args.window, beta=args.beta, hidden_dim=args.hidden, max_epochs=args.epochs,
                       patience=args.patience, gate_mode=args.gate, **ablations)
    dictionary = _dictionary(cfg.paths.dictionary)
    train_convs, val_convs = _corpus(args.corpus), _corpus(args.val)
    if not train_convs or not val_convs:
        raise CorpusError("training and validation corpora must be non-empty")
    source, cfg = _text_source(cfg, train_convs + val_convs)
    fc = cfg.features
    train_in = prepare_corpus(train_convs, fc, source, dictionary)
    val_in = prepare_corpus(val_convs, fc, source, dictionary)
    result = train(train_in, val_in, cfg.train, fc)
    out = _mkdir(args.out)
    save_model(os.path.join(out, MODEL_FILE), result.params, result.config)
    result.report.write_csv(os.path.join(out, "train_report.csv"))
    with open(os.path.join(out, "config.ini"), "w", encoding="utf-8") as fh:
        fh.write(dump_config(cfg))
    if cfg.paths.figures:
        from .plotting import plot_training

        plot_training(result.report, os.path.join(out, "training_curve.png"))
    print(f"best_epoch,{result.report.best_epoch}")
    print(f"best_val_auc,{fmt(result.report.best_val_auc)}")
    return EXIT_OK


def _predictions(checkpoint, convs, cfg: RunConfig, dictionary, window):
    params, mcfg = load_model(checkpoint)
    source, cfg = _text_source(cfg, convs)
    if cfg.paths.embeddings and mcfg.feature.text_dim != cfg.features.text_dim:
        raise CheckpointError(f"checkpoint expects {mcfg.feature.text_dim}-dim text vectors, "
                              f"embeddings have {cfg.features.text_dim}")
    if not cfg.paths.embeddings:
        source = HashedTextEncoder(mcfg.feature.text_dim)
    inputs = prepare_corpus(convs, mcfg.feature, source, dictionary)
    return predict_corpus(params, mcfg, inputs, window or cfg.train.window_len, cfg.train.batch_size), inputs


def cmd_eval(args, cfg: RunConfig) -> int:
    import numpy as np

    dictionary = _dictionary(args.dict or cfg.paths.dictionary)
    convs = _corpus(args.corpus)
    preds, inputs = _predictions(args.checkpoint, convs, cfg, dictionary, args.window)
    probs = np.concatenate([p for p, _ in preds])
    gold = np.concatenate([x.targets for x in inputs])
    out = _mkdir(args.out)
    written = export_pr_curves(probs, gold, out)
    auc = mean_pr_auc(probs, gold)
    if cfg.paths.figures and written:
        from .plotting import plot_pr_curves

        j = {name: k for k, name in enumerate(("SYM", "MED", "COM"))}
        curves = {name: pr_curve(probs[:, j[name]], gold[:, j[name]]) for name in written}
        plot_pr_curves(curves, os.path.join(out, "pr_curves.png"))
    print(f"mean_pr_auc,{fmt(auc)}")
    return EXIT_OK


def _write_scores(path, rows):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("task,mode,tau,micro_f1,macro_f1\n")
        for task, mode, tau, score in rows:
            fh.write(f"{task},{mode},{fmt(tau)},{fmt(score.micro_f1)},{fmt(score.macro_f1)}\n")


def cmd_extract(args, cfg: RunConfig) -> int:
    cfg = cfg.override("filter", mode=args.mode, tau=args.tau, category=args.category,
                       mr_source=args.mr_source, taus=args.taus)
    dictionary = _dictionary(args.dict or cfg.paths.dictionary)
    convs = _corpus(args.corpus)
    task = args.task
    fcfg = cfg.filter
    needs_model = args.sweep or fcfg.mode in ("mr", "category")
    if needs_model and not args.checkpoint:
        raise UsageError(f"--checkpoint is required for {'--sweep' if args.sweep else '--mode ' + fcfg.mode}")
    preds = None
    if args.checkpoint:
        preds, _ = _predictions(args.checkpoint, convs, cfg, dictionary, args.window)
    out = _mkdir(args.out)

    if args.sweep:
        taus = parse_taus(fcfg.taus)
        rows = threshold_sweep(convs, preds, dictionary, task, taus, mr_source=fcfg.mr_source)
        write_sweep_csv(rows, os.path.join(out, "sweep.csv"))
        _, base = run_extraction(convs, FilterSpec("all-text"), dictionary, task)
        best = best_rows(rows)
        with open(os.path.join(out, "sweep_best.csv"), "w", encoding="utf-8", newline="\n") as fh:
            fh.write("mode,tau,micro_f1,macro_f1\n")
            fh.write(f"all-text,,{fmt(base.micro_f1)},{fmt(base.macro_f1)}\n")
            for mode, r in best.items():
                fh.write(f"{mode},{fmt(r.tau)},{fmt(r.score.micro_f1)},{fmt(r.score.macro_f1)}\n")
        if cfg.paths.figures:
            from .plotting import plot_sweep

            plot_sweep(rows, os.path.join(out, "sweep.png"), base.micro_f1)
        print(f"all-text micro_f1 {fmt(base.micro_f1)}")
        for mode, r in best.items():
            print(f"best {mode} tau {fmt(r.tau)} micro_f1 {fmt(r.score.micro_f1)} macro_f1 {fmt(r.score.macro_f1)}")
        return EXIT_OK

    category = fcfg.category or task
    spec = FilterSpec(fcfg.mode, fcfg.tau, category if "category" in fcfg.mode else None, fcfg.mr_source)
    rows, score = run_extraction(convs, spec, dictionary, task, preds)
    with open(os.path.join(out, "predictions.jsonl"), "w", encoding="utf-8", newline="\n") as fh:
        for conv, (kept, found) in zip(convs, rows):
            rec = {"id": conv.id, "task": task, "kept": kept,
                   "labels": [lab for lab in EXTRACTION_LABELS[task] if lab in found]}
            fh.write(json.dumps(rec, separators=(",", ":")) + "\n")
    _write_scores(os.path.join(out, "scores.csv"), [(task, fcfg.mode, fcfg.tau, score)])
    print(f"micro_f1,{fmt(score.micro_f1)}")
    print(f"macro_f1,{fmt(score.macro_f1)}")
    return EXIT_OK


COMMANDS = {"gen-data": cmd_gen_data, "split": cmd_split, "train": cmd_train, "eval": cmd_eval,
            "extract": cmd_extract}


def _thread_limit(n):
    if not n:
        return contextlib.nullcontext()
    from threadpoolctl import threadpool_limits

    return threadpool_limits(limits=n)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(getattr(args, "config", None))
        if getattr(args, "no_figures", False):
            cfg = cfg.override("paths", figures=False)
        cfg = cfg.override("paths", dictionary=getattr(args, "dict", None),
                           embeddings=getattr(args, "embeddings", None), threads=getattr(args, "threads", None))
        with _thread_limit(cfg.paths.threads):
            return COMMANDS[args.command](args, cfg)
    except (UsageError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (CorpusError, CheckpointError, OSError, KeyError, ValueError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"data error: {msg}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
