"""Command-line interface.

Exit status is 0 on success, 1 on bad data (corpus, embeddings, bundle) or a
diverged run, and 2 on usage errors.  All randomness derives from --seed.
"""

from __future__ import annotations

import argparse
import logging
import sys
from typing import List, Optional, Sequence

import numpy as np

from . import __version__
from .bundle import ModelBundle, load_bundle, save_bundle
from .calibration import fit_pav
from .config import Config
from .corpus import Corpus, Sentence, load_conll
from .errors import DataError, NescError, TrainingError, UsageError
from .features import UNKNOWN_POS, EmbeddingTable, tokenize
from .metrics import evaluate_labels, pr_curve, pr_curve_csv
from .ner import predict_labels, tag, train_ner
from .nesc import dataset_windows, nesc_score, score_spans, train_nesc
from .sampling import build_dataset, fit_length_distribution
from .tags import LABELS

log = logging.getLogger("nesc")

# independent generator streams derived from --seed
_EMBED_STREAM, _NER_STREAM, _NESC_STREAM = 1, 2, 3
_VALID_DATA_OFFSET, _TEST_DATA_OFFSET = 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(2, f"{self.prog}: error: {message}\n")


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("global options")
    g.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="random seed (default 0)")
    g.add_argument("--config", default=argparse.SUPPRESS, help="key=value hyperparameter file")
    g.add_argument("--embeddings", default=argparse.SUPPRESS, help="embedding text file")
    g.add_argument("--model", default=argparse.SUPPRESS, help="model bundle path")
    g.add_argument("--k", type=int, default=argparse.SUPPRESS, help="context size for span windows")
    g.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS)
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = _Parser(prog="nesc", description="Entity tagging with span confidence scores.", parents=[common])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="command", parser_class=_Parser)
    sub.required = True

    def add(name, help_):
        return sub.add_parser(name, help=help_, description=help_, parents=[common])

    p = add("validate-data", "check corpus files and print their statistics")
    p.add_argument("files", nargs="+")
    p.add_argument("--no-pos", action="store_true", help="files have two columns (token, label)")

    p = add("train-ner", "train the tagger and write a new bundle to --model")
    p.add_argument("train")
    p.add_argument("--epochs", type=int)
    p.add_argument("--no-pos", action="store_true")

    p = add("tag", "tag sentences and print spans with per-token label probabilities")
    _add_input(p)

    p = add("build-nesc-data", "write span-classifier samples as TSV")
    p.add_argument("corpus")
    p.add_argument("--out", help="output path (default stdout)")
    p.add_argument("--random-negatives", type=int)
    p.add_argument("--no-pos", action="store_true")

    p = add("train-nesc", "train the span classifier head into the bundle at --model")
    p.add_argument("train")
    p.add_argument("--epochs", type=int)
    p.add_argument("--random-negatives", type=int)
    p.add_argument("--no-pos", action="store_true")

    p = add("calibrate", "fit isotonic calibration on a validation corpus")
    p.add_argument("valid")
    p.add_argument("--no-pos", action="store_true")

    p = add("score", "probability that a token span is an entity")
    _add_input(p)
    p.add_argument("--span", nargs=2, type=int, metavar=("START", "END"), required=True,
                   help="inclusive token indices")
    p.add_argument("--sentence", type=int, default=0, help="sentence index within the input")
    p.add_argument("--raw", action="store_true", help="skip calibration")

    p = add("evaluate", "token, untyped-entity and typed-entity precision/recall/F1")
    p.add_argument("test")
    p.add_argument("--no-pos", action="store_true")

    p = add("pr-curve", "precision/recall of the span classifier over a threshold grid")
    p.add_argument("test")
    p.add_argument("--out", help="CSV path (default stdout)")
    p.add_argument("--raw", action="store_true", help="skip calibration")
    p.add_argument("--no-pos", action="store_true")

    p = add("demo", "tag text and score every detected span")
    _add_input(p)
    return parser


def _add_input(p: argparse.ArgumentParser) -> None:
    p.add_argument("input", nargs="?", help="text file, one sentence per line (default stdin)")
    p.add_argument("--text", help="a single sentence given inline")
    p.add_argument("--conll", action="store_true", help="input is a CoNLL file with POS tags")
    p.add_argument("--no-pos", action="store_true")


def _opt(args, name, default=None):
    return getattr(args, name, default)


def _config(args) -> Config:
    cfg = Config.load(args.config) if _opt(args, "config") else Config()
    if _opt(args, "k") is not None:
        cfg = cfg.replace(context_size=args.k)
    if cfg.context_size < 0:
        raise UsageError(f"context size must be non-negative, got {cfg.context_size}")
    return cfg


def _seed(args) -> int:
    return _opt(args, "seed", 0)


def _model_path(args) -> str:
    path = _opt(args, "model")
    if not path:
        raise UsageError(f"{args.command} needs --model")
    return path


def _load(args) -> ModelBundle:
    emb = EmbeddingTable.load(args.embeddings) if _opt(args, "embeddings") else None
    return load_bundle(_model_path(args), emb)


def _sentences(args) -> List[Sentence]:
    if args.conll:
        if not args.input:
            raise UsageError("--conll needs an input file")
        return list(load_conll(args.input, has_pos=not args.no_pos))
    if args.text is not None:
        lines = [args.text]
    elif args.input:
        with open(args.input, encoding="utf-8") as f:
            lines = f.read().splitlines()
    else:
        lines = sys.stdin.read().splitlines()
    out = []
    for line in lines:
        toks = [t.surface for t in tokenize(line)]
        if toks:
            out.append(Sentence(tuple(toks), (UNKNOWN_POS,) * len(toks)))
    return out


def cmd_validate_data(args, out) -> int:
    for path in args.files:
        corpus = load_conll(path, has_pos=not args.no_pos)
        n_tok = sum(len(s) for s in corpus)
        n_ent = sum(len(s.entities) for s in corpus)
        out.write(f"{path}\tsentences={len(corpus)}\ttokens={n_tok}\tentities={n_ent}\n")
    return 0


def cmd_train_ner(args, out) -> int:
    cfg, seed = _config(args), _seed(args)
    path = _model_path(args)
    corpus = load_conll(args.train, has_pos=not args.no_pos)
    if _opt(args, "embeddings"):
        emb = EmbeddingTable.load(args.embeddings, cfg.embedding_dim)
    else:
        emb = EmbeddingTable.random(corpus.vocabulary(), np.random.default_rng([seed, _EMBED_STREAM]),
                                    cfg.embedding_dim)
    model = train_ner(corpus, emb, cfg, np.random.default_rng([seed, _NER_STREAM]), epochs=args.epochs)
    for i, loss in enumerate(model.history, 1):
        out.write(f"epoch {i}\tloss {loss:.6f}\n")
    save_bundle(ModelBundle(cfg, model.params, emb, emb.checksum), path)
    out.write(f"wrote {path}\n")
    return 0


def _prob_table(sentence: Sentence, probs: np.ndarray) -> str:
    width = max(8, *(len(t) + 2 for t in sentence.tokens))
    best = probs.argmax(axis=1)
    lines = ["".ljust(16) + "".join(t.rjust(width) for t in sentence.tokens)]
    for y, name in enumerate(LABELS):
        name = "O-not-an-entity" if name == "O" else name
        cells = [(f"*{p:.3f}" if best[t] == y else f"{p:.3f}").rjust(width) for t, p in enumerate(probs[:, y])]
        lines.append(name.ljust(16) + "".join(cells))
    return "\n".join(lines) + "\n"


def cmd_tag(args, out) -> int:
    bundle = _load(args)
    model = bundle.ner_model()
    for sentence in _sentences(args):
        spans, probs = tag(sentence, model)
        out.write(" ".join(sentence.tokens) + "\n")
        for s in spans:
            out.write(f"  span {s.start}-{s.end}\t{s.type}\t{sentence.text(s)}\n")
        out.write(_prob_table(sentence, probs) + "\n")
    return 0


def cmd_build_nesc_data(args, out) -> int:
    cfg = _config(args)
    corpus = load_conll(args.corpus, has_pos=not args.no_pos)
    neg = cfg.random_negatives_per_sentence if args.random_negatives is None else args.random_negatives
    ds = build_dataset(corpus, neg, _seed(args), cfg.max_attempts, cfg.context_size)
    if args.out:
        ds.write_tsv(args.out)
    else:
        out.write(ds.to_tsv())
    n_pos, n_neg = ds.counts
    log.info("%d positive, %d negative samples; w_pos=%.6f w_neg=%.6f", n_pos, n_neg, ds.w_pos, ds.w_neg)
    return 0


def cmd_train_nesc(args, out) -> int:
    cfg, seed = _config(args), _seed(args)
    bundle = _load(args)
    model = bundle.ner_model()
    corpus = load_conll(args.train, has_pos=not args.no_pos)
    neg = cfg.random_negatives_per_sentence if args.random_negatives is None else args.random_negatives
    dist = fit_length_distribution(corpus)
    ds = build_dataset(corpus, neg, seed, cfg.max_attempts, cfg.context_size, dist)
    n_pos, n_neg = ds.counts
    out.write(f"samples {len(ds)}\tpositive {n_pos}\tnegative {n_neg}\tw_pos {ds.w_pos:.6f}\tw_neg {ds.w_neg:.6f}\n")
    head_cfg = bundle.config.replace(
        nesc_hidden=cfg.nesc_hidden, nesc_epochs=cfg.nesc_epochs, context_size=cfg.context_size,
        lr=cfg.lr, beta1=cfg.beta1, beta2=cfg.beta2, eps=cfg.eps, clip_norm=cfg.clip_norm,
        random_negatives_per_sentence=neg, max_attempts=cfg.max_attempts,
    )
    head = train_nesc(ds, corpus, model, head_cfg, np.random.default_rng([seed, _NESC_STREAM]), args.epochs)
    for i, loss in enumerate(head.history, 1):
        out.write(f"epoch {i}\tloss {loss:.6f}\n")
    bundle.config, bundle.nesc, bundle.length_distribution, bundle.calibrator = head_cfg, head, dist, None
    save_bundle(bundle, args.model)
    out.write(f"wrote {args.model}\n")
    return 0


def _span_scores(bundle: ModelBundle, corpus: Corpus, seed: int):
    if bundle.nesc is None:
        raise UsageError("the bundle has no span classifier; run train-nesc first")
    cfg = bundle.config
    ds = build_dataset(corpus, cfg.random_negatives_per_sentence, seed, cfg.max_attempts,
                       bundle.nesc.context_size, bundle.length_distribution)
    windows = dataset_windows(ds, corpus, bundle.ner_model())
    p = bundle.nesc.tensors()
    scores = np.array([nesc_score(w, p) for w in windows])
    return scores, np.array([s.target for s in ds.samples])


def cmd_calibrate(args, out) -> int:
    bundle = _load(args)
    corpus = load_conll(args.valid, split="validation", has_pos=not args.no_pos)
    scores, labels = _span_scores(bundle, corpus, _seed(args) + _VALID_DATA_OFFSET)
    bundle.calibrator = fit_pav(scores, labels)
    save_bundle(bundle, args.model)
    out.write(f"calibrator fitted on {len(scores)} samples with {len(bundle.calibrator.thresholds)} knots\n")
    out.write(f"wrote {args.model}\n")
    return 0


def cmd_score(args, out) -> int:
    bundle = _load(args)
    if bundle.nesc is None:
        raise UsageError("the bundle has no span classifier; run train-nesc first")
    sentences = _sentences(args)
    if not 0 <= args.sentence < len(sentences):
        raise UsageError(f"sentence index {args.sentence} out of range ({len(sentences)} sentences)")
    sentence = sentences[args.sentence]
    cal = None if args.raw else bundle.calibrator
    i, j = args.span
    p = score_spans(sentence, [(i, j)], bundle.ner_model(), bundle.nesc, cal)[0]
    out.write(f"{' '.join(sentence.tokens[i:j + 1])}\t{p:.6f}\n")
    return 0


def cmd_evaluate(args, out) -> int:
    bundle = _load(args)
    model = bundle.ner_model()
    corpus = load_conll(args.test, split="test", has_pos=not args.no_pos)
    report = evaluate_labels((s.labels for s in corpus), (predict_labels(s, model) for s in corpus))
    out.write(report.format())
    return 0


def cmd_pr_curve(args, out) -> int:
    bundle = _load(args)
    corpus = load_conll(args.test, split="test", has_pos=not args.no_pos)
    scores, labels = _span_scores(bundle, corpus, _seed(args) + _TEST_DATA_OFFSET)
    if bundle.calibrator is not None and not args.raw:
        scores = bundle.calibrator(scores)
    text = pr_curve_csv(pr_curve(scores, labels))
    if args.out:
        with open(args.out, "w", encoding="utf-8") as f:
            f.write(text)
    else:
        out.write(text)
    return 0


def cmd_demo(args, out) -> int:
    bundle = _load(args)
    if bundle.nesc is None:
        raise UsageError("the bundle has no span classifier; run train-nesc first")
    model = bundle.ner_model()
    for sentence in _sentences(args):
        spans, _ = tag(sentence, model)
        probs = score_spans(sentence, spans, model, bundle.nesc, bundle.calibrator)
        pieces, t = [], 0
        for s, p in zip(spans, probs):
            pieces.extend(sentence.tokens[t: s.start])
            pieces.append(f"[{sentence.text(s)}]({s.type.lower()} {p:.3f})")
            t = s.end + 1
        pieces.extend(sentence.tokens[t:])
        out.write(" ".join(pieces) + "\n")
    return 0


COMMANDS = {
    "validate-data": cmd_validate_data, "train-ner": cmd_train_ner, "tag": cmd_tag,
    "build-nesc-data": cmd_build_nesc_data, "train-nesc": cmd_train_nesc, "calibrate": cmd_calibrate,
    "score": cmd_score, "evaluate": cmd_evaluate, "pr-curve": cmd_pr_curve, "demo": cmd_demo,
}


def main(argv: Optional[Sequence[str]] = None, out=None) -> int:
    out = sys.stdout if out is None else out
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if _opt(args, "verbose") else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args, out)
    except UsageError as exc:
        print(f"nesc {args.command}: usage error: {exc}", file=sys.stderr)
        return 2
    except (DataError, TrainingError) as exc:
        print(f"nesc {args.command}: error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"nesc {args.command}: error: {exc}", file=sys.stderr)
        return 1


cli = main

if __name__ == "__main__":
    sys.exit(main())
