"""Command-line entry point: ``complexkg <command> [flags]``.

Every command writes a key/value run manifest next to its outputs; the
``replay`` command re-executes a run from its manifest.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np
from scipy.special import expit

from . import __version__
from .data import (Vocabulary, as_triple_array, generate_synthetic, load_tsv, positive_set,
                   sniff_has_labels, write_folds, write_tsv, DatasetSplit)
from .evaluation import (FilterIndex, ranking_metrics, render_table, render_tsv,
                         triple_average_precision)
from .experiments import model_kind
from .models import score_objects, score_subjects
from .params import load_params, save_params
from .spectral import (NotNormalError, RankExceededError, block_tensor_decomposition,
                       commutator_residual, diagonalize_normal, is_normal, lift_to_normal,
                       principal_components, rank_bounded_decomposition, read_matrix, write_matrix)
from .training import TrainConfig, train

log = logging.getLogger("complexkg")

MODEL_FILE = "model.bin"
VOCAB_FILE = "vocab.json"


class CommandError(Exception):
    """Failure reported to the user with exit status 2."""


def sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


class Manifest:
    def __init__(self, command, argv):
        self.command = command
        self.argv = list(argv)
        self.entries = {}
        self.inputs = {}
        self.outputs = []
        self.start = time.perf_counter()

    def add_input(self, path):
        if path is not None:
            self.inputs[str(path)] = sha256(path)

    def add_output(self, path):
        self.outputs.append(str(path))

    def write(self, path):
        lines = [
            f"command = {self.command}",
            f"version = {__version__}",
            f"argv = {json.dumps(self.argv)}",
        ]
        lines += [f"{k} = {json.dumps(v, sort_keys=True, default=str)}" for k, v in self.entries.items()]
        lines += [f"input.{p} = sha256:{digest}" for p, digest in self.inputs.items()]
        lines.append(f"outputs = {json.dumps(self.outputs)}")
        lines.append(f"wall_clock_seconds = {time.perf_counter() - self.start:.3f}")
        Path(path).write_text("\n".join(lines) + "\n")


def read_manifest(path) -> dict:
    out = {}
    for line in Path(path).read_text().splitlines():
        if " = " in line:
            key, value = line.split(" = ", 1)
            out[key] = value
    return out


def _manifest_path(args, default_dir=None):
    if getattr(args, "manifest", None):
        return Path(args.manifest)
    if default_dir is not None:
        return Path(default_dir) / "manifest.txt"
    if getattr(args, "out", None):
        return Path(str(args.out) + ".manifest.txt")
    return Path(f"complexkg-{args.command}.manifest.txt")


def _load_model(model_path, vocab_path=None):
    model_path = Path(model_path)
    if model_path.is_dir():
        model_path = model_path / MODEL_FILE
    vocab_path = Path(vocab_path) if vocab_path else model_path.parent / VOCAB_FILE
    params = load_params(model_path)
    vocab = Vocabulary.from_dict(json.loads(vocab_path.read_text()))
    if (vocab.n_entities, vocab.n_relations) != (params.n, params.m):
        raise CommandError(
            f"vocabulary has {vocab.n_entities} entities / {vocab.n_relations} relations but the "
            f"model was built for n={params.n}, m={params.m}")
    return params, vocab, model_path, vocab_path


# --------------------------------------------------------------------- train

def cmd_train(args, manifest):
    if args.margin is not None and args.loss != "max-margin":
        raise CommandError("--margin requires --loss max-margin")
    if args.norm is not None and args.model != "transe":
        raise CommandError("--norm only applies to --model transe")
    labeled = sniff_has_labels(args.train)
    train_set, vocab = load_tsv(args.train, has_labels=labeled)
    valid_set, vocab = load_tsv(args.valid, has_labels=sniff_has_labels(args.valid), vocab=vocab)
    test_set = np.zeros((0, 4), dtype=np.int64)
    if args.test:
        test_set, vocab = load_tsv(args.test, has_labels=sniff_has_labels(args.test), vocab=vocab)
    split = DatasetSplit(train_set, valid_set, test_set, vocab)
    margin = args.margin
    model = model_kind(args.model, p=args.norm,
                       margin=margin if args.model == "transe" else None)
    config = TrainConfig(alpha=args.lr, l2=args.l2, eta=args.neg_ratio, batch_count=args.batches,
                         max_iter=args.max_iter, validate_every=args.validate_every, seed=args.seed,
                         loss=args.loss, margin=margin)
    for path in (args.train, args.valid, args.test):
        manifest.add_input(path)
    manifest.entries.update(model=str(model), rank=args.rank, config=config.__dict__, seed=args.seed)
    params, report = train(split, model, args.rank, config)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_params(params, out / MODEL_FILE)
    (out / VOCAB_FILE).write_text(json.dumps(vocab.to_dict()))
    (out / "train_report.json").write_text(json.dumps(report.__dict__, indent=2))
    for name in (MODEL_FILE, VOCAB_FILE, "train_report.json"):
        manifest.add_output(out / name)
    print(f"trained {model} K={args.rank}: {report.epochs_run} epochs, stop={report.stop_reason}, "
          f"best {report.metric}={report.best_score} at epoch {report.best_epoch}")
    return 0


# ---------------------------------------------------------------------- eval

def cmd_eval(args, manifest):
    params, vocab, model_path, vocab_path = _load_model(args.model, args.vocab)
    manifest.add_input(model_path)
    manifest.add_input(args.test)
    try:
        labeled = sniff_has_labels(args.test)
        test_set, _ = load_tsv(args.test, has_labels=labeled, vocab=vocab, frozen=True)
        filters = [load_tsv(f, has_labels=sniff_has_labels(f), vocab=vocab, frozen=True)[0]
                   for f in args.filter or []]
    except KeyError as exc:
        raise CommandError(f"vocabulary mismatch between model and data: {exc.args[0]}") from None
    for f in args.filter or []:
        manifest.add_input(f)
    if labeled and (test_set[:, 3] == -1).any():
        report = triple_average_precision(params, test_set)
        mode = "ap"
    else:
        if not filters:
            log.warning("no filter files given: reporting raw ranks only (filtered == raw)")
            known = set()
        else:
            known = positive_set(test_set, *filters)
        report = ranking_metrics(params, test_set, FilterIndex(known))
        mode = "ranking"
    rows = report.rows(vocab.id_to_relation)
    manifest.entries.update(mode=mode, filtered=bool(args.filter))
    print(render_table(rows))
    if args.out:
        Path(args.out).write_text(render_tsv(rows))
        manifest.add_output(args.out)
    return 0


# ------------------------------------------------------------------- predict

def predict(params, vocab, relation, subject=None, obj=None, top_k=10):
    """Top-k completions of ``relation(subject, ?)`` or ``relation(?, object)``."""
    try:
        r = vocab.relation_to_id[relation]
        if subject is not None:
            scores = score_objects(params, r, vocab.entity_to_id[subject])
        else:
            scores = score_subjects(params, r, vocab.entity_to_id[obj])
    except KeyError as exc:
        raise CommandError(f"unknown name {exc.args[0]!r}") from None
    ids = np.arange(len(scores))
    order = np.lexsort((ids, -scores))[:max(top_k, 0)]
    return [(vocab.id_to_entity[i], float(scores[i]), float(expit(scores[i]))) for i in order]


def cmd_predict(args, manifest):
    if (args.subject is None) == (args.object is None):
        raise CommandError("give exactly one of --subject or --object")
    params, vocab, model_path, _ = _load_model(args.model, args.vocab)
    manifest.add_input(model_path)
    rows = predict(params, vocab, args.relation, args.subject, args.object, args.top_k)
    lines = ["rank\tentity\tscore\tprobability"]
    lines += [f"{i}\t{name}\t{score:.6f}\t{prob:.6f}" for i, (name, score, prob) in enumerate(rows, 1)]
    text = "\n".join(lines) + "\n"
    sys.stdout.write(text)
    if args.out:
        Path(args.out).write_text(text)
        manifest.add_output(args.out)
    return 0


# --------------------------------------------------------------------- synth

def cmd_synth(args, manifest):
    tensor = generate_synthetic(args.n, args.seed, args.folds)
    vocab = tensor.vocabulary()
    triples, folds = tensor.triples()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    files = {"all.tsv": triples, "upper.tsv": triples[folds == tensor.ALWAYS_TRAIN]}
    for i in range(args.folds):
        files[f"fold{i}.tsv"] = triples[folds == i]
    for name, rows in files.items():
        write_tsv(out / name, rows, vocab)
        manifest.add_output(out / name)
    write_folds(out / "all.folds", folds)
    manifest.add_output(out / "all.folds")
    manifest.entries.update(n=args.n, seed=args.seed, folds=args.folds)
    lower = int(np.sum(folds >= 0))
    per_fold = lower // args.folds
    print(f"{len(triples)} observed triples; per split: train {len(files['upper.tsv']) + lower - 2 * per_fold}, "
          f"valid {per_fold}, test {per_fold}")
    return 0


# ------------------------------------------------------------------ spectral

def _check(label, residual, tol, results):
    ok = residual <= tol
    results.append(ok)
    print(f"{'PASS' if ok else 'FAIL'}  {label}: residual {residual:.3e} (tol {tol:.1e})")


def _spectral_inputs(args, rng):
    if args.matrix:
        return [read_matrix(p) for p in args.matrix]
    n = args.random
    count = args.count if args.action == "blocks" else 1
    if args.random_rank is not None:
        return [rng.standard_normal((n, args.random_rank)) @ rng.standard_normal((args.random_rank, n))
                for _ in range(count)]
    return [rng.standard_normal((n, n)) for _ in range(count)]


def cmd_spectral(args, manifest):
    if (args.matrix is None) == (args.random is None):
        raise CommandError("give either --matrix or --random")
    if args.random is not None and args.seed is None:
        raise CommandError("--random requires an explicit --seed")
    for path in args.matrix or []:
        manifest.add_input(path)
    rng = np.random.default_rng(args.seed)
    mats = _spectral_inputs(args, rng)
    for A in mats:
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise CommandError(f"matrix must be square, got shape {A.shape}")
    results = []
    X = mats[0]
    generated = args.random is not None
    try:
        if args.action == "lift":
            Z = lift_to_normal(np.real_if_close(X))
            _check("Re(Z) == X", float(np.max(np.abs(Z.real - X), initial=0.0)), 0.0, results)
            _check("Z normal", commutator_residual(Z) / max(1.0, np.linalg.norm(Z) ** 2), 1e-12, results)
            if args.out:
                write_matrix(args.out, Z)
        elif args.action == "check":
            Z = lift_to_normal(X) if generated else X
            _check("normality ||ZZ*-Z*Z||_F / max(1,||Z||_F^2)",
                   commutator_residual(Z) / max(1.0, np.linalg.norm(Z) ** 2), 1e-12, results)
        elif args.action == "diag":
            Z = lift_to_normal(X) if generated else X
            d = diagonalize_normal(Z)
            scale = max(1.0, np.linalg.norm(Z))
            _check("unitarity ||E*E - I||_inf", d.unitarity_residual(), 1e-8, results)
            _check("reconstruction ||EWE* - Z||_F (relative)",
                   np.linalg.norm(d.reconstruct() - Z) / scale, 1e-8, results)
            if generated:
                _check("Re(EWE*) == X (relative)",
                       np.linalg.norm(d.reconstruct().real - X) / max(1.0, np.linalg.norm(X)), 1e-8, results)
            for w in d.W:
                print(f"  w = {w.real:+.10f} {w.imag:+.10f}i")
        elif args.action == "rank-bound":
            if args.k is None:
                raise CommandError("rank-bound needs --k")
            if np.iscomplexobj(X):
                raise CommandError("rank-bound expects a real matrix")
            d = rank_bounded_decomposition(X, args.k)
            _check(f"columns kept ({d.rank}) <= 2k ({2 * args.k})", max(0, d.rank - 2 * args.k), 0, results)
            _check("Re(EWE*) == X (relative)",
                   np.linalg.norm(d.reconstruct().real - X) / max(1.0, np.linalg.norm(X)), 1e-6, results)
        elif args.action == "blocks":
            if any(np.iscomplexobj(A) for A in mats):
                raise CommandError("blocks expects real matrices")
            dec = block_tensor_decomposition(mats)
            print(f"shared E has {dec.E.shape[1]} columns")
            for i, A in enumerate(mats):
                _check(f"matrix {i}: Re(E L_i E*) == X_i (relative)",
                       np.linalg.norm(dec.reconstruct(i).real - A) / max(1.0, np.linalg.norm(A)), 1e-8, results)
    except (NotNormalError, RankExceededError, ValueError) as exc:
        raise CommandError(f"refused: {exc}") from None
    manifest.entries.update(action=args.action, seed=args.seed, passed=all(results))
    return 0 if all(results) else 1


# ---------------------------------------------------------------- export-pca

def relation_matrix(params) -> np.ndarray:
    if params.model.name == "complex":
        return np.concatenate([params["rel_re"], params["rel_im"]], axis=1)
    if params.model.name == "rescal":
        return params["rel_mat"].reshape(params.m, -1)
    return params["rel_re"]


def cmd_export_pca(args, manifest):
    params, vocab, model_path, _ = _load_model(args.model, args.vocab)
    manifest.add_input(model_path)
    try:
        coords, variances = principal_components(relation_matrix(params), args.components)
    except ValueError as exc:
        raise CommandError(str(exc)) from None
    header = "relation\t" + "\t".join(f"c{i + 1}" for i in range(args.components))
    lines = [header] + [
        vocab.id_to_relation[r] + "\t" + "\t".join(f"{x:.10g}" for x in coords[r])
        for r in range(params.m)]
    Path(args.out).write_text("\n".join(lines) + "\n")
    manifest.add_output(args.out)
    manifest.entries.update(components=args.components, variances=variances.tolist())
    print(f"wrote {params.m} relations x {args.components} components to {args.out}")
    return 0


# -------------------------------------------------------------------- replay

def cmd_replay(args, manifest):
    entries = read_manifest(args.manifest_file)
    argv = json.loads(entries["argv"])
    if argv and argv[0] == "replay":
        raise CommandError("refusing to replay a replay manifest")
    return main(argv)


# -------------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="complexkg", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def with_manifest(p):
        p.add_argument("--manifest", help="where to write the run manifest")
        return p

    p = with_manifest(sub.add_parser("train", help="train an embedding model"))
    p.add_argument("--train", required=True)
    p.add_argument("--valid", required=True)
    p.add_argument("--test", help="registers test names in the vocabulary; not used for training")
    p.add_argument("--model", default="complex", choices=["complex", "distmult", "cp", "transe", "rescal"])
    p.add_argument("--rank", type=int, default=200)
    p.add_argument("--lr", type=float, default=0.5)
    p.add_argument("--l2", type=float, default=0.0)
    p.add_argument("--neg-ratio", type=int, default=1)
    p.add_argument("--batches", type=int, default=100)
    p.add_argument("--max-iter", type=int, default=1000)
    p.add_argument("--validate-every", type=int, default=50)
    p.add_argument("--loss", default="logistic", choices=["logistic", "max-margin"])
    p.add_argument("--margin", type=float)
    p.add_argument("--norm", type=int, choices=[1, 2], help="TransE norm order (default 2)")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_train)

    p = with_manifest(sub.add_parser("eval", help="ranking metrics or AP on a test file"))
    p.add_argument("--model", required=True)
    p.add_argument("--vocab")
    p.add_argument("--test", required=True)
    p.add_argument("--filter", action="append", help="file of known positives (repeatable)")
    p.add_argument("--out", help="TSV report path")
    p.set_defaults(func=cmd_eval)

    p = with_manifest(sub.add_parser("predict", help="top-k completions with probabilities"))
    p.add_argument("--model", required=True)
    p.add_argument("--vocab")
    p.add_argument("--relation", required=True)
    p.add_argument("--subject")
    p.add_argument("--object")
    p.add_argument("--top-k", type=int, default=10)
    p.add_argument("--out")
    p.set_defaults(func=cmd_predict)

    p = with_manifest(sub.add_parser("synth", help="symmetric/antisymmetric synthetic task"))
    p.add_argument("--n", type=int, default=30)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = with_manifest(sub.add_parser("spectral", help="verify the normal-lift constructions"))
    p.add_argument("--action", required=True, choices=["lift", "check", "diag", "rank-bound", "blocks"])
    p.add_argument("--matrix", nargs="+")
    p.add_argument("--random", type=int, metavar="N")
    p.add_argument("--random-rank", type=int, help="rank of the random matrix (default full)")
    p.add_argument("--count", type=int, default=2, help="number of random matrices for blocks")
    p.add_argument("--seed", type=int)
    p.add_argument("--k", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_spectral)

    p = with_manifest(sub.add_parser("export-pca", help="PCA of the relation embeddings"))
    p.add_argument("--model", required=True)
    p.add_argument("--vocab")
    p.add_argument("--components", type=int, default=2)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_export_pca)

    p = sub.add_parser("replay", help="re-run a command from its manifest")
    p.add_argument("manifest_file")
    p.set_defaults(func=cmd_replay)
    return parser


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    manifest = Manifest(args.command, argv)
    try:
        status = args.func(args, manifest)
    except CommandError as exc:
        print(f"complexkg {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError, KeyError) as exc:
        print(f"complexkg {args.command}: error: {exc}", file=sys.stderr)
        return 2
    if args.command != "replay":
        default_dir = args.out if args.command in ("train", "synth") else None
        manifest.write(_manifest_path(args, default_dir))
    return status


if __name__ == "__main__":
    sys.exit(main())
