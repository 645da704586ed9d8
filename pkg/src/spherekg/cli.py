"""Command line entry point: ``train``, ``eval``, ``query``, ``analyze-radius``."""
from __future__ import annotations

import argparse
import difflib
import logging
import os
import sys
from typing import List, Optional

import numpy as np

from . import checkpoint
from .kg import HEAD_QUERY, TAIL_QUERY, TripleParseError, load_dataset
from .model import ConfigError, ModelConfig, SphereModel
from .retrieval import DEFAULT_LS, evaluate, query_distances, radius_occurrence, sphere_mask, write_metrics_csv
from .training import DivergenceError, fit

DATA_ENV = "SPHEREKG_DATA"

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3

log = logging.getLogger("spherekg")


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def read_config_file(path: str) -> dict:
    """Flat ``key = value`` lines; ``#`` starts a comment."""
    values = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{lineno}: expected key=value")
            key, value = line.split("=", 1)
            values[key.strip()] = value.strip()
    return values


def build_config(args) -> ModelConfig:
    values = read_config_file(args.config) if args.config else {}
    for item in args.set or ():
        if "=" not in item:
            raise UsageError(f"--set expects key=value, got {item!r}")
        key, value = item.split("=", 1)
        values[key.strip()] = value.strip()
    if args.seed is not None:
        values["seed"] = args.seed
    return ModelConfig.from_dict(values).validate()


def parse_modes(mode_args: Optional[List[str]], l_arg: Optional[str]) -> List[Optional[int]]:
    """Translate ``--mode``/``--l`` into an ordered list of modes (``None`` = sphere)."""
    modes: List[Optional[int]] = []

    def add(m):
        if m not in modes:
            modes.append(m)

    tokens = [t.strip() for arg in (mode_args or ()) for t in arg.split(",") if t.strip()]
    in_top = False
    for tok in tokens:
        if tok == "sphere":
            add(None)
            in_top = False
        elif tok == "all":
            add(None)
            for l in DEFAULT_LS:
                add(l)
            in_top = False
        elif tok.startswith("top_l=") or tok.startswith("top-"):
            add(_positive_int(tok.split("=", 1)[1] if "=" in tok else tok[4:]))
            in_top = True
        elif in_top and tok.isdigit():
            add(_positive_int(tok))
        else:
            raise UsageError(f"unknown mode {tok!r}")
    if l_arg:
        for tok in l_arg.split(","):
            add(_positive_int(tok.strip()))
    if not modes:
        add(None)
        for l in DEFAULT_LS:
            add(l)
    return modes


def _positive_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise UsageError(f"expected a positive integer, got {text!r}") from None
    if v < 1:
        raise UsageError(f"l must be >= 1, got {v}")
    return v


def _data_dir(args) -> str:
    data = args.data or os.environ.get(DATA_ENV)
    if not data:
        raise UsageError(f"no data directory: pass --data or set {DATA_ENV}")
    return data


def _load_kg(args):
    try:
        return load_dataset(_data_dir(args))
    except (OSError, TripleParseError) as exc:
        raise DataError(str(exc)) from exc


def _load_checkpoint(path: str, kg):
    try:
        model, header = checkpoint.load(path)
    except (OSError, checkpoint.CheckpointError) as exc:
        raise DataError(f"{path}: {exc}") from exc
    if header["vocab_hash"] != kg.vocab.digest():
        raise DataError(f"{path}: vocabulary hash {header['vocab_hash']} does not match data "
                        f"({kg.vocab.digest()}); was it trained on a different dataset?")
    return model


def _open_out(path: Optional[str]):
    if path in (None, "-"):
        return sys.stdout, False
    return open(path, "w", encoding="utf-8", newline=""), True


def cmd_train(args) -> int:
    config = build_config(args)
    kg = _load_kg(args)
    rng = np.random.default_rng(config.seed)
    model = SphereModel.initialize(config, kg.n_entities, kg.n_relations, rng)
    history = fit(model, kg, config, rng)
    checkpoint.save(args.out, model, kg.vocab.digest())
    log_path = args.log or args.out + ".log.csv"
    with open(log_path, "w", encoding="utf-8", newline="") as fh:
        history.to_csv(fh)
    if history.rows:
        log.info("trained %d steps: loss %.6g -> %.6g", model.step, history.rows[0][1], history.rows[-1][1])
    return EXIT_OK


def cmd_eval(args) -> int:
    modes = parse_modes(args.mode, args.l)
    kg = _load_kg(args)
    model = _load_checkpoint(args.checkpoint, kg)
    head_model = _load_checkpoint(args.head_checkpoint, kg) if args.head_checkpoint else None
    try:
        reports = evaluate(model, kg, modes, head_model=head_model, threads=args.threads)
    except ValueError as exc:
        raise DataError(str(exc)) from exc
    out, close = _open_out(args.out)
    try:
        write_metrics_csv(reports, out)
    finally:
        if close:
            out.close()
    return EXIT_OK


def _resolve(table, name: str, what: str) -> int:
    if name in table:
        return table.id(name)
    close = difflib.get_close_matches(name, table.names, n=5)
    hint = f"; did you mean: {', '.join(close)}" if close else ""
    raise DataError(f"unknown {what} {name!r}{hint}")


def cmd_query(args) -> int:
    kg = _load_kg(args)
    model = _load_checkpoint(args.checkpoint, kg)
    anchor = _resolve(kg.vocab.entities, args.anchor, "entity")
    rel = _resolve(kg.vocab.relations, args.relation, "relation")
    direction = TAIL_QUERY if args.direction == "tail" else HEAD_QUERY
    dists = query_distances(model, direction, [anchor], [rel])[0]
    hits = np.flatnonzero(sphere_mask(model, model.radii[anchor], dists))
    order = hits[np.lexsort((hits, dists[hits]))]
    for e in order:
        sys.stdout.write(kg.vocab.entities.name(int(e)) + "\n")
    return EXIT_OK


def cmd_analyze_radius(args) -> int:
    kg = _load_kg(args)
    model = _load_checkpoint(args.checkpoint, kg)
    stats = radius_occurrence(model, kg)
    out, close = _open_out(args.out)
    try:
        stats.to_csv(out)
    finally:
        if close:
            out.close()
    log.info("spearman(occurrence, radius) = %.4f", stats.spearman)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="spherekg", description="Sphere embeddings for knowledge graph set retrieval.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p, with_threads=True):
        p.add_argument("--data", help=f"directory with train/valid/test files (default ${DATA_ENV})")
        if with_threads:
            p.add_argument("--threads", type=int, default=1)

    p = sub.add_parser("train", help="train a model and write a checkpoint")
    common(p)
    p.add_argument("--config", help="key=value config file")
    p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config value")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True, help="checkpoint path")
    p.add_argument("--log", help="training log CSV (default: <out>.log.csv)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="set-retrieval metrics on the test split")
    p.add_argument("checkpoint")
    common(p)
    p.add_argument("--mode", action="append", help="sphere, all, top_l=1,3,... (repeatable)")
    p.add_argument("--l", help="comma-separated top-l values")
    p.add_argument("--head-checkpoint", help="separate model for head queries")
    p.add_argument("--out", help="metrics CSV (default: stdout)")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("query", help="print the retrieved answer set of one query")
    p.add_argument("checkpoint")
    common(p, with_threads=False)
    p.add_argument("--direction", choices=("tail", "head"), default="tail")
    p.add_argument("--anchor", required=True, help="head name (tail query) or tail name (head query)")
    p.add_argument("--relation", required=True)
    p.set_defaults(func=cmd_query)

    p = sub.add_parser("analyze-radius", help="mean radius per occurrence count")
    p.add_argument("checkpoint")
    common(p, with_threads=False)
    p.add_argument("--out", help="CSV path (default: stdout)")
    p.set_defaults(func=cmd_analyze_radius)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (UsageError, ConfigError) as exc:
        print(f"spherekg: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"spherekg: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (DivergenceError, FloatingPointError) as exc:
        print(f"spherekg: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
