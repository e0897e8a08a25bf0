"""Command-line front door: ``tacnet <subcommand> [options]``.

Exit codes: 0 success, 1 usage error, 2 validation or numeric failure.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import checkpoint as ckpt
from .config import TOY_GRADCHECK, TOY_SWAP, TacConfig, read_kv_file
from .errors import ConfigurationError, TacError
from .harness.heatmap import emit_heatmap
from .harness.synthetic import PairSet, SyntheticPairSpec, gen_pairs
from .harness.training import ToyTrainConfig, eval_swap, train_toy
from .nn.params import ParamStore
from .metrics import TemporalKeywordList, corpus_f1, read_pairs_tsv
from .prompts import ReportSections, build_prompt
from .tac import tac_forward, tac_init
from .verify import tac_gradcheck

log = logging.getLogger("tacnet")

EXIT_OK, EXIT_USAGE, EXIT_FAIL = 0, 1, 2

_PAIR_KEYS = {
    "n_train": int, "n_test": int, "delta_scale": float, "noise_scale": float,
    "severity_scale": float, "layer_spread": float, "lesion_fraction": float,
}
_TRAIN_KEYS = {"epochs": int, "batch_size": int, "lr": float, "stop_accuracy": float}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _settings(args, default: TacConfig) -> tuple[TacConfig, dict, dict]:
    raw = read_kv_file(args.config) if getattr(args, "config", None) else {}
    known = set(TacConfig.keys()) | set(_PAIR_KEYS) | set(_TRAIN_KEYS)
    unknown = sorted(set(raw) - known)
    if unknown:
        raise ConfigurationError(f"unknown config keys: {unknown}")
    merged = {**default.to_dict(), **raw}
    seed = getattr(args, "seed", None)
    config = TacConfig.from_mapping(merged, seed=seed)
    try:
        pair = {k: t(raw[k]) for k, t in _PAIR_KEYS.items() if k in raw}
        train = {k: t(raw[k]) for k, t in _TRAIN_KEYS.items() if k in raw}
    except ValueError as e:
        raise ConfigurationError(f"bad config value: {e}") from None
    return config, pair, train


def _out(args, default=None) -> Path:
    out = getattr(args, "out", None) or default
    if out is None:
        raise UsageError("--out is required for this subcommand")
    return Path(out)


def cmd_init(args) -> int:
    config, _, _ = _settings(args, TacConfig())
    params = tac_init(config)
    path = _out(args)
    ckpt.save_checkpoint(params, config, path)
    print(f"wrote {path}: {len(params)} tensors, {params.size()} parameters")
    return EXIT_OK


def cmd_forward(args) -> int:
    expected = _settings(args, TacConfig())[0] if getattr(args, "config", None) else None
    params, config = ckpt.load_checkpoint(args.checkpoint, expected)
    tensors = ckpt.read_tensors(args.input)
    if "curr" not in tensors:
        raise ConfigurationError(f"{args.input}: no tensor named 'curr'")
    z = tac_forward(tensors["curr"], tensors.get("prior"), params, config)
    path = _out(args)
    ckpt.write_tensors(path, {"z": z})
    print(f"wrote {path}: z shape {z.shape}")
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    config, _, _ = _settings(args, TOY_GRADCHECK)
    ok = True
    for bias in (0.0, 0.5):
        report = tac_gradcheck(config, h=args.h, tol=args.tol, bias_scale=bias)
        print(f"# b_prior {'initial (zero)' if bias == 0 else 'randomised'}")
        for line in report.lines():
            print(line)
        ok &= report.passed
    return EXIT_OK if ok else EXIT_FAIL


def _pair_spec(args) -> SyntheticPairSpec:
    config, pair, _ = _settings(args, TOY_SWAP)
    return SyntheticPairSpec(config=config, seed=config.seed, **pair)


def _write_pairs(path, train: PairSet, test: PairSet, config: TacConfig) -> None:
    tensors = {f"train.{k}": v for k, v in train.to_tensors().items()}
    tensors.update({f"test.{k}": v for k, v in test.to_tensors().items()})
    ckpt.write_tensors(path, tensors, config.to_text())


def _read_pairs(path, split: str) -> PairSet:
    tensors = ckpt.read_tensors(path)
    try:
        return PairSet.from_tensors({k: tensors[f"{split}.{k}"] for k in ("curr", "prior", "labels")})
    except KeyError as e:
        raise ConfigurationError(f"{path}: missing tensor {e.args[0]}") from None


def cmd_gen(args) -> int:
    spec = _pair_spec(args)
    train, test = gen_pairs(spec)
    path = _out(args)
    _write_pairs(path, train, test, spec.config)
    print(f"wrote {path}: {len(train)} train / {len(test)} test pairs")
    return EXIT_OK


def cmd_train_toy(args) -> int:
    config, pair, train_kw = _settings(args, TOY_SWAP)
    if args.pairs:
        train = _read_pairs(args.pairs, "train")
    else:
        train, _ = gen_pairs(SyntheticPairSpec(config=config, seed=config.seed, **pair))
    train_cfg = ToyTrainConfig(seed=config.seed, **train_kw)
    res = train_toy(train, tac_init(config), config, train_cfg)
    path = _out(args)
    ckpt.save_checkpoint(res.tac, config, path)
    probe_path = Path(args.probe_out or f"{path}.probe")
    ckpt.write_tensors(probe_path, res.probe.to_dict())
    print(f"epochs\t{res.epochs_run}")
    print(f"initial_loss\t{res.loss_curve[0]:.6f}")
    print(f"final_loss\t{res.loss_curve[-1]:.6f}")
    print(f"train_accuracy\t{res.train_accuracy:.6f}")
    print(f"wrote {path} and {probe_path}")
    return EXIT_OK


def cmd_eval_swap(args) -> int:
    params, config = ckpt.load_checkpoint(args.checkpoint)
    probe = ParamStore(ckpt.read_tensors(args.probe))
    if set(probe) != {"probe.w", "probe.b"} or probe["probe.w"].shape != (config.llm_dim, 3):
        raise ConfigurationError(f"{args.probe}: not a probe for llm_dim={config.llm_dim}")
    test = _read_pairs(args.pairs, args.split)
    report = eval_swap(test, params, probe, config)
    for line in report.lines():
        print(line)
    return EXIT_OK


def cmd_f1temp(args) -> int:
    keywords = TemporalKeywordList.load(args.keywords)
    pairs = read_pairs_tsv(args.pairs)
    result = corpus_f1(pairs, keywords, beta=args.beta, eps=args.eps)
    lines = [f"# keywords={keywords.source} n={len(keywords)} sha256={keywords.digest()}",
             "pair\tprecision\trecall\tf1"]
    for i, s in enumerate(result.pairs):
        lines.append(f"{i}\t{s.precision:.6f}\t{s.recall:.6f}\t{s.f1:.6f}")
    lines.append(f"mean\t{result.precision:.6f}\t{result.recall:.6f}\t{result.f1:.6f}")
    text = "\n".join(lines) + "\n"
    if getattr(args, "out", None):
        Path(args.out).write_text(text, encoding="utf-8")
    sys.stdout.write(text)
    return EXIT_OK


def cmd_prompt(args) -> int:
    sections = ReportSections.from_file(args.sections, target=args.target)
    system, clinical = build_prompt(sections)
    text = f"[system]\n{system}\n[clinical]\n{clinical}\n"
    if getattr(args, "out", None):
        Path(args.out).write_text(text, encoding="utf-8")
    sys.stdout.write(text)
    return EXIT_OK


def cmd_heatmap(args) -> int:
    tensors = ckpt.read_tensors(args.input)
    if not tensors:
        raise ConfigurationError(f"{args.input}: no tensors")
    name = args.tensor or next(iter(tensors))
    if name not in tensors:
        raise ConfigurationError(f"{args.input}: no tensor named {name!r}")
    feats = tensors[name]
    grid = args.grid or int(round(np.sqrt(feats.shape[0])))
    path = _out(args)
    img = emit_heatmap(feats, grid, args.factor, args.sigma, path)
    print(f"wrote {path}: {img.shape[1]}x{img.shape[0]} PGM from {name!r}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", default=argparse.SUPPRESS, help="key=value config file")
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="override the config seed")
    common.add_argument("--out", default=argparse.SUPPRESS, help="output path")
    common.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS)

    parser = _Parser(prog="tacnet", description=__doc__.splitlines()[0], parents=[common])
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    def add(name, func, help_):
        p = sub.add_parser(name, parents=[common], help=help_)
        p.set_defaults(func=func)
        return p

    add("init", cmd_init, "write a freshly initialised checkpoint")

    p = add("forward", cmd_forward, "run the connector on a tensor file")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--input", required=True, help="tensor file with 'curr' and optional 'prior'")

    p = add("gradcheck", cmd_gradcheck, "central-difference check of every parameter")
    p.add_argument("--h", type=float, default=1e-5)
    p.add_argument("--tol", type=float, default=1e-4)

    add("gen", cmd_gen, "write synthetic train/test pairs")

    p = add("train-toy", cmd_train_toy, "train connector and probe on synthetic pairs")
    p.add_argument("--pairs", help="pairs file from 'gen' (generated from config if omitted)")
    p.add_argument("--probe-out")

    p = add("eval-swap", cmd_eval_swap, "direction accuracy and swap flip rate")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--probe", required=True)
    p.add_argument("--pairs", required=True)
    p.add_argument("--split", choices=("train", "test"), default="test")

    p = add("f1temp", cmd_f1temp, "temporal entity F1 over a TSV corpus")
    p.add_argument("--keywords", default="default", help="'default' or a keyword file")
    p.add_argument("--pairs", required=True, help="TSV: ground truth<TAB>generated")
    p.add_argument("--beta", type=float, default=1.0)
    p.add_argument("--eps", type=float, default=1e-10)

    p = add("prompt", cmd_prompt, "assemble system and clinical prompts")
    p.add_argument("--sections", required=True, help="file of 'Name: value' lines")
    p.add_argument("--target", choices=("Findings", "Impression"), default="Findings")

    p = add("heatmap", cmd_heatmap, "token-weight heatmap as binary PGM")
    p.add_argument("--input", required=True)
    p.add_argument("--tensor")
    p.add_argument("--grid", type=int)
    p.add_argument("--factor", type=int, default=14)
    p.add_argument("--sigma", type=float, default=2.0)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if not getattr(args, "command", None):
            parser.print_usage(sys.stderr)
            raise UsageError("tacnet: error: a subcommand is required")
    except UsageError as e:
        print(e, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as e:  # --help
        return EXIT_OK if e.code in (0, None) else EXIT_USAGE
    logging.basicConfig(
        level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except UsageError as e:
        print(f"tacnet {args.command}: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (TacError, ValueError, OSError) as e:
        print(f"tacnet {args.command}: error: {e}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
