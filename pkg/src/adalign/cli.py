"""Command-line entry points.

    adalign train    --config cfg.json --out rundir
    adalign eval     --model checkpoint.json --data dataset.csv
    adalign compare  --configs a.json b.json --seeds 0,1,2 --out dir
    adalign gen-data --spec spec.json --out dataset.csv

Exit codes: 0 success, 2 config error, 3 numeric error, 4 I/O error.
"""

from __future__ import annotations

import argparse
import json
import sys

from .compare import compare_variants, format_table
from .data import DatasetSpec, generate, load as load_dataset, save as save_dataset
from .errors import ConfigError, DataError, NumericError, ParseError
from .harness import TrainConfig, evaluate, load_checkpoint, train

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_IO = 4


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="adalign",
        description="Hardness-guided adversarial domain adaptation runs")
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="run one training config")
    p_train.add_argument("--config", required=True)
    p_train.add_argument("--out", required=True)

    p_eval = sub.add_parser("eval", help="evaluate a checkpoint on a dataset")
    p_eval.add_argument("--model", required=True)
    p_eval.add_argument("--data", required=True)

    p_cmp = sub.add_parser("compare", help="train several variants over seeds")
    p_cmp.add_argument("--configs", nargs="+", required=True)
    p_cmp.add_argument("--seeds", required=True,
                       help="comma-separated seed list, e.g. 0,1,2")
    p_cmp.add_argument("--out", required=True)

    p_gen = sub.add_parser("gen-data", help="generate a dataset CSV from a spec")
    p_gen.add_argument("--spec", required=True)
    p_gen.add_argument("--out", required=True)
    return parser


def _cmd_train(args) -> int:
    config = TrainConfig.load(args.config)
    result = train(config, args.out)
    final = result.final_eval.to_dict()
    print(json.dumps({"log": str(result.log_path),
                      "checkpoint": str(result.checkpoint_path),
                      "final_eval": final}, indent=2))
    return EXIT_OK


def _cmd_eval(args) -> int:
    model = load_checkpoint(args.model)
    dataset = load_dataset(args.data)
    report = evaluate(model, dataset)
    print(json.dumps(report.to_dict(), indent=2))
    return EXIT_OK


def _cmd_compare(args) -> int:
    configs = [TrainConfig.load(path) for path in args.configs]
    try:
        seeds = [int(s) for s in args.seeds.split(",") if s != ""]
    except ValueError as err:
        raise ConfigError(f"bad seed list {args.seeds!r}: {err}") from err
    summaries = compare_variants(configs, seeds, args.out)
    print(format_table(summaries))
    return EXIT_OK


def _cmd_gen_data(args) -> int:
    with open(args.spec) as fh:
        spec = DatasetSpec.from_dict(json.load(fh))
    save_dataset(generate(spec), args.out)
    print(f"wrote {args.out}")
    return EXIT_OK


COMMANDS = {
    "train": _cmd_train,
    "eval": _cmd_eval,
    "compare": _cmd_compare,
    "gen-data": _cmd_gen_data,
}


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, DataError) as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericError as err:
        print(f"numeric error: {err}", file=sys.stderr)
        record = getattr(err, "record", None)
        if record is not None:
            print(f"failing iteration: {json.dumps(record)}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ParseError, OSError, json.JSONDecodeError) as err:
        print(f"i/o error: {err}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
