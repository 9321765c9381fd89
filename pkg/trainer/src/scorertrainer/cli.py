"""Command-line front end: fit a scorer on a dataset file.

Exit codes: 0 success, 1 usage error, 2 data or training error.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys

from .errors import ConfigError, TrainerError
from .training import TrainConfig, train

_USAGE_EXIT = 1
_DATA_EXIT = 2


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on usage errors; 2 is reserved for data errors here
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(_USAGE_EXIT)


def build_parser() -> _Parser:
    parser = _Parser(prog="scorertrainer", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("train", help="fit the move scorer and export weights")
    p.add_argument("--data", required=True, help="line-delimited dataset file")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--d-model", dest="d_model", type=int, default=256)
    p.add_argument("--heads", type=int, default=4)
    p.add_argument("--attn-layers", dest="attn_layers", type=int, default=2)
    p.add_argument("--blocks", type=int, default=10)
    p.add_argument("--ffn-dim", dest="ffn_dim", type=int, default=512)
    p.add_argument("--dropout", type=float, default=0.1)
    p.add_argument("--lr", type=float, default=2e-4)
    p.add_argument("--lr-decay", dest="lr_decay", type=float, default=0.99)
    p.add_argument("--batch", type=int, default=256)
    p.add_argument("--max-epochs", dest="max_epochs", type=int, default=50)
    p.add_argument("--patience", type=int, default=5)
    p.add_argument("--split", default="800,100,100", help="train,val,test query counts")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--pos-weight", dest="pos_weight", type=float, default=1.0)
    p.add_argument("--device", default="cpu")
    p.add_argument("--expect-model-hash", dest="expect_model_hash")
    p.add_argument("--quiet", action="store_true", help="warnings only")
    p.set_defaults(func=_cmd_train)
    return parser


def _parse_split(text: str) -> tuple[int, int, int]:
    parts = [t for t in text.split(",") if t.strip()]
    try:
        nums = tuple(int(t) for t in parts)
    except ValueError:
        nums = ()
    if len(nums) != 3:
        raise ConfigError(f"bad split {text!r}; use TRAIN,VAL,TEST query counts")
    return nums


def _cmd_train(args) -> int:
    cfg = TrainConfig(
        d_model=args.d_model,
        n_heads=args.heads,
        n_attn_layers=args.attn_layers,
        n_ffn_blocks=args.blocks,
        ffn_dim=args.ffn_dim,
        dropout=args.dropout,
        lr=args.lr,
        lr_decay=args.lr_decay,
        batch=args.batch,
        max_epochs=args.max_epochs,
        patience=args.patience,
        split=_parse_split(args.split),
        seed=args.seed,
        pos_weight=args.pos_weight,
        device=args.device,
        expect_model_hash=args.expect_model_hash,
    )
    report = train(args.data, cfg, args.out)
    print(
        json.dumps(
            {
                "best_epoch": report.best_epoch,
                "epochs": len(report.metrics),
                "val_loss": report.best_val_loss,
                "weights": str(report.weights_path),
            }
        )
    )
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        stream=sys.stderr,
        level=logging.WARNING if getattr(args, "quiet", False) else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except ConfigError as e:
        print(f"scorertrainer: error: {e}", file=sys.stderr)
        return _USAGE_EXIT
    except TrainerError as e:
        print(f"scorertrainer: {type(e).__name__}: {e}", file=sys.stderr)
        return _DATA_EXIT
    except OSError as e:
        print(f"scorertrainer: cannot access file: {e}", file=sys.stderr)
        return _DATA_EXIT


if __name__ == "__main__":
    sys.exit(main())
