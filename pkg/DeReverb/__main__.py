#  Copyright (c) 2025 DeReverb contributors
#  Licensed under the GNU AGPL v3.0: https://www.gnu.org/licenses/agpl-3.0.html
#  Part of the DeReverb project. All rights reserved where applicable.

import argparse
import asyncio
import sys
from pathlib import Path
from typing import Optional, Sequence

from DeReverb import Toolkit, __version__
from DeReverb.core import DereverbError, UsageError
from DeReverb.logger import LOGGER


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dereverb", description="Integrated deep-ensemble speech dereverberation")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def experiment(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", type=Path, help="experiment TOML (defaults to the full-scale experiment)")
        p.add_argument("--seed", type=int, help="override the experiment seed")
        p.add_argument("--out", type=Path, help="run directory (overrides output_dir)")

    experiment(sub.add_parser("prepare", help="synthesize RIRs, reverberant corpus, features and manifest"))

    p = sub.add_parser("train", help="train roster models on a prepared dataset")
    experiment(p)
    p.add_argument("--model", action="append", required=True, help="model id, e.g. HDDAE_A(3) or IDEA_A(6)")

    p = sub.add_parser("dereverb", help="dereverberate one WAV file")
    p.add_argument("--model", type=Path, required=True, help="model.drvk checkpoint or idea.json manifest")
    p.add_argument("input", type=Path)
    p.add_argument("output", type=Path)

    p = sub.add_parser("evaluate", help="score models on the prepared test set")
    experiment(p)
    p.add_argument("--model", action="append", help="model id (repeatable; default: the config roster)")

    p = sub.add_parser("spectrogram", help="dump the LPS of a WAV file as CSV")
    p.add_argument("input", type=Path)
    p.add_argument("output", type=Path)
    p.add_argument("--png", type=Path, help="also render a grey-scale image")

    p = sub.add_parser("gen-testdata", help="write a pseudo-speech corpus and desk.toml")
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--seed", type=int, default=1234)
    p.add_argument("--n-train", type=int, default=20)
    p.add_argument("--n-test", type=int, default=5)
    p.add_argument("--duration", type=float, default=3.0)
    return parser


async def run(args: argparse.Namespace) -> None:
    from DeReverb.modules import cmd_dereverb, cmd_gen_testdata, cmd_spectrogram

    if args.command == "dereverb":
        await asyncio.to_thread(cmd_dereverb, args.model, args.input, args.output)
    elif args.command == "spectrogram":
        await cmd_spectrogram(args.input, args.output, args.png)
    elif args.command == "gen-testdata":
        if args.n_train < 1 or args.n_test < 1 or args.duration <= 0:
            raise UsageError("--n-train, --n-test and --duration must be positive")
        await cmd_gen_testdata(args.out, args.n_train, args.n_test, args.duration, args.seed)
    else:
        toolkit = Toolkit(args.config, args.out, args.seed)
        if args.command == "prepare":
            await toolkit.prepare()
        elif args.command == "train":
            await toolkit.train(args.model)
        elif args.command == "evaluate":
            await toolkit.evaluate(args.model)
        LOGGER.info("%s finished in %.1fs", args.command, toolkit.uptime())


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else UsageError.code

    try:
        asyncio.run(run(args))
    except DereverbError as e:
        LOGGER.error("%s failed: %s", args.command, e.message)
        print(f"error: {e.message}", file=sys.stderr)
        return e.code
    except FloatingPointError as e:
        LOGGER.error("Numeric failure: %s", e, exc_info=True)
        return 3
    except KeyboardInterrupt:
        LOGGER.warning("Interrupted")
        return 130
    return 0


if __name__ == "__main__":
    sys.exit(main())
