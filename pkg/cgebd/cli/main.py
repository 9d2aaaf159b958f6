import argparse
import os
import sys
from typing import List, Optional

from dotenv import load_dotenv
from loguru import logger

from cgebd import __version__
from cgebd.cli.config import PipelineConfig, dump_config, load_config
from cgebd.utils.errors import CgebdError, ConfigError, DataError, NumericError, ShapeError

COMMANDS = ("synth", "encode", "inspect", "train", "infer", "eval", "gradcheck", "ablate")


def setup_logging(debug: bool = False, log_file: str = "logs/cgebd.log") -> None:
    """Configure logging for the pipeline"""
    logger.remove()  # Remove default handler
    logger.add(
        sys.stderr,
        format="<green>{time:YYYY-MM-DD HH:mm:ss}</green> | <level>{level: <8}</level> | <cyan>{name}</cyan>:<cyan>{function}</cyan>:<cyan>{line}</cyan> - <level>{message}</level>",
        level="INFO" if not debug else "DEBUG",
        colorize=True,
    )
    if log_file:
        logger.add(
            log_file,
            rotation="10 MB",
            retention="7 days",
            format="{time:YYYY-MM-DD HH:mm:ss} | {level: <8} | {name}:{function}:{line} - {message}",
            level="INFO",
        )


def common_options(suppress: bool) -> argparse.ArgumentParser:
    """
    Options accepted before and after the command name. The copy attached to
    subcommands has no defaults so it cannot overwrite values given earlier.
    """
    default = argparse.SUPPRESS if suppress else None
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument(
        "--config", type=str, default=default, help="JSON config file (default $CGEBD_CONFIG)"
    )
    common.add_argument("--seed", type=int, default=default, help="Override the config seed")
    common.add_argument("--out", type=str, default=default, help="Output path of the command")
    common.add_argument(
        "--debug",
        action="store_true",
        default=argparse.SUPPRESS if suppress else False,
        help="Debug logging",
    )
    return common


def build_parser() -> argparse.ArgumentParser:
    common = common_options(suppress=True)
    parser = argparse.ArgumentParser(
        prog="cgebd",
        description="Generic event boundary detection on compressed video.",
        parents=[common_options(suppress=False)],
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument(
        "--dump-config", action="store_true", help="Print the resolved config and exit"
    )
    commands = parser.add_subparsers(dest="command")

    commands.add_parser("synth", parents=[common], help="Generate and encode the synthetic corpus")

    encode = commands.add_parser(
        "encode", parents=[common], help="Encode a raw .npz video into a container"
    )
    encode.add_argument("source", help=".npz holding frames (F, H, W, 3) uint8 and fps")

    inspect = commands.add_parser(
        "inspect", parents=[common], help="Print container header and GOP statistics"
    )
    inspect.add_argument("path")

    commands.add_parser("train", parents=[common], help="Train on the train split")

    infer = commands.add_parser("infer", parents=[common], help="Predict boundaries")
    infer.add_argument("inputs", nargs="*", help="Containers to score (default: the test split)")
    infer.add_argument("--checkpoint", default=None)

    evaluate = commands.add_parser(
        "eval", parents=[common], help="Score predictions against annotations"
    )
    evaluate.add_argument("--predictions", default=None)
    evaluate.add_argument("--annotations", default=None)
    evaluate.add_argument(
        "--baseline", action="store_true", help="Also score the uniform-interval baseline"
    )

    commands.add_parser(
        "gradcheck", parents=[common], help="Finite-difference check of the full model"
    )
    commands.add_parser(
        "ablate", parents=[common], help="Encoder, window, label and scoring ablations"
    )
    return parser


def dispatch(args: argparse.Namespace, config: PipelineConfig) -> None:
    # Deferred so --help and --dump-config stay fast
    from cgebd.cli import ablate, pipeline

    if args.command == "synth":
        pipeline.run_synth(config, out=args.out)
    elif args.command == "encode":
        pipeline.run_encode(config, args.source, out=args.out)
    elif args.command == "inspect":
        print(pipeline.run_inspect(config, args.path).format_text())
    elif args.command == "train":
        pipeline.run_train(config, out=args.out)
    elif args.command == "infer":
        pipeline.run_infer(config, checkpoint=args.checkpoint, inputs=args.inputs, out=args.out)
    elif args.command == "eval":
        reports = pipeline.run_eval(
            config,
            predictions=args.predictions,
            annotations=args.annotations,
            baseline=args.baseline,
            out=args.out,
        )
        for report in reports:
            print(report.format_table())
            print()
    elif args.command == "gradcheck":
        pipeline.run_gradcheck(config)
    elif args.command == "ablate":
        print(ablate.run_ablation(config, out=args.out).format_text())


def main(argv: Optional[List[str]] = None) -> int:
    load_dotenv()
    args = build_parser().parse_args(argv)
    debug = args.debug or os.getenv("CGEBD_DEBUG", "0").lower() in ("1", "true", "yes")

    try:
        config = load_config(args.config, seed=args.seed)
    except ConfigError as e:
        setup_logging(debug, log_file="")
        logger.error(f"Configuration error: {e}")
        return e.exit_code

    if args.dump_config:
        print(dump_config(config))
        return 0
    if args.command is None:
        setup_logging(debug, log_file="")
        logger.error(f"No command given, expected one of: {', '.join(COMMANDS)}")
        return ConfigError.exit_code

    setup_logging(debug, config.log_file)
    logger.debug(f"Running {args.command} with seed {config.seed}")

    try:
        dispatch(args, config)
    except ConfigError as e:
        logger.error(f"Configuration error: {e}")
        return e.exit_code
    except DataError as e:
        logger.error(f"Data error: {e}")
        return e.exit_code
    except NumericError as e:
        logger.error(f"Numeric failure: {e}")
        return e.exit_code
    except ShapeError as e:
        logger.error(f"Data error: {e}")
        return DataError.exit_code
    except CgebdError as e:
        logger.error(f"Pipeline error: {e}")
        return e.exit_code
    except KeyboardInterrupt:
        logger.warning("Interrupted")
        return 130

    return 0


def run() -> None:
    sys.exit(main())
