import argparse
import sys

from . import __version__
from .encoders import DEFAULT_ENCODER, EncoderUnavailable
from .export import ExportJob, export
from .writer import WriteError


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="flanemb-export",
        description="encode node texts and write a FLANEMB1 embedding table",
    )
    parser.add_argument("--version", action="version", version=f"flanemb-export {__version__}")
    parser.add_argument("--input", required=True, help="node-text JSONL (one {'text': ...} per line)")
    parser.add_argument("--output", required=True, help="FLANEMB1 output path")
    parser.add_argument("--encoder", default=DEFAULT_ENCODER,
                        help="checkpoint id, or hash:DIM:SEED for the deterministic test encoder")
    parser.add_argument("--batch", type=int, default=64, help="encoding batch size")
    parser.add_argument("--normalize", action="store_true",
                        help="L2-normalize vectors before writing (raw encoder output by default)")
    args = parser.parse_args(argv)

    job = ExportJob(
        input_path=args.input,
        output_path=args.output,
        encoder=args.encoder,
        batch_size=args.batch,
        normalize=args.normalize,
    )
    try:
        count = export(job)
    except EncoderUnavailable as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (WriteError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {count} records to {args.output}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
