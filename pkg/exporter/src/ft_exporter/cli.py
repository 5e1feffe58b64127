"""Command line for the embedding exporter."""

import argparse
import sys

from .export import ExportError, ExportJob, export


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="finetype-export",
        description="Run a pretrained transformer over a corpus and write a "
                    "contextual embedding store.",
    )
    parser.add_argument("--corpus", required=True, help="corpus file (jsonl)")
    parser.add_argument("--model", required=True,
                        help="pretrained model name or local path")
    parser.add_argument("--out", required=True,
                        help="store output path (.gz for gzip)")
    parser.add_argument("--batch-size", dest="batch_size", type=int, default=32)
    args = parser.parse_args(argv)

    try:
        report = export(ExportJob(corpus=args.corpus, model=args.model,
                                  out=args.out, batch_size=args.batch_size))
    except (ExportError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {report.documents} records (dim {report.dim}) to {args.out}")
    print(f"truncated {report.truncated}, "
          f"normalization mismatches {report.normalization_mismatches}; "
          f"sidecar {report.report_path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
