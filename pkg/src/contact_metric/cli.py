"""Command-line interface.

Exit codes: 0 all checks pass, 1 a verification failed, 2 configuration or
DSL error, 3 numeric singularity (witness as JSON on stderr).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys

from .errors import BranchError, ConfigError, HypothesisViolated, NumericSingularity
from .expr_dsl import ParseError
from .pipeline import (SAMPLE_COLUMNS, canonical_json, curvature_report, example_config, load_config,
                       load_deform_config, run_algorithm, run_deformation, sample_table,
                       structure_document, verify_document)

EXIT_PASS, EXIT_FAIL, EXIT_CONFIG, EXIT_SINGULAR = 0, 1, 2, 3


def _add_common(p: argparse.ArgumentParser, config_required: bool = True) -> None:
    p.add_argument("-c", "--config", required=config_required, help="configuration JSON file")
    p.add_argument("-o", "--output", help="write the result here instead of stdout")
    p.add_argument("--grid", nargs=3, type=int, metavar=("N1", "N2", "N3"), help="override the sample grid")
    p.add_argument("--tol", type=float, help="override the axiom tolerance")
    p.add_argument("--quad-steps", type=int, help="override the Simpson step count")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="contact-metric",
        description="Construct and verify contact metric structures on coordinate patches of 3-manifolds.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    _add_common(sub.add_parser("build", help="solve for zeta, build the structure and verify it"))
    p = sub.add_parser("verify", help="re-check a structure written by 'build'")
    p.add_argument("structure", help="structure JSON written by 'build'")
    p.add_argument("-o", "--output", help="write the report here instead of stdout")
    _add_common(sub.add_parser("curvature", help="curvature report over the grid"))
    p = sub.add_parser("deform", help="deform an orthonormal frame into an associated structure")
    p.add_argument("-c", "--config", required=True, help="deformation configuration JSON file")
    p.add_argument("-o", "--output", help="write the report here instead of stdout")
    p.add_argument("--grid", nargs=3, type=int, metavar=("N1", "N2", "N3"))
    _add_common(sub.add_parser("example", help="run the built-in worked example"), config_required=False)
    _add_common(sub.add_parser("sample", help="tabulate g, eta, lambda, a, b, c over the grid as CSV"))
    return parser


def _emit(text: str, path) -> None:
    if path:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _config(args):
    cfg = example_config() if args.command == "example" and not args.config else load_config(args.config)
    if args.grid or args.tol is not None or args.quad_steps is not None:
        cfg = cfg.with_overrides(grid=args.grid, tol=args.tol, steps=args.quad_steps)
    return cfg


def _summary(report) -> None:
    failed = report.failures()
    status = "PASS" if report.passed else "FAIL"
    msg = f"{status}: {len(report.checks) - len(failed)}/{len(report.checks)} checks passed"
    if failed:
        msg += " (failed: " + ", ".join(failed) + ")"
    print(msg, file=sys.stderr)


def _run(args) -> int:
    cmd = args.command
    if cmd in ("build", "example"):
        cfg = _config(args)
        result = run_algorithm(cfg)
        doc = structure_document(cfg, result) if cmd == "build" else result.report.to_dict()
        _emit(canonical_json(doc), args.output)
        _summary(result.report)
        return EXIT_PASS if result.passed else EXIT_FAIL
    if cmd == "verify":
        try:
            with open(args.structure, encoding="utf-8") as fh:
                doc = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read structure file {args.structure}: {exc}") from exc
        result, mismatches = verify_document(doc)
        out = result.report.to_dict()
        out["mismatches"] = mismatches
        _emit(canonical_json(out), args.output)
        _summary(result.report)
        if mismatches:
            print("stored structure differs from the rebuilt one: " + ", ".join(mismatches), file=sys.stderr)
        return EXIT_PASS if result.passed and not mismatches else EXIT_FAIL
    if cmd == "curvature":
        rep = curvature_report(_config(args))
        _emit(canonical_json(rep), args.output)
        return EXIT_PASS if rep["summary"]["pass"] else EXIT_FAIL
    if cmd == "deform":
        cfg = load_deform_config(args.config)
        if args.grid:
            cfg = type(cfg)(**{**cfg.__dict__, "grid": tuple(args.grid)})
        res, report = run_deformation(cfg)
        doc = {"report": report.to_dict(), "structure": res.structure.to_dict()}
        _emit(canonical_json(doc), args.output)
        _summary(report)
        return EXIT_PASS if report.passed else EXIT_FAIL
    if cmd == "sample":
        rows = sample_table(_config(args))
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(SAMPLE_COLUMNS)
        for row in rows:
            writer.writerow([format(v + 0.0, ".17g") for v in row])
        _emit(buf.getvalue(), args.output)
        return EXIT_PASS
    raise AssertionError(cmd)  # pragma: no cover


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _run(args)
    except ParseError as exc:
        print(json.dumps({"error": "ParseError", "message": str(exc), "offset": exc.offset,
                          "expected": sorted(exc.expected)}, sort_keys=True), file=sys.stderr)
        return EXIT_CONFIG
    except ConfigError as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}, sort_keys=True), file=sys.stderr)
        return EXIT_CONFIG
    except NumericSingularity as exc:
        print(json.dumps(exc.to_dict(), sort_keys=True), file=sys.stderr)
        return EXIT_SINGULAR
    except HypothesisViolated as exc:
        failed = [{"hypothesis": n, "name": name, "witness": None if w is None else list(w)} for n, name, w in exc.failed]
        print(json.dumps({"error": "HypothesisViolated", "message": str(exc), "failed": failed}, sort_keys=True),
              file=sys.stderr)
        return EXIT_FAIL
    except BranchError as exc:
        print(json.dumps({"error": "BranchError", "message": str(exc)}, sort_keys=True), file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
