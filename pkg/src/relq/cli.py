"""Command-line entry point: ``relq run``, ``relq check`` and ``relq corpus``.

Exit codes: 0 success, 1 diagnostics or golden mismatches, 2 parse or execution errors.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import Sequence

from . import corpus
from .engine import execute, execute_in_place
from .errors import RelqError
from .metamodel import Metamodel, parse_metamodel
from .tdsl import check_transformation, parse_transformation
from .xmi import read_model, write_model

EXIT_OK, EXIT_DIAGNOSTICS, EXIT_ERROR = 0, 1, 2


def _search_dirs(extra: Sequence[str], tdsl: str) -> list[Path]:
    """--mm-dir entries, then ``../metamodels`` and the task's own directory."""
    here = Path(tdsl).resolve().parent
    return [*(Path(d) for d in extra), here.parent / "metamodels", here]


def _load_metamodel(name: str, dirs: Sequence[Path]) -> Metamodel:
    for d in [*dirs, corpus.CORPUS_DIR / "metamodels"]:
        p = Path(d) / f"{name}.mm"
        if p.is_file():
            return parse_metamodel(p.read_text(encoding="utf-8"), str(p))
    raise RelqError(f"metamodel {name} not found (looked for {name}.mm in {', '.join(map(str, dirs)) or 'corpus'})")


def _parse_params(pairs: Sequence[str]) -> dict[str, str]:
    out: dict[str, str] = {}
    for pair in pairs:
        key, sep, value = pair.partition("=")
        if not sep or not key:
            raise RelqError(f"--param expects name=value, got {pair!r}")
        out[key] = value
    return out


def _metamodel_arg(value: str | None, declared: str, dirs: Sequence[Path]) -> Metamodel:
    """``--source-mm``/``--target-mm`` accept a .mm file path or a metamodel name."""
    if value and Path(value).is_file():
        return parse_metamodel(Path(value).read_text(encoding="utf-8"), value)
    return _load_metamodel(value or declared, dirs)


def _read_tdsl(path: str):
    p = Path(path)
    return parse_transformation(p.read_text(encoding="utf-8"), str(p))


def cmd_run(args: argparse.Namespace) -> int:
    t = _read_tdsl(args.transformation)
    cfg = t.config
    dirs = _search_dirs(args.mm_dir, args.transformation)
    src_mm = _load_metamodel(cfg.source_metamodel, dirs)
    source = read_model(Path(args.input).read_bytes(), src_mm)
    params = _parse_params(args.param)
    out = args.out
    if out is None:
        if not cfg.in_place:
            raise RelqError("--out is required for model-to-model runs (use '-' for stdout)")
        out = str(Path(args.input).with_suffix("")) + ".out.xmi"
    log = sys.stderr if out == "-" else sys.stdout
    if cfg.in_place:
        result, diff, report = execute_in_place(t, source, params)
        for kind, eid in diff.summary():
            print(f"{kind} {eid}", file=log)
    else:
        result, report = execute(t, source, params, _load_metamodel(cfg.target_metamodel, dirs))
    text = write_model(result, args.emit or cfg.output)
    if out == "-":
        sys.stdout.write(text)
    else:
        Path(out).write_text(text, encoding="utf-8")
    print(report.summary(), file=log)
    return EXIT_OK


def cmd_check(args: argparse.Namespace) -> int:
    t = _read_tdsl(args.transformation)
    dirs = _search_dirs(args.mm_dir, args.transformation)
    src_mm = _metamodel_arg(args.source_mm, t.config.source_metamodel, dirs)
    trg_mm = _metamodel_arg(args.target_mm, t.config.target_metamodel, dirs)
    diags = check_transformation(t, src_mm, trg_mm)
    for d in diags:
        print(d)
    print(f"{t.name}: {t.inventory()} (relations/queries/natives), {len(diags)} diagnostics")
    return EXIT_DIAGNOSTICS if diags else EXIT_OK


def cmd_corpus(args: argparse.Namespace) -> int:
    c = corpus.Corpus(args.dir) if args.dir else corpus.Corpus()
    failures = 0
    print(f"{'task':<12} {'inventory':<10} {'ms':>8}  result")
    for task_id, fixture in corpus.TASKS.items():
        try:
            text, report = c.run_task(task_id)
            output = c.transformation(task_id).config.output
            ok = text == c.golden(task_id, output)
            inventory = c.transformation(task_id).inventory()
            ok = ok and inventory == fixture.inventory
            status = "pass" if ok else "FAIL"
            ms = f"{report.elapsed_ms:.2f}"
        except (RelqError, OSError) as exc:
            ok, status, inventory, ms = False, f"ERROR {exc}", "?", "-"
        failures += not ok
        print(f"{task_id:<12} {inventory:<10} {ms:>8}  {status}")
    print(f"{len(corpus.TASKS) - failures}/{len(corpus.TASKS)} tasks pass")
    return EXIT_DIAGNOSTICS if failures else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="relq", description="Relational model-transformation engine.")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="execute a transformation on a model")
    run.add_argument("transformation", help="path to a .tdsl file")
    run.add_argument("--in", dest="input", required=True, help="source model (.xmi)")
    run.add_argument("--out", help="output file, '-' for stdout (in-place runs default to <input>.out.xmi)")
    run.add_argument("--param", action="append", default=[], metavar="NAME=VALUE")
    run.add_argument("--emit", choices=["xmi", "html"], help="override the declared output format")
    run.add_argument("--mm-dir", action="append", default=[], help="extra metamodel search directory")
    run.set_defaults(func=cmd_run)

    check = sub.add_parser("check", help="statically check a transformation against its metamodels")
    check.add_argument("transformation")
    check.add_argument("--source-mm", help=".mm file or metamodel name (default: as declared)")
    check.add_argument("--target-mm", help=".mm file or metamodel name (default: as declared)")
    check.add_argument("--mm-dir", action="append", default=[])
    check.set_defaults(func=cmd_check)

    corp = sub.add_parser("corpus", help="run the bundled tasks and compare with golden outputs")
    corp.add_argument("--dir", help="corpus directory (default: the bundled one)")
    corp.set_defaults(func=cmd_corpus)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (RelqError, OSError) as exc:
        print(f"relq: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
