"""Command line: verify suites, compute objects, emit matrices."""

import argparse
import json
import sys

from .core_arith import matrix_to_json
from .objects import OBJECTS, WindowError
from .report import CheckReport, run_suite
from .suites import REGISTRY

EXIT_PASS, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _registry_listing():
    lines = ["suites:"]
    for name, s in sorted(REGISTRY.items()):
        crit = f" (criteria {', '.join(map(str, s.criteria))})" if s.criteria else ""
        lines.append(f"  {name}{crit}: {s.summary}")
    lines.append("objects:")
    for name, fn in sorted(OBJECTS.items()):
        params = " ".join(f"--{k.replace('_', '-')} {v}" for k, v in fn.defaults.items())
        lines.append(f"  {name} [{params}]: {fn.summary}")
    return "\n".join(lines)


def _coerce(text):
    try:
        return int(text)
    except ValueError:
        return text


def _extra_params(tokens):
    """Turn ["--key", "value", ...] into {"key": value}."""
    out = {}
    i = 0
    while i < len(tokens):
        tok = tokens[i]
        if not tok.startswith("--") or i + 1 >= len(tokens):
            raise UsageError(f"expected --name value pairs, got {' '.join(tokens[i:])!r}")
        key = tok[2:].replace("-", "_")
        if "=" in key:
            key, val = key.split("=", 1)
            i += 1
        else:
            val = tokens[i + 1]
            i += 2
        out[key] = _coerce(val)
    return out


# ---------------------------------------------------------------------------
# documents


def document_json(doc):
    mats = {}
    for name, m in sorted(doc.matrices.items()):
        mats[name] = matrix_to_json(m.value, m.rows, m.cols)
    return {"object": doc.name, "parameters": doc.parameters, "window": doc.window, "matrices": mats}


def dumps(obj):
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def render_matrix(name, m):
    """Dense grid with right-aligned entries and basis labels."""
    M = m.value
    cells = [[str(M.get(i, j) or 0) for j in range(M.ncols)] for i in range(M.nrows)]
    rows = [str(r) for r in m.rows] if m.rows else [str(i) for i in range(M.nrows)]
    cols = [str(c) for c in m.cols] if m.cols else [str(j) for j in range(M.ncols)]
    lw = max([len(r) for r in rows] + [0])
    widths = [max([len(cols[j])] + [len(cells[i][j]) for i in range(M.nrows)]) for j in range(M.ncols)]
    lines = [f"{name}:", " " * lw + "  " + "  ".join(c.rjust(wd) for c, wd in zip(cols, widths))]
    for r, row in zip(rows, cells):
        lines.append(r.rjust(lw) + "  " + "  ".join(c.rjust(wd) for c, wd in zip(row, widths)))
    return "\n".join(lines)


def document_text(doc):
    head = [f"{doc.name}", "parameters: " + ", ".join(f"{k}={v}" for k, v in sorted(doc.parameters.items())),
            "window: " + ", ".join(f"{k}={v}" for k, v in sorted(doc.window.items()))]
    body = [render_matrix(name, m) for name, m in sorted(doc.matrices.items())]
    return "\n".join(head + body) + "\n"


def build_document(name, params):
    if name not in OBJECTS:
        raise UsageError(f"unknown object {name!r}\n{_registry_listing()}")
    fn = OBJECTS[name]
    unknown = set(params) - set(fn.defaults)
    if unknown:
        raise UsageError(f"object {name} does not take {', '.join('--' + k for k in sorted(unknown))}")
    return fn(**dict(fn.defaults, **params))


def _write(text, out):
    if out is None:
        sys.stdout.write(text)
        return
    try:
        with open(out, "w") as fh:
            fh.write(text)
    except OSError as e:
        raise UsageError(f"cannot write {out}: {e.strerror}")


# ---------------------------------------------------------------------------
# commands


def cmd_verify(args, extra):
    if args.suite not in REGISTRY:
        raise UsageError(f"unknown suite {args.suite!r}\n{_registry_listing()}")
    entry = REGISTRY[args.suite]
    params = {k: getattr(args, k) for k in ("order", "depth", "modes", "a", "b", "c", "y")
              if getattr(args, k) is not None}
    params.update(extra)
    unknown = set(params) - set(entry.defaults)
    if unknown:
        raise UsageError(f"suite {entry.name} does not take {', '.join('--' + k for k in sorted(unknown))}; "
                         f"it takes {', '.join('--' + k for k in entry.defaults) or 'no parameters'}")
    try:
        report = run_suite(entry, **params)
    except (ArithmeticError, ValueError, RuntimeError) as e:
        report = CheckReport(entry.name, dict(entry.defaults, **params), False,
                             [("exception", None, f"{type(e).__name__}: {e}")])
    if args.seed is not None:
        report.parameters["seed"] = args.seed
    _write(report.dumps() + "\n" if args.json else report.text() + "\n", None)
    return EXIT_PASS if report.passed else EXIT_FAIL


def _document_or_window(name, extra):
    try:
        return build_document(name, extra)
    except WindowError as e:
        raise UsageError(f"{e}; maximal window: {json.dumps(e.window, sort_keys=True)}")


def cmd_compute(args, extra):
    doc = _document_or_window(args.object, extra)
    _write(dumps(document_json(doc)), args.out)
    return EXIT_PASS


def cmd_emit(args, extra):
    doc = _document_or_window(args.object, extra)
    text = dumps(document_json(doc)) if args.format == "json" else document_text(doc)
    _write(text, args.out)
    return EXIT_PASS


def cmd_list(args, extra):
    if extra:
        raise UsageError("list takes no parameters")
    print(_registry_listing())
    return EXIT_PASS


def make_parser():
    p = argparse.ArgumentParser(prog="theta-lab", description="Exact checks for rank-one shifted Yangians "
                                                             "and quantum loop algebras.")
    sub = p.add_subparsers(dest="command", required=True)
    v = sub.add_parser("verify", help="run a verification suite")
    v.add_argument("suite")
    v.add_argument("--order", type=int)
    v.add_argument("--depth", type=int)
    v.add_argument("--modes", type=int)
    v.add_argument("--seed", type=int, help="recorded in the report; suites are deterministic")
    for name in ("a", "b", "c", "y"):
        v.add_argument(f"--{name}", help="spectral parameter: integer, fraction, q^k or a symbol")
    v.add_argument("--json", action="store_true", help="print the report as JSON")
    v.set_defaults(func=cmd_verify)
    c = sub.add_parser("compute", help="print a named object as JSON (extra --name value pairs are parameters)")
    c.add_argument("object")
    c.add_argument("--out")
    c.set_defaults(func=cmd_compute)
    e = sub.add_parser("emit", help="write a named object as JSON or aligned text")
    e.add_argument("object", nargs="?", default="identity")
    e.add_argument("--format", choices=("json", "text"), default="json")
    e.add_argument("--out")
    e.set_defaults(func=cmd_emit)
    ls = sub.add_parser("list", help="list suites and objects")
    ls.set_defaults(func=cmd_list)
    return p


def main(argv=None):
    parser = make_parser()
    args, extra = parser.parse_known_args(argv)
    try:
        return args.func(args, _extra_params(extra))
    except UsageError as e:
        print(f"theta-lab: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
