"""``splitorder`` command line.

Exit codes: 0 success, 2 usage, 3 parse error, 4 negative verification or
obstruction verdict, 5 search failure.
"""

import argparse
import json
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigurationError, DomainError, ParseError, SplitOrderError

EXIT_OK, EXIT_USAGE, EXIT_PARSE, EXIT_NEGATIVE, EXIT_SEARCH = 0, 2, 3, 4, 5
MAX_DEGREE = 10

log = logging.getLogger("splitorder")


@dataclass
class RunConfig:
    subcommand: str
    inputs: list = field(default_factory=list)
    degree: int = None
    policy: str = "bstar"
    seed: int = None
    output: str = None
    fmt: str = "text"

    def __post_init__(self):
        if self.degree is not None and not 1 <= self.degree <= MAX_DEGREE:
            raise ConfigurationError(f"degree must lie in 1..{MAX_DEGREE}")


def _dual(x):
    """Exact value plus a decimal rendering."""
    from .freealg import decimal_string, format_scalar
    text = format_scalar(x)
    dec = decimal_string(x)
    return text if dec == text else f"{text} ({dec})"


def _read(path):
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise ConfigurationError(f"cannot read {path}: {exc.strerror}") from None


def _write(path, text):
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def _load_scheme_or_control(path):
    from .scheme import load
    return load(_read(path), source=str(path))


def _parse_flows(text):
    from .hall import parse_bracket
    return [parse_bracket(f.strip()) for f in text.split(",") if f.strip()]


# -- subcommands -------------------------------------------------------------

def cmd_basis(args):
    from .hall import generate_hall, name_of, render, validate_hall, witt_dimension
    cfg = RunConfig("basis", degree=args.degree, policy=args.policy, output=args.output)
    basis = generate_hall(args.letters, cfg.degree, cfg.policy)
    lines = [f"# {len(basis)} elements, {args.letters} letters, degree <= {cfg.degree}, policy {cfg.policy}"]
    for i, b in enumerate(basis.elements):
        nm = name_of(b)
        label = f"  {nm}" if args.letters == 2 and nm != render(b) else ""
        lines.append(f"{i:4d}  {render(b)}{label}")
    lines.append("")
    lines.append("degree  count  witt  cumulative")
    total = 0
    for n in range(1, cfg.degree + 1):
        count = len(basis.of_degree(n))
        total += count
        lines.append(f"{n:6d}  {count:5d}  {witt_dimension(args.letters, n):4d}  {total:10d}")
    violations = validate_hall(basis)
    lines.append("validation: " + ("pass" if not violations else f"{len(violations)} violation(s)"))
    for v in violations:
        lines.append(f"  {v}")
    text = "\n".join(lines) + "\n"
    if args.dump:
        _write(args.dump, basis.dump())
    _write(cfg.output, text)
    return EXIT_NEGATIVE if violations else EXIT_OK


def cmd_order(args):
    from .freealg import format_scalar
    from .hall import name_of
    from .scheme import DiracControl, control_to_scheme, order_of_scheme
    obj = _load_scheme_or_control(args.file)
    s = control_to_scheme(obj) if isinstance(obj, DiracControl) else obj
    rep = order_of_scheme(s, N_max=args.nmax, policy=args.policy)
    if args.json:
        print(json.dumps({
            "order": rep.order, "at_least": rep.at_least, "defect_degree": rep.defect_degree,
            "defect": {name_of(b): format_scalar(v) for b, v in rep.defect.items()}}, indent=2))
    else:
        print(rep)
        for b, v in rep.defect.items():
            print(f"  {name_of(b)} = {_dual(v)}")
    return EXIT_OK


def cmd_search(args):
    from .scheme import dump_scheme
    from .search import SearchFailure, load_spec, solve
    spec = load_spec(_read(args.spec), source=args.spec)
    if args.seed is not None:
        spec.seed = args.seed
    if args.restarts is not None:
        spec.restarts = args.restarts
    if args.stages is not None:
        spec.stages = args.stages
        spec.pattern = None if spec.pattern is None or len(spec.pattern) != args.stages else spec.pattern
    progress = (lambda i, r: print(f"restart {i}: residual {r:.3e}", file=sys.stderr)) if args.verbose else None
    try:
        result = solve(spec, progress=progress)
    except SearchFailure as exc:
        print(f"search failed: {exc}")
        if exc.best is not None:
            print(f"best residual {exc.best.residual_norm:.3e} at restart {exc.best.restart}")
        return EXIT_SEARCH
    out = result.certificate if result.certificate is not None else result.scheme
    _write(args.output, dump_scheme(out))
    stream = sys.stderr if args.output in (None, "-") else sys.stdout
    print(f"residual norm {result.residual_norm:.3e} (restart {result.restart})", file=stream)
    print(result.verification, file=stream)
    return EXIT_OK


def cmd_verify(args):
    from .numverify import DEFAULT_GRID, empirical_order, get_system
    from .scheme import DiracControl, control_to_scheme
    obj = _load_scheme_or_control(args.file)
    s = control_to_scheme(obj) if isinstance(obj, DiracControl) else obj
    system = get_system(args.system)
    grid = DEFAULT_GRID
    if args.grid:
        lo, hi = (int(x) for x in args.grid.split(":"))
        grid = tuple(2.0 ** -k for k in range(lo, hi + 1))
    rep = empirical_order(s, system, grid=grid, mode=args.mode)
    if args.csv:
        _write(args.csv, rep.to_csv())
    else:
        sys.stdout.write(rep.to_csv())
    print(rep.summary())
    if args.expect is not None:
        if rep.exact:
            return EXIT_OK
        need = args.expect + (1 if args.mode == "one-step" else 0) - args.tolerance
        if rep.slope is None or rep.slope < need:
            print(f"expected order {args.expect}: slope below {need:.2f}")
            return EXIT_NEGATIVE
    return EXIT_OK


def cmd_obstruct(args):
    from .hall import name_of
    from .obstruction import NOT_MET, max_order_bound, w1_obstruction, w2_obstruction, wN_obstruction
    from .scheme import Scheme, scheme_to_control
    if args.bound:
        if not args.flows:
            raise ConfigurationError("--bound needs --flows")
        flows = _parse_flows(args.flows)
        bound = max_order_bound(flows, search_limit=args.limit)
        names = ", ".join(name_of(f) for f in flows)
        if bound is None:
            print(f"flows {{{names}}}: unbounded by this criterion (searched N <= {args.limit})")
        else:
            print(f"flows {{{names}}}: max order {bound}")
        return EXIT_OK
    if not args.file:
        raise ConfigurationError("a control or scheme file is required unless --bound is given")
    obj = _load_scheme_or_control(args.file)
    c = scheme_to_control(obj.normalized()) if isinstance(obj, Scheme) else obj
    if args.family == "w1":
        rep = w1_obstruction(c)
    elif args.family == "w2":
        rep = w2_obstruction(c)
    else:
        flows = _parse_flows(args.flows) if args.flows else None
        rep = wN_obstruction(c, args.N, flows)
    if args.json:
        print(rep.dumps())
    else:
        print(f"bracket: {name_of(rep.bracket)}")
        print(f"functional: {_dual(rep.functional_value)}")
        for k, v in rep.constraint_residuals.items():
            print(f"  hypothesis {k}: defect {_dual(v)}")
        print(f"verdict: {rep.verdict}")
        if rep.coordinate_sum is not None:
            terms = " ".join(("+ " if sign > 0 else "- ") + f"zeta_{name_of(t)}" for t, sign in rep.terms)
            print(f"coordinates: {terms.lstrip('+ ')} = {_dual(rep.coordinate_sum)}; "
                  f"identity {'holds' if rep.identity_holds else 'FAILS'}")
    return EXIT_NEGATIVE if rep.verdict == NOT_MET or rep.identity_holds is False else EXIT_OK


# -- entry point -------------------------------------------------------------

def build_parser():
    p = argparse.ArgumentParser(prog="splitorder", description="Order conditions and obstructions "
                                "for splitting schemes with a drift and a controlled flow.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    b = sub.add_parser("basis", help="list a Hall basis with Witt counts")
    b.add_argument("--letters", type=int, default=2)
    b.add_argument("--degree", type=int, default=5)
    b.add_argument("--policy", choices=["bstar", "lyndon"], default="bstar")
    b.add_argument("--output", "-o")
    b.add_argument("--dump", help="also write the basis in reloadable form")
    b.set_defaults(func=cmd_basis)

    o = sub.add_parser("order", help="exact order of a scheme")
    o.add_argument("file")
    o.add_argument("--nmax", type=int, default=6)
    o.add_argument("--policy", choices=["bstar", "lyndon"], default="bstar")
    o.add_argument("--json", action="store_true")
    o.set_defaults(func=cmd_order)

    s = sub.add_parser("search", help="search for a scheme meeting a YAML spec")
    s.add_argument("spec")
    s.add_argument("--seed", type=int)
    s.add_argument("--restarts", type=int)
    s.add_argument("--stages", type=int)
    s.add_argument("--output", "-o")
    s.set_defaults(func=cmd_search)

    v = sub.add_parser("verify", help="empirical convergence slope on a test system")
    v.add_argument("file")
    v.add_argument("--system", default="linearpair")
    v.add_argument("--mode", choices=["one-step", "multi-step"], default="one-step")
    v.add_argument("--grid", help="exponent range lo:hi for T = 2^-k (default 3:12)")
    v.add_argument("--csv", help="write the T,error table here instead of stdout")
    v.add_argument("--expect", type=int, help="exit 4 unless this order is observed")
    v.add_argument("--tolerance", type=float, default=0.3)
    v.set_defaults(func=cmd_verify)

    ob = sub.add_parser("obstruct", help="evaluate an obstruction functional or an order bound")
    ob.add_argument("file", nargs="?")
    ob.add_argument("--family", choices=["w1", "w2", "wN"], default="w1")
    ob.add_argument("--N", type=int, default=1)
    ob.add_argument("--flows", help="comma-separated brackets, e.g. X1,W1")
    ob.add_argument("--bound", action="store_true", help="print the order bound for --flows")
    ob.add_argument("--limit", type=int, default=16)
    ob.add_argument("--json", action="store_true")
    ob.set_defaults(func=cmd_obstruct)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except (ConfigurationError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SplitOrderError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NEGATIVE


if __name__ == "__main__":
    sys.exit(main())
