"""Command line interface: ``geopol etl|query|evaluate|explain|validate``.

Exit status is 0 on success, 1 for bad input (including usage errors and a
failed validation), 2 for anything unexpected.
"""

import argparse
import contextlib
import os
import sys
import tempfile
from datetime import datetime, timezone
from pathlib import Path

from .config import CliConfig, load_config, resolve_config_path
from .errors import ConfigError, GeopolError
from .geometry import Point
from .pipeline import decision_document, evaluate_request, explain, parse_request
from .policy import distance_targets, parse_policy_doc, validate_policy_set
from .relations import infer_relations
from .shapefile import load_dataset
from .store import build_store, format_timestamp, load_ntriples, serialize_ntriples
from .wkt import format_number, parse_wkt


class InputError(GeopolError):
    pass


class _ArgumentParser(argparse.ArgumentParser):
    def error(self, message):
        self.print_help(sys.stderr)
        sys.stderr.write("%s: error: %s\n" % (self.prog, message))
        raise SystemExit(1)


def _read_text(path, what):
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise InputError("cannot read %s %s: %s" % (what, path, exc.strerror)) from None


def _read_bytes(path, what):
    try:
        return Path(path).read_bytes()
    except OSError as exc:
        raise InputError("cannot read %s %s: %s" % (what, path, exc.strerror)) from None


def _config(args):
    path = resolve_config_path(args.config)
    return load_config(path) if path else CliConfig()


def _store_path(args, cfg):
    path = args.store or cfg.store
    if not path:
        raise InputError("no store file given (use --store or 'store' in the config)")
    return Path(path)


def _load_store(args, cfg):
    return load_ntriples(_read_text(_store_path(args, cfg), "store"))


def _load_policy(args, cfg, required=True, validate=True):
    path = args.policy or cfg.policy
    if not path:
        if required:
            raise InputError("no policy file given (use --policy or 'policy' in the config)")
        return None
    return parse_policy_doc(_read_text(path, "policy"), validate=validate)


def _atomic_write(path, text):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=str(path.parent), prefix="." + path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def cmd_etl(args, out):
    cfg = _config(args)
    if not cfg.datasets:
        raise ConfigError("config declares no datasets")
    at = args.at or cfg.at or datetime.now(timezone.utc)
    try:
        stamp = format_timestamp(at)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    raws = []
    for spec in cfg.datasets:
        raw = load_dataset(_read_bytes(spec.shp, "shapefile"), _read_bytes(spec.dbf, "dBASE file"),
                           spec.mapping, source=spec.shp.name, encoding=spec.encoding)
        raws.append((raw, spec.base_iri, spec.label))
    store = build_store(raws, stamp)
    target = args.out or cfg.store
    if not target:
        raise InputError("no output store path (use --out or 'store' in the config)")
    _atomic_write(target, serialize_ntriples(store))
    for raw, _, label in raws:
        out.write("%s: %d features, %d skipped\n" % (label, len(raw.entries), len(raw.skipped)))
    out.write("wrote %d features to %s\n" % (len(store), target))
    return 0


def cmd_query(args, out):
    cfg = _config(args)
    store = _load_store(args, cfg)
    point = parse_wkt(args.point)
    if not isinstance(point, Point):
        raise InputError("--point must be a POINT")
    targets = set(args.distance_to or ())
    ps = _load_policy(args, cfg, required=False)
    if ps is not None:
        targets |= {f for f in distance_targets(ps) if f in store}
    facts = infer_relations(point, store, targets)
    if not facts.within and not facts.distances:
        out.write("no relations\n")
        return 0
    for f in sorted(facts.within):
        out.write("within %s\n" % f)
    for f, d in facts.distances.items():
        out.write("distance %s %s km\n" % (f, format_number(round(d, 6))))
    return 0


def _decisions(args):
    cfg = _config(args)
    store = _load_store(args, cfg)
    ps = _load_policy(args, cfg)
    requests = [parse_request(_read_text(p, "request")) for p in args.request]
    return [evaluate_request(r, store, ps) for r in requests]


def cmd_evaluate(args, out):
    for d in _decisions(args):
        out.write(decision_document(d))
    return 0


def cmd_explain(args, out):
    for i, d in enumerate(_decisions(args)):
        if i:
            out.write("\n")
        out.write(explain(d))
    return 0


def cmd_validate(args, out):
    cfg = _config(args)
    ps = _load_policy(args, cfg, validate=False)
    store_path = args.store or cfg.store
    store = _load_store(args, cfg) if store_path else None
    report = validate_policy_set(ps, store)
    for line in report.lines():
        out.write(line + "\n")
    if report.ok:
        out.write("ok: %d classes, %d provisions, %d warnings\n"
                  % (len(ps.classes), len(ps.provisions), len(report.warnings)))
        return 0
    return 1


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="config file (default: $GEOPOL_CONFIG or ./geopol.cfg)")

    parser = _ArgumentParser(prog="geopol", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True

    p = sub.add_parser("etl", parents=[common], help="ingest shapefiles into an N-Triples store")
    p.add_argument("--at", help="ETL timestamp (ISO 8601); default: config 'at' or now")
    p.add_argument("--out", help="store file to write (default: config 'store')")
    p.set_defaults(func=cmd_etl)

    p = sub.add_parser("query", parents=[common], help="print within/distance relations for a point")
    p.add_argument("--point", required=True, help='WKT point, e.g. "POINT(-112.07 33.45)"')
    p.add_argument("--distance-to", action="append", metavar="IRI",
                   help="feature to measure distance to (repeatable)")
    p.add_argument("--store")
    p.add_argument("--policy", help="also measure distances used by this policy's classes")
    p.set_defaults(func=cmd_query)

    for name, func, text in (("evaluate", cmd_evaluate, "print decision documents"),
                             ("explain", cmd_explain, "print decision explanations")):
        p = sub.add_parser(name, parents=[common], help=text)
        p.add_argument("--request", required=True, action="append", metavar="FILE",
                       help="request document (repeatable)")
        p.add_argument("--store")
        p.add_argument("--policy")
        p.set_defaults(func=func)

    p = sub.add_parser("validate", parents=[common], help="check a policy against a store")
    p.add_argument("--store")
    p.add_argument("--policy")
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv=None, out=None, err=None):
    out = out or sys.stdout
    err = err or sys.stderr
    parser = build_parser()
    try:
        with contextlib.redirect_stderr(err):
            args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 1
    try:
        return args.func(args, out)
    except GeopolError as exc:
        err.write("geopol %s: %s: %s\n" % (args.command, type(exc).__name__, exc))
        return 1
    except Exception as exc:  # pragma: no cover - exercised only by bugs
        err.write("geopol %s: internal error: %r\n" % (args.command, exc))
        return 2


if __name__ == "__main__":
    sys.exit(main())
