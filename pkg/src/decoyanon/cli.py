"""Command-line entry point: ``decoyanon <command> ...``.

Exit codes: 0 success, 2 validation error, 3 capacity/budget violation, 4 I/O error.

All randomness derives from ``--seed`` through ``derive_seed(seed, stage)``
with these stage names: ``sample`` (anonymize), ``decoys`` (release:
selection and materialization), ``release`` (row shuffling and hardening),
``report:sample:<run>`` (report).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import statistics
import sys
from pathlib import Path

from decoyanon import __version__
from decoyanon._util import atomic_write_text, derive_seed, read_json, write_json
from decoyanon.anonymizer import LOSS_METRICS, AnonymizedView, build_view, ola_search, write_view
from decoyanon.attribution import DEFAULT_DELIMITERS, attribute, scan_file
from decoyanon.collusion import attack_report, close_to_k_census
from decoyanon.dataset import (load_dataset, load_schema, sample_uniform, save_dataset,
                               schema_to_doc, strip_direct, read_table)
from decoyanon.decoys import (STRATEGIES, DecoyPolicy, DecoyRegistry, HardeningPolicy,
                              make_releases, write_releases)
from decoyanon.errors import DecoyAnonError, InfeasibleError
from decoyanon.hierarchy import bind_hierarchies, hierarchies_to_doc, load_hierarchies
from decoyanon.linkage import (discover_candidates, feasibility_summary, link_classes,
                               risk_profile)
from decoyanon import synthpop


def _load_inputs(data: str, schema_path: str, hier_path: str):
    schema = load_schema(schema_path)
    hierarchies = bind_hierarchies(schema, load_hierarchies(hier_path))
    return load_dataset(data, schema), schema, hierarchies


def load_view(manifest_path: str) -> AnonymizedView:
    """Rebuild an anonymized view from the ``view.json`` written by ``anonymize``."""
    base = Path(manifest_path).resolve().parent
    m = read_json(manifest_path)
    src = {key: str(base / m["inputs"][key]) for key in ("source", "schema", "hierarchies")}
    d, _, hierarchies = _load_inputs(src["source"], src["schema"], src["hierarchies"])
    d = strip_direct(d)
    lv = [m["level_vector"][q] for q in d.quasi_names]
    return build_view(d, lv, m["k"], m["suppression_limit"], hierarchies)


def _view_population(args):
    view = load_view(args.view)
    m = read_json(args.view)
    base = Path(args.view).resolve().parent
    schema_path = args.population_schema or str(base / m["inputs"]["schema"])
    population = strip_direct(load_dataset(args.population, load_schema(schema_path)))
    return view, population


def cmd_synthpop(args) -> int:
    spec = synthpop.load_spec(args.spec) if args.spec else synthpop.DEFAULT_SPEC
    d = synthpop.generate(args.n, args.seed, spec)
    save_dataset(d, args.out)
    if args.schema_out:
        write_json(args.schema_out, schema_to_doc(d.schema))
    if args.hierarchies_out:
        write_json(args.hierarchies_out, hierarchies_to_doc(synthpop.population_hierarchies(spec)))
    print(f"wrote {len(d)} records to {args.out}")
    return 0


def cmd_anonymize(args) -> int:
    d, schema, hierarchies = _load_inputs(args.data, args.schema, args.hierarchies)
    out = Path(args.out_dir)
    source = Path(args.data).resolve()
    if args.sample_size is not None:
        d = sample_uniform(d, args.sample_size, derive_seed(args.seed, "sample"))
        source = out / "sample.csv"
        save_dataset(d, source)
    view = ola_search(strip_direct(d), args.k, args.suppression, args.loss, hierarchies)
    rel = lambda p: os.path.relpath(Path(p).resolve(), out.resolve())
    manifest = write_view(view, out, inputs={"source": rel(source), "schema": rel(args.schema),
                                             "hierarchies": rel(args.hierarchies)})
    print(f"level vector {manifest['level_vector']}: {manifest['classes']} classes, "
          f"{manifest['suppressed']} records suppressed")
    return 0


def cmd_feasibility(args) -> int:
    view, population = _view_population(args)
    report = link_classes(view, population)
    candidates = discover_candidates(population, view, view.k, report.min_link)
    summary = feasibility_summary(report, candidates)
    out = Path(args.out_dir)
    write_json(out / "linkage.json", report.to_doc())
    write_json(out / "candidates.json", {"min_link": report.min_link, "k": view.k,
                                         "candidates": [c.to_doc() for c in candidates]})
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["rank", "risk_factor"])
    w.writerows(enumerate(risk_profile(candidates), start=1))
    atomic_write_text(out / "risk_profile.csv", buf.getvalue())
    write_json(out / "summary.json", summary)
    print(f"minLink {summary['min_link']}  max risk {report.max_risk:.6g}  "
          f"<minLink EQ {summary['below_min_link_classes']}  "
          f"<minLink Records {summary['below_min_link_records']}")
    return 0


def cmd_release(args) -> int:
    out = Path(args.out_dir).resolve()
    registry_path = Path(args.registry).resolve()
    if out == registry_path.parent or out in registry_path.parents:
        raise argparse.ArgumentTypeError("the registry must not be written inside the release directory")
    view, population = _view_population(args)
    recipients = args.recipients.split(",") if args.recipients else args.n_recipients
    policy = DecoyPolicy(n_d=args.n_decoys, records_per_class=args.records_per_class,
                         risk_range=(args.risk_min, args.risk_max),
                         pool_fraction=args.pool_fraction, seed=derive_seed(args.seed, "decoys"))
    hardening = None
    if args.harden != "none":
        hardening = HardeningPolicy(args.harden, args.n_protect, args.budget)
    plan = make_releases(view, population, recipients, policy, hardening,
                         seed=derive_seed(args.seed, "release"))
    write_releases(plan.releases, view, out)
    plan.registry.save(registry_path)
    print(f"wrote {len(plan.releases)} releases to {out} (candidate pool {plan.pool_size}, "
          f"minLink {plan.min_link}); registry at {registry_path}")
    return 0


def cmd_collude(args) -> int:
    schema = load_schema(args.schema)
    hierarchies = bind_hierarchies(schema, load_hierarchies(args.hierarchies))
    quasi = [a.name for a in schema if a.role == "quasi"]
    tables = [read_table(p) for p in args.releases]
    report = attack_report(tables, [str(p) for p in args.releases], quasi, hierarchies, args.k,
                           mode=args.mode, strict=args.strict, bin_width=args.bin_width)
    text = json.dumps(report, indent=2) + "\n"
    if args.out:
        atomic_write_text(args.out, text)
    else:
        sys.stdout.write(text)
    for r in report["releases"]:
        print(f"{r['release']}: {len(r['suspects'])} suspect classes of {r['classes']}, "
              f"closeToK {r['close_to_k']}", file=sys.stderr)
    return 0


def cmd_attribute(args) -> int:
    registry = DecoyRegistry.load(args.registry)
    matches = scan_file(args.leak, registry, text=args.text, delimiters=args.delimiters)
    verdict = attribute(matches, registry, floor=args.floor)
    doc = verdict.to_doc()
    doc["matches"] = len(matches)
    text = json.dumps(doc, indent=2) + "\n"
    if args.out:
        atomic_write_text(args.out, text)
    else:
        sys.stdout.write(text)
    print(verdict.summary(), file=sys.stderr)
    return 0


REPORT_METRICS = ("classes", "close_to_k", "suppressed", "min_link",
                  "below_min_link_classes", "below_min_link_records")


def run_report(population, hierarchies, ks, suppressions, sample_size, runs, seed,
               loss="precision") -> list[dict]:
    """Per (k, suppression): mean and standard deviation of each metric over seeded samples."""
    samples = [sample_uniform(population, sample_size, derive_seed(seed, f"report:sample:{r}"))
               for r in range(runs)]
    rows = []
    for k in ks:
        for s in suppressions:
            values = {m: [] for m in REPORT_METRICS}
            failures = 0
            for sample in samples:
                try:
                    view = ola_search(sample, k, s, loss, hierarchies)
                except InfeasibleError:
                    failures += 1
                    continue
                report = link_classes(view, population)
                cands = discover_candidates(population, view, k, report.min_link)
                summary = feasibility_summary(report, cands)
                values["classes"].append(len(view.classes))
                values["close_to_k"].append(close_to_k_census(view.class_sizes(), k))
                values["suppressed"].append(len(view.suppressed))
                for key in ("min_link", "below_min_link_classes", "below_min_link_records"):
                    values[key].append(summary[key])
            row = {"k": k, "suppression": s, "runs": runs - failures}
            for m, vals in values.items():
                row[f"{m}_mean"] = statistics.fmean(vals) if vals else float("nan")
                row[f"{m}_std"] = statistics.stdev(vals) if len(vals) > 1 else 0.0
            rows.append(row)
    return rows


def cmd_report(args) -> int:
    d, _, hierarchies = _load_inputs(args.population, args.schema, args.hierarchies)
    population = strip_direct(d)
    ks = [int(x) for x in args.k.split(",")]
    sups = [float(x) for x in args.suppression.split(",")]
    rows = run_report(population, hierarchies, ks, sups, args.sample_size, args.runs,
                      args.seed, args.loss)
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    if args.out:
        atomic_write_text(args.out, buf.getvalue())
    sys.stdout.write(buf.getvalue())
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="decoyanon", description="k-anonymize tables, inject per-recipient decoys and trace leaks.",
                                epilog="exit codes: 0 ok, 2 invalid input, 3 capacity or budget, 4 I/O")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synthpop", help="generate a synthetic population")
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--spec", help="distribution spec (JSON); built-in default if omitted")
    s.add_argument("--out", required=True, help="output CSV")
    s.add_argument("--schema-out", help="also write the matching schema document")
    s.add_argument("--hierarchies-out", help="also write matching hierarchy definitions")
    s.set_defaults(func=cmd_synthpop)

    s = sub.add_parser("anonymize", help="k-anonymize a dataset by optimal lattice search")
    s.add_argument("--data", required=True)
    s.add_argument("--schema", required=True)
    s.add_argument("--hierarchies", required=True)
    s.add_argument("--k", type=int, required=True)
    s.add_argument("--suppression", type=float, default=0.0, help="max suppressed fraction")
    s.add_argument("--loss", choices=LOSS_METRICS, default="precision")
    s.add_argument("--sample-size", type=int, help="anonymize a uniform sample of this size")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out-dir", required=True)
    s.set_defaults(func=cmd_anonymize)

    for name, func, help_ in (("feasibility", cmd_feasibility, "link a view to a population "
                               "and list decoy candidates"),
                              ("release", cmd_release, "build per-recipient releases with decoys")):
        s = sub.add_parser(name, help=help_)
        s.add_argument("--view", required=True, help="view.json written by anonymize")
        s.add_argument("--population", required=True)
        s.add_argument("--population-schema", help="defaults to the view's schema")
        s.add_argument("--out-dir", required=True)
        s.set_defaults(func=func)
        if name == "release":
            who = s.add_mutually_exclusive_group(required=True)
            who.add_argument("--recipients", help="comma-separated recipient ids")
            who.add_argument("--n-recipients", type=int)
            s.add_argument("--registry", required=True, help="secret registry output path")
            s.add_argument("--n-decoys", type=int, default=1, help="decoy classes per recipient")
            s.add_argument("--records-per-class", type=int, help="defaults to k")
            s.add_argument("--risk-min", type=float, default=1.0)
            s.add_argument("--risk-max", type=float, default=float("inf"))
            s.add_argument("--pool-fraction", type=float)
            s.add_argument("--harden", choices=STRATEGIES, default="none")
            s.add_argument("--n-protect", type=int, default=1,
                           help="genuine classes protected per recipient")
            s.add_argument("--budget", type=float, default=1.0, help="removal budget b")
            s.add_argument("--seed", type=int, default=0)

    s = sub.add_parser("collude", help="simulate colluding recipients")
    s.add_argument("releases", nargs="+", help="recipient release CSVs")
    s.add_argument("--schema", required=True)
    s.add_argument("--hierarchies", required=True)
    s.add_argument("--k", type=int, required=True)
    s.add_argument("--mode", choices=("any", "all"), default="any")
    s.add_argument("--strict", action="store_true", help="proper parent/child only")
    s.add_argument("--bin-width", type=int, default=1)
    s.add_argument("--out")
    s.set_defaults(func=cmd_collude)

    s = sub.add_parser("attribute", help="attribute a leak to a recipient")
    s.add_argument("--registry", required=True)
    s.add_argument("--leak", required=True)
    s.add_argument("--text", action="store_true", help="treat the leak as free text lines")
    s.add_argument("--delimiters", default=DEFAULT_DELIMITERS)
    s.add_argument("--floor", type=float, default=0.5)
    s.add_argument("--out")
    s.set_defaults(func=cmd_attribute)

    s = sub.add_parser("report", help="feasibility/detectability statistics over seeded samples")
    s.add_argument("--population", required=True)
    s.add_argument("--schema", required=True)
    s.add_argument("--hierarchies", required=True)
    s.add_argument("--sample-size", type=int, required=True)
    s.add_argument("--runs", type=int, default=50)
    s.add_argument("--k", default="2,5,10,20,50")
    s.add_argument("--suppression", default="0,0.02,0.05,0.1,0.15")
    s.add_argument("--loss", choices=LOSS_METRICS, default="precision")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out")
    s.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "collude" and len(args.releases) < 2:
        parser.error("collude needs at least two release files")
    try:
        return args.func(args)
    except DecoyAnonError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except argparse.ArgumentTypeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (KeyError, json.JSONDecodeError) as exc:
        print(f"error: malformed manifest or config ({exc})", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
