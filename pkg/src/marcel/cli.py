"""Command-line entry point: ``marcel <command> ...``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from collections import defaultdict
from dataclasses import replace
from pathlib import Path

from marcel.errors import MarcelError


def _cmd_prepare(args) -> int:
    from marcel.bench.data import dataset_statistics, prepare_dataset
    from marcel.io.dataset import sample_listing

    skips: list[str] = []
    manifest, samples = prepare_dataset(args.manifest, deduplicate=args.dedup, skip_log=skips,
                                        workers=args.workers)
    stats = dataset_statistics(samples)
    print(f"dataset\t{manifest.name}")
    print(f"molecules\t{stats['molecules']}")
    print(f"conformers\t{stats['conformers']}")
    print(f"skipped\t{len(skips)}")
    if args.out:
        Path(args.out).write_text(sample_listing(samples))
    return 0


def _cmd_dedup(args) -> int:
    from marcel.chem import ConformerEnsemble, boltzmann_constant
    from marcel.geometry import deduplicate_ensemble
    from marcel.io.sdf import parse_sdf, write_sdf

    kB = boltzmann_constant(args.energy_unit)
    groups: dict[str, list] = defaultdict(list)
    for mol, conf, props in parse_sdf(args.sdf, energy_tag=args.energy_tag, require_energy=True):
        groups[mol.identifier].append((mol, conf, props))
    out_records, summary = [], []
    print("molecule\tbefore\tafter")
    for ident, recs in groups.items():
        mol = recs[0][0]
        ens = ConformerEnsemble.weighted(mol, [c for _, c, _ in recs], args.temperature, kB)
        kept = deduplicate_ensemble(ens, args.threshold, automorphism_cap=args.automorphism_cap,
                                    heavy_only=args.heavy_only, temperature=args.temperature, kB=kB,
                                    workers=args.workers)
        by_id = {id(c): p for _, c, p in recs}
        out_records += [(mol, c, by_id[id(c)]) for c in kept.conformers]
        print(f"{ident}\t{len(ens)}\t{len(kept)}")
        alive = {id(c) for c in kept.conformers}
        summary.append({"molecule": ident, "conformers": len(ens), "clusters": len(kept),
                        "survivors": [i for i, c in enumerate(ens.conformers) if id(c) in alive]})
    if args.out:
        write_sdf(out_records, args.out)
    if args.summary:
        Path(args.summary).write_text(json.dumps({"threshold": args.threshold, "molecules": summary}, indent=2))
    return 0


def _cmd_train(args) -> int:
    from marcel.bench.config import load_config
    from marcel.bench.experiment import run_experiment, select_best

    config = load_config(args.config)
    overrides = {k: v for k, v in (("seed", args.seed), ("epochs", args.epochs), ("repeats", args.repeats))
                 if v is not None}
    if args.resplit:
        overrides["resplit"] = True
    config = replace(config, **overrides)
    records = run_experiment(config, results_path=args.results, bundle_dir=args.bundle_dir)
    print("seed\tsplit_seed\tepochs_run\tbest_epoch\tval_mae\ttest_mae\tstatus")
    for r in records:
        status = f"aborted: {r.abort_reason}" if r.aborted else "ok"
        print(f"{r.seed}\t{r.split_seed}\t{r.epochs_run}\t{r.best_epoch}\t{r.val_mae:.6g}\t{r.test_mae:.6g}\t{status}")
    best = select_best(records)
    if best is None:
        print("selected\tnone (all repeats aborted)")
        return 1
    print(f"selected\tseed={best.seed}\ttest_mae={best.test_mae:.6g}")
    return 0


def _cmd_evaluate(args) -> int:
    from marcel.bench.bundle import load_bundle
    from marcel.bench.data import prepare_dataset
    from marcel.bench.train import evaluate_mae, model_predictions

    model, config, split, meta = load_bundle(args.model)
    _, samples = prepare_dataset(args.dataset or config.dataset)
    if len(samples) != split.n:
        raise MarcelError(f"dataset has {len(samples)} samples but the bundle's split covers {split.n}")
    chosen = [samples[k] for k in split.part(args.split)]
    preds = model_predictions(model, chosen, scheme=args.scheme, seed=meta["seed"])
    mae = evaluate_mae(preds, [s.targets[config.task] for s in chosen])
    print(f"split\t{args.split}\nsamples\t{len(chosen)}\nmae\t{mae:.6g}")
    return 0


def _cmd_report(args) -> int:
    from marcel.bench.report import format_table, render_figure, summarize
    from marcel.io.results import read_results

    rows = summarize(read_results(args.results))
    sys.stdout.write(format_table(rows))
    if args.csv:
        Path(args.csv).write_text(format_table(rows, delimiter=","))
    if not args.no_figure and rows:
        figure = Path(args.figure) if args.figure else Path(args.results).with_suffix(".png")
        render_figure(rows, figure)
        print(f"# figure written to {figure}", file=sys.stderr)
    return 0


def _cmd_synth(args) -> int:
    from marcel.synthetic import make_samples, write_dataset

    samples = make_samples(args.molecules, args.conformers, seed=args.seed)
    path = write_dataset(samples, args.out)
    print(f"manifest\t{path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="marcel", description="Conformer-ensemble learning benchmark tools.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("prepare", help="load, label and deduplicate a dataset; print counts")
    s.add_argument("manifest")
    s.add_argument("--dedup", dest="dedup", action="store_true", default=None, help="force deduplication")
    s.add_argument("--no-dedup", dest="dedup", action="store_false", help="skip deduplication")
    s.add_argument("--out", help="write a canonical sample listing here")
    s.add_argument("--workers", type=int, default=1)
    s.set_defaults(func=_cmd_prepare)

    s = sub.add_parser("dedup", help="RMSD-deduplicate the conformers of an SDF file")
    s.add_argument("sdf")
    s.add_argument("--threshold", type=float, required=True, help="RMSD threshold in angstrom")
    s.add_argument("--out", help="write surviving conformers to this SDF")
    s.add_argument("--summary", help="write a JSON summary (clusters and surviving indices per molecule)")
    s.add_argument("--energy-tag", default="energy")
    s.add_argument("--energy-unit", default="kcal/mol")
    s.add_argument("--temperature", type=float, default=298.15)
    s.add_argument("--heavy-only", action="store_true")
    s.add_argument("--automorphism-cap", type=int, default=10_000)
    s.add_argument("--workers", type=int, default=1)
    s.set_defaults(func=_cmd_dedup)

    s = sub.add_parser("train", help="run an experiment (all repeats) from a config file")
    s.add_argument("--config", required=True)
    s.add_argument("--seed", type=int)
    s.add_argument("--epochs", type=int)
    s.add_argument("--repeats", type=int)
    s.add_argument("--resplit", action="store_true", help="draw a new split for every repeat")
    s.add_argument("--results", default="results.jsonl", help="JSON-lines file to append records to")
    s.add_argument("--bundle-dir", default="models", help="directory for model bundles")
    s.set_defaults(func=_cmd_train)

    s = sub.add_parser("evaluate", help="score a saved model bundle on one split")
    s.add_argument("--model", required=True)
    s.add_argument("--split", default="test", choices=("train", "val", "test"))
    s.add_argument("--scheme", choices=("fixed", "random", "all"), help="override the evaluation scheme")
    s.add_argument("--dataset", help="override the dataset manifest recorded in the bundle")
    s.set_defaults(func=_cmd_evaluate)

    s = sub.add_parser("report", help="summarize a results file (TSV on stdout, optional CSV, PNG figure)")
    s.add_argument("--results", required=True)
    s.add_argument("--csv", help="also write the summary as CSV")
    s.add_argument("--figure", help="PNG path (default: results path with .png suffix)")
    s.add_argument("--no-figure", action="store_true")
    s.set_defaults(func=_cmd_report)

    s = sub.add_parser("synth", help="write a synthetic chain-conformer dataset")
    s.add_argument("--out", required=True)
    s.add_argument("--molecules", type=int, default=500)
    s.add_argument("--conformers", type=int, default=8)
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=_cmd_synth)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (MarcelError, OSError) as exc:
        print(f"marcel {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
