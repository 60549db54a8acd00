"""Command line entry point: ``run``, ``validate``, ``synth`` and ``inspect``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from collections import Counter
from pathlib import Path

from .config import ConfigError, load_config

logger = logging.getLogger("hexmarkov")

EXIT_OK, EXIT_CONFIG, EXIT_DATA = 0, 2, 3


def _cmd_run(args) -> int:
    from .pipeline import DataError, run

    try:
        cfg = load_config(args.config, out_dir=args.out, workers=args.workers)
        manifest = run(cfg)
    except ConfigError as exc:
        logger.error("configuration error: %s", exc)
        return EXIT_CONFIG
    except DataError as exc:
        logger.error("data error: %s", exc)
        return EXIT_DATA
    print(f"wrote {len(manifest['files'])} files to {cfg.output_dir}")
    return EXIT_OK


def _cmd_validate(args) -> int:
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        logger.error("configuration error: %s", exc)
        return EXIT_CONFIG
    print(f"config ok: {len(cfg.inputs)} input(s), {len(cfg.windows)} window(s), "
          f"{len(cfg.categories)} categories, grid edge {cfg.grid.edge_length_m} m")
    return EXIT_OK


def _cmd_synth(args) -> int:
    from .synth import ScenarioError, load_scenario, write_csv

    try:
        scenario = load_scenario(args.scenario)
        n = write_csv(scenario, args.out)
    except (ScenarioError, OSError) as exc:
        logger.error("scenario error: %s", exc)
        return EXIT_CONFIG
    print(f"wrote {n} records to {args.out}")
    return EXIT_OK


def _top_mm(pairs, k=10):
    ranked = sorted(pairs.items(), key=lambda kv: (-kv[1], kv[0]))
    return ranked[:k]


def _inspect_model(path: Path) -> None:
    from .export import read_model, read_stationary

    m = read_model(path)
    sibling = path.with_name("stationary.csv")
    if sibling.exists():
        n_states = len(read_stationary(sibling))
    else:
        n_states = len(set(m["i_cell"]) | set(m["j_cell"]))
    mm = Counter()
    for cell, n in zip(m["i_cell"], m["N"]):
        mm[cell] += n
    print(f"states: {n_states}")
    print(f"transitions: {sum(m['N'])}")
    print("top MM cells:")
    for cell, v in _top_mm(mm):
        print(f"  {cell}\t{v}")


def _inspect_metrics(path: Path) -> None:
    from .export import read_metrics

    rows = read_metrics(path)
    print(f"states: {len(rows)}")
    print(f"transitions: {sum(r['MM'] for r in rows)}")
    print("top MM cells:")
    for cell, v in _top_mm({r["cell"]: r["MM"] for r in rows if r["MM"] > 0}):
        print(f"  {cell}\t{v}")


def _cmd_inspect(args) -> int:
    path = Path(args.artifact)
    if not path.is_file():
        logger.error("no such artifact: %s", path)
        return EXIT_CONFIG
    if path.name.endswith("model.csv"):
        _inspect_model(path)
    elif path.name.endswith("metrics.csv"):
        _inspect_metrics(path)
    elif path.suffix == ".json":
        data = json.loads(path.read_text(encoding="utf-8"))
        if "n_states" in data:
            print(f"states: {data['n_states']}")
            print(f"transitions: {data['n_transitions']}")
            for key in ("avg_path_length", "modularity", "excluded_pairs"):
                print(f"{key}: {data[key]}")
            for key, v in sorted(data["phi"].items()):
                print(f"phi[{key}]: {v}")
        else:
            print(json.dumps(data.get("row_counts", data), indent=2, sort_keys=True))
    else:
        logger.error("don't know how to inspect %s", path.name)
        return EXIT_CONFIG
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hexmarkov", description=__doc__)
    parser.add_argument("-v", "--verbose", action="count", default=0, help="more logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run the full pipeline")
    p.add_argument("--config", required=True)
    p.add_argument("--workers", type=int, default=None, help="override the configured worker count")
    p.add_argument("--out", default=None, help="output directory (beats HEXMARKOV_OUT and the config)")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("validate", help="check a config file without running")
    p.add_argument("--config", required=True)
    p.set_defaults(func=_cmd_validate)

    p = sub.add_parser("synth", help="generate a synthetic AIS CSV from a scenario")
    p.add_argument("--scenario", required=True)
    p.add_argument("--out", required=True, help="CSV path to write")
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("inspect", help="print statistics of one artifact")
    p.add_argument("artifact")
    p.set_defaults(func=_cmd_inspect)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
