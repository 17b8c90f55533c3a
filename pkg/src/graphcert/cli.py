"""Command-line entry point.

Exit status: 0 success, 1 usage error, 2 data error, 3 verification found
violations.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import io as fio
from .certify import Certificate, VoteTally, certified_accuracy_curve, certify
from .division import HashScheme, Strategy, Task, TaskKind, divide
from .gnn import TrainConfig, TrainingDiverged, init_params, train
from .graph import PerturbationError
from .perturb import AttackSpace, EnumerationTooLarge, theorem_sweep, verify_certificate
from .pipeline import DEFAULT_T, RunConfig, StageError, config_from_manifest, run_pipeline
from .synthetic import SyntheticSpec, derive_seed, family, generate, split

EXIT_USAGE, EXIT_DATA, EXIT_VIOLATION = 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _global_flags() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--hash", choices=["md5", "sha256"], default="md5")
    p.add_argument("--T", type=int, default=None, help="subgraph count (default 6 node task, 10 graph task)")
    p.add_argument("--strategy", choices=["edge", "node"], default="edge")
    p.add_argument("--task", choices=["node", "graph"], default="node")
    p.add_argument("--out", default=None, help="output directory or file")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def _m_range(text: str) -> list[int]:
    if ".." in text:
        lo, hi = text.split("..", 1)
        return list(range(int(lo), int(hi) + 1))
    return [int(t) for t in text.split(",")]


def build_parser() -> argparse.ArgumentParser:
    common = _global_flags()
    parser = _Parser(prog="graphcert", description="Certified graph classification by hash-divided voting.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("generate", parents=[common], help="write a synthetic dataset")
    p.add_argument("--family", choices=["sbm", "caveman", "graphs"], default="sbm")
    p.add_argument("--n-per-block", type=int, default=8)
    p.add_argument("--p-in", type=float, default=0.9)
    p.add_argument("--p-out", type=float, default=0.05)
    p.add_argument("--cliques", type=int, default=3)
    p.add_argument("--clique-size", type=int, default=4)
    p.add_argument("--num-graphs", type=int, default=20)
    p.add_argument("--min-size", type=int, default=5)
    p.add_argument("--max-size", type=int, default=8)
    p.add_argument("--dim", type=int, default=4)

    p = sub.add_parser("divide", parents=[common], help="split a graph into T subgraph files")
    p.add_argument("--graph", required=True)

    p = sub.add_parser("train", parents=[common], help="train a GCN on a dataset file")
    p.add_argument("--data", required=True, help="dataset or graph JSON")
    p.add_argument("--epochs", type=int, default=200)
    p.add_argument("--lr", type=float, default=0.1)
    p.add_argument("--hidden", type=int, nargs="*", default=[16])
    p.add_argument("--augment", action="store_true", help="also train on each graph's subgraphs")

    p = sub.add_parser("certify", parents=[common], help="certify a node or graph(s)")
    p.add_argument("--graph", required=True, help="graph or dataset JSON")
    p.add_argument("--params", required=True)
    p.add_argument("--node", type=int, default=None)
    p.add_argument("--split", default=None, help="restrict dataset targets to this split")

    p = sub.add_parser("curve", parents=[common], help="certified accuracy per perturbation size")
    p.add_argument("--certs", required=True, help="certificates JSON written by certify")
    p.add_argument("--m", type=_m_range, default=None, help="e.g. 0..5 or 0,2,4")

    p = sub.add_parser("verify", parents=[common], help="attack a certificate by enumeration")
    p.add_argument("--graph", required=True)
    p.add_argument("--params", required=True)
    p.add_argument("--node", type=int, default=None)
    p.add_argument("--budget", type=int, required=True)
    mode = p.add_mutually_exclusive_group()
    mode.add_argument("--exhaustive", action="store_true")
    mode.add_argument("--samples", type=int, default=None)
    p.add_argument("--max-incident", type=int, default=2)
    p.add_argument("--max-injected", type=int, default=1)

    p = sub.add_parser("sweep", parents=[common], help="per-theorem altered-vs-bound table")
    p.add_argument("--family", choices=["path", "cycle", "star", "complete", "er"], required=True)
    p.add_argument("--max-nodes", type=int, default=5)
    p.add_argument("--edge-budget", type=int, default=1)
    p.add_argument("--max-degree", type=int, default=3)

    p = sub.add_parser("pipeline", parents=[common], help="generate, train, certify and report")
    p.add_argument("--family", choices=["sbm", "caveman", "graphs"], default="sbm")
    p.add_argument("--manifest", default=None, help="rerun from a previous manifest.json")
    p.add_argument("--epochs", type=int, default=200)
    p.add_argument("--lr", type=float, default=0.1)
    p.add_argument("--n-per-block", type=int, default=8)
    p.add_argument("--verify-budget", type=int, default=None)
    p.add_argument("--sweep", choices=["path", "cycle", "star", "complete", "er"], default=None)
    return parser


def _emit(text: str, out: str | None, default_name: str) -> None:
    if out is None:
        sys.stdout.write(text)
        return
    path = Path(out)
    if path.is_dir():
        path = path / default_name
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


def _T(args) -> int:
    return args.T or DEFAULT_T[TaskKind(args.task)]


def cmd_generate(args) -> int:
    opts = {"dim": args.dim}
    if args.family == "sbm":
        opts.update(n_per_block=args.n_per_block, p_in=args.p_in, p_out=args.p_out)
    elif args.family == "caveman":
        opts.update(cliques=args.cliques, clique_size=args.clique_size)
    else:
        opts.update(num_graphs=args.num_graphs, size_range=(args.min_size, args.max_size))
    spec = SyntheticSpec(args.family, opts, derive_seed(args.seed, "generate"))
    graphs = generate(spec)
    task = spec.task()
    items = list(graphs[0].nodes) if task == "node" else list(range(len(graphs)))
    fractions = (0.3, 0.1, 0.6) if task == "node" else (0.5, 0.2, 0.3)
    parts = split(items, fractions, derive_seed(args.seed, "split"))
    out = Path(args.out or ".")
    path = out / "dataset.json" if out.suffix != ".json" else out
    path.parent.mkdir(parents=True, exist_ok=True)
    fio.save_dataset(graphs, parts, path, task)
    print(path)
    return 0


def cmd_divide(args) -> int:
    g = fio.load_graph(args.graph)
    T = _T(args)
    subs = divide(g, T, HashScheme(args.hash), args.strategy, args.task)
    out = Path(args.out or "subgraphs")
    out.mkdir(parents=True, exist_ok=True)
    files = []
    for i, sg in enumerate(subs, start=1):
        name = f"subgraph_{i:03d}.json"
        fio.save_graph(sg, out / name)
        files.append({"index": i, "file": name, "nodes": len(sg.nodes), "edges": len(sg.edges)})
    manifest = {"T": T, "strategy": args.strategy, "task": args.task, "hash": args.hash, "subgraphs": files}
    (out / "manifest.json").write_text(fio.dumps(manifest))
    print(out / "manifest.json")
    return 0


def _training_items(graphs, parts, task: str):
    if task == "node":
        g = graphs[0]
        ids = parts.get("train") or [u for u in g.nodes if g.label(u) is not None]
        return [(g, {u: g.label(u) for u in ids if g.label(u) is not None})]
    ids = parts.get("train") or range(len(graphs))
    return [(graphs[i], graphs[i].graph_label) for i in ids]


def cmd_train(args) -> int:
    graphs, parts, _ = fio.load_dataset(args.data)
    data = _training_items(graphs, parts, args.task)
    cfg = TrainConfig(
        epochs=args.epochs, learning_rate=args.lr, seed=args.seed, hidden=tuple(args.hidden),
        task=TaskKind(args.task), augment_with_subgraphs=args.augment, T=_T(args),
        scheme=HashScheme(args.hash), strategy=Strategy(args.strategy),
    )
    params = train(data, cfg)
    _emit(fio.dumps(fio.params_to_dict(params)), args.out, "params.json")
    return 0


def _targets(args, graphs, parts):
    if args.task == "node":
        g = graphs[0]
        if getattr(args, "node", None) is not None:
            return [(g, Task.node(args.node), g.label(args.node) if args.node in g.index else None)]
        ids = parts.get(args.split) if getattr(args, "split", None) else None
        ids = ids or [u for u in g.nodes if g.label(u) is not None]
        return [(g, Task.node(v), g.label(v)) for v in ids]
    ids = parts.get(args.split) if getattr(args, "split", None) else None
    ids = ids if ids is not None else range(len(graphs))
    return [(graphs[i], Task.graph(), graphs[i].graph_label) for i in ids]


def cmd_certify(args) -> int:
    graphs, parts, _ = fio.load_dataset(args.graph)
    params = fio.load_params(args.params)
    scheme = HashScheme(args.hash)
    records = []
    for g, task, label in _targets(args, graphs, parts):
        cert = certify(g, task, _T(args), scheme, args.strategy, params)
        records.append(fio.certificate_record(cert, label, task.target))
    single = args.node is not None or (args.task == "graph" and len(graphs) == 1 and args.split is None)
    _emit(fio.dumps(records[0] if single else records), args.out, "certificates.json")
    return 0


def cmd_curve(args) -> int:
    recs = json.loads(Path(args.certs).read_text())
    if isinstance(recs, dict):
        recs = [recs]
    missing = [k for k, r in enumerate(recs) if r.get("label") is None]
    if missing:
        raise fio.DataError(f"{args.certs}: certificate {missing[0]} has no true label")
    certs = [
        Certificate(r["class"], r["runner_up"], VoteTally(tuple(r["counts"])), r["M"],
                    Strategy(args.strategy), Task.graph())
        for r in recs
    ]
    ms = args.m if args.m is not None else list(range(max(c.M for c in certs) + 1))
    _emit(fio.curve_csv(certified_accuracy_curve(certs, [r["label"] for r in recs], ms)), args.out, "curve.csv")
    return 0


def cmd_verify(args) -> int:
    graphs, _, _ = fio.load_dataset(args.graph)
    g = graphs[0]
    params = fio.load_params(args.params)
    if args.task == "node" and args.node is None:
        raise fio.DataError("--node is required for the node task")
    task = Task.node(args.node) if args.task == "node" else Task.graph()
    cert = certify(g, task, _T(args), HashScheme(args.hash), args.strategy, params)
    space = AttackSpace(
        budget=args.budget, strategy=Strategy(args.strategy), exhaustive=args.samples is None,
        samples=args.samples or 0, seed=args.seed,
        max_incident_edges=args.max_incident, max_injected=args.max_injected,
    )
    rep = verify_certificate(g, cert, space, params)
    body = {
        "certificate": cert.to_json(),
        "budget": args.budget,
        "budget_exceeds_M": args.budget > cert.M,
        "attacks_tried": rep.attacks_tried,
        "max_altered": rep.max_altered,
        "violations": [
            {"perturbation": fio.perturbation_to_dict(p), "expected": e, "observed": o}
            for p, e, o in rep.violations
        ],
        "bound_violations": [
            {"perturbation": fio.perturbation_to_dict(p), "altered": a, "bound": b}
            for p, a, b in rep.bound_violations
        ],
    }
    _emit(fio.dumps(body), args.out, "verify.json")
    return EXIT_VIOLATION if rep.violations else 0


def cmd_sweep(args) -> int:
    graphs = list(family(args.family, args.max_nodes, seed=derive_seed(args.seed, "sweep")))
    params = init_params((graphs[0].dim, 8, 3), derive_seed(args.seed, "sweep-params"))
    rows = theorem_sweep(graphs, args.strategy, args.task, _T(args), HashScheme(args.hash), params,
                         edge_budget=args.edge_budget, max_degree=args.max_degree)
    _emit(fio.sweep_csv(rows.values()), args.out, "sweep.csv")
    return EXIT_VIOLATION if any(r.failures for r in rows.values()) else 0


def cmd_pipeline(args) -> int:
    if args.manifest:
        cfg = config_from_manifest(args.manifest)
        if args.out:
            cfg.out = args.out
    else:
        family_name = "graphs" if args.task == "graph" and args.family == "sbm" else args.family
        opts = {"n_per_block": args.n_per_block} if family_name == "sbm" else {}
        cfg = RunConfig(
            out=args.out or "run", seed=args.seed, data=SyntheticSpec(family_name, opts),
            T=args.T, hash=args.hash, strategy=args.strategy, epochs=args.epochs,
            learning_rate=args.lr, verify_budget=args.verify_budget, sweep_family=args.sweep,
        )
    for name, path in sorted(run_pipeline(cfg).items()):
        print(f"{name}\t{path}")
    return 0


COMMANDS = {
    "generate": cmd_generate, "divide": cmd_divide, "train": cmd_train, "certify": cmd_certify,
    "curve": cmd_curve, "verify": cmd_verify, "sweep": cmd_sweep, "pipeline": cmd_pipeline,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.T is not None and args.T < 1:
        parser.error("--T must be >= 1")
    try:
        return COMMANDS[args.command](args)
    except (fio.DataError, PerturbationError, KeyError, FileNotFoundError, EnumerationTooLarge,
            TrainingDiverged, StageError, ValueError) as exc:
        print(f"graphcert {args.command}: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
