"""End-to-end run: generate, train, certify, curve, and optional verification."""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path

from . import io as fio
from .certify import certified_accuracy_curve, certify
from .division import HashScheme, Strategy, Task, TaskKind
from .gnn import TrainConfig, train
from .graph import Graph
from .perturb import AttackSpace, theorem_sweep, verify_certificate
from .synthetic import SyntheticSpec, derive_seed, family, generate, split

log = logging.getLogger(__name__)

DEFAULT_T = {TaskKind.NODE: 6, TaskKind.GRAPH: 10}
SPLITS = {TaskKind.NODE: (0.3, 0.1, 0.6), TaskKind.GRAPH: (0.5, 0.2, 0.3)}


class StageError(RuntimeError):
    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage {stage!r} failed: {cause}")
        self.stage = stage


@dataclass
class RunConfig:
    out: str
    seed: int = 0
    data: SyntheticSpec = field(default_factory=SyntheticSpec)
    T: int | None = None
    hash: str = "md5"
    strategy: str = "edge"
    epochs: int = 200
    learning_rate: float = 0.1
    hidden: tuple[int, ...] = (16,)
    augment: bool = True
    m_max: int | None = None
    verify_budget: int | None = None
    verify_samples: int = 50
    sweep_family: str | None = None
    sweep_max_nodes: int = 5

    @property
    def task(self) -> TaskKind:
        return TaskKind(self.data.task())

    @property
    def subgraphs(self) -> int:
        return self.T or DEFAULT_T[self.task]

    def manifest(self) -> dict:
        d = asdict(self)
        d["T"] = self.subgraphs
        d["task"] = self.task.value
        d["hidden"] = list(self.hidden)
        d["stage_seeds"] = {s: derive_seed(self.seed, s) for s in ("generate", "split", "train")}
        return d


def _stage(name):
    def wrap(fn):
        def inner(*a, **kw):
            try:
                return fn(*a, **kw)
            except StageError:
                raise
            except Exception as exc:  # noqa: BLE001
                raise StageError(name, exc) from exc
        return inner
    return wrap


@_stage("generate")
def _generate(cfg: RunConfig):
    spec = SyntheticSpec(cfg.data.family, dict(cfg.data.options), derive_seed(cfg.seed, "generate"))
    graphs = generate(spec)
    kind = cfg.task
    if kind is TaskKind.NODE:
        items = list(graphs[0].nodes)
    else:
        items = list(range(len(graphs)))
    parts = split(items, SPLITS[kind], derive_seed(cfg.seed, "split"))
    return graphs, parts


@_stage("train")
def _train(cfg: RunConfig, graphs: list[Graph], parts):
    kind = cfg.task
    if kind is TaskKind.NODE:
        g = graphs[0]
        dataset = [(g, {u: g.label(u) for u in parts["train"]})]
        n_classes = 1 + max(y for y in g.labels if y is not None)
    else:
        dataset = [(graphs[i], graphs[i].graph_label) for i in parts["train"]]
        n_classes = 1 + max(g.graph_label for g in graphs)
    tc = TrainConfig(
        epochs=cfg.epochs, learning_rate=cfg.learning_rate, seed=derive_seed(cfg.seed, "train"),
        hidden=tuple(cfg.hidden), num_classes=n_classes, task=kind,
        augment_with_subgraphs=cfg.augment, T=cfg.subgraphs, scheme=HashScheme(cfg.hash),
        strategy=Strategy(cfg.strategy),
    )
    return train(dataset, tc)


def targets(graphs: list[Graph], parts, kind: TaskKind) -> list[tuple[Graph, Task, int]]:
    if kind is TaskKind.NODE:
        g = graphs[0]
        return [(g, Task.node(v), g.label(v)) for v in parts["test"]]
    return [(graphs[i], Task.graph(), graphs[i].graph_label) for i in parts["test"]]


@_stage("certify")
def _certify(cfg: RunConfig, tgts, params):
    scheme = HashScheme(cfg.hash)
    return [certify(g, task, cfg.subgraphs, scheme, cfg.strategy, params) for g, task, _ in tgts]


@_stage("verify")
def _verify(cfg: RunConfig, tgts, certs, params):
    out = []
    for (g, task, _), cert in zip(tgts, certs):
        budget = min(cfg.verify_budget, cert.M)
        space = AttackSpace(budget=budget, strategy=cert.strategy, exhaustive=False,
                            seed=derive_seed(cfg.seed, f"verify{len(out)}"), samples=cfg.verify_samples)
        rep = verify_certificate(g, cert, space, params)
        out.append({"target": task.target, "M": cert.M, "attacks_tried": rep.attacks_tried,
                    "violations": len(rep.violations), "bound_violations": len(rep.bound_violations)})
    return out


@_stage("sweep")
def _sweep(cfg: RunConfig):
    from .gnn import init_params

    graphs = list(family(cfg.sweep_family, cfg.sweep_max_nodes, seed=derive_seed(cfg.seed, "sweep")))
    dim = graphs[0].dim
    params = init_params((dim, 8, 3), derive_seed(cfg.seed, "sweep-params"))
    rows = theorem_sweep(graphs, cfg.strategy, cfg.task, cfg.subgraphs, HashScheme(cfg.hash), params)
    return list(rows.values())


def run_pipeline(cfg: RunConfig) -> dict[str, Path]:
    """Write dataset, params, certificates, curve (and optional reports) under ``cfg.out``."""
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    written: dict[str, Path] = {}

    def put(name: str, text: str) -> None:
        path = out / name
        path.write_text(text)
        written[name] = path

    put("manifest.json", fio.dumps(cfg.manifest()))
    graphs, parts = _generate(cfg)
    fio.save_dataset(graphs, parts, out / "dataset.json", cfg.task.value)
    written["dataset.json"] = out / "dataset.json"

    params = _train(cfg, graphs, parts)
    put("params.json", fio.dumps(fio.params_to_dict(params)))

    tgts = targets(graphs, parts, cfg.task)
    certs = _certify(cfg, tgts, params)
    records = [fio.certificate_record(c, y, t.target) for (_, t, y), c in zip(tgts, certs)]
    put("certificates.json", fio.dumps(records))

    m_max = cfg.m_max if cfg.m_max is not None else cfg.subgraphs // 2
    curve = certified_accuracy_curve(certs, [y for _, _, y in tgts], range(m_max + 1))
    put("curve.csv", fio.curve_csv(curve))

    if cfg.verify_budget is not None:
        put("verify.json", fio.dumps(_verify(cfg, tgts, certs, params)))
    if cfg.sweep_family:
        put("sweep.csv", fio.sweep_csv(_sweep(cfg)))
    log.info("pipeline wrote %s", ", ".join(sorted(written)))
    return written


def config_from_manifest(path) -> RunConfig:
    d = json.loads(Path(path).read_text())
    d.pop("stage_seeds", None)
    d.pop("task", None)
    data = d.pop("data")
    d["hidden"] = tuple(d["hidden"])
    return RunConfig(data=SyntheticSpec(**data), **d)
