"""Scenario configuration, the two case studies and experiment orchestration.

Configs are JSON documents validated against ``configs/scenario.schema.json``.
Agent IDs in configs are 1-based; everything downstream is 0-based.
"""
import copy
import json
import logging
import re
from dataclasses import asdict, dataclass, field, fields, replace
from functools import cached_property
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from . import emit
from .ambiguity import AgentAmbiguity, assemble_global
from .dynamics import (
    Method,
    error_trace,
    fit_decay_rate,
    integrate,
    pin_leaders,
    random_initial_state,
)
from .exceptions import ConfigError, RotConsensusError
from .graph import Configuration, Graph, build_laplacian, compute_stress_matrix, validate_laplacian
from .stability import (
    mixed_rotation_evidence,
    stability_check,
    sufficient_check,
    sweep_heterogeneous,
    sweep_homogeneous,
)

log = logging.getLogger(__name__)

ANALYSES = ("check", "spectrum", "sweep", "simulate", "evidence")


def _to_rad(value, unit):
    return float(np.deg2rad(value)) if unit == "deg" else float(value)


@dataclass(frozen=True)
class AngleEntry:
    theta: float
    unit: str = "rad"
    proper: bool = True
    agent: int = None

    @property
    def radians(self):
        return _to_rad(self.theta, self.unit)


@dataclass(frozen=True)
class GraphSpec:
    vertices: int
    edges: tuple
    weights: str = "given"
    stress_seed: int = 0


@dataclass(frozen=True)
class AmbiguitySpec:
    mode: str
    entries: tuple = ()


@dataclass(frozen=True)
class SimulationSpec:
    dt: float
    t_end: float
    seed: int
    method: str = "ExactExp"


@dataclass(frozen=True)
class SweepSpec:
    kind: str
    unit: str
    ranges: tuple
    resolution: tuple
    proper: bool = True
    free_agents: tuple = None

    def axes(self):
        return [
            np.linspace(_to_rad(lo, self.unit), _to_rad(hi, self.unit), int(k))
            for (lo, hi), k in zip(self.ranges, self.resolution)
        ]


@dataclass(frozen=True)
class EvidenceSpec:
    improper_agent: int
    trials: int
    seed: int


@dataclass(frozen=True)
class ScenarioConfig:
    name: str
    dimension: int
    graph: GraphSpec
    leaders: tuple
    ambiguity: AmbiguitySpec
    provenance: str = ""
    notes: str = None
    configuration: tuple = None
    equilibrium: tuple = None
    simulation: SimulationSpec = None
    sweep: SweepSpec = None
    evidence: EvidenceSpec = None
    analyses: tuple = None

    @property
    def n(self):
        return self.graph.vertices

    def requested_analyses(self):
        if self.analyses is not None:
            return tuple(self.analyses)
        out = ["check", "spectrum"]
        if self.sweep is not None:
            out.append("sweep")
        if self.simulation is not None:
            out.append("simulate")
        if self.evidence is not None:
            out.append("evidence")
        return tuple(out)

    def to_dict(self):
        return _strip_none(asdict(self))

    def to_json(self):
        return _compact_json(self.to_dict())

    @classmethod
    def from_dict(cls, data):
        validate_config_dict(data)
        data = copy.deepcopy(data)
        amb = data["ambiguity"]
        kwargs = {
            "name": data["name"],
            "dimension": data["dimension"],
            "graph": GraphSpec(
                vertices=data["graph"]["vertices"],
                edges=_tuplify(data["graph"]["edges"]),
                weights=data["graph"].get("weights", "given"),
                stress_seed=data["graph"].get("stress_seed", 0),
            ),
            "leaders": tuple(data["leaders"]),
            "ambiguity": AmbiguitySpec(
                mode=amb["mode"], entries=tuple(AngleEntry(**e) for e in amb["entries"])
            ),
            "provenance": data.get("provenance", ""),
            "notes": data.get("notes"),
        }
        for key in ("configuration", "equilibrium", "analyses"):
            if key in data:
                kwargs[key] = _tuplify(data[key])
        if "simulation" in data:
            kwargs["simulation"] = SimulationSpec(**data["simulation"])
        if "sweep" in data:
            s = data["sweep"]
            kwargs["sweep"] = SweepSpec(
                kind=s["kind"],
                unit=s["unit"],
                ranges=_tuplify(s["ranges"]),
                resolution=tuple(s["resolution"]),
                proper=s.get("proper", True),
                free_agents=tuple(s["free_agents"]) if "free_agents" in s else None,
            )
        if "evidence" in data:
            kwargs["evidence"] = EvidenceSpec(**data["evidence"])
        cfg = cls(**kwargs)
        cfg.check_consistency()
        return cfg

    def check_consistency(self):
        n, d = self.n, self.dimension
        ids = set(range(1, n + 1))

        def need(agent, what):
            if agent not in ids:
                raise ConfigError(f"{self.name}: {what} refers to unknown agent {agent}")

        for agent in self.leaders:
            need(agent, "leaders")
        for entry in self.ambiguity.entries:
            if self.ambiguity.mode == "heterogeneous":
                if entry.agent is None:
                    raise ConfigError(f"{self.name}: heterogeneous entries need an agent id")
                need(entry.agent, "ambiguity")
        if self.ambiguity.mode == "homogeneous" and len(self.ambiguity.entries) != 1:
            raise ConfigError(f"{self.name}: homogeneous ambiguity takes exactly one entry")
        if self.equilibrium is not None and len(self.equilibrium) != n * d:
            raise ConfigError(
                f"{self.name}: equilibrium has {len(self.equilibrium)} entries, expected {n * d}"
            )
        if self.configuration is not None:
            if len(self.configuration) != n or any(len(p) != d for p in self.configuration):
                raise ConfigError(f"{self.name}: configuration must be {n} points in R^{d}")
        if self.graph.weights == "stress_from_configuration" and self.configuration is None:
            raise ConfigError(f"{self.name}: stress synthesis needs a configuration")
        if self.sweep is not None:
            s = self.sweep
            dims = 1 if s.kind == "homogeneous" else 2
            if len(s.ranges) != dims or len(s.resolution) != dims:
                raise ConfigError(f"{self.name}: {s.kind} sweep needs {dims} range(s)/resolution(s)")
            if s.kind == "heterogeneous":
                if s.free_agents is None or len(set(s.free_agents)) != 2:
                    raise ConfigError(f"{self.name}: heterogeneous sweep needs two distinct free agents")
                for agent in s.free_agents:
                    need(agent, "sweep.free_agents")
        if self.evidence is not None:
            need(self.evidence.improper_agent, "evidence.improper_agent")
        for name in self.requested_analyses():
            if name not in ANALYSES:
                raise ConfigError(f"{self.name}: unknown analysis {name!r}")
        for name, spec in (("sweep", self.sweep), ("simulate", self.simulation), ("evidence", self.evidence)):
            if name in self.requested_analyses() and spec is None:
                raise ConfigError(f"{self.name}: analysis {name!r} requested without its section")


_SCALAR_ARRAY = re.compile(r"\[\s*([^\[\]{}]*?)\s*\]", re.S)


def _compact_json(payload):
    """Indented JSON with arrays of scalars kept on one line."""
    text = json.dumps(payload, indent=2)
    return _SCALAR_ARRAY.sub(lambda m: "[" + re.sub(r"\s*\n\s*", " ", m.group(1)) + "]", text) + "\n"


def _tuplify(obj):
    if isinstance(obj, (list, tuple)):
        return tuple(_tuplify(v) for v in obj)
    return obj


def _strip_none(obj):
    if isinstance(obj, dict):
        return {k: _strip_none(v) for k, v in obj.items() if v is not None}
    if isinstance(obj, (list, tuple)):
        return [_strip_none(v) for v in obj]
    return obj


def _schema():
    text = resources.files(__package__).joinpath("configs/scenario.schema.json").read_text("utf-8")
    return json.loads(text)


def validate_config_dict(data):
    try:
        jsonschema.validate(data, _schema())
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"invalid scenario at {where}: {exc.message}") from None


def load_config(path):
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from None
    return ScenarioConfig.from_dict(data)


def save_config(cfg, path):
    return emit.atomic_write_text(path, cfg.to_json())


def shipped_config_names():
    root = resources.files(__package__).joinpath("configs")
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json") and "schema" not in p.name)


def load_shipped(name):
    text = resources.files(__package__).joinpath(f"configs/{name}.json").read_text("utf-8")
    return ScenarioConfig.from_dict(json.loads(text))


def resolve_config(ref):
    """A path to a JSON file, or the name of a shipped scenario."""
    path = Path(ref)
    if path.exists():
        return load_config(path)
    if ref in shipped_config_names():
        return load_shipped(ref)
    raise ConfigError(f"no such config file or shipped scenario: {ref}")


# -- case studies --------------------------------------------------------

RENDEZVOUS_EDGES = ((1, 2), (2, 3), (3, 4), (4, 1), (1, 3))

FORMATION_POSITIONS = ((2, 0), (1, 1), (1, -1), (0, 1), (0, -1), (-1, 1), (-1, -1))
FORMATION_EDGES = (
    tuple((i, j) for i in (1, 2, 3) for j in (4, 5, 6, 7))
    + ((4, 6), (6, 7), (7, 5), (5, 4))
    + ((1, 2), (1, 3), (2, 3))
)

FORMATION_NOTES = (
    "Target vector taken as the 14 entries 2,0, 1,1, 1,-1, 0,1, 0,-1, -1,1, -1,-1 "
    "(a symmetric seven-point arrow); this is an interpreted value. "
    "Edge set: every leader to every follower, the follower ring 4-6-7-5-4 and the "
    "leader triangle, chosen so a PSD stress of rank n-d-1 = 4 exists. Override freely."
)


def _apply_overrides(cfg, overrides):
    if not overrides:
        return cfg
    known = {f.name for f in fields(ScenarioConfig)}
    unknown = set(overrides) - known
    if unknown:
        raise ConfigError(f"unknown scenario fields {sorted(unknown)}")
    cfg = replace(cfg, **overrides)
    # round trip through the schema so overrides get the same checks as files
    return ScenarioConfig.from_dict(cfg.to_dict())


def build_rendezvous_scenario(**overrides):
    """Four agents on a 4-cycle with chord (1, 3); leader 1 fixed at the origin."""
    cfg = ScenarioConfig(
        name="rendezvous",
        provenance="rendezvous case study: unit-weight Laplacian, leader 1 at the origin",
        dimension=2,
        graph=GraphSpec(vertices=4, edges=RENDEZVOUS_EDGES),
        leaders=(1,),
        equilibrium=(0.0,) * 8,
        ambiguity=AmbiguitySpec(mode="homogeneous", entries=(AngleEntry(0.0, "rad", True),)),
        simulation=SimulationSpec(dt=0.01, t_end=30.0, seed=0),
    )
    return _apply_overrides(cfg, overrides)


def build_formation_scenario(**overrides):
    """Seven-agent planar affine formation with leaders 1-3 at their targets.

    The target configuration is the seven-point arrow
    ``(2,0) (1,1) (1,-1) (0,1) (0,-1) (-1,1) (-1,-1)``; the stress matrix is
    synthesized from it on the default edge set.
    """
    positions = tuple(tuple(float(v) for v in p) for p in FORMATION_POSITIONS)
    cfg = ScenarioConfig(
        name="formation",
        provenance="affine formation case study: synthesized rank-4 stress, leaders 1-3",
        notes=FORMATION_NOTES,
        dimension=2,
        graph=GraphSpec(vertices=7, edges=FORMATION_EDGES, weights="stress_from_configuration"),
        leaders=(1, 2, 3),
        configuration=positions,
        equilibrium=tuple(v for p in positions for v in p),
        ambiguity=AmbiguitySpec(mode="homogeneous", entries=(AngleEntry(0.0, "rad", True),)),
        simulation=SimulationSpec(dt=0.05, t_end=300.0, seed=0),
    )
    return _apply_overrides(cfg, overrides)


# -- materialized scenario -------------------------------------------------

_STRESS_CACHE = {}


class Scenario:
    """Numerical objects behind a :class:`ScenarioConfig`."""

    def __init__(self, cfg):
        self.cfg = cfg
        self.d = cfg.dimension
        self.n = cfg.n

    @cached_property
    def graph(self):
        return Graph.from_one_based(self.n, self.cfg.graph.edges)

    @cached_property
    def configuration(self):
        if self.cfg.configuration is None:
            return None
        return Configuration(np.array(self.cfg.configuration, dtype=float))

    @cached_property
    def laplacian(self):
        if self.cfg.graph.weights == "stress_from_configuration":
            key = (self.cfg.graph.edges, self.cfg.configuration, self.cfg.graph.stress_seed)
            if key not in _STRESS_CACHE:
                _STRESS_CACHE[key] = compute_stress_matrix(
                    self.graph, self.configuration, seed=self.cfg.graph.stress_seed
                )
            return _STRESS_CACHE[key].copy()
        return build_laplacian(self.graph)

    @property
    def expected_rank(self):
        if self.cfg.graph.weights == "stress_from_configuration":
            return self.n - self.d - 1
        return self.n - 1

    @cached_property
    def agents(self):
        spec = self.cfg.ambiguity
        if spec.mode == "homogeneous":
            e = spec.entries[0]
            return [AgentAmbiguity(e.radians, e.proper, self.d)] * self.n
        agents = [AgentAmbiguity(0.0, True, self.d) for _ in range(self.n)]
        for e in spec.entries:
            agents[e.agent - 1] = AgentAmbiguity(e.radians, e.proper, self.d)
        return agents

    @cached_property
    def ambiguity(self):
        return assemble_global(self.agents)

    @property
    def leaders(self):
        return frozenset(i - 1 for i in self.cfg.leaders)

    @cached_property
    def equilibrium(self):
        if self.cfg.equilibrium is not None:
            return np.array(self.cfg.equilibrium, dtype=float)
        if self.configuration is not None:
            return self.configuration.stacked()
        return np.zeros(self.n * self.d)

    def pinned(self):
        return pin_leaders(self.laplacian, self.ambiguity, self.leaders)

    def initial_state(self, seed=None):
        seed = self.cfg.simulation.seed if seed is None else seed
        return random_initial_state(self.equilibrium, self.leaders, self.d, seed)

    def check(self):
        return stability_check(self.laplacian, self.ambiguity)

    def sweep(self):
        s = self.cfg.sweep
        axes = s.axes()
        if s.kind == "homogeneous":
            return sweep_homogeneous(self.laplacian, self.d, s.proper, axes[0])
        free = tuple(a - 1 for a in s.free_agents)
        fixed = {i: a for i, a in enumerate(self.agents) if i not in free}
        return sweep_heterogeneous(self.laplacian, self.d, free, axes[0], axes[1], fixed, proper=s.proper)

    def simulate(self, seed=None, method=None):
        sim = self.cfg.simulation
        method = Method(method or sim.method)
        trace = integrate(self.pinned(), self.initial_state(seed), sim.dt, sim.t_end, method)
        return error_trace(trace, self.equilibrium)

    def evidence(self):
        e = self.cfg.evidence
        return mixed_rotation_evidence(self.laplacian, self.d, e.improper_agent - 1, e.trials, e.seed)


# -- orchestration -------------------------------------------------------

@dataclass
class ExperimentResult:
    name: str
    reports: dict = field(default_factory=dict)
    traces: dict = field(default_factory=dict)
    sweeps: dict = field(default_factory=dict)
    evidence: dict = field(default_factory=dict)
    manifest: list = field(default_factory=list)


def check_payload(scn, report):
    ok, lo = sufficient_check(scn.ambiguity)
    validation = validate_laplacian(scn.laplacian, scn.graph, expected_rank=scn.expected_rank)
    pinned = scn.pinned()
    return {
        "scenario": scn.cfg.name,
        "report": report.to_dict(),
        "sufficient": {"holds": ok, "min_eig_gamma_H": lo},
        "laplacian": {
            "passed": validation.passed,
            "rank": validation.rank,
            "min_eigenvalue": validation.min_eigenvalue,
            "row_sum_residual": validation.row_sum_residual,
            "failures": validation.failures(),
        },
        "pinned": {
            "leaders": sorted(i + 1 for i in scn.leaders),
            "spectral_abscissa": pinned.spectral_abscissa(),
        },
    }


def _trace_metadata(scn, trace):
    sim = scn.cfg.simulation
    meta = {
        "scenario": scn.cfg.name,
        "seed": sim.seed,
        "method": str(trace.method),
        "dt": sim.dt,
        "t_end": sim.t_end,
        "samples": len(trace),
        "truncated": trace.truncated,
        "classification": str(trace.classification),
        "decay_rate": trace.decay_rate,
        "delta_initial": float(trace.errors[0]),
        "delta_final": float(trace.errors[-1]),
        "pinned_spectral_abscissa": scn.pinned().spectral_abscissa(),
        "unpinned_verdict": str(scn.check().verdict),
    }
    if trace.decay_rate is not None:
        meta["r_squared"] = fit_decay_rate(trace).r_squared
    return meta


def run_experiment(cfg, out_dir=None, analyses=None):
    """Run the analyses a scenario asks for, in order, optionally writing files.

    Written files: ``check.json``, ``spectrum.csv``, ``sweep.csv``,
    ``trace.csv`` + ``trace.json``, ``evidence.json`` and a
    ``manifest.json`` listing each with its SHA-256.
    """
    scn = Scenario(cfg)
    result = ExperimentResult(name=cfg.name)
    out = Path(out_dir) if out_dir is not None else None
    written = []

    def emit_file(name, text):
        if out is not None:
            written.append(emit.atomic_write_text(out / name, text))

    try:
        for name in analyses or cfg.requested_analyses():
            log.info("%s: %s", cfg.name, name)
            if name == "check":
                report = scn.check()
                result.reports["check"] = report
                emit_file("check.json", emit.json_text(check_payload(scn, report)))
            elif name == "spectrum":
                report = result.reports.get("check") or scn.check()
                emit_file("spectrum.csv", emit.spectrum_csv(report.spectrum))
            elif name == "sweep":
                grid = scn.sweep()
                result.sweeps["sweep"] = grid
                emit_file("sweep.csv", emit.sweep_csv(grid))
            elif name == "simulate":
                trace = scn.simulate()
                result.traces["trace"] = trace
                emit_file("trace.csv", emit.trace_csv(trace, scn.d))
                emit_file("trace.json", emit.json_text(_trace_metadata(scn, trace)))
            elif name == "evidence":
                ev = scn.evidence()
                result.evidence["evidence"] = ev
                emit_file("evidence.json", emit.json_text({"scenario": cfg.name, **ev.to_dict()}))
            else:
                raise ConfigError(f"unknown analysis {name!r}")
    except RotConsensusError as exc:
        exc.args = (f"[{cfg.name}] {exc.args[0] if exc.args else exc}",) + exc.args[1:]
        exc.scenario = cfg.name
        raise

    if out is not None:
        result.manifest = [{"file": p.name, "sha256": emit.sha256(p)} for p in written]
        emit.write_json(out / "manifest.json", {"scenario": cfg.name, "files": result.manifest})
    return result


def reproduce_all(out_dir, names=None):
    """Run every shipped scenario into ``out_dir/<name>/``."""
    out = Path(out_dir)
    names = names or shipped_config_names()
    results = {}
    entries = []
    for name in names:
        res = run_experiment(load_shipped(name), out / name)
        results[name] = res
        entries.extend({"file": f"{name}/{m['file']}", "sha256": m["sha256"]} for m in res.manifest)
    emit.write_json(out / "manifest.json", {"files": entries})
    return results
