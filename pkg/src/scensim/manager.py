"""Simulation manager: plan, launch, supervise and tear down a federation.

Also hosts the sequential reference executor, which runs the same dataflow
without any RTI and serves as the oracle for the distributed pipeline.
"""

from __future__ import annotations

import json
import logging
import queue
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable

from .building_blocks.behaviours import execute_behaviour
from .building_blocks.instances import SimulationObjectInstance, instantiate, new_instance
from .building_blocks.registry import TypeRegistry, builtin_registry
from .errors import (
    ConnectFailure,
    SinkFailure,
    StartupTimeout,
)
from .federate import (
    FEDERATION_NAME,
    SYNC_LABEL,
    FederateConfig,
    FederateReport,
    Lifecycle,
    run_federate,
    step_time,
)
from .fom import FOMModule, generate_base_module, generate_fom_module, generate_subscription_module, render_fom_xml
from .observer import (
    ChangeTracker,
    NdjsonFileSink,
    ObserverReport,
    RecordSink,
    encode_record,
    open_sink,
    run_observer,
)
from .reference_store import build_reference_store, is_same_or_descendant, subscription_paths
from .rti.coordinator import CoordinatorServer
from .rti.messages import Kind, RtiMessage
from .rti.transport import InProcNetwork, TcpAcceptor, Tap, open_connection, resolve_address, DEFAULT_HOST
from .scenario.model import FileSink, ObserverConfig, Scenario
from .scenario.validate import ValidationReport
from .scenario.xml import parse_scenario
from .values import AttributeValue

log = logging.getLogger(__name__)

MASTER_NAME = "master"
DEFAULT_STARTUP_TIMEOUT = 30.0


# -- planning ---------------------------------------------------------------------


def load_scenario(path: str | Path, registry: TypeRegistry | None = None) -> Scenario:
    return parse_scenario(Path(path).read_bytes(), registry or builtin_registry())


def check_runnable(scenario: Scenario) -> ValidationReport:
    """Runtime limits beyond document validity: one step size for every member."""
    report = ValidationReport()
    steps = [(f"simulationObjects[{i}].timeStepSize", o.time_step_size) for i, o in enumerate(scenario.simulation_objects)]
    steps += [(f"observers[{i}].timeStepSize", o.time_step_size) for i, o in enumerate(scenario.observers)]
    if steps:
        first = steps[0][1]
        for path, step in steps[1:]:
            if step != first:
                report.add(
                    "UnsupportedConfiguration",
                    path,
                    f"every object and observer must share one step size; found {step} and {first}",
                )
    return report


def federate_name(uuid: str) -> str:
    return f"fed-{uuid}"


def observer_name(index: int) -> str:
    return f"observer-{index}"


@dataclass
class MasterConfig:
    base_fom_module: FOMModule
    sync_label: str = SYNC_LABEL
    federation: str = FEDERATION_NAME
    members: tuple[str, ...] = ()


@dataclass
class RunPlan:
    scenario: Scenario
    registry: TypeRegistry
    federate_configs: list[FederateConfig]
    observer_configs: list[tuple[str, ObserverConfig]]
    master_config: MasterConfig
    output_dir: Path | None
    step_size: float
    fom_documents: dict[str, str] = field(default_factory=dict)

    @property
    def member_names(self) -> list[str]:
        return [MASTER_NAME, *(c.federate_name for c in self.federate_configs), *(n for n, _ in self.observer_configs)]


def plan_run(
    scenario: Scenario | str | Path,
    registry: TypeRegistry | None = None,
    output_dir: str | Path | None = None,
) -> RunPlan:
    """Instantiate objects, generate FOM modules and stores, and write fom/*.xml."""
    registry = registry or builtin_registry()
    if not isinstance(scenario, Scenario):
        scenario = load_scenario(scenario, registry)
    check_runnable(scenario).raise_first()
    step = scenario.simulation_objects[0].time_step_size

    docs: dict[str, str] = {}
    configs: list[FederateConfig] = []
    for i, spec in enumerate(scenario.simulation_objects):
        instance = instantiate(registry, spec, i + 1)
        name = federate_name(instance.uuid)
        fom = generate_fom_module(instance, registry)
        docs[f"{instance.uuid}.xml"] = render_fom_xml(fom)
        sub_module = None
        if spec.observed_classes:
            sub_module = generate_subscription_module(name, [oc.type for oc in spec.observed_classes], registry)
            docs[f"{instance.uuid}-subscriptions.xml"] = render_fom_xml(sub_module)
        subscribed = [subscription_paths(registry, oc)[0] for oc in spec.observed_classes]
        store = build_reference_store(instance, fom, subscribed)
        configs.append(
            FederateConfig(
                federate_name=name,
                instance=instance,
                fom_module=fom,
                reference_store=store,
                step_size=spec.time_step_size,
                total_iterations=scenario.simulation_iterations,
                subscription_module=sub_module,
            )
        )
    observers = [(observer_name(i), cfg) for i, cfg in enumerate(scenario.observers)]
    for name, cfg in observers:
        module = generate_subscription_module(name, [oc.type for oc in cfg.observed_classes], registry)
        docs[f"{name}.xml"] = render_fom_xml(module)
    base = generate_base_module(registry)
    docs["base.xml"] = render_fom_xml(base)

    plan = RunPlan(
        scenario,
        registry,
        configs,
        observers,
        MasterConfig(base),
        Path(output_dir) if output_dir is not None else None,
        step,
        docs,
    )
    plan.master_config.members = tuple(plan.member_names)
    if plan.output_dir is not None:
        write_fom_files(plan)
    return plan


def write_fom_files(plan: RunPlan) -> list[Path]:
    assert plan.output_dir is not None
    fom_dir = plan.output_dir / "fom"
    fom_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for fname in sorted(plan.fom_documents):
        p = fom_dir / fname
        p.write_text(plan.fom_documents[fname], encoding="utf-8", newline="\n")
        paths.append(p)
    return paths


# -- master -----------------------------------------------------------------------


class MasterFederate:
    """Creates the federation, contributes the base FOM module and starts the run.

    Not time-managed: it takes no part in lockstep. Once every other member
    has finished it resigns and destroys the federation.
    """

    def __init__(self, cfg: MasterConfig, members_done: threading.Event, destroy_deadline: float = 10.0):
        self.cfg = cfg
        self.members_done = members_done
        self.destroy_deadline = destroy_deadline
        self.synchronized = threading.Event()
        self.state = Lifecycle.CREATED
        self.error: str | None = None
        self.destroyed = False
        self._destroy_refused = False

    def _msg(self, kind: Kind, payload: dict | None = None) -> RtiMessage:
        return RtiMessage(kind, MASTER_NAME, payload or {})

    def run(self, conn) -> None:
        try:
            self.state = Lifecycle.CONNECTED
            conn.send(self._msg(Kind.CREATE_FEDERATION, {"federation": self.cfg.federation}))
            conn.send(
                self._msg(
                    Kind.JOIN_FEDERATION,
                    {"federation": self.cfg.federation, "federateType": "master", "timeManaged": False},
                )
            )
            conn.send(self._msg(Kind.FOM_MODULE_OFFER, {"xml": render_fom_xml(self.cfg.base_fom_module)}))
            self.state = Lifecycle.JOINED
            conn.send(
                self._msg(Kind.REGISTER_SYNC_POINT, {"label": self.cfg.sync_label, "federates": list(self.cfg.members)})
            )
            self.state = Lifecycle.AWAITING_SYNC
            while not self.members_done.is_set():
                if not self._pump(conn, 0.05):
                    return
            self._teardown(conn)
        except ConnectFailure as exc:
            self.error = self.error or f"ConnectFailure: {exc}"
        finally:
            conn.close()

    def _pump(self, conn, timeout: float) -> bool:
        """Handle one message; False once the coordinator went away."""
        try:
            msg = conn.recv(timeout=timeout)
        except queue.Empty:
            return True
        if msg is None:
            if not self.destroyed:
                self.error = self.error or "ProtocolFault: coordinator closed the connection"
            return False
        if msg.kind is Kind.ANNOUNCE_SYNC_POINT:
            conn.send(self._msg(Kind.SYNC_POINT_ACHIEVED, {"label": msg.payload["label"]}))
        elif msg.kind is Kind.FEDERATION_SYNCHRONIZED and msg.payload.get("label") == self.cfg.sync_label:
            self.state = Lifecycle.RUNNING
            self.synchronized.set()
        elif msg.kind is Kind.FAULT:
            code = msg.payload.get("code")
            if code == "FederatesStillJoined":
                self._destroy_refused = True
            else:
                self.error = self.error or f"ProtocolFault: {code}: {msg.payload.get('reason')}"
        return True

    def _teardown(self, conn) -> None:
        conn.send(self._msg(Kind.RESIGN_FEDERATION, {"error": None}))
        self.state = Lifecycle.RESIGNED
        deadline = time.monotonic() + self.destroy_deadline
        # Resigns from other members may still be in flight on their own links; retry until accepted.
        while time.monotonic() < deadline:
            self._destroy_refused = False
            conn.send(self._msg(Kind.DESTROY_FEDERATION, {"federation": self.cfg.federation}))
            while True:
                try:
                    msg = conn.recv(timeout=0.5)
                except queue.Empty:
                    break
                if msg is None or msg.kind is Kind.DESTROY_FEDERATION:
                    self.destroyed = True
                    return
                if msg.kind is Kind.FAULT and msg.payload.get("code") == "FederatesStillJoined":
                    break
            time.sleep(0.02)
        self.error = self.error or "federation could not be destroyed: members still joined"


# -- distributed run -------------------------------------------------------------------


@dataclass
class RunReport:
    status: str  # ok | degraded | aborted
    transport: str
    wall_clock: float
    federates: dict[str, FederateReport]
    observers: dict[str, ObserverReport]
    streams: list[Path]
    master_error: str | None = None
    error: str | None = None
    coordinator_fault: str | None = None

    @property
    def ok(self) -> bool:
        return self.status == "ok"

    def to_dict(self) -> dict[str, Any]:
        return {
            "status": self.status,
            "transport": self.transport,
            "wallClock": self.wall_clock,
            "error": self.error,
            "coordinatorFault": self.coordinator_fault,
            "masterError": self.master_error,
            "federates": {n: r.to_dict() for n, r in self.federates.items()},
            "observers": {n: r.to_dict() for n, r in self.observers.items()},
            "streams": [str(p) for p in self.streams],
        }


def _observer_sinks(plan: RunPlan, index: int, cfg: ObserverConfig) -> tuple[list[RecordSink], Path, str | None]:
    assert plan.output_dir is not None
    canonical = plan.output_dir / f"{observer_name(index)}.ndjson"
    sinks: list[RecordSink] = [NdjsonFileSink(canonical)]
    warning = None
    extra = cfg.sink
    if isinstance(extra, FileSink):
        target = Path(extra.path)
        if not target.is_absolute():
            target = plan.output_dir / target
        if target.resolve() == canonical.resolve():
            return sinks, canonical, None
    try:
        sinks.append(open_sink(extra, plan.output_dir))
    except SinkFailure as exc:
        warning = f"SinkFailure: {exc}"
    return sinks, canonical, warning


def run_distributed(
    plan: RunPlan,
    transport: str = "inproc",
    *,
    host: str = DEFAULT_HOST,
    port: int | None = None,
    startup_timeout: float = DEFAULT_STARTUP_TIMEOUT,
    tap: Tap | None = None,
    kill: dict[str, int] | None = None,
    observer_sinks: dict[str, list[RecordSink]] | None = None,
) -> RunReport:
    """Run the federation to completion (or abort) and write the run artifacts.

    ``kill`` maps a federate name to a step at which it drops its connection
    without resigning (fault injection). ``observer_sinks`` replaces the
    file-based sinks of the named observers (tests).
    """
    if plan.output_dir is None:
        raise ValueError("run_distributed needs an output directory")
    plan.output_dir.mkdir(parents=True, exist_ok=True)
    started = time.monotonic()
    if transport == "inproc":
        acceptor = InProcNetwork(tap)
        address: Any = acceptor
    elif transport == "tcp":
        if port is None:
            host, port = resolve_address((host, 0))
        acceptor = TcpAcceptor(host, port, tap)
        address = acceptor.address
    else:
        raise ValueError(f"unknown transport {transport!r}")

    server = CoordinatorServer(acceptor).start()
    members_done = threading.Event()
    master = MasterFederate(plan.master_config, members_done)
    threads: list[threading.Thread] = []
    fed_reports: dict[str, FederateReport] = {}
    obs_reports: dict[str, ObserverReport] = {}
    streams: list[Path] = []
    warnings: list[str] = []
    error: str | None = None

    def master_main():
        try:
            master.run(open_connection(address))
        except ConnectFailure as exc:
            master.error = f"ConnectFailure: {exc}"

    master_thread = threading.Thread(target=master_main, name="master", daemon=True)
    master_thread.start()

    def abort(reason: str) -> None:
        nonlocal error
        error = error or reason
        server.close_grace = 0.0
        server.stop()

    try:
        if not server.coordinator.federation_created.wait(startup_timeout):
            raise StartupTimeout("the master did not create the federation in time")

        for cfg in plan.federate_configs:
            cfg.rti_address = address
            if kill and cfg.federate_name in kill:
                cfg.kill_at_step = kill[cfg.federate_name]

            def fed_main(cfg=cfg):
                fed_reports[cfg.federate_name] = run_federate(cfg, plan.registry)

            threads.append(threading.Thread(target=fed_main, name=cfg.federate_name, daemon=True))

        for index, (name, ocfg) in enumerate(plan.observer_configs):
            if observer_sinks and name in observer_sinks:
                sinks = observer_sinks[name]
            else:
                sinks, canonical, warning = _observer_sinks(plan, index, ocfg)
                streams.append(canonical)
                if warning:
                    warnings.append(f"{name}: {warning}")

            def obs_main(name=name, ocfg=ocfg, sinks=sinks):
                obs_reports[name] = run_observer(
                    name, ocfg, plan.registry, plan.scenario.simulation_iterations, address, sinks
                )

            threads.append(threading.Thread(target=obs_main, name=name, daemon=True))

        for t in threads:
            t.start()

        deadline = time.monotonic() + startup_timeout
        while not master.synchronized.wait(0.05):
            if any(not t.is_alive() for t in threads) or not master_thread.is_alive():
                raise StartupTimeout("a member stopped before the federation synchronized")
            if time.monotonic() > deadline:
                raise StartupTimeout(f"members did not achieve {plan.master_config.sync_label!r} within {startup_timeout} s")
    except StartupTimeout as exc:
        abort(f"StartupTimeout: {exc}")

    for t in threads:
        t.join()
    members_done.set()
    master_thread.join(timeout=30)
    if not server.join(timeout=15):
        abort("coordinator did not shut down")
        server.join(timeout=15)

    coord_fault = server.coordinator.federation.faulted if server.coordinator.federation else None
    member_errors = [f"{n}: {r.error}" for n, r in fed_reports.items() if r.error]
    member_errors += [f"{n}: {r.error}" for n, r in obs_reports.items() if r.error and not r.degraded]
    if error is None and (coord_fault or member_errors or master.error):
        error = coord_fault or (member_errors[0] if member_errors else master.error)
    degraded = warnings or any(r.degraded for r in obs_reports.values())
    status = "aborted" if error else ("degraded" if degraded else "ok")
    report = RunReport(
        status,
        transport,
        time.monotonic() - started,
        dict(sorted(fed_reports.items())),
        dict(sorted(obs_reports.items())),
        streams,
        master.error,
        error if error else ("; ".join(warnings) or None),
        coord_fault,
    )
    write_run_report(plan.output_dir, report)
    return report


def write_run_report(out: Path, report: RunReport) -> None:
    (out / "report.json").write_text(json.dumps(report.to_dict(), indent=2) + "\n", encoding="utf-8")
    fed_dir = out / "federates"
    fed_dir.mkdir(exist_ok=True)
    for name, r in [*report.federates.items(), *report.observers.items()]:
        (fed_dir / f"{name}.json").write_text(json.dumps(r.to_dict(), indent=2) + "\n", encoding="utf-8")


# -- reference executor ---------------------------------------------------------------


def _subscribed_names(
    registry: TypeRegistry, observed: Iterable, class_path: str
) -> set[str] | None:
    """Attribute names a subscriber receives for an object of ``class_path``; None if not subscribed."""
    names: set[str] | None = None
    for oc in observed:
        sub_path, _ = subscription_paths(registry, oc)
        if is_same_or_descendant(class_path, sub_path):
            wanted = oc.attributes or tuple(d.name for _, d in registry.attributes(oc.type))
            names = (names or set()) | set(wanted)
    return names


def run_reference(scenario: Scenario, registry: TypeRegistry | None = None) -> list[list[str]]:
    """Sequential oracle: one NDJSON line list per observer."""
    registry = registry or builtin_registry()
    check_runnable(scenario).raise_first()
    instances = [instantiate(registry, spec, i + 1) for i, spec in enumerate(scenario.simulation_objects)]
    iterations = scenario.simulation_iterations
    dt = scenario.simulation_objects[0].time_step_size

    # What each object has published so far: uuid -> name -> value.
    published: dict[str, dict[str, AttributeValue]] = {
        o.uuid: {n: a.value for n, a in o.attributes.items() if a.publish} for o in instances
    }

    # Subscriber -> [(subscribed class path, peer, names)] in uuid order.
    visibility: dict[str, list[tuple[str, SimulationObjectInstance, set[str]]]] = {}
    for o in instances:
        rows = []
        for oc in o.observed_classes:
            sub_path, _ = subscription_paths(registry, oc)
            for peer in sorted(instances, key=lambda p: p.uuid):
                if peer is not o and is_same_or_descendant(peer.class_path, sub_path):
                    rows.append((sub_path, peer, _subscribed_names(registry, o.observed_classes, peer.class_path)))
        visibility[o.uuid] = rows

    trackers: list[tuple[ChangeTracker, dict[str, set[str]]]] = []
    for ocfg in scenario.observers:
        tracker = ChangeTracker()
        names_by_obj: dict[str, set[str]] = {}
        for o in sorted(instances, key=lambda p: p.uuid):
            names = _subscribed_names(registry, ocfg.observed_classes, o.class_path)
            if names is not None:
                tracker.track(o.uuid, o.class_path)
                names_by_obj[o.uuid] = names
        trackers.append((tracker, names_by_obj))
    streams: list[list[str]] = [[] for _ in scenario.observers]

    def observe(step: int, changed: dict[str, dict[str, AttributeValue]]) -> None:
        for (tracker, names_by_obj), lines in zip(trackers, streams):
            for uuid, names in names_by_obj.items():
                for name, value in changed.get(uuid, {}).items():
                    if name in names:
                        tracker.set(uuid, name, value)
            lines.extend(encode_record(r) for r in tracker.records(step, step_time(step, dt)))

    observe(0, published)
    for step in range(1, iterations + 1):
        proposals = []
        for o in instances:
            views: dict[str, list] = {}
            shells: dict[str, SimulationObjectInstance] = {}
            for oc in o.observed_classes:
                views.setdefault(subscription_paths(registry, oc)[0], [])
            for sub_path, peer, names in visibility[o.uuid]:
                if peer.uuid not in shells:
                    visible = {n: v for n, v in published[peer.uuid].items() if n in names}
                    shells[peer.uuid] = new_instance(registry, peer.concrete_type, peer.uuid, visible)
                if all(v.uuid != peer.uuid for v in views[sub_path]):
                    views[sub_path].append(shells[peer.uuid].view())
            observed = {p: tuple(v) for p, v in views.items()}
            updates = execute_behaviour(o.behaviour, dt, o, observed) if o.behaviour is not None else {}
            proposals.append(updates)
        changed: dict[str, dict[str, AttributeValue]] = {}
        for o, updates in zip(instances, proposals):
            for uuid, value in updates.items():
                attr = o.attribute_by_uuid(uuid)
                attr.value = value
                if attr.publish:
                    published[o.uuid][attr.name] = value
                    changed.setdefault(o.uuid, {})[attr.name] = value
        observe(step, changed)
    return streams


def write_reference(scenario: Scenario, output_dir: str | Path, registry: TypeRegistry | None = None) -> list[Path]:
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for i, lines in enumerate(run_reference(scenario, registry)):
        p = out / f"{observer_name(i)}.ndjson"
        p.write_text("".join(line + "\n" for line in lines), encoding="utf-8", newline="\n")
        paths.append(p)
    return paths
