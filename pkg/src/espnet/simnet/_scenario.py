"""Declarative scenario documents: topology, profiles, agent scripts, traffic."""
import json
import logging
import pathlib
from collections import Counter
from ipaddress import IPv4Address, IPv4Network
from typing import Any, Literal

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from .._errors import ScenarioValidationError
from .._params import (
    validate_controller_params,
    validate_report_params,
    validate_sim_params,
    validate_switch_params,
    validate_work_cost,
)
from ..codec import mac_to_bytes
from ..controller import RoadwarriorPeer, SwitchPeer, TunnelProfile

logger = logging.getLogger(__name__)

__all__ = ['PortBinding', 'LinkSpec', 'RouteSpec', 'SpdRule', 'SwitchSpec', 'HostSpec',
           'Topology', 'FlowSpec', 'Scenario', 'TAG_LEN', 'validate_scenario', 'load_scenario']

# flow id + sequence number at the start of every payload
TAG_LEN = 8


class _Model(BaseModel):
    model_config = ConfigDict(extra='forbid', frozen=True, populate_by_name=True)


class PortBinding(_Model):
    node: str
    port: int = Field(ge=0)


class LinkSpec(_Model):
    """One direction of a link; the reverse direction is a separate entry."""
    src: PortBinding = Field(alias='from')
    dst: PortBinding = Field(alias='to')


class RouteSpec(_Model):
    prefix: IPv4Network
    port: int = Field(ge=0)
    dst_mac: str

    @field_validator('dst_mac')
    @classmethod
    def check_mac(cls, value: str) -> str:
        mac_to_bytes(value)
        return value


class SpdRule(_Model):
    """Static SPD entry provisioned before the controller takes over."""
    src: IPv4Network = IPv4Network('0.0.0.0/0')
    dst: IPv4Network = IPv4Network('0.0.0.0/0')
    protocol: int | None = Field(default=None, ge=0, le=255)
    action: Literal['bypass', 'discard'] = 'bypass'
    priority: int = Field(default=0, ge=0)


class SwitchSpec(_Model):
    id: str
    ports: dict[int, str]
    routes: list[RouteSpec] = []
    spd: list[SpdRule] = []

    @field_validator('ports')
    @classmethod
    def check_macs(cls, ports: dict[int, str]) -> dict[int, str]:
        for mac in ports.values():
            mac_to_bytes(mac)
        return ports


class HostSpec(_Model):
    id: str
    ip: IPv4Address
    mac: str
    gateway_mac: str
    roadwarrior_id: str | None = None
    token: str = ''

    @field_validator('mac', 'gateway_mac')
    @classmethod
    def check_macs(cls, value: str) -> str:
        mac_to_bytes(value)
        return value


class Topology(_Model):
    switches: list[SwitchSpec]
    hosts: list[HostSpec] = []
    links: list[LinkSpec] = []


class FlowSpec(_Model):
    src: str
    dst: IPv4Address
    count: int = Field(ge=0)
    size: int = Field(default=64, ge=TAG_LEN, le=1400)
    mode: Literal['bypass', 'protect'] = 'protect'
    protocol: int = Field(default=17, ge=0, le=255)


class Scenario(_Model):
    """A complete experiment description.

    Parameter groups (`sim`, `switch`, `controller`, `work_cost`, `report`)
    are plain mappings checked by the matching ``validate_*`` function.
    """
    name: str = 'scenario'
    seed: int = Field(default=0, ge=0, lt=1 << 64)
    runs: int = Field(default=1, ge=1)
    topology: Topology
    profiles: list[TunnelProfile] = []
    agent_script: dict[str, list[str]] = {}
    traffic: list[FlowSpec] = []
    compare_suites: bool = False
    sim: dict[str, float] = {}
    switch: dict[str, int] = {}
    controller: dict[str, int] = {}
    work_cost: dict[str, float] = {}
    report: dict[str, float] = {}


def _format_loc(loc: tuple) -> str:
    """('traffic', 2, 'src') -> 'traffic[2].src'.

    >>> _format_loc(('topology', 'links', 3, 'to', 'node'))
    'topology.links[3].to.node'
    """
    path = ''
    for part in loc:
        if isinstance(part, int):
            path += f"[{part}]"
        else:
            path += f".{part}" if path else str(part)
    return path


class _Checker:
    """Cross-reference checks pydantic cannot express."""

    def __init__(self, s: Scenario):
        self.s = s
        self.switches = {sw.id: sw for sw in s.topology.switches}
        self.hosts = {h.id: h for h in s.topology.hosts}
        self.roadwarriors = {h.roadwarrior_id: h for h in s.topology.hosts if h.roadwarrior_id}

    @staticmethod
    def fail(path: str, message: str):
        raise ScenarioValidationError(path, message)

    def run(self) -> None:
        self.params()
        self.nodes()
        self.links()
        self.static_tables()
        self.profiles()
        self.agent_script()
        self.traffic()

    def params(self) -> None:
        for name, fn in [('sim', validate_sim_params), ('switch', validate_switch_params),
                         ('controller', validate_controller_params), ('work_cost', validate_work_cost),
                         ('report', validate_report_params)]:
            try:
                fn(dict(getattr(self.s, name)))
            except (ValueError, TypeError) as e:
                self.fail(name, str(e))

    def nodes(self) -> None:
        seen: set[str] = set()
        for kind, items in [('switches', self.s.topology.switches), ('hosts', self.s.topology.hosts)]:
            for i, node in enumerate(items):
                if node.id in seen:
                    self.fail(f"topology.{kind}[{i}].id", f"duplicate node id {node.id!r}")
                seen.add(node.id)
        rw = Counter(h.roadwarrior_id for h in self.s.topology.hosts if h.roadwarrior_id)
        for i, h in enumerate(self.s.topology.hosts):
            if h.roadwarrior_id and rw[h.roadwarrior_id] > 1:
                self.fail(f"topology.hosts[{i}].roadwarrior_id", f"duplicate roadwarrior {h.roadwarrior_id!r}")

    def _binding(self, path: str, b: PortBinding) -> None:
        if b.node in self.switches:
            if b.port not in self.switches[b.node].ports:
                self.fail(f"{path}.port", f"switch {b.node!r} has no port {b.port}")
        elif b.node in self.hosts:
            if b.port != 0:
                self.fail(f"{path}.port", f"hosts only have port 0, found {b.port}")
        else:
            self.fail(f"{path}.node", f"unknown node {b.node!r}")

    def links(self) -> None:
        links = self.s.topology.links
        pairs = {((lk.src.node, lk.src.port), (lk.dst.node, lk.dst.port)) for lk in links}
        senders: set[tuple[str, int]] = set()
        for i, lk in enumerate(links):
            path = f"topology.links[{i}]"
            self._binding(f"{path}.from", lk.src)
            self._binding(f"{path}.to", lk.dst)
            src, dst = (lk.src.node, lk.src.port), (lk.dst.node, lk.dst.port)
            if src in senders:
                self.fail(f"{path}.from", f"port {src} already has an outgoing link")
            senders.add(src)
            if (dst, src) not in pairs:
                self.fail(path, f"no reverse link {dst} -> {src}")

    def static_tables(self) -> None:
        base = validate_controller_params(dict(self.s.controller)).spd_priority_base
        for i, sw in enumerate(self.s.topology.switches):
            for j, route in enumerate(sw.routes):
                if route.port not in sw.ports:
                    self.fail(f"topology.switches[{i}].routes[{j}].port", f"no port {route.port}")
            priorities: set[int] = set()
            for j, rule in enumerate(sw.spd):
                path = f"topology.switches[{i}].spd[{j}].priority"
                if rule.priority >= base:
                    self.fail(path, f"static priorities must be below {base}, found {rule.priority}")
                if rule.priority in priorities:
                    self.fail(path, f"duplicate priority {rule.priority}")
                priorities.add(rule.priority)

    def profiles(self) -> None:
        ids: set[str] = set()
        for i, p in enumerate(self.s.profiles):
            path = f"profiles[{i}]"
            if p.profile_id in ids:
                self.fail(f"{path}.profile_id", f"duplicate profile {p.profile_id!r}")
            ids.add(p.profile_id)
            for side, peer in [('left_peer', p.left_peer), ('right_peer', p.right_peer)]:
                if isinstance(peer, SwitchPeer) and peer.switch_id not in self.switches:
                    self.fail(f"{path}.{side}.switch_id", f"unknown switch {peer.switch_id!r}")
                if isinstance(peer, RoadwarriorPeer) and peer.roadwarrior_id not in self.roadwarriors:
                    self.fail(f"{path}.{side}.roadwarrior_id", f"unknown roadwarrior {peer.roadwarrior_id!r}")

    def agent_script(self) -> None:
        profiles = {p.profile_id: p for p in self.s.profiles}
        for rw_id, requested in self.s.agent_script.items():
            if rw_id not in self.roadwarriors:
                self.fail(f"agent_script.{rw_id}", f"unknown roadwarrior {rw_id!r}")
            for j, pid in enumerate(requested):
                left = profiles[pid].left_peer if pid in profiles else None
                if not isinstance(left, RoadwarriorPeer) or left.roadwarrior_id != rw_id:
                    self.fail(f"agent_script.{rw_id}[{j}]", f"no host_to_site profile {pid!r} for {rw_id!r}")

    def traffic(self) -> None:
        for i, flow in enumerate(self.s.traffic):
            if flow.src not in self.hosts:
                self.fail(f"traffic[{i}].src", f"unknown host {flow.src!r}")
            src = self.hosts[flow.src].ip
            covered = any(
                p.traffic_selector.to_selector().matches(src, flow.dst, flow.protocol)
                or p.traffic_selector.to_selector().reversed().matches(src, flow.dst, flow.protocol)
                for p in self.s.profiles
            )
            if flow.mode == 'protect' and not covered:
                self.fail(f"traffic[{i}].mode", f"no tunnel profile covers {src} -> {flow.dst}")
            if flow.mode == 'bypass' and covered:
                self.fail(f"traffic[{i}].mode", f"{src} -> {flow.dst} is covered by a tunnel profile")


def validate_scenario(data: dict[str, Any] | Scenario) -> Scenario:
    """Validates a scenario document.

    Raises
    ______
    ScenarioValidationError
        With the path of the first offending field.
    """
    if isinstance(data, Scenario):
        scenario = data
    else:
        try:
            scenario = Scenario.model_validate(data)
        except ValidationError as e:
            err = e.errors()[0]
            raise ScenarioValidationError(_format_loc(err['loc']), err['msg']) from e
    _Checker(scenario).run()
    return scenario


def load_scenario(path: str | pathlib.Path) -> Scenario:
    """Reads and validates a scenario JSON file."""
    try:
        with open(path, 'r') as f:
            data = json.load(f)
    except json.JSONDecodeError as e:
        raise ScenarioValidationError('', f"{path} is not valid JSON: {e}") from e
    scenario = validate_scenario(data)
    logger.info(f"Loaded scenario {scenario.name!r} from {path}")
    return scenario
