"""Event-driven network of switches, hosts and FIFO links on simpy."""
import heapq
import logging
import struct
from typing import Any, Generator

import numpy as np
import simpy

from .._custom_typing import NodeId, PortId
from .._errors import (
    BadNextHeader,
    BadPadding,
    CodecError,
    Deadlock,
    IcvMismatch,
    PacketTooBig,
    UnknownSpi,
)
from .._params import (
    validate_controller_params,
    validate_sim_params,
    validate_switch_params,
    validate_work_cost,
)
from ..agent import HostAgent
from ..codec import ETH_LEN, SpdMark, make_packet, parse_packet, serialize_packet
from ..controller import Controller, TimingRecorder
from ..pipeline import LPM_FWD, SPD, SwitchState, TableEntry
from ._report import FlowStats, RunReport
from ._scenario import TAG_LEN, FlowSpec, Scenario, validate_scenario

logger = logging.getLogger(__name__)

__all__ = ['Link', 'SwitchNode', 'HostNode', 'SimNet', 'build_simnet', 'make_payload', 'read_tag']

_TAG = struct.Struct('!II')
Tag = tuple[int, int]


def make_payload(flow_id: int, seq: int, size: int) -> bytes:
    """Tagged, deterministic payload of `size` bytes.

    >>> p = make_payload(3, 9, 12)
    >>> len(p), read_tag(p)
    (12, (3, 9))
    """
    fill = (np.arange(size - TAG_LEN, dtype=np.uint64) + 7 * seq + 13 * flow_id) % 251
    return _TAG.pack(flow_id, seq) + fill.astype(np.uint8).tobytes()


def read_tag(payload: bytes) -> Tag:
    return _TAG.unpack_from(payload)  # type: ignore[return-value]


class Link:
    """Unidirectional, reliable, in-order link between two ports."""

    def __init__(self, net: 'SimNet', src: tuple[NodeId, PortId], dst: tuple[NodeId, PortId], delay: float = 0.0):
        self.net = net
        self.src = src
        self.dst = dst
        self.delay = delay
        self.queue = simpy.Store(net.env)
        self.enqueued = 0
        self.dequeued = 0
        net.env.process(self._deliver())

    def __repr__(self) -> str:
        return f"Link({self.src} -> {self.dst})"

    def put(self, frame: bytes, tag: Tag | None) -> None:
        self.enqueued += 1
        self.queue.put((frame, tag))

    def _deliver(self) -> Generator[simpy.Event, Any, None]:
        while True:
            frame, tag = yield self.queue.get()
            if self.delay:
                yield self.net.env.timeout(self.delay)
            self.dequeued += 1
            node, port = self.dst
            self.net.nodes[node].receive(port, frame, tag)


class SwitchNode:
    """Wraps a SwitchState: frames in, frames out, notifications to the controller."""

    def __init__(self, net: 'SimNet', state: SwitchState):
        self.net = net
        self.state = state
        self.id = state.switch_id

    def receive(self, port: int, frame: bytes, tag: Tag | None) -> None:
        result = self.state.process_packet(port, frame)
        for note in result.notifications:
            self.net.controller.submit(note)
        if result.drop_reason is not None:
            self.net.record_drop(self.id, tag, result.drop_reason)
            return
        for egress, out in result.outputs:
            link = self.net.links.get((self.id, egress))
            if link is None:
                self.net.record_drop(self.id, tag, 'no-route')
                continue
            self.net.record_event(self.id, 'forward', tag, port=egress)
            link.put(out, tag)


class HostNode:
    """Traffic source and sink wrapping a HostAgent."""

    def __init__(self, net: 'SimNet', agent: HostAgent):
        self.net = net
        self.agent = agent
        self.id = agent.host_id

    def _notify_controller(self) -> None:
        rw_id = self.agent.roadwarrior_id
        for notice in self.agent.poll_expire_notices():
            if rw_id is not None:
                self.net.controller.submit((rw_id, notice))

    def send(self, flow: FlowSpec, flow_id: int, seq: int) -> None:
        payload = make_payload(flow_id, seq, flow.size)
        p = make_packet(self.agent.mac, self.agent.gateway_mac, self.agent.ip, flow.dst,
                        protocol=flow.protocol, payload=payload, identification=seq & 0xffff)
        tag = (flow_id, seq)
        self.net.record_event(self.id, 'send', tag)
        frame: bytes | None = serialize_packet(p)
        if self.agent.state.selector_for(p.ipv4.src, p.ipv4.dst, p.ipv4.protocol) is not None:
            try:
                frame = self.agent.host_send(frame[ETH_LEN:])
            except PacketTooBig:
                self.net.record_drop(self.id, tag, 'too-big')
                return
            self._notify_controller()
            if frame is None:
                self.net.record_drop(self.id, tag, 'hard-limit')
                return
        self.net.links[(self.id, 0)].put(frame, tag)

    def receive(self, port: int, frame: bytes, tag: Tag | None) -> None:
        try:
            p = parse_packet(frame)
            if p.esp is not None:
                inner = self.agent.host_receive(frame)
                self._notify_controller()
                if inner is None:
                    self.net.record_drop(self.id, tag, 'hard-limit')
                    return
                p = parse_packet(frame[:ETH_LEN] + inner)
        except UnknownSpi:
            self.net.record_drop(self.id, tag, 'no-sa')
            return
        except IcvMismatch:
            self.net.record_drop(self.id, tag, 'icv-fail')
            return
        except (BadPadding, BadNextHeader):
            self.net.record_drop(self.id, tag, 'bad-padding')
            return
        except CodecError:
            self.net.record_drop(self.id, tag, 'parse-error')
            return
        if p.ipv4.dst != self.agent.ip:
            self.net.record_drop(self.id, tag, 'misdelivered')
            return
        self.net.deliver(self.id, tag, p.body)


class SimNet:
    """A built, not yet run, network.

    Parameters
    __________
    scenario: Scenario
        Validated scenario.
    seed: int | None
        Overrides the scenario seed.
    variant: str
        Label carried into the report.
    timings: bool
        Enables wall-clock instrumentation in the controller.
    record_packets: bool
        Keeps a per-packet event trace (memory grows with traffic).
    """

    def __init__(
        self,
        scenario: Scenario,
        *,
        seed: int | None = None,
        variant: str = 'default',
        timings: bool = False,
        record_packets: bool = False,
    ):
        self.scenario = scenario
        self.seed = scenario.seed if seed is None else seed
        self.variant = variant
        self.record_packets = record_packets
        self.sim_params = validate_sim_params(dict(scenario.sim))
        switch_params = validate_switch_params(dict(scenario.switch))
        work_cost = validate_work_cost(dict(scenario.work_cost))
        self.env = simpy.Environment()
        self.controller = Controller(
            self.env,
            params=validate_controller_params(dict(scenario.controller)),
            seed=self.seed,
            latency=self.sim_params.control_latency,
            register_size=switch_params.register_size,
            timings=TimingRecorder(enabled=timings),
        )
        self.nodes: dict[str, SwitchNode | HostNode] = {}
        self.switches: dict[str, SwitchNode] = {}
        self.hosts: dict[str, HostNode] = {}
        for spec in scenario.topology.switches:
            state = SwitchState(spec.id, spec.ports, params=switch_params, work_cost=work_cost)
            self.switches[spec.id] = self.nodes[spec.id] = SwitchNode(self, state)
            self.controller.connect_switch(state)
        for h in scenario.topology.hosts:
            agent = HostAgent(h.id, h.ip, h.mac, h.gateway_mac, roadwarrior_id=h.roadwarrior_id,
                              token=h.token, script=scenario.agent_script.get(h.roadwarrior_id or '', []),
                              outer_ttl=switch_params.outer_ttl)
            self.hosts[h.id] = self.nodes[h.id] = HostNode(self, agent)
            if h.roadwarrior_id is not None:
                self.controller.register_roadwarrior(h.roadwarrior_id, h.token, agent)
        self.links: dict[tuple[NodeId, PortId], Link] = {}
        for lk in scenario.topology.links:
            src, dst = (lk.src.node, lk.src.port), (lk.dst.node, lk.dst.port)
            self.links[src] = Link(self, src, dst, self.sim_params.link_delay)
        for profile in scenario.profiles:
            self.controller.add_profile(profile)
        self._provision()

        self.flows = [FlowStats(i, f.src, str(f.dst), f.mode, f.size) for i, f in enumerate(scenario.traffic)]
        self.payload_ok = True
        self.events: list[dict[str, Any]] = []
        self.has_run = False
        self._main: simpy.Process | None = None

    def __repr__(self) -> str:
        return (f"SimNet({self.scenario.name!r}, nodes={len(self.nodes)}, "
                f"links={len(self.links)}, seed={self.seed})")

    def _provision(self) -> None:
        """Static routes and SPD rules, present before the controller acts."""
        for spec in self.scenario.topology.switches:
            state = self.switches[spec.id].state
            for route in spec.routes:
                key = (str(route.prefix),)
                state.table_insert(LPM_FWD, TableEntry(key, 'forward_packet',
                                                       {'dst_mac': route.dst_mac, 'port': route.port}))
            for rule in spec.spd:
                key = (str(rule.src), str(rule.dst), rule.protocol)
                if rule.action == 'bypass':
                    entry = TableEntry(key, 'add_spd_mark', {'mark': int(SpdMark.BYPASS)}, priority=rule.priority)
                else:
                    entry = TableEntry(key, 'drop', {}, priority=rule.priority)
                state.table_insert(SPD, entry)

    # ------------------------------------------------------------------ #
    # Accounting
    # ------------------------------------------------------------------ #
    def record_event(self, node: str, kind: str, tag: Tag | None, **details) -> None:
        if not self.record_packets:
            return
        event = {'time': self.env.now, 'node': node, 'kind': kind}
        if tag is not None:
            event['flow'], event['seq'] = tag
        if details:
            event['details'] = details
        self.events.append(event)

    def record_drop(self, node: str, tag: Tag | None, reason: str) -> None:
        self.record_event(node, 'drop', tag, reason=reason)
        if tag is not None and tag[0] < len(self.flows):
            self.flows[tag[0]].drops[reason] += 1

    def deliver(self, node: str, tag: Tag | None, payload: bytes) -> None:
        if tag is None or tag[0] >= len(self.flows):
            logger.warning(f"{node} received an untagged packet")
            return
        flow = self.flows[tag[0]]
        if len(payload) < TAG_LEN or read_tag(payload) != tag or payload != make_payload(*tag, flow.size):
            logger.warning(f"{node}: payload of flow {tag[0]} seq {tag[1]} differs from what was sent")
            self.payload_ok = False
            self.record_drop(node, tag, 'corrupt')
            return
        self.record_event(node, 'deliver', tag)
        flow.delivered += 1

    # ------------------------------------------------------------------ #
    # Processes
    # ------------------------------------------------------------------ #
    def _flow(self, flow_id: int, spec: FlowSpec) -> Generator[simpy.Event, Any, None]:
        host = self.hosts[spec.src]
        stats = self.flows[flow_id]
        for seq in range(spec.count):
            stats.sent += 1
            host.send(spec, flow_id, seq)
            yield self.env.timeout(self.sim_params.packet_interval)

    def _uplink(self, roadwarrior_id: str):
        def _send(message):
            self.controller.submit((roadwarrior_id, message))
        return _send

    def _bootstrap(self) -> Generator[simpy.Event, Any, None]:
        self.controller.start()
        for profile in self.scenario.profiles:
            if profile.is_site_to_site:
                yield from self.controller.setup_tunnel_process(profile.profile_id)
        sessions = [
            self.env.process(host.agent.session(self.env, self._uplink(host.agent.roadwarrior_id)))
            for host in self.hosts.values()
            if host.agent.roadwarrior_id is not None and host.agent.script
        ]
        if sessions:
            yield self.env.all_of(sessions)
        logger.info(f"{self.scenario.name}: control plane ready at t={self.env.now:.3f}, starting traffic")
        flows = [self.env.process(self._flow(i, spec)) for i, spec in enumerate(self.scenario.traffic)]
        if flows:
            yield self.env.all_of(flows)

    def diagnostic_state(self) -> dict[str, Any]:
        return {
            'time': self.env.now,
            'flows': [f.to_dict() for f in self.flows],
            'links': {f"{lk.src}->{lk.dst}": [lk.enqueued, lk.dequeued] for lk in self.links.values()},
            'tunnels': self.controller.status(),
            'controller_errors': list(self.controller.errors),
        }

    def run(self) -> None:
        """Runs to quiescence; raises Deadlock if traffic is left unaccounted."""
        if self.has_run:
            raise RuntimeError("A SimNet can only be run once.")
        self.has_run = True
        logger.info(f"Running {self.scenario.name!r} ({self.variant}, seed={self.seed})")
        self._main = self.env.process(self._bootstrap())
        self.env.run()
        if not self._main.processed:
            raise Deadlock(f"{self.scenario.name}: no events left but the run did not finish",
                           self.diagnostic_state())
        if not all(f.conserved for f in self.flows):
            raise Deadlock(f"{self.scenario.name}: packets unaccounted for at quiescence",
                           self.diagnostic_state())

    @property
    def links_drained(self) -> bool:
        return all(lk.enqueued == lk.dequeued for lk in self.links.values())

    def report(self) -> RunReport:
        if not self.has_run:
            raise RuntimeError("Run the network before asking for a report.")
        timings = self.controller.timings
        return RunReport(
            scenario=self.scenario.name,
            seed=self.seed,
            variant=self.variant,
            flows=self.flows,
            rekey_count=sum(t.renewals for t in self.controller.tunnels.values()),
            control_messages=self.controller.trace.counts(),
            switches={
                sid: {'work': round(node.state.work, 6), 'ingress': node.state.ingress_count,
                      'forwarded': node.state.forwarded_count, 'drops': dict(sorted(node.state.drops.items()))}
                for sid, node in sorted(self.switches.items())
            },
            tunnels=self.controller.status(),
            payload_ok=self.payload_ok,
            links_drained=self.links_drained,
            controller_errors=list(self.controller.errors),
            ignored_notifications=self.controller.ignored_notifications,
            duration=float(self.env.now),
            timings={op: list(v) for op, v in timings.samples.items()} if timings.enabled else None,
        )

    def trace_lines(self) -> list[dict[str, Any]]:
        """Packet and control events merged in time order."""
        control = [{'time': r.time, 'node': r.peer, 'kind': 'control', 'details': r.to_dict()}
                   for r in self.controller.trace]
        return list(heapq.merge(self.events, control, key=lambda e: e['time']))


def build_simnet(scenario: Scenario | dict, **kwargs) -> SimNet:
    """Validates `scenario` and instantiates every node, link and channel.

    Keyword arguments are passed on to SimNet.
    """
    return SimNet(validate_scenario(scenario), **kwargs)

