"""Roadwarrior host: a host-side ESP stack driven by controller messages."""
import logging
from collections import Counter
from dataclasses import dataclass, field
from ipaddress import IPv4Address, IPv4Network
from typing import Callable, Generator

import simpy

from .._custom_typing import Address
from .._errors import (
    ChannelClosed,
    CodecError,
    ConflictingSelector,
    NoSelectorMatch,
    PacketTooBig,
    UnknownSpi,
)
from ..codec import EthernetHeader, mac_to_bytes, parse_ipv4, parse_packet, serialize_ipv4, serialize_packet
from ..crypto import (
    MAX_IPV4_LEN,
    SecurityAssociation,
    outer_length,
    tunnel_decapsulate,
    tunnel_encapsulate,
)
from ._messages import (
    Ack,
    AgentMessage,
    ConfigApply,
    ExpireNotice,
    Hello,
    ProfileSummary,
    SaUpdate,
    Selector,
    Teardown,
    TunnelOffer,
    TunnelRequest,
)

logger = logging.getLogger(__name__)

__all__ = ['HostIpsecState', 'HostAgent']


@dataclass
class HostIpsecState:
    """SAD, selector list, counters and routes of one host."""
    sad_in: dict[int, SecurityAssociation] = field(default_factory=dict)
    sad_out: dict[str, SecurityAssociation] = field(default_factory=dict)
    spd_lite: dict[str, Selector] = field(default_factory=dict)
    counters: Counter[int] = field(default_factory=Counter)
    routes: dict[IPv4Network, str] = field(default_factory=dict)
    # inbound SPI -> profile
    owners: dict[int, str] = field(default_factory=dict)

    def selector_for(self, src: IPv4Address, dst: IPv4Address, protocol: int) -> str | None:
        for profile_id, selector in self.spd_lite.items():
            if selector.matches(src, dst, protocol):
                return profile_id
        return None

    def reset_counter(self, spi: int) -> None:
        self.counters.pop(spi, None)


class HostAgent:
    """Roadwarrior endpoint.

    Parameters
    __________
    host_id: str
        Node name in the topology.
    ip: IPv4Address | str
        Host address, also used as tunnel endpoint.
    mac: str
        Host MAC address.
    gateway_mac: str
        MAC of the switch port the host is attached to.
    roadwarrior_id: str | None
        Identity presented to the controller; None for plain hosts.
    token: str
        Shared secret standing in for the authenticated agent channel.
    script: list[str]
        Profiles this agent requests after receiving an offer.
    outer_ttl: int
        TTL of outer ESP headers.
    """

    def __init__(
        self,
        host_id: str,
        ip: Address,
        mac: str,
        gateway_mac: str,
        *,
        roadwarrior_id: str | None = None,
        token: str = '',
        script: list[str] | None = None,
        outer_ttl: int = 64,
    ):
        self.host_id = host_id
        self.ip = IPv4Address(ip)
        self.mac = mac_to_bytes(mac)
        self.gateway_mac = mac_to_bytes(gateway_mac)
        self.roadwarrior_id = roadwarrior_id
        self.token = token
        self.script = list(script or [])
        self.outer_ttl = outer_ttl
        self.state = HostIpsecState()
        self.applied: dict[str, ConfigApply] = {}
        self.offers: dict[str, ProfileSummary] = {}
        self.errors: list[str] = []
        self.drops: Counter[str] = Counter()
        self._expire_queue: list[ExpireNotice] = []
        self._notified: set[tuple[int, str]] = set()
        self._waiters: dict[str, simpy.Event] = {}
        self._offer_event: simpy.Event | None = None

    def __repr__(self) -> str:
        return f"HostAgent({self.host_id}, {self.ip}, tunnels={sorted(self.applied)})"

    # ------------------------------------------------------------------ #
    # Configuration
    # ------------------------------------------------------------------ #
    def _install_in(self, profile_id: str, sa: SecurityAssociation) -> None:
        self.state.sad_in[sa.spi] = sa
        self.state.owners[sa.spi] = profile_id
        self.state.reset_counter(sa.spi)

    def _forget(self, spi: int) -> None:
        self.state.owners.pop(spi, None)
        self.state.reset_counter(spi)
        self._notified = {n for n in self._notified if n[0] != spi}

    def apply_config(self, m: ConfigApply) -> Ack:
        """Installs both SAs, the selector and the routes of a profile.

        Re-applying the same profile replaces the previous configuration.
        """
        for other_id, selector in self.state.spd_lite.items():
            if other_id != m.profile_id and selector.overlaps(m.selector):
                raise ConflictingSelector(
                    f"Selector of {m.profile_id} overlaps the one of {other_id}."
                )
        if m.profile_id in self.applied:
            self.teardown(Teardown(m.profile_id))
        self._install_in(m.profile_id, m.sa_in)
        self.state.sad_out[m.profile_id] = m.sa_out
        self.state.reset_counter(m.sa_out.spi)
        self.state.spd_lite[m.profile_id] = m.selector
        for prefix in m.routes:
            self.state.routes[IPv4Network(prefix, strict=False)] = m.profile_id
        self.applied[m.profile_id] = m
        logger.info(f"{self.host_id}: applied tunnel {m.profile_id} "
                    f"(in {m.sa_in.spi}, out {m.sa_out.spi})")
        return Ack(ref=m.profile_id)

    def teardown(self, m: Teardown) -> Ack:
        """Removes everything a cached ConfigApply installed; unknown ids are a no-op."""
        config = self.applied.pop(m.profile_id, None)
        if config is None:
            return Ack(ref=m.profile_id)
        out = self.state.sad_out.pop(m.profile_id, None)
        if out is not None:
            self._forget(out.spi)
        for spi in [s for s, owner in self.state.owners.items() if owner == m.profile_id]:
            del self.state.sad_in[spi]
            self._forget(spi)
        self.state.spd_lite.pop(m.profile_id, None)
        self.state.routes = {p: pid for p, pid in self.state.routes.items() if pid != m.profile_id}
        logger.info(f"{self.host_id}: tore down tunnel {m.profile_id}")
        return Ack(ref=m.profile_id)

    def sa_update(self, m: SaUpdate) -> Ack:
        """Applies one renewal step."""
        if m.install_in is not None:
            self._install_in(m.profile_id, m.install_in)
        elif m.replace_out is not None:
            old = self.state.sad_out.get(m.profile_id)
            if old is not None:
                self._forget(old.spi)
            self.state.sad_out[m.profile_id] = m.replace_out
            self.state.reset_counter(m.replace_out.spi)
        else:
            assert m.remove_in_spi is not None
            if self.state.sad_in.pop(m.remove_in_spi, None) is None:
                raise UnknownSpi(f"{self.host_id}: no inbound SA {m.remove_in_spi}.")
            self._forget(m.remove_in_spi)
        return Ack(ref=m.profile_id)

    def handle_message(self, message: AgentMessage) -> Ack:
        """Entry point of the controller channel."""
        match message:
            case ConfigApply():
                return self.apply_config(message)
            case SaUpdate():
                return self.sa_update(message)
            case Teardown():
                return self.teardown(message)
            case TunnelOffer():
                self.offers = {p.profile_id: p for p in message.profiles}
                if self._offer_event is not None and not self._offer_event.triggered:
                    self._offer_event.succeed(message)
                return Ack()
            case Ack(ok=False):
                self.errors.append(message.error)
                self._wake(message.ref, error=message.error)
                return Ack()
            case Ack(ref=ref) if ref:
                # tunnel already up
                self._wake(ref)
                return Ack()
        return Ack()

    # ------------------------------------------------------------------ #
    # Packet path
    # ------------------------------------------------------------------ #
    def _count(self, sa: SecurityAssociation) -> int | None:
        """Increments the SA counter; returns None when the packet must be dropped."""
        self.state.counters[sa.spi] += 1
        counter = self.state.counters[sa.spi]
        for level, limit in (('soft', sa.soft_limit), ('hard', sa.hard_limit)):
            if counter == limit and (sa.spi, level) not in self._notified:
                self._notified.add((sa.spi, level))
                self._expire_queue.append(ExpireNotice(spi=sa.spi, level=level))  # type: ignore[arg-type]
        if counter > sa.hard_limit:
            self.drops['hard-limit'] += 1
            return None
        return counter

    def host_send(self, inner_ip: bytes) -> bytes | None:
        """Encapsulates an inner IPv4 packet; None when the hard limit drops it.

        Raises NoSelectorMatch without a covering selector and PacketTooBig
        when the outer packet would exceed the IPv4 length field; neither
        consumes a sequence number.
        """
        inner = parse_ipv4(inner_ip, EthernetHeader(dst_mac=self.gateway_mac, src_mac=self.mac))
        profile_id = self.state.selector_for(inner.ipv4.src, inner.ipv4.dst, inner.ipv4.protocol)
        if profile_id is None:
            self.drops['no-selector'] += 1
            raise NoSelectorMatch(f"{self.host_id}: no tunnel for {inner.ipv4.src} -> {inner.ipv4.dst}.")
        sa = self.state.sad_out[profile_id]
        if outer_length(sa, len(inner_ip)) > MAX_IPV4_LEN:
            self.drops['too-big'] += 1
            raise PacketTooBig(f"{self.host_id}: {len(inner_ip)}-byte packet does not fit a tunnel.")
        counter = self._count(sa)
        if counter is None:
            return None
        outer = tunnel_encapsulate(sa, counter, inner_ip, inner.eth, self.outer_ttl)
        return serialize_packet(outer)

    def host_receive(self, frame: bytes) -> bytes | None:
        """Decapsulates an ESP frame addressed to this host."""
        p = parse_packet(frame)
        if p.esp is None:
            raise CodecError(f"{self.host_id}: expected an ESP frame.")
        sa = self.state.sad_in.get(p.esp.spi)
        if sa is None or sa.tunnel_src != p.ipv4.src or sa.tunnel_dst != p.ipv4.dst:
            self.drops['no-sa'] += 1
            raise UnknownSpi(f"{self.host_id}: no inbound SA {p.esp.spi} from {p.ipv4.src}.")
        if self._count(sa) is None:
            return None
        inner = tunnel_decapsulate(sa, p)
        return serialize_ipv4(inner.ipv4, None, inner.body)

    def poll_expire_notices(self) -> list[ExpireNotice]:
        notes, self._expire_queue = self._expire_queue, []
        return notes

    # ------------------------------------------------------------------ #
    # Session
    # ------------------------------------------------------------------ #
    def hello(self) -> Hello:
        if self.roadwarrior_id is None:
            raise ChannelClosed(f"{self.host_id} is not a roadwarrior.")
        return Hello(roadwarrior_id=self.roadwarrior_id, token=self.token, endpoint_ip=self.ip)

    def _wake(self, profile_id: str, error: str = '') -> None:
        event = self._waiters.pop(profile_id, None)
        if event is None or event.triggered:
            return
        if error:
            event.fail(ChannelClosed(f"{self.host_id}: request for {profile_id} refused: {error}"))
        else:
            event.succeed(profile_id)

    def session(
        self,
        env: simpy.Environment,
        uplink: Callable[[AgentMessage], None],
    ) -> Generator[simpy.Event, object, list[str]]:
        """Hello, wait for the offer, then request each scripted profile.

        Finishes once every requested tunnel has been applied and returns
        their ids. A refused request fails the session.
        """
        self._offer_event = env.event()
        uplink(self.hello())
        yield self._offer_event
        established = []
        for profile_id in self.script:
            if profile_id not in self.offers:
                logger.warning(f"{self.host_id}: requesting {profile_id}, which was not offered")
            waiter = env.event()
            self._waiters[profile_id] = waiter
            uplink(TunnelRequest(profile_id))
            yield waiter
            established.append(profile_id)
        return established
