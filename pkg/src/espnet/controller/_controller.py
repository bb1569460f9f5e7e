"""IKE-less SDN controller driving tunnel setup, renewal and deletion.

Lifecycle operations are simpy process bodies (``*_process``) so they can run
inside a simulation next to data-plane traffic. Each has a blocking wrapper
that runs the environment until the operation has finished.
"""
import logging
from dataclasses import dataclass
from ipaddress import IPv4Address, IPv4Network
from typing import Any, Generator

import simpy

from .._errors import (
    ControllerError,
    InsertRejected,
    NoSuchEntry,
    PeerUnreachable,
    TableError,
    UnknownProfile,
    UnknownRoadwarrior,
    UnknownSpi,
)
from .._params import ControllerParams, validate_controller_params
from ..agent import (
    Ack,
    AgentMessage,
    ConfigApply,
    ExpireNotice,
    HostAgent,
    Hello,
    ProfileSummary,
    SaUpdate,
    Teardown,
    TunnelOffer,
    TunnelRequest,
)
from ..codec import SpdMark
from ..crypto import RandomSource, SecurityAssociation, generate_key_material, seeded_random
from ..pipeline import (
    LPM_FWD,
    SAD_DEC,
    SAD_ENC,
    SPD,
    LookupResult,
    Notification,
    SwitchState,
    TableEntry,
    decrypt_action,
    encrypt_action,
)
from ._allocators import RegisterAllocator, SpiAllocator
from ._channel import AgentChannel, ControlChannel, ControlTrace
from ._profiles import RoadwarriorPeer, SwitchPeer, TunnelProfile
from ._state import InstalledEntry, TunnelState, TunnelStatus
from ._timing import TimingRecorder

logger = logging.getLogger(__name__)

__all__ = ['Controller']

Process = Generator[simpy.Event, Any, Any]

# Deletion order: policy first, then encryption, decryption, owned routes
_DELETE_ORDER = {SPD: 0, SAD_ENC: 1, SAD_DEC: 2, LPM_FWD: 3}


@dataclass(frozen=True)
class _Peer:
    endpoint: IPv4Address
    switch_id: str | None = None
    roadwarrior_id: str | None = None
    network: IPv4Network | None = None

    @property
    def name(self) -> str:
        return self.switch_id or f"rw:{self.roadwarrior_id}"


class Controller:
    """Holds tunnel profiles and drives switches and agents over control channels.

    Parameters
    __________
    env: simpy.Environment
        Shared event loop; a private one is created when None.
    params: dict | ControllerParams
        SPD priority base and retry counts.
    seed: int | None
        Seeds SPI and key generation. None draws from OS entropy.
    latency: float
        One-way control message latency in simulated seconds.
    register_size: int
        Size of the register arrays of the managed switches.
    timings: TimingRecorder
        Wall-clock instrumentation, disabled by default.
    """

    def __init__(
        self,
        env: simpy.Environment | None = None,
        *,
        params: dict | ControllerParams | None = None,
        seed: int | None = None,
        rng: RandomSource | None = None,
        latency: float = 0.01,
        register_size: int = 1024,
        timings: TimingRecorder | None = None,
    ):
        self.env = env if env is not None else simpy.Environment()
        self.params: ControllerParams = validate_controller_params(params)
        self.rng = rng if rng is not None else seeded_random(seed)
        self.latency = latency
        self.spis = SpiAllocator(self.rng, self.params.spi_retries)
        self.registers = RegisterAllocator(register_size)
        self.trace = ControlTrace()
        self.timings = timings if timings is not None else TimingRecorder(enabled=False)
        self.profiles: dict[str, TunnelProfile] = {}
        self.tunnels: dict[str, TunnelState] = {}
        self.switch_channels: dict[str, ControlChannel] = {}
        self.agent_channels: dict[str, AgentChannel] = {}
        self.tokens: dict[str, str] = {}
        self.sessions: dict[str, IPv4Address] = {}
        self.inbox: simpy.Store = simpy.Store(self.env)
        self.errors: list[str] = []
        self.ignored_notifications = 0
        self._renewed: set[int] = set()
        self._next_priority: dict[str, int] = {}
        self._loop: simpy.Process | None = None

    def __repr__(self) -> str:
        return (f"Controller(switches={sorted(self.switch_channels)}, "
                f"tunnels={len(self.tunnels)})")

    # ------------------------------------------------------------------ #
    # Registration
    # ------------------------------------------------------------------ #
    def add_profile(self, profile: TunnelProfile) -> None:
        if profile.profile_id in self.profiles:
            raise ValueError(f"Profile {profile.profile_id!r} is already registered.")
        self.profiles[profile.profile_id] = profile

    def connect_switch(self, switch: SwitchState) -> ControlChannel:
        channel = ControlChannel(self.env, switch.switch_id, switch, self.latency, self.trace)
        self.switch_channels[switch.switch_id] = channel
        return channel

    def register_roadwarrior(self, roadwarrior_id: str, token: str, agent: HostAgent) -> AgentChannel:
        """Makes a roadwarrior known; it still has to say Hello before use."""
        self.tokens[roadwarrior_id] = token
        channel = AgentChannel(self.env, f"rw:{roadwarrior_id}", agent, self.latency, self.trace)
        self.agent_channels[roadwarrior_id] = channel
        return channel

    def set_online(self, peer_id: str, online: bool) -> None:
        """Takes a switch (or ``rw:<id>`` agent) channel down or up."""
        channels: dict[str, ControlChannel] = {**self.switch_channels}
        channels.update({c.peer_id: c for c in self.agent_channels.values()})
        if peer_id not in channels:
            raise PeerUnreachable(f"No control channel to {peer_id}.")
        channels[peer_id].online = online

    # ------------------------------------------------------------------ #
    # Helpers
    # ------------------------------------------------------------------ #
    def _run(self, process: Process) -> Any:
        return self.env.run(until=self.env.process(process))

    def _profile(self, profile_id: str) -> TunnelProfile:
        if profile_id not in self.profiles:
            raise UnknownProfile(f"No tunnel profile {profile_id!r}.")
        return self.profiles[profile_id]

    def _switch(self, switch_id: str) -> ControlChannel:
        if switch_id not in self.switch_channels:
            raise PeerUnreachable(f"Switch {switch_id} is not connected.")
        return self.switch_channels[switch_id]

    def _agent(self, roadwarrior_id: str) -> AgentChannel:
        if roadwarrior_id not in self.agent_channels:
            raise UnknownRoadwarrior(f"Roadwarrior {roadwarrior_id!r} is not registered.")
        return self.agent_channels[roadwarrior_id]

    def _peers(self, profile: TunnelProfile) -> tuple[_Peer, _Peer]:
        right = profile.right_peer
        right_peer = _Peer(right.endpoint_ip, switch_id=right.switch_id, network=right.network_resource)
        left = profile.left_peer
        if isinstance(left, SwitchPeer):
            return _Peer(left.endpoint_ip, switch_id=left.switch_id, network=left.network_resource), right_peer
        assert isinstance(left, RoadwarriorPeer)
        if left.roadwarrior_id not in self.sessions:
            raise UnknownRoadwarrior(f"Roadwarrior {left.roadwarrior_id!r} has no agent session.")
        rw_ip = self.sessions[left.roadwarrior_id]
        return _Peer(rw_ip, roadwarrior_id=left.roadwarrior_id,
                     network=IPv4Network(rw_ip)), right_peer

    def _priority(self, switch_id: str) -> int:
        priority = self._next_priority.get(switch_id, self.params.spd_priority_base)
        self._next_priority[switch_id] = priority + 1
        return priority

    def _new_sa(self, profile: TunnelProfile, src: _Peer, dst: _Peer) -> SecurityAssociation:
        sa_params = profile.sa_params
        with self.timings.measure('sa_generation'):
            spi = self.spis.allocate()
            keys = generate_key_material(sa_params.suite, self.rng)
            switches = [p.switch_id for p in (src, dst) if p.switch_id is not None]
            index = self.registers.allocate(switches)
            return SecurityAssociation(
                spi=spi, tunnel_src=src.endpoint, tunnel_dst=dst.endpoint,
                suite=sa_params.suite, keys=keys, register_index=index,
                soft_limit=sa_params.soft_limit, hard_limit=sa_params.hard_limit,
            )

    def _release_sa(self, sa: SecurityAssociation | None, *peers: _Peer) -> None:
        if sa is not None:
            self.registers.release([p.switch_id for p in peers if p.switch_id], sa.register_index)

    def generate_sa_pair(self, profile: TunnelProfile) -> tuple[SecurityAssociation, SecurityAssociation]:
        """Fresh SAs for both directions: (left -> right, right -> left)."""
        left, right = self._peers(profile)
        return self._new_sa(profile, left, right), self._new_sa(profile, right, left)

    @staticmethod
    def _dec_entry(sa: SecurityAssociation) -> tuple[tuple, TableEntry]:
        key = (str(sa.tunnel_src), str(sa.tunnel_dst), sa.spi)
        return key, TableEntry(key, decrypt_action(sa.suite), sa.to_action_params())

    @staticmethod
    def _enc_entry(sa: SecurityAssociation) -> tuple[tuple, TableEntry]:
        key = (str(sa.tunnel_dst),)
        return key, TableEntry(key, encrypt_action(sa.suite), sa.to_action_params())

    # ------------------------------------------------------------------ #
    # Table operations
    # ------------------------------------------------------------------ #
    def _insert(self, tunnel: TunnelState, switch_id: str, table: str, key: tuple, entry: TableEntry) -> Process:
        channel = self._switch(switch_id)
        try:
            with self.timings.measure('table_insert'):
                installed = yield from channel.call('table_insert', table=table, entry=entry)
        except TableError as e:
            raise InsertRejected(f"{switch_id} rejected {table} entry {list(key)}: {e}") from e
        tunnel.entries.append(InstalledEntry(switch_id, table, key, installed))

    def _modify(self, switch_id: str, table: str, key: tuple, action: str, params: dict) -> Process:
        channel = self._switch(switch_id)
        try:
            with self.timings.measure('table_modify'):
                return (yield from channel.call('table_modify', table=table, key=key,
                                                action=action, params=params))
        except TableError as e:
            raise InsertRejected(f"{switch_id} rejected modify of {table} {list(key)}: {e}") from e

    def _delete(self, item: InstalledEntry, retries: int = 0) -> Process:
        """Deletes an owned entry; returns False if the switch stayed unreachable."""
        for attempt in range(retries + 1):
            try:
                yield from self._switch(item.switch_id).call('table_delete', table=item.table, key=item.key)
                return True
            except NoSuchEntry:
                return True
            except PeerUnreachable:
                logger.debug(f"delete on {item.switch_id} failed (attempt {attempt + 1})")
        return False

    def _send(self, roadwarrior_id: str, message: AgentMessage, retries: int = 0) -> Process:
        channel = self._agent(roadwarrior_id)
        for attempt in range(retries + 1):
            try:
                return (yield from channel.send(message))
            except PeerUnreachable:
                if attempt == retries:
                    raise
        raise PeerUnreachable(f"Agent {roadwarrior_id} unreachable.")

    def _install_route(self, tunnel: TunnelState, switch_id: str, prefix: IPv4Network,
                       toward: IPv4Address) -> Process:
        """Adds a route for `prefix` copying the one toward `toward`, unless one exists."""
        channel = self._switch(switch_id)
        existing = yield from channel.call('table_read', table=LPM_FWD, key=str(prefix))
        if existing is not None:
            return
        via: LookupResult = yield from channel.call('table_lookup', table=LPM_FWD, values=(int(toward),))
        if not via.hit or via.action == 'drop':
            logger.warning(f"{switch_id} has no route toward {toward}; not routing {prefix}")
            tunnel.warnings.append(f"no route toward {toward} on {switch_id}")
            return
        key = (str(prefix),)
        yield from self._insert(tunnel, switch_id, LPM_FWD, key, TableEntry(key, via.action, dict(via.params)))

    def _spd_entry(self, switch_id: str, src: IPv4Network, dst: IPv4Network, protocol: int | None,
                   tunnel_dst: IPv4Address) -> tuple[tuple, TableEntry]:
        key = (str(src), str(dst), protocol)
        params = {'mark': int(SpdMark.PROTECT), 'tunnel_dst': str(tunnel_dst)}
        return key, TableEntry(key, 'add_spd_mark', params, priority=self._priority(switch_id))

    # ------------------------------------------------------------------ #
    # Setup
    # ------------------------------------------------------------------ #
    def _setup_site_to_site(self, t: TunnelState, left: _Peer, right: _Peer) -> Process:
        assert t.sa_i is not None and t.sa_j is not None
        assert left.switch_id is not None and right.switch_id is not None
        # Decryption first, so no ESP packet arrives before its SA exists
        yield from self._insert(t, right.switch_id, SAD_DEC, *self._dec_entry(t.sa_i))
        yield from self._insert(t, left.switch_id, SAD_DEC, *self._dec_entry(t.sa_j))
        yield from self._insert(t, left.switch_id, SAD_ENC, *self._enc_entry(t.sa_i))
        yield from self._insert(t, right.switch_id, SAD_ENC, *self._enc_entry(t.sa_j))
        sel = t.profile.traffic_selector
        yield from self._insert(t, left.switch_id, SPD,
                                *self._spd_entry(left.switch_id, sel.src, sel.dst, sel.protocol, right.endpoint))
        yield from self._insert(t, right.switch_id, SPD,
                                *self._spd_entry(right.switch_id, sel.dst, sel.src, sel.protocol, left.endpoint))
        assert left.network is not None and right.network is not None
        yield from self._install_route(t, left.switch_id, right.network, right.endpoint)
        yield from self._install_route(t, right.switch_id, left.network, left.endpoint)

    def _setup_host_to_site(self, t: TunnelState, left: _Peer, right: _Peer) -> Process:
        assert t.sa_i is not None and t.sa_j is not None
        assert left.roadwarrior_id is not None and right.switch_id is not None
        yield from self._insert(t, right.switch_id, SAD_DEC, *self._dec_entry(t.sa_i))
        sel = t.profile.traffic_selector
        config = ConfigApply(profile_id=t.profile_id, sa_in=t.sa_j, sa_out=t.sa_i,
                             selector=sel.to_selector(), routes=(str(sel.dst),))
        ack: Ack = yield from self._send(left.roadwarrior_id, config)
        if not ack.ok:
            raise InsertRejected(f"Agent {left.roadwarrior_id} refused {t.profile_id}: {ack.error}")
        t.agent_configured = True
        yield from self._insert(t, right.switch_id, SAD_ENC, *self._enc_entry(t.sa_j))
        yield from self._insert(t, right.switch_id, SPD,
                                *self._spd_entry(right.switch_id, sel.dst, sel.src, sel.protocol, left.endpoint))

    def _rollback(self, t: TunnelState) -> Process:
        for item in reversed(t.entries):
            if not (yield from self._delete(item)):
                t.warnings.append(f"rollback left {item.table} entry on {item.switch_id}")
        t.entries.clear()
        left = t.profile.left_peer
        if t.agent_configured and isinstance(left, RoadwarriorPeer):
            try:
                yield from self._send(left.roadwarrior_id, Teardown(t.profile_id))
            except PeerUnreachable:
                t.warnings.append(f"rollback could not reach {left.roadwarrior_id}")
            t.agent_configured = False

    def setup_tunnel_process(self, profile_id: str) -> Process:
        """Installs a tunnel in the order DEC, ENC, SPD (+routes), all or nothing."""
        profile = self._profile(profile_id)
        existing = self.tunnels.get(profile_id)
        if existing is not None and existing.status is not TunnelStatus.DOWN:
            logger.debug(f"Tunnel {profile_id} already {existing.status.value}")
            return existing
        tunnel = TunnelState(profile)
        self.tunnels[profile_id] = tunnel
        with self.timings.measure('setup'):
            try:
                left, right = self._peers(profile)
                tunnel.sa_i = self._new_sa(profile, left, right)
                tunnel.sa_j = self._new_sa(profile, right, left)
                if profile.is_site_to_site:
                    yield from self._setup_site_to_site(tunnel, left, right)
                else:
                    yield from self._setup_host_to_site(tunnel, left, right)
            except ControllerError as e:
                logger.warning(f"Setup of {profile_id} failed, rolling back: {e}")
                yield from self._rollback(tunnel)
                peers = self._peers_or_right(profile)
                self._release_sa(tunnel.sa_i, *peers)
                self._release_sa(tunnel.sa_j, *peers)
                tunnel.transition(TunnelStatus.DOWN)
                raise
        tunnel.transition(TunnelStatus.ESTABLISHED)
        logger.info(f"Tunnel {profile_id} established (SPIs {tunnel.sa_i.spi}/{tunnel.sa_j.spi})")  # type: ignore
        return tunnel

    def _peers_or_right(self, profile: TunnelProfile) -> tuple[_Peer, ...]:
        try:
            return self._peers(profile)
        except UnknownRoadwarrior:
            right = profile.right_peer
            return (_Peer(right.endpoint_ip, switch_id=right.switch_id),)

    def setup_tunnel(self, profile_id: str) -> TunnelState:
        return self._run(self.setup_tunnel_process(profile_id))

    # ------------------------------------------------------------------ #
    # Renewal
    # ------------------------------------------------------------------ #
    def tunnel_for_spi(self, spi: int) -> TunnelState:
        for tunnel in self.tunnels.values():
            if tunnel.status is not TunnelStatus.DOWN and tunnel.direction_of(spi) is not None:
                return tunnel
        raise UnknownSpi(f"SPI {spi} does not belong to a live tunnel.")

    def _install_dec(self, t: TunnelState, peer: _Peer, sa: SecurityAssociation) -> Process:
        if peer.switch_id is not None:
            yield from self._insert(t, peer.switch_id, SAD_DEC, *self._dec_entry(sa))
        else:
            assert peer.roadwarrior_id is not None
            ack = yield from self._send(peer.roadwarrior_id, SaUpdate(t.profile_id, install_in=sa))
            if not ack.ok:
                raise InsertRejected(f"Agent {peer.roadwarrior_id} refused new SA {sa.spi}: {ack.error}")

    def _swap_enc(self, t: TunnelState, peer: _Peer, old: SecurityAssociation, new: SecurityAssociation) -> Process:
        if peer.switch_id is not None:
            key, entry = self._enc_entry(new)
            modified = yield from self._modify(peer.switch_id, SAD_ENC, key, entry.action, dict(entry.params))
            old_key = self._enc_entry(old)[0]
            t.entries = [
                InstalledEntry(e.switch_id, e.table, e.key, modified)
                if (e.switch_id, e.table, e.key) == (peer.switch_id, SAD_ENC, old_key) else e
                for e in t.entries
            ]
        else:
            assert peer.roadwarrior_id is not None
            ack = yield from self._send(peer.roadwarrior_id, SaUpdate(t.profile_id, replace_out=new))
            if not ack.ok:
                raise InsertRejected(f"Agent {peer.roadwarrior_id} refused outbound SA {new.spi}: {ack.error}")

    def _remove_dec(self, t: TunnelState, peer: _Peer, old: SecurityAssociation) -> Process:
        """Returns False if the old decryption SA could not be removed."""
        if peer.switch_id is not None:
            key = self._dec_entry(old)[0]
            item = next(e for e in t.entries if (e.switch_id, e.table, e.key) == (peer.switch_id, SAD_DEC, key))
            if not (yield from self._delete(item, self.params.delete_retries)):
                return False
            t.entries.remove(item)
            return True
        assert peer.roadwarrior_id is not None
        try:
            ack = yield from self._send(peer.roadwarrior_id, SaUpdate(t.profile_id, remove_in_spi=old.spi),
                                        self.params.delete_retries)
        except PeerUnreachable:
            return False
        return ack.ok

    def renew_sa_process(self, spi: int) -> Process:
        """Replaces the SA `spi`: new DEC at the receiver, ENC swap at the sender,
        then removal of the old DEC.
        """
        if spi in self._renewed:
            logger.debug(f"Ignoring repeated expiry of SPI {spi}")
            self.ignored_notifications += 1
            return None
        try:
            tunnel = self.tunnel_for_spi(spi)
        except UnknownSpi:
            if spi in self.spis:
                logger.warning(f"Ignoring expiry of retired SPI {spi}")
                self.ignored_notifications += 1
                return None
            raise
        while tunnel.status.is_renewing:
            # one renewal per tunnel at a time
            yield self.env.timeout(self.latency)
        if tunnel.status is not TunnelStatus.ESTABLISHED or tunnel.direction_of(spi) is None:
            logger.warning(f"Tunnel {tunnel.profile_id} is {tunnel.status.value}; not renewing {spi}")
            self.ignored_notifications += 1
            return tunnel

        direction = tunnel.direction_of(spi)
        left, right = self._peers(tunnel.profile)
        sender, receiver = (left, right) if direction == 'i' else (right, left)
        old = tunnel.sa_i if direction == 'i' else tunnel.sa_j
        assert old is not None
        self._renewed.add(spi)
        tunnel.transition(TunnelStatus.RENEWING_I if direction == 'i' else TunnelStatus.RENEWING_J)
        with self.timings.measure('renewal'):
            new = self._new_sa(tunnel.profile, sender, receiver)
            mark = len(tunnel.entries)
            try:
                yield from self._install_dec(tunnel, receiver, new)
                yield from self._swap_enc(tunnel, sender, old, new)
            except ControllerError as e:
                logger.warning(f"Renewal of SPI {spi} failed: {e}")
                for item in tunnel.entries[mark:]:
                    yield from self._delete(item)
                del tunnel.entries[mark:]
                self._release_sa(new, sender, receiver)
                self._renewed.discard(spi)
                tunnel.transition(TunnelStatus.ESTABLISHED)
                raise
            if direction == 'i':
                tunnel.sa_i = new
            else:
                tunnel.sa_j = new
            if (yield from self._remove_dec(tunnel, receiver, old)):
                self._release_sa(old, sender, receiver)
            else:
                logger.warning(f"Old decryption SA {spi} could not be removed from {receiver.name}")
                tunnel.warnings.append(f"stale decryption SA {spi} on {receiver.name}")
                self._release_sa(old, sender)
        tunnel.renewals += 1
        tunnel.transition(TunnelStatus.ESTABLISHED)
        logger.info(f"Tunnel {tunnel.profile_id}: SPI {spi} renewed as {new.spi}")
        return tunnel

    def renew_sa(self, notification: Notification | ExpireNotice | int) -> TunnelState | None:
        spi = notification if isinstance(notification, int) else notification.spi
        return self._run(self.renew_sa_process(spi))

    # ------------------------------------------------------------------ #
    # Deletion
    # ------------------------------------------------------------------ #
    def delete_tunnel_process(self, profile_id: str) -> Process:
        """Removes SPD, SAD-ENC, SAD-DEC and owned route entries, then tears
        down the agent side. Unreachable peers are retried, then given up on.
        """
        self._profile(profile_id)
        tunnel = self.tunnels.get(profile_id)
        if tunnel is None or tunnel.status is TunnelStatus.DOWN:
            return tunnel
        tunnel.transition(TunnelStatus.DELETING)
        retries = self.params.delete_retries
        for item in sorted(tunnel.entries, key=lambda e: _DELETE_ORDER[e.table]):
            if not (yield from self._delete(item, retries)):
                logger.warning(f"Giving up deleting {item.table} {list(item.key)} on {item.switch_id}")
                tunnel.warnings.append(f"could not delete {item.table} entry on {item.switch_id}")
        tunnel.entries.clear()
        left = tunnel.profile.left_peer
        if tunnel.agent_configured and isinstance(left, RoadwarriorPeer):
            try:
                yield from self._send(left.roadwarrior_id, Teardown(profile_id), retries)
            except PeerUnreachable:
                logger.warning(f"Giving up tearing down {profile_id} on {left.roadwarrior_id}")
                tunnel.warnings.append(f"could not reach {left.roadwarrior_id}")
            tunnel.agent_configured = False
        peers = self._peers_or_right(tunnel.profile)
        self._release_sa(tunnel.sa_i, *peers)
        self._release_sa(tunnel.sa_j, *peers)
        tunnel.transition(TunnelStatus.DOWN)
        logger.info(f"Tunnel {profile_id} deleted")
        return tunnel

    def delete_tunnel(self, profile_id: str) -> TunnelState | None:
        return self._run(self.delete_tunnel_process(profile_id))

    # ------------------------------------------------------------------ #
    # Agent sessions
    # ------------------------------------------------------------------ #
    def offer_for(self, roadwarrior_id: str) -> TunnelOffer:
        profiles = [
            ProfileSummary(p.profile_id, str(p.traffic_selector.dst), p.sa_params.suite.value)
            for p in self.profiles.values()
            if isinstance(p.left_peer, RoadwarriorPeer) and p.left_peer.roadwarrior_id == roadwarrior_id
        ]
        return TunnelOffer(tuple(sorted(profiles, key=lambda s: s.profile_id)))

    def handle_agent_message_process(self, roadwarrior_id: str, message: AgentMessage) -> Process:
        """Serves one message of an agent session."""
        self._agent(roadwarrior_id)
        match message:
            case Hello(token=token, endpoint_ip=endpoint_ip):
                if message.roadwarrior_id != roadwarrior_id or self.tokens.get(roadwarrior_id) != token:
                    raise UnknownRoadwarrior(f"Authentication of {roadwarrior_id!r} failed.")
                self.sessions[roadwarrior_id] = endpoint_ip
                logger.info(f"Agent session for {roadwarrior_id} at {endpoint_ip}")
                yield from self._send(roadwarrior_id, self.offer_for(roadwarrior_id))
            case TunnelRequest(profile_id=profile_id):
                if roadwarrior_id not in self.sessions:
                    raise UnknownRoadwarrior(f"{roadwarrior_id!r} has not said Hello.")
                profile = self._profile(profile_id)
                left = profile.left_peer
                if not (isinstance(left, RoadwarriorPeer) and left.roadwarrior_id == roadwarrior_id):
                    raise UnknownProfile(f"Profile {profile_id!r} is not assigned to {roadwarrior_id!r}.")
                yield from self.setup_tunnel_process(profile_id)
                yield from self._send(roadwarrior_id, Ack(ref=profile_id))
            case ExpireNotice(spi=spi):
                yield from self.renew_sa_process(spi)
            case Teardown(profile_id=profile_id):
                yield from self.delete_tunnel_process(profile_id)
            case _:
                logger.debug(f"Ignoring {type(message).__name__} from {roadwarrior_id}")

    def handle_agent_session(self, roadwarrior_id: str, messages: list[AgentMessage]) -> None:
        """Serves a whole request stream; responses go out over the agent channel."""
        def _serve():
            for message in messages:
                yield from self.handle_agent_message_process(roadwarrior_id, message)
        self._run(_serve())

    # ------------------------------------------------------------------ #
    # Event loop
    # ------------------------------------------------------------------ #
    def submit(self, item: Notification | tuple[str, AgentMessage]) -> None:
        """Delivers a switch notification or an (roadwarrior_id, message) pair
        to the controller after one control latency.
        """
        def _deliver():
            yield self.env.timeout(self.latency)
            yield self.inbox.put(item)
        self.env.process(_deliver())

    def _serve_forever(self) -> Process:
        while True:
            item = yield self.inbox.get()
            try:
                if isinstance(item, Notification):
                    yield from self.renew_sa_process(item.spi)
                else:
                    yield from self.handle_agent_message_process(*item)
            except ControllerError as e:
                logger.warning(f"Controller could not serve {item}: {e}")
                self.errors.append(f"{type(e).__name__}: {e}")
                if not isinstance(item, Notification) and item[0] in self.agent_channels:
                    ref = getattr(item[1], 'profile_id', '')
                    try:
                        yield from self._send(item[0], Ack(ok=False, ref=ref, error=f"{type(e).__name__}: {e}"))
                    except PeerUnreachable:
                        pass

    def start(self) -> simpy.Process:
        """Starts the single event loop serving notifications and agents."""
        if self._loop is None:
            self._loop = self.env.process(self._serve_forever())
        return self._loop

    def status(self) -> dict[str, Any]:
        """JSON-able status of all tunnels, keys redacted."""
        return {pid: self.tunnels[pid].to_dict() for pid in sorted(self.tunnels)}
