"""Tunnel profiles as held by the controller, validated with pydantic."""
import json
import logging
import pathlib
from ipaddress import IPv4Address, IPv4Network
from typing import Annotated, Literal

from pydantic import BaseModel, ConfigDict, Discriminator, Field, Tag, TypeAdapter, model_validator

from ..agent import Selector
from ..crypto import CipherSuiteId, SecurityAssociation

logger = logging.getLogger(__name__)

__all__ = ['TrafficSelector', 'SwitchPeer', 'RoadwarriorPeer', 'SaParams',
           'TunnelProfile', 'load_profiles']

_SA_DEFAULTS = SecurityAssociation.__dataclass_fields__


class _Model(BaseModel):
    model_config = ConfigDict(extra='forbid', frozen=True)


class TrafficSelector(_Model):
    src: IPv4Network = IPv4Network('0.0.0.0/0')
    dst: IPv4Network = IPv4Network('0.0.0.0/0')
    protocol: int | None = Field(default=None, ge=0, le=255)

    def to_selector(self) -> Selector:
        return Selector(src=self.src, dst=self.dst, protocol=self.protocol)


class SwitchPeer(_Model):
    kind: Literal['switch'] = 'switch'
    switch_id: str
    endpoint_ip: IPv4Address
    network_resource: IPv4Network


class RoadwarriorPeer(_Model):
    kind: Literal['roadwarrior'] = 'roadwarrior'
    roadwarrior_id: str


class SaParams(_Model):
    suite: CipherSuiteId = CipherSuiteId.AES_CTR_HMAC_MD5
    soft_limit: int = Field(default=_SA_DEFAULTS['soft_limit'].default, gt=0)
    hard_limit: int = Field(default=_SA_DEFAULTS['hard_limit'].default, gt=0)

    @model_validator(mode='after')
    def _ordered_limits(self) -> 'SaParams':
        if self.soft_limit >= self.hard_limit:
            raise ValueError(
                f"soft_limit ({self.soft_limit}) must be smaller than hard_limit ({self.hard_limit})"
            )
        return self


def _peer_kind(value) -> str:
    if isinstance(value, dict):
        return value.get('kind', 'roadwarrior' if 'roadwarrior_id' in value else 'switch')
    return getattr(value, 'kind', 'switch')


class TunnelProfile(_Model):
    """A tunnel between a left peer (switch or roadwarrior) and a right switch."""
    profile_id: str
    mode: Literal['host_to_site', 'site_to_site']
    traffic_selector: TrafficSelector = TrafficSelector()
    left_peer: Annotated[
        Annotated[SwitchPeer, Tag('switch')] | Annotated[RoadwarriorPeer, Tag('roadwarrior')],
        Discriminator(_peer_kind),
    ]
    right_peer: SwitchPeer
    sa_params: SaParams = SaParams()

    @model_validator(mode='after')
    def _peers_fit_mode(self) -> 'TunnelProfile':
        if self.mode == 'site_to_site' and not isinstance(self.left_peer, SwitchPeer):
            raise ValueError("site_to_site profiles need a switch as left peer")
        if self.mode == 'host_to_site' and not isinstance(self.left_peer, RoadwarriorPeer):
            raise ValueError("host_to_site profiles need a roadwarrior as left peer")
        if isinstance(self.left_peer, SwitchPeer) and self.left_peer.switch_id == self.right_peer.switch_id:
            raise ValueError("left and right peer must be different switches")
        return self

    @property
    def is_site_to_site(self) -> bool:
        return self.mode == 'site_to_site'


_PROFILE_LIST = TypeAdapter(list[TunnelProfile])


def load_profiles(path: str | pathlib.Path) -> list[TunnelProfile]:
    """Reads a JSON array of profiles. Raises pydantic.ValidationError."""
    with open(path, 'r') as f:
        data = json.load(f)
    profiles = _PROFILE_LIST.validate_python(data)
    logger.info(f"Loaded {len(profiles)} tunnel profiles from {path}")
    return profiles
