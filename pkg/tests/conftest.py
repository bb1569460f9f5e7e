import json
import pathlib

import pytest

from espnet.controller import Controller, TunnelProfile
from espnet.pipeline import LPM_FWD, SwitchState, TableEntry

ROOT = pathlib.Path(__file__).resolve().parents[1]
FIXTURES = pathlib.Path(__file__).resolve().parent / 'fixtures'
SCENARIOS = ROOT / 'scenarios'

H1_MAC, H2_MAC = '02:00:00:00:00:01', '02:00:00:00:00:02'
S1_PORTS = {1: '02:00:00:00:01:01', 2: '02:00:00:00:01:02'}
S2_PORTS = {1: '02:00:00:00:02:01', 2: '02:00:00:00:02:02'}


def load_json(path: pathlib.Path):
    with open(path, 'r') as f:
        return json.load(f)


def scenario_data(name: str) -> dict:
    return load_json(SCENARIOS / f"{name}.json")


def make_switch_pair(**kwargs) -> tuple[SwitchState, SwitchState]:
    """s1 (192.0.2.1, LAN 10.0.1.0/24) and s2 (192.0.2.2, LAN 10.0.2.0/24)
    with their static routes, as in the site-to-site scenario.
    """
    s1 = SwitchState('s1', S1_PORTS, **kwargs)
    s2 = SwitchState('s2', S2_PORTS, **kwargs)
    for sw, lan, lan_mac, remote, remote_mac in [
        (s1, '10.0.1.0/24', H1_MAC, '192.0.2.2/32', S2_PORTS[2]),
        (s2, '10.0.2.0/24', H2_MAC, '192.0.2.1/32', S1_PORTS[2]),
    ]:
        sw.table_insert(LPM_FWD, TableEntry((lan,), 'forward_packet', {'dst_mac': lan_mac, 'port': 1}))
        sw.table_insert(LPM_FWD, TableEntry((remote,), 'forward_packet', {'dst_mac': remote_mac, 'port': 2}))
    return s1, s2


def site_profile(suite: str = 'AES_CTR_HMAC_MD5', soft_limit: int = 50000, hard_limit: int = 51000,
                 profile_id: str = 's1-s2') -> TunnelProfile:
    return TunnelProfile.model_validate({
        'profile_id': profile_id,
        'mode': 'site_to_site',
        'traffic_selector': {'src': '10.0.1.0/24', 'dst': '10.0.2.0/24'},
        'left_peer': {'switch_id': 's1', 'endpoint_ip': '192.0.2.1', 'network_resource': '10.0.1.0/24'},
        'right_peer': {'switch_id': 's2', 'endpoint_ip': '192.0.2.2', 'network_resource': '10.0.2.0/24'},
        'sa_params': {'suite': suite, 'soft_limit': soft_limit, 'hard_limit': hard_limit},
    })


@pytest.fixture
def site_pair():
    """A controller managing two connected switches with one site-to-site profile."""
    s1, s2 = make_switch_pair()
    controller = Controller(seed=7)
    controller.connect_switch(s1)
    controller.connect_switch(s2)
    controller.add_profile(site_profile())
    return controller, s1, s2
