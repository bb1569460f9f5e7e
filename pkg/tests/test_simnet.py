import pytest
from conftest import scenario_data

from espnet import Deadlock
from espnet.agent import ConfigApply, HostAgent, Selector
from espnet.codec import ETH_LEN, make_packet, serialize_packet
from espnet.crypto import SecurityAssociation
from espnet.controller import TIMED_OPERATIONS
from espnet.simnet import (
    SpdRule,
    build_simnet,
    make_payload,
    measure_control_timings,
    read_tag,
    run_experiment,
    run_scenario,
    scenario_variant,
    summarize_samples,
    validate_scenario,
)


def with_counts(name: str, count: int) -> dict:
    data = scenario_data(name)
    for flow in data['traffic']:
        flow['count'] = count
    return data


def assert_clean(report, expected: int) -> None:
    assert [f.delivered for f in report.flows] == [expected] * len(report.flows)
    assert report.conserved and report.payload_ok and report.links_drained
    assert report.controller_errors == []


def test_build_site_to_site():
    net = build_simnet(scenario_data('site_to_site'))
    assert set(net.switches) == {'s1', 's2'} and set(net.hosts) == {'h1', 'h2'}
    assert len(net.nodes) == 4 and len(net.links) == 6
    assert net.links[('s1', 2)].dst == ('s2', 2)
    assert not net.has_run
    with pytest.raises(RuntimeError):
        net.report()


def test_small_site_to_site_run():
    net = build_simnet(with_counts('site_to_site', 200))
    report = run_scenario(net)
    assert_clean(report, 200)
    assert report.rekey_count == 0
    assert report.switches['s1']['drops'] == {}
    # both switches carry both directions
    assert report.switches['s1']['forwarded'] == 400
    assert set(report.tunnels) == {'s1-s2'}
    with pytest.raises(RuntimeError):
        net.run()


def test_same_seed_same_report():
    data = with_counts('site_to_site', 50)
    first = run_scenario(build_simnet(data)).to_dict()
    second = run_scenario(build_simnet(data)).to_dict()
    assert first == second
    other = run_scenario(build_simnet(data, seed=8)).to_dict()
    assert other['seed'] == 8
    assert other['tunnels'] != first['tunnels']


def test_rekey_without_drops():
    report = run_scenario(build_simnet(scenario_data('rekey')))
    assert_clean(report, 3100)
    assert report.rekey_count == 6
    assert report.rekey_drops == 0
    assert report.ignored_notifications >= 0


def test_host_to_site():
    report = run_scenario(build_simnet(scenario_data('host_to_site')))
    assert_clean(report, 1000)
    assert report.rekey_count == 6
    assert report.rekey_drops == 0
    assert report.switches['gw']['drops'] == {}


def test_uncovered_traffic_is_denied():
    data = with_counts('site_to_site', 5)
    data['traffic'] = [{'src': 'h1', 'dst': '192.0.2.2', 'count': 5, 'mode': 'bypass'}]
    report = run_scenario(build_simnet(data))
    assert report.flows[0].delivered == 0
    assert report.flows[0].drops == {'no-spd-match': 5}
    assert report.conserved


def test_bypass_variant():
    scenario = validate_scenario(with_counts('site_to_site', 20))
    bypass = scenario_variant(scenario, 'bypass')
    assert bypass.profiles == [] and bypass.agent_script == {}
    assert all(f.mode == 'bypass' for f in bypass.traffic)
    assert all(sw.spd == [SpdRule(action='bypass', priority=0)] for sw in bypass.topology.switches)
    report = run_scenario(build_simnet(bypass, variant='bypass'))
    assert_clean(report, 20)
    assert report.tunnels == {}
    with pytest.raises(ValueError):
        scenario_variant(scenario, 'rot13')


def test_null_variant_changes_suite():
    scenario = validate_scenario(scenario_data('site_to_site'))
    null = scenario_variant(scenario, 'null')
    assert null.profiles[0].sa_params.suite.name == 'NULL'
    assert scenario.profiles[0].sa_params.suite.name == 'AES_CTR_HMAC_MD5'


def test_goodput_ordering():
    scenario = validate_scenario(with_counts('goodput', 30))
    report = run_experiment(scenario, runs=2)
    assert [r.variant for r in report.runs] == ['bypass', 'null', 'aes'] * 2
    assert [r.seed for r in report.runs] == [7, 7, 7, 8, 8, 8]
    assert all(r.payload_ok and r.conserved for r in report.runs)
    relative = report.relative_throughput()
    assert relative['bypass'] == 1.0
    assert 1.0 > relative['null'] > relative['aes'] > 0
    assert set(report.throughput_samples()) == {'bypass', 'null', 'aes'}
    assert report.timing_samples() is None
    assert 'relative' in report.format_table()
    assert report.to_dict()['all_payloads_ok']


def test_experiment_validates_arguments():
    scenario = validate_scenario(with_counts('site_to_site', 1))
    with pytest.raises(ValueError):
        run_experiment(scenario, runs=0)


def test_payload_tags():
    payload = make_payload(2, 40, 64)
    assert len(payload) == 64
    assert read_tag(payload) == (2, 40)
    assert payload != make_payload(2, 41, 64)
    assert make_payload(2, 40, 64) == payload


def test_control_timings():
    net = build_simnet(with_counts('rekey', 1100), timings=True)
    table = measure_control_timings(net)
    assert net.has_run
    assert list(table.columns) == ['n', 'mean', 'ci_low', 'ci_high']
    assert set(table.index) <= set(TIMED_OPERATIONS)
    assert table.loc['renewal', 'n'] == 2
    assert (table['ci_low'] <= table['ci_high']).all()
    assert net.report().timings is not None
    with pytest.raises(ValueError):
        measure_control_timings(build_simnet(with_counts('rekey', 1)))


def test_summarize_samples_orders_rows():
    table = summarize_samples({'zzz': [1.0], 'setup': [1.0, 3.0], 'renewal': []})
    assert list(table.index) == ['setup', 'zzz']
    assert table.loc['setup', 'mean'] == 2.0


def test_trace_is_time_ordered():
    net = build_simnet(with_counts('site_to_site', 3), record_packets=True)
    net.run()
    lines = net.trace_lines()
    times = [e['time'] for e in lines]
    assert times == sorted(times)
    kinds = {e['kind'] for e in lines}
    assert {'send', 'forward', 'deliver', 'control'} <= kinds
    assert sum(e['kind'] == 'deliver' for e in lines) == 6


def test_deadlock_carries_state():
    err = Deadlock('stuck', {'time': 1.0})
    assert err.state == {'time': 1.0}


@pytest.mark.slow
def test_full_site_to_site():
    report = run_scenario(build_simnet(scenario_data('site_to_site')))
    assert_clean(report, 10_000)
    assert report.rekey_drops == 0


def test_host_counts_a_forged_trailer():
    net = build_simnet(with_counts('site_to_site', 1))
    h1_to_h2 = SecurityAssociation(spi=3000, tunnel_src='10.0.1.1', tunnel_dst='10.0.2.1', suite='NULL')
    h2_to_h1 = SecurityAssociation(spi=3001, tunnel_src='10.0.2.1', tunnel_dst='10.0.1.1', suite='NULL')
    sender = HostAgent('h1', '10.0.1.1', '02:00:00:00:00:01', '02:00:00:00:01:01')
    sender.apply_config(ConfigApply('t', sa_in=h2_to_h1, sa_out=h1_to_h2,
                                    selector=Selector('10.0.1.1/32', '10.0.2.1/32')))
    receiver = net.hosts['h2']
    receiver.agent.apply_config(ConfigApply('t', sa_in=h1_to_h2, sa_out=h2_to_h1,
                                            selector=Selector('10.0.2.1/32', '10.0.1.1/32')))
    inner = serialize_packet(make_packet('02:00:00:00:00:01', '02:00:00:00:01:01', '10.0.1.1', '10.0.2.1',
                                         payload=make_payload(0, 0, 64)))
    frame = sender.host_send(inner[ETH_LEN:])
    assert frame is not None
    receiver.receive(0, frame[:-1] + b'\x11', (0, 0))
    receiver.receive(0, frame[:-3] + b'\x09' + frame[-2:], (0, 1))
    assert net.flows[0].drops == {'bad-padding': 2}
    assert net.flows[0].delivered == 0
