import logging
from concurrent.futures import ProcessPoolExecutor
from typing import Any

from ..crypto import CipherSuiteId
from ._net import SimNet, build_simnet
from ._report import ExperimentReport, RunReport
from ._scenario import Scenario, SpdRule, validate_scenario

logger = logging.getLogger(__name__)

__all__ = ['VARIANTS', 'scenario_variant', 'run_scenario', 'run_experiment']

VARIANTS = ('bypass', 'null', 'aes')

_SUITES = {'null': CipherSuiteId.NULL, 'aes': CipherSuiteId.AES_CTR_HMAC_MD5}


def scenario_variant(scenario: Scenario, variant: str) -> Scenario:
    """The scenario with every tunnel using one suite, or with no tunnels.

    The ``bypass`` variant drops all profiles and agent scripts and lets
    every switch forward everything in the clear.
    """
    if variant == 'bypass':
        switches = [
            sw.model_copy(update={'spd': [SpdRule(action='bypass', priority=0)]})
            for sw in scenario.topology.switches
        ]
        return scenario.model_copy(update={
            'profiles': [],
            'agent_script': {},
            'traffic': [f.model_copy(update={'mode': 'bypass'}) for f in scenario.traffic],
            'topology': scenario.topology.model_copy(update={'switches': switches}),
        })
    if variant not in _SUITES:
        raise ValueError(f"Unknown variant {variant!r}, expected one of {VARIANTS}.")
    profiles = [
        p.model_copy(update={'sa_params': p.sa_params.model_copy(update={'suite': _SUITES[variant]})})
        for p in scenario.profiles
    ]
    return scenario.model_copy(update={'profiles': profiles})


def run_scenario(net: SimNet) -> RunReport:
    """Runs a built net to quiescence and returns its report."""
    net.run()
    report = net.report()
    logger.info(
        f"{report.scenario} [{report.variant}, seed {report.seed}]: "
        f"{sum(f.delivered for f in report.flows)}/{sum(f.sent for f in report.flows)} delivered, "
        f"{report.rekey_count} rekeys"
    )
    return report


def _run_one(data: dict[str, Any], variant: str, seed: int, timings: bool) -> RunReport:
    scenario = validate_scenario(data)
    if variant != 'default':
        scenario = scenario_variant(scenario, variant)
    return run_scenario(build_simnet(scenario, seed=seed, variant=variant, timings=timings))


def run_experiment(
    scenario: Scenario,
    *,
    runs: int | None = None,
    seed: int | None = None,
    jobs: int = 1,
    timings: bool = False,
) -> ExperimentReport:
    """Runs `runs` seeds (consecutive from `seed`) of every variant.

    Parameters
    __________
    scenario: Scenario
        Validated scenario. With `compare_suites` set, each seed runs the
        bypass, null and aes variants.
    runs: int | None
        Defaults to the scenario's own run count.
    seed: int | None
        First seed; defaults to the scenario seed.
    jobs: int
        Worker processes. Reports are merged in run order regardless.
    timings: bool
        Adds non-deterministic wall-clock samples to the report.
    """
    runs = scenario.runs if runs is None else runs
    first = scenario.seed if seed is None else seed
    if runs < 1 or jobs < 1:
        raise ValueError(f"runs and jobs must be positive, found runs={runs}, jobs={jobs}.")
    variants = VARIANTS if scenario.compare_suites else ('default',)
    tasks = [(v, (first + i) % (1 << 64)) for i in range(runs) for v in variants]
    data = scenario.model_dump(mode='json', by_alias=True)
    if jobs == 1:
        reports = [_run_one(data, v, s, timings) for v, s in tasks]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            reports = list(pool.map(_run_one, [data] * len(tasks), *zip(*tasks), [timings] * len(tasks)))
    return ExperimentReport(scenario.name, reports)
