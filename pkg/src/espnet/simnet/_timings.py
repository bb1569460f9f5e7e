import logging

import numpy as np
import pandas as pd
from seaborn.algorithms import bootstrap
from seaborn.utils import ci

from .._params import ReportParams, validate_report_params
from ..controller import TIMED_OPERATIONS
from ._net import SimNet

logger = logging.getLogger(__name__)

__all__ = ['bootstrap_ci', 'summarize_samples', 'measure_control_timings']


def bootstrap_ci(values, params: dict | ReportParams | None = None, seed: int = 0) -> tuple[float, float]:
    """Percentile bootstrap interval of the mean.

    >>> bootstrap_ci([2.0, 2.0, 2.0])
    (2.0, 2.0)
    """
    params = validate_report_params(params)
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        return (float('nan'), float('nan'))
    if values.size == 1:
        return (float(values[0]), float(values[0]))
    boots = bootstrap(values, n_boot=int(params.n_boot), func='mean', seed=seed)
    low, high = ci(boots, which=params.confidence)
    return (float(low), float(high))


def summarize_samples(
    samples: dict[str, list[float]],
    params: dict | ReportParams | None = None,
    order: tuple[str, ...] = TIMED_OPERATIONS,
) -> pd.DataFrame:
    """Mean and bootstrap interval per key, one row each, in `order`.

    Keys without samples are left out.
    """
    rows = []
    keys = [k for k in order if k in samples] + sorted(k for k in samples if k not in order)
    for key in keys:
        values = samples[key]
        if not values:
            continue
        low, high = bootstrap_ci(values, params)
        rows.append({'operation': key, 'n': len(values), 'mean': float(np.mean(values)),
                     'ci_low': low, 'ci_high': high})
    return pd.DataFrame(rows, columns=['operation', 'n', 'mean', 'ci_low', 'ci_high']).set_index('operation')


def measure_control_timings(net: SimNet, params: dict | ReportParams | None = None) -> pd.DataFrame:
    """Wall-clock distributions (ms) of the timed controller operations.

    Runs `net` first if it has not run yet. Absolute values depend on the
    machine; only their presence and counts are meaningful in tests.
    """
    if not net.controller.timings.enabled:
        raise ValueError("Timing instrumentation is disabled; build the net with timings=True.")
    if not net.has_run:
        net.run()
    if params is None:
        params = dict(net.scenario.report)
    table = summarize_samples(net.controller.timings.samples, params)
    logger.info(f"Control timings of {net.scenario.name}:\n{table.to_string()}")
    return table
