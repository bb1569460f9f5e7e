"""Per-run and per-experiment reports."""
import json
import logging
from collections import Counter
from dataclasses import dataclass, field
from typing import Any

import numpy as np
import pandas as pd

logger = logging.getLogger(__name__)

__all__ = ['FlowStats', 'RunReport', 'ExperimentReport', 'REKEY_DROP_CATEGORIES']

# Drops a broken renewal ordering would cause
REKEY_DROP_CATEGORIES = ('no-sa', 'icv-fail', 'hard-limit', 'bad-padding', 'seq-overflow')


@dataclass
class FlowStats:
    flow_id: int
    src: str
    dst: str
    mode: str
    size: int
    sent: int = 0
    delivered: int = 0
    drops: Counter[str] = field(default_factory=Counter)

    @property
    def dropped(self) -> int:
        return sum(self.drops.values())

    @property
    def conserved(self) -> bool:
        return self.sent == self.delivered + self.dropped

    def to_dict(self) -> dict[str, Any]:
        return {
            'flow_id': self.flow_id, 'src': self.src, 'dst': self.dst, 'mode': self.mode,
            'size': self.size, 'sent': self.sent, 'delivered': self.delivered,
            'drops': dict(sorted(self.drops.items())),
        }


@dataclass
class RunReport:
    """Outcome of one simulated run.

    Everything except `timings` is a deterministic function of the
    scenario and the seed.
    """
    scenario: str
    seed: int
    variant: str
    flows: list[FlowStats]
    rekey_count: int
    control_messages: dict[str, int]
    switches: dict[str, dict[str, Any]]
    tunnels: dict[str, Any]
    payload_ok: bool
    links_drained: bool
    controller_errors: list[str] = field(default_factory=list)
    ignored_notifications: int = 0
    duration: float = 0.0
    timings: dict[str, list[float]] | None = None

    @property
    def total_work(self) -> float:
        return float(sum(s['work'] for s in self.switches.values()))

    @property
    def delivered_bytes(self) -> int:
        return sum(f.delivered * f.size for f in self.flows)

    @property
    def throughput(self) -> float:
        """Delivered payload bytes per unit of data-plane work."""
        work = self.total_work
        return self.delivered_bytes / work if work else 0.0

    @property
    def rekey_drops(self) -> int:
        return sum(f.drops[c] for f in self.flows for c in REKEY_DROP_CATEGORIES)

    @property
    def conserved(self) -> bool:
        return all(f.conserved for f in self.flows)

    def to_frame(self) -> pd.DataFrame:
        """One row per flow with a column per drop category."""
        rows = []
        for f in self.flows:
            row = {k: v for k, v in f.to_dict().items() if k != 'drops'}
            row.update({f"drop:{k}": v for k, v in f.drops.items()})
            rows.append(row)
        return pd.DataFrame(rows).fillna(0)

    def to_dict(self) -> dict[str, Any]:
        out = {
            'scenario': self.scenario,
            'seed': self.seed,
            'variant': self.variant,
            'flows': [f.to_dict() for f in self.flows],
            'rekey_count': self.rekey_count,
            'rekey_drops': self.rekey_drops,
            'control_messages': self.control_messages,
            'switches': self.switches,
            'tunnels': self.tunnels,
            'payload_ok': self.payload_ok,
            'conserved': self.conserved,
            'links_drained': self.links_drained,
            'controller_errors': self.controller_errors,
            'ignored_notifications': self.ignored_notifications,
            'duration': round(self.duration, 9),
            'work': round(self.total_work, 6),
            'throughput': round(self.throughput, 9),
        }
        if self.timings is not None:
            out['timings'] = self.timings
        return out


@dataclass
class ExperimentReport:
    """All runs of a scenario, merged in run order."""
    scenario: str
    runs: list[RunReport]

    def summary(self) -> pd.DataFrame:
        """Per-variant means over runs."""
        frame = pd.DataFrame([{
            'variant': r.variant, 'seed': r.seed, 'throughput': r.throughput,
            'rekeys': r.rekey_count, 'rekey_drops': r.rekey_drops,
            'delivered': sum(f.delivered for f in r.flows), 'sent': sum(f.sent for f in r.flows),
        } for r in self.runs])
        return frame.groupby('variant', sort=False).mean(numeric_only=True).drop(columns='seed')

    def relative_throughput(self) -> dict[str, float]:
        """Mean work-normalized throughput of each variant relative to the best.

        With BYPASS present the reference is BYPASS, which does the least work.
        """
        means = self.summary()['throughput']
        reference = means.get('bypass', means.max())
        if not reference:
            return {v: 0.0 for v in means.index}
        return {v: round(float(m / reference), 9) for v, m in means.items()}

    def throughput_samples(self) -> dict[str, list[float]]:
        samples: dict[str, list[float]] = {}
        for r in self.runs:
            samples.setdefault(r.variant, []).append(r.throughput)
        return samples

    def timing_samples(self) -> dict[str, list[float]] | None:
        if all(r.timings is None for r in self.runs):
            return None
        merged: dict[str, list[float]] = {}
        for r in self.runs:
            for op, values in (r.timings or {}).items():
                merged.setdefault(op, []).extend(values)
        return merged

    def format_table(self) -> str:
        table = self.summary()
        table['relative'] = pd.Series(self.relative_throughput())
        return table.to_string(float_format=lambda v: f"{v:.4f}")

    def to_dict(self) -> dict[str, Any]:
        summary = self.summary()
        out = {
            'scenario': self.scenario,
            'runs': [r.to_dict() for r in self.runs],
            'relative_throughput': self.relative_throughput(),
            'throughput_samples': {k: [round(v, 9) for v in vs] for k, vs in self.throughput_samples().items()},
            'rekeys_mean': {v: float(np.round(x, 6)) for v, x in summary['rekeys'].items()},
            'all_payloads_ok': all(r.payload_ok for r in self.runs),
        }
        timings = self.timing_samples()
        if timings is not None:
            out['timings'] = timings
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + '\n'
