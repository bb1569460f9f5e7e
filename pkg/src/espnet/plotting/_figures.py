import logging
from collections import namedtuple
from functools import wraps
from typing import Any

import matplotlib.pyplot as plt
import numpy as np
import seaborn as sns

from ..simnet import VARIANTS, bootstrap_ci, summarize_samples
from ._palettes import DiscretePalette, get_palette

logger = logging.getLogger(__name__)

__all__ = ['FontSize', 'Despine', 'ReportArtist', 'plot_report']

FontSize = namedtuple(
    'FontSize',
    ['title', 'xlabel', 'ylabel', 'ticklabels', 'annotation'],
    defaults=(13, 12, 12, 11, 16),
)

Despine = namedtuple(
    'Despine',
    ['top', 'left', 'bottom', 'right'],
    defaults=(True, False, False, True),
)


def validate_font_size(font_size: float | dict | FontSize | None) -> FontSize:
    if font_size is None:
        return FontSize()
    if isinstance(font_size, FontSize):
        return font_size
    if isinstance(font_size, dict):
        return FontSize(**font_size)
    if isinstance(font_size, (int, float)):
        return FontSize(*((font_size,) * len(FontSize._fields)))
    raise ValueError(
        f"Font size of type {type(font_size)} not understood. "
        "Please specify an int, dict or FontSize object."
    )


def validate_despine(despine: bool | str | Despine) -> Despine:
    """Spines to remove; a string holds any of t, l, b, r.

    >>> validate_despine('tr')
    Despine(top=True, left=False, bottom=False, right=True)
    """
    if isinstance(despine, Despine):
        return despine
    if isinstance(despine, bool):
        return Despine(*((despine,) * 4))
    if isinstance(despine, str):
        return Despine(top='t' in despine, left='l' in despine,
                       bottom='b' in despine, right='r' in despine)
    raise ValueError(f"Despine of type {type(despine)} not understood.")


def prettify_axis(fn):
    """Applies labels, spines and font sizes after drawing."""

    @wraps(fn)
    def _inner(self, report, *args, ax: plt.Axes | None = None, title=None, xlabel=None, ylabel=None, **kwargs):
        if ax is None:
            _, ax = plt.subplots(figsize=self.subfigsize)
        fn(self, report, *args, ax=ax, **kwargs)
        self.write_on(ax, title=title, xlabel=xlabel, ylabel=ylabel)
        sns.despine(ax=ax, **self.despine._asdict())
        self.correct_font_size(ax)
        return ax

    return _inner


class ReportArtist:
    """Draws the figures of an experiment report with one shared style.

    Parameters
    __________
    subfigsize: tuple[float, float]
        Size of a single panel, (width, height).
    font_size: int | dict | FontSize
        A single size for every text element, or one per element.
    despine: bool | str | Despine
        Spines to remove.
    palette: str | list[str] | DiscretePalette
        Palette name from the shipped palettes, or a color list.
    """

    def __init__(
        self,
        *,
        subfigsize: tuple[float, float] = (5, 4),
        font_size: float | dict | FontSize | None = None,
        despine: bool | str | Despine = 'tr',
        palette: str | list[str] | DiscretePalette = 'office',
    ):
        self.subfigsize = subfigsize
        self.font_size = validate_font_size(font_size)
        self.despine = validate_despine(despine)
        self.palette = get_palette(palette)

    def write_on(self, ax: plt.Axes, /, title: str | None = None,
                 xlabel: str | None = None, ylabel: str | None = None) -> None:
        if title:
            ax.set_title(title)
        if xlabel:
            ax.set_xlabel(xlabel)
        if ylabel:
            ax.set_ylabel(ylabel)

    def correct_font_size(self, ax: plt.Axes) -> None:
        ax.xaxis.label.set_size(self.font_size.xlabel)
        ax.yaxis.label.set_size(self.font_size.ylabel)
        ax.title.set_size(self.font_size.title)
        ax.tick_params(labelsize=self.font_size.ticklabels)

    def annotate(self, ax: plt.Axes, /, i: int, annot_style: str = 'a') -> None:
        """Adds a panel letter."""
        ax.set_title(chr(ord(annot_style) + i), loc='left',
                     fontsize=self.font_size.annotation, fontweight='bold')

    def _bars(self, ax: plt.Axes, labels: list[str], means, lows, highs) -> None:
        means = np.asarray(means, dtype=float)
        err = np.vstack([means - np.asarray(lows, dtype=float), np.asarray(highs, dtype=float) - means])
        ax.bar(labels, means, yerr=np.nan_to_num(err), capsize=4, color=self.palette.take(len(labels)))

    @prettify_axis
    def throughput(self, report: dict[str, Any], ax: plt.Axes) -> None:
        """Work-normalized throughput per variant, relative to BYPASS."""
        samples = report['throughput_samples']
        order = [v for v in VARIANTS if v in samples] + sorted(v for v in samples if v not in VARIANTS)
        reference = float(np.mean(samples[order[0]]))
        labels, means, lows, highs = [], [], [], []
        for variant in order:
            rel = np.asarray(samples[variant], dtype=float)
            # a reference variant that moved nothing gives all-zero bars
            rel = rel / reference if reference and np.isfinite(reference) else np.zeros_like(rel)
            low, high = bootstrap_ci(rel)
            labels.append(variant.upper())
            means.append(rel.mean())
            lows.append(low)
            highs.append(high)
        self._bars(ax, labels, means, lows, highs)

    @prettify_axis
    def timings(self, report: dict[str, Any], ax: plt.Axes) -> None:
        """Mean wall-clock time per controller operation."""
        table = summarize_samples(report['timings'])
        self._bars(ax, [op.replace('_', ' ') for op in table.index],
                   table['mean'], table['ci_low'], table['ci_high'])
        ax.tick_params(axis='x', labelrotation=30)


def plot_report(report: dict[str, Any], out: str | None = None, artist: ReportArtist | None = None) -> plt.Figure:
    """Bar charts of relative throughput and, if present, control timings.

    `report` is the dict form of an ExperimentReport (as written to JSON).
    """
    artist = artist if artist is not None else ReportArtist()
    panels = []
    if len(report.get('throughput_samples', {})) > 1:
        panels.append('throughput')
    if report.get('timings'):
        panels.append('timings')
    if not panels:
        raise ValueError("Report has neither a suite comparison nor timings to plot.")
    w, h = artist.subfigsize
    fig, axes = plt.subplots(ncols=len(panels), figsize=(w * len(panels), h), squeeze=False)
    for i, (panel, ax) in enumerate(zip(panels, axes.flat)):
        if panel == 'throughput':
            artist.throughput(report, ax=ax, ylabel='relative throughput')
        else:
            artist.timings(report, ax=ax, ylabel='ms')
        if len(panels) > 1:
            artist.annotate(ax, i=i)
    fig.tight_layout()
    if out is not None:
        fig.savefig(out, dpi=300, bbox_inches='tight')
        logger.info(f"Wrote {out}")
    return fig
