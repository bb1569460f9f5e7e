import warnings

import matplotlib

matplotlib.use('Agg')

import matplotlib.pyplot as plt  # noqa: E402
import pytest  # noqa: E402

from espnet.plotting import PALETTES, DiscretePalette, ReportArtist, get_palette, plot_report  # noqa: E402
from espnet.plotting._figures import FontSize, validate_font_size  # noqa: E402

REPORT = {
    'scenario': 'goodput',
    'throughput_samples': {'bypass': [2.0, 2.1], 'null': [1.5, 1.6], 'aes': [0.5, 0.55]},
    'timings': {'setup': [1.2, 1.4], 'renewal': [0.8], 'table_insert': [0.1, 0.1, 0.2]},
}


@pytest.fixture(autouse=True)
def close_figures():
    yield
    plt.close('all')


def test_palettes():
    for name in PALETTES:
        assert len(get_palette(name.lower())) > 0
    pal = DiscretePalette(['#000', (1.0, 1.0, 1.0)])
    assert pal.take(3) == ['#000', '#ffffff', '#000']
    assert pal.as_rgb_array().shape == (2, 3)
    with pytest.raises(ValueError):
        DiscretePalette(['red'])
    with pytest.raises(ValueError):
        get_palette('rainbow')


def test_font_size():
    assert validate_font_size(None) == FontSize()
    assert validate_font_size(9) == FontSize(9, 9, 9, 9, 9)
    assert validate_font_size({'title': 20}).title == 20
    with pytest.raises(ValueError):
        validate_font_size('large')


def test_plot_report(tmp_path):
    out = tmp_path / 'report.png'
    fig = plot_report(REPORT, str(out), ReportArtist(palette='vintage', font_size=10))
    assert out.exists() and out.stat().st_size > 0
    assert len(fig.axes) == 2
    throughput, timings = fig.axes
    assert [t.get_text() for t in throughput.get_xticklabels()] == ['BYPASS', 'NULL', 'AES']
    assert len(timings.patches) == 3


def test_single_panel():
    fig = plot_report({'throughput_samples': REPORT['throughput_samples']})
    assert len(fig.axes) == 1


def test_nothing_to_plot():
    with pytest.raises(ValueError):
        plot_report({'throughput_samples': {'default': [1.0]}})


def test_reference_without_throughput():
    report = {'throughput_samples': {'bypass': [0.0, 0.0], 'aes': [0.5, 0.4]}}
    with warnings.catch_warnings():
        warnings.simplefilter('error', RuntimeWarning)
        fig = plot_report(report)
    heights = [bar.get_height() for bar in fig.axes[0].patches]
    assert heights == [0.0, 0.0]
