import math

import pandas as pd
import pytest

from core.rates import RATE_COLUMNS
from core.zgate import ZGATE_COLUMNS
from services.plot_renderer import PlotRenderer
from services.result_store import ResultStore


@pytest.fixture
def renderer(tmp_path) -> PlotRenderer:
    return PlotRenderer(result_store=ResultStore(str(tmp_path)))


def _rates_table(knobs, alpha_sqs) -> pd.DataFrame:
    rows = []
    for alpha_sq in alpha_sqs:
        for r in (0.0, 0.35):
            for knob in knobs:
                rows.append({
                    "alpha_sq": alpha_sq, "r": r, "kappa_ratio_name": "kappa_phi", "kappa_ratio_value": knob,
                    "gamma_bit": math.exp(-2 * alpha_sq) * (1 + knob), "gamma_bit_stderr": 0.0,
                    "gamma_phase": math.nan, "gamma_phase_stderr": math.nan, "floor_clipped": False,
                    "r_db": 0.0, "gamma_bit_model": math.exp(-2 * alpha_sq), "gamma_phase_model": 0.01,
                })
    return pd.DataFrame(rows, columns=RATE_COLUMNS)


def test_render_tables_writes_rate_svg(renderer, tmp_path):
    paths = renderer.render_tables({"rates": _rates_table([0.0], [2.0, 3.0])}, "bit/")
    assert [path.replace("\\", "/") for path in paths] == [str(tmp_path / "bit" / "rates_bit.svg").replace("\\", "/")]
    with open(paths[0], encoding="utf-8") as f:
        assert "<svg" in f.read()


def test_render_rates_against_knob(renderer):
    assert renderer.render_rates(_rates_table([0.0, 1e-3, 1e-2], [2.0]), "knob.svg") is not None


def test_render_rates_skips_empty_table(renderer):
    assert renderer.render_rates(pd.DataFrame(columns=RATE_COLUMNS), "empty.svg") is None


def test_render_zgate(renderer):
    rows = [{"alpha_sq": 4.0, "r": 0.0, "r_db": 0.0, "kappa_minus": 0.0, "theta": math.pi, "t_gate": t,
             "epsilon_z": 0.1, "p_z": 0.04 / t, "p_x": 0.0, "p_z_model": 0.0385 / t} for t in (1.0, 2.0, 3.0)]
    assert renderer.render_zgate(pd.DataFrame(rows, columns=ZGATE_COLUMNS), "zgate.svg") is not None


def test_unknown_color_falls_back():
    assert PlotRenderer._color(0.123) == PlotRenderer._color(0.987)
