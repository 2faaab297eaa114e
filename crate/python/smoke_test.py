"""Smoke test for the pytankfleet extension.

Build and install first:

    cd crates/python && maturin build --release -o dist && pip install dist/*.whl
    python python/smoke_test.py
"""

import math
import tempfile
from pathlib import Path

import pytankfleet as tf


def check_vessel():
    v = tf.Vessel(initial_temp=50.0, n_layers=1, volume_total=100.0, loss_coeff=0.0, cond_coeff=0.0)
    out = v.step(True)
    assert math.isclose(v.layer_temps[0], 50.0 + 2160.0 / 418.6, rel_tol=1e-9), v.layer_temps
    assert math.isclose(out["energy_used"], 0.6, rel_tol=1e-12)
    assert out["delivered_temp"] is None

    v = tf.Vessel()
    out = v.step(False, draw_volume=20.0)
    assert out["delivered_temp"] is not None
    temps = v.layer_temps
    assert all(a <= b + 1e-9 for a, b in zip(temps, temps[1:])), temps


def check_pieces():
    assert tf.pava([55.0, 50.0, 60.0]) == [52.5, 52.5, 60.0]
    assert tf.rbc_action(54.0, False) is True
    assert tf.rbc_action(66.0, True) is False
    assert tf.rbc_action(60.0, True) is True

    draws = tf.generate_draws("family", 3, seed=7)
    assert draws == tf.generate_draws("family", 3, seed=7)
    assert all(0 <= step < 3 * 96 and vol > 0 for step, vol in draws)

    samples = [([51.0], True, 0.0, [53.0]), ([52.0], True, 0.0, [56.0])]
    model = tf.TransitionModel.fit(samples, knowledge=False)
    assert model.populated_bins == 1
    assert model.predict([50.0], True, 0.0) == [53.0]

    try:
        tf.Config("households = nope")
    except ValueError as e:
        assert "line 1" in str(e), e
    else:
        raise AssertionError("bad config accepted")


def check_experiment():
    cfg = tf.Config("households = 3\ndays = 5\nwarmup_days = 1\nprobe_days = 2\nstrategy = RBC,MARL_K")
    cfg.set("seed", 11)
    first = tf.run_experiment(cfg)
    again = tf.run_experiment(cfg)
    assert [s["cumulative_energy_kwh"] for s in first] == [s["cumulative_energy_kwh"] for s in again]
    assert [s["strategy"] for s in first] == ["RBC", "MARL_K"]
    assert len(first[0]["daily"]) == 5

    with tempfile.TemporaryDirectory() as d:
        written = tf.run_to_dir(cfg, d)
        assert {Path(p).name for p in written} == {"summary.csv", "daily.csv"}
        figs = tf.write_plot_data(d)
        assert sorted(Path(p).name for p in figs) == ["fig1a.csv", "fig1b.csv", "fig3a.csv", "fig3b.csv"]
    for s in first:
        print(f"{s['strategy']:7} energy={s['cumulative_energy_kwh']:.2f} kWh violations={s['violations']}")


if __name__ == "__main__":
    check_vessel()
    check_pieces()
    check_experiment()
    print("pytankfleet smoke test ok")
