import numpy as np
import pytest

from conftest import fast_config
from freqcounter.config import EXPERIMENTS
from freqcounter.experiments import leg_seed, predict_experiment, resolve_config, run_experiment, slug, tau_grid

LABELS = {
    "filter-placement": ["raw", "frequency-filtered", "stamp-filtered", "theory frequency-filtered", "theory stamp-filtered"],
    "gate-sweep": ["k=1", "k=11", "k=121", "theory"],
    "mavg-emulation": ["raw k=1", "divided k=121", "mavg 121", "mavg 121 downsampled", "theory divided k=121", "theory mavg 121"],
    "resampling": ["raw+LPF", "CIC+LPF", "event-triggered+LPF", "theory raw+LPF", "theory CIC+LPF"],
    "pll-compare": ["counter CIC+LPF", "PLL", "theory counter", "theory PLL"],
}


def test_tau_grid_is_1_2_5():
    assert tau_grid(1e-3, 1.0).tolist() == [1e-3, 2e-3, 5e-3, 1e-2, 2e-2, 5e-2, 0.1, 0.2, 0.5, 1.0]
    assert tau_grid(3e-3, 0.04).tolist() == [5e-3, 1e-2, 2e-2]
    with pytest.raises(ValueError):
        tau_grid(1.0, 0.1)


def test_leg_seed_is_stable_and_label_dependent():
    assert leg_seed(0, "gate-sweep", "source") == leg_seed(0, "gate-sweep", "source")
    assert leg_seed(0, "gate-sweep", "source") != leg_seed(1, "gate-sweep", "source")
    assert leg_seed(0, "gate-sweep", "source") != leg_seed(0, "resampling", "source")
    assert 0 <= leg_seed(5, "x") < 2**64


def test_slug():
    assert slug("event-triggered+LPF") == "event-triggered-lpf"
    assert slug("k=121") == "k-121"
    assert slug("***") == "curve"


@pytest.mark.slow
@pytest.mark.parametrize("name", EXPERIMENTS)
def test_every_experiment_produces_its_legend(name):
    results = run_experiment(name, fast_config(name, duration=2.0))
    assert [r.label for r in results] == LABELS[name]
    for r in results:
        assert r.metadata["experiment"] == name
        assert r.metadata["config"]["noise"]["oversample"] == 16
        assert set(r.metadata["versions"]) >= {"numpy", "scipy", "scikit-learn"}
        assert np.all(r.curve.sigmas > 0) and np.all(np.diff(r.curve.taus) > 0)
        if not r.label.startswith("theory"):
            assert np.all(r.curve.counts >= 2)


def test_seed_changes_the_record_and_reruns_match():
    cfg = fast_config("gate-sweep", duration=1.0)
    a = run_experiment("gate-sweep", cfg, theory=False)
    b = run_experiment("gate-sweep", cfg, theory=False)
    c = run_experiment("gate-sweep", cfg, seed=1, theory=False)
    assert a[0].curve.sigmas.tobytes() == b[0].curve.sigmas.tobytes()
    assert a[0].curve.sigmas.tobytes() != c[0].curve.sigmas.tobytes()


def test_gate_sweep_legs_share_taus():
    res = {r.label: r.curve for r in run_experiment("gate-sweep", fast_config("gate-sweep", duration=2.0))}
    np.testing.assert_allclose(res["k=1"].taus, res["k=121"].taus, rtol=1e-9)
    np.testing.assert_allclose(res["k=11"].taus, res["k=121"].taus, rtol=1e-9)


@pytest.mark.parametrize("name", EXPERIMENTS)
def test_predict_returns_theory_curves(name):
    results = predict_experiment(name, fast_config(name, duration=10.0))
    assert results and all(r.label.startswith("theory") for r in results)
    assert all(r.curve.taus[0] == pytest.approx(1e-3, rel=0.2) for r in results)


def test_resolve_config_sources(tmp_path):
    cfg = resolve_config("resampling", {"schema_version": 1, "seed": 9}, duration=2.0)
    assert cfg.seed == 9 and cfg.duration == 2.0 and cfg.experiment == "resampling"
    with pytest.raises(ValueError):
        resolve_config("resampling", fast_config("gate-sweep"))
    with pytest.raises(ValueError):
        resolve_config("fig9")
