"""Smoke test for the sqmem_py extension.

    maturin build --release -m crates/python/Cargo.toml
    pip install target/wheels/sqmem_py-*.whl
    python python/smoke_test.py
"""

import json
import math

import sqmem_py as sq


def db(v):
    return 10 * math.log10(v / sq.VACUUM_VARIANCE)


def main():
    assert "fig5" in sq.PRESETS

    # vacuum and a squeezed mode
    vac = sq.CovarianceState.vacuum(1)
    assert abs(vac.quadrature_variance(0, 0.3) - 0.25) < 1e-15
    r = 1.78 * math.log(10) / 20
    sqz = vac.squeeze(0, r, 0.0)
    levels = [db(sqz.quadrature_variance(0, t)) for t in (0.0, math.pi / 2)]
    assert abs(min(levels) + 1.78) < 1e-9, levels
    assert abs(sqz.purity() - 1) < 1e-9

    # two-mode squeezed sidebands separate into squeezed ± modes
    tms = sq.two_mode_squeezed_vacuum(2e6, r, 0.0)
    pm = sq.to_pm_basis(tms, 2e6)
    cov = pm.cov
    assert max(abs(cov[i][j]) for i in (0, 1) for j in (2, 3)) < 1e-12
    power = sq.two_mode_quadrature_power(tms, 2e6, 0.0)
    split = 0.5 * pm.quadrature_variance(0, 0.0) + 0.5 * pm.quadrature_variance(1, math.pi / 2)
    assert abs(power - split) < 1e-12

    # sub-vacuum moments are flagged, lossy output stays physical
    bad = sq.CovarianceState.from_moments([[0.1, 0.0], [0.0, 0.1]])
    assert not bad.is_physical() and bad.physicality_margin() < 0
    assert tms.loss(0, 0.3).is_physical()
    try:
        vac.loss(0, 1.5)
    except ValueError:
        pass
    else:
        raise AssertionError("loss above unity accepted")

    # EIT: a dark state transmits, a two-level medium absorbs
    assert abs(abs(sq.eit_transmission(0.0, 8.0, 3e6, 0.0)) - 1) < 1e-12
    assert abs(sq.eit_transmission(0.0, 8.0, 0.0, 0.0)) < 0.02

    # config round trip and analytic channel summary
    text = sq.preset_config("fig4", 7)
    assert sq.validate_config(text) == []
    bad = text.replace("seed = 7", "")
    assert any(d["path"] == "seed" for d in sq.validate_config(bad))
    out = sq.channel_summary(text)
    s = out["summary"]
    assert abs(s["plus_transmission"] - 0.75) < 0.03, s
    assert abs(s["minus_db"]) < 0.05, s
    assert s["recovery_fraction"] <= 0.5, s
    g0 = sq.calibrate_gamma0(8.0, 3e6, 0.75)
    assert abs(g0 - out["calibration"]["decoherence_hz"]) < 1e-6 * g0

    # synthesis and spectral analysis
    small = text.replace("n_samples = 1048576", "n_samples = 65536")
    records = sq.synthesize(small, math.pi / 2, 2)
    assert len(records) == 2 and records[0][1] is not None
    freqs, psd, n_avg = sq.power_spectrum([x for x, _ in records], 50e6, 2048)
    assert n_avg == 2 * 63 and len(freqs) == 1025
    base = sq.demodulate(records[0][0], records[0][1], 50e6, 2e6)
    assert len(base) == 65536

    white = sq.shot_noise_trace(1.0, 1e6, 1 << 14, 3)
    var = sum(x * x for x in white) / len(white)
    assert abs(var / 0.5e6 - 1) < 0.05, var

    # pulse measurement on a small ensemble
    pulses = sq.preset_config("fig5", 1).replace("pulse_traces = 100000", "pulse_traces = 4000")
    rep = sq.measure_pulses(pulses)
    plus = {row["theta"]: row["db"] for row in rep["rows"] if row["mode"] == "plus"}
    assert abs(plus[math.pi / 2] + 0.44) < 0.25 and abs(plus[0.0] - 1.80) < 0.25, plus

    bundle = sq.run_experiment(text.replace("enabled = true", "enabled = false"))
    manifest = json.loads(bundle["files"]["manifest.json"])
    assert manifest["experiment"] == "fig4"

    print("sqmem_py", sq.__version__, "smoke test OK")


if __name__ == "__main__":
    main()
