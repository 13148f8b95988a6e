import math
import warnings

import numpy as np
import pytest

from tempus_fri.exceptions import (
    ConfigurationError,
    DegenerateSamplingError,
    EmptyTriggerError,
    InsufficientTriggerError,
    PreconditionError,
)
from tempus_fri.signal_model import (
    Dirac,
    FourierVector,
    FriSignal,
    SamplingKernel,
    eval_trig,
    integral_trig,
    sup_norm,
)
from tempus_fri.tem import (
    CtemConfig,
    IftemConfig,
    Machine,
    ReferenceAmplitudeWarning,
    TriggerSet,
    add_jitter,
    check_ctem_sufficiency,
    check_iftem_sufficiency,
    ctem_encode,
    encode,
    iftem_encode,
    multichannel_encode,
    t_transform,
)


def const(c, M=2):
    v = np.zeros(2 * M + 1, complex)
    v[M] = c
    return FourierVector(v, 1.0)


def test_ctem_zero_signal():
    tr, meas = ctem_encode(const(0.0), CtemConfig(1.0, 2.0, 0.0))
    np.testing.assert_allclose(tr.times, [0.125, 0.375, 0.625, 0.875], atol=1e-14)
    np.testing.assert_allclose(meas.values, 0.0, atol=1e-13)


def test_ctem_constant_signal():
    tr, _ = ctem_encode(const(0.5), CtemConfig(1.0, 1.0, 0.0))
    np.testing.assert_allclose(tr.times, [1 / 6, 5 / 6], atol=1e-14)


def test_ctem_x1_single_channel(y1):
    cfg = CtemConfig(0.9, 11.0, 1.3)
    tr, meas = ctem_encode(y1, cfg)
    assert len(tr) >= 11
    assert tr.density(wrap=True) < 1 / 11
    np.testing.assert_allclose(eval_trig(y1, tr.times), cfg.reference(tr.times), atol=1e-12 * 0.9)
    np.testing.assert_array_equal(meas.values, cfg.reference(tr.times))


def test_ctem_warns_on_small_reference(y1):
    with pytest.warns(ReferenceAmplitudeWarning):
        ctem_encode(y1, CtemConfig(0.1, 11.0))


def test_ctem_no_crossings():
    with pytest.raises(EmptyTriggerError):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            ctem_encode(const(2.0), CtemConfig(1.0, 1.0))


def test_iftem_zero_signal():
    cfg = IftemConfig(1.0, 1.0, 0.1)
    tr, meas = iftem_encode(const(0.0), cfg)
    np.testing.assert_allclose(tr.times, np.arange(1, 10) / 10, atol=1e-14)
    np.testing.assert_allclose(meas.values, 0.0, atol=1e-14)
    assert len(meas) == len(tr) - 1


def test_iftem_constant_signal():
    tr, meas = iftem_encode(const(0.5), IftemConfig(1.5, 1.0, 0.1))
    np.testing.assert_allclose(tr.gaps, 0.05, atol=1e-14)
    np.testing.assert_allclose(meas.values, 0.025, atol=1e-14)


def test_iftem_threshold_identity(y2):
    cfg = IftemConfig(1.3, 1.0, 0.09)
    tr, _ = iftem_encode(y2, cfg)
    t = tr.times
    integ = cfg.bias * np.diff(t) + integral_trig(y2, t[:-1], t[1:])
    np.testing.assert_allclose(integ / cfg.kappa, cfg.threshold, atol=1e-12 * cfg.threshold)
    first = cfg.bias * t[0] + integral_trig(y2, 0.0, t[0])
    assert first == pytest.approx(cfg.kappa * cfg.threshold, abs=1e-12)


def test_iftem_integrator_init_shifts_first_trigger(y2):
    a, _ = iftem_encode(y2, IftemConfig(1.3, 1.0, 0.09, 0.0))
    b, _ = iftem_encode(y2, IftemConfig(1.3, 1.0, 0.09, 0.05))
    assert b.times[0] < a.times[0]
    first = 1.3 * b.times[0] + integral_trig(y2, 0.0, b.times[0])
    assert first == pytest.approx(0.09 - 0.05, abs=1e-12)


def test_iftem_x2_gap_bounds(y2):
    cfg = IftemConfig(1.3, 1.0, 0.09)
    tr, _ = iftem_encode(y2, cfg)
    ymax = sup_norm(y2)
    kg = cfg.kappa * cfg.threshold
    assert np.all(tr.gaps >= kg / (cfg.bias + ymax))
    assert np.all(tr.gaps <= kg / (cfg.bias - ymax))


def test_iftem_preconditions(y1):
    with pytest.raises(PreconditionError):
        iftem_encode(y1, IftemConfig(0.1, 1.0, 0.09))
    with pytest.raises(InsufficientTriggerError):
        iftem_encode(const(0.0), IftemConfig(1.0, 1.0, 0.6))


def test_t_transform_examples():
    cfg = IftemConfig(1.5, 1.0, 0.09)
    tr = TriggerSet([0.1, 0.15], 1.0, Machine.INTEGRATE_FIRE)
    assert t_transform(tr, cfg).values[0] == pytest.approx(0.015)
    tr = TriggerSet([0.1, 0.1 + 0.09 / 1.5], 1.0, Machine.INTEGRATE_FIRE)
    assert t_transform(tr, cfg).values[0] == pytest.approx(0.0, abs=1e-15)
    with pytest.raises(ValueError):
        t_transform(TriggerSet([0.1], 1.0, Machine.INTEGRATE_FIRE), cfg)


def test_t_transform_reproduces_encoder(y1):
    cfg = IftemConfig(1.5, 1.0, 0.09)
    tr, meas = iftem_encode(y1, cfg)
    direct = integral_trig(y1, tr.times[:-1], tr.times[1:])
    np.testing.assert_allclose(t_transform(tr, cfg).values, meas.values, atol=1e-12)
    np.testing.assert_allclose(meas.values, direct, atol=1e-12)


def test_trigger_set_validation():
    with pytest.raises(ValueError):
        TriggerSet([0.2, 0.1], 1.0, Machine.CROSSING)
    with pytest.raises(ValueError):
        TriggerSet([0.2, 1.0], 1.0, Machine.CROSSING)


def test_config_validation():
    with pytest.raises(ConfigurationError):
        CtemConfig(0.0, 1.0)
    with pytest.raises(ConfigurationError):
        IftemConfig(1.0, 1.0, 0.1, 0.1)
    assert CtemConfig(1.0, 1.0, 2 * math.pi + 0.5).phase == pytest.approx(0.5)


def test_jitter_zero_is_identity(y1):
    tr, _ = encode(y1, CtemConfig(0.9, 11.0))
    assert add_jitter(tr, 0.0, 1) is tr


def test_jitter_variance_and_mean():
    tr = TriggerSet([0.5], 1.0, Machine.CROSSING)
    sigma, n = 1e-3, 100_000
    nu = np.array([add_jitter(tr, sigma, [3, i]).times[0] for i in range(n)]) - 0.5
    assert np.var(nu) == pytest.approx(sigma**2 / 12, rel=0.05)
    assert abs(nu.mean()) < 3 * sigma / math.sqrt(12 * n)


def test_jitter_reflects_and_sorts():
    tr = TriggerSet([0.0001, 0.0002, 0.9999], 1.0, Machine.CROSSING)
    j = add_jitter(tr, 0.01, 5)
    assert np.all(j.times >= 0) and np.all(j.times < 1)
    assert np.all(np.diff(j.times) > 0)


def test_jitter_is_seeded(y1):
    tr, _ = encode(y1, CtemConfig(0.9, 11.0))
    assert add_jitter(tr, 1e-3, 7) == add_jitter(tr, 1e-3, 7)
    assert add_jitter(tr, 1e-3, 7) != add_jitter(tr, 1e-3, 8)


def test_ctem_sufficiency_examples(x1, x2):
    k5, k3 = SamplingKernel(5, 1.0), SamplingKernel(3, 1.0)
    r = check_ctem_sufficiency(x1, k5, CtemConfig(0.9, 11.0))
    assert r.min_frequency == 11 and r.passed
    r = check_ctem_sufficiency(x2, k3, CtemConfig(0.3, 7.0))
    assert r.min_frequency == 7 and r.passed
    r = check_ctem_sufficiency(x1, k5, CtemConfig(0.1, 11.0))
    assert not r.amplitude_ok and not r.passed
    r = check_ctem_sufficiency(x1, k5, CtemConfig(0.9, 5.5, 1.0), channels=2)
    assert r.min_frequency == 5.5 and r.frequency_ok


def test_iftem_sufficiency_examples():
    # M = 0 keeps only the DC term, so y == 0.3 exactly
    k = SamplingKernel(0, 1.0)
    x = FriSignal(1.0, Dirac(), [0.3], [0.0])
    r = check_iftem_sufficiency(x, k, IftemConfig(1.3, 1.0, 0.09), L=8)
    assert r.spacing_bound == pytest.approx(0.09) and r.spacing_limit == 0.125 and r.spacing_ok
    r = check_iftem_sufficiency(x, k, IftemConfig(1.3, 1.0, 0.09), L=12)
    assert not r.spacing_ok
    zero = FriSignal(1.0, Dirac(), [0.0], [0.0])
    r = check_iftem_sufficiency(zero, k, IftemConfig(2.0, 1.0, 0.1), L=10)
    assert r.sup_norm == 0 and r.spacing_bound == pytest.approx(0.05)
    with pytest.raises(PreconditionError):
        check_iftem_sufficiency(x, k, IftemConfig(0.2, 1.0, 0.09), L=8)


def test_multichannel_ctem_two_channels(y1):
    chans = [CtemConfig(0.9, 5.5, 0.3), CtemConfig(0.9, 5.5, 2.1)]
    out = multichannel_encode(y1, chans)
    assert sum(len(tr) for tr, _ in out) >= 11


def test_multichannel_single_channel_matches(y1):
    cfg = IftemConfig(1.5, 1.0, 0.09)
    (tr, meas), = multichannel_encode(y1, [("iftem", cfg)])
    tr2, meas2 = iftem_encode(y1, cfg)
    assert tr == tr2 and meas == meas2


def test_multichannel_iftem_two_channels_disjoint(y1):
    chans = [IftemConfig(1.5, 1.0, 0.18, 0.0), IftemConfig(1.5, 0.82, 0.22, 0.07)]
    (a, _), (b, _) = multichannel_encode(y1, chans)
    assert np.abs(np.subtract.outer(a.times, b.times)).min() > 1e-12


def test_multichannel_rejects_identical_and_coincident(y1):
    cfg = CtemConfig(0.9, 5.5, 0.3)
    with pytest.raises(ConfigurationError):
        multichannel_encode(y1, [cfg, cfg])
    # same crossing set from a phase differing only by a full turn is caught by the config check;
    # a zero signal with references 180 degrees apart shares every zero crossing
    with pytest.raises(DegenerateSamplingError):
        multichannel_encode(const(0.0), [CtemConfig(1.0, 2.0, 0.0), CtemConfig(1.0, 2.0, math.pi)])
