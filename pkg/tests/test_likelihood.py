import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, stats

from splitrx.channel import ChannelParams, NoiseDraw, SplitObservation, draw_noise, transmit
from splitrx.constellation import Constellation, ConstellationPoint, Scheme, make_apsk, make_psk, make_qam
from splitrx.detect import cd_indices
from splitrx.errors import DegenerateDensity
from splitrx.likelihood import (
    QuadratureSpec,
    _log_power_bound,
    _log_power_term,
    detect_ml_3d,
    detect_pd,
    likelihood_3d,
    likelihood_3d_product,
    log_likelihood_3d,
    log_likelihood_matrix,
    ml_3d_indices,
    pd_indices,
)
from splitrx.montecarlo import estimate_ser


def raw_density(y1, y2, x, p: ChannelParams):
    """Direct 2-D integral of the channel model over the antenna noise."""
    s = p.amplitude * x
    sd = math.sqrt(p.var_antenna / 2)

    def f(wi, wr):
        u = s + complex(wr, wi)
        prior = math.exp(-(wr * wr + wi * wi) / p.var_antenna) / (math.pi * p.var_antenna)
        cz = math.exp(-abs(y1 - math.sqrt(p.rho) * u) ** 2 / p.var_conversion) / (math.pi * p.var_conversion)
        pn = stats.norm.pdf(y2, (1 - p.rho) * abs(u) ** 2, math.sqrt(p.var_rectifier))
        return prior * cz * pn

    lim = 9 * sd
    val, _ = integrate.dblquad(f, -lim, lim, -lim, lim, epsabs=0, epsrel=1e-10)
    return val


class TestAgainstDirectIntegration:
    @pytest.mark.parametrize("power, rho, y1, y2", [
        (4.0, 0.5, 1.1 + 0.9j, 2.3),
        (4.0, 0.2, -0.4 + 0.3j, 0.1),
        (9.0, 0.7, 1.5 - 1.7j, 1.0),
        (1.0, 0.5, 0.0 + 0.1j, -0.4),
    ])
    def test_matches_dblquad(self, power, rho, y1, y2):
        p = ChannelParams(power=power, rho=rho, var_antenna=1.0, var_conversion=0.8, var_rectifier=0.5)
        x = make_qam(4).values[1]
        got = likelihood_3d(SplitObservation(y1, y2), x, p)
        assert got == pytest.approx(raw_density(y1, y2, x, p), rel=1e-7)

    def test_product_rule_agrees_at_low_snr(self):
        p = ChannelParams(power=2.0, rho=0.5, var_antenna=1.0, var_conversion=1.0, var_rectifier=1.0)
        obs = SplitObservation(0.5 + 0.7j, 1.2)
        x = make_qam(4).values[1]
        assert likelihood_3d_product(obs, x, p, order=48) == pytest.approx(likelihood_3d(obs, x, p), rel=1e-8)


class TestConvergence:
    @pytest.mark.parametrize("power", [10.0, 50.0, 200.0])
    def test_order_doubling(self, power):
        cons = make_qam(16)
        p = ChannelParams(power=power, rho=0.5, var_antenna=1.0, var_conversion=1.0, var_rectifier=0.1)
        rng = np.random.default_rng(0)
        sent = rng.integers(0, 16, 200)
        obs = transmit(cons.values[sent], p, draw_noise(p, rng, 200))
        lo = log_likelihood_matrix(obs, cons, p, QuadratureSpec(32))
        hi = log_likelihood_matrix(obs, cons, p, QuadratureSpec(64))
        rel = np.abs(np.expm1(lo - hi))
        # judge the candidates that matter: within 30 nats of the best one
        relevant = hi >= hi.max(axis=1, keepdims=True) - 30
        assert rel[relevant].max() < 1e-8

    def test_power_term_normalized(self):
        # integrating over y2 must give 1 for any (m, v)
        quad = QuadratureSpec()
        for m2, v in ((0.0, 1.0), (3.0, 0.5), (150.0, 0.5), (400.0, 0.05)):
            def f(y2):
                return math.exp(_log_power_term(np.array([y2]), m2, v, 0.4, 0.1, quad)[0])
            mean = 0.4 * (m2 + v)
            sd = 0.4 * math.sqrt(v * (v + 2 * m2)) + 1
            total, _ = integrate.quad(f, -5, mean + 12 * sd, points=[mean], limit=400)
            assert total == pytest.approx(1.0, abs=1e-7)

    def test_three_dimensional_normalization(self):
        p = ChannelParams(power=2.0, rho=0.5, var_antenna=1.0, var_conversion=1.0, var_rectifier=0.3)
        cons = Constellation(Scheme.QAM, (ConstellationPoint(0, (1 + 1j) / math.sqrt(2)),))
        g = np.linspace(-6, 7, 90)
        h = np.linspace(-3, 14, 120)
        re, im, y2 = np.meshgrid(g, g, h, indexing="ij")
        obs = SplitObservation((re + 1j * im).ravel(), y2.ravel())
        dens = np.exp(log_likelihood_matrix(obs, cons, p)[:, 0])
        cell = (g[1] - g[0]) ** 2 * (h[1] - h[0])
        assert dens.sum() * cell == pytest.approx(1.0, abs=2e-3)


class TestMonteCarloOracle:
    def test_kernel_density(self):
        # Gaussian-kernel average of the channel output is an unbiased estimate of
        # the density smoothed by the same kernel; smooth the quadrature value too.
        p = ChannelParams(power=4.0, rho=0.5, var_antenna=1.0, var_conversion=1.0, var_rectifier=0.5)
        x = make_qam(4).values[1]
        y0 = np.array([1.0, 0.9, 2.0])
        h = np.array([0.35, 0.35, 0.35])
        rng = np.random.default_rng(2024)
        n, chunk = 10_000_000, 1_000_000
        total = total_sq = 0.0
        norm = 1 / np.prod(np.sqrt(2 * np.pi) * h)
        for _ in range(n // chunk):
            obs = transmit(np.full(chunk, x), p, draw_noise(p, rng, chunk))
            z = (np.stack([obs.coherent.real, obs.coherent.imag, obs.power]) - y0[:, None]) / h[:, None]
            k = norm * np.exp(-0.5 * (z * z).sum(axis=0))
            total += k.sum()
            total_sq += (k * k).sum()
        est = total / n
        se = math.sqrt((total_sq / n - est**2) / n)

        nodes, weights = np.polynomial.hermite.hermgauss(12)
        a, b, c = np.meshgrid(nodes, nodes, nodes, indexing="ij")
        w = (weights[:, None, None] * weights[None, :, None] * weights[None, None, :]).ravel() / np.pi**1.5
        pts = y0[:, None] + math.sqrt(2) * h[:, None] * np.stack([a.ravel(), b.ravel(), c.ravel()])
        obs = SplitObservation(pts[0] + 1j * pts[1], pts[2])
        cons = Constellation(Scheme.QAM, (ConstellationPoint(0, x),))
        smoothed = float(w @ np.exp(log_likelihood_matrix(obs, cons, p)[:, 0]))
        assert abs(est - smoothed) < 3 * se


class TestLimits:
    def test_antenna_noise_vanishing_factorizes(self):
        p = ChannelParams(power=9.0, rho=0.4, var_antenna=1e-12, var_conversion=0.5, var_rectifier=0.2)
        x = 0.6 + 0.8j
        y1, y2 = 1.0 + 1.5j, 4.9
        s = p.amplitude * x
        cz = math.exp(-abs(y1 - math.sqrt(p.rho) * s) ** 2 / p.var_conversion) / (math.pi * p.var_conversion)
        pn = stats.norm.pdf(y2, (1 - p.rho) * abs(s) ** 2, math.sqrt(p.var_rectifier))
        assert likelihood_3d(SplitObservation(y1, y2), x, p) == pytest.approx(cz * pn, rel=1e-6)

    @pytest.mark.parametrize("field", ["var_conversion", "var_rectifier"])
    def test_point_mass_rejected(self, field):
        p = ChannelParams(power=1.0, **{field: 0.0})
        with pytest.raises(DegenerateDensity):
            likelihood_3d(SplitObservation(1j, 1.0), 1 + 0j, p)
        with pytest.raises(DegenerateDensity):
            detect_ml_3d(SplitObservation(1j, 1.0), make_qam(4), p)

    def test_quadrature_order_floor(self):
        with pytest.raises(ValueError):
            QuadratureSpec(8)

    def test_log_matches_linear(self):
        p = ChannelParams(power=5.0)
        obs = SplitObservation(1 + 1j, 2.0)
        assert math.exp(log_likelihood_3d(obs, 1j, p)) == pytest.approx(likelihood_3d(obs, 1j, p))


class TestMlDetector:
    def test_noiseless_limit(self):
        cons = make_apsk([6, 8, 8, 10])
        p = ChannelParams(power=50.0, rho=0.5, var_antenna=1e-6, var_conversion=1e-6, var_rectifier=1e-6)
        for k, x in enumerate(cons.values):
            assert detect_ml_3d(transmit(x, p, NoiseDraw.zeros()), cons, p).symbol_index == k

    def test_rho_one_is_cd(self):
        cons = make_qam(16)
        p = ChannelParams(power=20.0, rho=1.0, var_antenna=1.0, var_conversion=1.0, var_rectifier=0.1)
        rng = np.random.default_rng(4)
        sent = rng.integers(0, 16, 2000)
        obs = transmit(cons.values[sent], p, draw_noise(p, rng, 2000))
        np.testing.assert_array_equal(ml_3d_indices(obs, cons, p), cd_indices(obs, cons, p))

    @pytest.mark.parametrize("power, rho", [(3.0, 0.5), (50.0, 0.1), (200.0, 0.5), (200.0, 0.95)])
    def test_pruning_is_exact(self, power, rho):
        cons = make_qam(64)
        p = ChannelParams(power=power, rho=rho, var_antenna=1.0, var_conversion=1.0, var_rectifier=0.1)
        rng = np.random.default_rng(5)
        sent = rng.integers(0, 64, 3000)
        obs = transmit(cons.values[sent], p, draw_noise(p, rng, 3000))
        full = np.argmax(log_likelihood_matrix(obs, cons, p), axis=1)
        np.testing.assert_array_equal(ml_3d_indices(obs, cons, p), full)

    def test_single_matches_batch(self):
        cons = make_qam(16)
        p = ChannelParams(power=40.0, rho=0.3)
        rng = np.random.default_rng(6)
        obs = transmit(cons.values[rng.integers(0, 16, 50)], p, draw_noise(p, rng, 50))
        batch = ml_3d_indices(obs, cons, p)
        for i in range(50):
            assert detect_ml_3d(obs[i], cons, p).symbol_index == batch[i]

    def test_ml_not_worse_than_low_complexity(self):
        cons = make_qam(4)
        p = ChannelParams(power=20.0, rho=0.5, var_antenna=1.0, var_conversion=1.0, var_rectifier=0.1)
        ml = estimate_ser(cons, p, "ml_3d", 100_000, 8)
        lc = estimate_ser(cons, p, "low_complexity", 100_000, 8)
        assert ml.ser <= lc.ser + 2 * math.hypot(ml.std_error, lc.std_error)


class TestPowerDetector:
    def test_constant_modulus_always_index_zero(self):
        cons = make_psk(4)
        p = ChannelParams(power=30.0, rho=0.0)
        rng = np.random.default_rng(7)
        sent = rng.integers(0, 4, 20_000)
        obs = transmit(cons.values[sent], p, draw_noise(p, rng, 20_000))
        idx = pd_indices(obs, cons, p)
        assert np.all(idx == 0)
        assert np.mean(idx != sent) == pytest.approx(0.75, abs=0.01)

    def test_distinct_magnitudes(self):
        cons = Constellation(Scheme.APSK, (ConstellationPoint(0, 0.5 + 0j), ConstellationPoint(1, 1.5 + 0j)))
        p = ChannelParams(power=1e4, rho=0.0, var_antenna=1e-3, var_conversion=1e-3, var_rectifier=1e-3)
        rng = np.random.default_rng(8)
        sent = rng.integers(0, 2, 1000)
        obs = transmit(cons.values[sent], p, draw_noise(p, rng, 1000))
        np.testing.assert_array_equal(pd_indices(obs, cons, p), sent)
        assert detect_pd(obs[0], cons, p).symbol_index == sent[0]

    def test_without_rectifier_noise(self):
        # the noncentral chi-square density is used directly
        cons = make_apsk([6, 8, 8, 10])
        p = ChannelParams(power=300.0, rho=0.0, var_antenna=1.0, var_rectifier=0.0)
        rng = np.random.default_rng(9)
        sent = rng.integers(0, 32, 5000)
        obs = transmit(cons.values[sent], p, draw_noise(p, rng, 5000))
        idx = pd_indices(obs, cons, p)
        cls, _ = cons.magnitude_classes
        assert np.mean(cls[idx] == cls[sent]) > 0.95

    def test_worse_than_splitting_on_apsk(self):
        cons = make_apsk([6, 8, 8, 10])
        p = ChannelParams(power=300.0, rho=0.5, var_antenna=1.0, var_conversion=1.0, var_rectifier=1.0)
        pd = estimate_ser(cons, p.replace(rho=0.0), "pd", 20_000, 10)
        split = estimate_ser(cons, p, "ml_3d", 20_000, 10)
        assert pd.ci_low > split.ci_high


class TestProperties:
    @given(y2=st.floats(-50, 2000), m2=st.floats(0, 1500), v=st.floats(1e-3, 5),
           a=st.floats(0.01, 1), var_r=st.floats(1e-3, 5))
    @settings(max_examples=300, deadline=None)
    def test_bound_dominates_value(self, y2, m2, v, a, var_r):
        val = _log_power_term(np.array([y2]), m2, v, a, var_r, QuadratureSpec())[0]
        bound = _log_power_bound(np.array([y2]), m2, v, a, var_r)[0]
        assert val <= bound + 1e-6

    @given(seed=st.integers(0, 10_000), rho=st.floats(0.01, 0.99), power=st.floats(0.5, 500))
    @settings(max_examples=40, deadline=None)
    def test_finite_log_likelihood(self, seed, rho, power):
        cons = make_qam(16)
        p = ChannelParams(power=power, rho=rho)
        rng = np.random.default_rng(seed)
        obs = transmit(cons.values[rng.integers(0, 16, 20)], p, draw_noise(p, rng, 20))
        assert np.all(np.isfinite(log_likelihood_matrix(obs, cons, p)))
