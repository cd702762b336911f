import math

import numpy as np
import pytest

from tfmm_interp.core import TFMMError
from tfmm_interp.prices import (
    Lcg64,
    MalformedCSV,
    PriceSeries,
    constant_series,
    read_price_csv,
    synthetic_series,
    write_price_csv,
)


def _reference_normals(seed, count):
    # straight transcription of the documented generator
    s = seed
    out = []
    while len(out) < count:
        s = (6364136223846793005 * s + 1442695040888963407) % 2**64
        u1 = ((s >> 11) + 0.5) / 2**53
        s = (6364136223846793005 * s + 1442695040888963407) % 2**64
        u2 = ((s >> 11) + 0.5) / 2**53
        r = math.sqrt(-2 * math.log(u1))
        out += [r * math.cos(2 * math.pi * u2), r * math.sin(2 * math.pi * u2)]
    return out[:count]


class TestGenerator:
    def test_first_state(self):
        assert Lcg64(0).next_u64() == 1442695040888963407

    def test_uniform_open_interval(self):
        g = Lcg64(123)
        u = [g.uniform() for _ in range(10000)]
        assert 0 < min(u) and max(u) < 1
        assert abs(np.mean(u) - 0.5) < 0.01

    def test_normals_match_reference(self):
        assert Lcg64(42).normals(11).tolist() == _reference_normals(42, 11)

    def test_synthetic_path_matches_reference(self):
        s = synthetic_series(5, 3, seed=7, drift=0.001, volatility=0.02)
        z = _reference_normals(7, 8)
        logp = np.zeros(3)
        k = 0
        for t in range(1, 5):
            for i in (1, 2):
                logp[i] += (0.001 - 0.5 * 0.02**2) + 0.02 * z[k]
                k += 1
            np.testing.assert_allclose(s.prices[t], np.exp(logp), rtol=1e-15)

    def test_deterministic(self):
        a = synthetic_series(100, 4, seed=3)
        b = synthetic_series(100, 4, seed=3)
        c = synthetic_series(100, 4, seed=4)
        assert np.array_equal(a.prices, b.prices)
        assert not np.array_equal(a.prices, c.prices)

    def test_numeraire_and_initial(self):
        s = synthetic_series(10, 3, seed=1, initial_prices=[2.0, 4.0, 1.0], numeraire_index=0)
        assert np.all(s.prices[:, 0] == 1.0)
        np.testing.assert_allclose(s.prices[0], [1.0, 2.0, 0.5])

    def test_zero_vol_is_constant(self):
        s = synthetic_series(20, 3, seed=5, volatility=0.0)
        assert np.all(s.prices == 1.0)

    @pytest.mark.parametrize("kw", [{"num_blocks": 0}, {"num_tokens": 1}, {"volatility": -0.1},
                                     {"initial_prices": [1.0, -1.0, 1.0]}])
    def test_rejects(self, kw):
        args = {"num_blocks": 10, "num_tokens": 3, **kw}
        with pytest.raises(TFMMError):
            synthetic_series(**args)


class TestSeries:
    def test_validation(self):
        with pytest.raises(TFMMError):
            PriceSeries([0, 0], [[1.0, 2.0], [1.0, 2.0]])
        with pytest.raises(TFMMError):
            PriceSeries([0, 1], [[1.0, 2.0], [1.0, -2.0]])
        with pytest.raises(TFMMError):
            PriceSeries([0, 1], [[2.0, 2.0], [1.0, 2.0]])

    def test_window_and_at(self):
        s = constant_series(10, [2.0, 4.0])
        assert len(s.window(2, 5)) == 3
        assert s.at(3).prices.tolist() == [1.0, 2.0]


class TestCSV:
    def test_round_trip(self, tmp_path):
        s = synthetic_series(50, 3, seed=9)
        path = tmp_path / "p.csv"
        write_price_csv(s, path)
        back = read_price_csv(path)
        assert np.array_equal(back.prices, s.prices)
        assert np.array_equal(back.timestamps, s.timestamps)

    def test_named_numeraire_column(self, tmp_path):
        path = tmp_path / "p.csv"
        path.write_text("timestamp,ETH,USDC\n1,2000,1\n2,2200,1.1\n")
        s = read_price_csv(path, numeraire="USDC")
        assert s.numeraire_index == 1
        np.testing.assert_allclose(s.prices, [[2000.0, 1.0], [2000.0, 1.0]])

    def test_absent_numeraire_prepended(self, tmp_path):
        path = tmp_path / "p.csv"
        path.write_text("timestamp,ETH,BTC\n1,2000,30000\n")
        s = read_price_csv(path, numeraire="USD")
        assert s.symbols == ("USD", "ETH", "BTC")
        assert s.prices.tolist() == [[1.0, 2000.0, 30000.0]]

    @pytest.mark.parametrize(
        "text, line",
        [
            ("", 1),
            ("time,A,B\n1,1,2\n", 1),
            ("timestamp,A,B\n1,1,2\n2,1\n", 3),
            ("timestamp,A,B\n1,1,2\n2,1,x\n", 3),
            ("timestamp,A,B\n1,1,2\n2,1,-3\n", 3),
            ("timestamp,A,B\n5,1,2\n4,1,2\n", 3),
            ("timestamp,A,B\n1,1,2\n2,1,nan\n", 3),
            ("timestamp,A,B\n", 2),
        ],
    )
    def test_malformed_reports_line(self, tmp_path, text, line):
        path = tmp_path / "bad.csv"
        path.write_text(text)
        with pytest.raises(MalformedCSV) as exc:
            read_price_csv(path)
        assert exc.value.line == line
        assert f"line {line}" in str(exc.value)
