import math

import numpy as np
import pytest

from confhedge import io
from confhedge.confhedge1 import ConfHedge1
from confhedge.confhedge2 import ConfHedge2, ForecastRound
from confhedge.core import RoundInput
from confhedge.confidence import data_path
from confhedge.exceptions import ValidationError


def _write(path, text):
    path.write_text(text, encoding="utf-8")
    return path


class TestLossStream:
    def test_example_row(self, tmp_path):
        f = _write(tmp_path / "s.csv", "t,l_e1,l_e2,p_e1,p_e2\n1,0.5,-2.0,1.0,0.3\n")
        (r,) = io.read_loss_stream(f)
        np.testing.assert_array_equal(r.losses, [0.5, -2.0])
        np.testing.assert_array_equal(r.confidences, [1.0, 0.3])

    def test_zero_mass(self, tmp_path):
        f = _write(tmp_path / "s.csv", "t,l_e1,l_e2,p_e1,p_e2\n1,0,0,1,1\n2,0.5,-2.0,0,0\n")
        with pytest.raises(ValidationError, match="zero confidence mass at t=2"):
            io.read_loss_stream(f)

    def test_missing_confidences(self, tmp_path):
        f = _write(tmp_path / "s.csv", "t,l_a,l_b,l_c\n1,1,2,3\n2,4,5,6\n")
        rounds = io.read_loss_stream(f)
        assert all(np.array_equal(r.confidences, np.ones(3)) for r in rounds)

    @pytest.mark.parametrize(
        "body, match",
        [
            ("1,0.5,x,1,1\n", ":2:.*l_e2"),
            ("1,0,0,1,1\n2,0,0,1.5,1\n", ":3:.*confidences"),
            ("1,0,nan,1,1\n", ":2:.*finite"),
        ],
    )
    def test_malformed(self, tmp_path, body, match):
        f = _write(tmp_path / "s.csv", "t,l_e1,l_e2,p_e1,p_e2\n" + body)
        with pytest.raises(ValidationError, match=match):
            io.read_loss_stream(f)

    def test_short_row(self, tmp_path):
        f = _write(tmp_path / "s.csv", "t,l_e1,l_e2\n1,0.5\n")
        with pytest.raises(ValidationError, match=":2:"):
            io.read_loss_stream(f)

    @pytest.mark.parametrize(
        "header", ["t,l_a,l_a", "t,l_a,p_b", "l_a,l_b", "t,l_a,extra"],
    )
    def test_bad_header(self, tmp_path, header):
        f = _write(tmp_path / "s.csv", header + "\n")
        with pytest.raises(ValidationError):
            io.read_loss_stream(f)

    def test_schema_mismatch(self, tmp_path):
        f = _write(tmp_path / "s.csv", "t,l_a,l_b\n1,1,2\n")
        with pytest.raises(ValidationError):
            io.read_loss_stream(f, io.StreamSchema(("a", "c")))

    @pytest.mark.parametrize("suffix", [".csv", ".jsonl"])
    def test_round_trip(self, tmp_path, suffix):
        rng = np.random.default_rng(0)
        rounds = [RoundInput(rng.normal(size=3) * 1e3, rng.uniform(0.01, 1, 3)) for _ in range(25)]
        f = tmp_path / f"s{suffix}"
        io.write_loss_stream(f, rounds, ["x", "y", "z"])
        back = io.read_loss_stream(f)
        assert io.stream_schema(f).expert_names == ("x", "y", "z")
        for a, b in zip(rounds, back):
            np.testing.assert_array_equal(a.losses, b.losses)
            np.testing.assert_array_equal(a.confidences, b.confidences)

    def test_line_endings(self, tmp_path):
        f = tmp_path / "s.csv"
        io.write_loss_stream(f, [RoundInput([1.0], [1.0])])
        assert b"\r" not in f.read_bytes()


class TestRoundRecords:
    def _records(self, T=40, N=3, seed=1):
        rng = np.random.default_rng(seed)
        return ConfHedge1().fit(rng.normal(size=(T, N)), rng.uniform(0.1, 1, (T, N))).records_

    @pytest.mark.parametrize("suffix", [".csv", ".jsonl"])
    def test_round_trip(self, tmp_path, suffix):
        records = self._records()
        f = tmp_path / f"r{suffix}"
        io.write_round_records(f, records)
        back = io.read_round_records(f)
        assert len(back) == len(records)
        assert back[0]["eta"] == math.inf
        for r, b in zip(records, back):
            assert b["t"] == r.t
            assert b["h"] == r.algorithm_loss
            assert b["delta"] == r.gap
            assert b["eta"] == r.learning_rate
            np.testing.assert_array_equal(b["w"], r.posterior)
            np.testing.assert_array_equal(b["wstar"], r.prediction)

    def test_inf_literal(self, tmp_path):
        f = tmp_path / "r.csv"
        io.write_round_records(f, self._records(T=1))
        row = f.read_text().splitlines()[1].split(",")
        assert row[io.record_columns(3).index("eta")] == "inf"

    def test_empty_run(self, tmp_path):
        f = tmp_path / "r.csv"
        io.write_round_records(f, [], n_experts=2)
        assert f.read_text() == ",".join(io.record_columns(2)) + "\n"

    def test_shape(self, tmp_path):
        f = tmp_path / "r.csv"
        io.write_round_records(f, self._records(T=1, N=2))
        header, *rows = f.read_text().splitlines()
        cols = header.split(",")
        assert len(rows) == 1
        assert cols[:2] == ["t", "h"]
        assert cols[-4:] == ["w_1", "w_2", "wstar_1", "wstar_2"]

    def test_forecasting_columns(self, tmp_path):
        rng = np.random.default_rng(2)
        model = ConfHedge2().fit(rng.normal(size=(10, 2)), rng.normal(size=10))
        f = tmp_path / "r.csv"
        io.write_round_records(f, model.records_)
        back = io.read_round_records(f)
        assert list(back[0])[:5] == ["t", "h", "a", "gamma", "outcome"]
        for r, b in zip(model.records_, back):
            assert b["gamma"] == r.forecast
            assert b["a"] == r.aggregate_loss
            np.testing.assert_array_equal(b["loss"], r.losses)

    def test_misaligned(self, tmp_path):
        with pytest.raises(ValidationError):
            io.write_round_records(tmp_path / "r.csv", self._records(T=2), weights=[np.ones(3) / 3])

    def test_io_error_has_path(self, tmp_path):
        with pytest.raises(OSError, match="missing"):
            io.write_round_records(tmp_path / "missing" / "r.csv", self._records(T=1))


class TestForecastStream:
    @pytest.mark.parametrize("suffix", [".csv", ".jsonl"])
    def test_round_trip(self, tmp_path, suffix):
        rng = np.random.default_rng(3)
        schema = io.StreamSchema(("a", "b"), io.FORECASTING, True, ("hour",))
        rounds = [
            ForecastRound(rng.normal(size=2), float(rng.normal()), rng.uniform(0.1, 1, 2), {"hour": float(h)})
            for h in range(24)
        ]
        f = tmp_path / f"f{suffix}"
        io.write_forecast_stream(f, schema, rounds)
        found, back = io.read_forecast_stream(f)
        assert found == schema
        for a, b in zip(rounds, back):
            np.testing.assert_array_equal(a.forecasts, b.forecasts)
            np.testing.assert_array_equal(a.confidences, b.confidences)
            assert a.outcome == b.outcome and a.features == b.features

    def test_needs_outcome(self, tmp_path):
        f = _write(tmp_path / "f.csv", "t,c_a\n1,2\n")
        with pytest.raises(ValidationError, match="outcome"):
            io.read_forecast_stream(f)

    def test_bundled_daily_load(self):
        schema, rounds = io.read_forecast_stream(data_path("daily_load.csv"))
        assert schema.expert_names == tuple(io.daily_load_expert_names())
        assert schema.feature_names == ("hour", "workday", "day_of_year")
        assert len(rounds) == 120 * 24
        regenerated = io.generate_daily_load(days=120, seed=7)
        np.testing.assert_array_equal(rounds[-1].forecasts, regenerated[-1].forecasts)


class TestComparators:
    def test_round_trip(self, tmp_path):
        q = np.eye(3)[[0, 0, 2, 1]]
        f = tmp_path / "q.csv"
        io.write_comparators(f, q)
        np.testing.assert_array_equal(io.read_comparators(f, 3), q)

    def test_width(self, tmp_path):
        f = tmp_path / "q.csv"
        io.write_comparators(f, np.eye(2))
        with pytest.raises(ValidationError):
            io.read_comparators(f, 3)


class TestSynthetic:
    def test_noiseless(self):
        spec = io.SyntheticSpec(3, 50, ((1, 2, 3),), noise_std=0.0)
        assert all(np.array_equal(r.losses, [1.0, 2.0, 3.0]) for r in io.generate_synthetic(spec))
        assert all(np.array_equal(r.confidences, np.ones(3)) for r in io.generate_synthetic(spec))

    def test_deterministic(self):
        spec = io.SyntheticSpec(4, 200, ((0, 1, 2, 3), (3, 2, 1, 0)), seed=11)
        np.testing.assert_array_equal(io.synthetic_losses(spec), io.synthetic_losses(spec))
        other = io.SyntheticSpec(4, 200, ((0, 1, 2, 3), (3, 2, 1, 0)), seed=12)
        assert not np.array_equal(io.synthetic_losses(spec), io.synthetic_losses(other))

    def test_segments_partition(self):
        spec = io.SyntheticSpec(2, 10, ((0, 1), (1, 0), (5, 5)))
        assert spec.segment_starts == (3, 7)
        M = spec.mean_matrix()
        np.testing.assert_array_equal(M[:, 0], [0, 0, 0, 1, 1, 1, 1, 5, 5, 5])

    @pytest.mark.parametrize(
        "kwargs",
        [
            dict(n_experts=2, horizon=10, segment_means=((0, 1, 2),)),
            dict(n_experts=2, horizon=10, segment_means=((0, 1),), noise_std=-1),
            dict(n_experts=2, horizon=10, segment_means=((0, 1), (1, 0)), segment_starts=(10,)),
            dict(n_experts=2, horizon=0, segment_means=((0, 1),)),
        ],
    )
    def test_invalid(self, kwargs):
        with pytest.raises(ValidationError):
            io.SyntheticSpec(**kwargs)

    def test_rotating_leader(self):
        spec = io.load_synthetic_spec(data_path("rotating_leader.json"))
        assert (spec.n_experts, spec.horizon, spec.noise_std) == (3, 3000, 1.0)
        # leader of the cumulative mean loss after each segment
        seg = np.diff([0, *spec.segment_starts, spec.horizon])
        cum_means = np.cumsum(np.array(spec.segment_means) * seg[:, None], axis=0)
        leaders = cum_means.argmin(axis=1)
        assert len(set(leaders.tolist())) > 1
        # the noisy stream follows the same leadership where the means are not tied
        L = np.cumsum(io.synthetic_losses(spec), axis=0)
        ends = np.array(spec.segment_starts) - 1
        np.testing.assert_array_equal(L[ends].argmin(axis=1), leaders[: len(ends)])
