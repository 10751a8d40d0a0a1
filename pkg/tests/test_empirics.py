import math

import pytest

from lobplace import IntensityKind, IntensityModel, ModelParams, ReplenishKind, ReplenishmentModel
from lobplace.empirics import (
    DataError,
    ProfileConfig,
    QuoteRecord,
    TradeRecord,
    imbalance_series,
    neutralized_imbalance,
    predictive_power,
    price_profile,
    read_quotes_csv,
    read_trades_csv,
    simulate_market,
    write_quotes_csv,
    write_trades_csv,
)

SEC = 1_000_000_000

IMB_PARAMS = ModelParams(
    IntensityModel(IntensityKind.IMB, 0.06, 0.5, 0.075, 0.25),
    ReplenishmentModel(ReplenishKind.LINEAR, 6, 2, 3.0, 0.5),
    alpha=4.0,
    horizon_f=20,
    q_max=64,
)


def quote(ts, bid_qty, ask_qty, bid=9.5, ask=10.5):
    return QuoteRecord(ts, bid_qty, ask_qty, bid, ask)


class TestImbalanceSeries:
    def test_symmetric_and_skewed(self):
        series, skipped = imbalance_series(
            [quote(0, 2, 2), quote(SEC, 3, 1), quote(2 * SEC, 0, 0)]
        )
        assert skipped == 1
        assert series == [(0, 0.0), (SEC, 0.5)]

    def test_record_validation(self):
        with pytest.raises(DataError):
            QuoteRecord(0, 1, 1, 10.5, 9.5)
        with pytest.raises(DataError):
            QuoteRecord(0, -1, 1, 9.5, 10.5)


class TestPredictivePower:
    def test_minimal_input_populates_one_bin(self):
        quotes = [quote(0, 3, 1, 9.5, 10.5), quote(2 * SEC, 3, 1, 10.5, 11.5)]
        trades = [
            TradeRecord(SEC, 9.5, 1, "a", 1),
            TradeRecord(3 * SEC, 10.5, 1, "a", 1),
        ]
        config = ProfileConfig(future_trades=1)
        bins = predictive_power(trades, quotes, config)
        populated = [b for b in bins if b.count > 0]
        assert len(populated) == 1
        b = populated[0]
        assert b.count == 1
        assert b.mean_imbalance == pytest.approx(0.5)
        assert b.mean_move_ticks == pytest.approx(1.0)  # mid went 10 -> 11
        assert b.mean_signed_move_ticks == pytest.approx(1.0)

    def test_independent_future_moves_average_to_zero(self):
        import numpy as np

        rng = np.random.default_rng(3)
        n = 6000
        quotes = []
        trades = []
        mid = 100.0
        for i in range(n):
            ts = i * SEC
            move = rng.choice((-0.5, 0.5))  # independent of the imbalance shown
            bid_qty = int(rng.integers(1, 10))
            ask_qty = int(rng.integers(1, 10))
            quotes.append(quote(ts, bid_qty, ask_qty, mid - 0.5, mid + 0.5))
            trades.append(TradeRecord(ts + SEC // 2, mid - 0.5, 1, "a", 1))
            mid += move
        bins = predictive_power(trades, quotes, ProfileConfig(future_trades=10))
        for b in bins:
            if b.count >= 50:
                se = 0.5 * math.sqrt(10) / math.sqrt(b.count)
                assert abs(b.mean_move_ticks) <= 5 * se

    def test_model_generated_data_shows_positive_relation(self):
        quotes, trades = simulate_market(IMB_PARAMS, 20_000, seed=11)
        bins = [b for b in predictive_power(trades, quotes, ProfileConfig(future_trades=50)) if b.count >= 30]
        assert len(bins) >= 4
        lo = min(bins, key=lambda b: b.mean_imbalance)
        hi = max(bins, key=lambda b: b.mean_imbalance)
        assert hi.mean_move_ticks > lo.mean_move_ticks

    def test_config_validation(self):
        with pytest.raises(DataError):
            ProfileConfig(future_trades=0)
        with pytest.raises(DataError):
            ProfileConfig(bin_edges=(-0.5, 0.0, 1.0))
        with pytest.raises(DataError):
            ProfileConfig(offsets_ns=(SEC, 0))


class TestNeutralizedImbalance:
    def test_symmetric_books_give_zero(self):
        quotes = [quote(i * SEC, 4, 4) for i in range(5)]
        trades = [
            TradeRecord(SEC + 1, 9.5, 1, "mm", 1),
            TradeRecord(2 * SEC + 1, 10.5, 1, "mm", -1),
        ]
        stats = neutralized_imbalance(trades, quotes, "mm")
        assert stats.neutralized == 0.0
        assert stats.plain_avg == 0.0

    def test_constructed_ratio_recovered(self):
        # buy fills see bid 1 / ask 3 (rho = -0.5); sell fills see ask 1 / bid 3
        quotes = [
            quote(0, 1, 3),
            quote(2 * SEC, 3, 1),
        ]
        trades = [
            TradeRecord(SEC, 9.5, 1, "mm", 1),
            TradeRecord(3 * SEC, 10.5, 1, "mm", -1),
        ]
        stats = neutralized_imbalance(trades, quotes, "mm")
        assert stats.buy_avg == pytest.approx(-0.5)
        assert stats.sell_avg == pytest.approx(-0.5)
        assert stats.neutralized == pytest.approx(-0.5)
        assert stats.neutralized_sum == pytest.approx(-1.0)
        assert stats.plain_avg_literal == pytest.approx((1 - 3) / (2 * 3))

    def test_mirror_symmetry(self):
        # swapping book sides and flipping trade signs leaves rho per fill
        # unchanged, so the neutralized average is invariant
        quotes = [quote(0, 2, 6), quote(2 * SEC, 5, 1)]
        trades = [TradeRecord(SEC, 9.5, 1, "mm", 1), TradeRecord(3 * SEC, 10.5, 1, "mm", -1)]
        mirrored_quotes = [quote(q.timestamp, q.best_ask_qty, q.best_bid_qty) for q in quotes]
        mirrored_trades = [
            TradeRecord(t.timestamp, t.price, t.size, t.passive_agent_id, -t.sign) for t in trades
        ]
        a = neutralized_imbalance(trades, quotes, "mm")
        b = neutralized_imbalance(mirrored_trades, mirrored_quotes, "mm")
        assert b.neutralized == pytest.approx(a.neutralized, abs=1e-15)

    def test_one_sided_agent_raises(self):
        quotes = [quote(0, 2, 2)]
        trades = [TradeRecord(SEC, 9.5, 1, "solo", 1)]
        with pytest.raises(DataError, match="sell"):
            neutralized_imbalance(trades, quotes, "solo")


class TestPriceProfile:
    def test_constant_mid_is_flat_zero(self):
        quotes = [quote(i * SEC, 3, 3) for i in range(20)]
        trades = [TradeRecord(5 * SEC, 9.5, 1, "a", 1)]
        config = ProfileConfig(offsets_ns=tuple(k * SEC for k in range(-3, 4)))
        curve = price_profile(trades, quotes, "a", config)
        assert curve.values == (0.0,) * 7
        assert curve.avg_spread_ticks == pytest.approx(1.0)

    def test_deterministic_up_move_after_buy(self):
        # mid jumps +1 tick one step after the fill; spread is one tick
        quotes = [quote(0, 3, 3), quote(SEC, 3, 3), quote(2 * SEC, 3, 3, 10.5, 11.5), quote(3 * SEC, 3, 3, 10.5, 11.5)]
        trades = [TradeRecord(SEC, 9.5, 1, "a", 1)]
        config = ProfileConfig(offsets_ns=(0, SEC, 2 * SEC))
        curve = price_profile(trades, quotes, "a", config)
        assert curve.values[0] == 0.0
        assert curve.values[1] == pytest.approx(1.0)  # one spread unit
        assert curve.values[2] == pytest.approx(1.0)

    def test_sell_fill_flips_sign(self):
        quotes = [quote(0, 3, 3), quote(SEC, 3, 3), quote(2 * SEC, 3, 3, 10.5, 11.5)]
        trades = [TradeRecord(SEC, 10.5, 1, "a", -1)]
        config = ProfileConfig(offsets_ns=(0, SEC))
        curve = price_profile(trades, quotes, "a", config)
        assert curve.values[1] == pytest.approx(-1.0)


class TestSimulateMarketAndCsv:
    def test_deterministic_by_seed(self):
        a = simulate_market(IMB_PARAMS, 500, seed=5)
        b = simulate_market(IMB_PARAMS, 500, seed=5)
        assert a == b
        c = simulate_market(IMB_PARAMS, 500, seed=6)
        assert c != a

    def test_quotes_stay_valid(self):
        quotes, trades = simulate_market(IMB_PARAMS, 2000, seed=9)
        assert len(quotes) == 2001
        for q in quotes:
            assert q.best_bid_price < q.best_ask_price
            assert 1 <= q.best_bid_qty <= IMB_PARAMS.q_max
            assert 1 <= q.best_ask_qty <= IMB_PARAMS.q_max
        assert trades and all(t.sign in (-1, 1) for t in trades)

    def test_csv_round_trip(self, tmp_path):
        quotes, trades = simulate_market(IMB_PARAMS, 300, seed=2)
        qp, tp = str(tmp_path / "q.csv"), str(tmp_path / "t.csv")
        write_quotes_csv(qp, quotes)
        write_trades_csv(tp, trades)
        assert read_quotes_csv(qp) == quotes
        assert read_trades_csv(tp) == trades

    def test_bad_headers_rejected(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("time,bid,ask\n0,1,2\n")
        with pytest.raises(DataError, match="headers"):
            read_quotes_csv(str(path))

    def test_bad_record_reports_line(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text(
            "timestamp,best_bid_qty,best_ask_qty,best_bid_price,best_ask_price\n"
            "0,1,1,10.5,9.5\n"
        )
        with pytest.raises(DataError, match="line 2"):
            read_quotes_csv(str(path))
