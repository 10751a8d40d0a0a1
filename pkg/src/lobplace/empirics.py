"""Imbalance estimators over generic trade and quote records.

Implements the measurement side of the study on any data shaped as
best-limit quotes plus labelled passive fills: the imbalance series, its
predictive power for future mid moves, the per-agent imbalance snapshot
at fill time, and spread-normalized price profiles around fills.  A
model-driven synthetic market generator makes the estimators runnable
without proprietary data.

Snapshot convention: the book "just before" a trade is the last quote
record with timestamp strictly earlier than the trade; prevailing mids
at an offset use the last quote at or before the target time.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .model import ModelParams, rates, replenish


class DataError(ValueError):
    """Raised on malformed market data or unusable estimator inputs."""


@dataclass(frozen=True)
class QuoteRecord:
    timestamp: int  # ns
    best_bid_qty: int
    best_ask_qty: int
    best_bid_price: float  # ticks
    best_ask_price: float  # ticks

    def __post_init__(self) -> None:
        if self.best_bid_qty < 0 or self.best_ask_qty < 0:
            raise DataError("negative quantity in quote record")
        if not self.best_bid_price < self.best_ask_price:
            raise DataError("quote record requires bid price < ask price")

    @property
    def mid(self) -> float:
        return 0.5 * (self.best_bid_price + self.best_ask_price)


@dataclass(frozen=True)
class TradeRecord:
    timestamp: int  # ns
    price: float  # ticks
    size: int
    passive_agent_id: str
    sign: int  # +1 when the passive side bought, -1 when it sold

    def __post_init__(self) -> None:
        if self.size <= 0:
            raise DataError("trade size must be > 0")
        if self.sign not in (-1, 1):
            raise DataError("trade sign must be -1 or +1")


_DEFAULT_OFFSETS = tuple(int(k * 1_000_000_000) for k in range(-10, 11))
_DEFAULT_BIN_EDGES = tuple(-1.0 + k / 10.0 for k in range(21))


@dataclass(frozen=True)
class ProfileConfig:
    offsets_ns: tuple[int, ...] = _DEFAULT_OFFSETS
    future_trades: int = 50
    bin_edges: tuple[float, ...] = _DEFAULT_BIN_EDGES
    spread_window_ns: Optional[tuple[int, int]] = None

    def __post_init__(self) -> None:
        if self.future_trades < 1:
            raise DataError("future_trades must be >= 1")
        if list(self.offsets_ns) != sorted(self.offsets_ns):
            raise DataError("offsets_ns must be sorted")
        edges = list(self.bin_edges)
        if len(edges) < 2 or edges != sorted(edges):
            raise DataError("bin_edges must be sorted with at least two entries")
        if edges[0] > -1.0 or edges[-1] < 1.0:
            raise DataError("bin_edges must cover [-1, 1]")


def _quote_arrays(quotes: Sequence[QuoteRecord]):
    if not quotes:
        raise DataError("empty quote series")
    ts = np.array([q.timestamp for q in quotes], dtype=np.int64)
    if np.any(np.diff(ts) < 0):
        raise DataError("quote timestamps must be non-decreasing")
    bid_qty = np.array([q.best_bid_qty for q in quotes], dtype=np.float64)
    ask_qty = np.array([q.best_ask_qty for q in quotes], dtype=np.float64)
    mids = np.array([q.mid for q in quotes], dtype=np.float64)
    depth = bid_qty + ask_qty
    with np.errstate(invalid="ignore"):
        imb = np.where(depth > 0, (bid_qty - ask_qty) / np.where(depth > 0, depth, 1.0), np.nan)
    return ts, mids, imb, depth


def imbalance_series(quotes: Sequence[QuoteRecord]) -> tuple[list[tuple[int, float]], int]:
    """Per-record imbalance; zero-depth records are skipped and counted."""
    series: list[tuple[int, float]] = []
    skipped = 0
    for q in quotes:
        depth = q.best_bid_qty + q.best_ask_qty
        if depth <= 0:
            skipped += 1
            continue
        series.append((q.timestamp, (q.best_bid_qty - q.best_ask_qty) / depth))
    return series, skipped


@dataclass(frozen=True)
class PredictiveBin:
    lo: float
    hi: float
    count: int
    mean_imbalance: Optional[float]
    mean_move_ticks: Optional[float]
    mean_signed_move_ticks: Optional[float]


def predictive_power(
    trades: Sequence[TradeRecord],
    quotes: Sequence[QuoteRecord],
    config: ProfileConfig = ProfileConfig(),
) -> list[PredictiveBin]:
    """Mean future mid move conditional on the imbalance just before a trade.

    For each trade the imbalance is snapshotted strictly before it and the
    mid move is measured to the prevailing mid at the time of the
    ``future_trades``-th subsequent trade.  Moves are binned by imbalance;
    the signed variant multiplies each move by the trade's passive sign.
    """
    ts, mids, imb, depth = _quote_arrays(quotes)
    horizon = config.future_trades
    edges = np.asarray(config.bin_edges, dtype=np.float64)
    n_bins = len(edges) - 1

    sums_imb = np.zeros(n_bins)
    sums_move = np.zeros(n_bins)
    sums_signed = np.zeros(n_bins)
    counts = np.zeros(n_bins, dtype=np.int64)

    trade_ts = np.array([t.timestamp for t in trades], dtype=np.int64)
    for i in range(len(trades) - horizon):
        snap = int(np.searchsorted(ts, trade_ts[i], side="left")) - 1
        if snap < 0 or depth[snap] <= 0:
            continue
        fut = int(np.searchsorted(ts, trade_ts[i + horizon], side="right")) - 1
        if fut < 0:
            continue
        move = mids[fut] - mids[snap]
        x = imb[snap]
        b = int(np.searchsorted(edges, x, side="right")) - 1
        if b == n_bins:  # x == upper edge
            b -= 1
        if b < 0 or b >= n_bins:
            continue
        sums_imb[b] += x
        sums_move[b] += move
        sums_signed[b] += move * trades[i].sign
        counts[b] += 1

    bins = []
    for b in range(n_bins):
        c = int(counts[b])
        if c == 0:
            bins.append(PredictiveBin(float(edges[b]), float(edges[b + 1]), 0, None, None, None))
        else:
            bins.append(
                PredictiveBin(
                    float(edges[b]),
                    float(edges[b + 1]),
                    c,
                    sums_imb[b] / c,
                    sums_move[b] / c,
                    sums_signed[b] / c,
                )
            )
    return bins


@dataclass(frozen=True)
class AgentImbalance:
    """Imbalance seen by an agent's passive fills, from its order's side."""

    agent_id: str
    n_buys: int
    n_sells: int
    buy_avg: float
    sell_avg: float
    neutralized: float  # mean of the two per-side averages
    neutralized_sum: float  # plain sum of the two per-side averages
    plain_avg: float  # average over all fills, sides pooled
    plain_avg_literal: float  # same ratio with the doubled-opposite denominator


def _fill_snapshots(trades, quotes, agent_id):
    ts, _, _, _ = _quote_arrays(quotes)
    out = []
    for t in trades:
        if t.passive_agent_id != agent_id:
            continue
        snap = int(np.searchsorted(ts, t.timestamp, side="left")) - 1
        if snap < 0:
            continue
        q = quotes[snap]
        if t.sign == 1:
            same, opp = q.best_bid_qty, q.best_ask_qty
        else:
            same, opp = q.best_ask_qty, q.best_bid_qty
        if same + opp <= 0:
            continue
        out.append((t, same, opp))
    return out


def neutralized_imbalance(
    trades: Sequence[TradeRecord],
    quotes: Sequence[QuoteRecord],
    agent_id: str,
) -> AgentImbalance:
    """Side-neutralized average imbalance at an agent's passive fill times.

    Buy-side and sell-side fills are averaged separately and then combined,
    so an unbalanced buy/sell mix cannot bias the estimate.  Both the
    balanced mean and the raw sum of the two side averages are reported,
    along with the pooled average and its doubled-opposite-denominator
    variant.
    """
    rho_buy: list[float] = []
    rho_sell: list[float] = []
    rho_all: list[float] = []
    rho_literal: list[float] = []
    for t, same, opp in _fill_snapshots(trades, quotes, agent_id):
        rho = (same - opp) / (same + opp)
        rho_all.append(rho)
        if opp > 0:
            rho_literal.append((same - opp) / (2.0 * opp))
        (rho_buy if t.sign == 1 else rho_sell).append(rho)
    if not rho_buy:
        raise DataError(f"agent {agent_id!r} has no usable buy-side fills")
    if not rho_sell:
        raise DataError(f"agent {agent_id!r} has no usable sell-side fills")
    buy_avg = sum(rho_buy) / len(rho_buy)
    sell_avg = sum(rho_sell) / len(rho_sell)
    return AgentImbalance(
        agent_id=agent_id,
        n_buys=len(rho_buy),
        n_sells=len(rho_sell),
        buy_avg=buy_avg,
        sell_avg=sell_avg,
        neutralized=0.5 * (buy_avg + sell_avg),
        neutralized_sum=buy_avg + sell_avg,
        plain_avg=sum(rho_all) / len(rho_all),
        plain_avg_literal=sum(rho_literal) / len(rho_literal) if rho_literal else math.nan,
    )


@dataclass(frozen=True)
class ProfileCurve:
    agent_id: str
    offsets_ns: tuple[int, ...]
    values: tuple[float, ...]  # signed mid move in average-spread units
    counts: tuple[int, ...]
    avg_spread_ticks: float
    n_fills: int


def price_profile(
    trades: Sequence[TradeRecord],
    quotes: Sequence[QuoteRecord],
    agent_id: str,
    config: ProfileConfig = ProfileConfig(),
) -> ProfileCurve:
    """Average signed, spread-normalized mid move around an agent's fills.

    For a fill at time tau with passive sign eps, each offset dt
    contributes (mid(tau+dt) - mid(tau)) / avg_spread * eps; the value at
    offset zero is zero by construction.
    """
    ts, mids, _, _ = _quote_arrays(quotes)

    spreads = [q.best_ask_price - q.best_bid_price for q in quotes]
    if config.spread_window_ns is not None:
        lo, hi = config.spread_window_ns
        spreads = [
            q.best_ask_price - q.best_bid_price for q in quotes if lo <= q.timestamp <= hi
        ]
    if not spreads:
        raise DataError("no quotes inside the spread estimation window")
    psi = sum(spreads) / len(spreads)
    if psi <= 0:
        raise DataError("average spread must be positive")

    fills = [t for t in trades if t.passive_agent_id == agent_id]
    t_min, t_max = int(ts[0]), int(ts[-1])
    sums = np.zeros(len(config.offsets_ns))
    counts = np.zeros(len(config.offsets_ns), dtype=np.int64)
    for t in fills:
        base = int(np.searchsorted(ts, t.timestamp, side="right")) - 1
        if base < 0:
            continue
        ref = mids[base]
        for j, off in enumerate(config.offsets_ns):
            target = t.timestamp + off
            if target < t_min or target > t_max:
                continue
            k = int(np.searchsorted(ts, target, side="right")) - 1
            sums[j] += (mids[k] - ref) / psi * t.sign
            counts[j] += 1
    values = tuple(
        float(sums[j] / counts[j]) if counts[j] > 0 else 0.0 for j in range(len(config.offsets_ns))
    )
    return ProfileCurve(
        agent_id=agent_id,
        offsets_ns=tuple(config.offsets_ns),
        values=values,
        counts=tuple(int(c) for c in counts),
        avg_spread_ticks=psi,
        n_fills=len(fills),
    )


def simulate_market(
    params: ModelParams,
    n_steps: int,
    seed: int,
    *,
    q_bid0: int = 6,
    q_ask0: int = 6,
    price_half_ticks0: int = 20,
    agent_id: str = "flow",
) -> tuple[list[QuoteRecord], list[TradeRecord]]:
    """Simulate the uncontrolled book and emit quotes plus consumption trades.

    Every queue-consuming event is booked as a trade on that side (the
    model does not distinguish cancellations from transactions), and a
    quote is emitted after every step.
    """
    if n_steps < 1:
        raise ValueError("n_steps must be >= 1")
    rng = np.random.default_rng(seed)
    step_ns = max(1, int(round(params.dt * 1_000_000_000)))
    q_bid, q_ask, p = q_bid0, q_ask0, price_half_ticks0
    dt = params.dt
    q_max = params.q_max

    quotes: list[QuoteRecord] = []
    trades: list[TradeRecord] = []

    def emit_quote(ts: int) -> None:
        quotes.append(
            QuoteRecord(
                timestamp=ts,
                best_bid_qty=q_bid,
                best_ask_qty=q_ask,
                best_bid_price=(p - 1) / 2.0,
                best_ask_price=(p + 1) / 2.0,
            )
        )

    emit_quote(0)
    uniforms = rng.random(n_steps)
    for n in range(1, n_steps + 1):
        ts = n * step_ns
        lam = rates(params.intensity, q_ask, q_bid)  # same = bid for a neutral book
        bp = lam.same_plus * dt
        bm = lam.same_minus * dt
        ap = lam.opp_plus * dt
        am = lam.opp_minus * dt
        w_bid_add = bp * (1 - ap) * (1 - am) * (1 - bm)
        w_bid_cancel = bm * (1 - ap) * (1 - am) * (1 - bp)
        w_ask_add = ap * (1 - am) * (1 - bp) * (1 - bm)
        w_ask_cancel = am * (1 - ap) * (1 - bp) * (1 - bm)
        w_nothing = (1 - ap) * (1 - am) * (1 - bp) * (1 - bm)
        weights = [w_bid_add, w_bid_cancel, w_ask_add, w_ask_cancel, w_nothing]
        total = sum(weights)
        u = uniforms[n - 1] * total
        acc = 0.0
        event = 4
        for j, w in enumerate(weights):
            acc += w
            if u < acc:
                event = j
                break
        if event == 0:
            q_bid = min(q_bid + 1, q_max)
        elif event == 1:
            trades.append(TradeRecord(ts, (p - 1) / 2.0, 1, agent_id, 1))
            if q_bid > 1:
                q_bid -= 1
            else:
                q_disc, q_ins = replenish(params.replenishment, q_ask, q_max)
                p -= 2
                q_bid, q_ask = q_disc, q_ins
        elif event == 2:
            q_ask = min(q_ask + 1, q_max)
        elif event == 3:
            trades.append(TradeRecord(ts, (p + 1) / 2.0, 1, agent_id, -1))
            if q_ask > 1:
                q_ask -= 1
            else:
                q_disc, q_ins = replenish(params.replenishment, q_bid, q_max)
                p += 2
                q_ask, q_bid = q_disc, q_ins
        emit_quote(ts)
    return quotes, trades


QUOTE_FIELDS = ["timestamp", "best_bid_qty", "best_ask_qty", "best_bid_price", "best_ask_price"]
TRADE_FIELDS = ["timestamp", "price", "size", "passive_agent_id", "sign"]


def write_quotes_csv(path: str, quotes: Sequence[QuoteRecord]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(QUOTE_FIELDS)
        for q in quotes:
            writer.writerow(
                [q.timestamp, q.best_bid_qty, q.best_ask_qty, repr(q.best_bid_price), repr(q.best_ask_price)]
            )


def read_quotes_csv(path: str) -> list[QuoteRecord]:
    out = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != QUOTE_FIELDS:
            raise DataError(f"quote CSV must have headers {QUOTE_FIELDS}, got {reader.fieldnames}")
        for i, row in enumerate(reader, start=2):
            try:
                out.append(
                    QuoteRecord(
                        timestamp=int(row["timestamp"]),
                        best_bid_qty=int(row["best_bid_qty"]),
                        best_ask_qty=int(row["best_ask_qty"]),
                        best_bid_price=float(row["best_bid_price"]),
                        best_ask_price=float(row["best_ask_price"]),
                    )
                )
            except (DataError, ValueError) as exc:
                raise DataError(f"bad quote record at line {i}: {exc}") from exc
    return out


def write_trades_csv(path: str, trades: Sequence[TradeRecord]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(TRADE_FIELDS)
        for t in trades:
            writer.writerow([t.timestamp, repr(t.price), t.size, t.passive_agent_id, t.sign])


def read_trades_csv(path: str) -> list[TradeRecord]:
    out = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != TRADE_FIELDS:
            raise DataError(f"trade CSV must have headers {TRADE_FIELDS}, got {reader.fieldnames}")
        for i, row in enumerate(reader, start=2):
            try:
                out.append(
                    TradeRecord(
                        timestamp=int(row["timestamp"]),
                        price=float(row["price"]),
                        size=int(row["size"]),
                        passive_agent_id=row["passive_agent_id"],
                        sign=int(row["sign"]),
                    )
                )
            except (DataError, ValueError) as exc:
                raise DataError(f"bad trade record at line {i}: {exc}") from exc
    return out
