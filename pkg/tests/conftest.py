"""Shared fixtures: quick frame builders and the bundled demo pipeline run."""

import datetime

import numpy as np
import pytest

from chaincast import pipeline, synthetic
from chaincast.ingest import OhlcBar, PriceFrame


def weekdays(n, start=datetime.date(2020, 1, 6)):
    out = []
    cur = start
    while len(out) < n:
        if cur.weekday() < 5:
            out.append(cur)
        cur += datetime.timedelta(days=1)
    return out


def doji_frame(closes, asset="test", start=datetime.date(2020, 1, 6)):
    """Frame where open = high = low = close, so range logic is transparent."""
    closes = np.asarray(closes, float)
    dates = weekdays(len(closes), start)
    bars = [OhlcBar(d, float(c), float(c), float(c), float(c))
            for d, c in zip(dates, closes)]
    return PriceFrame.from_bars(asset, bars)


def ohlc_frame(opens, highs, lows, closes, asset="test",
               start=datetime.date(2020, 1, 6)):
    dates = weekdays(len(closes), start)
    bars = [OhlcBar(d, float(o), float(h), float(lo), float(c))
            for d, o, h, lo, c in zip(dates, opens, highs, lows, closes)]
    return PriceFrame.from_bars(asset, bars)


@pytest.fixture(scope="session")
def demo_bundle(tmp_path_factory):
    """Bundled three-asset fixture with the pipeline run twice on it.

    Generating the data and running the chain dominates the suite's wall
    time, so every test that needs a completed run shares this one.
    """
    root = tmp_path_factory.mktemp("demo")
    paths = synthetic.make_fixture(root)
    cfg_path = root / "pipeline.cfg"
    cfg_path.write_text(
        "gold_csv = gold.csv\n"
        "eurusd_csv = eurusd.csv\n"
        "oil_csv = oil.csv\n"
        "out_dir = out\n"
    )
    config = pipeline.load_config(cfg_path)
    report = pipeline.run(config)
    first_bytes = (root / "out" / "report.json").read_bytes()
    report_again = pipeline.run(config)
    second_bytes = (root / "out" / "report.json").read_bytes()
    return {
        "root": root,
        "paths": paths,
        "cfg_path": cfg_path,
        "config": config,
        "report": report,
        "report_again": report_again,
        "out_dir": root / "out",
        "report_bytes": (first_bytes, second_bytes),
    }
