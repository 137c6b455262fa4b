import pytest

from recshock.referrer import classify_referrer
from recshock.schema import ClickEvent, DailyProductSeries, DayCounts, EdgeSeries

DAY0 = 16000  # 2013-10-22
T0 = DAY0 * 86400


def ev(t, user, product, ref="sr_1_1", src=None, category="books", day=0):
    """Event ``t`` seconds into day ``day``."""
    cls, _ = classify_referrer(ref)
    return ClickEvent(T0 + day * 86400 + t, user, product, category, ref, cls, src)


def product_series(pid, views, direct=None, users=None, first=DAY0, category="books"):
    """Series from dense daily lists; zero days are left out of the map."""
    direct = views if direct is None else direct
    users = views if users is None else users
    days = {
        first + k: DayCounts(int(v), int(d), int(u))
        for k, (v, d, u) in enumerate(zip(views, direct, users))
        if v or d or u
    }
    return DailyProductSeries(pid, category, days, (first, first + len(views) - 1))


def edge_series(i, j, clicks, first=DAY0):
    return EdgeSeries(i, j, {first + k: int(r) for k, r in enumerate(clicks) if r})


# acceptance summary, filled by test_acceptance.py
ACCEPTANCE: dict[str, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[name]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")


@pytest.fixture
def record_acceptance():
    def record(name, ok, detail):
        ACCEPTANCE[name] = (bool(ok), detail)
        return ok

    return record


# ---------------------------------------------------------------- generated datasets

_DATA: dict = {}


@pytest.fixture(scope="session")
def preset_data(tmp_path_factory):
    """``preset_data(name)`` -> (paths, swept pipeline result, seconds), built once per session."""
    import time

    from recshock.pipeline import RunOptions, run_pipeline
    from recshock.synthgen import PRESETS, generate

    def get(name):
        if name not in _DATA:
            t0 = time.perf_counter()
            paths = generate(PRESETS[name], tmp_path_factory.mktemp(name))
            result = run_pipeline(paths.log, paths.catalog, RunOptions(sweep=True))
            _DATA[name] = (paths, result, time.perf_counter() - t0)
        return _DATA[name]

    return get
