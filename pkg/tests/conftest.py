import pytest

from riscover.channel import ChannelParams

CRITERIA = {}


def record_criterion(number, title, passed, detail=""):
    CRITERIA[number] = (title, bool(passed), detail)
    line = f"criterion {number:>2} [{'PASS' if passed else 'FAIL'}] {title}: {detail}"
    print(line)
    return line


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(CRITERIA):
        title, passed, detail = CRITERIA[number]
        terminalreporter.write_line(
            f"criterion {number:>2} [{'PASS' if passed else 'FAIL'}] {title}: {detail}")


@pytest.fixture(scope="session")
def baseline_cp():
    """46 dBm + 17 dBi at 3.5 GHz over 1 MHz, -174 dBm/Hz, alpha = 2."""
    return ChannelParams.from_db(46, 3.5e9, 1e6, -174, 2.0, antenna_gain_dBi=17)
