import numpy as np
import pytest

from flightpause.model import FLIGHT, PAUSE, Increment, Motion, Theta

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def study_theta():
    return Theta(0.1, 0.1, 0.95, 1.0)


def build_motion(spec, origin=(0.0, 0.0)):
    """Motion from (kind, duration, displacement) triples; pauses reuse the previous displacement."""
    incs, t, pos, prev = [], 1, np.array(origin, dtype=float), None
    for kind, dur, disp in spec:
        if kind == "p":
            incs.append(Increment(t, pos, dur, prev, PAUSE))
        else:
            disp = np.asarray(disp, dtype=float)
            incs.append(Increment(t, pos, 1, disp, FLIGHT))
            pos = pos + disp
            prev = disp
        t += dur
    return Motion(tuple(incs))


def observable_count(motion, T):
    """Increments whose span and flanking locations fall inside 1..T under full observation."""
    count = 0
    for inc in motion:
        if inc.kind is FLIGHT:
            ok = inc.start_time + 1 <= T
        else:
            ok = inc.start_time - 1 >= 1 and inc.start_time + inc.duration + 1 <= T
        if not ok:
            break
        count += 1
    return count


@pytest.fixture
def example_motion():
    """Three flights and one pause: flight, flight, pause of two steps, flight."""
    return build_motion([("f", 1, (1.0, 0.0)), ("f", 1, (1.0, 1.0)), ("p", 2, None), ("f", 1, (0.0, 2.0))])
