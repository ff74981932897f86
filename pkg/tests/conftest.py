from __future__ import annotations

import numpy as np
import pytest

from mucc.model import ChannelGains, Scenario, SystemParams, UeProfile


def make_scenario(tasks, gains, params: SystemParams | None = None, **ue_kw) -> Scenario:
    """Scenario with UEs on a diagonal, given task sizes and a full gain matrix.

    ``gains`` may be a scalar (all links equal) or an n x n array.
    """
    params = params or SystemParams()
    n = len(tasks)
    G = np.full((n, n), float(gains)) if np.isscalar(gains) else np.array(gains, dtype=float)
    per_ue = {k: v for k, v in ue_kw.items() if not isinstance(v, (list, tuple))}
    lists = {k: v for k, v in ue_kw.items() if isinstance(v, (list, tuple))}
    ues = []
    for m, L in enumerate(tasks):
        kw = dict(per_ue)
        kw.update({k: v[m] for k, v in lists.items()})
        ues.append(UeProfile(id=m, position=(float(m), float(m)), task_bits=float(L), **kw))
    return Scenario(params, tuple(ues), ChannelGains(G))


# one line per acceptance criterion, repeated in the terminal summary
ACCEPTANCE: dict[int, str] = {}


@pytest.fixture
def report(capsys):
    def emit(criterion: int, ok: bool, detail: str) -> None:
        line = f"criterion {criterion}: {'PASS' if ok else 'FAIL'} - {detail}"
        ACCEPTANCE[criterion] = line
        with capsys.disabled():
            print(f"\n{line}")

    return emit


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.write_sep("=", "acceptance criteria")
        for k in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[k])
