import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from dsfkit import build_plan, lanczos_ground_state, preset_model  # noqa: E402


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long-running checks")


@pytest.fixture(scope="session")
def heis8():
    model = preset_model("kcuf3", 8)
    gs, e = lanczos_ground_state(model)
    return model, gs, e


@pytest.fixture(scope="session")
def preset_runs12():
    """Exact-engine ZZ grids of every preset at n=12 (the test corpus)."""
    from dsfkit import PRESETS, run_protocol

    out = {}
    for name, p in PRESETS.items():
        model = preset_model(name, 12)
        gs, _ = lanczos_ground_state(model)
        plan = build_plan(model, p.dt, p.steps, p.order)
        out[name] = (model, gs, run_protocol(gs, model, plan))
    return out


@pytest.fixture(scope="session")
def kcuf3_20():
    """n=20 Heisenberg ground state with its 10-step clean grid and distributions."""
    from dsfkit import run_protocol
    from dsfkit.noise import clean_distributions

    model = preset_model("kcuf3", 20)
    gs, _ = lanczos_ground_state(model)
    plan = build_plan(model, 0.6, 10, 2)
    return model, gs, plan, run_protocol(gs, model, plan), clean_distributions(gs, model, plan)


# ---------------------------------------------------------------------------
# acceptance summary: one line per criterion, printed at the end of the run

ACCEPTANCE: dict[int, list] = {}


def record(criterion: int, part: str, ok: bool, detail: str) -> None:
    ACCEPTANCE.setdefault(criterion, []).append((part, bool(ok), detail))
    print(f"criterion {criterion} [{part}]: {'PASS' if ok else 'FAIL'} ({detail})")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        parts = ACCEPTANCE[k]
        ok = all(p[1] for p in parts)
        detail = "; ".join(f"{name}: {'ok' if good else 'FAILED'}, {d}" for name, good, d in parts)
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
