import os

from hypothesis import HealthCheck, settings

settings.register_profile(
    "default", max_examples=int(os.environ.get("HYPOTHESIS_EXAMPLES", 40)), deadline=None,
    suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

_CRITERIA: dict = {}


def record_criterion(num: int, ok: bool, detail: str) -> None:
    _CRITERIA[num] = (bool(ok), detail)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_CRITERIA):
        ok, detail = _CRITERIA[num]
        terminalreporter.write_line(f"criterion {num:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
