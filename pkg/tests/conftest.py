import pytest


@pytest.fixture
def report(request):
    """Print a [PASS]/[FAIL] line for an acceptance check, then assert.

    The line is emitted outside pytest's capture so it is visible in a
    plain ``pytest -v`` run, pass or fail.
    """
    capman = request.config.pluginmanager.getplugin("capturemanager")

    def _report(num, desc: str, ok: bool, detail: str = ""):
        tag = "PASS" if ok else "FAIL"
        line = f"[{tag}] acceptance {num}: {desc}"
        if detail:
            line += f" ({detail})"
        if capman is not None:
            with capman.global_and_fixture_disabled():
                print(line, flush=True)
        else:
            print(line, flush=True)
        assert ok, line

    return _report
