import pytest

from pdlkit import RV32I_SPEC, load_spec
from pdlkit.asm import Assembler
from pdlkit.ir import build_all
from pdlkit.iss import Simulator
from pdlkit.mia import synthesize

from support import BASE, PROGRAMS, program_name


@pytest.fixture(scope="session")
def spec():
    return load_spec(RV32I_SPEC)


@pytest.fixture(scope="session")
def graphs(spec):
    return build_all(spec)


@pytest.fixture(scope="session")
def sim(spec, graphs):
    return Simulator(spec, graphs)


@pytest.fixture(scope="session")
def asm(spec):
    return Assembler(spec)


@pytest.fixture(scope="session")
def models(spec, graphs):
    return {name: synthesize(spec, name, graphs) for name in spec.mias}


@pytest.fixture(scope="session")
def corpus(asm):
    """program name -> image assembled at BASE"""
    out = {}
    for path in PROGRAMS:
        with open(path) as f:
            out[program_name(path)] = asm.assemble_text(f.read(), BASE)[0]
    return out


# -- acceptance summary ---------------------------------------------------------------
# criterion number -> list of (test name, passed)
_CRITERIA: dict = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion the test belongs to")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    if rep.when == "call" or (rep.when == "setup" and not rep.passed):
        _CRITERIA.setdefault(mark.args[0], []).append((item.name, rep.passed))


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        results = _CRITERIA[n]
        ok = all(p for _, p in results)
        failed = [name for name, p in results if not p]
        line = f"criterion {n}: {'PASS' if ok else 'FAIL'} ({len(results)} checks)"
        if failed:
            line += " failed: " + ", ".join(failed)
        terminalreporter.write_line(line)
