import pytest

from polling_lab import Deterministic, Erlang, Exponential, HyperExponential, Pareto, PollingModel
from polling_lab.perturbation import ExpModel, TruncationSpec

# criterion id -> (passed, detail); filled by test_acceptance, printed at the end of the run
ACCEPTANCE = {}


def base_polling_model(lam=0.1, service=None, c1=1.0, c2=1.0, lam2=None, service2=None):
    service = service or Exponential(1.0)
    return PollingModel.from_params(
        lam, service, c1, lam if lam2 is None else lam2, service2 or service, c2
    )


LIGHT_SERVICES = {
    "exp": Exponential(1.0),
    "det": Deterministic(1.0),
    "erlang": Erlang(3, 3.0),
    "hyper": HyperExponential((0.4, 0.6), (0.5, 2.0)),
}


@pytest.fixture
def base_model():
    return base_polling_model()


@pytest.fixture
def pareto_model():
    return PollingModel.from_params(0.1, Pareto(1.5, 1.0), 1.0, 0.1, Exponential(1.0), 1.0)


@pytest.fixture
def base_exp_model():
    return ExpModel(0.05, 0.05, 0.2, 0.2, 0.3, 0.3)


@pytest.fixture
def small_trunc():
    return TruncationSpec(8, 8)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE, key=lambda k: (int(k.split(".")[0]), k)):
        passed, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"criterion {key:<5} {'PASS' if passed else 'FAIL'}  {detail}")
