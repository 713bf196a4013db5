from pathlib import Path

import pytest

from coup.syntax import parse_theory

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"


def load_program(name):
    doc = parse_theory((FIXTURES / name).read_text())
    return doc.to_program()


@pytest.fixture(scope="session")
def gamma1():
    return load_program("gamma1.th")


@pytest.fixture(scope="session")
def gamma2():
    return load_program("gamma2.th")


@pytest.fixture(scope="session")
def gamma3():
    return load_program("gamma3.th")


@pytest.fixture(scope="session")
def gamma4():
    return load_program("gamma4.th")


@pytest.fixture(scope="session")
def gamma5():
    return load_program("gamma5.th")


@pytest.fixture(scope="session")
def golden_certificate_text():
    return (FIXTURES / "from_proof.cert").read_text()


# the surface form of the stream-of-successors fixpoint term
FR_STR = "(fix \\f:nat -> stream. \\n:nat. scons n (f (s n)))"


@pytest.fixture(scope="session")
def fr_str_source():
    return FR_STR
