import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from blindsso.group import DeterministicRng, p256_group, toy_group
from blindsso.signing import SigningKeyPair


@pytest.fixture(scope="session")
def toy():
    return toy_group()


@pytest.fixture(scope="session")
def p256():
    return p256_group()


@pytest.fixture(scope="session")
def keypair():
    return SigningKeyPair.generate()


@pytest.fixture(scope="session")
def other_keypair():
    return SigningKeyPair.generate()


@pytest.fixture
def rng():
    return DeterministicRng(0xC0FFEE)


class FakeClock:
    """Manually advanced clock injected wherever a service needs time."""

    def __init__(self, start: int = 1_000_000):
        self.now = start

    def __call__(self) -> int:
        return self.now

    def advance(self, secs: int) -> None:
        self.now += secs


@pytest.fixture
def clock():
    return FakeClock()
