import random
import socket

import numpy as np
import pytest

from vidmpc.prf import Keystream
from vidmpc.ring import FixedPointCodec
from vidmpc.session import run_local
from vidmpc.sharing import deal_tensor, reconstruct_all

CODEC = FixedPointCodec(16)

# One PASS/FAIL line per acceptance criterion, echoed in the terminal summary.
ACCEPTANCE: list[str] = []


def report(criterion: int, ok: bool, detail: str) -> None:
    line = f"{'PASS' if ok else 'FAIL'} criterion {criterion}: {detail}"
    ACCEPTANCE.append(line)
    print(line)
    assert ok, line


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)


def shared(values, seed=0, label="t"):
    """Deterministic three-way dealing of a ring array."""
    return deal_tensor(np.asarray(values, dtype=np.uint64), Keystream.from_seed(("test", seed, label)), label)


def shared_fixed(reals, seed=0, label="t"):
    return shared(CODEC.encode_array(np.asarray(reals, dtype=np.float64)), seed, label)


def run3(fn, *inputs, **kw):
    """Run fn(ctx, *party_views) on all three parties; returns the LocalRun."""
    return run_local(lambda ctx: fn(ctx, *(x[ctx.party - 1] for x in inputs)), **kw)


def opened(run):
    return reconstruct_all(run.results)


def opened_fixed(run):
    return CODEC.decode_array(opened(run))


def signed(words):
    return np.asarray(words, dtype=np.uint64).view(np.int64)


def free_ports(n):
    socks = [socket.socket() for _ in range(n)]
    for s in socks:
        s.bind(("127.0.0.1", 0))
    ports = [s.getsockname()[1] for s in socks]
    for s in socks:
        s.close()
    return ports


def free_port_run(n=3, tries=50):
    """Base port b such that b+1 .. b+n are all bindable."""
    rng = random.Random()
    for _ in range(tries):
        base = rng.randrange(20000, 60000)
        socks = []
        try:
            for k in range(1, n + 1):
                s = socket.socket()
                socks.append(s)
                s.bind(("127.0.0.1", base + k))
            return base
        except OSError:
            continue
        finally:
            for s in socks:
                s.close()
    raise RuntimeError("no free port run")


@pytest.fixture
def codec():
    return CODEC


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
