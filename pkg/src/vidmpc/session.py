"""Wiring parties together: contexts, threaded local runs, party entry point."""

from __future__ import annotations

import logging
import threading
import time
from dataclasses import dataclass
from typing import Callable, Sequence

from .plan import DEFAULT_PLAN, NumericPlan
from .preproc import PreprocBudget, PreprocSource, StreamingDealer
from .prf import derive_key
from .protocols import SessionContext
from .sharing import PARTIES, ZeroShareSource
from .transport import LoopbackHub, Transcript, Transport, merge_transcripts

log = logging.getLogger(__name__)


def pairwise_keys(seed) -> list[bytes]:
    """Keys k1, k2, k3; k_i is shared by party i and party i+1."""
    return [derive_key("prf-key", seed, i) for i in PARTIES]


def zero_source_for(party: int, keys: Sequence[bytes | None]) -> ZeroShareSource:
    return ZeroShareSource(party, keys[party - 1], keys[(party - 2) % 3])


def make_context(
    party: int,
    transport: Transport,
    keys: Sequence[bytes | None],
    preproc: PreprocSource,
    plan: NumericPlan = DEFAULT_PLAN,
) -> SessionContext:
    return SessionContext(party, transport, zero_source_for(party, keys), preproc, plan)


@dataclass
class LocalRun:
    results: list
    transcripts: list[Transcript]
    elapsed: float
    contexts: list[SessionContext]

    @property
    def transcript(self) -> Transcript:
        return merge_transcripts(self.transcripts)

    def bytes_per_party(self) -> dict[int, int]:
        return {t_party: t.bytes_sent() for t_party, t in zip(PARTIES, self.transcripts)}


def run_local(
    fn: Callable[[SessionContext], object],
    *,
    seed=0,
    budget: PreprocBudget | None = None,
    preproc: Sequence[PreprocSource] | None = None,
    stub_prf: bool = False,
    plan: NumericPlan = DEFAULT_PLAN,
    timeout: float = 120.0,
    session_id: bytes = b"\x00" * 16,
) -> LocalRun:
    """Run ``fn(ctx)`` for all three parties over loopback, one thread each.

    The first exception raised by any party aborts the others and is
    re-raised here.
    """
    hub = LoopbackHub(session_id, timeout)
    keys = [None, None, None] if stub_prf else pairwise_keys(seed)
    sources = list(preproc) if preproc is not None else [StreamingDealer(seed, i, budget) for i in PARTIES]
    contexts = [make_context(i, hub[i], keys, sources[i - 1], plan) for i in PARTIES]
    results: list = [None, None, None]
    errors: list = [None, None, None]

    def worker(i: int) -> None:
        try:
            results[i - 1] = fn(contexts[i - 1])
        except BaseException as exc:  # re-raised in the caller
            errors[i - 1] = exc
            hub.abort(f"party {i} failed: {exc}")

    start = time.perf_counter()
    threads = [threading.Thread(target=worker, args=(i,), name=f"party-{i}") for i in PARTIES]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    elapsed = time.perf_counter() - start
    primary = next((e for e in errors if e is not None and not _is_abort(e)), None)
    primary = primary or next((e for e in errors if e is not None), None)
    if primary is not None:
        raise primary
    return LocalRun(results, [hub[i].transcript for i in PARTIES], elapsed, contexts)


def _is_abort(exc: BaseException) -> bool:
    from .errors import SessionAborted

    return isinstance(exc, SessionAborted)
