"""Input-independent correlated randomness from a trusted dealer.

Two kinds of material:

* random bits: replicated sharings of uniform ``b in {0, 1}``; every
  comparison consumes 64 of them.
* truncation pairs for a shift ``s``: sharings of a uniform 64-bit ``r``,
  of ``r >> s`` and of the top bit ``r >> 63``.

All values come from seeded AES-CTR streams addressed by position, so the
material for a session is the same whether it is written to files up front
or generated lazily by :class:`StreamingDealer`.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .containers import Role, ShareFile, load_share, save_share
from .errors import BudgetExhaustedError, ContainerFormatError
from .model import (
    ApproxSoftmax,
    AvgPool,
    Conv2D,
    Dense,
    Layer,
    ModelSpec,
    ReLU,
    output_shape,
)
from .plan import DEFAULT_PLAN, NumericPlan
from .prf import Keystream
from .sharing import PARTIES, ShareTensor, check_party, components_to_shares, split_components


@dataclass(frozen=True)
class PreprocBudget:
    bits: int = 0
    pairs: dict[int, int] = field(default_factory=dict)

    def __post_init__(self) -> None:
        object.__setattr__(self, "pairs", {int(k): int(v) for k, v in self.pairs.items() if v})

    def __add__(self, other: "PreprocBudget") -> "PreprocBudget":
        pairs = Counter(self.pairs)
        pairs.update(other.pairs)
        return PreprocBudget(self.bits + other.bits, dict(pairs))

    def scale(self, k: int) -> "PreprocBudget":
        return PreprocBudget(self.bits * k, {s: n * k for s, n in self.pairs.items()})

    @property
    def total_pairs(self) -> int:
        return sum(self.pairs.values())

    def to_dict(self) -> dict:
        return {"bits": self.bits, "pairs": {str(k): v for k, v in sorted(self.pairs.items())}}

    @classmethod
    def from_dict(cls, d: dict) -> "PreprocBudget":
        return cls(int(d.get("bits", 0)), {int(k): int(v) for k, v in d.get("pairs", {}).items()})


def comparison_cost(count: int, plan: NumericPlan = DEFAULT_PLAN) -> PreprocBudget:
    return PreprocBudget(bits=count * plan.bits_per_comparison)


def trunc_cost(count: int, shift: int) -> PreprocBudget:
    return PreprocBudget(pairs={shift: count})


def division_cost(count: int, plan: NumericPlan = DEFAULT_PLAN) -> PreprocBudget:
    a = plan.frac_bits
    return (
        comparison_cost(count * plan.div_thresholds, plan)
        + trunc_cost(2 * count, plan.div_norm_shift)
        + trunc_cost(count * (2 * plan.div_iterations + 1), a)
    )


def softmax_cost(classes: int, plan: NumericPlan = DEFAULT_PLAN) -> PreprocBudget:
    return comparison_cost(classes + 1, plan) + division_cost(1, plan) + trunc_cost(classes, plan.frac_bits)


def argmax_cost(length: int, plan: NumericPlan = DEFAULT_PLAN) -> PreprocBudget:
    return comparison_cost(max(length - 1, 0), plan)


def layer_budget(layers: tuple[Layer, ...] | list[Layer], input_shape, plan: NumericPlan = DEFAULT_PLAN) -> PreprocBudget:
    """Material needed to evaluate ``layers`` on one frame."""
    total = PreprocBudget()
    shape = tuple(input_shape)
    a = plan.frac_bits
    for layer in layers:
        out = output_shape(layer, shape)
        size = int(np.prod(out))
        if isinstance(layer, (Conv2D, Dense, AvgPool)):
            total = total + trunc_cost(size, a)
        elif isinstance(layer, ReLU):
            total = total + comparison_cost(size, plan)
        elif isinstance(layer, ApproxSoftmax):
            total = total + softmax_cost(size, plan)
        shape = out
    return total


def budget_for(model: ModelSpec, video_dims, n: int, classes: int | None = None, plan: NumericPlan = DEFAULT_PLAN) -> PreprocBudget:
    """Material for one full video classification with ``n`` selected frames.

    Frame selection itself is a ring-exact product and needs no material.
    """
    classes = model.classes if classes is None else classes
    if video_dims is not None and tuple(video_dims[1:]) != model.input_shape:
        raise ValueError(f"video frames {tuple(video_dims[1:])} do not match model input {model.input_shape}")
    return layer_budget(model.layers, model.input_shape, plan).scale(n) + argmax_cost(classes, plan)


# ---------------------------------------------------------------------------
# generation


def _bit_components(ks: Keystream, start: int, count: int) -> list[np.ndarray]:
    values = ks.bits("bits/value", count, start)
    return split_components(values, ks, "bits", start)


def _pair_components(ks: Keystream, shift: int, start: int, count: int) -> list[np.ndarray]:
    """Components with trailing axis (r, r >> shift, r >> 63)."""
    r = ks.words(f"pairs{shift}/r", count, start)
    cols = [r, r >> np.uint64(shift), r >> np.uint64(63)]
    per_col = [split_components(v, ks, f"pairs{shift}/{j}", start) for j, v in enumerate(cols)]
    return [np.stack([per_col[j][k] for j in range(3)], axis=-1) for k in range(3)]


class PreprocSource:
    """Per-party consumer interface used by the protocols."""

    party: int

    def take_bits(self, count: int) -> ShareTensor:
        raise NotImplementedError

    def take_pairs(self, count: int, shift: int) -> tuple[ShareTensor, ShareTensor, ShareTensor]:
        raise NotImplementedError

    @property
    def used(self) -> PreprocBudget:
        raise NotImplementedError


def _split_pair_share(share: ShareTensor) -> tuple[ShareTensor, ShareTensor, ShareTensor]:
    return share[..., 0], share[..., 1], share[..., 2]


class StreamingDealer(PreprocSource):
    """Generates this party's view of dealer material on demand.

    ``budget=None`` means unlimited, which is convenient in unit tests.
    """

    def __init__(self, seed, party: int, budget: PreprocBudget | None = None):
        self.party = check_party(party)
        self.ks = Keystream.from_seed(("preproc", seed))
        self.budget = budget
        self._bits = 0
        self._pairs: Counter = Counter()

    def take_bits(self, count: int) -> ShareTensor:
        if self.budget is not None and self._bits + count > self.budget.bits:
            raise BudgetExhaustedError(f"random bits exhausted: need {self._bits + count}, budget {self.budget.bits}")
        comps = _bit_components(self.ks, self._bits, count)
        self._bits += count
        return components_to_shares(comps)[self.party - 1]

    def take_pairs(self, count: int, shift: int):
        have = self._pairs[shift]
        if self.budget is not None and have + count > self.budget.pairs.get(shift, 0):
            raise BudgetExhaustedError(
                f"truncation pairs (shift {shift}) exhausted: need {have + count}, budget {self.budget.pairs.get(shift, 0)}"
            )
        comps = _pair_components(self.ks, shift, have, count)
        self._pairs[shift] += count
        return _split_pair_share(components_to_shares(comps)[self.party - 1])

    @property
    def used(self) -> PreprocBudget:
        return PreprocBudget(self._bits, dict(self._pairs))


class MaterialStore(PreprocSource):
    """Material loaded from a party's files; consumed front to back, never reused."""

    def __init__(self, party: int, bits: ShareTensor, pairs: dict[int, ShareTensor]):
        self.party = check_party(party)
        self._bits = bits
        self._pairs = pairs
        self._bit_cursor = 0
        self._pair_cursor: Counter = Counter()

    def take_bits(self, count: int) -> ShareTensor:
        end = self._bit_cursor + count
        if end > len(self._bits):
            raise BudgetExhaustedError(f"random bits exhausted: need {end}, have {len(self._bits)}")
        out = self._bits[self._bit_cursor:end]
        self._bit_cursor = end
        return out

    def take_pairs(self, count: int, shift: int):
        store = self._pairs.get(shift)
        have = 0 if store is None else len(store)
        end = self._pair_cursor[shift] + count
        if end > have:
            raise BudgetExhaustedError(f"truncation pairs (shift {shift}) exhausted: need {end}, have {have}")
        out = store[self._pair_cursor[shift]:end]
        self._pair_cursor[shift] = end
        return _split_pair_share(out)

    @property
    def used(self) -> PreprocBudget:
        return PreprocBudget(self._bit_cursor, dict(self._pair_cursor))

    @classmethod
    def load(cls, directory, party: int, session_id: bytes | None = None) -> "MaterialStore":
        directory = Path(directory)
        bits_file = load_share(bits_path(directory, party), role=Role.PREPROC_BITS, session_id=session_id, holder=party)
        pairs = {}
        for path in sorted(directory.glob(f"preproc-pairs-s*.p{party}.mpct")):
            sf = load_share(path, role=Role.PREPROC_PAIRS, session_id=session_id, holder=party)
            if sf.share.first.ndim != 2 or sf.share.shape[1] != 3:
                raise ContainerFormatError(f"{path}: pair material must have shape (count, 3)")
            pairs[sf.param] = sf.share
        return cls(party, bits_file.share, pairs)


def bits_path(directory, party: int) -> Path:
    return Path(directory) / f"preproc-bits.p{party}.mpct"


def pairs_path(directory, party: int, shift: int) -> Path:
    return Path(directory) / f"preproc-pairs-s{shift}.p{party}.mpct"


def dealer_generate(budget: PreprocBudget, seed, out_dir, session_id: bytes) -> list[Path]:
    """Write each party's material files; identical output for identical seeds."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    ks = Keystream.from_seed(("preproc", seed))
    written = []
    bit_views = components_to_shares(_bit_components(ks, 0, budget.bits))
    for view in bit_views:
        path = bits_path(out_dir, view.holder)
        save_share(path, ShareFile(view, session_id, Role.PREPROC_BITS))
        written.append(path)
    for shift, count in sorted(budget.pairs.items()):
        for view in components_to_shares(_pair_components(ks, shift, 0, count)):
            path = pairs_path(out_dir, view.holder, shift)
            save_share(path, ShareFile(view, session_id, Role.PREPROC_PAIRS, param=shift))
            written.append(path)
    return written


def dealers_for(seed, budget: PreprocBudget | None = None) -> list[StreamingDealer]:
    return [StreamingDealer(seed, i, budget) for i in PARTIES]
