"""Finite vocabularies, embodied languages, extensions and weakness.

States of an environment are indexed ``0 .. size-1`` and every program is a
bitset over those indices, held in a Python ``int``.  Statements are sorted
tuples of program indices; a language keeps its statements sorted so that
membership is a binary search.
"""
from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence

import numpy as np

MAX_STATES = 1 << 24
MAX_ENUM_PROGRAMS = 20
MAX_SURVIVAL_BITS = 62


class CapacityError(ValueError):
    """An enumeration would exceed the configured size guard."""


@dataclass(frozen=True)
class StateUniverse:
    size: int

    def __post_init__(self):
        if self.size < 1:
            raise ValueError(f"universe size must be >= 1, got {self.size}")

    @property
    def full(self) -> int:
        return (1 << self.size) - 1


@dataclass(frozen=True)
class Program:
    bits: int
    size: int

    def __post_init__(self):
        if self.bits < 0 or self.bits >> self.size:
            raise ValueError("program bitset does not fit its universe")

    @classmethod
    def from_states(cls, states: Iterable[int], size: int) -> "Program":
        bits = 0
        for s in states:
            if not 0 <= s < size:
                raise ValueError(f"state {s} outside universe of size {size}")
            bits |= 1 << s
        return cls(bits, size)

    def states(self) -> list[int]:
        return bitset_members(self.bits)


def bitset_members(bits: int) -> list[int]:
    out = []
    i = 0
    while bits:
        if bits & 1:
            out.append(i)
        bits >>= 1
        i += 1
    return out


@dataclass(frozen=True)
class Vocabulary:
    programs: tuple[Program, ...]
    universe: StateUniverse

    def __post_init__(self):
        object.__setattr__(self, "programs", tuple(self.programs))
        seen = set()
        for p in self.programs:
            if p.size != self.universe.size:
                raise ValueError("program sized to a different universe")
            if p.bits in seen:
                raise ValueError("duplicate program in vocabulary")
            seen.add(p.bits)

    def __len__(self) -> int:
        return len(self.programs)


@dataclass(frozen=True, order=True)
class Statement:
    program_indices: tuple[int, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "program_indices", tuple(sorted(set(self.program_indices))))

    @property
    def mask(self) -> int:
        m = 0
        for i in self.program_indices:
            m |= 1 << i
        return m

    def __len__(self) -> int:
        return len(self.program_indices)

    def issubset(self, other: "Statement") -> bool:
        return set(self.program_indices) <= set(other.program_indices)

    def to_json(self) -> list[int]:
        return list(self.program_indices)


def _check_indices(s: Statement, v: Vocabulary) -> None:
    for i in s.program_indices:
        if not 0 <= i < len(v):
            raise ValueError(f"program index {i} out of range for vocabulary of size {len(v)}")


def truth_set(s: Statement, v: Vocabulary) -> int:
    """Intersection of the statement's programs; the empty statement gives every state."""
    _check_indices(s, v)
    bits = v.universe.full
    for i in s.program_indices:
        bits &= v.programs[i].bits
    return bits


def is_statement(s: Statement, v: Vocabulary) -> bool:
    return truth_set(s, v) != 0


class Language(Sequence):
    """The consistent subsets of a vocabulary, sorted for O(log n) membership."""

    def __init__(self, statements: Iterable[Statement], vocabulary: Vocabulary):
        self.statements = sorted(statements)
        self.vocabulary = vocabulary
        self._masks = [s.mask for s in self.statements]

    def __len__(self) -> int:
        return len(self.statements)

    def __getitem__(self, i):
        return self.statements[i]

    def __iter__(self) -> Iterator[Statement]:
        return iter(self.statements)

    def __contains__(self, s) -> bool:
        i = bisect.bisect_left(self.statements, s)
        return i < len(self.statements) and self.statements[i] == s

    def index(self, s) -> int:
        i = bisect.bisect_left(self.statements, s)
        if i < len(self.statements) and self.statements[i] == s:
            return i
        raise ValueError("statement not in language")

    def extension_masks(self, x: Statement) -> list[int]:
        xm = x.mask
        return [m for m in self._masks if xm & ~m == 0]

    def to_json(self) -> list[list[int]]:
        return [s.to_json() for s in self.statements]


def enumerate_language(v: Vocabulary, max_programs: int = MAX_ENUM_PROGRAMS) -> Language:
    """All consistent subsets of ``v``, including the empty statement.

    Consistency is closed under taking subsets, so a depth-first walk that
    extends statements one program at a time in index order and prunes on an
    empty truth set visits every statement exactly once.
    """
    if len(v) > max_programs:
        raise CapacityError(f"vocabulary has {len(v)} programs; enumeration is capped at {max_programs}")
    bits = [p.bits for p in v.programs]
    out: list[Statement] = []
    stack: list[tuple[int, tuple[int, ...], int]] = [(0, (), v.universe.full)]
    while stack:
        start, idx, ts = stack.pop()
        out.append(Statement(idx))
        for j in range(start, len(bits)):
            t = ts & bits[j]
            if t:
                stack.append((j + 1, idx + (j,), t))
    return Language(out, v)


def _require_member(x: Statement, language: Language) -> None:
    if x not in language:
        raise ValueError(f"{x.program_indices} is not a statement of the language")


def extension(x: Statement, language: Language) -> list[Statement]:
    _require_member(x, language)
    xm = x.mask
    return [s for s, m in zip(language.statements, language._masks) if xm & ~m == 0]


def weakness(x: Statement, language: Language) -> int:
    _require_member(x, language)
    return len(language.extension_masks(x))


def extension_of_set(xs: Iterable[Statement], language: Language) -> set[int]:
    """Union of extensions, as a set of statement masks."""
    out: set[int] = set()
    for x in xs:
        _require_member(x, language)
        out.update(language.extension_masks(x))
    return out


@dataclass(frozen=True)
class Task:
    inputs: frozenset
    outputs: frozenset
    language: Language = field(compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "inputs", frozenset(self.inputs))
        object.__setattr__(self, "outputs", frozenset(self.outputs))
        if not self.inputs:
            raise ValueError("a task needs at least one input statement")
        ext_in = extension_of_set(self.inputs, self.language)
        for o in self.outputs:
            if o.mask not in ext_in or o not in self.language:
                raise ValueError(f"output {o.program_indices} lies outside Ext(inputs)")

    def input_extension(self) -> set[int]:
        return extension_of_set(self.inputs, self.language)

    def unseen(self) -> set[int]:
        """Statements of the language outside the inputs' extension."""
        ext_in = self.input_extension()
        return {m for m in self.language._masks if m not in ext_in}


def correct_policies(task: Task, language: Language) -> list[Statement]:
    """Every ``pi`` with ``Ext(inputs) & Ext(pi) == outputs``."""
    ext_in = task.input_extension()
    out_masks = {o.mask for o in task.outputs}
    return [pi for pi in language if set(language.extension_masks(pi)) & ext_in == out_masks]


def buffer_size(policy: Statement, task: Task) -> int:
    """|Ext(policy) & U| with U the statements outside Ext(inputs)."""
    ext_in = task.input_extension()
    return sum(1 for m in task.language.extension_masks(policy) if m not in ext_in)


def survival_probability(buffer_size: int, unseen_size: int) -> float:
    """Chance a uniformly drawn demand set S of the unseen region lands inside the buffer."""
    b, u = buffer_size, unseen_size
    if not 0 <= b <= u <= MAX_SURVIVAL_BITS:
        raise ValueError(f"need 0 <= b <= u <= {MAX_SURVIVAL_BITS}, got b={b}, u={u}")
    return math.ldexp(1.0, b - u)


@dataclass(frozen=True)
class MonteCarloEstimate:
    estimate: float
    hits: int
    n_samples: int
    seed: int

    @property
    def stderr(self) -> float:
        p = self.estimate
        return math.sqrt(p * (1 - p) / self.n_samples)


def survival_mc(buffer: Iterable[int], unseen: Iterable[int], n_samples: int, seed: int) -> MonteCarloEstimate:
    """Monte-Carlo survival under the uniform demand model.

    ``S`` is drawn uniformly from the power set of ``unseen`` (every element
    kept independently with probability 1/2) and the policy survives when
    ``S`` is a subset of ``buffer``.
    """
    unseen = sorted(set(unseen))
    buffer = set(buffer)
    if not buffer <= set(unseen):
        raise ValueError("buffer must be a subset of the unseen region")
    u = len(unseen)
    if u > MAX_SURVIVAL_BITS:
        raise ValueError(f"unseen region larger than {MAX_SURVIVAL_BITS}")
    outside = 0
    for pos, elem in enumerate(unseen):
        if elem not in buffer:
            outside |= 1 << pos
    rng = np.random.Generator(np.random.PCG64(seed))
    draws = rng.integers(0, 1 << u, size=n_samples, dtype=np.uint64) if u else np.zeros(n_samples, np.uint64)
    hits = int(np.count_nonzero((draws & np.uint64(outside)) == 0))
    return MonteCarloEstimate(hits / n_samples, hits, n_samples, seed)


def kl_uniform(total_measure: float, buffer_measure: float) -> float:
    """KL divergence of the uniform posterior on the buffer from the uniform prior."""
    if not 0 < buffer_measure <= total_measure or not math.isfinite(total_measure):
        raise ValueError(f"need 0 < B <= L < inf, got L={total_measure}, B={buffer_measure}")
    return math.log(total_measure) - math.log(buffer_measure)


def region_class_vocab(n_regions: int, n_classes: int) -> Vocabulary:
    """Programs ``p[r, c]`` = total region->class maps sending region ``r`` to ``c``.

    State ``s`` encodes the map ``g`` with ``g(r) = (s // K**r) % K``; program
    ``r*K + c`` is ``p[r, c]``.
    """
    R, K = n_regions, n_classes
    if R < 1 or K < 1:
        raise ValueError("need at least one region and one class")
    if K ** R > MAX_STATES:
        raise CapacityError(f"K^R = {K ** R} states exceeds the guard of {MAX_STATES}")
    n_states = K ** R
    states = np.arange(n_states, dtype=np.int64)
    programs = []
    for r in range(R):
        digit = (states // K ** r) % K
        for c in range(K):
            packed = np.packbits(digit == c, bitorder="little")
            programs.append(Program(int.from_bytes(packed.tobytes(), "little"), n_states))
    return Vocabulary(tuple(programs), StateUniverse(n_states))


def region_class_statement(assignment: dict[int, int], n_classes: int) -> Statement:
    """Statement for a partial region->class map."""
    return Statement(tuple(r * n_classes + c for r, c in assignment.items()))
