"""Extended marked point processes on a finite scenario tree.

Piece ``i`` of information is innovated at time ``T_{2i-1}`` and deleted at
time ``T_{2i}``; both times carry the same mark ``Z_{2i-1} = Z_{2i}``.  Odd
indices therefore label innovations and even indices label deletions.  All
randomness sits on a finite grid ``t_0 = 0 < t_1 < ... < t_N``; events happen
at ``t_1, ..., t_N`` only, so nothing is observable at ``t_0``.

A tree node is the full event history up to a grid time, stored as a tuple of
composite events (one frozenset of elementary events per completed step).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence, Union

NULL_MARK = ""
PROB_TOL = 1e-12
INF = math.inf


class ModelError(ValueError):
    """A scenario model or path violates one of its structural invariants."""

    def __init__(self, invariant: str, node=None, detail: str = ""):
        self.invariant = invariant
        self.node = node
        where = "" if node is None else f" at node {format_history(node)}"
        msg = f"invariant '{invariant}' violated{where}"
        if detail:
            msg += f": {detail}"
        super().__init__(msg)



def fmt_float(x) -> str:
    """Shortest round-trip text of a number (numpy scalars print as plain floats)."""
    return repr(float(x))

@dataclass(frozen=True, order=True)
class Innovation:
    """Piece ``piece`` becomes observable with mark ``mark``."""

    piece: int
    mark: str

    @property
    def index(self) -> int:
        return 2 * self.piece - 1

    def __str__(self):
        return f"+{self.piece}:{self.mark}"


@dataclass(frozen=True, order=True)
class Deletion:
    """Active piece ``piece`` is erased."""

    piece: int

    @property
    def index(self) -> int:
        return 2 * self.piece

    def __str__(self):
        return f"-{self.piece}"


Elementary = Union[Innovation, Deletion]
EMPTY = frozenset()


def composite(*events: Elementary) -> frozenset:
    return frozenset(events)


def _sort_key(ev):
    return (ev.index, getattr(ev, "mark", ""))


def format_event(event: frozenset) -> str:
    if not event:
        return "{}"
    return "{" + ",".join(str(e) for e in sorted(event, key=_sort_key)) + "}"


def format_history(history) -> str:
    return "[" + " ".join(format_event(e) for e in history) + "]"


TransitionLaw = Union[Mapping[tuple, Sequence[tuple]], Callable[[tuple], Sequence[tuple]]]


@dataclass(frozen=True, eq=False)
class ScenarioModel:
    """Finite probability tree generating extended marked point process paths.

    Parameters
    ----------
    grid : sequence of float
        Strictly increasing time points, ``grid[0] == 0``.
    marks : sequence of str
        The finite mark space; the null symbol ``""`` is reserved.
    max_pieces : int
        Pieces are numbered ``1..max_pieces``.
    transition_law : mapping or callable
        Maps a history (tuple of composite events) to a list of
        ``(composite_event, probability)`` pairs for the next grid time.
        Histories missing from a mapping move to the empty event with
        probability one.
    horizon : float, optional
        Final grid time; defaults to ``grid[-1]``.
    """

    grid: tuple
    marks: tuple
    max_pieces: int
    transition_law: TransitionLaw
    horizon: float = None
    name: str = "model"
    notes: str = ""
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        grid = tuple(float(t) for t in self.grid)
        if len(grid) < 2:
            raise ModelError("grid is finite with at least one step", detail=f"got {len(grid)} points")
        if grid[0] != 0.0:
            raise ModelError("grid starts at 0", detail=f"t_0 = {grid[0]}")
        if any(not math.isfinite(t) for t in grid):
            raise ModelError("grid is finite", detail="non-finite grid time")
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise ModelError("grid is strictly increasing")
        object.__setattr__(self, "grid", grid)
        marks = tuple(str(m) for m in self.marks)
        if NULL_MARK in marks:
            raise ModelError("marks avoid the null symbol")
        if len(set(marks)) != len(marks):
            raise ModelError("marks are distinct")
        object.__setattr__(self, "marks", marks)
        if int(self.max_pieces) < 0:
            raise ModelError("max_pieces is non-negative")
        object.__setattr__(self, "max_pieces", int(self.max_pieces))
        if self.horizon is None:
            object.__setattr__(self, "horizon", grid[-1])
        elif float(self.horizon) != grid[-1]:
            raise ModelError("horizon is the final grid time", detail=f"{self.horizon} != {grid[-1]}")

    @property
    def n_steps(self) -> int:
        return len(self.grid) - 1

    def step_of(self, t) -> int:
        """Grid index of time ``t``; rejects off-grid times."""
        for k, g in enumerate(self.grid):
            if g == t:
                return k
        raise ModelError("time lies on the grid", detail=f"t = {t}")

    def outcomes(self, history: tuple) -> list:
        law = self.transition_law
        if callable(law):
            out = law(history)
        else:
            out = law.get(history)
        if out is None:
            return [(EMPTY, 1.0)]
        return [(frozenset(ev), float(p)) for ev, p in out]


@dataclass
class _NodeState:
    innovated: dict  # piece -> (step, mark)
    deleted: dict  # piece -> step

    def active(self, piece):
        return piece in self.innovated and piece not in self.deleted


def _validate_outcomes(model: ScenarioModel, history, outcomes, state: _NodeState):
    total = 0.0
    seen = set()
    for ev, p in outcomes:
        if not (p >= 0.0) or not math.isfinite(p):
            raise ModelError("probabilities are finite and non-negative", history, f"p = {p}")
        total += p
        if ev in seen:
            raise ModelError("composite events at a node are distinct", history, format_event(ev))
        seen.add(ev)
        if p == 0.0:
            continue
        pieces_inn, pieces_del = set(), set()
        for e in ev:
            if not isinstance(e, (Innovation, Deletion)):
                raise ModelError("events are innovations or deletions", history, repr(e))
            if not 1 <= e.piece <= model.max_pieces:
                raise ModelError("pieces lie in 1..max_pieces", history, str(e))
            if isinstance(e, Innovation):
                if e.mark not in model.marks:
                    raise ModelError("innovation marks lie in the mark space", history, str(e))
                if e.piece in state.innovated or e.piece in pieces_inn:
                    raise ModelError("each piece is innovated at most once", history, str(e))
                pieces_inn.add(e.piece)
            else:
                if not state.active(e.piece):
                    raise ModelError("deletion only of active pieces", history, str(e))
                pieces_del.add(e.piece)
        both = pieces_inn & pieces_del
        if both:
            raise ModelError("no instantaneous deletion", history, f"piece {min(both)}")
    if abs(total - 1.0) > PROB_TOL:
        raise ModelError("distribution sums to 1", history, f"sum = {total!r}")


@dataclass(frozen=True)
class PathRecord:
    """One realized path of the tree.

    ``events[k-1]`` is the composite event at grid time ``t_k``.  ``times``
    holds ``(T_{2i-1}, T_{2i})`` for each piece and ``marks`` its mark (the
    null symbol if never innovated).
    """

    grid: tuple
    events: tuple
    probability: float
    times: tuple
    marks: tuple

    @property
    def n_steps(self):
        return len(self.events)

    def T(self, index: int) -> float:
        piece = (index + 1) // 2
        inn, dele = self.times[piece - 1]
        return inn if index % 2 else dele

    def Z(self, index: int) -> str:
        return self.marks[(index + 1) // 2 - 1]

    def innovation_step(self, piece: int):
        t = self.times[piece - 1][0]
        return None if t == INF else self.grid.index(t)

    def deletion_step(self, piece: int):
        t = self.times[piece - 1][1]
        return None if t == INF else self.grid.index(t)


def _make_path(model: ScenarioModel, history: tuple, prob: float) -> PathRecord:
    K = model.max_pieces
    inn = [INF] * K
    dele = [INF] * K
    mk = [NULL_MARK] * K
    for k, ev in enumerate(history, start=1):
        for e in ev:
            if isinstance(e, Innovation):
                inn[e.piece - 1] = model.grid[k]
                mk[e.piece - 1] = e.mark
            else:
                dele[e.piece - 1] = model.grid[k]
    return PathRecord(
        grid=model.grid,
        events=history,
        probability=prob,
        times=tuple(zip(inn, dele)),
        marks=tuple(mk),
    )


def _advance(state: _NodeState, ev, k) -> _NodeState:
    innovated = dict(state.innovated)
    deleted = dict(state.deleted)
    for e in ev:
        if isinstance(e, Innovation):
            innovated[e.piece] = (k, e.mark)
        else:
            deleted[e.piece] = k
    return _NodeState(innovated, deleted)


def enumerate_paths(model: ScenarioModel) -> list:
    """Every positive-probability path of the tree, in depth-first order.

    Raises
    ------
    ModelError
        Naming the violated invariant and the offending node.
    """
    N = model.n_steps
    paths = []
    stack = [((), 1.0, _NodeState({}, {}))]
    while stack:
        history, prob, state = stack.pop()
        k = len(history)
        if k == N:
            paths.append(_make_path(model, history, prob))
            continue
        outs = model.outcomes(history)
        _validate_outcomes(model, history, outs, state)
        children = []
        for ev, p in outs:
            if p > 0.0:
                children.append((history + (ev,), prob * p, _advance(state, ev, k + 1)))
        stack.extend(reversed(children))
    return paths


def iter_nodes(model: ScenarioModel) -> Iterable:
    """Yield ``(history, probability)`` for every positive-probability node."""
    stack = [((), 1.0)]
    N = model.n_steps
    while stack:
        history, prob = stack.pop()
        yield history, prob
        if len(history) < N:
            for ev, p in model.outcomes(history):
                if p > 0.0:
                    stack.append((history + (ev,), prob * p))


@dataclass(frozen=True)
class InformationState:
    """The admissible observation: active odd indices ``M`` and marks ``Z_M``."""

    active_set: tuple = ()
    active_marks: tuple = ()

    def __post_init__(self):
        if len(self.active_set) != len(self.active_marks):
            raise ModelError("one mark per active index")
        if any(i % 2 == 0 or i < 1 for i in self.active_set):
            raise ModelError("active indices are odd")
        if any(m == NULL_MARK for m in self.active_marks):
            raise ModelError("active marks are non-null")

    @property
    def key(self) -> tuple:
        return tuple(zip(self.active_set, self.active_marks))

    def __str__(self):
        if not self.active_set:
            return "{}"
        return "{" + ",".join(f"{i}:{m}" for i, m in self.key) + "}"


def information_state(path: PathRecord, t: float, side: str = "right") -> InformationState:
    """Active pieces at ``t`` from the half-open interval conventions.

    ``side='right'`` gives the state generating ``G_t``
    (``T_{2i-1} <= t < T_{2i}``); ``side='left'`` the state generating
    ``G_t^-`` (``T_{2i-1} < t <= T_{2i}``).
    """
    if t not in path.grid:
        raise ModelError("time lies on the grid", detail=f"t = {t}")
    if side not in ("right", "left"):
        raise ValueError(f"side must be 'right' or 'left', got {side!r}")
    if side == "left" and t == 0:
        raise ModelError("left state requires t > 0")
    M, Z = [], []
    for i, (inn, dele) in enumerate(path.times, start=1):
        if side == "right":
            on = inn <= t < dele
        else:
            on = inn < t <= dele
        if on:
            M.append(2 * i - 1)
            Z.append(path.marks[i - 1])
    return InformationState(tuple(M), tuple(Z))


def path_event_key(path: PathRecord, k: int):
    """``(I, e)`` of the event at step ``k`` on ``path`` or ``None``."""
    ev = path.events[k - 1]
    if not ev:
        return None
    I = tuple(sorted(e.index for e in ev))
    return I, tuple(path.Z(i) for i in I)


@dataclass(frozen=True, order=True)
class Atom:
    time: float
    index_set: tuple
    marks: tuple
    mass: float = 1.0
    step: int = 0

    @property
    def key(self):
        return (self.step, self.index_set, self.marks)


@dataclass(frozen=True)
class MeasureAtoms:
    """A random measure restricted to one path as a finite atom list."""

    kind: str
    atoms: tuple = ()
    flags: tuple = ()

    def __post_init__(self):
        atoms = tuple(sorted(self.atoms, key=lambda a: (a.step, a.index_set, a.marks)))
        keys = [a.key for a in atoms]
        if len(set(keys)) != len(keys):
            raise ModelError("atom keys are unique", detail=self.kind)
        if self.kind == "mu" and any(a.mass != 1.0 for a in atoms):
            raise ModelError("counting atoms have unit mass")
        object.__setattr__(self, "atoms", atoms)

    def __len__(self):
        return len(self.atoms)

    def __iter__(self):
        return iter(self.atoms)

    def as_dict(self) -> dict:
        return {a.key: a.mass for a in self.atoms}

    def total_mass(self, upto_step=None) -> float:
        return sum(a.mass for a in self.atoms if upto_step is None or a.step <= upto_step)

    def mass(self, step, I, e) -> float:
        return self.as_dict().get((step, tuple(I), tuple(e)), 0.0)

    def rows(self):
        for a in self.atoms:
            yield {
                "time": a.time,
                "index_set": " ".join(map(str, a.index_set)),
                "marks": " ".join(a.marks),
                "mass": a.mass,
                "kind": self.kind,
            }


@dataclass(frozen=True)
class JointEventRecord:
    """``R_I = (Q_I, Z_I)`` for one realized index set ``I``."""

    index_set: tuple
    time: float
    marks: tuple


def counting_measure_atoms(path: PathRecord) -> MeasureAtoms:
    """Atoms of the counting measures ``mu_I``, read off the random times.

    At each finite time ``u`` the index set is the exact set of indices whose
    times equal ``u``.
    """
    by_time: dict = {}
    for piece, (inn, dele) in enumerate(path.times, start=1):
        for idx, t in ((2 * piece - 1, inn), (2 * piece, dele)):
            if t != INF:
                by_time.setdefault(t, []).append(idx)
    atoms = []
    for t, idx in by_time.items():
        I = tuple(sorted(idx))
        atoms.append(Atom(t, I, tuple(path.Z(i) for i in I), 1.0, path.grid.index(t)))
    return MeasureAtoms("mu", tuple(atoms))


def joint_events(path: PathRecord) -> list:
    return [JointEventRecord(a.index_set, a.time, a.marks) for a in counting_measure_atoms(path)]


def validate_path(path: PathRecord):
    for piece, (inn, dele) in enumerate(path.times, start=1):
        if dele != INF and not inn < dele:
            raise ModelError("no instantaneous deletion", detail=f"piece {piece}")
        for t in (inn, dele):
            if t != INF and t not in path.grid:
                raise ModelError("times lie on the grid", detail=f"piece {piece}")
