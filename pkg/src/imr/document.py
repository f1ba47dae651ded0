"""JSON model documents.

A document has the sections ``meta``, ``grid``, ``marks``, ``pieces``,
``transitions``, ``payoffs`` and ``applications``.  Instead of an explicit
transition table a document may name a ``builder`` with parameters (used
for the larger application models).

Transition entries are keyed by the canonical history, a sorted list of
``[step, event]`` entries with events ``["innovate", piece, mark]`` or
``["delete", piece]``; ``step`` says how many grid steps the node has
completed.  Nodes missing from the table move to the empty event.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .expr import Expression, ExpressionError, path_env, step_env
from .generators import full_information_model, random_model
from .model import Deletion, Innovation, ModelError, ScenarioModel, enumerate_paths


class DocumentError(ValueError):
    """Parse or validation failure, with the location inside the document."""


def _builders():
    from .applications.location import location_model
    from .applications.markov import jump_chain_model
    from .applications.thiele import thiele_model

    return {
        "thiele_model": thiele_model,
        "jump_chain_model": jump_chain_model,
        "location_model": location_model,
        "random_model": random_model,
        "full_information_model": full_information_model,
    }


def parse_event(raw, where) -> object:
    if not isinstance(raw, list) or not raw:
        raise DocumentError(f"{where}: event must be a non-empty list, got {raw!r}")
    kind = raw[0]
    try:
        if kind == "innovate":
            _, piece, mark = raw
            return Innovation(int(piece), str(mark))
        if kind == "delete":
            _, piece = raw
            return Deletion(int(piece))
    except (TypeError, ValueError):
        pass
    raise DocumentError(f"{where}: malformed event {raw!r}")


def dump_event(ev) -> list:
    if isinstance(ev, Innovation):
        return ["innovate", ev.piece, ev.mark]
    return ["delete", ev.piece]


def history_from_entries(entries, step, where) -> tuple:
    slots = [set() for _ in range(step)]
    for j, entry in enumerate(entries):
        if not isinstance(entry, list) or len(entry) != 2:
            raise DocumentError(f"{where}.history[{j}]: expected [step, event]")
        k, raw = entry
        if not isinstance(k, int) or not 1 <= k <= step:
            raise DocumentError(f"{where}.history[{j}]: step {k!r} outside 1..{step}")
        slots[k - 1].add(parse_event(raw, f"{where}.history[{j}]"))
    return tuple(frozenset(s) for s in slots)


def canonical_history(history) -> list:
    """Sorted ``[step, event]`` entries of a history tuple."""
    out = []
    for k, ev in enumerate(history, start=1):
        for e in ev:
            out.append([k, dump_event(e)])
    return sorted(out, key=lambda x: (x[0], x[1][0], x[1][1], str(x[1][2:])))


@dataclass
class ModelDocument:
    model: ScenarioModel
    payoffs: dict = field(default_factory=dict)
    applications: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)
    source: str = ""


def _table_model(doc, name) -> ScenarioModel:
    for key in ("grid", "marks", "pieces"):
        if key not in doc:
            raise DocumentError(f"missing section {key!r}")
    law = {}
    for i, entry in enumerate(doc.get("transitions", [])):
        where = f"transitions[{i}]"
        try:
            step = int(entry["step"])
            history = history_from_entries(entry.get("history", []), step, where)
            outs = []
            for j, o in enumerate(entry["outcomes"]):
                ev = frozenset(parse_event(e, f"{where}.outcomes[{j}]") for e in o.get("events", []))
                outs.append((ev, float(o["prob"])))
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, DocumentError):
                raise
            raise DocumentError(f"{where}: {exc!r}") from None
        if history in law:
            raise DocumentError(f"{where}: duplicate history")
        law[history] = outs
    try:
        model = ScenarioModel(tuple(doc["grid"]), tuple(doc["marks"]), int(doc["pieces"]), law,
                              horizon=doc.get("horizon"), name=name, notes=doc.get("meta", {}).get("notes", ""))
        enumerate_paths(model)  # validates every node of the table
    except ModelError as exc:
        raise DocumentError(f"transitions: {exc}") from None
    return model


def load_document(path) -> ModelDocument:
    with open(path) as fh:
        text = fh.read()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise DocumentError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    return document_from_dict(doc, source=str(path))


def document_from_dict(doc: dict, source="") -> ModelDocument:
    meta = doc.get("meta", {})
    name = meta.get("name", "model")
    if "builder" in doc:
        b = doc["builder"]
        builders = _builders()
        if b.get("name") not in builders:
            raise DocumentError(f"builder: unknown builder {b.get('name')!r}")
        try:
            model = builders[b["name"]](**b.get("params", {}))
        except (TypeError, ModelError) as exc:
            raise DocumentError(f"builder: {exc}") from None
    else:
        model = _table_model(doc, name)
    payoffs = {}
    for pname, spec in doc.get("payoffs", {}).items():
        try:
            payoffs[pname] = Payoff.from_spec(pname, spec)
        except (ExpressionError, KeyError) as exc:
            raise DocumentError(f"payoffs.{pname}: {exc}") from None
    return ModelDocument(model, payoffs, doc.get("applications", {}), meta, source)


def model_to_dict(model: ScenarioModel) -> dict:
    """Explicit transition table of a (finite) model."""
    from .model import iter_nodes

    rows = []
    for history, _ in iter_nodes(model):
        if len(history) == model.n_steps:
            continue
        outs = model.outcomes(history)
        if len(outs) == 1 and not outs[0][0] and outs[0][1] == 1.0:
            continue
        rows.append({
            "step": len(history),
            "history": canonical_history(history),
            "outcomes": [{"events": sorted((dump_event(e) for e in ev), key=str), "prob": p}
                         for ev, p in outs],
        })
    return {
        "meta": {"name": model.name},
        "grid": list(model.grid),
        "marks": list(model.marks),
        "pieces": model.max_pieces,
        "horizon": model.horizon,
        "transitions": rows,
    }


@dataclass
class Payoff:
    """Named payoff from a document.

    ``kind`` is ``xi`` (terminal variable over ``T_i``, ``Z_i``), ``process``
    (also uses ``t``, ``k``, ``active``) or ``sojourn`` (a rate accumulated
    against a time measure).
    """

    name: str
    kind: str
    expr: Expression
    lebesgue: bool = True
    diracs: tuple = ()

    @classmethod
    def from_spec(cls, name, spec):
        if isinstance(spec, str):
            spec = {"kind": "xi", "expr": spec}
        kind = spec.get("kind", "xi")
        if kind not in ("xi", "process", "sojourn"):
            raise ExpressionError(f"unknown payoff kind {kind!r}")
        key = "rate" if kind == "sojourn" else "expr"
        return cls(name, kind, Expression(spec[key]), bool(spec.get("lebesgue", True)),
                   tuple(tuple(d) for d in spec.get("diracs", ())))

    def xi(self):
        return lambda path: self.expr(path_env(path))

    def process(self):
        return lambda path, k: self.expr(step_env(path, k))

    def rate(self):
        def h(path, M, k):
            env = step_env(path, k)
            env["m"] = len(M)
            env["active"] = lambda i: 1.0 if int(i) in M else 0.0
            return self.expr(env)

        return h
