"""Command-line front end.

::

    imr <enumerate|verify|simulate|app> --model <file> --out <dir>
        [--seed N] [--n-paths N] [--tol X] [--app thiele|markov|location]
        [--target name] [--levels N]

Every command writes ``manifest.json`` echoing its inputs.  The exit status
is 0 when all residual and tolerance checks hold, 1 when one fails and 2 on
input errors.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys

import numpy as np

from . import __version__
from .document import DocumentError, load_document
from .engine import ExactEngine
from .expr import Expression
from .measures import TimeMeasure, sojourn_compensator
from .model import ModelError, enumerate_paths, format_event, fmt_float, information_state
from .montecarlo import (
    SimulationConfig,
    estimate_projection,
    partition_sum_diagnostic,
    simulate_paths,
    state_label,
    write_diagnostics_csv,
    write_estimates_csv,
)
from .representation import verify_representation_process, verify_representation_xi


def write_manifest(args, extra=None):
    flags = {k: v for k, v in sorted(vars(args).items()) if k not in ("command", "model", "out", "func")}
    doc = {
        "command": args.command,
        "model": args.model,
        "out": args.out,
        "seed": args.seed,
        "flags": flags,
        "version": __version__,
    }
    if extra:
        doc.update(extra)
    with open(os.path.join(args.out, "manifest.json"), "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_summary(args, lines):
    text = "\n".join(lines) + "\n"
    with open(os.path.join(args.out, "summary.txt"), "w") as fh:
        fh.write(text)
    sys.stdout.write(text)


# ------------------------------------------------------------------ commands


def cmd_enumerate(args, doc) -> int:
    model = doc.model
    paths = enumerate_paths(model)
    K = model.max_pieces
    with open(os.path.join(args.out, "paths.csv"), "w", newline="") as fh:
        wr = csv.writer(fh)
        head = ["path_id", "probability", "events"]
        for i in range(1, K + 1):
            head += [f"T{2 * i - 1}", f"T{2 * i}", f"Z{2 * i - 1}"]
        wr.writerow(head)
        for r, p in enumerate(paths):
            row = [r, fmt_float(p.probability), " ".join(format_event(e) for e in p.events)]
            for (a, b), z in zip(p.times, p.marks):
                row += [fmt_float(a), fmt_float(b), z]
            wr.writerow(row)
    with open(os.path.join(args.out, "states.csv"), "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["path_id", "t", "side", "active_set", "marks"])
        for r, p in enumerate(paths):
            for k, t in enumerate(model.grid):
                for side in ("right", "left"):
                    if side == "left" and k == 0:
                        continue
                    st = information_state(p, t, side)
                    wr.writerow([r, fmt_float(t), side, " ".join(map(str, st.active_set)), " ".join(st.active_marks)])
    total = sum(p.probability for p in paths)
    write_manifest(args)
    write_summary(args, [f"paths: {len(paths)}", f"total probability: {fmt_float(total)}"])
    return 0 if abs(total - 1.0) <= 1e-12 else 1


def _pick_target(args, doc, kinds):
    if args.target:
        name = args.target.split(":", 1)[-1]
        if name not in doc.payoffs:
            raise DocumentError(f"unknown target {args.target!r}; known: {sorted(doc.payoffs)}")
        return doc.payoffs[name]
    for p in doc.payoffs.values():
        if p.kind in kinds:
            return p
    return None


def cmd_verify(args, doc) -> int:
    tol = 1e-10 if args.tol is None else args.tol
    target = _pick_target(args, doc, ("xi", "process", "sojourn"))
    if target is None:
        raise DocumentError("no payoff to verify; add one under 'payoffs'")
    eng = ExactEngine(doc.model)
    side = args.drift_side
    if target.kind == "xi":
        result = verify_representation_xi(eng, target.xi())
        label = f"xi:{target.name}"
    elif target.kind == "process":
        result = verify_representation_process(eng, target.process(), side)
        label = f"process:{target.name} ({side} drift)"
    else:
        led = sojourn_compensator(eng, target.rate(), TimeMeasure(target.lebesgue, target.diracs))
        X, drift = (led.X_ib, led.drift_ib) if side == "IB" else (led.X_if, led.drift_if)
        result = verify_representation_process(eng, X, side, drift)
        label = f"sojourn:{target.name} ({side} drift)"
    result.write_csv(os.path.join(args.out, "representation_report.csv"))
    worst = result.max_residual
    ib_max = max(float(np.max(np.abs(r.ib_integral))) for r in result.reports)
    write_manifest(args)
    ok = worst <= tol
    write_summary(args, [
        f"target: {label}",
        f"paths: {eng.n_paths}",
        f"max |residual|: {fmt_float(worst)}",
        f"max |ib_integral|: {fmt_float(ib_max)}",
        f"tolerance: {fmt_float(tol)}",
        f"status: {'ok' if ok else 'RESIDUAL BREACH'}",
    ])
    return 0 if ok else 1


def _jump_count(path, k):
    return float(sum(1 for ev in path.events[:k] if ev))


def cmd_simulate(args, doc) -> int:
    model = doc.model
    cfg = SimulationConfig(args.seed, args.n_paths)
    sample = simulate_paths(model, cfg)
    target = _pick_target(args, doc, ("xi",))
    xi = target.xi() if target is not None else (lambda p: _jump_count(p, model.n_steps))
    known = None
    exact = None
    if args.exact:
        eng = ExactEngine(model)
        known = {k: sorted({eng.table.states[s] for s in eng.table.state_ids[:, k]})
                 for k in range(model.n_steps + 1)}
        proj = eng.partition_projection(xi)
        exact = {}
        for k in range(model.n_steps + 1):
            for r, s in enumerate(eng.table.state_ids[:, k]):
                exact[(k, eng.table.states[s])] = proj[r, k]
    rows = estimate_projection(model, cfg, xi, sample, known)
    write_estimates_csv(os.path.join(args.out, "estimates.csv"), rows)
    seng = sample.engine()
    X = seng.process(_jump_count)
    diags = [partition_sum_diagnostic(sample, X, side, args.levels) for side in ("forward", "backward")]
    write_diagnostics_csv(os.path.join(args.out, "diagnostics.csv"), diags, seng.w)
    lines = [
        f"paths simulated: {len(sample)}",
        f"distinct paths: {len(sample.leaves)}",
        f"target: {target.name if target else 'jump count at horizon'}",
        f"cells: {sum(1 for r in rows if not r.absent)} visited, {sum(1 for r in rows if r.absent)} absent",
        f"mean jump count: {fmt_float(float(np.dot(seng.w, X[:, -1]) / seng.w.sum()))}",
    ]
    status = 0
    if exact is not None:
        inside = [abs(r.estimate - exact[(r.step, r.state_key)]) <= 5 * r.stderr + 1e-12
                  for r in rows if not r.absent]
        frac = sum(inside) / max(1, len(inside))
        lines.append(f"within 5 standard errors of exact: {frac:.4f}")
        status = 0 if frac >= 0.99 else 1
    write_manifest(args)
    write_summary(args, lines)
    return status


def _rate(spec, default=0.0):
    if spec is None:
        return default
    if isinstance(spec, (int, float)):
        return float(spec)
    e = Expression(str(spec))
    return lambda t: e({"t": t})


def cmd_app(args, doc) -> int:
    app = args.app
    if app is None:
        raise DocumentError("--app is required for the app command")
    cfg = doc.applications.get(app)
    if cfg is None:
        raise DocumentError(f"applications.{app}: section missing from the model document")
    model = doc.model
    tol = 1e-9 if args.tol is None else args.tol
    lines = [f"application: {app}"]
    ok = True
    if app == "thiele":
        from .applications.thiele import InsuranceContract, thiele_reserve

        c = cfg.get("contract", {})
        contract = InsuranceContract(_rate(c.get("a")), _rate(c.get("b")), _rate(c.get("phi")), c.get("T"))
        res = thiele_reserve(model, contract)
        res.write_csv(args.out)
        term = float(np.max(np.abs(res.terminal_reserve)))
        ok = res.max_residual <= tol and term == 0.0 and res.benefits_self_compensating
        lines += [
            f"max |ledger residual|: {fmt_float(res.max_residual)}",
            f"max |terminal reserve|: {fmt_float(term)}",
            f"benefits are their own IB-compensator: {res.benefits_self_compensating}",
            f"initial reserve: {fmt_float(float(res.reserve[0, 0]))}",
        ]
    elif app == "markov":
        from .applications.markov import MarkovApproxSpec, markov_gap

        f = Expression(cfg.get("f", "1"))
        res = markov_gap(model, MarkovApproxSpec(lambda y, n: f({"y": y, "n": n})))
        res.write_csv(args.out, model.grid)
        ok = res.representation.max_residual <= tol and res.state_vs_admissible <= 1e-12
        lines += [
            f"max |gap| full history vs state: {fmt_float(res.max_gap)}",
            f"max |state-only - admissible|: {fmt_float(res.state_vs_admissible)}",
            f"max |representation residual|: {fmt_float(res.representation.max_residual)}",
        ]
    elif app == "location":
        from .applications.location import LocationSpec, location_predictor, retention_sweep

        spec = LocationSpec(int(cfg.get("delta", model.meta.get("delta", 1))), int(cfg["h"]), tuple(cfg["A"]))
        if model.meta.get("delta") not in (None, spec.delta):
            raise DocumentError("applications.location.delta differs from the model's retention limit")
        res = location_predictor(model, spec)
        res.write_csv(args.out, model.grid)
        ok = res.max_residual <= tol
        ib = float(np.max(np.abs(res.component("ib_integral"))))
        lines += [f"max |residual|: {fmt_float(res.max_residual)}", f"max |ib component|: {fmt_float(ib)}"]
        sweep = cfg.get("sweep")
        if sweep:
            params = {k: v for k, v in (cfg.get("model_params") or {}).items() if k != "delta"}
            rows = retention_sweep(sweep, spec, **params)
            with open(os.path.join(args.out, "location_sweep.csv"), "w", newline="") as fh:
                wr = csv.writer(fh)
                wr.writerow(["delta", "ib_magnitude", "max_residual"])
                for d, mag, resid in rows:
                    wr.writerow([d, fmt_float(mag), fmt_float(resid)])
                    ok = ok and resid <= tol
            lines += [f"sweep delta={d}: ib magnitude {fmt_float(mag)}" for d, mag, _ in rows]
    else:
        raise DocumentError(f"unknown application {app!r}")
    lines.append(f"status: {'ok' if ok else 'CHECK FAILED'}")
    write_manifest(args)
    write_summary(args, lines)
    return 0 if ok else 1


COMMANDS = {
    "enumerate": cmd_enumerate,
    "verify": cmd_verify,
    "simulate": cmd_simulate,
    "app": cmd_app,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="imr", description=__doc__.split("\n")[0])
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--model", required=True, help="model document (JSON)")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n-paths", type=int, default=100_000)
    p.add_argument("--tol", type=float, default=None)
    p.add_argument("--app", choices=["thiele", "markov", "location"])
    p.add_argument("--target", help="payoff name, optionally prefixed xi: or process:")
    p.add_argument("--levels", type=int, default=3)
    p.add_argument("--drift-side", choices=["IB", "IF"], default="IB")
    p.add_argument("--exact", action="store_true", help="simulate: compare against enumeration")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        doc = load_document(args.model)
        os.makedirs(args.out, exist_ok=True)
        return COMMANDS[args.command](args, doc)
    except (DocumentError, ModelError, OSError) as exc:
        print(f"imr: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
