"""Scenario-driven command line.

    qthermo --scenario run.json [--out DIR] [--seed N] [--set key=value ...] [--format text|json]

Writes ``scenario.json`` (the parsed scenario echoed back), ``result.json``,
``summary.txt`` and, for most kinds, one CSV file into the output directory.
The output directory defaults to ``$QTHERMO_OUT`` and then ``./qthermo-out``.

Exit codes: 0 success, 1 verify run with a breached tolerance, 2 schema
violation, 3 numerical rejection by the library, 4 I/O failure.
"""

import argparse
import csv
import json
import logging
import os
import sys

import numpy as np

from .baths import Contact, Drive, IdealBath, engine_bounds, run_cycle, thermalize
from .canonical import beta_for_energy, canonical_state
from .errors import QThermoError
from .interaction import energy_conserving_coupling, exchange_coupling
from .linalg import as_hermitian
from .passivity import (LevelSystem, extraction_report, is_completely_passive, is_n_passive,
                        min_failing_n, passive_form)
from .protocols import entropy_protocol, isothermal_drive
from .scenario import KINDS, Scenario, ScenarioError, apply_overrides, decode_matrix, parse
from .schedule import Schedule, Segment
from .states import density_matrix, from_spectrum
from .verify import verify_suite

ENV_OUT = "QTHERMO_OUT"
EXIT_OK, EXIT_FAILED, EXIT_SCHEMA, EXIT_NUMERIC, EXIT_IO = 0, 1, 2, 3, 4


class Artifacts:
    """What a scenario run produces: a flat result record, summary lines, optional CSV."""

    def __init__(self, result, lines, csv_name=None, csv_header=None, csv_rows=None, status=0):
        self.result = result
        self.lines = lines
        self.csv_name = csv_name
        self.csv_header = csv_header
        self.csv_rows = csv_rows or []
        self.status = status


def _fmt(x):
    return f"{x:.12g}"


def _num(x):
    return float(np.real(x))


def _state(spec, path) -> np.ndarray:
    if "matrix" in spec:
        return density_matrix(decode_matrix(spec["matrix"], f"{path}/matrix"))
    if "probabilities" in spec:
        basis = decode_matrix(spec["basis"], f"{path}/basis") if "basis" in spec else None
        return from_spectrum(spec["probabilities"], basis)
    H = decode_matrix(spec["hamiltonian"], f"{path}/hamiltonian")
    beta = spec["beta"] if "beta" in spec else beta_for_energy(H, spec["mean_energy"])
    return canonical_state(H, beta)


def _bath(spec, H_sys, path) -> IdealBath:
    A = decode_matrix(spec["ancilla_hamiltonian"], f"{path}/ancilla_hamiltonian")
    c = spec["coupling"]
    if isinstance(c, list):
        V = decode_matrix(c, f"{path}/coupling")
    elif "exchange" in c:
        V = exchange_coupling(H_sys, A, c["exchange"])
    else:
        V = energy_conserving_coupling(H_sys, A, seed=c["random_seed"])
        V = None if V is None else c.get("scale", 1.0) * V
    if V is None:
        raise QThermoError(f"{path}/coupling: system and ancilla share no resonant transition")
    return IdealBath(spec["beta"], A, V, spec["contact_time"],
                     spec.get("reuse_probability", 0.0), spec.get("mixing", 0.0))


def _schedule(segments, path) -> Schedule:
    out = []
    for i, seg in enumerate(segments):
        H = decode_matrix(seg["H"], f"{path}/{i}/H")
        H_end = decode_matrix(seg["H_end"], f"{path}/{i}/H_end") if "H_end" in seg else None
        out.append(Segment(seg["duration"], H, H_end))
    return Schedule(tuple(out))


def _run_ergotropy(sc: Scenario) -> Artifacts:
    p = sc.payload
    H = as_hermitian(decode_matrix(p["hamiltonian"], "$/payload/hamiltonian"), name="hamiltonian")
    rho = _state(p["state"], "$/payload/state")
    form = passive_form(rho, H)
    result = {"ergotropy": form.ergotropy, "passive_populations": form.populations.tolist(),
              "energies": form.energies.tolist()}
    lines = [f"ergotropy: {_fmt(form.ergotropy)}",
             "passive populations: " + ", ".join(_fmt(x) for x in form.populations)]
    art = Artifacts(result, lines)
    ex = p.get("extraction")
    if ex is not None:
        mode, tau = ex.get("mode", "piecewise"), ex.get("tau", 1.0)
        reports = [extraction_report(rho, H, tau, mode, n, sc.hbar)
                   for n in ex.get("steps", [1000])]
        result["extraction"] = reports
        cols = ("steps", "work", "ergotropy", "fidelity", "unitarity_drift")
        art.csv_name, art.csv_header = "extraction.csv", ("mode",) + cols
        art.csv_rows = [[r["mode"]] + [r[c] for c in cols] for r in reports]
        for r in reports:
            lines.append(f"extraction ({mode}, {r['steps']} steps): work {_fmt(r['work'])}, "
                         f"fidelity {_fmt(r['fidelity'])}")
    return art


def _run_passivity(sc: Scenario) -> Artifacts:
    p = sc.payload
    sys_ = LevelSystem(p["energies"], p["probabilities"])
    budget = p.get("max_compositions", 2_000_000)
    n_max = p.get("N_max", 5)
    rows, lines = [], []
    for N in range(1, n_max + 1):
        r = is_n_passive(sys_, N, budget)
        low, high = r.witness if r.witness is not None else (None, None)
        rows.append([N, bool(r), "" if low is None else " ".join(map(str, low)),
                     "" if high is None else " ".join(map(str, high))])
        lines.append(f"N={N}: {'passive' if r else 'not passive'}"
                     + ("" if r else f" (witness {tuple(low)} vs {tuple(high)})"))
    result = {"n_passive": {str(r[0]): r[1] for r in rows}}
    if rows[0][1]:
        m = min_failing_n(sys_, n_max, budget)
        result["min_failing_n"] = {"brute_force": m.brute_force, "predicted": m.predicted,
                                   "agree": m.agree}
        lines.append(f"smallest failing N <= {n_max}: {m.brute_force} "
                     f"(three-level prediction {m.predicted})")
    if np.all(sys_.probs > 0):
        cp = is_completely_passive(sys_)
        result["completely_passive"] = {"passive": cp.passive, "beta": cp.beta,
                                        "reason": cp.reason}
        lines.append("completely passive" + (f" at beta {_fmt(cp.beta)}" if cp else
                                             f": no ({cp.reason})"))
    return Artifacts(result, lines, "n_passivity.csv",
                     ("N", "passive", "witness_low", "witness_high"), rows)


def _run_thermalize(sc: Scenario) -> Artifacts:
    p = sc.payload
    H = as_hermitian(decode_matrix(p["hamiltonian"], "$/payload/hamiltonian"), name="hamiltonian")
    rho = _state(p["state"], "$/payload/state")
    bath = _bath(p["bath"], H, "$/payload/bath")
    tr = thermalize(rho, H, bath, p["collisions"], p.get("steps_per_collision", 1),
                    seed=sc.seed, hbar=sc.hbar)
    result = {"collisions": p["collisions"], "total_heat": tr.total_heat,
              "final_distance": float(tr.distance[-1]),
              "lyapunov_initial": float(tr.lyapunov[0]),
              "lyapunov_final": float(tr.lyapunov[-1]),
              "lyapunov_monotone": bool(np.all(np.diff(tr.lyapunov) <= 1e-10))}
    lines = [f"collisions: {p['collisions']}", f"heat into bath: {_fmt(tr.total_heat)}",
             f"trace distance to canonical: {_fmt(tr.distance[-1])}",
             f"Lyapunov G + beta<H>: {_fmt(tr.lyapunov[0])} -> {_fmt(tr.lyapunov[-1])}"]
    rows = [[n, tr.lyapunov[n], tr.heat[n - 1] if n else 0.0, tr.distance[n]]
            for n in range(len(tr.lyapunov))]
    return Artifacts(result, lines, "collisions.csv", tr.CSV_COLUMNS, rows)


def _run_isothermal(sc: Scenario) -> Artifacts:
    p = sc.payload
    path = _schedule(p["path"]["segments"], "$/payload/path/segments")
    res = isothermal_drive(path, p["beta"], p["steps"], keep_history=True)
    result = {"work": res.work, "heat": res.heat, "ideal_work": res.ideal_work,
              "discretization_error": res.discretization_error,
              "delta_energy": res.delta_energy, "delta_gibbs": res.delta_gibbs}
    lines = [f"work: {_fmt(res.work)}", f"ideal work: {_fmt(res.ideal_work)}",
             f"discretization error: {_fmt(res.discretization_error)}",
             f"heat into bath: {_fmt(res.heat)}"]
    rows = [[int(r[0])] + list(r[1:]) for r in res.history]
    return Artifacts(result, lines, "isothermal.csv", res.CSV_COLUMNS, rows)


def _run_entropy_protocol(sc: Scenario) -> Artifacts:
    p = sc.payload
    res = entropy_protocol(
        _state(p["state"], "$/payload/state"),
        decode_matrix(p["hamiltonian_initial"], "$/payload/hamiltonian_initial"),
        _state(p["target_state"], "$/payload/target_state"),
        decode_matrix(p["hamiltonian_final"], "$/payload/hamiltonian_final"),
        p["temperature"], p.get("steps", 10_000), p.get("mode", "direct"),
        k=sc.k, hbar=sc.hbar, stage_time=p.get("stage_time", 1.0),
        stage_steps=p.get("stage_steps", 2000), keep_history=True)
    result = {"mode": res.mode, "total_heat_Q": res.total_heat_Q,
              "temperature_T": res.temperature_T,
              "entropy_diff_estimate": res.entropy_diff_estimate,
              "entropy_diff_reference": res.entropy_diff_reference, "error": res.error,
              "total_work": res.total_work, "stage_fidelities": list(res.stage_fidelities),
              "final_distance": res.final_distance}
    lines = [f"heat into bath Q: {_fmt(res.total_heat_Q)}",
             f"-Q/T: {_fmt(res.entropy_diff_estimate)}",
             f"S(rho') - S(rho): {_fmt(res.entropy_diff_reference)}",
             f"difference: {_fmt(res.error)}"]
    if res.mode == "schedule":
        lines.append("stage fidelities: " + ", ".join(_fmt(f) for f in res.stage_fidelities))
    rows = [[int(r[0])] + list(r[1:]) for r in res.isothermal.history]
    return Artifacts(result, lines, "isothermal_stage.csv", res.isothermal.CSV_COLUMNS, rows)


def _run_cycle(sc: Scenario) -> Artifacts:
    p = sc.payload
    H0 = as_hermitian(decode_matrix(p["hamiltonian"], "$/payload/hamiltonian"), name="hamiltonian")
    rho0 = _state(p["state"], "$/payload/state")
    plan, H = [], H0
    for i, step in enumerate(p["plan"]):
        where = f"$/payload/plan/{i}"
        if "drive" in step:
            sched = _schedule(step["drive"]["segments"], f"{where}/drive/segments")
            plan.append(Drive(sched, step["drive"].get("steps", 100)))
            H = sched.end()
        else:
            c = step["contact"]
            plan.append(Contact(_bath(c["bath"], H, f"{where}/contact/bath"),
                                c.get("collisions", 1), c.get("steps", 1)))
    ledger = run_cycle(plan, rho0, H0, hbar=sc.hbar, seed=sc.seed)
    result = {"clausius_sum": ledger.clausius_sum, "net_work": ledger.net_work,
              "total_heat": ledger.total_heat, "closure_error": ledger.closure_error,
              "closed": ledger.closed, "hamiltonian_closed": ledger.hamiltonian_closed,
              "open_cycle_bound": -ledger.gibbs_drop,
              "energy_residual": ledger.energy_residual,
              "contacts": [[b, q] for b, q in ledger.contacts]}
    lines = [f"Clausius sum sum(beta dQ): {_fmt(ledger.clausius_sum)}",
             f"net work on system: {_fmt(ledger.net_work)}",
             f"closure error: {_fmt(ledger.closure_error)}"
             + (" (closed)" if ledger.closed else " (open; bound G_f - G_0 = "
                + _fmt(-ledger.gibbs_drop) + ")")]
    try:
        eb = engine_bounds(ledger)
    except QThermoError as exc:
        lines.append(f"engine bounds: not applicable ({exc})")
    else:
        result["engine"] = {"efficiency": eb.efficiency, "carnot_bound": eb.carnot_bound,
                            "margin": eb.margin}
        lines.append(f"efficiency {_fmt(eb.efficiency)} vs bound {_fmt(eb.carnot_bound)}")
    rows = [[i, b, q] for i, (b, q) in enumerate(ledger.contacts)]
    return Artifacts(result, lines, "contacts.csv", ("contact", "beta", "heat_into_bath"), rows)


def _run_verify(sc: Scenario) -> Artifacts:
    p = sc.payload
    rep = verify_suite(sc.seed, p.get("trials", 100), p.get("dims", [2, 3, 4]),
                       p.get("tolerances"))
    rec = rep.record
    lines = []
    rows = []
    for name in sorted(rec["checks"]):
        c = rec["checks"][name]
        ok = c["passed"] == c["trials"]
        lines.append(f"{name}: {c['passed']}/{c['trials']} "
                     f"worst margin {c['worst_margin']:.3e} {'PASS' if ok else 'FAIL'}")
        rows.append([name, c["trials"], c["passed"], c["worst_margin"], c["tolerance"]])
    lines.append(f"runtime: {rep.runtime:.2f} s")
    return Artifacts(rec, lines, "checks.csv",
                     ("check", "trials", "passed", "worst_margin", "tolerance"), rows,
                     status=EXIT_OK if rep.all_passed else EXIT_FAILED)


RUNNERS = {
    "ergotropy": _run_ergotropy,
    "passivity": _run_passivity,
    "thermalize": _run_thermalize,
    "isothermal": _run_isothermal,
    "entropy_protocol": _run_entropy_protocol,
    "cycle": _run_cycle,
    "verify": _run_verify,
}
assert set(RUNNERS) == set(KINDS)


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating, complex, np.complexfloating)):
        return _num(x)
    return x


def _csv_cell(x):
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return x


def _write(out_dir, sc: Scenario, art: Artifacts):
    os.makedirs(out_dir, exist_ok=True)
    record = {"kind": sc.kind, "seed": sc.seed, "result": _jsonable(art.result)}
    with open(os.path.join(out_dir, "scenario.json"), "w", encoding="utf-8") as fh:
        fh.write(sc.to_json() + "\n")
    with open(os.path.join(out_dir, "result.json"), "w", encoding="utf-8") as fh:
        json.dump(record, fh, indent=2, sort_keys=True)
        fh.write("\n")
    summary = "\n".join([f"kind: {sc.kind}", f"seed: {sc.seed}"] + art.lines) + "\n"
    with open(os.path.join(out_dir, "summary.txt"), "w", encoding="utf-8") as fh:
        fh.write(summary)
    if art.csv_name:
        with open(os.path.join(out_dir, art.csv_name), "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(art.csv_header)
            for row in art.csv_rows:
                w.writerow([_csv_cell(x) for x in row])
    return record, summary


def run(scenario_path, output_dir=None, overrides=(), seed=None, fmt="text", stream=None) -> int:
    """Run one scenario file and write its artifacts; returns the exit status."""
    stream = sys.stdout if stream is None else stream
    output_dir = output_dir or os.environ.get(ENV_OUT) or "qthermo-out"
    try:
        with open(scenario_path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        print(f"error: cannot read scenario: {exc}", file=sys.stderr)
        return EXIT_IO
    try:
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ScenarioError(f"invalid JSON: {exc}") from exc
        if seed is not None:
            doc["seed"] = seed
        sc = parse(apply_overrides(doc, overrides))
    except ScenarioError as exc:
        print(f"schema error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    try:
        art = RUNNERS[sc.kind](sc)
    except ScenarioError as exc:
        print(f"schema error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except (ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    try:
        record, summary = _write(output_dir, sc, art)
    except OSError as exc:
        print(f"error: cannot write output: {exc}", file=sys.stderr)
        return EXIT_IO
    if fmt == "json":
        stream.write(json.dumps(record, indent=2, sort_keys=True) + "\n")
    else:
        stream.write(summary)
    return art.status


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="qthermo", description="Run a qthermo scenario file.")
    ap.add_argument("--scenario", required=True, metavar="PATH", help="scenario JSON file")
    ap.add_argument("--out", metavar="DIR",
                    help=f"output directory (default: ${ENV_OUT} or ./qthermo-out)")
    ap.add_argument("--seed", type=int, metavar="N", help="override the scenario seed")
    ap.add_argument("--set", dest="overrides", action="append", default=[],
                    metavar="KEY=VALUE", help="override a payload field (dotted path, repeatable)")
    ap.add_argument("--format", choices=("text", "json"), default="text",
                    help="what to print on stdout")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s")
    return run(args.scenario, args.out, args.overrides, args.seed, args.format)


if __name__ == "__main__":
    sys.exit(main())
