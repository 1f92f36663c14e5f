"""Command-line front end: run scenario files and write CSV / JSON reports.

Exit codes are 0 on success, 2 for invalid input and 3 for numerical
failures; errors are also printed to stderr as a one-line JSON object.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .errors import NumericalError, ValidationError
from .full import integrate_full, neutral_scalar_observables
from .model import TRAIT_NAMES, basic_reproduction_numbers, first_order_r0_score, neutral_equilibrium, realize_traits
from .outcomes import detect_persistent_set, exclusion_scores, pairwise_outcome_matrix, predict_exclusion_winner
from .scenarios import Scenario, bundled_names, load_scenario, variant_names
from .slow import integrate_replicator, invasion_fitness
from .validation import compare_reduction, epsilon_scaling_study, project_slow

FLOAT_FMT = "%.17g"


def _provenance(sc: Scenario, command: str, solver) -> dict:
    return {
        "tool": "quasineutral",
        "version": __version__,
        "command": command,
        "scenario": sc.name,
        "variant": sc.variant,
        "scenario_label": sc.provenance,
        "scenario_sha256": sc.digest(),
        "solver": solver.as_dict(),
    }


def _strain_labels(n):
    return [str(i + 1) for i in range(n)]


def _equilibrium_dict(eq) -> dict:
    return {
        "S_star": eq.s_star,
        "T_star": eq.t_star,
        "I_star": eq.i_star,
        "D_star": eq.d_star,
        "mu": eq.mu,
        "xi": eq.xi,
        "det_P": eq.det_p,
        "Theta": eq.theta_total,
        "Theta_d": [float(x) for x in eq.theta_raw],
        "theta_d": [float(x) for x in eq.theta_norm],
    }


def _report_outcome(sc: Scenario, taus, zs) -> dict:
    an = sc.analysis
    return detect_persistent_set(taus, zs, an.threshold, an.window, an.amp_tol).as_dict()


def _cell(x) -> str:
    if isinstance(x, str):
        return x
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return FLOAT_FMT % x


class Output:
    """Collects tables and a JSON report and writes them to ``out_dir``."""

    def __init__(self, out_dir: Path, stem: str, fmt: str, provenance: dict):
        self.out_dir = out_dir
        self.stem = stem
        self.fmt = fmt
        self.provenance = provenance
        self.written = []

    def table(self, columns: list[str], rows, notes: list[str]):
        """CSV with '# ' comment lines (provenance, column notes) above the column names."""
        if self.fmt not in ("csv", "both"):
            return
        path = self.out_dir / f"{self.stem}.csv"
        lines = ["# provenance: " + json.dumps(self.provenance, sort_keys=True)]
        lines += ["# " + note for note in notes]
        lines.append(",".join(columns))
        lines += [",".join(_cell(x) for x in row) for row in rows]
        path.write_text("\n".join(lines) + "\n")
        self.written.append(str(path))

    def report(self, body: dict):
        if self.fmt not in ("json", "both"):
            return
        path = self.out_dir / f"{self.stem}.json"
        doc = {"provenance": self.provenance, **body}
        path.write_text(json.dumps(doc, sort_keys=True, indent=2, allow_nan=False) + "\n")
        self.written.append(str(path))


def _full_columns(n):
    cols = ["t", "S"] + [f"I_{i}" for i in _strain_labels(n)]
    cols += [f"I_{i}_{j}" for i in _strain_labels(n) for j in _strain_labels(n)]
    return cols + ["T", "I", "D", "mass"]


def cmd_simulate_full(sc: Scenario, args, out: Output):
    t_end = args.t_end or sc.t_end
    if t_end is None:
        if sc.tau_end is None or sc.epsilon == 0:
            raise ValidationError("simulate-full needs horizons.t_end (or tau_end with epsilon > 0)")
        t_end = sc.tau_end / sc.epsilon
    sp = realize_traits(sc.neutral, sc.perturbations, sc.epsilon)
    samples = args.samples or sc.analysis.samples
    traj = integrate_full(sc.initial(), sp, sc.neutral, t_end, sc.solver, samples=samples)
    tid = np.array([neutral_scalar_observables(traj.state(k)) for k in range(len(traj))])
    rows = np.column_stack([traj.times, traj.y, tid, traj.mass])
    out.table(_full_columns(sc.n), rows, [
        "columns: time, susceptible, single colonization I_i, ordered double colonization I_i_j "
        "(first index acquired first), totals T = I + D, I, D and total mass",
    ])
    final = traj.final
    T, I, D = neutral_scalar_observables(final)
    out.report({
        "epsilon": sc.epsilon,
        "t_end": t_end,
        "final": {
            "S": final.s,
            "I_single": final.i_single.tolist(),
            "I_double": final.i_double.tolist(),
            "T": T, "I": I, "D": D, "mass": final.mass,
        },
        "R0_i": basic_reproduction_numbers(sp, sc.neutral).tolist(),
        "trajectory": {"t": traj.times.tolist(), "y": traj.y.tolist()},
    })


def _reduced(sc: Scenario, tau_end, samples):
    eq = neutral_equilibrium(sc.neutral, sc.perturbations.mask)
    lam = invasion_fitness(sc.perturbations, eq)
    traj = integrate_replicator(sc.initial_frequencies(), lam, eq.theta_total, tau_end, sc.solver, samples=samples)
    return eq, lam, traj


def _tau_end(sc, args, key="tau_end"):
    tau_end = args.tau_end or getattr(sc, key) or sc.tau_end
    if tau_end is None:
        raise ValidationError("no slow-time horizon: set horizons.tau_end or pass --tau-end")
    return tau_end


def cmd_simulate_reduced(sc: Scenario, args, out: Output):
    tau_end = _tau_end(sc, args)
    eq, lam, traj = _reduced(sc, tau_end, args.samples or sc.analysis.samples)
    cols = ["tau"] + [f"z_{i}" for i in _strain_labels(sc.n)]
    out.table(cols, np.column_stack([traj.taus, traj.z]), ["columns: slow time tau = eps t, strain frequencies z_i"])
    out.report({
        "equilibrium": _equilibrium_dict(eq),
        "Lambda": lam.lam.tolist(),
        "max_simplex_drift": traj.max_drift,
        "outcome": _report_outcome(sc, traj.taus, traj.z),
        "trajectory": {"tau": traj.taus.tolist(), "z": traj.z.tolist()},
    })


def cmd_compare(sc: Scenario, args, out: Output):
    if not sc.epsilon > 0:
        raise ValidationError("compare needs epsilon > 0")
    tau_end = _tau_end(sc, args, "compare_tau_end")
    samples = args.samples or sc.analysis.samples
    cfg = sc.solver.tightened(1e-2)
    cmp = compare_reduction(sc.neutral, sc.perturbations, sc.epsilon, sc.initial(), tau_end, samples, cfg)
    eq = neutral_equilibrium(sc.neutral, sc.perturbations.mask)
    sp = realize_traits(sc.neutral, sc.perturbations, sc.epsilon)
    z_full = np.array([project_slow(cmp.full.state(k), sp, eq).z for k in range(len(cmp.full))])
    labels = _strain_labels(sc.n)
    cols = ["tau", "t", "S"] + [f"I_{i}" for i in labels] + [f"zfull_{i}" for i in labels]
    cols += [f"zred_{i}" for i in labels] + ["error"]
    rows = np.column_stack([cmp.taus, cmp.full.times, cmp.full.s, cmp.full.i_single, z_full, cmp.reduced.z, cmp.errors])
    out.table(cols, rows, [
        "columns: slow time tau, full time t = tau/eps, full-system S and I_i, frequencies projected "
        "from the full system, replicator frequencies, and the manifold error norm",
        f"burn-in t = {cmp.t_burn!r}, first tau = {cmp.tau0!r}",
    ])
    out.report({
        "epsilon": sc.epsilon,
        "tau0": cmp.tau0,
        "t_burn": cmp.t_burn,
        "z0": cmp.z0.tolist(),
        "max_error": cmp.max_error,
        "errors": cmp.errors.tolist(),
        "tau": cmp.taus.tolist(),
        "outcome_reduced": _report_outcome(sc, cmp.taus, cmp.reduced.z),
        "outcome_full": _report_outcome(sc, cmp.taus, z_full),
    })


def cmd_classify(sc: Scenario, args, out: Output):
    tau_end = _tau_end(sc, args)
    eq, lam, traj = _reduced(sc, tau_end, args.samples or sc.analysis.samples)
    L = lam.lam
    table = pairwise_outcome_matrix(L)
    rows, names = [], []
    for i in range(sc.n):
        for j in range(i + 1, sc.n):
            rows.append([i + 1, j + 1, L[i, j], L[j, i]])
            names.append(table[i][j].value if table[i][j] else "Undetermined")
    report = {
        "equilibrium": _equilibrium_dict(eq),
        "active_traits": {str(d): TRAIT_NAMES[d] for d in sorted(sc.perturbations.mask)},
        "Lambda": L.tolist(),
        "pairwise": [
            {"i": int(r[0]), "j": int(r[1]), "lambda_i_j": r[2], "lambda_j_i": r[3], "outcome": name}
            for r, name in zip(rows, names)
        ],
        "outcome": _report_outcome(sc, traj.taus, traj.z),
    }
    pert = sc.perturbations
    if pert.mask <= {1, 2}:
        score = exclusion_scores(pert, eq)
        report["exclusion_scores"] = score.tolist()
        try:
            report["predicted_winner"] = predict_exclusion_winner(pert, eq) + 1
        except ValidationError as exc:
            report["predicted_winner"] = None
            report["predicted_winner_note"] = str(exc)
        r0 = first_order_r0_score(sc.neutral, pert)
        report["first_order_R0_score"] = r0.tolist()
        report["largest_R0_strain"] = int(np.argmax(r0)) + 1
    out.table(
        ["i", "j", "lambda_i_j", "lambda_j_i", "outcome"],
        [r + [name] for r, name in zip(rows, names)],
        ["columns: strain pair (i, j), invasion fitness of i into j and of j into i, pairwise outcome"],
    )
    out.report(report)


def cmd_scaling(sc: Scenario, args, out: Output):
    tau_end = _tau_end(sc, args, "compare_tau_end")
    epsilons = args.epsilons or list(sc.analysis.scaling_epsilons)
    cfg = sc.solver.tightened(1e-2)
    rep = epsilon_scaling_study(
        sc.neutral, sc.perturbations, sc.initial(), epsilons, tau_end,
        samples=args.samples or 101, cfg=cfg, threads=args.threads,
    )
    out.table(["epsilon", "error"], np.column_stack([rep.epsilons, rep.errors]),
              [f"columns: epsilon, max manifold error over tau; fitted slope {rep.fitted_slope!r}"])
    out.report({"tau_end": tau_end, "scaling": rep.as_dict()})


COMMANDS = {
    "simulate-full": cmd_simulate_full,
    "simulate-reduced": cmd_simulate_reduced,
    "compare": cmd_compare,
    "classify": cmd_classify,
    "scaling": cmd_scaling,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="quasineutral",
        description="Full and slow-manifold simulations of quasi-neutral multi-strain coinfection.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("list", help="list bundled scenarios and their variants")
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--scenario", required=True, help=f"scenario file or bundled name ({', '.join(bundled_names())})")
        p.add_argument("--variant", help="named variant within the scenario")
        p.add_argument("--epsilon", type=float, help="override the perturbation magnitude")
        p.add_argument("--t-end", type=float, help="full-time horizon")
        p.add_argument("--tau-end", type=float, help="slow-time horizon")
        p.add_argument("--out", default=".", help="output directory (default: current)")
        p.add_argument("--format", choices=("csv", "json", "both"), default="both")
        p.add_argument("--samples", type=int, help="number of output samples")
        p.add_argument("--seed", type=int, help="seed for random perturbations (overrides the file)")
        p.add_argument("--threads", type=int, default=1, help="worker processes for the scaling study")
        if name == "scaling":
            p.add_argument("--epsilons", type=float, nargs="+", help="epsilon values to study")
    return parser


def _fail(kind: str, message: str, code: int) -> int:
    print(json.dumps({"error": kind, "message": message, "exit_code": code}), file=sys.stderr)
    return code


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "list":
        for name in bundled_names():
            variants = variant_names(name)
            print(name + (f"  variants: {', '.join(variants)}" if variants else ""))
        return 0
    try:
        if args.samples is not None and args.samples < 2:
            raise ValidationError("--samples must be >= 2")
        if args.threads < 1:
            raise ValidationError("--threads must be >= 1")
        if args.seed is not None and args.seed < 0:
            raise ValidationError("--seed must be >= 0")
        overrides = {} if args.epsilon is None else {"epsilon": args.epsilon}
        sc = load_scenario(args.scenario, args.variant, args.seed, overrides)
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        stem = sc.name + (f"-{args.variant}" if args.variant else "") + f"-{args.command}"
        solver = sc.solver if args.command in ("simulate-full", "simulate-reduced", "classify") else sc.solver.tightened(1e-2)
        out = Output(out_dir, stem, args.format, _provenance(sc, args.command, solver))
        COMMANDS[args.command](sc, args, out)
    except ValidationError as exc:
        return _fail("ValidationError", str(exc), 2)
    except NumericalError as exc:
        return _fail(type(exc).__name__, str(exc), 3)
    except OSError as exc:
        return _fail("OSError", str(exc), 2)
    for path in out.written:
        print(path)
    return 0


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
