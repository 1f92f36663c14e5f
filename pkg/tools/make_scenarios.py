"""Regenerate the bundled scenario files.

The exclusion scenarios use published trait values. The others need u and
omega matrices that were never published, so this script builds them from
small deterministic designs; rerunning it reproduces the committed files.
"""

import argparse
import json
from pathlib import Path

import numpy as np

PUBLISHED = "published-values"
DESIGNED = "designed-values, not published"

B_EXCLUSION = [0.25, -0.2, 0.125, -0.125, 0.075, 0.225, 0.05, -0.5, -0.175, 0]
NU_EXCLUSION = [1, 0.8, -1.5, -0.5, 0.3, -1, 1.2, -2, 0.7, -2]
ANALYSIS = {"threshold": 1e-3, "window": None, "amp_tol": 1e-3, "samples": 201}
SOLVER = {"rtol": 1e-8, "atol": 1e-10}
SCALING = [0.1, 0.05, 0.025, 0.0125]
# 0-based indices of strains 2, 4, 7
COEXISTING = [1, 3, 6]


def fmt(obj, ind=0):
    """JSON with one matrix row per line."""
    pad = "  " * ind
    if isinstance(obj, dict):
        items = [f"{pad}  {json.dumps(k)}: {fmt(v, ind + 1).lstrip()}" for k, v in obj.items()]
        return pad + "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(obj, list) and obj and isinstance(obj[0], list):
        rows = [pad + "  " + json.dumps(r) for r in obj]
        return pad + "[\n" + ",\n".join(rows) + "\n" + pad + "]"
    return pad + json.dumps(obj)


def block_clearance(diag_in, off_in, seed=None):
    """Low mutual clearance inside the coexisting group, high elsewhere."""
    u = np.full((10, 10), 2.0)
    np.fill_diagonal(u, 3.0)
    for i in COEXISTING:
        for j in COEXISTING:
            u[i, j] = diag_in if i == j else off_in
    if seed is not None:
        u = np.round(u + np.random.default_rng(seed).uniform(-0.1, 0.1, (10, 10)), 3)
    return u


def scenarios():
    u3 = block_clearance(1.0, 0.0, seed=3)

    # zero-sum omega: pairwise contrasts W(3,6) = -0.76, W(3,7) = -1.66, W(7,6) = 1.54
    om5 = np.zeros((10, 10))
    for i, j, w in [(2, 5, -0.76), (2, 6, -1.66), (6, 5, 1.54)]:
        om5[i, j], om5[j, i] = w / 2, -w / 2

    # rock-paper-scissors among strains 2, 4, 7
    om6 = np.zeros((10, 10))
    for i, j in [(1, 3), (3, 6), (6, 1)]:
        om6[i, j], om6[j, i] = 0.5, -0.5

    yield "fig-exclusion-a", {
        "schema_version": 1, "name": "fig-exclusion-a",
        "description": "Ten strains differing only in transmission rate; the strain with the largest b excludes the rest.",
        "provenance": PUBLISHED, "neutral": {"beta": 4, "gamma": 1, "r": 1, "k": 1.5}, "n": 10, "mask": [1],
        "perturbations": {"b": B_EXCLUSION}, "epsilon": 0.05, "initial": {"frequencies": "uniform"},
        "horizons": {"t_end": 10000, "tau_end": 500, "compare_tau_end": 50}, "solver": SOLVER,
        "analysis": dict(ANALYSIS, scaling_epsilons=SCALING),
    }
    yield "fig-exclusion-b", {
        "schema_version": 1, "name": "fig-exclusion-b",
        "description": "Ten strains differing in transmission and single clearance; strain 6 wins although strain 10 has the largest R0.",
        "provenance": PUBLISHED, "neutral": {"beta": 4, "gamma": 1, "r": 1, "k": 1.5}, "n": 10, "mask": [1, 2],
        "perturbations": {"b": B_EXCLUSION, "nu": NU_EXCLUSION}, "epsilon": 0.05, "initial": {"frequencies": "uniform"},
        "horizons": {"t_end": 20000, "tau_end": 1000, "compare_tau_end": 50}, "solver": SOLVER,
        "analysis": dict(ANALYSIS, scaling_epsilons=SCALING),
    }
    yield "fig-a3", {
        "schema_version": 1, "name": "fig-a3",
        "description": "Variation in co-colonization clearance only. Strains 2, 4, 7 have the lowest mutual clearance and coexist; k changes only the speed.",
        "provenance": DESIGNED, "neutral": {"R0": 2, "gamma": 1, "r": 1, "k": 1}, "n": 10, "mask": [3],
        "perturbations": {"u": u3.tolist()}, "epsilon": 0.05, "initial": {"frequencies": "uniform"},
        "horizons": {"t_end": 10000, "tau_end": 500, "compare_tau_end": 50}, "solver": SOLVER,
        "analysis": ANALYSIS,
        "variants": {"k0.2": {"neutral": {"k": 0.2}}, "k1": {"neutral": {"k": 1}}, "k5": {"neutral": {"k": 5}}},
    }
    yield "fig-a4", {
        "schema_version": 1, "name": "fig-a4",
        "description": "Variation in transmission and co-colonization clearance: small k favours the largest b (strain 8), large k the low-clearance group 2, 4, 7.",
        "provenance": DESIGNED, "neutral": {"R0": 5, "gamma": 0.5, "r": 0.3, "k": 1}, "n": 10, "mask": [1, 3],
        "perturbations": {"b": [0, -0.2, 0.125, -0.125, 0.225, 0.75, 0.5, 1.25, -0.175, 0], "u": (2 * u3).round(3).tolist()},
        "epsilon": 0.05, "initial": {"frequencies": "uniform"},
        "horizons": {"t_end": 40000, "tau_end": 2000, "compare_tau_end": 50}, "solver": SOLVER,
        "analysis": ANALYSIS,
        "variants": {"k0.1": {"neutral": {"k": 0.1}}, "k1": {"neutral": {"k": 1}}, "k3": {"neutral": {"k": 3}}},
    }
    yield "fig-a5", {
        "schema_version": 1, "name": "fig-a5",
        "description": "Variation in transmission and mixed-carriage transmission (zero-sum). mu = 0.6 gives a rock-paper-scissors cycle among strains 3, 6, 7; mu = 1.2 lets strain 3 exclude all others.",
        "provenance": DESIGNED, "neutral": {"beta": 3, "gamma": 1.2, "r": 0.3, "mu": 0.6}, "n": 10, "mask": [1, 4],
        "perturbations": {"b": [0.3, -0.8, 2.4, -0.5, 0.9, 2, 1.2, 1, -0.7, 0.5], "omega": om5.round(3).tolist()},
        "epsilon": 0.05, "initial": {"frequencies": "uniform"},
        "horizons": {"t_end": 20000, "tau_end": 3000, "compare_tau_end": 50}, "solver": SOLVER,
        "analysis": dict(ANALYSIS, samples=3001),
        "variants": {"mu0.6": {"neutral": {"mu": 0.6}}, "mu1.2": {"neutral": {"mu": 1.2}}},
    }
    yield "fig-a6", {
        "schema_version": 1, "name": "fig-a6",
        "description": "Variation in co-colonization clearance and mixed-carriage transmission. Strains 2, 4, 7 coexist and play rock-paper-scissors through omega; a larger turnover rate r weights the zero-sum part more, so the approach to coexistence oscillates for many more cycles.",
        "provenance": DESIGNED, "neutral": {"R0": 2, "gamma": 1, "r": 0.2, "k": 3}, "n": 10, "mask": [3, 4],
        "perturbations": {"u": block_clearance(1.05, 1.0).tolist(), "omega": om6.tolist()}, "epsilon": 0.05,
        # an uneven start so the cycling is visible; uniform frequencies sit on a symmetric orbit
        "initial": {"frequencies": [0.05, 0.2, 0.05, 0.1, 0.05, 0.05, 0.3, 0.1, 0.05, 0.05]},
        "horizons": {"t_end": 20000, "tau_end": 1000, "compare_tau_end": 50}, "solver": SOLVER,
        "analysis": dict(ANALYSIS, samples=2001),
        "variants": {"r0.2": {"neutral": {"r": 0.2}}, "r3": {"neutral": {"r": 3}}},
    }


def main():
    default = Path(__file__).resolve().parents[1] / "src" / "quasineutral" / "scenarios"
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", type=Path, default=default, help="output directory")
    args = parser.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)
    for name, doc in scenarios():
        path = args.out / f"{name}.json"
        path.write_text(fmt(doc) + "\n")
        print(path)


if __name__ == "__main__":
    main()
