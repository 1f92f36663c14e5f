"""Scenario files: a versioned JSON description of one experiment.

Top-level keys (``schema_version`` 1)::

    name, description, provenance     labels carried into every output
    neutral     {"gamma", "r", one of "beta" | "R0", one of "k" | "mu"}
    n, mask     strain count and active traits (subset of 1..5)
    perturbations
                inline "b", "nu", "u", "omega", "alpha" arrays (missing = 0),
                optionally "random": {"seed", "low", "high"} drawing every
                array not given inline from U[low, high]
    epsilon     perturbation magnitude
    initial     {"frequencies": "uniform" | [z_1..z_N]} (started on the slow
                manifold) or {"state": {"s", "i_single", "i_double"}}
    horizons    {"t_end", "tau_end", "compare_tau_end"}
    solver      {"rtol", "atol", "max_steps"}
    analysis    {"threshold", "window", "amp_tol", "samples", "scaling_epsilons"}
    variants    {name: partial scenario merged over the base}

``mu`` fixes k through mu = 1/(k (R0 - 1)).
"""

from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import ValidationError
from .full import FullState, slow_manifold_state
from .model import NeutralParameters, TraitPerturbations, as_mask, neutral_equilibrium, realize_traits
from .solver import SolverConfig

SCHEMA_VERSION = 1
_TOP_KEYS = {
    "schema_version", "name", "description", "provenance", "neutral", "n", "mask",
    "perturbations", "epsilon", "initial", "horizons", "solver", "analysis", "variants",
}
_ARRAY_KEYS = ("b", "nu", "u", "omega", "alpha")
_MATRIX_KEYS = {"u", "omega", "alpha"}


@dataclass(frozen=True)
class AnalysisSettings:
    threshold: float = 1e-3
    window: float | None = None
    amp_tol: float = 1e-3
    samples: int = 201
    scaling_epsilons: tuple = (0.1, 0.05, 0.025, 0.0125)


@dataclass(frozen=True, eq=False)
class Scenario:
    name: str
    description: str
    provenance: str
    variant: str | None
    neutral: NeutralParameters
    perturbations: TraitPerturbations
    epsilon: float
    frequencies: np.ndarray | None
    initial_state: FullState | None
    t_end: float | None
    tau_end: float | None
    compare_tau_end: float | None
    solver: SolverConfig
    analysis: AnalysisSettings
    document: dict = field(repr=False)

    @property
    def n(self) -> int:
        return self.perturbations.n

    @property
    def label(self) -> str:
        return self.name if self.variant is None else f"{self.name}[{self.variant}]"

    def initial(self) -> FullState:
        """Full initial state; frequencies are placed on the slow manifold."""
        if self.initial_state is not None:
            return self.initial_state
        return slow_manifold_state(neutral_equilibrium(self.neutral), self.frequencies)

    def initial_frequencies(self) -> np.ndarray:
        if self.frequencies is not None:
            return self.frequencies
        st = self.initial_state
        z = st.i_single + st.i_double.sum(axis=1)
        return z / z.sum()

    def digest(self) -> str:
        """sha256 of the resolved scenario document in canonical JSON form."""
        blob = json.dumps(self.document, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


def bundled_names() -> list[str]:
    root = resources.files("quasineutral") / "scenarios"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def _read(source) -> tuple[dict, str]:
    path = Path(source)
    if path.suffix != ".json" and not path.exists() and str(source) in bundled_names():
        text = (resources.files("quasineutral") / "scenarios" / f"{source}.json").read_text()
        origin = f"bundled:{source}"
    else:
        if not path.exists():
            raise ValidationError(
                f"scenario {str(source)!r} is neither a file nor a bundled name ({', '.join(bundled_names())})"
            )
        text = path.read_text()
        origin = str(path)
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{origin}: parse error at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    if not isinstance(doc, dict):
        raise ValidationError(f"{origin}: top level must be an object")
    return doc, origin


def merge(base: dict, override: dict) -> dict:
    """Recursive dict merge; lists and scalars in ``override`` replace the base value."""
    out = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def _number(section, key, where, default=None, required=True):
    if key not in section:
        if required and default is None:
            raise ValidationError(f"{where}.{key} is required")
        return default
    value = section[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ValidationError(f"{where}.{key} must be a number, got {value!r}")
    return float(value)


def _neutral(sec) -> NeutralParameters:
    if not isinstance(sec, dict):
        raise ValidationError("neutral must be an object")
    unknown = set(sec) - {"beta", "R0", "gamma", "r", "k", "mu"}
    if unknown:
        raise ValidationError(f"neutral: unknown keys {sorted(unknown)}")
    gamma = _number(sec, "gamma", "neutral")
    r = _number(sec, "r", "neutral")
    if ("beta" in sec) == ("R0" in sec):
        raise ValidationError("neutral needs exactly one of beta, R0")
    if ("k" in sec) == ("mu" in sec):
        raise ValidationError("neutral needs exactly one of k, mu")
    beta = _number(sec, "beta", "neutral") if "beta" in sec else _number(sec, "R0", "neutral") * (r + gamma)
    if "k" in sec:
        k = _number(sec, "k", "neutral")
    else:
        mu = _number(sec, "mu", "neutral")
        R0 = beta / (r + gamma)
        if not (mu > 0 and R0 > 1):
            raise ValidationError(f"neutral.mu needs mu > 0 and R0 > 1 (mu={mu!r}, R0={R0!r})")
        k = 1.0 / (mu * (R0 - 1.0))
    return NeutralParameters(beta=beta, gamma=gamma, r=r, k=k)


def _perturbations(sec, n, mask) -> TraitPerturbations:
    if sec is None:
        sec = {}
    if not isinstance(sec, dict):
        raise ValidationError("perturbations must be an object")
    unknown = set(sec) - set(_ARRAY_KEYS) - {"random"}
    if unknown:
        raise ValidationError(f"perturbations: unknown keys {sorted(unknown)}")
    arrays = {}
    rnd = sec.get("random")
    if rnd is not None:
        seed = rnd.get("seed")
        if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
            raise ValidationError("perturbations.random.seed must be a non-negative integer")
        low = _number(rnd, "low", "perturbations.random", default=-1.0, required=False)
        high = _number(rnd, "high", "perturbations.random", default=1.0, required=False)
        if not high > low:
            raise ValidationError("perturbations.random needs high > low")
        rng = np.random.default_rng(seed)
        for key in _ARRAY_KEYS:
            shape = (n, n) if key in _MATRIX_KEYS else (n,)
            arrays[key] = rng.uniform(low, high, shape)
    for key in _ARRAY_KEYS:
        if key in sec:
            arr = np.asarray(sec[key], dtype=float)
            shape = (n, n) if key in _MATRIX_KEYS else (n,)
            if arr.shape != shape:
                raise ValidationError(f"perturbations.{key} must have shape {shape} for n={n}, got {arr.shape}")
            arrays[key] = arr
    return TraitPerturbations(n, mask=mask, **arrays)


def _initial(sec, n):
    if sec is None:
        sec = {"frequencies": "uniform"}
    if not isinstance(sec, dict) or len(sec) != 1 or not set(sec) <= {"frequencies", "state"}:
        raise ValidationError('initial must hold exactly one of "frequencies", "state"')
    if "frequencies" in sec:
        f = sec["frequencies"]
        if f == "uniform":
            return np.full(n, 1.0 / n), None
        z = np.asarray(f, dtype=float)
        if z.shape != (n,):
            raise ValidationError(f"initial.frequencies must have {n} entries, got {z.shape}")
        if np.any(z < 0) or abs(z.sum() - 1) > 1e-9:
            raise ValidationError("initial.frequencies must be nonnegative and sum to 1")
        return z, None
    st = sec["state"]
    state = FullState(st["s"], st["i_single"], st["i_double"])
    if state.n != n:
        raise ValidationError(f"initial.state has {state.n} strains, expected n={n}")
    state.check()
    return None, state


def resolve(doc: dict, variant: str | None = None) -> dict:
    """Apply a named variant to a raw document; the result has no ``variants`` key."""
    variants = doc.get("variants", {}) or {}
    base = {k: v for k, v in doc.items() if k != "variants"}
    if variant is None:
        return base
    if variant not in variants:
        raise ValidationError(f"unknown variant {variant!r}; available: {sorted(variants)}")
    return merge(base, variants[variant])


def build(doc: dict, variant: str | None = None, seed: int | None = None, overrides: dict | None = None) -> Scenario:
    """Validate a raw document. ``seed`` and ``overrides`` apply after the variant."""
    if doc.get("schema_version") != SCHEMA_VERSION:
        raise ValidationError(f"schema_version must be {SCHEMA_VERSION}, got {doc.get('schema_version')!r}")
    unknown = set(doc) - _TOP_KEYS
    if unknown:
        raise ValidationError(f"unknown top-level keys {sorted(unknown)}")
    res = resolve(doc, variant)
    if seed is not None:
        res = merge(res, {"perturbations": {"random": {"seed": int(seed)}}})
    if overrides:
        res = merge(res, overrides)
    name = res.get("name")
    if not isinstance(name, str) or not name:
        raise ValidationError("name must be a non-empty string")
    n = res.get("n")
    if isinstance(n, bool) or not isinstance(n, int) or n < 1:
        raise ValidationError(f"n must be a positive integer, got {n!r}")
    mask = as_mask(res.get("mask", []))
    neutral = _neutral(res.get("neutral"))
    pert = _perturbations(res.get("perturbations"), n, mask)
    epsilon = _number(res, "epsilon", "scenario")
    realize_traits(neutral, pert, epsilon)
    freqs, state = _initial(res.get("initial"), n)
    if freqs is not None:
        # a frequency start sits on the slow manifold, which needs the endemic equilibrium
        neutral_equilibrium(neutral)

    hz = res.get("horizons", {}) or {}
    t_end = _number(hz, "t_end", "horizons", required=False)
    tau_end = _number(hz, "tau_end", "horizons", required=False)
    compare_tau_end = _number(hz, "compare_tau_end", "horizons", required=False)

    sv = res.get("solver", {}) or {}
    solver = SolverConfig(
        rtol=_number(sv, "rtol", "solver", default=1e-8, required=False),
        atol=_number(sv, "atol", "solver", default=1e-10, required=False),
        max_steps=int(sv.get("max_steps", 2_000_000)),
    )
    an = res.get("analysis", {}) or {}
    window = an.get("window")
    analysis = AnalysisSettings(
        threshold=_number(an, "threshold", "analysis", default=1e-3, required=False),
        window=None if window is None else float(window),
        amp_tol=_number(an, "amp_tol", "analysis", default=1e-3, required=False),
        samples=int(an.get("samples", 201)),
        scaling_epsilons=tuple(float(e) for e in an.get("scaling_epsilons", (0.1, 0.05, 0.025, 0.0125))),
    )
    return Scenario(
        name=name,
        description=str(res.get("description", "")),
        provenance=str(res.get("provenance", "user")),
        variant=variant,
        neutral=neutral,
        perturbations=pert,
        epsilon=epsilon,
        frequencies=freqs,
        initial_state=state,
        t_end=t_end,
        tau_end=tau_end,
        compare_tau_end=compare_tau_end,
        solver=solver,
        analysis=analysis,
        document=res,
    )


def load_scenario(source, variant: str | None = None, seed: int | None = None, overrides: dict | None = None) -> Scenario:
    """Load a scenario file, or a bundled scenario by name, and validate it."""
    doc, origin = _read(source)
    try:
        return build(doc, variant, seed, overrides)
    except ValidationError as exc:
        raise ValidationError(f"{origin}: {exc}") from None
    except (TypeError, KeyError) as exc:
        raise ValidationError(f"{origin}: malformed field ({exc})") from None


def variant_names(source) -> list[str]:
    doc, _ = _read(source)
    return sorted(doc.get("variants", {}) or {})
