"""Plant description ``x+ = (A0 + Abar(p)) x + B u + w`` and its JSON schema.

Entries of ``Abar`` are polynomials in a zero-mean Gaussian parameter vector
``p ~ N(0, Sigma)``. Indices are 0-based in memory and 1-based on disk.
"""
from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DimensionError, ModelValidationError
from .matops import as_vector, min_eig_sym
from .moments import entry_mean

MAX_DEGREE = 4
KNOWN_KEYS = {"n", "m", "l", "A0", "B", "W", "Sigma", "Abar", "seed", "x0", "allow_nonzero_mean"}
REQUIRED_KEYS = ("n", "m", "l", "A0", "B", "W", "Sigma", "Abar")


@dataclass(frozen=True)
class PolyTerm:
    coeff: float
    exponents: tuple[int, ...]

    @property
    def degree(self) -> int:
        return sum(self.exponents)


@dataclass(frozen=True)
class RandomMatrixSpec:
    n: int
    l: int
    entries: dict = field(default_factory=dict)  # (i, j) -> tuple[PolyTerm, ...]
    max_degree: int = MAX_DEGREE

    def terms(self, i: int, j: int) -> tuple[PolyTerm, ...]:
        return self.entries.get((i, j), ())

    @classmethod
    def zero(cls, n: int, l: int = 1) -> "RandomMatrixSpec":
        return cls(n, l, {})


@dataclass(frozen=True)
class ParamLaw:
    sigma: np.ndarray
    kind: str = "gaussian"

    @property
    def l(self) -> int:
        return self.sigma.shape[0]


@dataclass(frozen=True)
class SystemModel:
    a0: np.ndarray
    b: np.ndarray
    w: np.ndarray
    abar: RandomMatrixSpec
    law: ParamLaw
    x0: np.ndarray | None = None
    seed: int | None = None
    # Accept Abar entries whose Gaussian mean is non-zero (used as written,
    # not re-centred). The covariance recursion is then exact only while z = 0.
    allow_nonzero_mean: bool = False

    @property
    def n(self) -> int:
        return self.a0.shape[0]

    @property
    def m(self) -> int:
        return self.b.shape[1]

    @property
    def l(self) -> int:
        return self.abar.l


def make_model(a0, b, w, abar: RandomMatrixSpec, sigma, x0=None, seed=None,
               allow_nonzero_mean: bool = False, validate: bool = True) -> SystemModel:
    """Build a :class:`SystemModel` from array-likes, validating by default."""
    a0 = np.array(a0, dtype=float, ndmin=2)
    b = np.array(b, dtype=float)
    if b.ndim == 1:
        b = b.reshape(-1, 1)
    w = np.array(w, dtype=float, ndmin=2)
    sigma = np.array(sigma, dtype=float, ndmin=2)
    x0 = None if x0 is None else as_vector(x0, "x0")
    model = SystemModel(a0, b, w, abar, ParamLaw(sigma), x0=x0, seed=seed,
                        allow_nonzero_mean=bool(allow_nonzero_mean))
    if validate:
        validate_model(model)
    return model


def _fail(msg: str):
    raise ModelValidationError(msg)


def validate_model(model: SystemModel) -> None:
    """Check every model invariant; raise :class:`ModelValidationError` naming the first violation."""
    a0, b, w, spec, sigma = model.a0, model.b, model.w, model.abar, model.law.sigma
    for name, arr in (("A0", a0), ("B", b), ("W", w), ("Sigma", sigma)):
        if arr.ndim != 2:
            _fail(f"{name} must be a 2-D matrix, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            _fail(f"{name} contains non-finite entries")
    n = a0.shape[0]
    if a0.shape != (n, n):
        _fail(f"A0 must be square, got shape {a0.shape}")
    if b.shape[0] != n:
        _fail(f"B must have {n} rows, got shape {b.shape}")
    if w.shape != (n, n):
        _fail(f"W must be {n}x{n}, got shape {w.shape}")
    if spec.n != n:
        _fail(f"Abar dimension {spec.n} does not match A0 dimension {n}")
    if sigma.shape != (spec.l, spec.l):
        _fail(f"Sigma must be {spec.l}x{spec.l}, got shape {sigma.shape}")
    if model.x0 is not None and model.x0.shape != (n,):
        _fail(f"x0 must have length {n}, got {model.x0.shape[0]}")

    try:
        w_min = min_eig_sym(w, "W")
    except ValueError as exc:
        _fail(f"W must be symmetric positive definite: {exc}")
    if w_min <= 0.0:
        _fail(f"W must be positive definite (smallest eigenvalue {w_min:.3e})")
    try:
        s_min = min_eig_sym(sigma, "Sigma")
    except ValueError as exc:
        _fail(f"Sigma must be symmetric positive semidefinite: {exc}")
    if s_min < -1e-12:
        _fail(f"Sigma must be positive semidefinite (smallest eigenvalue {s_min:.3e})")

    if spec.max_degree > MAX_DEGREE:
        _fail(f"max_degree {spec.max_degree} exceeds the supported maximum {MAX_DEGREE}")
    for (i, j), terms in spec.entries.items():
        if not (0 <= i < n and 0 <= j < n):
            _fail(f"Abar entry ({i + 1},{j + 1}) is outside a {n}x{n} matrix")
        for t in terms:
            if len(t.exponents) != spec.l:
                _fail(f"Abar entry ({i + 1},{j + 1}): exponent vector {list(t.exponents)} "
                      f"must have length l={spec.l}")
            if any(e < 0 for e in t.exponents):
                _fail(f"Abar entry ({i + 1},{j + 1}): negative exponent in {list(t.exponents)}")
            if t.degree > spec.max_degree:
                _fail(f"Abar entry ({i + 1},{j + 1}): term degree {t.degree} exceeds "
                      f"max_degree {spec.max_degree}")
            if not np.isfinite(t.coeff):
                _fail(f"Abar entry ({i + 1},{j + 1}): non-finite coefficient")
    for (i, j), mean in nonzero_mean_entries(model):
        if not model.allow_nonzero_mean:
            _fail(f"Abar entry ({i + 1},{j + 1}) has non-zero mean {mean:.6g} under the "
                  f"Gaussian law; fold it into A0 so that E[Abar] = 0")
        warnings.warn(f"Abar entry ({i + 1},{j + 1}) has non-zero mean {mean:.6g}; "
                      f"using it as written (allow_nonzero_mean)", stacklevel=3)


def nonzero_mean_entries(model: SystemModel) -> list[tuple[tuple[int, int], float]]:
    """Entries of Abar whose analytic Gaussian mean is not zero."""
    out = []
    for (i, j), terms in sorted(model.abar.entries.items()):
        mean = entry_mean(terms, model.law.sigma)
        scale = max(1.0, sum(abs(t.coeff) for t in terms))
        if abs(mean) > 1e-12 * scale:
            out.append(((i, j), mean))
    return out


def evaluate_abar(spec: RandomMatrixSpec, p) -> np.ndarray:
    p = np.asarray(p, dtype=float).reshape(-1)
    if p.size != spec.l:
        raise DimensionError(f"parameter vector has length {p.size}, expected l={spec.l}")
    return evaluate_abar_batch(spec, p[None, :])[0]


def evaluate_abar_batch(spec: RandomMatrixSpec, p: np.ndarray) -> np.ndarray:
    """Evaluate ``Abar`` at each row of ``p`` (shape ``(s, l)``); returns ``(s, n, n)``."""
    p = np.asarray(p, dtype=float)
    if p.ndim != 2 or p.shape[1] != spec.l:
        raise DimensionError(f"parameter batch must have shape (s, {spec.l}), got {p.shape}")
    out = np.zeros((p.shape[0], spec.n, spec.n))
    for (i, j), terms in spec.entries.items():
        acc = out[:, i, j]
        for t in terms:
            mono = np.full(p.shape[0], t.coeff)
            for r, e in enumerate(t.exponents):
                if e:
                    mono = mono * p[:, r] ** e
            acc += mono
    return out


# ---------------------------------------------------------------- file schema

def _matrix_field(doc: dict, key: str, shape: tuple[int, int]) -> np.ndarray:
    try:
        arr = np.array(doc[key], dtype=float)
    except (TypeError, ValueError) as exc:
        raise ModelValidationError(f"field '{key}': not a numeric array ({exc})") from None
    if arr.ndim == 1 and shape[1] == 1 and arr.size == shape[0]:
        arr = arr.reshape(shape)
    if arr.shape != shape:
        raise ModelValidationError(f"field '{key}': expected shape {shape}, got {arr.shape}")
    return arr


def _int_field(doc: dict, key: str) -> int:
    val = doc[key]
    if isinstance(val, bool) or not isinstance(val, int) or val < 1:
        raise ModelValidationError(f"field '{key}': expected a positive integer, got {val!r}")
    return val


def model_from_dict(doc: dict, validate: bool = True) -> SystemModel:
    if not isinstance(doc, dict):
        raise ModelValidationError("model document must be a JSON object")
    missing = [k for k in REQUIRED_KEYS if k not in doc]
    if missing:
        raise ModelValidationError(f"missing required field(s): {', '.join(missing)}")
    for key in sorted(set(doc) - KNOWN_KEYS):
        warnings.warn(f"ignoring unknown model field '{key}'", stacklevel=2)
    n, m, l = _int_field(doc, "n"), _int_field(doc, "m"), _int_field(doc, "l")
    a0 = _matrix_field(doc, "A0", (n, n))
    b = _matrix_field(doc, "B", (n, m))
    w = _matrix_field(doc, "W", (n, n))
    sigma = _matrix_field(doc, "Sigma", (l, l))

    if not isinstance(doc["Abar"], list):
        raise ModelValidationError("field 'Abar': expected an array of entries")
    entries: dict = {}
    for idx, ent in enumerate(doc["Abar"]):
        where = f"Abar[{idx}]"
        if not isinstance(ent, dict) or not {"i", "j", "terms"} <= set(ent):
            raise ModelValidationError(f"{where}: expected an object with 'i', 'j', 'terms'")
        i, j = ent["i"], ent["j"]
        if not (isinstance(i, int) and isinstance(j, int)) or not (1 <= i <= n and 1 <= j <= n):
            raise ModelValidationError(f"{where}: indices ({i},{j}) must be integers in 1..{n}")
        terms = []
        for tdx, t in enumerate(ent["terms"]):
            try:
                coeff = float(t["coeff"])
                exps = tuple(int(e) for e in t["exponents"])
            except (KeyError, TypeError, ValueError):
                raise ModelValidationError(
                    f"{where}.terms[{tdx}]: expected {{'coeff': number, 'exponents': [int]*{l}}}"
                ) from None
            terms.append(PolyTerm(coeff, exps))
        key = (i - 1, j - 1)
        entries[key] = entries.get(key, ()) + tuple(terms)
    spec = RandomMatrixSpec(n, l, entries)
    x0 = doc.get("x0")
    if x0 is not None:
        x0 = np.array(x0, dtype=float).reshape(-1)
    seed = doc.get("seed")
    if seed is not None and (isinstance(seed, bool) or not isinstance(seed, int)):
        raise ModelValidationError(f"field 'seed': expected an integer, got {seed!r}")
    allow = doc.get("allow_nonzero_mean", False)
    if not isinstance(allow, bool):
        raise ModelValidationError(f"field 'allow_nonzero_mean': expected true/false, got {allow!r}")
    return make_model(a0, b, w, spec, sigma, x0=x0, seed=seed,
                      allow_nonzero_mean=allow, validate=validate)


def load_model(path) -> SystemModel:
    text = Path(path).read_text(encoding="utf-8")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelValidationError(
            f"{path}: JSON parse error at line {exc.lineno}, column {exc.colno}: {exc.msg}"
        ) from None
    try:
        return model_from_dict(doc)
    except ModelValidationError as exc:
        raise ModelValidationError(f"{path}: {exc}") from None


def model_to_dict(model: SystemModel) -> dict:
    spec = model.abar
    doc = {
        "n": model.n,
        "m": model.m,
        "l": spec.l,
        "A0": model.a0.tolist(),
        "B": model.b.tolist(),
        "W": model.w.tolist(),
        "Sigma": model.law.sigma.tolist(),
        "Abar": [
            {"i": i + 1, "j": j + 1,
             "terms": [{"coeff": t.coeff, "exponents": list(t.exponents)} for t in terms]}
            for (i, j), terms in sorted(spec.entries.items()) if terms
        ],
    }
    if model.x0 is not None:
        doc["x0"] = model.x0.tolist()
    if model.seed is not None:
        doc["seed"] = model.seed
    if model.allow_nonzero_mean:
        doc["allow_nonzero_mean"] = True
    return doc


def save_model(model: SystemModel, path) -> None:
    Path(path).write_text(json.dumps(model_to_dict(model), indent=2) + "\n", encoding="utf-8")


def example_model() -> SystemModel:
    """Three-state, two-parameter benchmark system (``models/example3.json``).

    Its (2,2) entry ``p2**2`` has mean ``Sigma[1,1]``; it is kept as written,
    so the model carries ``allow_nonzero_mean``.
    """
    spec = RandomMatrixSpec(3, 2, {
        (0, 0): (PolyTerm(1.0, (1, 0)),),
        (0, 2): (PolyTerm(1.0, (1, 0)),),
        (1, 1): (PolyTerm(1.0, (0, 2)),),
        (2, 2): (PolyTerm(1.0, (0, 1)),),
    })
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return make_model(
            a0=[[0.4, 0.4, 0.5], [0.1, 0.1, 0.2], [0.2, 0.1, 0.5]],
            b=[[1.0], [0.0], [0.0]],
            w=np.eye(3),
            abar=spec,
            sigma=[[0.21, 0.03], [0.03, 0.15]],
            allow_nonzero_mean=True,
        )
