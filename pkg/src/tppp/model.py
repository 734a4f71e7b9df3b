"""Network parameters, street-model descriptors and derived quantities.

All lengths share one unit (the unit of ``d_link``); intensities are per unit
length (``lam``) or per unit area (``mu`` for sticks, ``mu`` per unit length of
the line-parameter axis for lines).
"""

from __future__ import annotations

import functools
import json
import math
from dataclasses import asdict, dataclass, field, fields, replace
from enum import Enum
from pathlib import Path
from typing import Union

import numpy as np

__all__ = [
    "Model",
    "resolve_model",
    "ParameterError",
    "AlphaOutOfRange",
    "ProbOutOfRange",
    "NonPositiveParam",
    "Rayleigh",
    "Deterministic",
    "PLP",
    "PSP",
    "NetworkParams",
    "DerivedParams",
    "validate",
    "db_to_linear",
    "linear_to_db",
    "load_params",
    "params_from_dict",
    "params_to_dict",
]


class ParameterError(ValueError):
    """Raised by :func:`validate`; ``violations`` holds ``(code, message)`` pairs."""

    def __init__(self, violations):
        self.violations = list(violations)
        msg = "; ".join(f"{code}: {text}" for code, text in self.violations)
        super().__init__(msg)

    @property
    def codes(self):
        return [code for code, _ in self.violations]


# Codes double as exception types so callers can ``except`` on a single kind.
class AlphaOutOfRange(ParameterError):
    pass


class ProbOutOfRange(ParameterError):
    pass


class NonPositiveParam(ParameterError):
    pass


_CODE_TYPES = {
    "AlphaOutOfRange": AlphaOutOfRange,
    "ProbOutOfRange": ProbOutOfRange,
    "NonPositiveParam": NonPositiveParam,
}


def db_to_linear(value_db):
    return 10.0 ** (np.asarray(value_db, dtype=float) / 10.0)


def linear_to_db(value):
    return 10.0 * np.log10(np.asarray(value, dtype=float))


# ----------------------------------------------------------------------------
# Half-length distributions of the stick process
# ----------------------------------------------------------------------------


@dataclass(frozen=True)
class Rayleigh:
    """Half-length density ``f(h) = 2 c h exp(-c h^2)``."""

    c: float

    @property
    def mean(self) -> float:
        return math.sqrt(math.pi / (4.0 * self.c))

    @property
    def second_moment(self) -> float:
        return 1.0 / self.c

    def pdf(self, h):
        h = np.asarray(h, dtype=float)
        return np.where(h >= 0, 2.0 * self.c * h * np.exp(-self.c * h * h), 0.0)

    def biased_pdf(self, h):
        h = np.asarray(h, dtype=float)
        return h * self.pdf(h) / self.mean

    def quantile(self, q):
        return np.sqrt(-np.log1p(-np.asarray(q, dtype=float)) / self.c)

    def sample(self, rng, size, h_cut=None):
        u = rng.random(size)
        if h_cut is not None:
            # inverse CDF restricted to [0, h_cut]
            u = u * -math.expm1(-self.c * h_cut * h_cut)
        return np.sqrt(-np.log1p(-u) / self.c)

    def sample_biased(self, rng, size):
        # h f(h)/E[H] is a chi distribution with 3 degrees of freedom
        scale = 1.0 / math.sqrt(2.0 * self.c)
        return scale * np.sqrt(rng.chisquare(3, size))


@dataclass(frozen=True)
class Deterministic:
    """All sticks have half-length ``h``."""

    h: float

    @property
    def mean(self) -> float:
        return self.h

    @property
    def second_moment(self) -> float:
        return self.h * self.h

    def pdf(self, h):
        raise TypeError("deterministic half-length has no density")

    biased_pdf = pdf

    def quantile(self, q):
        return np.full(np.shape(q), self.h, dtype=float)

    def sample(self, rng, size, h_cut=None):
        return np.full(size, self.h, dtype=float)

    def sample_biased(self, rng, size):
        return np.full(size, self.h, dtype=float)


HalfLengthDist = Union[Rayleigh, Deterministic]


@dataclass(frozen=True)
class PLP:
    """Poisson line process streets."""

    kind = "PLP"


@dataclass(frozen=True)
class PSP:
    """Poisson stick process streets with i.i.d. half-lengths."""

    half_length: HalfLengthDist = field(default_factory=lambda: Rayleigh(1.0))
    kind = "PSP"


StreetModel = Union[PLP, PSP]


@dataclass(frozen=True)
class NetworkParams:
    lam: float = 1.0
    mu: float = 1.0
    p: float = 0.3
    theta: float = 1.0
    d_link: float = 0.25
    alpha: float = 4.0
    m: int = 2
    street_model: StreetModel = field(default_factory=PLP)
    shadow_sigma: float = 0.0

    @property
    def delta(self) -> float:
        return 2.0 / self.alpha

    @property
    def s(self) -> float:
        """``theta * d_link**alpha``."""
        return self.theta * self.d_link**self.alpha

    @property
    def rho(self) -> float:
        """Natural length scale ``s**(1/alpha) = d_link * theta**(1/alpha)``."""
        return self.d_link * self.theta ** (1.0 / self.alpha)

    @property
    def theta_db(self) -> float:
        return float(linear_to_db(self.theta))

    def with_(self, **changes) -> "NetworkParams":
        if "theta_db" in changes:
            changes["theta"] = float(db_to_linear(changes.pop("theta_db")))
        return replace(self, **changes)


@dataclass(frozen=True)
class DerivedParams:
    delta: float
    s: float
    tau: float
    lambda2: float


def _collect_violations(params: NetworkParams):
    out = []
    if not (params.alpha > 2):
        out.append(("AlphaOutOfRange", f"alpha must exceed 2, got {params.alpha}"))
    if not (0 < params.p <= 1):
        out.append(("ProbOutOfRange", f"p must lie in (0, 1], got {params.p}"))
    # lam and mu may be zero: empty networks are legitimate degenerate cases
    for name in ("lam", "mu"):
        v = getattr(params, name)
        if not (v >= 0) or not math.isfinite(v):
            out.append(("NonPositiveParam", f"{name} must be >= 0, got {v}"))
    for name in ("theta", "d_link"):
        v = getattr(params, name)
        if not (v > 0) or not math.isfinite(v):
            out.append(("NonPositiveParam", f"{name} must be > 0, got {v}"))
    if params.m not in (2, 4):
        out.append(("NonPositiveParam", f"m must be 2 or 4, got {params.m}"))
    if not (params.shadow_sigma >= 0):
        out.append(("NonPositiveParam", f"shadow_sigma must be >= 0, got {params.shadow_sigma}"))
    sm = params.street_model
    if isinstance(sm, PSP):
        hl = sm.half_length
        v = hl.c if isinstance(hl, Rayleigh) else hl.h
        if not (v > 0):
            out.append(("NonPositiveParam", f"half-length parameter must be > 0, got {v}"))
    elif not isinstance(sm, PLP):
        out.append(("NonPositiveParam", f"unknown street model {sm!r}"))
    return out


def validate(params: NetworkParams) -> DerivedParams:
    """Check every invariant at once and return the derived quantities.

    Raises a :class:`ParameterError` whose ``violations`` lists all problems.
    When only one kind of problem occurred, the matching subclass is raised.
    """
    try:
        return _validate_cached(params)
    except TypeError:  # unhashable field values
        return _validate(params)


@functools.lru_cache(maxsize=256)
def _validate_cached(params):
    return _validate(params)


def _validate(params: NetworkParams) -> DerivedParams:
    violations = _collect_violations(params)
    if violations:
        kinds = {code for code, _ in violations}
        cls = _CODE_TYPES[kinds.pop()] if len(kinds) == 1 else ParameterError
        raise cls(violations)
    sm = params.street_model
    tau = params.mu if isinstance(sm, PLP) else 2.0 * params.mu * sm.half_length.mean
    return DerivedParams(
        delta=params.delta,
        s=params.s,
        tau=tau,
        lambda2=params.lam * tau,
    )


class Model(str, Enum):
    """Point-process models.  ``TPPP`` means the TPPP matching the street model."""

    PPP1D = "PPP1D"
    PPP2D = "PPP2D"
    PLP_PPP = "PLP_PPP"
    PSP_PPP = "PSP_PPP"
    TPPP = "TPPP"
    TPPP_PLP = "TPPP_PLP"
    TPPP_PSP = "TPPP_PSP"


def resolve_model(model, params: NetworkParams) -> Model:
    """Map ``TPPP`` to its street-specific variant and check street/model agreement."""
    model = Model(model)
    if model is Model.TPPP:
        return Model.TPPP_PSP if isinstance(params.street_model, PSP) else Model.TPPP_PLP
    if model in (Model.PSP_PPP, Model.TPPP_PSP) and not isinstance(params.street_model, PSP):
        raise ValueError(f"{model.value} needs a PSP street model")
    return model


# ----------------------------------------------------------------------------
# JSON round trip
# ----------------------------------------------------------------------------

_FIELD_NAMES = {f.name for f in fields(NetworkParams)} | {"theta_db"}


def _street_from_obj(obj) -> StreetModel:
    if isinstance(obj, str):
        obj = {"kind": obj}
    kind = obj.get("kind", "PLP").upper()
    if kind == "PLP":
        extra = set(obj) - {"kind"}
        if extra:
            raise ParameterError([("NonPositiveParam", f"unknown street_model keys {sorted(extra)}")])
        return PLP()
    if kind == "PSP":
        hl = obj.get("half_length", {"kind": "rayleigh", "c": 1.0})
        hk = hl.get("kind", "rayleigh").lower()
        if hk == "rayleigh":
            return PSP(Rayleigh(float(hl["c"])))
        if hk == "deterministic":
            return PSP(Deterministic(float(hl["h"])))
        raise ParameterError([("NonPositiveParam", f"unknown half-length kind {hk!r}")])
    raise ParameterError([("NonPositiveParam", f"unknown street model {kind!r}")])


def params_from_dict(obj: dict) -> NetworkParams:
    """Build parameters from a flat mapping; unknown keys are rejected.

    ``theta_db`` may be given instead of ``theta``.
    """
    unknown = set(obj) - _FIELD_NAMES
    if unknown:
        raise ParameterError([("NonPositiveParam", f"unknown parameter keys {sorted(unknown)}")])
    kw = dict(obj)
    if "theta_db" in kw:
        if "theta" in kw:
            raise ParameterError([("NonPositiveParam", "give theta or theta_db, not both")])
        kw["theta"] = float(db_to_linear(kw.pop("theta_db")))
    if "street_model" in kw:
        kw["street_model"] = _street_from_obj(kw["street_model"])
    if "m" in kw:
        kw["m"] = int(kw["m"])
    params = NetworkParams(**kw)
    validate(params)
    return params


def params_to_dict(params: NetworkParams) -> dict:
    d = asdict(params)
    sm = params.street_model
    if isinstance(sm, PLP):
        d["street_model"] = {"kind": "PLP"}
    else:
        hl = sm.half_length
        if isinstance(hl, Rayleigh):
            d["street_model"] = {"kind": "PSP", "half_length": {"kind": "rayleigh", "c": hl.c}}
        else:
            d["street_model"] = {"kind": "PSP", "half_length": {"kind": "deterministic", "h": hl.h}}
    return d


def load_params(path) -> NetworkParams:
    with open(Path(path)) as fh:
        return params_from_dict(json.load(fh))
