"""Physical coefficients of the two thermoelastic nanotube systems."""

from __future__ import annotations

import dataclasses
import enum
import logging
import math
from dataclasses import dataclass, field

from .errors import ParameterError

logger = logging.getLogger(__name__)

__all__ = ["Variant", "ModelParameters"]


class Variant(str, enum.Enum):
    """Which heat-beam coupling is used.

    SYSTEM01: rotation velocity drives the heat equation (``beta * psi_t``).
    SYSTEM02: its Laplacian does (``delta * A psi_t``).
    """

    SYSTEM01 = "System01"
    SYSTEM02 = "System02"

    @classmethod
    def parse(cls, value) -> "Variant":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("_", "").replace(" ", "")
        for v in cls:
            if v.value.lower() == key or v.name.lower() == key:
                return v
        if key in ("1", "01", "system1"):
            return cls.SYSTEM01
        if key in ("2", "02", "system2"):
            return cls.SYSTEM02
        raise ParameterError("variant", f"unknown system variant {value!r}")


_POSITIVE = (
    "l", "rho1", "rho2", "rho3", "rho4", "rho5",
    "kappa1", "kappa2", "b1", "b2", "vdw", "delta", "betaThermal", "K",
)
_NONNEGATIVE = ("gamma1", "gamma2", "gamma3")


@dataclass(frozen=True)
class ModelParameters:
    """All coefficients of one system, validated on construction.

    ``exponents`` are the fractional damping powers (tau_i for System01,
    beta_i for System02), each in [0, 1].  ``betaThermal`` only enters
    System01.  Zero damping gains are accepted for diagnostic runs but are
    outside the hypotheses of the stability theorems; see ``is_diagnostic``.
    """

    variant: Variant = Variant.SYSTEM02
    l: float = math.pi
    rho1: float = 1.0
    rho2: float = 1.0
    rho3: float = 1.0
    rho4: float = 1.0
    rho5: float = 1.0
    kappa1: float = 1.0
    kappa2: float = 1.0
    b1: float = 1.0
    b2: float = 1.0
    vdw: float = 1.0
    gamma1: float = 1.0
    gamma2: float = 1.0
    gamma3: float = 1.0
    delta: float = 1.0
    betaThermal: float = 1.0
    K: float = 1.0
    exponents: tuple = field(default=(1.0, 1.0, 1.0))
    allow_zero_delta: bool = field(default=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "variant", Variant.parse(self.variant))
        for name in _POSITIVE + _NONNEGATIVE:
            value = getattr(self, name)
            try:
                value = float(value)
            except (TypeError, ValueError):
                raise ParameterError(name, f"must be a real number, got {value!r}") from None
            if not math.isfinite(value):
                raise ParameterError(name, f"must be finite, got {value!r}")
            object.__setattr__(self, name, value)
        for name in _POSITIVE:
            value = getattr(self, name)
            if name == "delta" and self.allow_zero_delta and value == 0.0:
                continue
            if value <= 0.0:
                raise ParameterError(name, f"must be strictly positive, got {value!r}")
        for name in _NONNEGATIVE:
            if getattr(self, name) < 0.0:
                raise ParameterError(name, f"must be nonnegative, got {getattr(self, name)!r}")
        try:
            exps = tuple(float(e) for e in self.exponents)
        except TypeError:
            raise ParameterError("exponents", "must be a triple of reals") from None
        if len(exps) != 3:
            raise ParameterError("exponents", f"need exactly three exponents, got {len(exps)}")
        for i, e in enumerate(exps, 1):
            if not (0.0 <= e <= 1.0):
                raise ParameterError("exponents", f"exponent {i} must lie in [0, 1], got {e!r}")
        object.__setattr__(self, "exponents", exps)
        if self.variant is Variant.SYSTEM01 and self.delta == 0.0:
            raise ParameterError("delta", "System01 needs delta > 0 (energy weight rho5*delta/beta)")
        if self.is_diagnostic:
            logger.info("diagnostic parameter set (zero damping gain or zero coupling): %s", self)

    @property
    def is_diagnostic(self) -> bool:
        """True when some damping gain or the thermal coupling is switched off."""
        return min(self.gamma1, self.gamma2, self.gamma3) == 0.0 or self.delta == 0.0

    @property
    def phi(self) -> float:
        """Smallest damping exponent."""
        return min(self.exponents)

    def replace(self, **changes) -> "ModelParameters":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d.pop("allow_zero_delta")
        d["variant"] = self.variant.value
        d["exponents"] = list(self.exponents)
        return d

    @classmethod
    def conservative(cls, **overrides) -> "ModelParameters":
        """System02 with all dampers and the heat coupling switched off."""
        base = dict(variant=Variant.SYSTEM02, gamma1=0.0, gamma2=0.0, gamma3=0.0,
                    delta=0.0, allow_zero_delta=True)
        base.update(overrides)
        return cls(**base)
