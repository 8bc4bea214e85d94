"""Explicit values for the implicit constants of the perturbative estimates.

The estimates only hold up to multiplicative constants depending on n, R, M
and the like. Every routine that checks such an estimate takes a
:class:`Constants` instance; all constants default to 1.
"""

from __future__ import annotations

from dataclasses import dataclass, field


@dataclass(frozen=True)
class Constants:
    """Constant table shared by the normal form and the condition ledger.

    Attributes
    ----------
    step : float
        Factor in the one-step contraction estimate
        ``|X_f+| <= step * T (r/s' + eps/r') |X_f|``.
    window : float
        Multiple of r defining the nearly-periodic window
        ``|grad h - omega| < window * r``.
    conditions : dict
        Per-condition constants for the ledger, keyed by row name
        (e.g. ``"iii'"``, ``"A1"``). Missing names default to 1.
    """

    step: float = 1.0
    window: float = 1.0
    conditions: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.step <= 0 or self.window <= 0:
            raise ValueError("constants must be positive")
        for key, v in self.conditions.items():
            if v <= 0:
                raise ValueError(f"constant for {key} must be positive")

    def condition(self, name: str) -> float:
        return float(self.conditions.get(name, 1.0))

    def to_dict(self) -> dict:
        return {"step": self.step, "window": self.window, "conditions": dict(self.conditions)}

    @classmethod
    def from_dict(cls, d: dict) -> "Constants":
        return cls(step=float(d.get("step", 1.0)), window=float(d.get("window", 1.0)),
                   conditions={k: float(v) for k, v in d.get("conditions", {}).items()})
