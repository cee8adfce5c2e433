# Copyright 2021 - 2025 Universität Tübingen, DKFZ, EMBL, and Universität zu Köln
# for the German Human Genome-Phenome Archive (GHGA)
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""Symbolic Heisenberg-picture propagation of compiled protocols.

Every canonical operator is tracked as a linear combination of the initial operators,
measurement outcomes and a constant. Outcomes are themselves linear combinations of
initial operators, so every row expands to initial operators only. Variances follow from
the initial product state. Propagation is independent of the phase-space engines and
serves as their oracle.
"""

import math
from collections.abc import Mapping
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any

import numpy as np

from spinport.core.gaussian import GaussianState
from spinport.core.steps import (
    CompiledProtocol,
    Displace,
    Measure,
    Phase,
    Qnd,
    Rotate,
    Squeeze,
)

Symbol = tuple[str, str]
Coef = float | Fraction

QUADRATURES = ("x", "p")
SNAP_TOL = 1e-12


class OracleError(ValueError):
    """Raised for steps the oracle cannot propagate."""


def _clean(terms: Mapping[Any, Coef]) -> dict[Any, Coef]:
    return {key: value for key, value in terms.items() if value != 0}


@dataclass(frozen=True)
class OperatorExpr:
    """sum(c_s * s for initial symbols s) + sum(g_m * m for outcomes m) + constant."""

    coefficients: Mapping[Symbol, Coef] = field(default_factory=dict)
    outcome_terms: Mapping[str, Coef] = field(default_factory=dict)
    constant: Coef = 0.0

    @classmethod
    def symbol(cls, label: str, quadrature: str, one: Coef = 1.0) -> "OperatorExpr":
        """The initial operator of one quadrature."""
        return cls(coefficients={(label, quadrature): one})

    def __add__(self, other: "OperatorExpr") -> "OperatorExpr":
        coefficients = dict(self.coefficients)
        for key, value in other.coefficients.items():
            coefficients[key] = coefficients.get(key, 0) + value
        outcomes = dict(self.outcome_terms)
        for key, value in other.outcome_terms.items():
            outcomes[key] = outcomes.get(key, 0) + value
        return OperatorExpr(
            _clean(coefficients), _clean(outcomes), self.constant + other.constant
        )

    def scaled(self, factor: Coef) -> "OperatorExpr":
        """The expression multiplied by a number."""
        return OperatorExpr(
            _clean({k: factor * v for k, v in self.coefficients.items()}),
            _clean({k: factor * v for k, v in self.outcome_terms.items()}),
            factor * self.constant,
        )

    def expand(self, outcomes: Mapping[str, "OperatorExpr"]) -> "OperatorExpr":
        """Substitute outcomes by their expressions in initial operators."""
        result = OperatorExpr(self.coefficients, {}, self.constant)
        for outcome_id, gain in self.outcome_terms.items():
            result = result + outcomes[outcome_id].scaled(gain)
        return result

    def commutator(self, other: "OperatorExpr") -> Coef:
        """c such that [self, other] = i c, for expressions in initial operators."""
        total: Coef = 0
        for (label, quadrature), value in self.coefficients.items():
            if quadrature == "x":
                total += value * other.coefficients.get((label, "p"), 0)
            else:
                total -= value * other.coefficients.get((label, "x"), 0)
        return total

    def weight(self, other: "OperatorExpr") -> float:
        """Scale of the commutator sum, used for relative tolerances."""
        return float(
            sum(
                abs(value) * abs(other.coefficients.get((label, q), 0))
                for (label, _), value in self.coefficients.items()
                for q in QUADRATURES
            )
        )

    def to_dict(self) -> dict[str, Any]:
        """JSON-friendly form; exact coefficients are written as fractions."""

        def out(value: Coef):
            return str(value) if isinstance(value, Fraction) else float(value)

        return {
            "coefficients": {
                f"{label}.{q}": out(v) for (label, q), v in self.coefficients.items()
            },
            "outcome_terms": {k: out(v) for k, v in self.outcome_terms.items()},
            "constant": out(self.constant),
        }


class _Numbers:
    """Coefficient arithmetic in floats or exact rationals."""

    def __init__(self, exact: bool):
        self.exact = exact

    def value(self, x: float) -> Coef:
        if not math.isfinite(x):
            raise OracleError(f"Non-finite coefficient {x!r}.")
        return Fraction(x) if self.exact else float(x)

    def trig(self, theta: float) -> tuple[Coef, Coef]:
        c, s = math.cos(theta), math.sin(theta)
        if not self.exact:
            return c, s
        snapped = []
        for value in (c, s):
            nearest = round(value)
            if abs(value - nearest) > SNAP_TOL:
                raise OracleError(
                    f"Exact mode supports quarter-turn rotations only, got {theta!r}."
                )
            snapped.append(Fraction(nearest))
        return snapped[0], snapped[1]

    def hyperbolic(self, r: float) -> tuple[Coef, Coef]:
        if self.exact:
            if r != 0:
                raise OracleError(f"Exact mode supports r = 0 only, got {r!r}.")
            return Fraction(1), Fraction(0)
        return math.cosh(r), math.sinh(r)


@dataclass
class OracleTable:
    """Final operators of a protocol as expressions in initial operators."""

    protocol: str
    symbols: list[Symbol]
    rows: dict[Symbol, OperatorExpr]
    outcomes: dict[str, OperatorExpr]
    measured: list[str]
    exact: bool = False

    def expanded(self, symbol: Symbol) -> OperatorExpr:
        """A final row with outcomes substituted."""
        return self.rows[symbol].expand(self.outcomes)

    def vector(self, expr: OperatorExpr) -> np.ndarray:
        """Coefficients over the initial symbols in phase-space order."""
        return np.array([float(expr.coefficients.get(s, 0)) for s in self.symbols])

    def covariance(self, a: Symbol, b: Symbol, initial: GaussianState) -> float:
        """Covariance of two final operators for an initial product state."""
        va = self.vector(self.expanded(a))
        vb = self.vector(self.expanded(b))
        return float(va @ initial.cov @ vb)

    def variance(self, symbol: Symbol, initial: GaussianState) -> float:
        """Variance of one final operator."""
        return self.covariance(symbol, symbol, initial)

    def mean(self, symbol: Symbol, initial: GaussianState) -> float:
        """Mean of one final operator."""
        expr = self.expanded(symbol)
        return float(self.vector(expr) @ initial.mean + float(expr.constant))

    def moments(
        self, label: str, initial: GaussianState
    ) -> tuple[np.ndarray, np.ndarray]:
        """Mean (2,) and covariance (2, 2) of a surviving mode."""
        pair = [(label, q) for q in QUADRATURES]
        mean = np.array([self.mean(s, initial) for s in pair])
        cov = np.array([[self.covariance(a, b, initial) for b in pair] for a in pair])
        return mean, cov

    def commutator_defect(self, tol: float = 1e-12) -> list[tuple[str, str, float]]:
        """Pairs of final operators and outcomes whose commutators are off canonical.

        Surviving quadratures must satisfy [x_k, p_l] = i delta_kl and commute
        otherwise; outcomes commute with each other and with all surviving quadratures.
        In exact mode any nonzero defect is reported.
        """
        named: list[tuple[str, OperatorExpr, Symbol | None]] = [
            (f"{label}.{q}", self.expanded((label, q)), (label, q))
            for (label, q) in self.rows
        ]
        named += [(name, expr, None) for name, expr in self.outcomes.items()]
        defects = []
        for k, (name_a, a, sym_a) in enumerate(named):
            for name_b, b, sym_b in named[k + 1 :]:
                target = 0
                if sym_a and sym_b and sym_a[0] == sym_b[0]:
                    target = 1 if sym_a[1] == "x" else -1
                defect = a.commutator(b) - target
                if self.exact:
                    if defect != 0:
                        defects.append((name_a, name_b, float(defect)))
                elif abs(defect) > tol * max(1.0, a.weight(b)):
                    defects.append((name_a, name_b, float(defect)))
        return defects

    def to_dict(self) -> dict[str, Any]:
        """JSON-friendly dump of the table."""
        return {
            "protocol": self.protocol,
            "exact": self.exact,
            "rows": {f"{m}.{q}": e.to_dict() for (m, q), e in self.rows.items()},
            "outcomes": {k: e.to_dict() for k, e in self.outcomes.items()},
            "measured": list(self.measured),
        }


class _Propagator:
    """Heisenberg-picture rows of all live quadratures, updated step by step."""

    def __init__(self, protocol: CompiledProtocol, exact: bool):
        self.numbers = _Numbers(exact)
        one = self.numbers.value(1.0)
        self.symbols = [(label, q) for label in protocol.labels for q in QUADRATURES]
        self.rows = {s: OperatorExpr.symbol(s[0], s[1], one) for s in self.symbols}
        self.outcomes: dict[str, OperatorExpr] = {}
        self.measured: list[str] = []

    def _live(self, *labels: str):
        for label in labels:
            if (label, "x") not in self.rows:
                raise OracleError(f"Mode '{label}' is not available.")

    def _rotate(self, label: str, theta: float):
        self._live(label)
        c, s = self.numbers.trig(theta)
        x, p = self.rows[(label, "x")], self.rows[(label, "p")]
        self.rows[(label, "x")] = x.scaled(c) + p.scaled(s)
        self.rows[(label, "p")] = x.scaled(-s) + p.scaled(c)

    def _squeeze(self, i: str, j: str, r: float):
        self._live(i, j)
        c, s = self.numbers.hyperbolic(r)
        rows = self.rows
        xi, pi = rows[(i, "x")], rows[(i, "p")]
        xj, pj = rows[(j, "x")], rows[(j, "p")]
        rows[(i, "x")] = xi.scaled(c) + xj.scaled(-s)
        rows[(j, "x")] = xj.scaled(c) + xi.scaled(-s)
        rows[(i, "p")] = pi.scaled(c) + pj.scaled(s)
        rows[(j, "p")] = pj.scaled(c) + pi.scaled(s)

    def _qnd(self, i: str, j: str, kappa: float):
        self._live(i, j)
        k = self.numbers.value(kappa)
        xi, xj = self.rows[(i, "x")], self.rows[(j, "x")]
        self.rows[(i, "p")] = self.rows[(i, "p")] + xj.scaled(k)
        self.rows[(j, "p")] = self.rows[(j, "p")] + xi.scaled(k)

    def _measure(self, label: str, angle: float, outcome_id: str):
        self._live(label)
        c, s = self.numbers.trig(angle)
        x, p = self.rows[(label, "x")], self.rows[(label, "p")]
        quadrature = x.scaled(c) + p.scaled(s)
        self.outcomes[outcome_id] = quadrature.expand(self.outcomes)
        del self.rows[(label, "x")], self.rows[(label, "p")]
        self.measured.append(label)

    def _displace(self, step: Displace):
        self._live(step.mode)
        for outcome_id, _ in step.terms:
            if outcome_id not in self.outcomes:
                raise OracleError(f"Outcome '{outcome_id}' is not defined yet.")
        shift = OperatorExpr(
            outcome_terms={o: self.numbers.value(g) for o, g in step.terms},
            constant=self.numbers.value(step.const),
        )
        key = (step.mode, QUADRATURES[step.quadrature])
        self.rows[key] = self.rows[key] + shift

    def apply(self, step: object):
        """Advance the rows by one step."""
        match step:
            case Squeeze():
                self._squeeze(step.first, step.second, step.r)
            case Qnd():
                self._qnd(step.first, step.second, step.kappa)
            case Phase() | Rotate():
                self._rotate(step.mode, step.theta)
            case Measure():
                self._measure(step.mode, step.angle, step.outcome_id)
            case Displace():
                self._displace(step)
            case _:
                raise OracleError(f"Cannot propagate step {step!r}.")


def propagate(protocol: CompiledProtocol, *, exact: bool = False) -> OracleTable:
    """Propagate every quadrature of a protocol through its steps.

    With `exact`, coefficients are rationals: floats convert exactly, rotations must be
    quarter turns and squeezing must vanish.
    """
    state = _Propagator(protocol, exact)
    for step in protocol.steps:
        state.apply(step)
    return OracleTable(
        protocol=protocol.name,
        symbols=state.symbols,
        rows=state.rows,
        outcomes=state.outcomes,
        measured=state.measured,
        exact=exact,
    )
