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

"""A line-oriented language for protocol scripts (`.qp` files).

One statement per line, `#` starts a comment and `#:` lines form the description:

    protocol NAME
    input NAME | output NAME
    mode NAME vacuum | spin F=NUM N=NUM | light n=NUM | coherent x=NUM p=NUM
    squeeze NAME NAME r=NUM
    qnd NAME NAME k=NUM
    phase NAME theta=NUM
    rotate NAME x|y|z angle=NUM
    measure x|p|angle=NUM NAME -> NAME
    displace NAME x|p {gain=NUM from=NAME} [const=NUM]

Step arguments accept `$name` or `-$name` for the variables r, kappa, kappa_probe,
inv_sqrt_ratio and readout_ratio, substituted from a ProtocolConfig at compile time.
Literal squeezing parameters must lie within MAX_SQUEEZING, QND gains within
MAX_COUPLING and feedforward terms within MAX_GAIN; the squeezing a mode accumulates
over the script is checked when compiling.
Parsing validates the whole script and reports every problem as a Diagnostic.
"""

import math
import re
from dataclasses import dataclass, field
from enum import StrEnum
from importlib import resources

from spinport.core.spin_light import StokesNorm
from spinport.core.steps import (
    SCRIPT_VARIABLES,
    CompiledProtocol,
    ProtocolBuilder,
    script_variables,
)
from spinport.models import MAX_COUPLING, MAX_GAIN, MAX_SQUEEZING, ProtocolConfig

NAME_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")
NUM_RE = re.compile(r"[+-]?(?:\d+(?:\.\d*)?|\.\d+)(?:[eE][+-]?\d+)?", re.ASCII)
VAR_RE = re.compile(r"(?P<sign>-?)\$(?P<name>[A-Za-z_][A-Za-z0-9_]*)")

BUILTINS = ("atom_to_light", "atom_to_light_destructive", "atom_to_atom", "swap")

_DECLARATION_KEYS = {
    "vacuum": (),
    "spin": ("F", "N"),
    "light": ("n",),
    "coherent": ("x", "p"),
}
_POLARIZATION_AXIS = "x"


class DiagnosticCode(StrEnum):
    """Kinds of problems a script can have."""

    SYNTAX_ERROR = "SYNTAX_ERROR"
    ENCODING_ERROR = "ENCODING_ERROR"
    UNDECLARED_MODE = "UNDECLARED_MODE"
    DUPLICATE_MODE = "DUPLICATE_MODE"
    INVALID_DECLARATION = "INVALID_DECLARATION"
    USE_AFTER_MEASURE = "USE_AFTER_MEASURE"
    FORWARD_OUTCOME_REFERENCE = "FORWARD_OUTCOME_REFERENCE"
    UNDEFINED_OUTCOME = "UNDEFINED_OUTCOME"
    DUPLICATE_OUTCOME = "DUPLICATE_OUTCOME"
    UNKNOWN_VARIABLE = "UNKNOWN_VARIABLE"
    NON_FINITE = "NON_FINITE"
    OUT_OF_RANGE = "OUT_OF_RANGE"
    SAME_MODE = "SAME_MODE"
    BAD_ROTATION = "BAD_ROTATION"
    MEASURED_OUTPUT = "MEASURED_OUTPUT"
    UNKNOWN_BUILTIN = "UNKNOWN_BUILTIN"


@dataclass(frozen=True, order=True)
class Diagnostic:
    """A problem at a 1-based line and column."""

    line: int
    column: int
    code: DiagnosticCode
    message: str

    def __str__(self) -> str:
        return f"{self.line}:{self.column}: {self.code}: {self.message}"


class ScriptParseError(ValueError):
    """Raised with all diagnostics of a script, ordered by position."""

    def __init__(self, diagnostics: list[Diagnostic]):
        self.diagnostics = sorted(diagnostics)
        super().__init__("\n".join(str(d) for d in self.diagnostics))


class UnknownBuiltinError(LookupError):
    """Raised for builtin script names that do not exist."""

    code = DiagnosticCode.UNKNOWN_BUILTIN


@dataclass(frozen=True)
class Num:
    """A literal number or a (possibly negated) script variable."""

    value: float | None = None
    variable: str | None = None
    negated: bool = False

    def resolve(self, variables: dict[str, float]) -> float:
        """The numeric value, with variables substituted."""
        if self.variable is None:
            return float(self.value)  # type: ignore[arg-type]
        value = variables[self.variable]
        return -value if self.negated else value

    def __str__(self) -> str:
        if self.variable is not None:
            return f"{'-' if self.negated else ''}${self.variable}"
        return repr(self.value)


@dataclass(frozen=True)
class ModeDeclNode:
    """`mode NAME KIND ...`"""

    name: str
    kind: str
    params: tuple[tuple[str, Num], ...] = ()
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class SqueezeStmt:
    """`squeeze A B r=...`"""

    first: str
    second: str
    r: Num
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class QndStmt:
    """`qnd A B k=...`"""

    first: str
    second: str
    k: Num
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class PhaseStmt:
    """`phase A theta=...`"""

    mode: str
    theta: Num
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class RotateStmt:
    """`rotate A AXIS angle=...`"""

    mode: str
    axis: str
    angle: Num
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class MeasureStmt:
    """`measure x|p|angle=... A -> ID`; exactly one of quadrature and angle."""

    mode: str
    outcome: str
    quadrature: str | None = None
    angle: Num | None = None
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class DisplaceStmt:
    """`displace A x|p {gain=... from=ID} [const=...]`"""

    mode: str
    quadrature: str
    terms: tuple[tuple[Num, str], ...] = ()
    const: Num | None = None
    line: int = field(default=0, compare=False)


StepNode = SqueezeStmt | QndStmt | PhaseStmt | RotateStmt | MeasureStmt | DisplaceStmt


@dataclass(frozen=True)
class ProtocolAST:
    """A parsed and validated protocol script."""

    name: str | None
    description: str
    declarations: tuple[ModeDeclNode, ...]
    steps: tuple[StepNode, ...]
    inputs: tuple[str, ...] = ()
    outputs: tuple[str, ...] = ()


@dataclass(frozen=True)
class _Token:
    text: str
    column: int

    @property
    def end(self) -> int:
        return self.column + len(self.text)


class _Parser:
    """Single pass over the lines; semantic checks follow statement order."""

    def __init__(self):
        self.diagnostics: list[Diagnostic] = []
        self.line = 0
        self.name: str | None = None
        self.description: list[str] = []
        self.declarations: list[ModeDeclNode] = []
        self.steps: list[StepNode] = []
        self.inputs: list[str] = []
        self.outputs: list[tuple[str, int, int]] = []
        self.kinds: dict[str, str] = {}
        self.measured: set[str] = set()
        self.outcomes: set[str] = set()
        self.pending: list[tuple[str, int, int]] = []
        self.handlers = {
            "protocol": self._protocol,
            "input": self._input,
            "output": self._output,
            "mode": self._mode,
            "squeeze": self._two_mode,
            "qnd": self._two_mode,
            "phase": self._phase,
            "rotate": self._rotate,
            "measure": self._measure,
            "displace": self._displace,
        }

    def error(self, code: DiagnosticCode, column: int, message: str):
        self.diagnostics.append(Diagnostic(self.line, column, code, message))

    def run(self, text: str) -> ProtocolAST:
        for number, raw in enumerate(text.splitlines(), start=1):
            self.line = number
            self._statement(raw)
        self._finish()
        if self.diagnostics:
            raise ScriptParseError(self.diagnostics)
        return ProtocolAST(
            name=self.name,
            description="\n".join(self.description),
            declarations=tuple(self.declarations),
            steps=tuple(self.steps),
            inputs=tuple(self.inputs),
            outputs=tuple(name for name, _, _ in self.outputs),
        )

    def _statement(self, raw: str):
        stripped = raw.lstrip()
        if stripped.startswith("#:"):
            self.description.append(stripped[2:].strip())
            return
        code = raw.split("#", 1)[0]
        tokens = [_Token(m.group(), m.start() + 1) for m in re.finditer(r"\S+", code)]
        if not tokens:
            return
        handler = self.handlers.get(tokens[0].text)
        if handler is None:
            self.error(
                DiagnosticCode.SYNTAX_ERROR,
                tokens[0].column,
                f"Unknown statement '{tokens[0].text}'.",
            )
            return
        handler(tokens)

    def _finish(self):
        for outcome, line, column in self.pending:
            self.line = line
            if outcome in self.outcomes:
                self.error(
                    DiagnosticCode.FORWARD_OUTCOME_REFERENCE,
                    column,
                    f"Outcome '{outcome}' is used before the measurement defining it.",
                )
            else:
                self.error(
                    DiagnosticCode.UNDEFINED_OUTCOME,
                    column,
                    f"Outcome '{outcome}' is never defined.",
                )
        for name, line, column in self.outputs:
            if name in self.measured:
                self.line = line
                self.error(
                    DiagnosticCode.MEASURED_OUTPUT,
                    column,
                    f"Output mode '{name}' is measured during the protocol.",
                )

    # token helpers

    def _arity(self, tokens: list[_Token], count: int, usage: str) -> bool:
        if len(tokens) == count:
            return True
        column = tokens[count].column if len(tokens) > count else tokens[-1].end
        self.error(DiagnosticCode.SYNTAX_ERROR, column, f"Expected '{usage}'.")
        return False

    def _name(self, token: _Token) -> str | None:
        if NAME_RE.fullmatch(token.text):
            return token.text
        self.error(
            DiagnosticCode.SYNTAX_ERROR, token.column, f"Invalid name '{token.text}'."
        )
        return None

    def _declared(self, token: _Token) -> str | None:
        name = self._name(token)
        if name is not None and name not in self.kinds:
            self.error(
                DiagnosticCode.UNDECLARED_MODE,
                token.column,
                f"Mode '{name}' is not declared.",
            )
            return None
        return name

    def _live(self, token: _Token) -> str | None:
        name = self._declared(token)
        if name is not None and name in self.measured:
            self.error(
                DiagnosticCode.USE_AFTER_MEASURE,
                token.column,
                f"Mode '{name}' was already measured.",
            )
            return None
        return name

    def _keyed(
        self,
        token: _Token,
        key: str,
        allow_variables: bool = True,
        limit: float | None = None,
    ) -> Num | None:
        prefix = f"{key}="
        if not token.text.startswith(prefix):
            self.error(
                DiagnosticCode.SYNTAX_ERROR,
                token.column,
                f"Expected '{prefix}<number>', got '{token.text}'.",
            )
            return None
        column = token.column + len(prefix)
        num = self._number(token.text[len(prefix) :], column, allow_variables)
        if (
            num is not None
            and num.value is not None
            and limit is not None
            and abs(num.value) > limit
        ):
            self.error(
                DiagnosticCode.OUT_OF_RANGE,
                column,
                f"'{key}' must lie within [-{limit:g}, {limit:g}].",
            )
            return None
        return num

    def _number(self, text: str, column: int, allow_variables: bool) -> Num | None:
        variable = VAR_RE.fullmatch(text)
        if variable:
            name = variable.group("name")
            if not allow_variables:
                self.error(
                    DiagnosticCode.INVALID_DECLARATION,
                    column,
                    "Declarations take literal numbers only.",
                )
                return None
            if name not in SCRIPT_VARIABLES:
                self.error(
                    DiagnosticCode.UNKNOWN_VARIABLE,
                    column,
                    f"Unknown variable '${name}'; known: "
                    + ", ".join(SCRIPT_VARIABLES)
                    + ".",
                )
                return None
            return Num(variable=name, negated=variable.group("sign") == "-")
        if NUM_RE.fullmatch(text):
            value = float(text)
            if not math.isfinite(value):
                self.error(
                    DiagnosticCode.NON_FINITE, column, f"Number '{text}' is not finite."
                )
                return None
            return Num(value=value)
        self.error(DiagnosticCode.SYNTAX_ERROR, column, f"Invalid number '{text}'.")
        return None

    # statements

    def _protocol(self, tokens: list[_Token]):
        if not self._arity(tokens, 2, "protocol NAME"):
            return
        name = self._name(tokens[1])
        if name is not None and self.name is not None:
            self.error(
                DiagnosticCode.SYNTAX_ERROR, tokens[0].column, "Protocol named twice."
            )
        elif name is not None:
            self.name = name

    def _input(self, tokens: list[_Token]):
        if not self._arity(tokens, 2, "input NAME"):
            return
        name = self._declared(tokens[1])
        if name is not None and name in self.inputs:
            self.error(
                DiagnosticCode.SYNTAX_ERROR,
                tokens[1].column,
                f"Mode '{name}' listed as input twice.",
            )
        elif name is not None:
            self.inputs.append(name)

    def _output(self, tokens: list[_Token]):
        if not self._arity(tokens, 2, "output NAME"):
            return
        name = self._declared(tokens[1])
        if name is not None and name in [out for out, _, _ in self.outputs]:
            self.error(
                DiagnosticCode.SYNTAX_ERROR,
                tokens[1].column,
                f"Mode '{name}' listed as output twice.",
            )
        elif name is not None:
            self.outputs.append((name, self.line, tokens[1].column))

    def _mode(self, tokens: list[_Token]):
        if len(tokens) < 3 or tokens[2].text not in _DECLARATION_KEYS:
            column = tokens[2].column if len(tokens) >= 3 else tokens[-1].end
            self.error(
                DiagnosticCode.SYNTAX_ERROR,
                column,
                "Expected 'mode NAME vacuum|spin|light|coherent ...'.",
            )
            return
        kind = tokens[2].text
        keys = _DECLARATION_KEYS[kind]
        usage = " ".join(["mode NAME", kind, *(f"{k}=NUM" for k in keys)])
        if not self._arity(tokens, 3 + len(keys), usage):
            return
        name = self._name(tokens[1])
        params = [
            (key, self._keyed(token, key, allow_variables=False))
            for key, token in zip(keys, tokens[3:], strict=True)
        ]
        if name is None:
            return
        if name in self.kinds:
            self.error(
                DiagnosticCode.DUPLICATE_MODE,
                tokens[1].column,
                f"Mode '{name}' is declared twice.",
            )
            return
        self.kinds[name] = kind
        values = {key: num.value for key, num in params if num is not None}
        if len(values) != len(keys):
            return
        problem = _declaration_problem(kind, values)
        if problem:
            self.error(DiagnosticCode.INVALID_DECLARATION, tokens[3].column, problem)
            return
        resolved = tuple((key, num) for key, num in params if num is not None)
        self.declarations.append(ModeDeclNode(name, kind, resolved, self.line))

    def _two_mode(self, tokens: list[_Token]):
        keyword = tokens[0].text
        key = "r" if keyword == "squeeze" else "k"
        if not self._arity(tokens, 4, f"{keyword} NAME NAME {key}=NUM"):
            return
        first, second = self._live(tokens[1]), self._live(tokens[2])
        limit = MAX_SQUEEZING if keyword == "squeeze" else MAX_COUPLING
        value = self._keyed(tokens[3], key, limit=limit)
        if first is not None and first == second:
            self.error(
                DiagnosticCode.SAME_MODE,
                tokens[2].column,
                f"'{keyword}' needs two distinct modes.",
            )
            return
        if first is None or second is None or value is None:
            return
        if keyword == "squeeze":
            self.steps.append(SqueezeStmt(first, second, value, self.line))
        else:
            self.steps.append(QndStmt(first, second, value, self.line))

    def _phase(self, tokens: list[_Token]):
        if not self._arity(tokens, 3, "phase NAME theta=NUM"):
            return
        mode, theta = self._live(tokens[1]), self._keyed(tokens[2], "theta")
        if mode is not None and theta is not None:
            self.steps.append(PhaseStmt(mode, theta, self.line))

    def _rotate(self, tokens: list[_Token]):
        if not self._arity(tokens, 4, "rotate NAME x|y|z angle=NUM"):
            return
        mode, axis = self._live(tokens[1]), tokens[2].text
        angle = self._keyed(tokens[3], "angle")
        if axis not in ("x", "y", "z"):
            self.error(
                DiagnosticCode.SYNTAX_ERROR, tokens[2].column, f"Invalid axis '{axis}'."
            )
            return
        if mode is None or angle is None:
            return
        if self.kinds[mode] not in ("spin", "light"):
            self.error(
                DiagnosticCode.BAD_ROTATION,
                tokens[1].column,
                f"Mode '{mode}' is not a spin or light system.",
            )
        elif axis != _POLARIZATION_AXIS:
            self.error(
                DiagnosticCode.BAD_ROTATION,
                tokens[2].column,
                f"Rotations must be about the polarization axis"
                + f" '{_POLARIZATION_AXIS}', got '{axis}'.",
            )
        else:
            self.steps.append(RotateStmt(mode, axis, angle, self.line))

    def _measure(self, tokens: list[_Token]):
        if not self._arity(tokens, 5, "measure x|p|angle=NUM NAME -> NAME"):
            return
        selector = tokens[1]
        quadrature, angle = None, None
        if selector.text in ("x", "p"):
            quadrature = selector.text
        else:
            angle = self._keyed(selector, "angle")
        mode = self._live(tokens[2])
        if tokens[3].text != "->":
            self.error(
                DiagnosticCode.SYNTAX_ERROR, tokens[3].column, "Expected '->'."
            )
            return
        outcome = self._name(tokens[4])
        if outcome is not None and outcome in self.outcomes:
            self.error(
                DiagnosticCode.DUPLICATE_OUTCOME,
                tokens[4].column,
                f"Outcome '{outcome}' is defined twice.",
            )
            return
        if outcome is not None:
            self.outcomes.add(outcome)
        if mode is None or outcome is None or (quadrature is None and angle is None):
            return
        self.measured.add(mode)
        self.steps.append(MeasureStmt(mode, outcome, quadrature, angle, self.line))

    def _displace(self, tokens: list[_Token]):
        if len(tokens) < 3:
            self._arity(tokens, 3, "displace NAME x|p {gain=NUM from=NAME} [const=NUM]")
            return
        mode = self._live(tokens[1])
        quadrature = tokens[2].text
        if quadrature not in ("x", "p"):
            self.error(
                DiagnosticCode.SYNTAX_ERROR,
                tokens[2].column,
                f"Expected quadrature 'x' or 'p', got '{quadrature}'.",
            )
            return
        terms, const, ok = self._feedforward(tokens[3:])
        if mode is not None and ok:
            self.steps.append(
                DisplaceStmt(mode, quadrature, tuple(terms), const, self.line)
            )

    def _feedforward(
        self, tokens: list[_Token]
    ) -> tuple[list[tuple[Num, str]], Num | None, bool]:
        terms: list[tuple[Num, str]] = []
        const: Num | None = None
        ok = True
        k = 0
        while k < len(tokens):
            token = tokens[k]
            if token.text.startswith("const="):
                if k != len(tokens) - 1:
                    self.error(
                        DiagnosticCode.SYNTAX_ERROR,
                        token.column,
                        "'const=' must be the last argument.",
                    )
                    return terms, const, False
                const = self._keyed(token, "const", limit=MAX_GAIN)
                ok = ok and const is not None
                break
            gain = self._keyed(token, "gain", limit=MAX_GAIN)
            if k + 1 >= len(tokens) or not tokens[k + 1].text.startswith("from="):
                column = tokens[k + 1].column if k + 1 < len(tokens) else token.end
                self.error(
                    DiagnosticCode.SYNTAX_ERROR,
                    column,
                    "Expected 'from=<outcome>' after 'gain='.",
                )
                return terms, const, False
            ref = tokens[k + 1]
            outcome = ref.text[len("from=") :]
            if not NAME_RE.fullmatch(outcome):
                self.error(
                    DiagnosticCode.SYNTAX_ERROR,
                    ref.column + 5,
                    f"Invalid outcome name '{outcome}'.",
                )
                ok = False
            elif outcome not in self.outcomes:
                self.pending.append((outcome, self.line, ref.column + 5))
            if gain is None:
                ok = False
            else:
                terms.append((gain, outcome))
            k += 2
        return terms, const, ok


def _declaration_problem(kind: str, values: dict[str, float | None]) -> str | None:
    if kind == "spin":
        spin, atoms = values["F"], values["N"]
        if spin is None or spin <= 0 or not float(2 * spin).is_integer():
            return f"F must be a positive half-integer, got {spin}."
        if atoms is None or atoms < 1:
            return f"N must be at least 1, got {atoms}."
    if kind == "light" and (values["n"] is None or values["n"] < 1):
        return f"n must be at least 1, got {values['n']}."
    return None


def parse(text: str | bytes) -> ProtocolAST:
    """Parse and validate a script; raise ScriptParseError with all diagnostics."""
    if isinstance(text, bytes):
        try:
            text = text.decode("utf-8")
        except UnicodeDecodeError as error:
            line = text.count(b"\n", 0, error.start) + 1
            column = error.start - (text.rfind(b"\n", 0, error.start) + 1) + 1
            raise ScriptParseError(
                [
                    Diagnostic(
                        line, column, DiagnosticCode.ENCODING_ERROR, "Invalid UTF-8."
                    )
                ]
            ) from error
    return _Parser().run(text.removeprefix("\ufeff"))


def _format_step(step: StepNode) -> str:
    match step:
        case SqueezeStmt():
            return f"squeeze {step.first} {step.second} r={step.r}"
        case QndStmt():
            return f"qnd {step.first} {step.second} k={step.k}"
        case PhaseStmt():
            return f"phase {step.mode} theta={step.theta}"
        case RotateStmt():
            return f"rotate {step.mode} {step.axis} angle={step.angle}"
        case MeasureStmt():
            selector = step.quadrature or f"angle={step.angle}"
            return f"measure {selector} {step.mode} -> {step.outcome}"
        case DisplaceStmt():
            parts = [f"displace {step.mode} {step.quadrature}"]
            parts += [f"gain={gain} from={outcome}" for gain, outcome in step.terms]
            if step.const is not None:
                parts.append(f"const={step.const}")
            return " ".join(parts)


def format_script(ast: ProtocolAST) -> str:
    """Print a script that parses back to an equal AST."""
    lines = []
    if ast.name is not None:
        lines.append(f"protocol {ast.name}")
    if ast.description:
        description = ast.description.split("\n")
        lines += [f"#: {line}" if line else "#:" for line in description]
    for decl in ast.declarations:
        params = "".join(f" {key}={num}" for key, num in decl.params)
        lines.append(f"mode {decl.name} {decl.kind}{params}")
    lines += [f"input {name}" for name in ast.inputs]
    lines += [f"output {name}" for name in ast.outputs]
    lines += [_format_step(step) for step in ast.steps]
    return "\n".join(lines) + "\n"


def compile_protocol(
    ast: ProtocolAST,
    cfg: ProtocolConfig,
    stokes_norm: StokesNorm = StokesNorm.CANONICAL,
) -> CompiledProtocol:
    """Compile a validated script into engine steps with variables substituted."""
    variables = script_variables(cfg)
    builder = ProtocolBuilder(ast.name or "script", ast.description, stokes_norm)
    for decl in ast.declarations:
        builder.mode(
            decl.name,
            decl.kind,  # type: ignore[arg-type]
            **{key: num.resolve(variables) for key, num in decl.params},
        )
    for name in ast.inputs:
        builder.input(name)
    for name in ast.outputs:
        builder.output(name)
    for step in ast.steps:
        _add_step(builder, step, variables)
    return builder.build()


def _add_step(builder: ProtocolBuilder, step: StepNode, variables: dict[str, float]):
    match step:
        case SqueezeStmt():
            builder.squeeze(step.first, step.second, step.r.resolve(variables))
        case QndStmt():
            builder.qnd(step.first, step.second, step.k.resolve(variables))
        case PhaseStmt():
            builder.phase(step.mode, step.theta.resolve(variables))
        case RotateStmt():
            builder.rotate(step.mode, step.axis, step.angle.resolve(variables))
        case MeasureStmt(angle=None):
            builder.measure(step.mode, step.outcome, quadrature=step.quadrature)
        case MeasureStmt():
            angle = step.angle.resolve(variables)  # type: ignore[union-attr]
            builder.measure(step.mode, step.outcome, angle=angle)
        case DisplaceStmt():
            terms = tuple((o, gain.resolve(variables)) for gain, o in step.terms)
            const = 0.0 if step.const is None else step.const.resolve(variables)
            builder.displace(step.mode, step.quadrature, terms, const)


def builtin_source(name: str) -> str:
    """Text of a builtin script."""
    if name not in BUILTINS:
        raise UnknownBuiltinError(
            f"Unknown builtin '{name}'; available: {', '.join(BUILTINS)}."
        )
    return (
        resources.files("spinport.builtins").joinpath(f"{name}.qp").read_text("utf-8")
    )


def builtin(name: str) -> ProtocolAST:
    """Parsed builtin script."""
    return parse(builtin_source(name))
