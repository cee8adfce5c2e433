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

"""Tests for the protocol script language."""

import numpy as np
import pytest

from spinport.core.dsl import (
    BUILTINS,
    DiagnosticCode,
    DisplaceStmt,
    MeasureStmt,
    Num,
    ProtocolAST,
    ScriptParseError,
    SqueezeStmt,
    UnknownBuiltinError,
    builtin,
    builtin_source,
    compile_protocol,
    format_script,
    parse,
)
from spinport.core.engines import analytic_report
from spinport.core.protocols import (
    atom_to_atom_protocol,
    atom_to_light_protocol,
    run_protocol,
    swap_protocol,
)
from spinport.core.steps import ParameterRangeError
from spinport.models import MAX_SQUEEZING, AtomReadout, ProtocolConfig
from tests.fixtures.utils import EXAMPLE_DATA

MINIMAL = """\
protocol minimal
#: Squeeze, measure one half, correct the other.
mode a vacuum
mode b vacuum
squeeze a b r=0.5
measure x a -> m   # trailing comment
displace b p gain=-1 from=m
"""

CONFIGS = [
    ProtocolConfig(),
    ProtocolConfig(r=1.0, kappa=0.9, readout_ratio=1e4),
    ProtocolConfig(r=2.0, gains={"inv_sqrt_ratio": 0.02, "kappa": 1.1}),
]


def _diagnostics(text: str | bytes) -> list[tuple[int, int, DiagnosticCode]]:
    with pytest.raises(ScriptParseError) as error:
        parse(text)
    return [(d.line, d.column, d.code) for d in error.value.diagnostics]


def test_minimal_script():
    """A small script parses into declarations and steps."""
    ast = parse(MINIMAL)
    assert ast.name == "minimal"
    assert ast.description == "Squeeze, measure one half, correct the other."
    assert [d.name for d in ast.declarations] == ["a", "b"]
    assert ast.steps == (
        SqueezeStmt("a", "b", Num(value=0.5)),
        MeasureStmt("a", "m", quadrature="x"),
        DisplaceStmt("b", "p", ((Num(value=-1.0), "m"),)),
    )
    assert [step.line for step in ast.steps] == [5, 6, 7]


def test_variables_are_kept_symbolic():
    """Variables resolve only at compile time."""
    ast = parse("mode a vacuum\nmode b vacuum\nqnd a b k=-$kappa\n")
    k = ast.steps[0].k
    assert k == Num(variable="kappa", negated=True)
    assert str(k) == "-$kappa"
    assert k.resolve({"kappa": 0.7}) == -0.7
    protocol = compile_protocol(ast, ProtocolConfig(kappa=0.7))
    assert protocol.steps[0].kappa == -0.7


@pytest.mark.parametrize(
    "text, expected",
    [
        ("mode a vacuum\nqnd a c k=1", [(2, 7, DiagnosticCode.UNDECLARED_MODE)]),
        ("mode a vacuum\nmode a vacuum", [(2, 6, DiagnosticCode.DUPLICATE_MODE)]),
        ("mode a spin F=4.3 N=10", [(1, 13, DiagnosticCode.INVALID_DECLARATION)]),
        ("mode a light n=$r", [(1, 16, DiagnosticCode.INVALID_DECLARATION)]),
        ("mode a light n=0.5", [(1, 14, DiagnosticCode.INVALID_DECLARATION)]),
        (
            "mode a vacuum\nmode b vacuum\nmeasure x a -> m\nqnd a b k=1",
            [(4, 5, DiagnosticCode.USE_AFTER_MEASURE)],
        ),
        (
            "mode a vacuum\nmode b vacuum\ndisplace b x gain=1 from=m\n"
            + "measure x a -> m",
            [(3, 26, DiagnosticCode.FORWARD_OUTCOME_REFERENCE)],
        ),
        (
            "mode b vacuum\ndisplace b x gain=1 from=zz",
            [(2, 26, DiagnosticCode.UNDEFINED_OUTCOME)],
        ),
        (
            "mode a vacuum\nmode b vacuum\nmeasure x a -> m\nmeasure x b -> m",
            [(4, 16, DiagnosticCode.DUPLICATE_OUTCOME)],
        ),
        (
            "mode a vacuum\nmode b vacuum\nsqueeze a b r=$q",
            [(3, 15, DiagnosticCode.UNKNOWN_VARIABLE)],
        ),
        ("mode a vacuum\nphase a theta=1e999", [(2, 15, DiagnosticCode.NON_FINITE)]),
        ("mode a vacuum\nqnd a a k=1", [(2, 7, DiagnosticCode.SAME_MODE)]),
        (
            "mode a vacuum\nmode b vacuum\nsqueeze a b r=20.5",
            [(3, 15, DiagnosticCode.OUT_OF_RANGE)],
        ),
        (
            "mode a vacuum\nmode b vacuum\nqnd a b k=1e200",
            [(3, 11, DiagnosticCode.OUT_OF_RANGE)],
        ),
        (
            "mode a vacuum\nmode b vacuum\nmeasure x a -> m\n"
            + "displace b x gain=1e9 from=m",
            [(4, 19, DiagnosticCode.OUT_OF_RANGE)],
        ),
        ("mode a vacuum\nrotate a x angle=1", [(2, 8, DiagnosticCode.BAD_ROTATION)]),
        (
            "mode s spin F=1 N=10\nrotate s z angle=1",
            [(2, 10, DiagnosticCode.BAD_ROTATION)],
        ),
        (
            "mode a vacuum\noutput a\nmeasure x a -> m",
            [(2, 8, DiagnosticCode.MEASURED_OUTPUT)],
        ),
        ("frobnicate a", [(1, 1, DiagnosticCode.SYNTAX_ERROR)]),
        ("mode a vacuum\nmeasure x a => m", [(2, 13, DiagnosticCode.SYNTAX_ERROR)]),
        ("mode a vacuum\nphase a theta=abc", [(2, 15, DiagnosticCode.SYNTAX_ERROR)]),
        ("mode a vacuum\nphase a", [(2, 8, DiagnosticCode.SYNTAX_ERROR)]),
    ],
)
def test_diagnostics(text: str, expected: list):
    """Each kind of problem is reported at its position."""
    assert _diagnostics(text) == expected


def test_all_diagnostics_are_sorted():
    """Every problem is reported, ordered by line and column."""
    text = "qnd x y k=1\nmode a vacuum\nmode a vacuum\nphase a theta=$nope\n"
    assert _diagnostics(text) == [
        (1, 5, DiagnosticCode.UNDECLARED_MODE),
        (1, 7, DiagnosticCode.UNDECLARED_MODE),
        (3, 6, DiagnosticCode.DUPLICATE_MODE),
        (4, 15, DiagnosticCode.UNKNOWN_VARIABLE),
    ]


def test_diagnostic_text():
    """Diagnostics print as LINE:COLUMN: CODE: message."""
    with pytest.raises(ScriptParseError) as error:
        parse("mode a vacuum\nqnd a c k=1")
    assert str(error.value).startswith("2:7: UNDECLARED_MODE: ")


def test_invalid_utf8():
    """Undecodable bytes are located in the input."""
    assert _diagnostics(b"\xff") == [(1, 1, DiagnosticCode.ENCODING_ERROR)]
    assert _diagnostics(b"mode a vacuum\nmode \xff") == [
        (2, 6, DiagnosticCode.ENCODING_ERROR)
    ]


def test_line_endings_and_byte_order_mark():
    """CRLF endings and a leading byte order mark are accepted."""
    expected = parse(MINIMAL)
    assert parse(MINIMAL.replace("\n", "\r\n")) == expected
    assert parse("\ufeff" + MINIMAL) == expected
    assert parse(b"\xef\xbb\xbf" + MINIMAL.encode()) == expected


@pytest.mark.parametrize("name", BUILTINS)
def test_builtins_round_trip(name: str):
    """Printed builtins parse back to the same AST."""
    ast = builtin(name)
    assert parse(format_script(ast)) == ast
    assert format_script(parse(format_script(ast))) == format_script(ast)


def test_round_trip_of_all_statement_forms():
    """Angles, constants and negated variables survive printing."""
    text = (
        "protocol forms\n"
        "mode a coherent x=1.25 p=-0.5\n"
        "mode b vacuum\n"
        "mode s spin F=0.5 N=1000.0\n"
        "input a\n"
        "output b\n"
        "phase a theta=0.1\n"
        "rotate s x angle=-$r\n"
        "squeeze a b r=$r\n"
        "measure angle=0.25 a -> m\n"
        "measure p s -> q\n"
        "displace b x gain=-$kappa from=m gain=2e-3 from=q const=0.5\n"
    )
    ast = parse(text)
    assert parse(format_script(ast)) == ast


@pytest.mark.parametrize("cfg", CONFIGS)
@pytest.mark.parametrize(
    "name, build",
    [
        ("atom_to_light", atom_to_light_protocol),
        ("atom_to_atom", atom_to_atom_protocol),
        ("swap", swap_protocol),
    ],
)
def test_builtins_compile_to_hand_built_protocols(name, build, cfg):
    """Builtin scripts compile to the protocols built in code."""
    compiled = compile_protocol(builtin(name), cfg)
    assert compiled == build(cfg)
    expected = run_protocol(build(cfg), cfg).to_json()
    assert run_protocol(compiled, cfg).to_json() == expected


@pytest.mark.parametrize("cfg", CONFIGS)
def test_destructive_builtin(cfg: ProtocolConfig):
    """The destructive readout script matches the destructive variant."""
    destructive = cfg.model_copy(update={"atom_readout": AtomReadout.DESTRUCTIVE})
    compiled = compile_protocol(builtin("atom_to_light_destructive"), cfg)
    assert compiled == atom_to_light_protocol(destructive)
    expected = run_protocol(atom_to_light_protocol(destructive), destructive).to_json()
    assert run_protocol(compiled, destructive).to_json() == expected


def test_squeezing_limits_in_scripts():
    """Literals at the limit parse; budgets past it fail when compiled."""
    pair = "mode a vacuum\nmode b vacuum\n"
    parse(pair + f"squeeze a b r={MAX_SQUEEZING:g}\n")
    chained = parse(pair + "squeeze a b r=15\nsqueeze a b r=-15\n")
    with pytest.raises(ParameterRangeError):
        compile_protocol(chained, ProtocolConfig())
    symbolic = parse(pair + "squeeze a b r=$r\n")
    with pytest.raises(ParameterRangeError):
        compile_protocol(symbolic, ProtocolConfig(gains={"r": 25.0}))


def test_empty_protocol_is_identity():
    """Without steps the outputs are the inputs."""
    ast = parse("mode a coherent x=1 p=2\ninput a\noutput a\n")
    cfg = ProtocolConfig()
    report = analytic_report(compile_protocol(ast, cfg), cfg)
    assert report.protocol == "script"
    assert report.gain_matrix == [[1.0, 0.0], [0.0, 1.0]]
    assert report.output_moments[0].mean == [1.0, 2.0]
    assert (report.added_noise[0].x, report.added_noise[0].p) == (0.0, 0.0)
    assert report.fidelity_coherent == pytest.approx(1.0)


def test_independent_readout_blocks_commute():
    """Reordering the two probe readouts leaves the outputs unchanged."""
    source = builtin_source("atom_to_atom")
    head, rest = source.split("# probe along y through Bob's sample\n")
    bob, rest = rest.split("# probe along y through Alice's sample\n")
    alice, tail = rest.split("qnd B L2", 1)
    reordered = head + alice + bob + "qnd B L2" + tail
    cfg = ProtocolConfig(r=1.0, readout_ratio=1e2)
    original = analytic_report(compile_protocol(builtin("atom_to_atom"), cfg), cfg)
    swapped = analytic_report(compile_protocol(parse(reordered), cfg), cfg)
    assert np.allclose(
        swapped.output_moments[0].cov, original.output_moments[0].cov, atol=1e-12
    )
    assert np.allclose(swapped.gain_matrix, original.gain_matrix, atol=1e-12)


def test_builtin_shapes():
    """Builtins declare the expected systems and detections."""
    swap = builtin("swap")
    kinds = [decl.kind for decl in swap.declarations]
    assert kinds.count("spin") == 2
    assert kinds.count("light") == 2
    assert sum(isinstance(step, MeasureStmt) for step in swap.steps) == 2
    outcomes = {
        step.outcome
        for step in builtin("atom_to_atom").steps
        if isinstance(step, MeasureStmt)
    }
    assert outcomes == {"dA1", "dB1", "dA2", "dB2"}
    assert builtin("atom_to_light").description.startswith("Teleport")


def test_unknown_builtin():
    """Unknown builtin names carry their diagnostic code."""
    with pytest.raises(UnknownBuiltinError) as error:
        builtin("teleport_everything")
    assert error.value.code == DiagnosticCode.UNKNOWN_BUILTIN


def test_example_script():
    """The bundled coherent-state example teleports onto light."""
    ast = parse((EXAMPLE_DATA / "coherent_to_light.qp").read_bytes())
    cfg = ProtocolConfig(r=1.0)
    report = analytic_report(compile_protocol(ast, cfg), cfg)
    assert report.output_moments[0].label == "L2"
    assert report.output_moments[0].mean == pytest.approx([-0.5, -1.0], abs=1e-9)


def test_fuzzed_scripts_fail_cleanly():
    """Random token soup either parses or raises ScriptParseError."""
    rng = np.random.default_rng(7)
    vocabulary = [
        "protocol", "mode", "input", "output", "squeeze", "qnd", "phase", "rotate",
        "measure", "displace", "a", "b", "s", "vacuum", "spin", "light", "coherent",
        "x", "p", "z", "->", "r=1", "k=$kappa", "theta=-$r", "angle=0.5", "F=4",
        "N=10", "n=100", "x=1", "p=0", "gain=1", "from=m", "const=2", "m", "#",
        "#:", "1e999", "$", "=", "\t", "é",
    ]
    parsed = 0
    for _ in range(10_000):
        lines = []
        for _ in range(rng.integers(1, 5)):
            words = rng.choice(vocabulary, size=rng.integers(0, 7))
            lines.append(" ".join(words))
        text = "\n".join(lines)
        try:
            result = parse(text)
        except ScriptParseError as error:
            assert error.diagnostics
            assert all(d.line >= 1 and d.column >= 1 for d in error.diagnostics)
        else:
            assert isinstance(result, ProtocolAST)
            parsed += 1
    assert parsed > 0


def test_fuzzed_bytes_fail_cleanly():
    """Random byte strings never crash the parser."""
    rng = np.random.default_rng(11)
    symbols = b"mode qnd ab=$-> x p 0.5e\n\r#:\t\xff\xc3\xa9"
    alphabet = np.frombuffer(symbols, dtype=np.uint8)
    for _ in range(10_000):
        data = rng.choice(alphabet, size=rng.integers(0, 40)).tobytes()
        try:
            parse(data)
        except ScriptParseError as error:
            assert error.diagnostics
