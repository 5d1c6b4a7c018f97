"""OpenQASM 2.0 export and re-import of benchmark circuits.

Layers are separated by ``barrier`` statements so that the layer structure
survives a round trip. Pauli-frame gates carry a trailing ``// frame``
comment. ``zz`` and ``fsim`` are defined as gate macros over ``qelib1.inc``;
``rz`` and the macros agree with the in-package matrices up to a global phase.
"""

from __future__ import annotations

import ast
import operator
import re
from pathlib import Path
from typing import Iterable

import numpy as np

from .circuits import GATES, Circuit, Gate
from .exceptions import ExportError

QELIB_GATES = frozenset({"id", "x", "y", "z", "h", "s", "sdg", "t", "tdg", "rx", "ry", "rz", "u3", "cx", "cz"})
MACROS = {
    "zz": "gate zz(theta) a,b { cx a,b; rz(theta) b; cx a,b; }",
    "fsim": (
        "gate fsim(theta,phi) a,b { h a; h b; zz(theta) a,b; h a; h b; "
        "sdg a; sdg b; h a; h b; zz(theta) a,b; h a; h b; s a; s b; cu1(phi) a,b; }"
    ),
}
SUPPORTED_GATES = QELIB_GATES | set(MACROS)

_STMT = re.compile(r"^(?P<name>[a-z][a-z0-9_]*)\s*(?:\((?P<params>[^)]*)\))?\s+(?P<args>[^;]+);\s*(?://\s*(?P<tag>\w+))?$")
_ARG = re.compile(r"^q\[(\d+)\]$")


def _fmt(x: float) -> str:
    return repr(float(x))


def to_qasm(circ: Circuit) -> str:
    """Serialise ``circ``; raises :class:`ExportError` for gates without a QASM form."""
    used = {g.name for g in circ.gates()}
    bad = used - SUPPORTED_GATES
    if bad:
        raise ExportError(f"gates without an OpenQASM 2.0 form: {sorted(bad)}")
    lines = ["OPENQASM 2.0;", 'include "qelib1.inc";']
    if "zz" in used or "fsim" in used:
        lines.append(MACROS["zz"])
    if "fsim" in used:
        lines.append(MACROS["fsim"])
    lines.append(f"qreg q[{circ.n_qubits}];")
    for i, layer in enumerate(circ.layers):
        if i:
            lines.append("barrier q;")
        for g in layer:
            params = f"({','.join(_fmt(p) for p in g.params)})" if g.params else ""
            args = ",".join(f"q[{q}]" for q in g.qubits)
            lines.append(f"{g.name}{params} {args};" + (" // frame" if g.frame else ""))
    return "\n".join(lines) + "\n"


_OPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul, ast.Div: operator.truediv}


def _eval(expr: str) -> float:
    """Evaluate a numeric QASM parameter (numbers, ``pi`` and + - * /)."""

    def walk(node):
        if isinstance(node, ast.Expression):
            return walk(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            return float(node.value)
        if isinstance(node, ast.Name) and node.id == "pi":
            return float(np.pi)
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
            v = walk(node.operand)
            return -v if isinstance(node.op, ast.USub) else v
        if isinstance(node, ast.BinOp) and type(node.op) in _OPS:
            return _OPS[type(node.op)](walk(node.left), walk(node.right))
        raise ExportError(f"unsupported parameter expression {expr!r}")

    try:
        return walk(ast.parse(expr.strip(), mode="eval"))
    except SyntaxError as exc:
        raise ExportError(f"cannot parse parameter {expr!r}") from exc


def from_qasm(text: str, kind: str = "") -> Circuit:
    """Parse the subset of OpenQASM 2.0 written by :func:`to_qasm`."""
    n_qubits = None
    layers: list[list[Gate]] = [[]]
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("//") or line.startswith("OPENQASM") or line.startswith("include"):
            continue
        if line.startswith("gate "):
            continue
        m = re.match(r"^qreg\s+q\[(\d+)\];$", line)
        if m:
            n_qubits = int(m.group(1))
            continue
        if line.startswith("barrier"):
            layers.append([])
            continue
        m = _STMT.match(line)
        if not m or m.group("name") not in GATES:
            raise ExportError(f"unsupported statement: {line!r}")
        qubits = []
        for a in m.group("args").split(","):
            am = _ARG.match(a.strip())
            if not am:
                raise ExportError(f"unsupported argument {a!r} in {line!r}")
            qubits.append(int(am.group(1)))
        params = tuple(_eval(p) for p in m.group("params").split(",")) if m.group("params") else ()
        layers[-1].append(Gate(m.group("name"), tuple(qubits), params, frame=m.group("tag") == "frame"))
    if n_qubits is None:
        raise ExportError("missing qreg declaration")
    return Circuit(n_qubits, tuple(tuple(layer) for layer in layers if layer), kind)


def qasm_filename(spec_index: int, L: int, randomization: int = 0) -> str:
    return f"spec{spec_index}_L{L}_r{randomization}.qasm"


def export_suite(circuits: Iterable, out_dir: str | Path) -> list[Path]:
    """Write every :class:`~csb.protocol.BenchmarkCircuit` to ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for bc in circuits:
        path = out / qasm_filename(bc.spec_index, bc.L, bc.randomization)
        path.write_text(to_qasm(bc.circuit))
        paths.append(path)
    return paths
