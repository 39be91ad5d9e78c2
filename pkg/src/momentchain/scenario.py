"""Line-oriented scenario descriptions: parser, renderer, and runner.

Grammar (whitespace-separated tokens, ``#`` starts a comment, moments are
written ``@k``):

    system NAME qubit
    system NAME qudit D
    prepare SYS [@K] ket C C ...          # C: complex literal like 0.5-0.5i
    prepare SYS [@K] state TAG            # TAG: +x -x +y -y +z -z
    prepare SYSA SYSB [@K] singlet
    prepare SYSA SYSB [@K] bell WHICH     # WHICH: phi+ phi- psi+ psi-
    link SYS @K KIND                      # step arriving at K (from K-1)
    link SYS @A:@B KIND                   # explicit stride (A < B)
        KIND: identity | unitary U
        U: h | x | y | z | rx(T) | ry(T) | rz(T) | [[C,C],[C,C]]
    collapse SYS @K ket C C ...           # rank-one link ending at K
    collapse SYS @K state TAG
    partial SYS @K ALPHA BETA basis AXIS [outcome +1|-1]
    measure SYS @K pauli AXIS | measure SYS @K spin THETA PHI
    measure SYS @K obs [[...]]
    meter-diff SYS @T1 @T2 pauli AXIS [dim D]
    meter-diff SYS @T1 @T2 spin THETA PHI [dim D]
    postselect SYS ket C C ... | postselect SYS state TAG
    bellpost SYSA SYSB                    # final pair projection onto phi+

Angles are radians. Every step a system traverses must be declared: the
chain of links reachable from a preparation forms a thread, and stride > 1
links skip moments that then belong to no thread (a system may carry several
independent threads, each with its own preparation). Within one moment,
arriving links act first, then pointer couplings, then projective
measurements; post-selections run after the final moment.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

import numpy as np

from .engine import ApplyStep, MeasureStep, Program, Readout, assemble, run_exact, run_sampled
from .errors import ScenarioParseError
from .meter import DEFAULT_POINTER_DIM, PointerRegister, coupling_matrix
from .qcore import (
    PAULI_X,
    PAULI_Y,
    PAULI_Z,
    Operator,
    RegisterLayout,
    StateVector,
    bell_state,
    eigen_projectors,
    integer_eigen_projectors,
    make_spin_observable,
    singlet as make_singlet,
    tensor,
)
from .stats import OutcomeStats, report

__all__ = [
    "Scenario",
    "parse_scenario",
    "render_scenario",
    "run_scenario",
    "report",
]

_NAMED_TAGS = ("+x", "-x", "+y", "-y", "+z", "-z")
_BELL_TAGS = ("phi+", "phi-", "psi+", "psi-")
_PAULI_MAP = {"x": PAULI_X, "y": PAULI_Y, "z": PAULI_Z}


# ---------------------------------------------------------------------------
# Declarative pieces (plain values, so scenarios compare structurally)


@dataclass(frozen=True)
class SystemDecl:
    name: str
    dim: int
    line: int = field(default=0, compare=False)
    col: int = field(default=0, compare=False)


@dataclass(frozen=True)
class PrepSpec:
    systems: tuple[str, ...]
    moment: int
    kind: str  # ket | state | singlet | bell
    payload: tuple
    line: int = field(default=0, compare=False)
    col: int = field(default=0, compare=False)


@dataclass(frozen=True)
class LinkSpec:
    system: str
    t_from: int
    t_to: int
    kind: str  # identity | unitary | collapse | partial
    payload: tuple
    line: int = field(default=0, compare=False)
    col: int = field(default=0, compare=False)


@dataclass(frozen=True)
class MeasureSpec:
    system: str
    moment: int
    obs: tuple
    line: int = field(default=0, compare=False)
    col: int = field(default=0, compare=False)


@dataclass(frozen=True)
class MeterSpec:
    system: str
    t1: int
    t2: int
    obs: tuple
    dim: int | None = None
    line: int = field(default=0, compare=False)
    col: int = field(default=0, compare=False)


@dataclass(frozen=True)
class PostSelectSpec:
    system: str
    kind: str
    payload: tuple
    line: int = field(default=0, compare=False)
    col: int = field(default=0, compare=False)


@dataclass(frozen=True)
class BellPostSpec:
    a: str
    b: str
    line: int = field(default=0, compare=False)
    col: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Scenario:
    systems: tuple[SystemDecl, ...] = ()
    preparations: tuple[PrepSpec, ...] = ()
    links: tuple[LinkSpec, ...] = ()
    measures: tuple[MeasureSpec, ...] = ()
    meters: tuple[MeterSpec, ...] = ()
    postselects: tuple[PostSelectSpec, ...] = ()
    bellposts: tuple[BellPostSpec, ...] = ()


# ---------------------------------------------------------------------------
# Literals


def _parse_complex(tok: str) -> complex:
    s = tok.strip()
    try:
        if not s.endswith("i"):
            return complex(float(s), 0.0)
        body = s[:-1]
        for idx in range(len(body) - 1, 0, -1):
            if body[idx] in "+-" and body[idx - 1] not in "eE":
                imag = body[idx:] or "1"
                if imag in ("+", "-"):
                    imag += "1"
                return complex(float(body[:idx]), float(imag))
        if body in ("", "+"):
            return 1j
        if body == "-":
            return -1j
        return complex(0.0, float(body))
    except ValueError:
        raise ValueError(f"bad complex literal {tok!r}") from None


def _render_float(x: float) -> str:
    if x == int(x) and abs(x) < 1e15:
        return str(int(x))
    return repr(float(x))


def _render_complex(z: complex) -> str:
    re_, im = float(z.real), float(z.imag)
    if im == 0.0:
        return _render_float(re_)
    if re_ == 0.0:
        return f"{_render_float(im)}i"
    sign = "+" if im >= 0 else "-"
    return f"{_render_float(re_)}{sign}{_render_float(abs(im))}i"


def _parse_matrix_token(tok: str) -> tuple[tuple[complex, ...], ...]:
    if not (tok.startswith("[[") and tok.endswith("]]")):
        raise ValueError("matrix literal must look like [[..],[..]]")
    body = tok[2:-2]
    rows = body.split("],[")
    out = []
    for row in rows:
        out.append(tuple(_parse_complex(e) for e in row.split(",") if e != ""))
    if not out or any(len(r) != len(out) for r in out):
        raise ValueError("matrix literal must be square")
    return tuple(out)


def _render_matrix(rows) -> str:
    return "[[" + "],[".join(",".join(_render_complex(z) for z in r) for r in rows) + "]]"


_NAMED_UNITARY_RE = re.compile(r"^(rx|ry|rz)\(([^)]*)\)$")


def _named_unitary_matrix(name: str, arg: float | None) -> np.ndarray:
    if name == "h":
        return np.array([[1, 1], [1, -1]], dtype=np.complex128) / math.sqrt(2)
    if name in _PAULI_MAP:
        return np.array(_PAULI_MAP[name])
    axis = name[1]
    c, s = math.cos(arg / 2), math.sin(arg / 2)
    return c * np.eye(2) - 1j * s * _PAULI_MAP[axis]


_TAG_AMPS = {
    "+z": (1, 0), "-z": (0, 1),
    "+x": (1 / math.sqrt(2), 1 / math.sqrt(2)),
    "-x": (1 / math.sqrt(2), -1 / math.sqrt(2)),
    "+y": (1 / math.sqrt(2), 1j / math.sqrt(2)),
    "-y": (1 / math.sqrt(2), -1j / math.sqrt(2)),
}


def _state_amplitudes(kind: str, payload: tuple) -> np.ndarray:
    if kind == "ket":
        v = np.array(payload, dtype=np.complex128)
    else:
        v = np.array(_TAG_AMPS[payload[0]], dtype=np.complex128)
    return v / np.linalg.norm(v)


def _obs_matrix_and_name(obs: tuple) -> tuple[np.ndarray, str]:
    kind = obs[0]
    if kind == "pauli":
        return np.array(_PAULI_MAP[obs[1]]), obs[1]
    if kind == "spin":
        theta, phi = obs[1], obs[2]
        return make_spin_observable(theta, phi).matrix, f"spin({theta:g},{phi:g})"
    return np.array(obs[1], dtype=np.complex128), "obs"


# ---------------------------------------------------------------------------
# Tokenizer / cursor


class _Cursor:
    def __init__(self, line_text: str, lineno: int):
        self.lineno = lineno
        self.toks = [(m.group(0), m.start() + 1) for m in re.finditer(r"\S+", line_text)]
        self.pos = 0
        self.end_col = len(line_text) + 1

    def fail(self, msg: str, col: int | None = None):
        if col is None:
            col = self.toks[self.pos - 1][1] if self.pos > 0 else 1
        raise ScenarioParseError(msg, self.lineno, col)

    def next(self, what: str) -> tuple[str, int]:
        if self.pos >= len(self.toks):
            raise ScenarioParseError(f"expected {what}", self.lineno, self.end_col)
        tok = self.toks[self.pos]
        self.pos += 1
        return tok

    def peek(self) -> str | None:
        return self.toks[self.pos][0] if self.pos < len(self.toks) else None

    def rest(self) -> list[tuple[str, int]]:
        out = self.toks[self.pos:]
        self.pos = len(self.toks)
        return out

    def finish(self):
        if self.pos < len(self.toks):
            tok, col = self.toks[self.pos]
            raise ScenarioParseError(f"unexpected trailing token {tok!r}", self.lineno, col)


def _parse_moment(cur: _Cursor, what: str = "moment") -> int:
    tok, col = cur.next(what)
    if not tok.startswith("@"):
        cur.fail(f"expected {what} like @2, got {tok!r}", col)
    try:
        k = int(tok[1:])
    except ValueError:
        cur.fail(f"bad moment {tok!r}", col)
    if k < 0:
        cur.fail("moments must be non-negative", col)
    return k


def _parse_float(cur: _Cursor, what: str) -> float:
    tok, col = cur.next(what)
    try:
        return float(tok)
    except ValueError:
        cur.fail(f"expected {what}, got {tok!r}", col)


# ---------------------------------------------------------------------------
# Parser


def parse_scenario(text: str) -> Scenario:
    """Parse scenario text; raises :class:`ScenarioParseError` with position."""
    systems: list[SystemDecl] = []
    preps: list[PrepSpec] = []
    links: list[LinkSpec] = []
    measures: list[MeasureSpec] = []
    meters: list[MeterSpec] = []
    posts: list[PostSelectSpec] = []
    bells: list[BellPostSpec] = []
    sysmap: dict[str, SystemDecl] = {}

    def known_system(cur: _Cursor) -> str:
        tok, col = cur.next("system name")
        if tok not in sysmap:
            cur.fail(f"undeclared system {tok!r}", col)
        return tok

    def state_spec(cur: _Cursor, dim: int) -> tuple[str, tuple]:
        tok, col = cur.next("'ket' or 'state'")
        if tok == "ket":
            entries = cur.rest()
            if len(entries) != dim:
                cur.fail(f"expected {dim} amplitudes, got {len(entries)}",
                         entries[0][1] if entries else None)
            amps = []
            for t, c in entries:
                try:
                    amps.append(_parse_complex(t))
                except ValueError as e:
                    cur.fail(str(e), c)
            norm = math.sqrt(sum(abs(a) ** 2 for a in amps))
            if abs(norm - 1.0) > 1e-9:
                cur.fail(f"unnormalized state literal (norm {norm:.12g})", col)
            return "ket", tuple(amps)
        if tok == "state":
            tag, tcol = cur.next("state tag")
            if tag not in _NAMED_TAGS:
                cur.fail(f"unknown state tag {tag!r}", tcol)
            if dim != 2:
                cur.fail("named states apply to qubit systems only", tcol)
            return "state", (tag,)
        cur.fail(f"expected 'ket' or 'state', got {tok!r}", col)

    for lineno, raw in enumerate(text.splitlines(), start=1):
        stripped = raw.split("#", 1)[0]
        cur = _Cursor(stripped, lineno)
        if not cur.toks:
            continue
        head, hcol = cur.next("directive")

        if head == "system":
            name, ncol = cur.next("system name")
            if name in sysmap:
                cur.fail(f"duplicate system {name!r}", ncol)
            if name.startswith("_") or name.startswith("@"):
                cur.fail("system names must not start with '_' or '@'", ncol)
            kind, kcol = cur.next("'qubit' or 'qudit'")
            if kind == "qubit":
                dim = 2
            elif kind == "qudit":
                dtok, dcol = cur.next("dimension")
                try:
                    dim = int(dtok)
                except ValueError:
                    cur.fail(f"bad dimension {dtok!r}", dcol)
                if dim < 2:
                    cur.fail("system dimension must be at least 2", dcol)
            else:
                cur.fail(f"expected 'qubit' or 'qudit', got {kind!r}", kcol)
            cur.finish()
            decl = SystemDecl(name, dim, lineno, hcol)
            systems.append(decl)
            sysmap[name] = decl

        elif head == "prepare":
            names = [known_system(cur)]
            while cur.peek() in sysmap and cur.peek() not in (None,):
                names.append(known_system(cur))
            moment = 0
            if cur.peek() and cur.peek().startswith("@"):
                moment = _parse_moment(cur)
            nxt = cur.peek()
            if nxt in ("singlet", "bell"):
                tok, col = cur.next("preparation kind")
                if len(names) != 2 or any(sysmap[n].dim != 2 for n in names):
                    cur.fail(f"'{tok}' preparations need two qubit systems", col)
                if tok == "bell":
                    which, wcol = cur.next("bell tag")
                    if which not in _BELL_TAGS:
                        cur.fail(f"unknown bell tag {which!r}", wcol)
                    payload = (which,)
                    kind = "bell"
                else:
                    payload = ()
                    kind = "singlet"
                cur.finish()
                preps.append(PrepSpec(tuple(names), moment, kind, payload, lineno, hcol))
            else:
                if len(names) != 1:
                    cur.fail("multi-system preparations must be 'singlet' or 'bell'")
                kind, payload = state_spec(cur, sysmap[names[0]].dim)
                cur.finish()
                preps.append(PrepSpec(tuple(names), moment, kind, payload, lineno, hcol))

        elif head == "link":
            name = known_system(cur)
            tok, col = cur.next("moment or range")
            if ":" in tok:
                a_s, b_s = tok.split(":", 1)
                if not (a_s.startswith("@") and b_s.startswith("@")):
                    cur.fail(f"bad link range {tok!r}", col)
                try:
                    t_from, t_to = int(a_s[1:]), int(b_s[1:])
                except ValueError:
                    cur.fail(f"bad link range {tok!r}", col)
            elif tok.startswith("@"):
                try:
                    t_to = int(tok[1:])
                except ValueError:
                    cur.fail(f"bad moment {tok!r}", col)
                t_from = t_to - 1
            else:
                cur.fail(f"expected moment like @2, got {tok!r}", col)
            if t_from < 0 or t_to <= t_from:
                cur.fail("time-ordering violation: link must advance in time", col)
            kind, kcol = cur.next("link kind")
            dim = sysmap[name].dim
            if kind == "identity":
                cur.finish()
                links.append(LinkSpec(name, t_from, t_to, "identity", (), lineno, hcol))
            elif kind == "unitary":
                utok, ucol = cur.next("unitary")
                if utok.startswith("[["):
                    try:
                        rows = _parse_matrix_token(utok)
                    except ValueError as e:
                        cur.fail(str(e), ucol)
                    m = np.array(rows, dtype=np.complex128)
                    if m.shape != (dim, dim):
                        cur.fail(f"matrix must be {dim}x{dim} for system {name!r}", ucol)
                    if np.max(np.abs(m.conj().T @ m - np.eye(dim))) > 1e-10:
                        cur.fail("non-unitary matrix literal", ucol)
                    payload = ("matrix", rows)
                else:
                    mobj = _NAMED_UNITARY_RE.match(utok)
                    if mobj:
                        try:
                            arg = float(mobj.group(2))
                        except ValueError:
                            cur.fail(f"bad angle in {utok!r}", ucol)
                        payload = ("named", mobj.group(1), arg)
                    elif utok in ("h", "x", "y", "z"):
                        payload = ("named", utok, None)
                    else:
                        cur.fail(f"unknown unitary {utok!r}", ucol)
                    if dim != 2:
                        cur.fail("named unitaries apply to qubit systems only", ucol)
                cur.finish()
                links.append(LinkSpec(name, t_from, t_to, "unitary", payload, lineno, hcol))
            else:
                cur.fail(f"unknown link kind {kind!r}", kcol)

        elif head == "collapse":
            name = known_system(cur)
            t_to = _parse_moment(cur)
            if t_to < 1:
                cur.fail("collapse links must arrive at moment 1 or later")
            kind, payload = state_spec(cur, sysmap[name].dim)
            cur.finish()
            links.append(
                LinkSpec(name, t_to - 1, t_to, "collapse", (kind,) + payload, lineno, hcol)
            )

        elif head == "partial":
            name = known_system(cur)
            if sysmap[name].dim != 2:
                cur.fail("partial links apply to qubit systems only")
            t_to = _parse_moment(cur)
            if t_to < 1:
                cur.fail("partial links must arrive at moment 1 or later")
            alpha = _parse_float(cur, "alpha")
            beta = _parse_float(cur, "beta")
            if alpha < 0 or beta < 0 or abs(alpha**2 + beta**2 - 1.0) > 1e-9:
                cur.fail("partial strengths must be non-negative with alpha^2+beta^2=1")
            kw, kcol = cur.next("'basis'")
            if kw != "basis":
                cur.fail(f"expected 'basis', got {kw!r}", kcol)
            axis, acol = cur.next("basis axis")
            if axis not in ("x", "y", "z"):
                cur.fail(f"unknown basis axis {axis!r}", acol)
            outcome = 1
            if cur.peek() == "outcome":
                cur.next("'outcome'")
                otok, ocol = cur.next("outcome sign")
                if otok not in ("+1", "-1", "1"):
                    cur.fail(f"outcome must be +1 or -1, got {otok!r}", ocol)
                outcome = 1 if otok in ("+1", "1") else -1
            cur.finish()
            links.append(
                LinkSpec(name, t_to - 1, t_to, "partial",
                         (float(alpha), float(beta), axis, outcome), lineno, hcol)
            )

        elif head == "measure":
            name = known_system(cur)
            moment = _parse_moment(cur)
            obs = _parse_observable(cur, sysmap[name].dim)
            cur.finish()
            measures.append(MeasureSpec(name, moment, obs, lineno, hcol))

        elif head == "meter-diff":
            name = known_system(cur)
            t1 = _parse_moment(cur, "first moment")
            t2 = _parse_moment(cur, "second moment")
            if not t1 < t2:
                cur.fail("time-ordering violation: meter moments must satisfy t1 < t2")
            obs = _parse_observable(cur, sysmap[name].dim, allow_dim=True)
            dim = None
            if cur.peek() == "dim":
                cur.next("'dim'")
                dtok, dcol = cur.next("pointer dimension")
                try:
                    dim = int(dtok)
                except ValueError:
                    cur.fail(f"bad pointer dimension {dtok!r}", dcol)
                if dim < 5 or dim % 2 == 0:
                    cur.fail("pointer dimension must be an odd integer >= 5", dcol)
            cur.finish()
            meters.append(MeterSpec(name, t1, t2, obs, dim, lineno, hcol))

        elif head == "postselect":
            name = known_system(cur)
            kind, payload = state_spec(cur, sysmap[name].dim)
            cur.finish()
            posts.append(PostSelectSpec(name, kind, payload, lineno, hcol))

        elif head == "bellpost":
            a = known_system(cur)
            b = known_system(cur)
            if a == b:
                cur.fail("bellpost needs two distinct systems")
            if sysmap[a].dim != 2 or sysmap[b].dim != 2:
                cur.fail("bellpost applies to qubit systems")
            cur.finish()
            bells.append(BellPostSpec(a, b, lineno, hcol))

        else:
            raise ScenarioParseError(f"unknown directive {head!r}", lineno, hcol)

    scenario = Scenario(
        tuple(systems), tuple(preps), tuple(links), tuple(measures),
        tuple(meters), tuple(posts), tuple(bells),
    )
    _resolve_threads(scenario)  # validates structure; result discarded here
    return scenario


def _parse_observable(cur: _Cursor, dim: int, allow_dim: bool = False) -> tuple:
    tok, col = cur.next("observable")
    if tok == "pauli":
        axis, acol = cur.next("pauli axis")
        if axis not in ("x", "y", "z"):
            cur.fail(f"unknown Pauli axis {axis!r}", acol)
        if dim != 2:
            cur.fail("Pauli observables apply to qubit systems only", acol)
        return ("pauli", axis)
    if tok == "spin":
        theta = _parse_float(cur, "theta")
        phi = _parse_float(cur, "phi")
        if dim != 2:
            cur.fail("spin observables apply to qubit systems only", col)
        return ("spin", float(theta), float(phi))
    if tok == "obs":
        mtok, mcol = cur.next("matrix literal")
        try:
            rows = _parse_matrix_token(mtok)
        except ValueError as e:
            cur.fail(str(e), mcol)
        m = np.array(rows, dtype=np.complex128)
        if m.shape != (dim, dim):
            cur.fail(f"matrix must be {dim}x{dim}", mcol)
        if np.max(np.abs(m - m.conj().T)) > 1e-10:
            cur.fail("observable matrix is not hermitian", mcol)
        return ("matrix", rows)
    cur.fail(f"expected 'pauli', 'spin' or 'obs', got {tok!r}", col)


# ---------------------------------------------------------------------------
# Renderer


def render_scenario(s: Scenario) -> str:
    """Canonical text for a scenario; reparsing yields an equal Scenario."""
    out = []
    for d in s.systems:
        out.append(f"system {d.name} qubit" if d.dim == 2 else f"system {d.name} qudit {d.dim}")
    for p in s.preparations:
        head = f"prepare {' '.join(p.systems)}"
        if p.moment != 0:
            head += f" @{p.moment}"
        out.append(head + " " + _render_state(p.kind, p.payload))
    for ln in s.links:
        where = f"@{ln.t_to}" if ln.t_to - ln.t_from == 1 else f"@{ln.t_from}:@{ln.t_to}"
        if ln.kind == "identity":
            out.append(f"link {ln.system} {where} identity")
        elif ln.kind == "unitary":
            if ln.payload[0] == "named":
                name, arg = ln.payload[1], ln.payload[2]
                u = name if arg is None else f"{name}({_render_float(arg)})"
            else:
                u = _render_matrix(ln.payload[1])
            out.append(f"link {ln.system} {where} unitary {u}")
        elif ln.kind == "collapse":
            out.append(f"collapse {ln.system} @{ln.t_to} "
                       + _render_state(ln.payload[0], ln.payload[1:]))
        else:
            alpha, beta, axis, outcome = ln.payload
            tail = "" if outcome == 1 else " outcome -1"
            out.append(
                f"partial {ln.system} @{ln.t_to} {_render_float(alpha)} "
                f"{_render_float(beta)} basis {axis}{tail}"
            )
    for m in s.measures:
        out.append(f"measure {m.system} @{m.moment} {_render_obs(m.obs)}")
    for m in s.meters:
        tail = "" if m.dim is None else f" dim {m.dim}"
        out.append(f"meter-diff {m.system} @{m.t1} @{m.t2} {_render_obs(m.obs)}{tail}")
    for p in s.postselects:
        out.append(f"postselect {p.system} " + _render_state(p.kind, p.payload))
    for b in s.bellposts:
        out.append(f"bellpost {b.a} {b.b}")
    return "\n".join(out) + "\n"


def _render_state(kind: str, payload: tuple) -> str:
    if kind == "ket":
        return "ket " + " ".join(_render_complex(z) for z in payload)
    if kind == "state":
        return f"state {payload[0]}"
    if kind == "bell":
        return f"bell {payload[0]}"
    return "singlet"


def _render_obs(obs: tuple) -> str:
    if obs[0] == "pauli":
        return f"pauli {obs[1]}"
    if obs[0] == "spin":
        return f"spin {_render_float(obs[1])} {_render_float(obs[2])}"
    return f"obs {_render_matrix(obs[1])}"


# ---------------------------------------------------------------------------
# Thread resolution and compilation


@dataclass(frozen=True, eq=False)
class _Thread:
    system: str
    register: str
    moments: tuple[int, ...]
    links: tuple[LinkSpec, ...]
    prep: PrepSpec


def _err(msg: str, spec) -> ScenarioParseError:
    return ScenarioParseError(msg, spec.line, spec.col)


def _resolve_threads(s: Scenario) -> dict[str, list[_Thread]]:
    """Group each system's links into preparation-anchored threads."""
    by_system: dict[str, list[_Thread]] = {d.name: [] for d in s.systems}
    links_by_sys: dict[str, dict[int, LinkSpec]] = {d.name: {} for d in s.systems}
    for ln in s.links:
        table = links_by_sys[ln.system]
        if ln.t_from in table:
            raise _err(
                f"time-ordering violation: system {ln.system!r} already has a link "
                f"leaving moment {ln.t_from}", ln)
        table[ln.t_from] = ln

    preps_by_sys: dict[str, list[PrepSpec]] = {d.name: [] for d in s.systems}
    for p in s.preparations:
        for name in p.systems:
            preps_by_sys[name].append(p)

    for d in s.systems:
        name = d.name
        starts = preps_by_sys[name]
        if not starts:
            raise ScenarioParseError(
                f"system {name!r} has no preparation", d.line, d.col)
        seen_start = set()
        for p in sorted(starts, key=lambda p: p.moment):
            if p.moment in seen_start:
                raise _err(f"system {name!r} prepared twice at moment {p.moment}", p)
            seen_start.add(p.moment)
        covered: dict[int, PrepSpec] = {}
        threads = []
        multi = len(starts) > 1
        for idx, p in enumerate(sorted(starts, key=lambda q: q.moment)):
            moments = [p.moment]
            chain = []
            t = p.moment
            while t in links_by_sys[name]:
                ln = links_by_sys[name].pop(t)
                t = ln.t_to
                chain.append(ln)
                moments.append(t)
            for m in moments:
                if m in covered:
                    raise _err(
                        f"moment {m} of system {name!r} belongs to two threads", p)
                covered[m] = p
            reg = name if not multi else f"{name}@{p.moment}"
            threads.append(_Thread(name, reg, tuple(moments), tuple(chain), p))
        if links_by_sys[name]:
            stray = min(links_by_sys[name].values(), key=lambda ln: ln.t_from)
            raise _err(
                f"link of system {name!r} leaving moment {stray.t_from} is not "
                f"reachable from any preparation", stray)
        by_system[name] = threads

    def locate(name: str, moment: int, spec) -> _Thread:
        for th in by_system[name]:
            if moment in th.moments:
                return th
        raise _err(f"system {name!r} has no moment {moment}", spec)

    for m in s.measures:
        locate(m.system, m.moment, m)
    for m in s.meters:
        locate(m.system, m.t1, m)
        locate(m.system, m.t2, m)
    return by_system


def _link_matrix(ln: LinkSpec, dim: int) -> np.ndarray:
    if ln.kind == "unitary":
        if ln.payload[0] == "named":
            return _named_unitary_matrix(ln.payload[1], ln.payload[2])
        return np.array(ln.payload[1], dtype=np.complex128)
    if ln.kind == "collapse":
        v = _state_amplitudes(ln.payload[0], ln.payload[1:])
        return np.outer(v, v.conj())
    alpha, beta, axis, outcome = ln.payload
    plus = _state_amplitudes("state", (f"+{axis}",))
    minus = _state_amplitudes("state", (f"-{axis}",))
    p_plus = np.outer(plus, plus.conj())
    p_minus = np.outer(minus, minus.conj())
    if outcome == 1:
        return alpha * p_plus + beta * p_minus
    return beta * p_plus + alpha * p_minus


def compile_scenario(s: Scenario) -> Program:
    """Lower a parsed scenario onto an engine program."""
    threads = _resolve_threads(s)
    dims = {d.name: d.dim for d in s.systems}

    registers: list[tuple[str, int]] = []
    for d in s.systems:
        for th in threads[d.name]:
            registers.append((th.register, d.dim))

    def reg_at(name: str, moment: int) -> str:
        for th in threads[name]:
            if moment in th.moments:
                return th.register
        raise AssertionError("validated earlier")

    def last_thread(name: str) -> _Thread:
        return max(threads[name], key=lambda th: th.moments[-1])

    # initial state: tensor the preparations, then order registers canonically
    prep_states = []
    done = set()
    for name in threads:
        for th in threads[name]:
            if id(th.prep) in done:
                continue
            done.add(id(th.prep))
            p = th.prep
            if p.kind in ("singlet", "bell"):
                regs = tuple(reg_at(n, p.moment) for n in p.systems)
                if p.kind == "singlet":
                    prep_states.append(make_singlet(regs))
                else:
                    prep_states.append(bell_state(p.payload[0], regs))
            else:
                amps = _state_amplitudes(p.kind, p.payload)
                lay = RegisterLayout(((reg_at(p.systems[0], p.moment), dims[p.systems[0]]),))
                prep_states.append(StateVector(lay, amps))
    joint = tensor(*prep_states).permuted([r for r, _ in registers])

    steps: list = []
    for name in threads:
        for th in threads[name]:
            for ln in th.links:
                if ln.kind == "identity":
                    continue
                steps.append(ApplyStep(
                    (ln.t_to, 0), (th.register,), _link_matrix(ln, dims[name]),
                    conditioning=ln.kind in ("collapse", "partial"),
                ))

    initial = joint.amplitudes
    readouts = []
    for i, m in enumerate(s.meters):
        mat, obsname = _obs_matrix_and_name(m.obs)
        try:
            spectrum = integer_eigen_projectors(mat)
        except ValueError:
            raise _err("meter observable must have an integer spectrum", m) from None
        max_a = max(abs(a) for a, _ in spectrum)
        d_min = PointerRegister.required_dimension(2 * max_a)
        d = m.dim if m.dim is not None else max(DEFAULT_POINTER_DIM, d_min)
        if d < d_min:
            raise _err(
                f"pointer dimension {d} risks wraparound; need at least {d_min}", m)
        ptr = f"_ptr{i}"
        registers.append((ptr, d))
        zero = np.zeros(d, dtype=np.complex128)
        zero[0] = 1.0
        initial = np.kron(initial, zero)
        for t, sign in ((m.t1, -1), (m.t2, +1)):
            reg = reg_at(m.system, t)
            obs_op = Operator(RegisterLayout(((reg, dims[m.system]),)), mat, hermitian=True)
            steps.append(ApplyStep((t, 1), (reg, ptr), coupling_matrix(obs_op, d, sign)))
        readouts.append(Readout(
            f"{obsname}({m.system}@{m.t2})-{obsname}({m.system}@{m.t1})", ptr, (d - 1) // 2))

    for m in s.measures:
        mat, obsname = _obs_matrix_and_name(m.obs)
        reg = reg_at(m.system, m.moment)
        steps.append(MeasureStep(
            (m.moment, 2), f"{obsname}({m.system}@{m.moment})", (reg,),
            tuple(eigen_projectors(mat)),
        ))

    last_moment = max((th.moments[-1] for name in threads for th in threads[name]),
                      default=0)
    for p in s.postselects:
        th = last_thread(p.system)
        bra = _state_amplitudes(p.kind, p.payload)
        proj = np.outer(bra, bra.conj())
        steps.append(ApplyStep((last_moment + 1, 3), (th.register,), proj,
                               conditioning=True))
    for b in s.bellposts:
        ra, rb = last_thread(b.a).register, last_thread(b.b).register
        bra = bell_state("phi+", (ra, rb))
        proj = np.outer(bra.amplitudes, bra.amplitudes.conj())
        steps.append(ApplyStep((last_moment + 1, 3), (ra, rb), proj, conditioning=True))

    layout = RegisterLayout(tuple(registers))
    return assemble(layout, initial, steps, tuple(readouts))


def run_scenario(
    s: Scenario, samples: int | None = None, seed: int | None = None
) -> OutcomeStats:
    """Execute a scenario; exact by default, Monte Carlo when sampling.

    Sampling requires both ``samples`` and an explicit ``seed``.
    """
    program = compile_scenario(s)
    if samples is None:
        return run_exact(program)
    if seed is None:
        raise ValueError("sampled mode needs an explicit seed")
    return run_sampled(program, samples, seed)
