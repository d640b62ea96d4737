"""Problem ingestion: declarative polynomial structures, slot-map programs,
random instantiation over any coefficient field, and built-in fixtures.

A problem lists polynomials whose coefficients are named slots or literal
constants.  Slots are either drawn at random (offline tracing) or computed
from raw input data by a tiny arithmetic program with a null-space primitive;
the same program runs over Z/p, exact rationals, and floats, so the offline
and online phases see identical coefficient structure.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field as dc_field
from fractions import Fraction
from importlib import resources

import numpy as np

from .poly import Poly, MonomialOrdering, mono_format, parse_poly_text


class ProblemFormatError(ValueError):
    pass


@dataclass(frozen=True)
class SlotRef:
    """Coefficient source: a literal constant or a (scaled) named slot."""

    slot: str = None
    scale: Fraction = Fraction(1)
    literal: Fraction = None

    def value(self, slots, field):
        if self.slot is None:
            return field.from_fraction(self.literal)
        if self.slot not in slots:
            raise KeyError("missing slot %r" % self.slot)
        return field.mul(field.from_fraction(self.scale), slots[self.slot])

    def format(self):
        if self.slot is None:
            return str(self.literal)
        if self.scale == 1:
            return "$" + self.slot
        return "%s*$%s" % (self.scale, self.slot)

    @staticmethod
    def parse(token):
        token = token.strip()
        if "$" in token:
            scale_txt, _, name = token.partition("$")
            scale_txt = scale_txt.rstrip("*")
            if not scale_txt:
                scale = Fraction(1)
            elif scale_txt == "-":
                scale = Fraction(-1)
            else:
                scale = Fraction(scale_txt)
            return SlotRef(slot=name, scale=scale)
        return SlotRef(literal=Fraction(token))


# ---------------------------------------------------------------------------
# Slot-map programs


@dataclass
class Program:
    """Straight-line arithmetic over named registers plus a null-space op."""

    inputs: list
    ops: list  # tuples, see _run_op

    def run(self, field, input_values):
        env = {}
        for name in self.inputs:
            if name not in input_values:
                raise KeyError("missing program input %r" % name)
            env[name] = field.normalize(input_values[name])
        for op in self.ops:
            _run_op(op, env, field)
        return env

    def format(self):
        lines = ["slotmap", "inputs " + " ".join(self.inputs)]
        for op in self.ops:
            kind = op[0]
            if kind == "lit":
                lines.append("%s = lit %s" % (op[1], op[2]))
            elif kind in ("add", "sub", "mul", "div"):
                lines.append("%s = %s %s %s" % (op[1], kind, op[2], op[3]))
            elif kind in ("neg", "copy"):
                lines.append("%s = %s %s" % (op[1], kind, op[2]))
            elif kind == "nullspace":
                _, rows, cols, ins, outs = op
                lines.append(
                    "%s = nullspace %d %d : %s" % (" ".join(outs), rows, cols, " ".join(ins))
                )
            else:
                raise ValueError("unknown op %r" % (op,))
        lines.append("end")
        return "\n".join(lines)

    @staticmethod
    def parse(lines):
        if not lines or not lines[0].startswith("inputs"):
            raise ProblemFormatError("slotmap must start with an 'inputs' line")
        inputs = lines[0].split()[1:]
        ops = []
        for ln in lines[1:]:
            lhs, _, rhs = ln.partition("=")
            if not rhs:
                raise ProblemFormatError("bad slotmap line %r" % ln)
            toks = rhs.split()
            outs = lhs.split()
            kind = toks[0]
            if kind == "lit":
                ops.append(("lit", outs[0], Fraction(toks[1])))
            elif kind in ("add", "sub", "mul", "div"):
                ops.append((kind, outs[0], toks[1], toks[2]))
            elif kind in ("neg", "copy"):
                ops.append((kind, outs[0], toks[1]))
            elif kind == "nullspace":
                rows, cols = int(toks[1]), int(toks[2])
                if toks[3] != ":":
                    raise ProblemFormatError("nullspace needs ':' before inputs")
                ins = toks[4:]
                if len(ins) != rows * cols:
                    raise ProblemFormatError("nullspace input count mismatch")
                ops.append(("nullspace", rows, cols, ins, outs))
            else:
                raise ProblemFormatError("unknown slotmap op %r" % kind)
        return Program(inputs=inputs, ops=ops)


def _run_op(op, env, field):
    kind = op[0]
    if kind == "lit":
        env[op[1]] = field.from_fraction(op[2])
    elif kind == "add":
        env[op[1]] = field.add(env[op[2]], env[op[3]])
    elif kind == "sub":
        env[op[1]] = field.sub(env[op[2]], env[op[3]])
    elif kind == "mul":
        env[op[1]] = field.mul(env[op[2]], env[op[3]])
    elif kind == "div":
        env[op[1]] = field.div(env[op[2]], env[op[3]])
    elif kind == "neg":
        env[op[1]] = field.neg(env[op[2]])
    elif kind == "copy":
        env[op[1]] = env[op[2]]
    elif kind == "nullspace":
        _, rows, cols, ins, outs = op
        grid = [[env[ins[r * cols + c]] for c in range(cols)] for r in range(rows)]
        basis = _gj_nullspace(grid, field)
        if len(basis) * cols != len(outs):
            raise ValueError(
                "nullspace dimension %d does not match %d outputs" % (len(basis), len(outs))
            )
        for t, vec in enumerate(basis):
            for c in range(cols):
                env[outs[t * cols + c]] = vec[c]
    else:
        raise ValueError("unknown op %r" % (op,))


def _gj_nullspace(grid, field):
    """Null-space basis by Gauss-Jordan elimination with first-usable pivots.

    Pivot choice is combinatorial (first row whose entry is usable), so exact
    fields and floats follow the same elimination path on identical integer
    data; the sparse unit-free-variable basis matches variable order.
    """
    rows = len(grid)
    cols = len(grid[0]) if rows else 0
    m = [list(r) for r in grid]
    if isinstance(field.zero, float):
        scale = max((abs(v) for r in m for v in r), default=1.0) or 1.0
        usable = lambda v: abs(v) > 1e-10 * scale
    else:
        usable = lambda v: not field.is_zero(v)
    piv_cols = []
    r = 0
    for c in range(cols):
        if r == rows:
            break
        sel = next((i for i in range(r, rows) if usable(m[i][c])), None)
        if sel is None:
            continue
        m[r], m[sel] = m[sel], m[r]
        inv = field.inv(m[r][c])
        m[r] = [field.mul(v, inv) for v in m[r]]
        for i in range(rows):
            if i != r and not field.is_zero(m[i][c]):
                f = m[i][c]
                m[i] = [field.sub(a, field.mul(f, b)) for a, b in zip(m[i], m[r])]
        piv_cols.append(c)
        r += 1
    free = [c for c in range(cols) if c not in piv_cols]
    basis = []
    for fc in free:
        vec = [field.zero] * cols
        vec[fc] = field.one
        for i, pc in enumerate(piv_cols):
            vec[pc] = field.neg(m[i][fc])
        basis.append(vec)
    return basis


class Tracer:
    """Builds a Program by recording overloaded arithmetic on traced values."""

    def __init__(self, input_names):
        self.program_inputs = list(input_names)
        self.ops = []
        self._n = 0
        self._lits = {}

    def _fresh(self):
        self._n += 1
        return "t%d" % self._n

    def input(self, name):
        return TVal(self, name)

    def inputs(self):
        return [TVal(self, n) for n in self.program_inputs]

    def lit(self, value):
        fr = Fraction(value)
        if fr not in self._lits:
            dst = self._fresh()
            self.ops.append(("lit", dst, fr))
            self._lits[fr] = dst
        return TVal(self, self._lits[fr])

    def _emit(self, kind, *args):
        dst = self._fresh()
        self.ops.append((kind, dst) + args)
        return TVal(self, dst)

    def nullspace(self, grid, dim, out_prefix):
        rows, cols = len(grid), len(grid[0])
        ins = [v.name for row in grid for v in row]
        outs = ["%s%d_%d" % (out_prefix, t + 1, c + 1) for t in range(dim) for c in range(cols)]
        self.ops.append(("nullspace", rows, cols, ins, outs))
        return [[TVal(self, outs[t * cols + c]) for c in range(cols)] for t in range(dim)]

    def name_output(self, name, val):
        self.ops.append(("copy", name, val.name))
        return name

    def build(self):
        return Program(inputs=self.program_inputs, ops=list(self.ops))


class TVal:
    __slots__ = ("tr", "name")

    def __init__(self, tr, name):
        self.tr = tr
        self.name = name

    def _coerce(self, other):
        if isinstance(other, TVal):
            return other
        return self.tr.lit(other)

    def __add__(self, other):
        return self.tr._emit("add", self.name, self._coerce(other).name)

    __radd__ = __add__

    def __sub__(self, other):
        return self.tr._emit("sub", self.name, self._coerce(other).name)

    def __rsub__(self, other):
        return self._coerce(other).__sub__(self)

    def __mul__(self, other):
        return self.tr._emit("mul", self.name, self._coerce(other).name)

    __rmul__ = __mul__

    def __neg__(self):
        return self.tr._emit("neg", self.name)


# ---------------------------------------------------------------------------
# Problem specifications


@dataclass
class ProblemSpec:
    name: str
    var_names: list
    polys: list  # per polynomial: list of (monomial, SlotRef)
    free_slots: list  # slots drawn at random when no slotmap produces them
    slotmap: Program = None
    constant_indices: list = dc_field(default_factory=list)

    @property
    def nvars(self):
        return len(self.var_names)

    def default_ordering(self):
        return MonomialOrdering.grevlex(self.nvars)

    def slot_names(self):
        out = []
        seen = set()
        for terms in self.polys:
            for _, ref in terms:
                if ref.slot is not None and ref.slot not in seen:
                    seen.add(ref.slot)
                    out.append(ref.slot)
        return out

    def instantiate(self, slots, field, ordering=None):
        ordering = ordering or self.default_ordering()
        out = []
        for terms in self.polys:
            acc = {}
            for mono, ref in terms:
                v = ref.value(slots, field)
                acc[mono] = field.add(acc.get(mono, field.zero), v)
            out.append(Poly(acc, field, ordering))
        return out

    def random_instance(self, field, seed, ordering=None):
        """Random generic instance; returns (polynomials, slot environment)."""
        rng = random.Random(seed)
        if self.slotmap is not None:
            raw = {name: field.rand_nonzero(rng) for name in self.slotmap.inputs}
            env = self.slotmap.run(field, raw)
        else:
            env = {name: field.rand_nonzero(rng) for name in self.slot_names()}
        return self.instantiate(env, field, ordering), env

    def format(self):
        lines = ["problem v1", "name " + self.name, "vars " + " ".join(self.var_names)]
        for terms in self.polys:
            lines.append("poly " + _format_terms(terms, self.var_names))
        if self.constant_indices:
            lines.append("constant " + " ".join(str(i) for i in self.constant_indices))
        if self.slotmap is not None:
            lines.append(self.slotmap.format())
        return "\n".join(lines) + "\n"


def _format_terms(terms, names):
    parts = []
    for mono, ref in terms:
        if ref.slot is not None:
            coeff_txt = ref.format()
            neg = False
        else:
            coeff_txt = str(ref.literal)
            neg = coeff_txt.startswith("-")
            if neg:
                coeff_txt = coeff_txt[1:]
        mono_txt = mono_format(mono, names)
        if mono_txt == "1":
            body = coeff_txt
        elif coeff_txt == "1":
            body = mono_txt
        else:
            body = coeff_txt + "*" + mono_txt
        parts.append(("- " if neg else "+ ") + body)
    text = " ".join(parts)
    return text[2:] if text.startswith("+ ") else "-" + text[2:]


def parse_problem(text, name="unnamed"):
    """Parse the declarative problem format; errors carry line numbers."""
    lines = text.splitlines()
    var_names = None
    polys = []
    constant = []
    slotmap = None
    pname = name
    i = 0
    while i < len(lines):
        raw = lines[i]
        line = raw.split("#", 1)[0].strip()
        i += 1
        if not line:
            continue
        try:
            if line.startswith("problem"):
                continue
            if line.startswith("name "):
                pname = line[5:].strip()
            elif line.startswith("vars"):
                var_names = line.split()[1:]
                if not var_names:
                    raise ProblemFormatError("empty variable list")
            elif line.startswith("poly "):
                if var_names is None:
                    raise ProblemFormatError("'poly' before 'vars'")
                polys.append(_parse_poly_template(line[5:], var_names))
            elif line.startswith("constant"):
                constant = [int(t) for t in line.split()[1:]]
            elif line == "slotmap":
                body = []
                while i < len(lines):
                    inner = lines[i].split("#", 1)[0].strip()
                    i += 1
                    if inner == "end":
                        break
                    if inner:
                        body.append(inner)
                else:
                    raise ProblemFormatError("slotmap missing 'end'")
                slotmap = Program.parse(body)
            else:
                raise ProblemFormatError("unrecognized directive %r" % line.split()[0])
        except (ProblemFormatError, ValueError) as exc:
            raise ProblemFormatError("line %d: %s" % (i, exc)) from None
    if var_names is None or not polys:
        raise ProblemFormatError("problem needs 'vars' and at least one 'poly'")
    spec = ProblemSpec(
        name=pname,
        var_names=var_names,
        polys=polys,
        free_slots=[],
        slotmap=slotmap,
        constant_indices=constant,
    )
    spec.free_slots = spec.slot_names() if slotmap is None else []
    for k in constant:
        if not 0 <= k < len(polys):
            raise ProblemFormatError("constant index %d out of range" % k)
    available = set(spec.free_slots)
    if slotmap is not None:
        available = {op[1] for op in slotmap.ops if op[0] != "nullspace"}
        for op in slotmap.ops:
            if op[0] == "nullspace":
                available.update(op[4])
        available.update(slotmap.inputs)
    for k, terms in enumerate(polys):
        for _, ref in terms:
            if ref.slot is not None and slotmap is not None and ref.slot not in available:
                raise ProblemFormatError(
                    "poly %d references slot %r not produced by the slotmap" % (k, ref.slot)
                )
    return spec


def _parse_poly_template(text, names):
    terms = []

    def hook(slot_name, coeff):
        return SlotRef(slot=slot_name, scale=coeff)

    for coeff, mono in parse_poly_text(text, names, slot_hook=hook):
        if isinstance(coeff, SlotRef):
            terms.append((mono, coeff))
        else:
            terms.append((mono, SlotRef(literal=coeff)))
    return terms


# ---------------------------------------------------------------------------
# Built-in fixtures


def _fixture_text(fname):
    return resources.files("elimtpl.fixtures").joinpath(fname).read_text()


def load_fixture(name):
    return parse_problem(_fixture_text(name + ".txt"), name=name)


def builtin_fixtures():
    """The shipped problem fixtures, keyed by name."""
    names = ["two_conics", "cubic_line", "nonradical", "quat_norm", "five_point_pose"]
    return {n: load_fixture(n) for n in names}


# ---------------------------------------------------------------------------
# Five-point relative pose: program construction and synthetic scenes


def build_five_point_problem():
    """Essential-matrix estimation from five correspondences.

    Raw inputs are the ten normalized image points; the program stacks the
    epipolar constraints, extracts the 4-dimensional null space E1..E4, sets
    E = x*E1 + y*E2 + z*E3 + E4, and expands the determinant and trace
    constraints 2*E*E^T*E - tr(E*E^T)*E into coefficient slots for ten cubic
    polynomials in (x, y, z).
    """
    input_names = []
    for i in range(1, 6):
        input_names += ["a%dx" % i, "a%dy" % i, "b%dx" % i, "b%dy" % i]
    tr = Tracer(input_names)
    one = tr.lit(1)
    rows = []
    for i in range(1, 6):
        ax, ay = tr.input("a%dx" % i), tr.input("a%dy" % i)
        bx, by = tr.input("b%dx" % i), tr.input("b%dy" % i)
        rows.append(
            [bx * ax, bx * ay, bx, by * ax, by * ay, by, ax, ay, one]
        )
    ebasis = tr.nullspace(rows, 4, "e")

    # E entries as polynomials in (x, y, z) with traced coefficients.
    unit = (0, 0, 0)
    xm, ym, zm = (1, 0, 0), (0, 1, 0), (0, 0, 1)

    def entry(j):
        return {
            xm: ebasis[0][j],
            ym: ebasis[1][j],
            zm: ebasis[2][j],
            unit: ebasis[3][j],
        }

    E = [[entry(r * 3 + c) for c in range(3)] for r in range(3)]

    def pp_add(a, b):
        out = dict(a)
        for m, v in b.items():
            out[m] = out[m] + v if m in out else v
        return out

    def pp_sub(a, b):
        out = dict(a)
        for m, v in b.items():
            out[m] = out[m] - v if m in out else -v
        return out

    def pp_mul(a, b):
        out = {}
        for ma, va in a.items():
            for mb, vb in b.items():
                m = tuple(x + y for x, y in zip(ma, mb))
                prod = va * vb
                out[m] = out[m] + prod if m in out else prod
        return out

    def pp_scale(a, c):
        return {m: v * c for m, v in a.items()}

    def mat_mul(A, B):
        return [
            [
                pp_add(pp_add(pp_mul(A[i][0], B[0][j]), pp_mul(A[i][1], B[1][j])),
                       pp_mul(A[i][2], B[2][j]))
                for j in range(3)
            ]
            for i in range(3)
        ]

    Et = [[E[j][i] for j in range(3)] for i in range(3)]
    EEt = mat_mul(E, Et)
    trace = pp_add(pp_add(EEt[0][0], EEt[1][1]), EEt[2][2])
    cubic = mat_mul(EEt, E)
    constraints = []
    det = pp_sub(
        pp_add(
            pp_mul(E[0][0], pp_sub(pp_mul(E[1][1], E[2][2]), pp_mul(E[1][2], E[2][1]))),
            pp_mul(E[0][2], pp_sub(pp_mul(E[1][0], E[2][1]), pp_mul(E[1][1], E[2][0]))),
        ),
        pp_mul(E[0][1], pp_sub(pp_mul(E[1][0], E[2][2]), pp_mul(E[1][2], E[2][0]))),
    )
    constraints.append(det)
    for i in range(3):
        for j in range(3):
            constraints.append(pp_sub(pp_scale(cubic[i][j], 2), pp_mul(trace, E[i][j])))

    polys = []
    for k, pp in enumerate(constraints):
        terms = []
        for mono in sorted(pp, reverse=True):
            slot = "c%d_%d%d%d" % (k, mono[0], mono[1], mono[2])
            tr.name_output(slot, pp[mono])
            terms.append((mono, SlotRef(slot=slot)))
        polys.append(terms)

    return ProblemSpec(
        name="five_point_pose",
        var_names=["x", "y", "z"],
        polys=polys,
        free_slots=[],
        slotmap=tr.build(),
        constant_indices=[],
    )


def synthetic_scene(rng, depth_spread=0.5, baseline=0.3):
    """Two-camera scene: unit distance to a 1 x 1 x depth_spread point box."""
    pts = np.stack(
        [
            rng.uniform(-0.5, 0.5, 5),
            rng.uniform(-0.5, 0.5, 5),
            rng.uniform(1.0, 1.0 + depth_spread, 5),
        ],
        axis=1,
    )
    while True:
        direction = rng.normal(size=3)
        nrm = np.linalg.norm(direction)
        if nrm > 1e-6:
            break
    c2 = baseline * direction / nrm
    # Aim off the first camera's optical axis: a shared fixation point on
    # that axis would force E[2, 2] = 0 identically (intersecting axes).
    target = np.array([0.0, 0.0, 1.0 + depth_spread / 2]) + rng.uniform(-0.2, 0.2, 3)
    zaxis = target - c2
    zaxis /= np.linalg.norm(zaxis)
    up = np.array([0.0, 1.0, 0.0]) + 0.1 * rng.normal(size=3)
    xaxis = np.cross(up, zaxis)
    xaxis /= np.linalg.norm(xaxis)
    yaxis = np.cross(zaxis, xaxis)
    R = np.stack([xaxis, yaxis, zaxis])  # world -> cam2 rotation
    x1 = pts[:, :2] / pts[:, 2:3]
    cam2 = (R @ (pts - c2).T).T
    x2 = cam2[:, :2] / cam2[:, 2:3]
    t = -R @ c2
    tx = np.array([[0, -t[2], t[1]], [t[2], 0, -t[0]], [-t[1], t[0], 0]])
    E = tx @ R
    return x1, x2, E


def scene_raw_inputs(x1, x2):
    raw = {}
    for i in range(5):
        raw["a%dx" % (i + 1)] = float(x1[i, 0])
        raw["a%dy" % (i + 1)] = float(x1[i, 1])
        raw["b%dx" % (i + 1)] = float(x2[i, 0])
        raw["b%dy" % (i + 1)] = float(x2[i, 1])
    return raw


def essential_from_root(env, root):
    """Reassemble E = x*E1 + y*E2 + z*E3 + E4 from slot environment values."""
    x, y, z = root
    flat = [
        x * env["e1_%d" % (j + 1)]
        + y * env["e2_%d" % (j + 1)]
        + z * env["e3_%d" % (j + 1)]
        + env["e4_%d" % (j + 1)]
        for j in range(9)
    ]
    return np.array(flat, dtype=complex).reshape(3, 3)


def essential_distance(E1, E2):
    """Scale- and sign-invariant relative distance between essential matrices."""
    a = E1 / np.linalg.norm(E1)
    b = E2 / np.linalg.norm(E2)
    return min(np.linalg.norm(a - b), np.linalg.norm(a + b))
