"""Frozen solver plans: the serialized artifact produced by the generator.

A plan carries everything the online phase needs: the shift rows, the column
partition, the basis and action monomial, the read-off permutation, the
coefficient sources of every input polynomial (slots or literals), optional
Schur fill-in data and the permissible-monomial set for column pivoting, and
per-variable root-extraction strategies.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from fractions import Fraction

from .poly import MonomialOrdering, mono_deg, mono_divides, mono_div, mono_format, mono_is_one, mono_mul, mono_one, mono_parse
from .problems import SlotRef

PLAN_VERSION = 1


class PlanFormatError(ValueError):
    pass


class PlanBuildError(ValueError):
    """The template cannot be packaged into a runnable plan."""


@dataclass
class PlanSchur:
    acols: list  # monomials of the eliminated excessive columns
    fstar_rows: list  # removed (poly index, shift monomial) rows
    K: list  # Fraction fill-in matrix, len(acols) x len(plan columns)


@dataclass
class SolverPlan:
    var_names: list
    ordering: MonomialOrdering
    action: tuple
    reciprocal: bool
    quotient_dim: int
    basis: list
    cols_E: list
    cols_R: list
    cols_B: list
    rows: list  # (poly index, shift monomial)
    poly_templates: list  # per polynomial: list of (monomial, SlotRef)
    readoff: list  # per basis position: ("B", j) or ("R", j)
    extraction: dict  # var name -> list of ("eig",) | ("pair", m_num, m_den)
    permissible: list = None
    schur: PlanSchur = None
    field_p: int = 0

    @property
    def columns(self):
        return self.cols_E + self.cols_R + self.cols_B

    @property
    def size(self):
        return len(self.rows), len(self.columns)

    @property
    def nvars(self):
        return len(self.var_names)

    def structural_check(self):
        col_set = set(self.columns)
        for k, m in self.rows:
            if not 0 <= k < len(self.poly_templates):
                raise PlanFormatError("row references unknown polynomial %d" % k)
        for kind, j in self.readoff:
            pool = self.basis if kind == "B" else self.cols_R
            if not 0 <= j < len(pool):
                raise PlanFormatError("read-off entry out of range")
        for m in self.cols_B:
            if m not in self.basis:
                raise PlanFormatError("basis column not among basis monomials")
        if self.schur is not None:
            ncols = len(self.columns)
            for row in self.schur.K:
                if len(row) != ncols:
                    raise PlanFormatError("Schur fill-in width mismatch")
        if self.permissible is not None:
            for m in self.permissible:
                if m not in col_set:
                    raise PlanFormatError("permissible monomial outside the column set")
        return True

    # -- serialization -------------------------------------------------------

    def save(self, path):
        with open(path, "w") as fh:
            fh.write(self.format())

    def format(self):
        names = self.var_names
        fm = lambda m: mono_format(m, names)
        lines = ["templateplan v%d" % PLAN_VERSION]
        lines.append("vars " + " ".join(names))
        lines.append("field prime %d" % self.field_p)
        lines.append("ordering " + self.ordering.describe())
        lines.append("action " + ("recip " if self.reciprocal else "") + fm(self.action))
        lines.append("quotientdim %d" % self.quotient_dim)
        lines.append("basis " + " ".join(fm(m) for m in self.basis))
        lines.append("columns E " + " ".join(fm(m) for m in self.cols_E))
        lines.append("columns R " + " ".join(fm(m) for m in self.cols_R))
        lines.append("columns B " + " ".join(fm(m) for m in self.cols_B))
        for k, m in self.rows:
            lines.append("row %d %s" % (k, fm(m)))
        for k, terms in enumerate(self.poly_templates):
            toks = ["%s=%s" % (fm(m), ref.format()) for m, ref in terms]
            lines.append("polytemplate %d : %s" % (k, " ".join(toks)))
        for kind, j in self.readoff:
            lines.append("readoff %s %d" % (kind, j))
        for var, strategies in self.extraction.items():
            toks = []
            for st in strategies:
                if st[0] == "eig":
                    toks.append("eig")
                else:
                    toks.append("pair %s %s" % (fm(st[1]), fm(st[2])))
            lines.append("extract %s : %s" % (var, " ; ".join(toks)))
        if self.permissible is not None:
            lines.append("permissible " + " ".join(fm(m) for m in self.permissible))
        if self.schur is not None:
            lines.append("schur acols " + " ".join(fm(m) for m in self.schur.acols))
            for k, m in self.schur.fstar_rows:
                lines.append("schur row %d %s" % (k, fm(m)))
            for row in self.schur.K:
                lines.append("schur k " + " ".join(str(v) for v in row))
        return "\n".join(lines) + "\n"

    @staticmethod
    def load(path):
        with open(path) as fh:
            return SolverPlan.parse(fh.read())

    @staticmethod
    def parse(text):
        lines = [ln.rstrip() for ln in text.splitlines() if ln.strip()]
        if not lines or not lines[0].startswith("templateplan v"):
            raise PlanFormatError("missing templateplan header")
        version = int(lines[0].split("v", 1)[1])
        if version != PLAN_VERSION:
            raise PlanFormatError("unsupported plan version %d" % version)
        fields = {
            "rows": [],
            "poly_templates": {},
            "readoff": [],
            "extraction": {},
            "permissible": None,
            "schur_acols": None,
            "schur_rows": [],
            "schur_k": [],
        }
        names = None
        pm = lambda tok: mono_parse(tok, names)
        for ln in lines[1:]:
            toks = ln.split()
            head = toks[0]
            if head == "vars":
                names = toks[1:]
            elif head == "field":
                fields["field_p"] = int(toks[2])
            elif head == "ordering":
                fields["ordering"] = MonomialOrdering.parse(" ".join(toks[1:]), len(names))
            elif head == "action":
                if toks[1] == "recip":
                    fields["reciprocal"] = True
                    fields["action"] = pm(toks[2])
                else:
                    fields["reciprocal"] = False
                    fields["action"] = pm(toks[1])
            elif head == "quotientdim":
                fields["quotient_dim"] = int(toks[1])
            elif head == "basis":
                fields["basis"] = [pm(t) for t in toks[1:]]
            elif head == "columns":
                fields["cols_" + toks[1]] = [pm(t) for t in toks[2:]]
            elif head == "row":
                fields["rows"].append((int(toks[1]), pm(toks[2])))
            elif head == "polytemplate":
                k = int(toks[1])
                terms = []
                for tok in toks[3:]:
                    mono_txt, _, ref_txt = tok.partition("=")
                    terms.append((pm(mono_txt), SlotRef.parse(ref_txt)))
                fields["poly_templates"][k] = terms
            elif head == "readoff":
                fields["readoff"].append((toks[1], int(toks[2])))
            elif head == "extract":
                var = toks[1]
                body = " ".join(toks[3:])
                strategies = []
                for part in body.split(";"):
                    ptoks = part.split()
                    if not ptoks:
                        continue
                    if ptoks[0] == "eig":
                        strategies.append(("eig",))
                    elif ptoks[0] == "pair":
                        strategies.append(("pair", pm(ptoks[1]), pm(ptoks[2])))
                    else:
                        raise PlanFormatError("unknown extraction %r" % ptoks[0])
                fields["extraction"][var] = strategies
            elif head == "permissible":
                fields["permissible"] = [pm(t) for t in toks[1:]]
            elif head == "schur":
                if toks[1] == "acols":
                    fields["schur_acols"] = [pm(t) for t in toks[2:]]
                elif toks[1] == "row":
                    fields["schur_rows"].append((int(toks[2]), pm(toks[3])))
                elif toks[1] == "k":
                    fields["schur_k"].append([Fraction(t) for t in toks[2:]])
                else:
                    raise PlanFormatError("unknown schur line %r" % ln)
            else:
                raise PlanFormatError("unknown plan directive %r" % head)
        templates = [fields["poly_templates"][k] for k in sorted(fields["poly_templates"])]
        schur = None
        if fields["schur_acols"] is not None:
            schur = PlanSchur(
                acols=fields["schur_acols"],
                fstar_rows=fields["schur_rows"],
                K=fields["schur_k"],
            )
        for key in ("cols_E", "cols_R", "cols_B"):
            fields.setdefault(key, [])
        plan = SolverPlan(
            var_names=names,
            ordering=fields["ordering"],
            action=fields["action"],
            reciprocal=fields["reciprocal"],
            quotient_dim=fields["quotient_dim"],
            basis=fields["basis"],
            cols_E=fields.get("cols_E", []),
            cols_R=fields.get("cols_R", []),
            cols_B=fields.get("cols_B", []),
            rows=fields["rows"],
            poly_templates=templates,
            readoff=fields["readoff"],
            extraction=fields["extraction"],
            permissible=fields["permissible"],
            schur=schur,
            field_p=fields.get("field_p", 0),
        )
        plan.structural_check()
        return plan


def _extraction_strategies(var_idx, action, keys, ordering, nvars):
    """Ways to read one variable off the available monomial values.

    The eigenvalue equals the action monomial's value at the root (or its
    reciprocal); every other variable needs a ratio of two available
    monomials differing by exactly that variable.
    """
    e_v = tuple(1 if i == var_idx else 0 for i in range(nvars))
    strategies = []
    if action == e_v:
        strategies.append(("eig",))
    pairs = []
    for den in keys:
        num = mono_mul(den, e_v)
        if num in keys:
            pairs.append((mono_deg(den), tuple(ordering.key(den)), num, den))
    pairs.sort(key=lambda t: (t[0], t[1]))
    for _, _, num, den in pairs[:4]:
        strategies.append(("pair", num, den))
    return strategies


def plan_from_template(template, problem, quotient_dim, field_p):
    """Package a verified template into a solver plan.

    Raises PlanBuildError when some variable cannot be extracted from the
    basis and reducible monomial values, or when a reciprocal-action read-off
    would be ambiguous.
    """
    basis = template.basis
    ordering = basis.gb.ordering
    nvars = ordering.nvars
    b_pos = {m: j for j, m in enumerate(basis.monomials)}
    r_pos = {m: j for j, m in enumerate(template.cols_R)}
    readoff = []
    for t in basis.targets():
        if t in b_pos:
            readoff.append(("B", b_pos[t]))
        elif t in r_pos:
            readoff.append(("R", r_pos[t]))
        else:
            raise PlanBuildError("target monomial missing from both blocks")
    # Basis values come from the eigenvector, reducible ones from the solved
    # block, and excessive ones from back-substitution through the eliminated
    # block (available once every excessive column carries a pivot).
    keys = set(basis.monomials) | set(template.cols_R) | set(template.cols_E)
    extraction = {}
    for i, var in enumerate(problem.var_names):
        strategies = _extraction_strategies(i, basis.action, keys, ordering, nvars)
        if not strategies:
            raise PlanBuildError("variable %r cannot be extracted from the plan" % var)
        extraction[var] = strategies

    permissible = None
    if not basis.reciprocal and set(template.cols_B) == set(basis.monomials):
        cols = set(template.columns)
        perm = [m for m in template.columns if mono_mul(basis.action, m) in cols]
        if len(perm) > len(basis.monomials):
            permissible = ordering.sorted_desc(perm)

    schur = None
    if template.schur is not None:
        schur = PlanSchur(
            acols=list(template.schur.acols),
            fstar_rows=list(template.schur.fstar_rows),
            K=[list(r) for r in template.schur.K],
        )
    plan = SolverPlan(
        var_names=list(problem.var_names),
        ordering=ordering,
        action=basis.action,
        reciprocal=basis.reciprocal,
        quotient_dim=quotient_dim,
        basis=list(basis.monomials),
        cols_E=list(template.cols_E),
        cols_R=list(template.cols_R),
        cols_B=list(template.cols_B),
        rows=list(template.rows),
        poly_templates=[list(t) for t in problem.polys],
        readoff=readoff,
        extraction=extraction,
        permissible=permissible,
        schur=schur,
        field_p=field_p,
    )
    plan.structural_check()
    return plan
