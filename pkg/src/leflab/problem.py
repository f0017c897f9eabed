"""Problem description and result records shared by both solver branches.

The quantity of interest throughout is the zero-Dirichlet problem

    -lap u = lambda * k(x) * u^q  +/-  h(x) * u^p,      0 < q < 1 < p,

on the unit interval or square.  ``variant`` selects the sign of the
superlinear term: "plus" is the cooperative case with a finite existence
threshold, "minus" the competing case treated by energy minimization.
"""

from dataclasses import dataclass, replace

from .errors import FileFormat
from .mesh import RECTANGLE, Field, _FMT
from .potentials import PotentialPair

VARIANTS = ("plus", "minus")

DIAGRAM_COLUMNS = (
    "lambda",
    "sup_norm",
    "h1_norm",
    "energy",
    "stability_slack",
    "iterations",
    "converged",
)


@dataclass(frozen=True)
class ProblemSpec:
    q: float
    p: float
    variant: str
    potentials: PotentialPair

    def __post_init__(self):
        if not 0.0 < self.q < 1.0 < self.p:
            raise ValueError(f"exponents must satisfy 0 < q < 1 < p (got q={self.q}, p={self.p})")
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        if self.potentials.k.grid.kind == RECTANGLE and self.p >= 5.0:
            # Two space dimensions: stay safely inside the subcritical range.
            raise ValueError(f"p = {self.p} is too large on a rectangle grid (need p < 5)")

    @property
    def grid(self):
        return self.potentials.k.grid

    @property
    def sign(self) -> float:
        return 1.0 if self.variant == "plus" else -1.0


@dataclass(frozen=True)
class SolveReport:
    """Outcome of one solve at a fixed lambda.

    ``stability_slack`` is the quadratic-form margin of the linearized
    operator tested against the solution itself (nonnegative at stable
    solutions).  ``diverged`` marks a norm-cap escape, the numerical proxy
    for nonexistence; ``dead_core`` flags a nonzero solution that vanishes
    somewhere in the interior (diagnostic only).
    """

    solution: Field
    lam: float
    converged: bool
    iterations: int
    weak_residual: float
    energy: float
    stability_slack: float
    sup_norm: float
    h1_norm: float
    diverged: bool = False
    dead_core: bool = False


@dataclass(frozen=True)
class DiagramRecord:
    lam: float
    sup_norm: float
    h1_norm: float
    energy: float
    stability_slack: float
    iterations: int
    converged: bool
    classified_nontrivial: bool | None = None
    source: str | None = None


def record_from_report(report: SolveReport, classified_nontrivial=None) -> DiagramRecord:
    return DiagramRecord(
        lam=report.lam,
        sup_norm=report.sup_norm,
        h1_norm=report.h1_norm,
        energy=report.energy,
        stability_slack=report.stability_slack,
        iterations=report.iterations,
        converged=report.converged,
        classified_nontrivial=classified_nontrivial,
    )


@dataclass(frozen=True)
class BifurcationDiagram:
    """Records ordered by strictly increasing lambda, plus the extremal-
    parameter bracket when a bisection produced one."""

    records: tuple
    lambda_star_bracket: tuple | None = None

    def __post_init__(self):
        lams = [r.lam for r in self.records]
        if any(b <= a for a, b in zip(lams, lams[1:])):
            raise ValueError("diagram lambdas must be strictly increasing")

    def __len__(self):
        return len(self.records)

    def converged_prefix(self):
        """Leading run of converged records (the minimal branch as sampled)."""
        out = []
        for r in self.records:
            if not r.converged:
                break
            out.append(r)
        return out


def assemble_diagram(records, bracket=None) -> BifurcationDiagram:
    """Sort records by lambda, dropping duplicates (later entries win)."""
    by_lam = {}
    for r in records:
        by_lam[r.lam] = r
    ordered = tuple(by_lam[lam] for lam in sorted(by_lam))
    return BifurcationDiagram(ordered, bracket)


def _diagram_columns(diagram: BifurcationDiagram):
    cols = list(DIAGRAM_COLUMNS)
    if any(r.classified_nontrivial is not None for r in diagram.records):
        cols.append("classified_nontrivial")
    if any(r.source is not None for r in diagram.records):
        cols.append("source")
    return cols


def write_diagram(diagram: BifurcationDiagram, path) -> None:
    """CSV with a fixed header; floats carry 17 significant digits so a
    rewrite of a reread file is byte-identical."""
    cols = _diagram_columns(diagram)
    lines = [",".join(cols)]
    for r in diagram.records:
        row = [
            format(r.lam, _FMT),
            format(r.sup_norm, _FMT),
            format(r.h1_norm, _FMT),
            format(r.energy, _FMT),
            format(r.stability_slack, _FMT),
            str(r.iterations),
            "1" if r.converged else "0",
        ]
        if "classified_nontrivial" in cols:
            row.append("1" if r.classified_nontrivial else "0")
        if "source" in cols:
            row.append(r.source or "")
        lines.append(",".join(row))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_diagram(path) -> BifurcationDiagram:
    with open(path) as fh:
        lines = [ln.rstrip("\n") for ln in fh if ln.strip()]
    if not lines:
        raise FileFormat(f"{path}: empty diagram file")
    header = lines[0].split(",")
    if header[: len(DIAGRAM_COLUMNS)] != list(DIAGRAM_COLUMNS):
        raise FileFormat(f"{path}: unexpected diagram header {lines[0]!r}")
    extras = header[len(DIAGRAM_COLUMNS) :]
    for name in extras:
        if name not in ("classified_nontrivial", "source"):
            raise FileFormat(f"{path}: unknown diagram column {name!r}")
    records = []
    for i, line in enumerate(lines[1:], start=2):
        parts = line.split(",")
        if len(parts) != len(header):
            raise FileFormat(f"{path}:{i}: expected {len(header)} fields, got {len(parts)}")
        try:
            rec = DiagramRecord(
                lam=float(parts[0]),
                sup_norm=float(parts[1]),
                h1_norm=float(parts[2]),
                energy=float(parts[3]),
                stability_slack=float(parts[4]),
                iterations=int(parts[5]),
                converged=parts[6] == "1",
            )
        except ValueError as exc:
            raise FileFormat(f"{path}:{i}: {exc}") from None
        for name, raw in zip(extras, parts[len(DIAGRAM_COLUMNS) :]):
            if name == "classified_nontrivial":
                rec = replace(rec, classified_nontrivial=raw == "1")
            else:
                rec = replace(rec, source=raw or None)
        records.append(rec)
    return BifurcationDiagram(tuple(records))
