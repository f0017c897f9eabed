import math

import numpy as np
import pytest

from leflab import mesh
from leflab.errors import FileFormat
from leflab.potentials import unit_pair
from leflab.problem import (
    BifurcationDiagram,
    DiagramRecord,
    ProblemSpec,
    assemble_diagram,
    read_diagram,
    write_diagram,
)


def test_spec_validation(interval_grid, square_grid):
    pair = unit_pair(interval_grid)
    for q, p in [(0.0, 3.0), (1.0, 3.0), (0.5, 1.0), (-0.5, 3.0)]:
        with pytest.raises(ValueError):
            ProblemSpec(q, p, "plus", pair)
    with pytest.raises(ValueError):
        ProblemSpec(0.5, 3.0, "both", pair)
    # the superlinear exponent is restricted on the rectangle
    with pytest.raises(ValueError):
        ProblemSpec(0.5, 5.0, "plus", unit_pair(square_grid))
    ProblemSpec(0.5, 4.5, "plus", unit_pair(square_grid))
    ProblemSpec(0.5, 7.0, "plus", pair)


def test_spec_sign_and_grid(plus_spec, minus_spec, interval_grid):
    assert plus_spec.sign == 1.0
    assert minus_spec.sign == -1.0
    assert plus_spec.grid.matches(interval_grid)


def _record(lam, **kw):
    base = dict(
        lam=lam,
        sup_norm=0.1 * lam,
        h1_norm=0.2 * lam,
        energy=-(lam**2) / 3.0,
        stability_slack=1e-3,
        iterations=17,
        converged=True,
    )
    base.update(kw)
    return DiagramRecord(**base)


def test_diagram_requires_increasing_lambda():
    with pytest.raises(ValueError):
        BifurcationDiagram((_record(2.0), _record(1.0)))
    with pytest.raises(ValueError):
        BifurcationDiagram((_record(1.0), _record(1.0)))


def test_assemble_diagram_sorts_and_dedupes():
    d = assemble_diagram([_record(3.0), _record(1.0), _record(3.0)])
    assert [r.lam for r in d.records] == [1.0, 3.0]


def test_converged_prefix():
    d = BifurcationDiagram((_record(1.0), _record(2.0), _record(3.0, converged=False)))
    assert [r.lam for r in d.converged_prefix()] == [1.0, 2.0]


def test_diagram_roundtrip(tmp_path):
    records = (
        _record(1.0 / 3.0),  # awkward float survives 17 digits
        _record(0.5),
        _record(2.0, converged=False, energy=float("nan"), stability_slack=float("nan")),
    )
    d = assemble_diagram(records, bracket=(1.5, 2.5))
    path = tmp_path / "diagram.csv"
    write_diagram(d, path)
    back = read_diagram(path)
    assert len(back) == len(d)
    for a, b in zip(back.records, d.records):
        assert a.lam == b.lam and a.iterations == b.iterations and a.converged == b.converged
        for name in ("sup_norm", "h1_norm", "energy", "stability_slack"):
            x, y = getattr(a, name), getattr(b, name)
            assert (math.isnan(x) and math.isnan(y)) or x == y


def test_diagram_roundtrip_with_flags(tmp_path):
    records = (
        _record(0.5, classified_nontrivial=False),
        _record(1.5, classified_nontrivial=True, source="obstacle"),
    )
    path = tmp_path / "diagram.csv"
    write_diagram(assemble_diagram(records), path)
    back = read_diagram(path)
    assert back.records[0].classified_nontrivial is False
    assert back.records[1].classified_nontrivial is True
    assert back.records[1].source == "obstacle"


def test_read_diagram_rejects_bad_header(tmp_path):
    path = tmp_path / "diagram.csv"
    path.write_text("lambda,sup\n1.0,0.1\n")
    with pytest.raises(FileFormat):
        read_diagram(path)


def test_read_diagram_rejects_bad_row(tmp_path):
    good = tmp_path / "good.csv"
    write_diagram(assemble_diagram([_record(1.0)]), good)
    header = good.read_text().splitlines()[0]
    bad = tmp_path / "bad.csv"
    bad.write_text(header + "\n1.0,oops,0.2,-0.3,0.001,17,1\n")
    with pytest.raises(FileFormat) as exc:
        read_diagram(bad)
    assert ":2" in str(exc.value)


def test_read_diagram_rejects_short_row(tmp_path):
    good = tmp_path / "good.csv"
    write_diagram(assemble_diagram([_record(1.0)]), good)
    header = good.read_text().splitlines()[0]
    bad = tmp_path / "bad.csv"
    bad.write_text(header + "\n1.0,0.1\n")
    with pytest.raises(FileFormat):
        read_diagram(bad)


def test_record_from_report_copies(interval_grid, plus_spec):
    from leflab.problem import SolveReport, record_from_report

    report = SolveReport(
        solution=mesh.zero_field(interval_grid),
        lam=2.0,
        converged=True,
        iterations=9,
        weak_residual=1e-11,
        energy=-0.25,
        stability_slack=0.5,
        sup_norm=0.0,
        h1_norm=0.0,
    )
    rec = record_from_report(report, classified_nontrivial=False)
    assert rec.lam == 2.0 and rec.energy == -0.25 and rec.iterations == 9
    assert rec.classified_nontrivial is False
