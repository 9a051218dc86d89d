"""Acceptance criteria 1-10, each at its stated tolerance.

The suite itself lives in lifted_mfvi.acceptance (shared with the
``oracle-check`` command); it runs once per session here and criterion 10
runs it a second time to compare report bytes.
"""

import pytest

from lifted_mfvi.acceptance import NAMES, run_suite, suite_report
from lifted_mfvi.io import dumps

from conftest import ACCEPTANCE_LINES

SEED = 0


def record(cid, name, passed, detail=""):
    line = f"criterion {cid:>2} {name:<40} {'PASS' if passed else 'FAIL'}{'  ' + detail if detail else ''}"
    print(line)
    ACCEPTANCE_LINES.append(line)


@pytest.fixture(scope="module")
def suite():
    results = run_suite(SEED)
    return {r.id: r for r in results}, dumps(suite_report(results, SEED))


@pytest.mark.parametrize("cid", sorted(NAMES))
def test_criterion(suite, cid):
    c = suite[0][cid]
    record(cid, c.name, c.passed, "; ".join(c.failures[:3]))
    assert c.passed, c.failures


def test_criterion_10_determinism(suite):
    again = dumps(suite_report(run_suite(SEED), SEED))
    same = again == suite[1]
    record(10, "Determinism (byte-identical rerun)", same)
    assert same
