from pathlib import Path

import pytest

REPO_ROOT = Path(__file__).resolve().parent.parent
LITMUS_DIR = REPO_ROOT / "litmus"

MP_TEXT = """\
name: mp-rel-acq
init: A1=0 F=0
T0:
  st [A1] 1
  stlr [F] 1
T1:
  ldar r0 [F]
  ld r1 [A1]
forbidden: T1:r0=1 & T1:r1=0
"""


@pytest.fixture
def mp_test():
    from louvre_sim import parse_litmus

    return parse_litmus(MP_TEXT)


@pytest.fixture
def litmus_dir():
    return LITMUS_DIR
