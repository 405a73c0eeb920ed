import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import settings

sys.path.insert(0, str(Path(__file__).parent))

from pargate.chain import mhz_to_rad, reference_chain  # noqa: E402
from pargate.kernel import US  # noqa: E402
from pargate.optimizer import GateRequest, solve  # noqa: E402

settings.register_profile("repo", deadline=None, derandomize=True, max_examples=40)
settings.load_profile("repo")

REF_MU = mhz_to_rad(2.962)
REF_TAU = 250 * US


def reference_request(pairs=((0, 3), (1, 4)), chi=(np.pi / 4, np.pi / 4), **kw):
    kw.setdefault("n_segments", 60)
    kw.setdefault("mu", REF_MU)
    return GateRequest(pairs=pairs, chi_targets=chi, tau=REF_TAU, **kw)


@pytest.fixture(scope="session")
def chain():
    return reference_chain()


@pytest.fixture(scope="session")
def solved_14_25(chain):
    request = reference_request()
    return request, solve(chain, request)


@pytest.fixture(scope="session")
def solved_15_24(chain):
    request = reference_request(pairs=((0, 4), (1, 3)), chi=(np.pi / 4, np.pi / 8))
    return request, solve(chain, request)


def sign_changes(row) -> int:
    s = np.sign(row[np.abs(row) > 0])
    return int(np.sum(s[1:] != s[:-1]))
