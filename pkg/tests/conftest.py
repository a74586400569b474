from __future__ import annotations

import copy

import pytest

from termbench.harness import load_suite
from termbench.harness.tasks import shipped_path
from termbench.platform import Platform, load_fixture
from termbench.provider import PricingTable


@pytest.fixture(scope="session")
def itsm_fixture() -> dict:
    return load_fixture(shipped_path("fixtures", "itsm.json"))


@pytest.fixture(scope="session")
def erp_fixture() -> dict:
    return load_fixture(shipped_path("fixtures", "erp.json"))


@pytest.fixture
def platform(itsm_fixture):
    p = Platform("servicenow")
    p.seed(copy.deepcopy(itsm_fixture))
    yield p
    p.shutdown()


@pytest.fixture
def erp_platform(erp_fixture):
    p = Platform("erpnext")
    p.seed(copy.deepcopy(erp_fixture))
    yield p
    p.shutdown()


@pytest.fixture(scope="session")
def pricing() -> PricingTable:
    return PricingTable.load(shipped_path("pricing.json"))


@pytest.fixture(scope="session")
def itsm_suite():
    return load_suite("itsm-demo")
