"""Tests for the validation cross-checks."""

from dataclasses import replace

import numpy as np
import pytest

import services.validation as validation
from services.fim_core import assemble_fim
from services.peb_solver import peb_all
from services.validation import (
    ALL_CHECKS,
    ValidationCheck,
    ValidationPlan,
    ValidationReport,
    run_validation,
)


@pytest.fixture
def plan():
    """A reduced validation run that keeps every check cheap."""
    return ValidationPlan(oracle_elements=(4, 9), one_hop_g_max=12, two_hop_g=(20, 50), property_trials=4)


class TestChecks:
    """Each check passes on the reduced plan."""

    @pytest.mark.parametrize("check", ALL_CHECKS, ids=lambda c: c.__name__)
    def test_check_passes(self, plan, check):
        result = check(plan)
        assert isinstance(result, ValidationCheck)
        assert result.passed, f"{result.name}: {result.max_rel_error:.3e} > {result.tolerance} ({result.detail})"

    def test_corrupted_yy_is_named(self, plan):
        result = validation.check_corrupted_yy(plan)
        assert result.name == "negative_control_corrupted_yy"
        assert "entry yy" in result.detail
        assert result.max_rel_error > validation.ORACLE_TOL

    def test_scaled_block_breaks_one_hop_match(self, plan):
        result = validation.check_scaled_block(plan)
        assert result.name == "negative_control_scaled_block"
        assert result.max_rel_error > validation.ONE_HOP_TOL

    def test_two_hop_detail_reports_ratio(self, plan):
        assert "d=0.0567" in validation.check_two_hop_closed_form(plan).detail

    def test_added_anchor_never_raises_a_bound(self, plan, mocker):
        fewer = replace(plan.scenario(30, 2, 2), anchors_at=(0, 31))
        more = replace(plan.scenario(30, 3, 2), anchors_at=(0, 31, 32))
        weak = peb_all(assemble_fim(fewer.topology(), plan.radio, plan.path_loss)).peb_total
        strong = peb_all(assemble_fim(more.topology(), plan.radio, plan.path_loss)).peb_total
        assert np.all(strong <= weak * (1 + 1e-12))
        assert strong[-1] < weak[-1]

        spy = mocker.spy(validation, "assemble_fim")
        assert validation.check_loewner_monotonicity(plan).passed
        assert spy.call_count == 6

    def test_effective_bandwidth_reports_rolloff(self, plan):
        result = validation.check_effective_bandwidth(plan)
        assert result.name == "effective_bandwidth_quadrature"
        assert result.detail.startswith("worst at rolloff=")


class TestValidationPlan:
    """Tests for ValidationPlan limits."""

    def test_oracle_size_limit(self):
        with pytest.raises(ValueError, match="N <= 36"):
            ValidationPlan(oracle_elements=(49,))

    def test_defaults(self):
        plan = ValidationPlan()
        assert plan.one_hop_g_max == 500
        assert plan.property_trials == 100

    @pytest.mark.parametrize("kwargs", [{"one_hop_g_max": 1001}, {"two_hop_g": (20, 2000)}])
    def test_solver_size_limit(self, kwargs):
        with pytest.raises(ValueError, match="G <= 1000"):
            ValidationPlan(**kwargs)

    def test_scenario(self, plan):
        scenario = plan.scenario(10, 2, 2, n_elements=9)
        assert scenario.hop_limit == 2
        assert scenario.agent_array.n_elements == 9
        assert scenario.path_loss is plan.path_loss


class TestRunValidation:
    """Tests for run_validation."""

    def test_collects_every_result(self, plan, mocker):
        def passing(p):
            return ValidationCheck("passing", True, 0.0, 1e-9)

        def failing(p):
            return ValidationCheck("failing", False, 0.5, 1e-2, "worst at G=4")

        mocker.patch.object(validation, "ALL_CHECKS", (passing, failing))
        report = run_validation(plan)
        assert [c.name for c in report.checks] == ["passing", "failing"]
        assert not report.passed
        assert [c.name for c in report.failed()] == ["failing"]

    def test_empty_report_passes(self):
        assert ValidationReport().passed


@pytest.mark.slow
def test_full_validation_passes():
    """The default plan, as run by ``linepeb validate``."""
    report = run_validation()
    assert report.passed, [c.name for c in report.failed()]
