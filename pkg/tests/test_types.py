"""Tests for intermittent-sgd types."""

import numpy as np
import pytest

from intermittent_sgd.errors import ConfigurationError
from intermittent_sgd.types import (
    DEFAULT_SEEDS,
    DEFAULT_STEPSIZE_GRID,
    Algorithm,
    ExperimentSpec,
    FigureConfig,
    GenerationSpec,
    LocalObjective,
    Metric,
    NoiseKind,
    OracleConfig,
    ProblemInstance,
    RateParams,
    RunConfig,
    TuningCell,
    TuningResult,
    parse_enum,
)


def test_enums() -> None:
    """Test enum values match their wire names."""
    assert Algorithm.MBSGD == "mbsgd"
    assert Algorithm.LOCALSGD == "localsgd"
    assert Algorithm.SCAFFOLD == "scaffold"
    assert Metric.SCAFFOLD_PHASE2 == "scaffold_phase2"
    assert NoiseKind.GAUSSIAN_ISOTROPIC == "gaussian-isotropic"


def test_parse_enum() -> None:
    """Test enum parsing accepts members and names, rejects unknown strings."""
    assert parse_enum(Algorithm, "scaffold", "algorithm") is Algorithm.SCAFFOLD
    assert parse_enum(Algorithm, Algorithm.MBSGD, "algorithm") is Algorithm.MBSGD
    with pytest.raises(ConfigurationError) as exc_info:
        parse_enum(Algorithm, "fedavg", "algorithm")
    assert exc_info.value.field == "algorithm"
    assert "mbsgd" in str(exc_info.value)


def test_local_objective_is_read_only() -> None:
    """Test local data is copied to read-only float arrays."""
    obj = LocalObjective(
        data_matrix=[[1, 2]], targets=[3], reg_weight=0.1, anchor=[0, 0]  # type: ignore[arg-type]
    )
    assert obj.data_matrix.dtype == np.float64
    assert obj.dimension == 2
    with pytest.raises(ValueError):
        obj.data_matrix[0, 0] = 5.0


def test_local_objective_shape_mismatch() -> None:
    """Test targets must have one entry per row."""
    with pytest.raises(ConfigurationError):
        LocalObjective(
            data_matrix=np.ones((2, 2)), targets=np.ones(3), reg_weight=0.0, anchor=np.zeros(2)
        )


def test_problem_instance_stacks() -> None:
    """Test derived stacks and the default n/m row weight."""
    objs = tuple(
        LocalObjective(
            data_matrix=np.ones((3, 2)), targets=np.zeros(3), reg_weight=0.5, anchor=np.zeros(2)
        )
        for _ in range(2)
    )
    p = ProblemInstance(dimension=2, num_workers=2, locals=objs)

    assert p.data.shape == (2, 3, 2)
    assert p.target_stack.shape == (2, 3)
    assert np.array_equal(p.reg_weights, [0.5, 0.5])
    assert np.allclose(p.scale_rows, 2.0 / 6.0)


def test_problem_instance_rejects_wrong_count() -> None:
    """Test the number of local objectives must equal num_workers."""
    obj = LocalObjective(
        data_matrix=np.ones((1, 1)), targets=np.zeros(1), reg_weight=0.0, anchor=np.zeros(1)
    )
    with pytest.raises(ConfigurationError):
        ProblemInstance(dimension=1, num_workers=2, locals=(obj,))


def test_generation_spec_defaults() -> None:
    """Test generator defaults mirror the experiment configuration."""
    spec = GenerationSpec()
    assert (spec.dimension, spec.num_workers, spec.reg_weight) == (100, 10, 0.01)
    assert spec.target_L == 1.0
    spec.validate()


@pytest.mark.parametrize(
    "changes",
    [
        {"dimension": 0},
        {"target_delta": 2.0},
        {"target_zeta": -0.1},
        {"reg_weight": -1.0},
        {"calibration_tolerance": 0.0},
    ],
)
def test_generation_spec_validation(changes: dict) -> None:
    """Test out-of-range generator knobs are rejected."""
    with pytest.raises(ConfigurationError):
        GenerationSpec(**changes).validate()


def test_generation_spec_from_dict_unknown_key() -> None:
    """Test unknown keys are named in the error."""
    with pytest.raises(ConfigurationError) as exc_info:
        GenerationSpec.from_dict({"dimension": 5, "dims": 3})
    assert exc_info.value.field == "dims"


def test_oracle_config() -> None:
    """Test oracle validation and the effective noise level."""
    assert OracleConfig(sigma=0.5).effective_sigma == 0.5
    silent = OracleConfig(sigma=0.5, noise_kind="none")  # type: ignore[arg-type]
    assert silent.effective_sigma == 0.0
    with pytest.raises(ConfigurationError):
        OracleConfig(sigma=-1.0)


def test_run_config_validation() -> None:
    """Test run configuration ranges and SCAFFOLD's tau requirement."""
    cfg = RunConfig(algorithm="localsgd", eta=0.1, tau=5, rounds=2)  # type: ignore[arg-type]
    cfg.validate(dimension=3)
    assert cfg.algorithm is Algorithm.LOCALSGD
    assert cfg.total_iterations == 10

    with pytest.raises(ConfigurationError):
        RunConfig(algorithm=Algorithm.SCAFFOLD, eta=0.1, tau=1, rounds=2).validate()
    with pytest.raises(ConfigurationError):
        RunConfig(algorithm=Algorithm.MBSGD, eta=0.0, tau=1, rounds=2).validate()
    with pytest.raises(ConfigurationError):
        RunConfig(
            algorithm=Algorithm.MBSGD, eta=0.1, tau=1, rounds=2, init=np.zeros(2)
        ).validate(dimension=3)


def test_scaffold_total_iterations() -> None:
    """Test SCAFFOLD double-rounds query 2 * tau times per round."""
    cfg = RunConfig(algorithm=Algorithm.SCAFFOLD, eta=0.1, tau=3, rounds=4)
    assert cfg.total_iterations == 24


def test_rate_params() -> None:
    """Test rate parameter validation and replacement."""
    params = RateParams(L=1.0, Delta=1.0, sigma=0.0)
    params.validate()
    assert params.replace(R=10).R == 10
    with pytest.raises(ConfigurationError):
        RateParams(L=-1.0).validate()
    with pytest.raises(ConfigurationError):
        RateParams.from_dict({"L": 1.0, "gamma": 2.0})


def test_experiment_spec_round_trip() -> None:
    """Test the spec dictionary form rebuilds an equal spec."""
    spec = ExperimentSpec(
        problem=GenerationSpec(dimension=4, num_workers=2),
        algorithms=["mbsgd", "scaffold"],  # type: ignore[list-item]
        tau=4,
        rounds=6,
    )
    spec.validate()
    rebuilt = ExperimentSpec.from_dict(spec.to_dict())

    assert rebuilt.to_dict() == spec.to_dict()
    assert rebuilt.algorithms == [Algorithm.MBSGD, Algorithm.SCAFFOLD]
    assert isinstance(rebuilt.problem, GenerationSpec)


def test_experiment_spec_defaults() -> None:
    """Test default grid, seeds and interval."""
    spec = ExperimentSpec()
    assert tuple(spec.stepsize_grid) == DEFAULT_STEPSIZE_GRID
    assert tuple(spec.seeds) == DEFAULT_SEEDS == (111, 222, 333)
    assert spec.tau == 50


@pytest.mark.parametrize(
    "changes",
    [{"stepsize_grid": []}, {"seeds": []}, {"stepsize_grid": [0.1, -0.1]}, {"metric": "loss"}],
)
def test_experiment_spec_validation(changes: dict) -> None:
    """Test empty grids, non-positive stepsizes and unknown metrics are rejected."""
    with pytest.raises(ConfigurationError):
        ExperimentSpec(**changes).validate()


def test_tuning_result_to_dict() -> None:
    """Test tuning tables serialize with string seed keys."""
    cell = TuningCell(
        algorithm=Algorithm.MBSGD,
        stepsize=0.1,
        seed_metrics={222: 2.0, 111: 1.0},
        diverged={111: False, 222: False},
        mean_metric=1.5,
    )
    result = TuningResult(cells=[cell], chosen={Algorithm.MBSGD: 0.1})
    data = result.to_dict()

    assert data["chosen"] == {"mbsgd": 0.1}
    assert list(data["cells"][0]["seed_metrics"]) == ["111", "222"]
    assert result.cells_for(Algorithm.MBSGD) == [cell]
    assert result.cells_for(Algorithm.SCAFFOLD) == []


def test_figure_config_validation() -> None:
    """Test figure checkpoints must be even and within the budget."""
    FigureConfig().validate()
    with pytest.raises(ConfigurationError):
        FigureConfig(rounds=9).validate()
    with pytest.raises(ConfigurationError):
        FigureConfig(early_round=3).validate()
    with pytest.raises(ConfigurationError):
        FigureConfig(rounds=10, early_round=12).validate()


def test_figure_config_from_dict_tuples() -> None:
    """Test JSON lists become tuples."""
    config = FigureConfig.from_dict({"seeds": [1, 2], "fig1_left_deltas": [0.1, 0.2]})
    assert config.seeds == (1, 2)
    assert config.fig1_left_deltas == (0.1, 0.2)
