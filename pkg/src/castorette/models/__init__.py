from .spec import (
    ContextRef,
    CovariateRef,
    DeploymentConfig,
    LoadSpec,
    PipelineSpec,
    TransformStep,
    parse_deployment,
)
from .store import Model, ModelStore, ModelVersion

__all__ = [
    "ContextRef",
    "CovariateRef",
    "DeploymentConfig",
    "LoadSpec",
    "PipelineSpec",
    "TransformStep",
    "parse_deployment",
    "Model",
    "ModelStore",
    "ModelVersion",
]
