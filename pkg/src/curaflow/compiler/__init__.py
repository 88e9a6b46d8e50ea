from curaflow.compiler.compile import (
    CompileError,
    InvalidPipeline,
    PhysicalPlan,
    UnknownCustomModule,
    UnresolvedParam,
    compile_pipeline,
    describe_module,
    resolve_params,
)
from curaflow.compiler.customs import CustomRegistry
from curaflow.compiler.generate import GenerationFailed, extract_code, llmgc_generate
from curaflow.compiler.modules import (
    CustomImpl,
    DataExposureError,
    DecoratedImpl,
    LlmImpl,
    LlmOutputError,
    ModuleFailure,
    OutputRule,
    PhysicalModule,
    ScriptImpl,
)
from curaflow.compiler.templates import (
    MissingParam,
    Template,
    UnknownTemplate,
    template_instantiate,
    template_list,
)

__all__ = [
    "CompileError",
    "CustomImpl",
    "CustomRegistry",
    "DataExposureError",
    "DecoratedImpl",
    "GenerationFailed",
    "InvalidPipeline",
    "LlmImpl",
    "LlmOutputError",
    "MissingParam",
    "ModuleFailure",
    "OutputRule",
    "PhysicalModule",
    "PhysicalPlan",
    "ScriptImpl",
    "Template",
    "UnknownCustomModule",
    "UnknownTemplate",
    "UnresolvedParam",
    "compile_pipeline",
    "describe_module",
    "extract_code",
    "llmgc_generate",
    "resolve_params",
    "template_instantiate",
    "template_list",
]
