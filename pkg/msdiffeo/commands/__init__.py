"""Command list, run configuration and orchestration"""

from .config_utils import (
    COMMANDS, ALL_CHECKS, RunConfig, GridConfig, KernelConfig, TimeConfig, DecomposeConfig, VerifyConfig,
    parse_config, load_config, dump_config
)
from .command_utils import (
    EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_FAIL, get_commands, build_problem, final_map, run_register,
    run_decompose, run_verify, run_oracle, execute_command, build_parser, main
)

__all__ = [
    'COMMANDS', 'ALL_CHECKS', 'RunConfig', 'GridConfig', 'KernelConfig', 'TimeConfig', 'DecomposeConfig',
    'VerifyConfig', 'parse_config', 'load_config', 'dump_config',
    'EXIT_OK', 'EXIT_CONFIG', 'EXIT_NUMERICAL', 'EXIT_FAIL', 'get_commands', 'build_problem', 'final_map',
    'run_register', 'run_decompose', 'run_verify', 'run_oracle', 'execute_command', 'build_parser', 'main'
]
