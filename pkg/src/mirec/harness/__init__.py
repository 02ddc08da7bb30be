from .config import ConfigError, RunConfig, setting
from .logs import StepRecord, read_step_log, read_stream, write_step_log, write_stream, write_summary
from .simulate import RunReport, RunResult, compare, report_from_log, run_stream, sweep
