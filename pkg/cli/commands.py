"""
CLI commands.

Each command returns a process exit code:

    0  success
    1  unexpected error
    2  command-line usage (argparse, or a compare with < 2 policies)
    3  scenario validation failed
    4  I/O error (unreadable scenario, unwritable output directory)
    5  a run aborted on an invariant violation
"""

import logging
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

from core.config import ScenarioConfig, ScenarioError, dump_scenario, load_scenario, with_mode, with_seed
from core.engine import InvariantViolation, run

from .reports import summarize, write_report_csv, write_report_json, write_rows

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_USAGE = 2
EXIT_VALIDATION = 3
EXIT_IO = 4
EXIT_INVARIANT = 5

EVENTS_FILE = "events.jsonl"
REPORT_JSON_FILE = "report.json"
REPORT_CSV_FILE = "report.csv"
COMPARE_FILE = "compare.csv"


def _load(path: str) -> Tuple[Optional[ScenarioConfig], int]:
    """Load a scenario, logging problems; returns (config, exit code)."""
    try:
        return load_scenario(path), EXIT_OK
    except ScenarioError as e:
        logger.error("❌ Scenario %s is invalid:", path)
        for problem in e.errors:
            logger.error("   %s", problem)
        return None, EXIT_VALIDATION
    except OSError as e:
        logger.error("❌ Cannot read scenario %s: %s", path, e)
        return None, EXIT_IO


def run_command(scenario_path: str, seed: Optional[int] = None, out_dir: Optional[str] = None) -> int:
    """
    Run one scenario and write its event log and reports.

    Args:
        scenario_path: Scenario file
        seed: Overrides the scenario seed when given
        out_dir: Overrides outputs.dir when given

    Returns:
        Exit code
    """
    cfg, code = _load(scenario_path)
    if cfg is None:
        return code
    if seed is not None:
        cfg = with_seed(cfg, seed)

    try:
        report, log = run(cfg)
    except InvariantViolation as e:
        logger.error("❌ Run aborted, invariant violated: %s", e)
        return EXIT_INVARIANT

    out = Path(out_dir if out_dir is not None else cfg.output_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        if "events" in cfg.output_formats:
            log.write(out / EVENTS_FILE)
        if "json" in cfg.output_formats:
            write_report_json(report, out / REPORT_JSON_FILE)
        if "csv" in cfg.output_formats:
            write_report_csv(report, out / REPORT_CSV_FILE)
    except OSError as e:
        logger.error("❌ Cannot write outputs to %s: %s", out, e)
        return EXIT_IO

    logger.info("📝 Outputs written to %s (run %s)", out, report.run_id)
    return EXIT_OK


def _compare_one(cfg: ScenarioConfig, token: str, seed: int) -> Dict[str, Any]:
    """One sub-run of a comparison; module-level so process pools can pickle it."""
    report, _ = run(with_seed(with_mode(cfg, token), seed))
    return report.csv_values()


def compare_rows(cfg: ScenarioConfig, policies: Sequence[str], seeds: Sequence[int],
                 jobs: int = 1) -> List[Dict[str, Any]]:
    """
    Run the policy x seed cross product.

    Rows come back in policy order, then seed order, whatever order the
    sub-runs finish in.

    Raises:
        ScenarioError: If a policy token is unknown
        InvariantViolation: If any sub-run aborts
    """
    for token in policies:
        with_mode(cfg, token)
    tasks = [(token, seed) for token in policies for seed in seeds]
    if jobs <= 1:
        return [_compare_one(cfg, token, seed) for token, seed in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_compare_one, [cfg] * len(tasks),
                             [t for t, _ in tasks], [s for _, s in tasks]))


def compare_command(scenario_path: str, policies: Sequence[str], seeds: Sequence[int],
                    out_dir: Optional[str] = None, jobs: int = 1) -> int:
    """
    Compare policies and modes over identical workloads.

    Writes compare.csv: one row per (policy, seed) followed by one mean row
    per listed policy.

    Returns:
        Exit code
    """
    if len(policies) < 2 or not seeds:
        logger.error("❌ compare needs at least two policies and one seed")
        return EXIT_USAGE
    cfg, code = _load(scenario_path)
    if cfg is None:
        return code

    try:
        rows = compare_rows(cfg, policies, seeds, jobs)
    except ScenarioError as e:
        for problem in e.errors:
            logger.error("❌ %s", problem)
        return EXIT_VALIDATION
    except InvariantViolation as e:
        logger.error("❌ Comparison aborted, invariant violated: %s", e)
        return EXIT_INVARIANT

    per_policy = [rows[i:i + len(seeds)] for i in range(0, len(rows), len(seeds))]
    out = Path(out_dir if out_dir is not None else cfg.output_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        write_rows(rows + summarize(per_policy), out / COMPARE_FILE)
    except OSError as e:
        logger.error("❌ Cannot write %s: %s", out / COMPARE_FILE, e)
        return EXIT_IO

    logger.info("📊 Compared %d policies over %d seeds -> %s",
                len(policies), len(seeds), out / COMPARE_FILE)
    return EXIT_OK


def validate_command(scenario_path: str) -> int:
    """Validate a scenario and print its normalized form."""
    cfg, code = _load(scenario_path)
    if cfg is None:
        return code
    print(dump_scenario(cfg), end="")
    logger.info("✅ Scenario %s is valid", scenario_path)
    return EXIT_OK
