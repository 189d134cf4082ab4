"""
list-runs: read back the run registry.
"""

from pathlib import Path

import pandas as pd

from ..config import settings
from ..database import get_session
from ..models import CheckRecord, ExperimentRun
from ..schemas import RunSummarySchema

LIST_RUNS = "list-runs"


def register(subparsers, parents):
    p = subparsers.add_parser(LIST_RUNS, parents=parents, help="List recorded runs, newest first")
    p.add_argument("--output-dir", dest="output_dir", default=settings.OUTPUT_DIR)
    p.add_argument("--status", default=None, help="Only runs with this status (PASSED, FAILED, ERROR, ...)")
    p.add_argument("--limit", type=int, default=20)
    p.add_argument("--run-id", dest="run_id", default=None, help="Show the checks of one run")


def list_runs(output_dir: str, status=None, limit: int = 20, run_id=None) -> int:
    if not settings.DATABASE_URL and not (Path(output_dir) / "runs.db").exists():
        print(f"No run registry under {output_dir}")
        return 0
    db = get_session(output_dir)
    try:
        if run_id:
            run = db.query(ExperimentRun).filter(ExperimentRun.run_id.startswith(run_id)).first()
            if not run:
                print(f"Run {run_id} not found")
                return 1
            checks = db.query(CheckRecord).filter(CheckRecord.run_id == run.run_id).all()
            print(f"{run.run_id}  {run.command}  {run.status}  {run.run_dir}")
            frame = pd.DataFrame([{
                "name": c.name, "passed": c.passed, "measured": c.measured,
                "tolerance": c.tolerance, "detail": c.detail,
            } for c in checks])
            print(frame.to_string(index=False) if not frame.empty else "(no checks)")
            return 0

        query = db.query(ExperimentRun)
        if status:
            query = query.filter(ExperimentRun.status == status.upper())
        runs = query.order_by(ExperimentRun.created_at.desc()).limit(limit).all()

        summaries = []
        for run in runs:
            summaries.append(RunSummarySchema(
                run_id=run.run_id,
                command=run.command,
                status=run.status,
                created_at=run.created_at,
                completed_at=run.completed_at,
                check_count=len(run.checks) if run.checks else 0,
                failed_checks=sum(1 for c in run.checks if not c.passed) if run.checks else 0,
            ))
        if not summaries:
            print("No runs recorded")
            return 0
        print(pd.DataFrame([s.model_dump() for s in summaries]).to_string(index=False))
        return 0
    finally:
        db.close()
