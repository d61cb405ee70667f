#!/usr/bin/env python3
"""
CLI Manager for coupleman
Inspects and maintains the archive of experiment runs
"""

import os
import sys
import argparse
import json
import logging
import logging.handlers
from datetime import datetime, timedelta
from pathlib import Path
from tabulate import tabulate

# Add parent directory to path for imports
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

import config
from database.db_manager import DatabaseManager
from database.schema import ExperimentRun, CheckResult, RunStatus

logger = logging.getLogger("cli_manager")


def parse_args(argv=None):
    parser = argparse.ArgumentParser(description="CLI Manager for the coupleman run archive")
    subparsers = parser.add_subparsers(dest='command', help='Command to run')

    # Status command
    status_parser = subparsers.add_parser('status', help='Show recent runs')
    status_parser.add_argument('--status', choices=[s.value for s in RunStatus], help='Show only runs with this status')
    status_parser.add_argument('--command', dest='run_command', help='Show only runs of this command')
    status_parser.add_argument('--limit', type=int, default=20, help='Limit number of runs shown')

    # Run details command
    run_parser = subparsers.add_parser('run', help='Show details for a specific run')
    run_parser.add_argument('run_id', type=int, help='Run ID to show details for')
    run_parser.add_argument('--report', action='store_true', help='Print the archived JSON report')

    # Reset command
    reset_parser = subparsers.add_parser('reset', help='Mark stale RUNNING runs as errors')
    reset_parser.add_argument('--force', action='store_true', help='Force reset without confirmation')

    # Cleanup command
    cleanup_parser = subparsers.add_parser('cleanup', help='Delete archived runs')
    cleanup_parser.add_argument('--status', choices=[s.value for s in RunStatus], help='Delete runs with this status')
    cleanup_parser.add_argument('--older-than', type=int, help='Delete runs older than this many days')
    cleanup_parser.add_argument('--force', action='store_true', help='Force cleanup without confirmation')

    # Initialize database command
    init_parser = subparsers.add_parser('init', help='Initialize or reset the archive')
    init_parser.add_argument('--force', action='store_true', help='Force reset without confirmation')

    return parser.parse_args(argv)


def get_status_color(status):
    """Return ANSI color code based on status."""
    if status == RunStatus.PASSED:
        return "\033[92m"  # Green
    elif status == RunStatus.RUNNING:
        return "\033[94m"  # Blue
    elif status in (RunStatus.FAILED, RunStatus.ERROR):
        return "\033[91m"  # Red
    elif status == RunStatus.PENDING:
        return "\033[93m"  # Yellow
    else:
        return "\033[0m"   # Default


def reset_color():
    """Reset ANSI color."""
    return "\033[0m"


def format_time_ago(timestamp):
    """Format a timestamp as a human-readable time ago string."""
    if not timestamp:
        return "Never"

    delta = datetime.utcnow() - timestamp

    if delta < timedelta(minutes=1):
        return "Just now"
    elif delta < timedelta(hours=1):
        return f"{delta.seconds // 60} minutes ago"
    elif delta < timedelta(days=1):
        return f"{delta.seconds // 3600} hours ago"
    else:
        return f"{delta.days} days ago"


def confirm(prompt, force):
    if force:
        return True
    answer = input(f"{prompt} (y/n): ")
    return answer.lower() == 'y'


def show_status(args, db_manager):
    """Show recent runs."""
    session = db_manager.get_session()
    try:
        query = session.query(ExperimentRun)
        if args.status:
            query = query.filter(ExperimentRun.status == RunStatus(args.status))
        if args.run_command:
            query = query.filter(ExperimentRun.command == args.run_command)

        total = session.query(ExperimentRun).count()
        print("\n=== Run Archive Summary ===")
        print(f"Total Runs: {total}")
        for status in RunStatus:
            count = session.query(ExperimentRun).filter_by(status=status).count()
            if count:
                print(f"{status.value.capitalize()}: {count}")
        print()

        runs = query.order_by(ExperimentRun.created_at.desc()).limit(args.limit).all()
        table_data = []
        for run in runs:
            status_str = f"{get_status_color(run.status)}{run.status.value}{reset_color()}"
            duration = f"{run.duration:.1f}s" if run.duration is not None else "-"
            table_data.append([
                run.id,
                run.command if not run.suite else f"{run.command} {run.suite}",
                run.seed,
                status_str,
                duration,
                format_time_ago(run.created_at),
            ])

        if table_data:
            print(tabulate(
                table_data,
                headers=["ID", "Command", "Seed", "Status", "Duration", "Created"],
                tablefmt="grid"
            ))
        else:
            print("No runs match the specified criteria.")
        return len(table_data)
    finally:
        session.close()


def show_run_details(args, db_manager):
    """Show details and checks for a specific run."""
    session = db_manager.get_session()
    try:
        run = session.query(ExperimentRun).filter_by(id=args.run_id).first()
        if not run:
            print(f"Error: Run with ID {args.run_id} not found.")
            return False

        print("\n=== Run Details ===")
        print(f"ID: {run.id}")
        print(f"Command: {run.command}")
        if run.suite:
            print(f"Suite: {run.suite}")
        print(f"Seed: {run.seed}")
        print(f"Threads: {run.threads}")
        print(f"Engine: {run.engine_version}")
        print(f"Status: {get_status_color(run.status)}{run.status.value}{reset_color()}")
        print(f"Started: {run.started_at}")
        print(f"Completed: {run.completed_at}")
        print(f"Output: {run.output_path or 'None'}")
        print(f"Last Error: {run.last_error or 'None'}")
        print(f"Config: {run.config_json}")

        checks = session.query(CheckResult).filter_by(run_id=run.id).order_by(CheckResult.id).all()
        if checks:
            table_data = []
            for check in checks:
                interval = "-"
                if check.interval_lo is not None and check.interval_hi is not None:
                    interval = f"({check.interval_lo:.6g}, {check.interval_hi:.6g})"
                table_data.append([
                    check.name,
                    f"{check.point:.6g}" if check.point is not None else "-",
                    interval,
                    f"{check.bound:.6g}" if check.bound is not None else "-",
                    check.verdict,
                ])
            print("\n=== Checks ===")
            print(tabulate(
                table_data,
                headers=["Check", "Point", "Interval", "Bound", "Verdict"],
                tablefmt="grid"
            ))

        if args.report and run.report_json:
            print("\n=== Report ===")
            print(json.dumps(json.loads(run.report_json), indent=2))
        return True
    finally:
        session.close()


def reset_runs(args, db_manager):
    """Mark runs left in RUNNING (interrupted processes) as ERROR."""
    if not confirm("Mark all RUNNING runs as errors?", args.force):
        print("Reset canceled.")
        return 0

    session = db_manager.get_session()
    try:
        stale = session.query(ExperimentRun).filter_by(status=RunStatus.RUNNING).all()
        for run in stale:
            run.status = RunStatus.ERROR
            run.last_error = "interrupted"
        session.commit()
        print(f"Reset {len(stale)} runs.")
        return len(stale)
    except Exception as e:
        logger.error(f"Error resetting runs: {e}", exc_info=True)
        session.rollback()
        return 0
    finally:
        session.close()


def cleanup_database(args, db_manager):
    """Delete runs by status and/or age."""
    if not args.status and args.older_than is None:
        print("Error: No cleanup option specified. Use --status or --older-than.")
        return 0
    if not confirm("Are you sure you want to delete these runs? This cannot be undone.", args.force):
        print("Cleanup canceled.")
        return 0

    session = db_manager.get_session()
    try:
        query = session.query(ExperimentRun)
        if args.status:
            query = query.filter(ExperimentRun.status == RunStatus(args.status))
        if args.older_than is not None:
            cutoff = datetime.utcnow() - timedelta(days=args.older_than)
            query = query.filter(ExperimentRun.created_at < cutoff)
        runs = query.all()
        for run in runs:
            # checks go with the run (delete-orphan cascade)
            session.delete(run)
        session.commit()
        print(f"Removed {len(runs)} runs.")
        return len(runs)
    except Exception as e:
        logger.error(f"Error cleaning up archive: {e}", exc_info=True)
        session.rollback()
        return 0
    finally:
        session.close()


def init_database(args, db_manager):
    """Initialize or reset the archive."""
    if not confirm("Are you sure you want to initialize/reset the archive? ALL RUNS WILL BE LOST.", args.force):
        print("Archive initialization canceled.")
        return False

    db_path = Path(db_manager.db_path)
    if db_path.exists():
        try:
            db_manager.engine.dispose()
            db_path.unlink()
            print(f"Removed existing archive: {db_path}")
        except Exception as e:
            print(f"Error removing archive file: {e}")
            return False

    try:
        db_manager.init_db()
        print("Archive initialized successfully.")
        return True
    except Exception as e:
        print(f"Error initializing archive: {e}")
        return False


COMMANDS = {
    'status': show_status,
    'run': show_run_details,
    'reset': reset_runs,
    'cleanup': cleanup_database,
    'init': init_database,
}


def main(argv=None, db_manager=None):
    args = parse_args(argv)

    logging.basicConfig(
        level=getattr(logging, config.LOG_LEVEL),
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        handlers=[
            logging.handlers.RotatingFileHandler(config.LOGS_DIR / "coupleman.log",
                                                 maxBytes=config.LOG_FILE_SIZE,
                                                 backupCount=config.LOG_FILE_COUNT),
            logging.StreamHandler()
        ]
    )

    if args.command is None:
        print("Error: No command specified. Use one of: " + ", ".join(COMMANDS))
        return 2

    # Initialize database manager
    db_manager = db_manager or DatabaseManager()
    if args.command != 'init':
        db_manager.init_db()

    COMMANDS[args.command](args, db_manager)
    return 0


if __name__ == "__main__":
    sys.exit(main())
