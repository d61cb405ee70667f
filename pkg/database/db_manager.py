import datetime
import json
import logging
import math

from sqlalchemy import create_engine
from sqlalchemy.orm import sessionmaker
from .schema import Base, CheckResult, ExperimentRun, RunStatus

import config

logger = logging.getLogger("run_archive")


def _finite(value):
    # SQLite stores NaN as NULL; infinities are kept
    if value is None or (isinstance(value, float) and math.isnan(value)):
        return None
    return float(value)


class DatabaseManager:
    def __init__(self, db_path=None):
        self.db_path = db_path or config.DB_PATH
        self.engine = create_engine(f"sqlite:///{self.db_path}")
        self.Session = sessionmaker(bind=self.engine, expire_on_commit=False)

    def init_db(self):
        # Create tables if they don't exist
        Base.metadata.create_all(self.engine)

    def get_session(self):
        return self.Session()

    def start_run(self, command, config_dict, seed, threads=1, suite=None):
        """Record a run as RUNNING and return its id."""
        session = self.get_session()
        try:
            run = ExperimentRun(
                command=command,
                suite=suite,
                seed=str(seed),
                threads=threads,
                config_json=json.dumps(config_dict, sort_keys=True, default=str),
                engine_version=config.ENGINE_VERSION,
                status=RunStatus.RUNNING,
                started_at=datetime.datetime.utcnow(),
            )
            session.add(run)
            session.commit()
            logger.info(f"Archived run {run.id} ({command})")
            return run.id
        except Exception as e:
            logger.error(f"Error archiving run start: {e}", exc_info=True)
            session.rollback()
            raise
        finally:
            session.close()

    def finish_run(self, run_id, report, report_json, output_path=None):
        """Store the report and its checks; the status follows the verdicts."""
        session = self.get_session()
        try:
            run = session.query(ExperimentRun).filter_by(id=run_id).first()
            if run is None:
                logger.warning(f"Run {run_id} not found in archive")
                return False
            run.status = RunStatus.PASSED if report.passed else RunStatus.FAILED
            run.completed_at = datetime.datetime.utcnow()
            run.duration = report.elapsed
            run.report_json = report_json
            run.output_path = str(output_path) if output_path is not None else None
            for check in report.checks:
                lo, hi = check.interval if check.interval is not None else (None, None)
                run.checks.append(CheckResult(
                    name=check.name,
                    anchor=check.anchor,
                    point=_finite(check.point),
                    interval_lo=_finite(lo),
                    interval_hi=_finite(hi),
                    bound=_finite(check.bound),
                    verdict=check.verdict.value,
                    note=check.note,
                ))
            session.commit()
            logger.info(f"Run {run_id} archived as {run.status.value} with {len(report.checks)} checks")
            return True
        except Exception as e:
            logger.error(f"Error archiving run {run_id}: {e}", exc_info=True)
            session.rollback()
            return False
        finally:
            session.close()

    def fail_run(self, run_id, error):
        session = self.get_session()
        try:
            run = session.query(ExperimentRun).filter_by(id=run_id).first()
            if run is None:
                return False
            run.status = RunStatus.ERROR
            run.completed_at = datetime.datetime.utcnow()
            if run.started_at:
                run.duration = (run.completed_at - run.started_at).total_seconds()
            run.last_error = str(error)
            session.commit()
            return True
        except Exception as e:
            logger.error(f"Error marking run {run_id} as failed: {e}", exc_info=True)
            session.rollback()
            return False
        finally:
            session.close()
