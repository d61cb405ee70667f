from sqlalchemy import Column, Integer, String, Float, ForeignKey, Text, DateTime, Enum
from sqlalchemy.ext.declarative import declarative_base
from sqlalchemy.orm import relationship
import enum
import datetime

Base = declarative_base()

class RunStatus(enum.Enum):
    PENDING = "pending"
    RUNNING = "running"
    PASSED = "passed"
    FAILED = "failed"
    ERROR = "error"

class ExperimentRun(Base):
    __tablename__ = 'experiment_runs'

    id = Column(Integer, primary_key=True)
    command = Column(String, nullable=False)
    suite = Column(String, nullable=True)  # verify runs only
    seed = Column(String, nullable=False)  # u64 does not fit a signed SQLite integer
    threads = Column(Integer, default=1)
    config_json = Column(Text, nullable=False)
    engine_version = Column(String, nullable=False)

    status = Column(Enum(RunStatus), default=RunStatus.PENDING)

    created_at = Column(DateTime, default=datetime.datetime.utcnow)
    started_at = Column(DateTime, nullable=True)
    completed_at = Column(DateTime, nullable=True)
    duration = Column(Float, nullable=True)  # seconds

    report_json = Column(Text, nullable=True)
    output_path = Column(String, nullable=True)
    last_error = Column(String, nullable=True)

    checks = relationship("CheckResult", back_populates="run", cascade="all, delete-orphan")

    def __repr__(self):
        return f"<ExperimentRun(id={self.id}, command='{self.command}', status='{self.status}')>"

class CheckResult(Base):
    __tablename__ = 'check_results'

    id = Column(Integer, primary_key=True)
    run_id = Column(Integer, ForeignKey('experiment_runs.id'), nullable=False)
    name = Column(String, nullable=False)
    anchor = Column(String, nullable=False)
    point = Column(Float, nullable=True)
    interval_lo = Column(Float, nullable=True)
    interval_hi = Column(Float, nullable=True)
    bound = Column(Float, nullable=True)
    verdict = Column(String, nullable=False)
    note = Column(String, nullable=True)

    run = relationship("ExperimentRun", back_populates="checks")

    def __repr__(self):
        return f"<CheckResult(name='{self.name}', verdict='{self.verdict}')>"
