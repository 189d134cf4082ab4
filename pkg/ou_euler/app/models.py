from datetime import datetime

from sqlalchemy import JSON, Boolean, Column, DateTime, Float, ForeignKey, Integer, String
from sqlalchemy.orm import relationship

from .database import Base


class ExperimentRun(Base):
    __tablename__ = "runs"
    run_id = Column(String, primary_key=True)
    command = Column(String)
    created_at = Column(DateTime, default=datetime.utcnow)
    completed_at = Column(DateTime, nullable=True)
    status = Column(String)  # QUEUED, PROCESSING, PASSED, FAILED, ERROR
    run_dir = Column(String)
    config = Column(JSON)
    logs = Column(String, nullable=True)

    checks = relationship("CheckRecord", back_populates="run", cascade="all, delete-orphan")


class CheckRecord(Base):
    __tablename__ = "checks"
    id = Column(Integer, primary_key=True, autoincrement=True)
    run_id = Column(String, ForeignKey("runs.run_id"))
    name = Column(String)
    passed = Column(Boolean)
    measured = Column(Float, nullable=True)
    tolerance = Column(Float, nullable=True)
    detail = Column(String, nullable=True)

    run = relationship("ExperimentRun", back_populates="checks")
