from pathlib import Path
from typing import Dict, Optional, Union

from sqlalchemy import create_engine
from sqlalchemy.engine import Engine
from sqlalchemy.orm import Session, declarative_base, sessionmaker

from .config import settings

Base = declarative_base()

_engines: Dict[str, Engine] = {}


def database_url(output_dir: Union[str, Path]) -> str:
    """OUE_DATABASE_URL if set, else a SQLite registry next to the run directories."""
    if settings.DATABASE_URL:
        return settings.DATABASE_URL
    return f"sqlite:///{Path(output_dir).resolve() / 'runs.db'}"


def get_engine(url: str) -> Engine:
    if url not in _engines:
        connect_args = {"check_same_thread": False} if url.startswith("sqlite") else {}
        _engines[url] = create_engine(url, connect_args=connect_args)
        init_db(_engines[url])
    return _engines[url]


def init_db(engine: Engine):
    # models must be imported so their tables are registered on Base
    from . import models  # noqa: F401
    Base.metadata.create_all(bind=engine)


def get_session(output_dir: Union[str, Path], url: Optional[str] = None) -> Session:
    engine = get_engine(url or database_url(output_dir))
    return sessionmaker(autocommit=False, autoflush=False, bind=engine)()
