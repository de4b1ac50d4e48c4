from sqlalchemy import create_engine
from sqlalchemy.orm import declarative_base, sessionmaker

from windflex.config import settings

Base = declarative_base()

engine = None
_configured = False
SessionLocal = sessionmaker(expire_on_commit=False)


def _normalize_db_url(url: str) -> str:
    """Accept plain paths as sqlite files."""
    if not url:
        return url
    if "://" not in url:
        return f"sqlite:///{url}"
    return url


def configure(url: str | None = None):
    """(Re)bind the registry to ``url``; falls back to WINDFLEX_DATABASE_URL."""
    global engine, _configured
    _configured = True
    url = _normalize_db_url(settings.database_url if url is None else url)
    if not url:
        engine = None
        return None
    connect_args = {"check_same_thread": False} if url.startswith("sqlite") else {}
    engine = create_engine(url, pool_pre_ping=True, connect_args=connect_args)
    SessionLocal.configure(bind=engine)
    return engine


def get_engine():
    if not _configured:
        configure()
    return engine
