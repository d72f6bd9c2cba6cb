"""
This module defines the store that keeps sweep results in an abstract, database-agnostic way

A run is one invocation of a sweep: its effective configuration (the config-file text
that reproduces it) plus the CSV rows it produced, in order.

To add a backend, inherit from BaseDBSession. In the concrete DB class's __init__,
create a sqlalchemy Engine using sqlalchemy.create_engine and pass the engine to super().__init__,
which initializes a Session for the lifetime of the object at self.session.
"""

import time
import uuid

from abc import ABC
from sqlalchemy import Column, Float, Integer, String, Text, desc
from sqlalchemy.engine.base import Engine
from sqlalchemy.orm import sessionmaker, declarative_base

from ehrelay.sweep import SweepRow


MAX_NAME_LEN = 32


# Table definitions/Models
#
# https://docs.sqlalchemy.org/en/20/orm/mapping_api.html#sqlalchemy.orm.declarative_base
BaseRecord = declarative_base()

class RunRecord(BaseRecord):
    __tablename__ = 'runs'
    uid = Column(String(37), primary_key=True)
    timestamp = Column(Float(), nullable=False)
    label = Column(String(128), nullable=True)
    config = Column(Text(), nullable=False)

    def __init__(self, session=None, *args, **kwargs):
        self.session = session
        super().__init__(*args, **kwargs)

    def __repr__(self):
        return f'RunRecord(uid={self.uid}, label={self.label}, timestamp={self.timestamp})'

    def insert_run(self, config: str, label=None) -> str:
        """
        add a run, identified by the returned uid
        """
        uid = BaseDBSession.get_uuid()
        self.session.add(RunRecord(
            uid=uid,
            timestamp=time.time(),
            label=label,
            config=config))
        self.session.commit()
        return uid

    def retrieve_run(self, uid: str):
        """
        the config text the run was made with, None for unknown uids
        """
        ret = self.session.query(RunRecord).filter_by(uid=uid).first()
        if ret is None:
            return None
        return ret.config

    def delete_run(self, uid: str) -> bool:
        """ removes the run and its rows, returns whether the run existed """
        self.session.query(SweepRowRecord).filter_by(run_uid=uid).delete()
        deleted = self.session.query(RunRecord).filter_by(uid=uid).delete()
        self.session.commit()
        return deleted != 0

    def most_recent_runs(self, limit=3) -> list:
        """
        (uid, label, timestamp) of the latest runs, newest first
        """
        query = self.session.query(RunRecord).order_by(desc(RunRecord.timestamp)).limit(limit)
        return [(record.uid, record.label, record.timestamp) for record in query.all()]


class SweepRowRecord(BaseRecord):
    __tablename__ = 'sweep_rows'
    uid = Column(String(37), primary_key=True)
    run_uid = Column(String(37), nullable=False, index=True)
    position = Column(Integer(), nullable=False)
    snr_db = Column(Float(), nullable=False)
    strategy = Column(String(MAX_NAME_LEN), nullable=False)
    metric = Column(String(MAX_NAME_LEN), nullable=False)
    method = Column(String(MAX_NAME_LEN), nullable=False)
    value = Column(Float(), nullable=False)
    stderr = Column(Float(), nullable=True)
    trials = Column(Integer(), nullable=True)
    seed = Column(Integer(), nullable=True)

    def __init__(self, session=None, *args, **kwargs):
        self.session = session
        super().__init__(*args, **kwargs)

    def __repr__(self):
        return f'SweepRowRecord(run_uid={self.run_uid}, snr_db={self.snr_db}, '\
               f'strategy={self.strategy}, metric={self.metric}, method={self.method})'

    def insert_rows(self, run_uid: str, rows) -> int:
        """
        append sweep rows to a run, returns how many were written
        """
        # TODO reject rows for run uids that were never inserted
        count = self.session.query(SweepRowRecord).filter_by(run_uid=run_uid).count()
        written = 0
        for position, row in enumerate(rows, start=count):
            self.session.add(SweepRowRecord(
                uid=BaseDBSession.get_uuid(),
                run_uid=run_uid,
                position=position,
                snr_db=row.snr_db,
                strategy=row.strategy,
                metric=row.metric,
                method=row.method,
                value=row.value,
                stderr=row.stderr,
                trials=row.trials,
                seed=row.seed))
            written += 1
        self.session.commit()
        return written

    def retrieve_rows(self, run_uid: str) -> list:
        """
        the run's rows in insertion order, empty for unknown runs
        """
        query = self.session.query(SweepRowRecord).filter_by(run_uid=run_uid)
        query = query.order_by(SweepRowRecord.position)
        return [SweepRow(record.snr_db, record.strategy, record.metric, record.method,
                         record.value, record.stderr, record.trials, record.seed)
                for record in query.all()]


# Database Session handler
#
#
class BaseDBSession(ABC):
    """
    Exposes database query routines
    TODO separate concerns of session management vs query logic without breaking interface
    """
    def __init__(self, engine: Engine):
        Session = sessionmaker(bind=engine)
        self.session = Session()

        BaseRecord.metadata.create_all(engine)
        self._records = [
            RunRecord(self.session),
            SweepRowRecord(self.session)
        ]
        self._register_record_methods()


    def _register_record_methods(self):
        """
        this makes sense to do at runtime right now, because it's easier to maintain self._records
        than it is to manually maintain a set of wrapper functions
        """
        for Record in self._records:
            for name in dir(Record):
                if name.startswith('_'):
                    continue
                attr = getattr(Record, name)
                if callable(attr) and not hasattr(self, name):
                    setattr(self, name, attr)


    @staticmethod
    def get_uuid() -> str:
        return str(uuid.uuid4())
