from os import environ

import sqlalchemy

from .base_model import BaseDBSession


DEFAULT_DB_PATH = 'ehrelay.db'


class Sqlite3DBSession(BaseDBSession):
    def __init__(self, path=None):
        if path is None:
            path = environ.get('EHRELAY_DB_PATH', DEFAULT_DB_PATH)
        engine = sqlalchemy.create_engine(f'sqlite:///{path}')
        self.engine = engine
        super().__init__(engine)
